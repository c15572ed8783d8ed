//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails, including on its runtime budget.

use std::f64::consts::{PI, SQRT_2};
use std::path::Path;
use std::time::{Duration, Instant};

use delay_blowup::blowup::{
    alpha_constant, classify_run, threshold_search, verify_theorem1_bounds, Classification,
    RunRequest,
};
use delay_blowup::integrator::{
    convergence_study, integrate_dde, integrate_ode, Advance, IntegratorOptions, OracleProblem,
};
use delay_blowup::model::{
    nondelay_exact_radius, theorem1_history, CartesianDde, ModelParams, NonDelayPolar, PhiTilde,
    Stage1Cartesian,
};
use delay_blowup::periodic::{enumerate_equilibria, k0_maximum, limit_cycle_branch_point, radius_from_omega};
use delay_blowup_cli::commands::seeded_run;
use delay_blowup_cli::{execute, Config};
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_equilibrium_residuals() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for tau in [0.2, 1.0, 2.0 * PI] {
        for p in enumerate_equilibria(tau, 5).map_err(|e| e.to_string())? {
            let (a, b) = p.residuals();
            worst = worst.max(a.abs()).max(b.abs()).max(p.relation_residual().abs());
            count += 1;
        }
    }
    ensure(
        count > 0 && worst < 1e-10,
        format!("{count} equilibria, max residual {worst:.2e}"),
    )
}

fn c2_remark() -> Outcome {
    let m = k0_maximum();
    let r4tau = radius_from_omega(m.omega_star).powi(4) * m.tau_star;
    ensure(
        (r4tau - 1.0).abs() < 1e-8 && m.omega_star > 2.0 && m.omega_star < 3.0,
        format!(
            "omega* = {:.10}, tau* = {:.10}, |r^4 tau - 1| = {:.2e}",
            m.omega_star,
            m.tau_star,
            (r4tau - 1.0).abs()
        ),
    )
}

fn c3_integrator_oracle() -> Outcome {
    let opts = IntegratorOptions::default();
    let mut worst = 0.0f64;
    for r0 in [0.1, 1.0, 2.0] {
        let t = integrate_ode(&NonDelayPolar, [r0, 0.0], (0.0, 10.0), &opts).map_err(|e| e.to_string())?;
        for (&at, y) in t.knots().iter().zip(t.states()) {
            worst = worst.max((y[0] - nondelay_exact_radius(r0, at)).abs());
        }
        for k in 0..=1000 {
            let at = 10.0 * k as f64 / 1000.0;
            let y = t.eval(at).map_err(|e| e.to_string())?;
            worst = worst.max((y[0] - nondelay_exact_radius(r0, at)).abs());
        }
    }
    let steps = [0.2, 0.1, 0.05, 0.025];
    let problem = OracleProblem::NonDelayPolar { r0: 0.1, t_end: 10.0 };
    let fifth = convergence_study(problem, &steps, Advance::Fifth).map_err(|e| e.to_string())?;
    let fourth =
        convergence_study(problem, &steps, Advance::EmbeddedFourth).map_err(|e| e.to_string())?;
    let ratios = fourth.knot_ratios();
    let ratios_ok = ratios.iter().all(|r| (r - 16.0).abs() <= 0.2 * 16.0);
    let fmt = |v: &[f64]| v.iter().map(|r| format!("{r:.1}")).collect::<Vec<_>>().join("/");
    ensure(
        worst < 1e-8 && fifth.min_knot_order() >= 4.0 && fifth.min_dense_order() >= 3.0 && ratios_ok,
        format!(
            "max adaptive error {worst:.2e}; 5th-order advance order {:.2} (ratios {}), dense order {:.2}; embedded 4th ratios {}",
            fifth.min_knot_order(),
            fmt(&fifth.knot_ratios()),
            fifth.min_dense_order(),
            fmt(&ratios)
        ),
    )
}

fn c4_method_of_steps() -> Outcome {
    let opts = IntegratorOptions::default();
    let delta = 5.0;
    let p = ModelParams::new(1.0, delta).map_err(|e| e.to_string())?;
    let h = theorem1_history(&p, PhiTilde::Linear).map_err(|e| e.to_string())?;
    let dde = integrate_dde(&CartesianDde(p), &h, 0.5, &opts).map_err(|e| e.to_string())?;
    let ode = integrate_ode(&Stage1Cartesian(p), [0.0, -delta], (0.0, 0.5), &opts)
        .map_err(|e| e.to_string())?;
    let t_end = dde.t_stop().min(ode.t_stop());
    let (mut abs_small, mut rel) = (0.0f64, 0.0f64);
    for k in 0..=5000 {
        let at = t_end * k as f64 / 5000.0;
        let a = dde.eval(at).map_err(|e| e.to_string())?;
        let b = ode.eval(at).map_err(|e| e.to_string())?;
        let d = (a[0] - b[0]).abs().max((a[1] - b[1]).abs());
        let r = a[0].hypot(a[1]);
        rel = rel.max(d / r.max(1.0));
        if r <= 1e3 {
            abs_small = abs_small.max(d);
        }
    }
    ensure(
        rel < 1e-8 && abs_small < 1e-8,
        format!(
            "compared on [0, {t_end:.6}] (blow-up before 0.5): max relative gap {rel:.2e}, max absolute gap while r <= 1e3 {abs_small:.2e}"
        ),
    )
}

fn c5_theorem1_bounds() -> Outcome {
    let alpha = ((2.0 - SQRT_2) / (2.0 + SQRT_2)).powf(1.0 / (2.0 * SQRT_2));
    let (delta, tau) = (100.0, 1.0);
    let (_, rep) = verify_theorem1_bounds(delta, tau, PhiTilde::Linear, &IntegratorOptions::default())
        .map_err(|e| e.to_string())?;
    let t_est = rep.t_est.ok_or("no blow-up time")?;
    let tq = rep.t_quarter.ok_or("theta never reached -pi/4")?;
    let rq = rep.r_at_quarter.ok_or("no r(t_quarter)")?;
    let t0 = rep.t_zero.ok_or("theta never reached 0")?;
    let r0 = rep.r_at_zero.ok_or("no r(t_zero)")?;
    let pole = t0 + 1.0 / (delta * r0);
    let ok = rep.classification == Classification::BlowUp
        && (alpha - alpha_constant()).abs() < 1e-15
        && t_est < 0.5
        && tq <= 0.25
        && rq >= alpha * delta
        && t0 - tq <= 0.125
        && t_est <= pole + 1e-3
        && rep.all_pass();
    ensure(
        ok,
        format!(
            "alpha = {alpha:.10}, T_est = {t_est:.4e}, t_-pi/4 = {tq:.4e}, r = {rq:.3} >= {:.3}, t_0 - t_-pi/4 = {:.4e}, pole bound {pole:.4e}",
            alpha * delta,
            t0 - tq
        ),
    )
}

/// Runs a figure through the harness and returns its JSON report.
fn run_figure(name: &str, dir: &Path) -> Result<Value, String> {
    let mut cfg = Config::defaults("figure").map_err(|e| e.to_string())?;
    cfg.set("name", name).map_err(|e| e.to_string())?;
    cfg.set("out_dir", dir.display().to_string()).map_err(|e| e.to_string())?;
    cfg.set("format", "csv,json").map_err(|e| e.to_string())?;
    execute(&cfg).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(dir.join(format!("figure_{name}.json"))).map_err(|e| e.to_string())?;
    let v: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    Ok(v["report"].clone())
}

fn runs_of(report: &Value) -> Vec<(f64, String, Value)> {
    report["runs"]
        .as_array()
        .map(|a| {
            a.iter()
                .map(|r| {
                    (
                        r["delta"].as_f64().unwrap_or(f64::NAN),
                        r["report"]["classification"].as_str().unwrap_or("error").to_string(),
                        r.clone(),
                    )
                })
                .collect()
        })
        .unwrap_or_default()
}

fn c6_figure_tau1() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = run_figure("tau1", dir.path())?;
    let runs = runs_of(&report);
    let ok = runs.len() == 4
        && runs
            .iter()
            .all(|(_, c, r)| c == "blow-up" && r["monotone_divergence"].as_bool() == Some(true));
    let detail = runs
        .iter()
        .map(|(d, c, r)| format!("{d}: {c} T={:.4}", r["report"]["T_est"].as_f64().unwrap_or(f64::NAN)))
        .collect::<Vec<_>>()
        .join(", ");
    ensure(ok, detail)
}

fn c7_figure_tau02() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = run_figure("tau02", dir.path())?;
    let runs = runs_of(&report);
    if runs.len() != 2 {
        return Err(format!("{} runs", runs.len()));
    }
    let std = runs[0].2["report"]["tail_radius_std"].as_f64().unwrap_or(f64::INFINITY);
    let orbit = dir.path().join("figure_tau02.csv").exists();
    ensure(
        runs[0].0 == 2.0 && runs[0].1 == "bounded" && std < 1e-3 && runs[1].1 == "blow-up" && orbit,
        format!("delta=2: {} (tail std {std:.2e}), delta=3: {}", runs[0].1, runs[1].1),
    )
}

fn c8_threshold() -> Outcome {
    let opts = IntegratorOptions::default();
    let res = threshold_search(0.2, 2.0, 3.0, 0.01, &PhiTilde::Linear, &opts).map_err(|e| e.to_string())?;
    let tight = IntegratorOptions {
        rel_tol: opts.rel_tol / 10.0,
        ..opts.clone()
    };
    let mut changed = Vec::new();
    for p in &res.probes {
        let req = RunRequest::new(ModelParams::new(0.2, p.delta).map_err(|e| e.to_string())?);
        let (_, rep) = classify_run(&req, &tight).map_err(|e| e.to_string())?;
        if rep.classification != p.classification {
            changed.push(p.delta);
        }
    }
    ensure(
        res.width() < 0.01 && res.is_monotone() && changed.is_empty(),
        format!(
            "boundary in [{:.6}, {:.6}] after {} probes; classifications changed at rel_tol/10: {changed:?}",
            res.lower,
            res.upper,
            res.probes.len()
        ),
    )
}

fn c9_periodic_seed() -> Outcome {
    let p = limit_cycle_branch_point(0.2)
        .map_err(|e| e.to_string())?
        .ok_or("no branch point at tau = 0.2")?;
    let run = seeded_run(&p, 5.0, &IntegratorOptions::default());
    if let Some(e) = run.error {
        return Err(e);
    }
    let drift = run.drift.unwrap_or(f64::INFINITY);
    ensure(
        drift < 1e-6,
        format!("omega* = {:.8}, r* = {:.8}, max |r - r*| on [0, 1] = {drift:.2e}", p.omega, p.r),
    )
}

fn c10_figure_tau001() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = run_figure("tau001", dir.path())?;
    let runs = runs_of(&report);
    let all_classified = runs.len() == 6 && runs.iter().all(|(_, c, _)| c != "error");
    let curves = std::fs::read_to_string(dir.path().join("figure_tau001.csv"))
        .map(|s| s.lines().count() > runs.len())
        .unwrap_or(false);
    let th = &report["threshold"];
    let (lo, hi) = (th["lower"].as_f64().unwrap_or(f64::NAN), th["upper"].as_f64().unwrap_or(f64::NAN));
    let mut probes: Vec<(f64, String)> = th["probes"]
        .as_array()
        .map(|a| {
            a.iter()
                .map(|p| (p["delta"].as_f64().unwrap_or(f64::NAN), p["classification"].as_str().unwrap_or("").to_string()))
                .collect()
        })
        .unwrap_or_default();
    probes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let first_blow = probes.iter().position(|p| p.1 == "blow-up").unwrap_or(probes.len());
    let monotone = probes[first_blow..].iter().all(|p| p.1 == "blow-up");
    let split = runs.iter().map(|(d, c, _)| format!("{d}: {c}")).collect::<Vec<_>>().join(", ");
    ensure(
        all_classified && curves && monotone && lo >= 13.0 && hi <= 14.5,
        format!("{split}; threshold_search boundary in [{lo:.6}, {hi:.6}]"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("equilibrium residuals", Duration::from_secs(1), c1_equilibrium_residuals),
        ("turning point r^4 tau = 1", Duration::from_millis(100), c2_remark),
        ("integrator oracle and order", Duration::from_secs(5), c3_integrator_oracle),
        ("method-of-steps equivalence", Duration::from_secs(2), c4_method_of_steps),
        ("blow-up estimates at delta = 100", Duration::from_secs(2), c5_theorem1_bounds),
        ("figure tau1", Duration::from_secs(10), c6_figure_tau1),
        ("figure tau02", Duration::from_secs(10), c7_figure_tau02),
        ("threshold bracketing", Duration::from_secs(60), c8_threshold),
        ("periodic seeding", Duration::from_secs(2), c9_periodic_seed),
        ("figure tau001 sweep", Duration::from_secs(60), c10_figure_tau001),
    ];
    let mut failed = 0;
    for (i, (title, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= *budget;
        let (pass, detail) = match outcome {
            Ok(d) => (in_budget, d),
            Err(d) => (false, d),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2}: {title} [{:.3}s / {}s budget{}] {detail}",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64(),
            budget.as_secs_f64(),
            if in_budget { "" } else { ", OVER BUDGET" }
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
