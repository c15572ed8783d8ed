use std::f64::consts::FRAC_PI_2;
use std::path::PathBuf;

use delay_blowup::blowup::{
    classify_trajectory, probe, threshold_search_with, verify_theorem1_bounds, BlowupReport,
    BoundsReport, CheckStatus, Classification, ModelForm, Probe, RunRequest, ThresholdResult,
    DEFAULT_TAIL_WINDOW,
};
use delay_blowup::integrator::{
    integrate_dde, integrate_ode, IntegratorOptions, StepStats, Trajectory,
};
use delay_blowup::model::{
    nondelay_exact_radius, to_cartesian, to_polar, CartesianState, ModelParams, NonDelayCartesian,
    NonDelayPolar, PhiTilde, PolarDde, PolarState,
};
use delay_blowup::periodic::{
    bifurcation_diagram, enumerate_equilibria, k0_maximum, limit_cycle_branch_point,
    periodic_seed_history, BranchSample, EquilibriumPoint, K0Maximum,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::error::{CliError, EXIT_CHECK_FAILED, EXIT_NUMERICAL, EXIT_OK};
use crate::output::{num, opt_num, short, short_opt, table, Csv, Sink};
use crate::svg::{Plot, Series};

/// Result of a command that ran to completion.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
}

/// A named pass/fail line in a command report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            pass,
            detail,
        }
    }
}

fn verdict_table(verdicts: &[Verdict]) -> String {
    let rows: Vec<Vec<String>> = verdicts
        .iter()
        .map(|v| {
            vec![
                v.name.clone(),
                if v.pass { "pass" } else { "FAIL" }.into(),
                v.detail.clone(),
            ]
        })
        .collect();
    table(&["check", "status", "detail"], &rows)
}

fn exit_for(verdicts: &[Verdict]) -> i32 {
    if verdicts.iter().all(|v| v.pass) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

pub fn execute(cfg: &Config) -> Result<Outcome, CliError> {
    match cfg.command() {
        "simulate" => cmd_simulate(cfg),
        "figure" => cmd_figure(cfg),
        "verify-theorem1" => cmd_verify_theorem1(cfg),
        "periodic" => cmd_periodic(cfg),
        "threshold" => cmd_threshold(cfg),
        other => Err(CliError::Usage(format!("unknown command '{other}'"))),
    }
}

fn pool(cfg: &Config) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers()?)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

fn parse_form(cfg: &Config) -> Result<ModelForm, CliError> {
    match cfg.raw("form") {
        "polar" => Ok(ModelForm::Polar),
        "cartesian" => Ok(ModelForm::Cartesian),
        other => Err(CliError::Usage(format!(
            "unknown form '{other}' (expected polar or cartesian)"
        ))),
    }
}

/// One trajectory sample in both coordinate systems.
#[derive(Debug, Clone, Copy)]
struct Sample {
    t: f64,
    x: f64,
    y: f64,
    r: f64,
    theta: f64,
}

fn samples(traj: &Trajectory<2>, form: ModelForm, theta_hint: f64) -> Vec<Sample> {
    let mut hint = theta_hint;
    traj.knots()
        .iter()
        .zip(traj.states())
        .map(|(&t, s)| match form {
            ModelForm::Polar => {
                let c = to_cartesian(PolarState {
                    r: s[0],
                    theta: s[1],
                });
                Sample {
                    t,
                    x: c.x,
                    y: c.y,
                    r: s[0],
                    theta: s[1],
                }
            }
            ModelForm::Cartesian => {
                let c = CartesianState { x: s[0], y: s[1] };
                if let Ok(p) = to_polar(c, hint) {
                    hint = p.theta;
                }
                Sample {
                    t,
                    x: s[0],
                    y: s[1],
                    r: c.radius(),
                    theta: hint,
                }
            }
        })
        .collect()
}

fn trajectory_csv(rows: &[Sample], delta: Option<f64>) -> Csv {
    let mut header = vec!["t", "x", "y", "r", "theta"];
    if delta.is_some() {
        header.insert(0, "delta");
    }
    let mut csv = Csv::new(&header);
    append_rows(&mut csv, rows, delta);
    csv
}

fn append_rows(csv: &mut Csv, rows: &[Sample], delta: Option<f64>) {
    for s in rows {
        let mut cells: Vec<String> = delta.map(num).into_iter().collect();
        cells.extend([s.t, s.x, s.y, s.r, s.theta].map(num));
        csv.row(&cells);
    }
}

/// `r(t)` points truncated at `r_max`.
fn radius_points(rows: &[Sample], r_max: f64) -> Vec<(f64, f64)> {
    rows.iter().map(|s| (s.t, s.r.min(r_max))).collect()
}

/// `(x, y)` points up to the first exit from the disc of radius `clip`.
fn orbit_points(rows: &[Sample], clip: f64) -> Vec<(f64, f64)> {
    rows.iter()
        .take_while(|s| s.r <= clip)
        .map(|s| (s.x, s.y))
        .collect()
}

/// True when, from the first knot with `r >= level` on, the radius never decreases.
fn monotone_divergence(rows: &[Sample], level: f64) -> bool {
    match rows.iter().position(|s| s.r >= level) {
        Some(i) => rows[i..].windows(2).all(|w| w[1].r >= w[0].r),
        None => false,
    }
}

fn blowup_row(label: String, rep: &BlowupReport) -> Vec<String> {
    vec![
        label,
        rep.classification.to_string(),
        short_opt(rep.t_est),
        short(rep.t_stop),
        short(rep.r_last),
        short_opt(rep.tail_radius_std),
    ]
}

const BLOWUP_HEADER: [&str; 6] = ["run", "classification", "T_est", "t_stop", "r_last", "tail_std"];

#[derive(Debug, Serialize)]
struct SimulateReport {
    tau: f64,
    delta: Option<f64>,
    form: ModelForm,
    phi_tilde: Option<&'static str>,
    blowup: Option<BlowupReport>,
    error: Option<String>,
    stats: StepStats,
    closed_form_max_error: Option<f64>,
    checks: Vec<Verdict>,
}

pub fn cmd_simulate(cfg: &Config) -> Result<Outcome, CliError> {
    let opts = cfg.integrator_options()?;
    let tau = cfg.f64("tau")?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(CliError::Usage(format!("tau must be >= 0, got {tau}")));
    }
    let form = parse_form(cfg)?;
    let orbit_clip = cfg.positive("orbit_clip")?;
    let nondelay = tau == 0.0;

    let (traj, delta, phi, hint, r0) = if nondelay {
        let r0 = cfg.positive("r0")?;
        let th0 = cfg.f64("theta0")?;
        let traj = match form {
            ModelForm::Polar => integrate_ode(&NonDelayPolar, [r0, th0], (0.0, opts.t_horizon), &opts)?,
            ModelForm::Cartesian => {
                let c = to_cartesian(PolarState { r: r0, theta: th0 });
                integrate_ode(&NonDelayCartesian, [c.x, c.y], (0.0, opts.t_horizon), &opts)?
            }
        };
        (traj, None, None, th0, Some(r0))
    } else {
        let delta = cfg.positive("delta")?;
        let phi = cfg.phi_tilde()?;
        let req = RunRequest::new(ModelParams::new(tau, delta)?)
            .with_form(form)
            .with_phi_tilde(phi.clone());
        (req.integrate(&opts)?, Some(delta), Some(phi.name()), -FRAC_PI_2, None)
    };

    let mut sink = Sink::open(cfg, "simulate")?;
    let rows = samples(&traj, form, hint);
    let classified = classify_trajectory(&traj, form, &opts, DEFAULT_TAIL_WINDOW);
    let (blowup, error) = match classified {
        Ok(rep) => (Some(rep), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let mut checks = Vec::new();
    let closed_form_max_error = r0.map(|r0| {
        rows.iter()
            .map(|s| (s.r - nondelay_exact_radius(r0, s.t)).abs())
            .fold(0.0, f64::max)
    });
    if let Some(err) = closed_form_max_error {
        let tol = cfg.positive("closed_form_tol")?;
        checks.push(Verdict::new(
            "closed_form_radius",
            err < tol,
            format!("max |r - r_exact| = {err:.3e}, tolerance {tol:.1e}"),
        ));
    }

    sink.csv("simulate_trajectory.csv", &trajectory_csv(&rows, None))?;
    let title = match delta {
        Some(d) => format!("tau = {tau}, delta = {d}"),
        None => format!("tau = 0, r0 = {}", r0.unwrap_or_default()),
    };
    sink.svg("simulate_r.svg", || {
        let mut plot = Plot {
            title: title.clone(),
            x_label: "t".into(),
            y_label: "r(t)".into(),
            series: vec![Series::line("r", radius_points(&rows, opts.r_max))],
            ..Plot::default()
        };
        if let Some(rep) = &blowup {
            if rep.classification == Classification::BlowUp {
                plot.log_y = true;
                plot.h_markers.push((opts.r_max, "r_max".into()));
                if let Some(t) = rep.t_est {
                    plot.v_markers.push((t, format!("T = {}", short(t)), Some(0)));
                }
            }
        }
        plot.render()
    })?;
    sink.svg("simulate_orbit.svg", || {
        Plot {
            title: title.clone(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![Series::line("orbit", orbit_points(&rows, orbit_clip))],
            ..Plot::default()
        }
        .render()
    })?;

    let report = SimulateReport {
        tau,
        delta,
        form,
        phi_tilde: phi,
        blowup: blowup.clone(),
        error: error.clone(),
        stats: traj.stats(),
        closed_form_max_error,
        checks: checks.clone(),
    };
    sink.json("simulate_report.json", cfg, &report)?;

    match &blowup {
        Some(rep) => print!("{}", table(&BLOWUP_HEADER, &[blowup_row("simulate".into(), rep)])),
        None => println!("run stopped: {}", error.as_deref().unwrap_or("")),
    }
    if !checks.is_empty() {
        print!("{}", verdict_table(&checks));
    }
    let exit_code = if error.is_some() {
        EXIT_NUMERICAL
    } else {
        exit_for(&checks)
    };
    Ok(Outcome {
        exit_code,
        files: sink.written().to_vec(),
    })
}

/// Parameter sets of the reproduced figures.
pub fn figure_deltas(name: &str) -> Option<(f64, &'static [f64])> {
    match name {
        "tau1" => Some((1.0, &[0.01, 0.1, 1.0, 5.0])),
        "tau02" => Some((0.2, &[2.0, 3.0])),
        "tau001" => Some((0.01, &[13.7, 13.73, 13.74, 13.75, 13.8, 13.9])),
        _ => None,
    }
}

pub const FIGURES: &[&str] = &["tau1", "tau02", "tau001", "diagram"];

#[derive(Debug, Clone, Serialize)]
pub struct SweepRun {
    pub delta: f64,
    pub report: Option<BlowupReport>,
    pub error: Option<String>,
    pub monotone_divergence: Option<bool>,
    #[serde(skip)]
    rows: Vec<Sample>,
}

#[derive(Debug, Serialize)]
struct SweepReport {
    name: String,
    tau: f64,
    phi_tilde: &'static str,
    runs: Vec<SweepRun>,
    threshold: Option<ThresholdResult>,
    threshold_error: Option<String>,
    checks: Vec<Verdict>,
}

/// Runs the constructed history for each `delta`, in parallel; results are
/// in the order of `deltas`.
fn sweep(
    pool: &rayon::ThreadPool,
    tau: f64,
    deltas: &[f64],
    phi: &PhiTilde,
    opts: &IntegratorOptions,
    monotone_level: f64,
) -> Result<Vec<SweepRun>, CliError> {
    let mut runs = Vec::with_capacity(deltas.len());
    for &d in deltas {
        ModelParams::new(tau, d)?;
        runs.push(d);
    }
    Ok(pool.install(|| {
        runs.par_iter()
            .map(|&delta| {
                let req = RunRequest::new(ModelParams::new(tau, delta).expect("validated"))
                    .with_phi_tilde(phi.clone());
                let traj = match req.integrate(opts) {
                    Ok(t) => t,
                    Err(e) => {
                        return SweepRun {
                            delta,
                            report: None,
                            error: Some(e.to_string()),
                            monotone_divergence: None,
                            rows: Vec::new(),
                        }
                    }
                };
                let rows = samples(&traj, ModelForm::Polar, -FRAC_PI_2);
                match classify_trajectory(&traj, ModelForm::Polar, opts, DEFAULT_TAIL_WINDOW) {
                    Ok(rep) => SweepRun {
                        delta,
                        monotone_divergence: (rep.classification == Classification::BlowUp)
                            .then(|| monotone_divergence(&rows, monotone_level)),
                        report: Some(rep),
                        error: None,
                        rows,
                    },
                    Err(e) => SweepRun {
                        delta,
                        report: None,
                        error: Some(e.to_string()),
                        monotone_divergence: None,
                        rows,
                    },
                }
            })
            .collect()
    }))
}

#[allow(clippy::too_many_arguments)]
fn parallel_threshold(
    pool: &rayon::ThreadPool,
    tau: f64,
    lo: f64,
    hi: f64,
    width: f64,
    per_round: usize,
    phi: &PhiTilde,
    opts: &IntegratorOptions,
) -> Result<ThresholdResult, delay_blowup::blowup::BlowupError> {
    threshold_search_with(tau, lo, hi, width, per_round, |deltas| {
        pool.install(|| {
            deltas
                .par_iter()
                .map(|&d| probe(tau, d, phi, opts))
                .collect::<Result<Vec<Probe>, _>>()
        })
    })
}

fn classification_of(run: &SweepRun) -> Option<Classification> {
    run.report.as_ref().map(|r| r.classification)
}

fn classification_label(run: &SweepRun) -> String {
    classification_of(run).map_or_else(|| "error".into(), |c| c.to_string())
}

pub fn cmd_figure(cfg: &Config) -> Result<Outcome, CliError> {
    let name = cfg.raw("name").to_string();
    if name == "diagram" {
        return cmd_diagram(cfg);
    }
    let (tau, deltas) = figure_deltas(&name).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown figure '{name}' (expected one of {})",
            FIGURES.join(", ")
        ))
    })?;
    let opts = cfg.integrator_options()?;
    let phi = cfg.phi_tilde()?;
    let orbit_clip = cfg.positive("orbit_clip")?;
    let monotone_level = cfg.positive("monotone_above")?;
    let pool = pool(cfg)?;
    let stem = format!("figure_{name}");
    let mut sink = Sink::open(cfg, &stem)?;

    let runs = sweep(&pool, tau, deltas, &phi, &opts, monotone_level)?;
    let mut checks = Vec::new();
    let completed = runs.iter().all(|r| r.error.is_none());
    checks.push(Verdict::new(
        "all_runs_completed",
        completed,
        format!("{} of {} runs classified", runs.iter().filter(|r| r.report.is_some()).count(), runs.len()),
    ));

    let mut threshold = None;
    let mut threshold_error = None;
    match name.as_str() {
        "tau1" => {
            let ok = runs.iter().all(|r| {
                classification_of(r) == Some(Classification::BlowUp)
                    && r.monotone_divergence == Some(true)
            });
            checks.push(Verdict::new(
                "all_blow_up_monotonically",
                ok,
                runs.iter()
                    .map(|r| format!("{}: {}", r.delta, classification_label(r)))
                    .collect::<Vec<_>>()
                    .join(", "),
            ));
        }
        "tau02" => {
            let bounded = &runs[0];
            let std = bounded.report.as_ref().and_then(|r| r.tail_radius_std);
            checks.push(Verdict::new(
                "delta_2_bounded_and_settled",
                classification_of(bounded) == Some(Classification::Bounded)
                    && std.is_some_and(|s| s < 1e-3),
                format!("{}, tail std {}", classification_label(bounded), short_opt(std)),
            ));
            checks.push(Verdict::new(
                "delta_3_blows_up",
                classification_of(&runs[1]) == Some(Classification::BlowUp),
                classification_label(&runs[1]),
            ));
        }
        "tau001" => {
            let lo = cfg.positive("threshold_lo")?;
            let hi = cfg.positive("threshold_hi")?;
            let width = cfg.positive("threshold_width")?;
            let per_round: usize = cfg.get("probes_per_round")?;
            match parallel_threshold(&pool, tau, lo, hi, width, per_round, &phi, &opts) {
                Ok(res) => {
                    checks.push(Verdict::new(
                        "threshold_monotone_in_bracket",
                        res.is_monotone() && res.lower >= lo && res.upper <= hi,
                        format!("boundary in [{}, {}] after {} probes", short(res.lower), short(res.upper), res.probes.len()),
                    ));
                    threshold = Some(res);
                }
                Err(e) => {
                    checks.push(Verdict::new("threshold_monotone_in_bracket", false, e.to_string()));
                    threshold_error = Some(e.to_string());
                }
            }
        }
        _ => unreachable!(),
    }

    let mut data = Csv::new(&["delta", "t", "x", "y", "r", "theta"]);
    let mut summary = Csv::new(&[
        "delta",
        "classification",
        "T_est",
        "t_stop",
        "r_last",
        "tail_radius_std",
        "monotone_divergence",
    ]);
    let mut rows_out = Vec::new();
    for run in &runs {
        append_rows(&mut data, &run.rows, Some(run.delta));
        match &run.report {
            Some(rep) => {
                summary.row(&[
                    num(run.delta),
                    rep.classification.to_string(),
                    opt_num(rep.t_est),
                    num(rep.t_stop),
                    num(rep.r_last),
                    opt_num(rep.tail_radius_std),
                    run.monotone_divergence.map(|b| b.to_string()).unwrap_or_default(),
                ]);
                rows_out.push(blowup_row(format!("delta={}", run.delta), rep));
            }
            None => {
                let err = run.error.clone().unwrap_or_default();
                summary.row(&[
                    num(run.delta),
                    format!("error: {}", err.replace(',', ";")),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
                rows_out.push(vec![format!("delta={}", run.delta), "error".into(), err, "".into(), "".into(), "".into()]);
            }
        }
    }
    sink.csv(&format!("{stem}.csv"), &data)?;
    sink.csv(&format!("{stem}_summary.csv"), &summary)?;
    if let Some(res) = &threshold {
        sink.csv(&format!("{stem}_threshold.csv"), &probe_csv(res))?;
    }

    sink.svg(&format!("{stem}_r.svg"), || {
        let mut plot = Plot {
            title: format!("r(t), tau = {tau}"),
            x_label: "t".into(),
            y_label: "r(t)".into(),
            log_y: true,
            h_markers: vec![(opts.r_max, "r_max".into())],
            ..Plot::default()
        };
        for (i, run) in runs.iter().enumerate() {
            plot.series.push(Series::line(
                format!("delta = {}", run.delta),
                radius_points(&run.rows, opts.r_max),
            ));
            if let Some(t) = run.report.as_ref().and_then(|r| r.t_est) {
                plot.v_markers.push((t, format!("T = {}", short(t)), Some(i)));
            }
        }
        plot.render()
    })?;
    if name == "tau02" {
        sink.svg(&format!("{stem}_orbit.svg"), || {
            let mut plot = Plot {
                title: format!("orbits, tau = {tau}"),
                x_label: "x".into(),
                y_label: "y".into(),
                ..Plot::default()
            };
            for run in &runs {
                plot.series.push(Series::line(
                    format!("delta = {}", run.delta),
                    orbit_points(&run.rows, orbit_clip),
                ));
            }
            plot.render()
        })?;
    }

    let report = SweepReport {
        name: name.clone(),
        tau,
        phi_tilde: phi.name(),
        runs: runs.clone(),
        threshold: threshold.clone(),
        threshold_error,
        checks: checks.clone(),
    };
    sink.json(&format!("{stem}.json"), cfg, &report)?;

    print!("{}", table(&BLOWUP_HEADER, &rows_out));
    if let Some(res) = &threshold {
        println!(
            "threshold: blow-up boundary in [{}, {}] ({} probes)",
            num(res.lower),
            num(res.upper),
            res.probes.len()
        );
    }
    print!("{}", verdict_table(&checks));
    Ok(Outcome {
        exit_code: exit_for(&checks),
        files: sink.written().to_vec(),
    })
}

#[derive(Debug, Serialize)]
struct DiagramReport {
    tau_range: (f64, f64),
    n_range: (i64, i64),
    k0_maximum: K0Maximum,
    branches: Vec<BranchSample>,
    checks: Vec<Verdict>,
}

fn cmd_diagram(cfg: &Config) -> Result<Outcome, CliError> {
    let t_lo = cfg.positive("diagram_tau_min")?;
    let t_hi = cfg.positive("diagram_tau_max")?;
    let n_max: i64 = cfg.get("diagram_n_max")?;
    let samples: usize = cfg.get("diagram_samples")?;
    let clip = cfg.positive("diagram_omega_clip")?;
    let branches = bifurcation_diagram((t_lo, t_hi), (-n_max, n_max), samples)?;
    let max = k0_maximum();
    let mut sink = Sink::open(cfg, "figure_diagram")?;

    let near = branches
        .iter()
        .flat_map(|b| &b.points)
        .filter(|p| p.n == 0 && p.omega > 1.0)
        .min_by(|a, b| a.tau.total_cmp(&b.tau));
    let checks = vec![Verdict::new(
        "branch_through_tau0_omega1",
        near.is_some_and(|p| (p.omega - 1.0).abs() < 0.1 && p.tau <= 2.0 * t_lo.max(0.01)),
        match near {
            Some(p) => format!("closest point (tau, omega) = ({}, {})", short(p.tau), short(p.omega)),
            None => "no n = 0 point with omega > 1".into(),
        },
    )];

    let mut csv = Csv::new(&["n", "tau", "omega", "r", "r4tau"]);
    for p in branches.iter().flat_map(|b| &b.points) {
        csv.row(&[p.n.to_string(), num(p.tau), num(p.omega), num(p.r), num(p.r4tau())]);
    }
    sink.csv("figure_diagram.csv", &csv)?;
    sink.svg("figure_diagram.svg", || {
        let mut plot = Plot {
            title: "constant-radius periodic solutions".into(),
            x_label: "tau".into(),
            y_label: "omega".into(),
            x_range: Some((0.0, t_hi)),
            y_range: Some((-clip, clip)),
            v_markers: vec![(max.tau_star, format!("tau* = {}", short(max.tau_star)), None)],
            ..Plot::default()
        };
        for b in &branches {
            let pts: Vec<(f64, f64)> = b.points.iter().map(|p| (p.tau, p.omega)).collect();
            plot.series.push(Series::line(format!("n = {}", b.n), pts));
        }
        plot.render()
    })?;
    let report = DiagramReport {
        tau_range: (t_lo, t_hi),
        n_range: (-n_max, n_max),
        k0_maximum: max,
        branches: branches.clone(),
        checks: checks.clone(),
    };
    sink.json("figure_diagram.json", cfg, &report)?;

    let rows: Vec<Vec<String>> = branches
        .iter()
        .map(|b| {
            let (first, last) = (b.points.first().unwrap(), b.points.last().unwrap());
            vec![
                b.n.to_string(),
                b.points.len().to_string(),
                format!("{} .. {}", short(first.omega), short(last.omega)),
            ]
        })
        .collect();
    print!("{}", table(&["n", "points", "omega range"], &rows));
    println!(
        "k0 maximum: omega* = {}, tau* = {}, r^4 tau = {}",
        num(max.omega_star),
        num(max.tau_star),
        num(max.r4tau)
    );
    print!("{}", verdict_table(&checks));
    Ok(Outcome {
        exit_code: exit_for(&checks),
        files: sink.written().to_vec(),
    })
}

#[derive(Debug, Serialize)]
struct VerifyReport<'a> {
    bounds: &'a BoundsReport,
    blowup: BlowupReport,
}

pub fn cmd_verify_theorem1(cfg: &Config) -> Result<Outcome, CliError> {
    let opts = cfg.integrator_options()?;
    let delta = cfg.positive("delta")?;
    let tau = cfg.positive("tau")?;
    let phi = cfg.phi_tilde()?;
    let (traj, bounds) = verify_theorem1_bounds(delta, tau, phi, &opts)?;
    let blowup = classify_trajectory(&traj, ModelForm::Polar, &opts, DEFAULT_TAIL_WINDOW)?;
    let mut sink = Sink::open(cfg, "verify_theorem1")?;
    let rows = samples(&traj, ModelForm::Polar, -FRAC_PI_2);

    sink.csv("verify_theorem1_trajectory.csv", &trajectory_csv(&rows, None))?;
    sink.svg("verify_theorem1_r.svg", || {
        let mut plot = Plot {
            title: format!("tau = {tau}, delta = {delta}"),
            x_label: "t".into(),
            y_label: "r(t)".into(),
            log_y: true,
            series: vec![Series::line("r", radius_points(&rows, opts.r_max))],
            h_markers: vec![
                (opts.r_max, "r_max".into()),
                (bounds.alpha_delta, "alpha delta".into()),
            ],
            ..Plot::default()
        };
        if let Some(t) = bounds.t_quarter {
            plot.v_markers.push((t, "theta = -pi/4".into(), None));
        }
        if let Some(t) = bounds.t_zero {
            plot.v_markers.push((t, "theta = 0".into(), None));
        }
        if let Some(t) = bounds.t_est {
            plot.v_markers.push((t, format!("T = {}", short(t)), Some(0)));
        }
        plot.render()
    })?;
    sink.json(
        "verify_theorem1.json",
        cfg,
        &VerifyReport {
            bounds: &bounds,
            blowup: blowup.clone(),
        },
    )?;

    let rows: Vec<Vec<String>> = bounds
        .checks
        .iter()
        .map(|c| {
            let status = match c.status {
                CheckStatus::Pass => "pass",
                CheckStatus::Fail => "FAIL",
                CheckStatus::NotApplicable => "n/a",
            };
            vec![c.name.clone(), status.into(), c.detail.clone()]
        })
        .collect();
    println!(
        "delta = {delta}, tau = {tau}, tau' = {}, alpha*delta = {}, classification {}",
        short(bounds.tau_prime),
        short(bounds.alpha_delta),
        bounds.classification
    );
    print!("{}", table(&["check", "status", "detail"], &rows));
    Ok(Outcome {
        exit_code: if bounds.all_pass() {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        },
        files: sink.written().to_vec(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SeededRun {
    pub n: i64,
    pub omega: f64,
    pub r: f64,
    pub t_end: f64,
    /// `max |r(t) - r*|` over the knots.
    pub drift: Option<f64>,
    /// `max |theta(t) - omega t|` over the knots.
    pub phase_drift: Option<f64>,
    pub error: Option<String>,
}

/// Runs the polar system from the constant-radius history of `point`.
pub fn seeded_run(point: &EquilibriumPoint, periods: f64, opts: &IntegratorOptions) -> SeededRun {
    let t_end = periods * point.tau;
    let mut out = SeededRun {
        n: point.n,
        omega: point.omega,
        r: point.r,
        t_end,
        drift: None,
        phase_drift: None,
        error: None,
    };
    let run = ModelParams::new(point.tau, 1.0)
        .map_err(|e| e.to_string())
        .and_then(|params| {
            let opts = IntegratorOptions {
                t_horizon: opts.t_horizon.max(t_end),
                ..opts.clone()
            };
            integrate_dde(&PolarDde(params), &periodic_seed_history(point), t_end, &opts)
                .map_err(|e| e.to_string())
        });
    match run {
        Ok(traj) => {
            let (mut dr, mut dth) = (0.0f64, 0.0f64);
            for (&t, y) in traj.knots().iter().zip(traj.states()) {
                dr = dr.max((y[0] - point.r).abs());
                dth = dth.max((y[1] - point.omega * t).abs());
            }
            if traj.t_stop() < t_end {
                out.error = Some(format!("stopped at t = {}: {}", traj.t_stop(), traj.status().describe()));
            }
            out.drift = Some(dr);
            out.phase_drift = Some(dth);
        }
        Err(e) => out.error = Some(e),
    }
    out
}

#[derive(Debug, Serialize)]
struct PeriodicReport {
    tau: f64,
    n_max: u32,
    equilibria: Vec<EquilibriumPoint>,
    max_abs_residual: f64,
    max_scaled_residual: f64,
    branch_point: Option<EquilibriumPoint>,
    seeded: Vec<SeededRun>,
    checks: Vec<Verdict>,
}

/// Largest of the three residuals, absolute and relative to `r^2` / `r^4`.
pub fn point_residuals(p: &EquilibriumPoint) -> (f64, f64) {
    let (a, b) = p.residuals();
    let c = p.relation_residual();
    let r2 = (p.r * p.r).max(1.0);
    let abs = a.abs().max(b.abs()).max(c.abs());
    let scaled = (a.abs() / r2).max(b.abs() / r2).max(c.abs() / (r2 * r2));
    (abs, scaled)
}

pub fn cmd_periodic(cfg: &Config) -> Result<Outcome, CliError> {
    let tau = cfg.f64("tau")?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(CliError::Usage(format!(
            "tau must be positive for branch enumeration, got {tau}"
        )));
    }
    let n_max: u32 = cfg.get("n_max")?;
    let seed = cfg.bool("seed_run")?;
    let periods = cfg.positive("seed_periods")?;
    let drift_tol = cfg.positive("drift_tol")?;
    let res_tol = cfg.positive("residual_tol")?;
    let opts = cfg.integrator_options()?;
    let pool = pool(cfg)?;

    let points = enumerate_equilibria(tau, n_max)?;
    let branch_point = limit_cycle_branch_point(tau)?;
    let mut sink = Sink::open(cfg, "periodic")?;

    let (mut max_abs, mut max_scaled) = (0.0f64, 0.0f64);
    let mut csv = Csv::new(&["n", "tau", "omega", "r", "r4tau", "res_cos", "res_sin", "res_relation"]);
    let mut rows = Vec::new();
    for p in &points {
        let (a, b) = p.residuals();
        let (abs, scaled) = point_residuals(p);
        max_abs = max_abs.max(abs);
        max_scaled = max_scaled.max(scaled);
        csv.row(&[
            p.n.to_string(),
            num(p.tau),
            num(p.omega),
            num(p.r),
            num(p.r4tau()),
            num(a),
            num(b),
            num(p.relation_residual()),
        ]);
        rows.push(vec![
            p.n.to_string(),
            short(p.omega),
            short(p.r),
            short(p.r4tau()),
            format!("{abs:.2e}"),
        ]);
    }
    let mut checks = vec![Verdict::new(
        "equilibrium_residuals",
        max_scaled < res_tol,
        format!(
            "{} points, max residual {max_abs:.2e} (scaled {max_scaled:.2e}), tolerance {res_tol:.1e}",
            points.len()
        ),
    )];

    let mut seeded = Vec::new();
    if seed {
        seeded = pool.install(|| {
            points
                .par_iter()
                .map(|p| seeded_run(p, periods, &opts))
                .collect::<Vec<_>>()
        });
        match &branch_point {
            Some(bp) => {
                let run = seeded
                    .iter()
                    .find(|s| s.n == bp.n && s.omega == bp.omega)
                    .expect("branch point is enumerated");
                let ok = run.error.is_none() && run.drift.is_some_and(|d| d < drift_tol);
                checks.push(Verdict::new(
                    "branch_point_seeded_drift",
                    ok,
                    format!(
                        "omega = {}, drift {} over t in [0, {}], tolerance {drift_tol:.1e}",
                        short(bp.omega),
                        short_opt(run.drift),
                        short(run.t_end)
                    ),
                ));
            }
            None => checks.push(Verdict::new(
                "branch_point_seeded_drift",
                true,
                "no n = 0 point with omega > 1 at this tau; nothing to seed".into(),
            )),
        }
        let mut sc = Csv::new(&["n", "omega", "r", "t_end", "drift", "phase_drift", "error"]);
        for s in &seeded {
            sc.row(&[
                s.n.to_string(),
                num(s.omega),
                num(s.r),
                num(s.t_end),
                opt_num(s.drift),
                opt_num(s.phase_drift),
                s.error.clone().unwrap_or_default().replace(',', ";"),
            ]);
        }
        sink.csv("periodic_seeded.csv", &sc)?;
        for (row, s) in rows.iter_mut().zip(&seeded) {
            row.push(short_opt(s.drift));
        }
    }
    sink.csv("periodic_equilibria.csv", &csv)?;
    sink.svg("periodic.svg", || {
        Plot {
            title: format!("equilibria at tau = {tau}"),
            x_label: "omega".into(),
            y_label: "r".into(),
            series: vec![Series::dots(
                "(omega, r)",
                points.iter().map(|p| (p.omega, p.r)).collect(),
            )],
            ..Plot::default()
        }
        .render()
    })?;
    let report = PeriodicReport {
        tau,
        n_max,
        equilibria: points.clone(),
        max_abs_residual: max_abs,
        max_scaled_residual: max_scaled,
        branch_point,
        seeded,
        checks: checks.clone(),
    };
    sink.json("periodic.json", cfg, &report)?;

    let mut header = vec!["n", "omega", "r", "r4tau", "max_residual"];
    if seed {
        header.push("drift");
    }
    print!("{}", table(&header, &rows));
    print!("{}", verdict_table(&checks));
    Ok(Outcome {
        exit_code: exit_for(&checks),
        files: sink.written().to_vec(),
    })
}

fn probe_csv(res: &ThresholdResult) -> Csv {
    let mut probes = res.probes.clone();
    probes.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let mut csv = Csv::new(&["delta", "classification", "T_est", "t_stop"]);
    for p in &probes {
        csv.row(&[
            num(p.delta),
            p.classification.to_string(),
            opt_num(p.t_est),
            num(p.t_stop),
        ]);
    }
    csv
}

#[derive(Debug, Serialize)]
struct ThresholdReport<'a> {
    result: &'a ThresholdResult,
    monotone: bool,
    width: f64,
}

pub fn cmd_threshold(cfg: &Config) -> Result<Outcome, CliError> {
    let opts = cfg.integrator_options()?;
    let tau = cfg.positive("tau")?;
    let lo = cfg.f64("lo")?;
    let hi = cfg.f64("hi")?;
    let width = cfg.positive("width")?;
    let per_round: usize = cfg.get("probes_per_round")?;
    let phi = cfg.phi_tilde()?;
    let pool = pool(cfg)?;
    let res = parallel_threshold(&pool, tau, lo, hi, width, per_round, &phi, &opts)?;
    let mut sink = Sink::open(cfg, "threshold")?;
    sink.csv("threshold_probes.csv", &probe_csv(&res))?;
    let monotone = res.is_monotone();
    sink.json(
        "threshold.json",
        cfg,
        &ThresholdReport {
            result: &res,
            monotone,
            width: res.width(),
        },
    )?;
    let mut probes = res.probes.clone();
    probes.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let rows: Vec<Vec<String>> = probes
        .iter()
        .map(|p| {
            vec![
                format!("{:.6}", p.delta),
                p.classification.to_string(),
                short_opt(p.t_est),
            ]
        })
        .collect();
    print!("{}", table(&["delta", "classification", "T_est"], &rows));
    println!(
        "blow-up boundary in [{}, {}], width {:.3e}",
        num(res.lower),
        num(res.upper),
        res.width()
    );
    let checks = vec![Verdict::new(
        "probes_monotone",
        monotone,
        format!("{} probes", res.probes.len()),
    )];
    print!("{}", verdict_table(&checks));
    Ok(Outcome {
        exit_code: exit_for(&checks),
        files: sink.written().to_vec(),
    })
}
