//! Blow-up classification and the quantitative estimates behind the
//! constructed blow-up solution.
//!
//! A run is called a blow-up when the radius guard trips. The blow-up time
//! is then extrapolated from the tail, where `r' ~ delta r^2` makes `1/r`
//! close to linear in `t`.

use std::f64::consts::{FRAC_PI_4, SQRT_2};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::{
    find_event, integrate_dde, Direction, EventSpec, IntegratorError, IntegratorOptions,
    StopStatus, Trajectory,
};
use crate::model::{
    theorem1_history, theorem1_polar_history, CartesianDde, ModelError, ModelParams, PhiTilde,
    PolarDde,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlowupError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error("insufficient tail data: {found} points with r >= {floor:e}, need {needed}")]
    InsufficientTail {
        found: usize,
        needed: usize,
        floor: f64,
    },
    #[error("integration failed: {0}")]
    Numerical(&'static str),
    #[error("bracket invalid: {0}")]
    BracketInvalid(String),
}

/// `((2 - sqrt 2) / (2 + sqrt 2))^(1 / (2 sqrt 2))`, the factor in the lower
/// bound `r >= alpha delta` when the angle reaches `-pi/4`.
pub fn alpha_constant() -> f64 {
    ((2.0 - SQRT_2) / (2.0 + SQRT_2)).powf(1.0 / (2.0 * SQRT_2))
}

/// Equilibria of the stage-one angle equation at frozen radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaEquilibria {
    pub theta_s: f64,
    pub theta_u: f64,
    pub exists: bool,
}

/// Zeros of `1 + sqrt 2 delta r sin(theta + 3 pi/4)` in `(-pi/4, 7 pi/4)`.
///
/// They exist iff `delta r > 1/sqrt 2`. `theta_s` is the one where the
/// right-hand side decreases through zero (stable), `theta_u` the other.
pub fn theta_equilibria(delta: f64, r: f64) -> ThetaEquilibria {
    let k = SQRT_2 * delta * r;
    if !(k > 1.0) {
        return ThetaEquilibria {
            theta_s: f64::NAN,
            theta_u: f64::NAN,
            exists: false,
        };
    }
    let a = (1.0 / k).asin();
    ThetaEquilibria {
        theta_s: FRAC_PI_4 + a,
        theta_u: 5.0 * FRAC_PI_4 - a,
        exists: true,
    }
}

/// Derivative of the stage-one angle equation with respect to `theta`.
pub fn theta_rhs_slope(delta: f64, r: f64, theta: f64) -> f64 {
    SQRT_2 * delta * r * (theta + 3.0 * FRAC_PI_4).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    BlowUp,
    Bounded,
    HorizonReached,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::BlowUp => "blow-up",
            Classification::Bounded => "bounded",
            Classification::HorizonReached => "horizon-reached",
        })
    }
}

/// Length of the trailing window inspected for boundedness.
pub const DEFAULT_TAIL_WINDOW: f64 = 20.0;
/// Points needed in the `1/r` fit.
pub const MIN_TAIL_POINTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub classification: Classification,
    /// Extrapolated blow-up time; only for blow-ups.
    #[serde(rename = "T_est")]
    pub t_est: Option<f64>,
    pub r_last: f64,
    pub t_stop: f64,
    pub extrapolation_points: usize,
    pub status: StopStatus,
    /// Radius statistics over the trailing window, for runs that reached
    /// the horizon.
    pub tail_radius_mean: Option<f64>,
    pub tail_radius_std: Option<f64>,
    pub tail_radius_max: Option<f64>,
}

/// Which coordinates a run integrates in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelForm {
    Cartesian,
    Polar,
}

impl ModelForm {
    pub fn radius(self, y: &[f64; 2]) -> f64 {
        match self {
            ModelForm::Cartesian => y[0].hypot(y[1]),
            ModelForm::Polar => y[0].abs(),
        }
    }
}

/// A run of the delay system from the constructed history.
#[derive(Debug, Clone)]
pub struct RunRequest {
    pub params: ModelParams,
    pub phi_tilde: PhiTilde,
    pub form: ModelForm,
}

impl RunRequest {
    pub fn new(params: ModelParams) -> Self {
        Self {
            params,
            phi_tilde: PhiTilde::Linear,
            form: ModelForm::Polar,
        }
    }

    pub fn with_form(mut self, form: ModelForm) -> Self {
        self.form = form;
        self
    }

    pub fn with_phi_tilde(mut self, phi_tilde: PhiTilde) -> Self {
        self.phi_tilde = phi_tilde;
        self
    }

    /// Integrates up to `opts.t_horizon`.
    pub fn integrate(&self, opts: &IntegratorOptions) -> Result<Trajectory<2>, BlowupError> {
        let traj = match self.form {
            ModelForm::Cartesian => {
                let h = theorem1_history(&self.params, self.phi_tilde.clone())?;
                integrate_dde(&CartesianDde(self.params), &h, opts.t_horizon, opts)?
            }
            ModelForm::Polar => {
                let h = theorem1_polar_history(&self.params, self.phi_tilde.clone())?;
                integrate_dde(&PolarDde(self.params), &h, opts.t_horizon, opts)?
            }
        };
        Ok(traj)
    }
}

/// Least-squares zero of `1/r` against `t` over the trailing samples with
/// `r >= r_max / 100`. Returns the estimate and the number of points used.
pub fn estimate_blowup_time_from_samples(
    samples: &[(f64, f64)],
    r_max: f64,
) -> Result<(f64, usize), BlowupError> {
    let floor = r_max / 100.0;
    let tail_len = samples.iter().rev().take_while(|(_, r)| *r >= floor).count();
    if tail_len < MIN_TAIL_POINTS {
        return Err(BlowupError::InsufficientTail {
            found: tail_len,
            needed: MIN_TAIL_POINTS,
            floor,
        });
    }
    let tail = &samples[samples.len() - tail_len..];
    let t_stop = tail.last().unwrap().0;
    let n = tail_len as f64;
    // center times for conditioning
    let t_mean = tail.iter().map(|(t, _)| t).sum::<f64>() / n;
    let u_mean = tail.iter().map(|(_, r)| 1.0 / r).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, r) in tail {
        let dt = t - t_mean;
        sxy += dt * (1.0 / r - u_mean);
        sxx += dt * dt;
    }
    if !(sxx > 0.0) {
        return Ok((t_stop, tail_len));
    }
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Ok((t_stop, tail_len));
    }
    let t_zero = t_mean - u_mean / slope;
    Ok((t_zero.max(t_stop), tail_len))
}

/// Blow-up time extrapolated from the knots of `traj`.
pub fn estimate_blowup_time(
    traj: &Trajectory<2>,
    form: ModelForm,
    r_max: f64,
) -> Result<(f64, usize), BlowupError> {
    let samples: Vec<(f64, f64)> = traj
        .knots()
        .iter()
        .zip(traj.states())
        .map(|(&t, y)| (t, form.radius(y)))
        .collect();
    estimate_blowup_time_from_samples(&samples, r_max)
}

/// Classifies a finished run.
///
/// * blow-up: the guard tripped;
/// * bounded: reached `opts.t_horizon` and the radius stayed below
///   `r_max / 10` over the last `tail_window` time units;
/// * horizon-reached: reached the horizon otherwise.
pub fn classify_trajectory(
    traj: &Trajectory<2>,
    form: ModelForm,
    opts: &IntegratorOptions,
    tail_window: f64,
) -> Result<BlowupReport, BlowupError> {
    let r_last = form.radius(&traj.last_state());
    let t_stop = traj.t_stop();
    let mut report = BlowupReport {
        classification: Classification::HorizonReached,
        t_est: None,
        r_last,
        t_stop,
        extrapolation_points: 0,
        status: traj.status(),
        tail_radius_mean: None,
        tail_radius_std: None,
        tail_radius_max: None,
    };
    match traj.status() {
        StopStatus::BlowUpSuspected => {
            report.classification = Classification::BlowUp;
            let (t_est, used) = match estimate_blowup_time(traj, form, opts.r_max) {
                Ok(v) => v,
                Err(BlowupError::InsufficientTail { .. }) => (t_stop, 0),
                Err(e) => return Err(e),
            };
            report.t_est = Some(t_est);
            report.extrapolation_points = used;
        }
        StopStatus::Completed => {
            let t0 = (t_stop - tail_window).max(traj.t_start());
            let first = traj.knots().partition_point(|&t| t < t0);
            let r_knot_max = traj.states()[first..]
                .iter()
                .map(|y| form.radius(y))
                .fold(0.0, f64::max);
            // uniform resampling for the spread; knots cluster where the
            // solution moves fast
            const NS: usize = 4000;
            let rs: Vec<f64> = (0..=NS)
                .map(|k| {
                    let t = t0 + (t_stop - t0) * k as f64 / NS as f64;
                    form.radius(&traj.eval(t.min(t_stop)).expect("inside span"))
                })
                .collect();
            let mean = rs.iter().sum::<f64>() / rs.len() as f64;
            let var = rs.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / rs.len() as f64;
            let r_peak = rs.iter().copied().fold(r_knot_max, f64::max);
            report.tail_radius_mean = Some(mean);
            report.tail_radius_std = Some(var.sqrt());
            report.tail_radius_max = Some(r_peak);
            let reached = t_stop >= opts.t_horizon * (1.0 - 1e-12);
            report.classification = if reached && r_peak < opts.r_max / 10.0 {
                Classification::Bounded
            } else {
                Classification::HorizonReached
            };
        }
        other => return Err(BlowupError::Numerical(other.describe())),
    }
    Ok(report)
}

/// Integrates `request` and classifies it.
pub fn classify_run(
    request: &RunRequest,
    opts: &IntegratorOptions,
) -> Result<(Trajectory<2>, BlowupReport), BlowupError> {
    let traj = request.integrate(opts)?;
    let report = classify_trajectory(&traj, request.form, opts, DEFAULT_TAIL_WINDOW)?;
    Ok((traj, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

impl Check {
    fn judge(name: &str, ok: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
            detail,
        }
    }

    fn na(name: &str, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: CheckStatus::NotApplicable,
            detail: detail.into(),
        }
    }
}

/// Names of the checks in [`BoundsReport::checks`], in order.
pub const CHECK_QUARTER_TIME: &str = "t_quarter_le_half_tau_prime";
pub const CHECK_QUARTER_RADIUS: &str = "r_quarter_ge_alpha_delta";
pub const CHECK_ZERO_TIME: &str = "zero_minus_quarter_le_quarter_tau_prime";
pub const CHECK_BLOWUP_TIME: &str = "blowup_before_tau_prime";
pub const CHECK_BELOW_STABLE: &str = "theta_below_stable_equilibrium";
pub const CHECK_COMPARISON_POLE: &str = "blowup_before_comparison_pole";
pub const CHECK_MONOTONE: &str = "r_and_theta_increasing_after_quarter";
pub const CHECK_LOWER_BOUND: &str = "r_ge_alpha_delta_after_quarter";

/// Slack allowed between the extrapolated blow-up time and the pole of the
/// comparison solution `1 / (1/r(t_0) - delta (t - t_0))`.
pub const COMPARISON_POLE_SLACK: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub delta: f64,
    pub tau: f64,
    pub tau_prime: f64,
    pub alpha_delta: f64,
    pub t_quarter: Option<f64>,
    pub r_at_quarter: Option<f64>,
    pub t_zero: Option<f64>,
    pub r_at_zero: Option<f64>,
    #[serde(rename = "T_est")]
    pub t_est: Option<f64>,
    pub classification: Classification,
    pub checks: Vec<Check>,
}

impl BoundsReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status == CheckStatus::Pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Runs the constructed history in polar form and evaluates each estimate
/// of the blow-up argument against the computed solution.
pub fn verify_theorem1_bounds(
    delta: f64,
    tau: f64,
    phi_tilde: PhiTilde,
    opts: &IntegratorOptions,
) -> Result<(Trajectory<2>, BoundsReport), BlowupError> {
    let params = ModelParams::new(tau, delta)?;
    let request = RunRequest::new(params)
        .with_form(ModelForm::Polar)
        .with_phi_tilde(phi_tilde);
    let (traj, blow) = classify_run(&request, opts)?;
    let report = evaluate_bounds(&traj, &params, &blow);
    Ok((traj, report))
}

/// Evaluates the estimates on an existing polar trajectory.
pub fn evaluate_bounds(
    traj: &Trajectory<2>,
    params: &ModelParams,
    blow: &BlowupReport,
) -> BoundsReport {
    let delta = params.delta();
    let tau_p = params.tau_prime();
    let alpha_delta = alpha_constant() * delta;

    let quarter = EventSpec::level("theta=-pi/4", 1, -FRAC_PI_4, Direction::Rising);
    let zero = EventSpec::level("theta=0", 1, 0.0, Direction::Rising);
    let t_quarter = find_event(traj, &quarter, 0.0);
    let r_at_quarter = t_quarter.map(|t| traj.eval_unchecked(t)[0]);
    let t_zero = t_quarter.and_then(|tq| find_event(traj, &zero, tq));
    let r_at_zero = t_zero.map(|t| traj.eval_unchecked(t)[0]);
    let blew_up = blow.classification == Classification::BlowUp;

    let mut checks = Vec::new();
    match (t_quarter, r_at_quarter) {
        (Some(tq), Some(rq)) => {
            checks.push(Check::judge(
                CHECK_QUARTER_TIME,
                tq <= tau_p / 2.0,
                format!("t_quarter = {tq:.6e}, bound tau'/2 = {:.6e}", tau_p / 2.0),
            ));
            checks.push(Check::judge(
                CHECK_QUARTER_RADIUS,
                rq >= alpha_delta,
                format!("r(t_quarter) = {rq:.6e}, bound alpha*delta = {alpha_delta:.6e}"),
            ));
        }
        _ => {
            checks.push(Check::judge(
                CHECK_QUARTER_TIME,
                false,
                "theta never reached -pi/4".into(),
            ));
            checks.push(Check::na(CHECK_QUARTER_RADIUS, "no t_quarter"));
        }
    }
    match (t_quarter, t_zero) {
        (Some(tq), Some(tz)) => checks.push(Check::judge(
            CHECK_ZERO_TIME,
            tz - tq <= tau_p / 4.0,
            format!("t_zero - t_quarter = {:.6e}, bound tau'/4 = {:.6e}", tz - tq, tau_p / 4.0),
        )),
        (Some(_), None) => checks.push(Check::judge(
            CHECK_ZERO_TIME,
            false,
            "theta never reached 0".into(),
        )),
        _ => checks.push(Check::na(CHECK_ZERO_TIME, "no t_quarter")),
    }
    match blow.t_est {
        Some(t_est) if blew_up => checks.push(Check::judge(
            CHECK_BLOWUP_TIME,
            t_est < tau_p,
            format!("T_est = {t_est:.6e}, bound tau' = {tau_p:.6e}"),
        )),
        _ => checks.push(Check::na(
            CHECK_BLOWUP_TIME,
            format!("run classified {}", blow.classification),
        )),
    }

    // sampled state after t_quarter
    let after: Vec<(f64, [f64; 2])> = match t_quarter {
        Some(tq) => {
            let mut v = vec![(tq, traj.eval_unchecked(tq))];
            v.extend(
                traj.knots()
                    .iter()
                    .zip(traj.states())
                    .filter(|(&t, _)| t > tq)
                    .map(|(&t, y)| (t, *y)),
            );
            v
        }
        None => Vec::new(),
    };

    if after.is_empty() {
        checks.push(Check::na(CHECK_BELOW_STABLE, "no t_quarter"));
    } else {
        let violation = after.iter().find(|(_, y)| {
            let eq = theta_equilibria(delta, y[0]);
            !(eq.exists && y[1] < eq.theta_s)
        });
        checks.push(match violation {
            None => Check::judge(
                CHECK_BELOW_STABLE,
                true,
                format!("{} samples after t_quarter", after.len()),
            ),
            Some((t, y)) => Check::judge(
                CHECK_BELOW_STABLE,
                false,
                format!("at t = {t:.6e}: theta = {:.6}, r = {:.6e}", y[1], y[0]),
            ),
        });
    }

    match (blow.t_est, t_zero, r_at_zero) {
        (Some(t_est), Some(tz), Some(rz)) if blew_up => {
            let pole = tz + 1.0 / (delta * rz);
            checks.push(Check::judge(
                CHECK_COMPARISON_POLE,
                t_est <= pole + COMPARISON_POLE_SLACK,
                format!("T_est = {t_est:.6e}, comparison pole = {pole:.6e}"),
            ));
        }
        _ => checks.push(Check::na(
            CHECK_COMPARISON_POLE,
            "needs a blow-up and t_zero",
        )),
    }

    if after.len() < 2 {
        checks.push(Check::na(CHECK_MONOTONE, "fewer than two samples"));
        checks.push(Check::na(CHECK_LOWER_BOUND, "no samples"));
    } else {
        let bad = after
            .windows(2)
            .find(|w| !(w[1].1[0] >= w[0].1[0] && w[1].1[1] > w[0].1[1]));
        checks.push(match bad {
            None => Check::judge(CHECK_MONOTONE, true, format!("{} samples", after.len())),
            Some(w) => Check::judge(
                CHECK_MONOTONE,
                false,
                format!("between t = {:.6e} and {:.6e}", w[0].0, w[1].0),
            ),
        });
        let r_min = after.iter().map(|(_, y)| y[0]).fold(f64::INFINITY, f64::min);
        checks.push(Check::judge(
            CHECK_LOWER_BOUND,
            r_min >= alpha_delta,
            format!("min r = {r_min:.6e}, bound alpha*delta = {alpha_delta:.6e}"),
        ));
    }

    BoundsReport {
        delta,
        tau: params.tau(),
        tau_prime: tau_p,
        alpha_delta,
        t_quarter,
        r_at_quarter,
        t_zero,
        r_at_zero,
        t_est: blow.t_est,
        classification: blow.classification,
        checks,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub delta: f64,
    pub classification: Classification,
    #[serde(rename = "T_est")]
    pub t_est: Option<f64>,
    pub t_stop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub tau: f64,
    /// Largest probed delta that did not blow up.
    pub lower: f64,
    /// Smallest probed delta that blew up.
    pub upper: f64,
    /// In evaluation order.
    pub probes: Vec<Probe>,
}

impl ThresholdResult {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// True when, sorted by delta, every non-blow-up probe precedes every
    /// blow-up probe.
    pub fn is_monotone(&self) -> bool {
        let mut sorted = self.probes.clone();
        sorted.sort_by(|a, b| a.delta.total_cmp(&b.delta));
        let first_blow = sorted
            .iter()
            .position(|p| p.classification == Classification::BlowUp)
            .unwrap_or(sorted.len());
        sorted[first_blow..]
            .iter()
            .all(|p| p.classification == Classification::BlowUp)
    }
}

pub fn probe(
    tau: f64,
    delta: f64,
    phi_tilde: &PhiTilde,
    opts: &IntegratorOptions,
) -> Result<Probe, BlowupError> {
    let req = RunRequest::new(ModelParams::new(tau, delta)?).with_phi_tilde(phi_tilde.clone());
    let (_, rep) = classify_run(&req, opts)?;
    Ok(Probe {
        delta,
        classification: rep.classification,
        t_est: rep.t_est,
        t_stop: rep.t_stop,
    })
}

/// Bisection on `delta` between a bounded `delta_lo` and a blow-up
/// `delta_hi` until the bracket is narrower than `width_tol`.
///
/// Probes classified horizon-reached count as the non-blow-up side.
pub fn threshold_search(
    tau: f64,
    delta_lo: f64,
    delta_hi: f64,
    width_tol: f64,
    phi_tilde: &PhiTilde,
    opts: &IntegratorOptions,
) -> Result<ThresholdResult, BlowupError> {
    threshold_search_with(tau, delta_lo, delta_hi, width_tol, 1, |deltas| {
        deltas
            .iter()
            .map(|&d| probe(tau, d, phi_tilde, opts))
            .collect()
    })
}

/// Multisection variant of [`threshold_search`]: each round probes
/// `per_round` equally spaced interior points through `evaluate`, which may
/// run them concurrently but must return probes in input order.
///
/// The new bracket ends at the first blow-up probe of the round.
pub fn threshold_search_with<F>(
    tau: f64,
    delta_lo: f64,
    delta_hi: f64,
    width_tol: f64,
    per_round: usize,
    evaluate: F,
) -> Result<ThresholdResult, BlowupError>
where
    F: Fn(&[f64]) -> Result<Vec<Probe>, BlowupError>,
{
    if !(delta_lo > 0.0 && delta_hi > delta_lo && delta_hi.is_finite()) {
        return Err(BlowupError::BracketInvalid(format!(
            "need 0 < lo < hi, got [{delta_lo}, {delta_hi}]"
        )));
    }
    if !(width_tol > 0.0) {
        return Err(BlowupError::BracketInvalid("width tolerance must be > 0".into()));
    }
    if per_round == 0 {
        return Err(BlowupError::BracketInvalid("need at least one probe per round".into()));
    }
    let ends = evaluate(&[delta_lo, delta_hi])?;
    if ends[0].classification != Classification::Bounded {
        return Err(BlowupError::BracketInvalid(format!(
            "delta = {delta_lo} is {}, expected bounded",
            ends[0].classification
        )));
    }
    if ends[1].classification != Classification::BlowUp {
        return Err(BlowupError::BracketInvalid(format!(
            "delta = {delta_hi} is {}, expected blow-up",
            ends[1].classification
        )));
    }
    let mut probes = ends;
    let (mut a, mut b) = (delta_lo, delta_hi);
    while b - a >= width_tol {
        let k = per_round as f64 + 1.0;
        let grid: Vec<f64> = (1..=per_round).map(|i| a + (b - a) * i as f64 / k).collect();
        let round = evaluate(&grid)?;
        let first_blow = round
            .iter()
            .position(|p| p.classification == Classification::BlowUp);
        match first_blow {
            Some(0) => b = grid[0],
            Some(i) => {
                a = grid[i - 1];
                b = grid[i];
            }
            None => a = grid[per_round - 1],
        }
        probes.extend(round);
    }
    Ok(ThresholdResult {
        tau,
        lower: a,
        upper: b,
        probes,
    })
}
