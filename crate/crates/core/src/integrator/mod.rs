//! Adaptive Dormand-Prince integration of ODEs and constant-delay DDEs.
//!
//! Delay equations are solved by the method of steps: the delayed state is
//! read from the history on `[-tau, 0]` and from the dense output of the
//! trajectory built so far afterwards. Steps never straddle a breakpoint
//! (`k tau` and `k tau + b` for every history breakpoint `b`), so a stage
//! never asks for a delayed value inside the step being taken.

mod convergence;
mod dopri;
mod events;
mod trajectory;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use convergence::{convergence_study, fixed_step_ode, ConvergenceReport, OracleProblem};
pub use dopri::{Advance, DenseSegment};
pub use events::{find_event, Direction, EventSpec, EVENT_TIME_TOL};
pub use trajectory::{StepStats, StopStatus, Trajectory};

use crate::model::HistoryFunction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error("invalid integrator options: {0}")]
    InvalidOptions(String),
    #[error("time {t} outside trajectory span [{lo}, {hi}]")]
    OutOfSpan { t: f64, lo: f64, hi: f64 },
    #[error("history span mismatch: expected [{expected_lo}, {expected_hi}], got [{lo}, {hi}]")]
    HistorySpanMismatch {
        expected_lo: f64,
        expected_hi: f64,
        lo: f64,
        hi: f64,
    },
    #[error("delayed time {t_delayed} falls inside the unfinished step (solution known up to {known})")]
    DelayedInsideStep { t_delayed: f64, known: f64 },
    #[error("non-finite initial state or derivative")]
    NonFiniteStart,
    #[error("empty time span [{0}, {1}]")]
    EmptySpan(f64, f64),
}

/// A system `y' = f(t, y)`.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N];

    /// Quantity watched by the blow-up guard. Euclidean norm by default.
    fn radius(&self, y: &[f64; N]) -> f64 {
        y.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// A system `y' = f(t, y(t), y(t - tau))` with one constant delay.
pub trait DdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N], delayed: &[f64; N]) -> [f64; N];

    fn delay(&self) -> f64;

    fn radius(&self, y: &[f64; N]) -> f64 {
        y.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Adapts a closure into an [`OdeSystem`] with Euclidean radius.
pub struct FnOde<F>(pub F);

impl<const N: usize, F: Fn(f64, &[f64; N]) -> [f64; N]> OdeSystem<N> for FnOde<F> {
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N] {
        (self.0)(t, y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h_init: Option<f64>,
    pub h_min: f64,
    pub h_max: f64,
    /// Blow-up guard radius.
    pub r_max: f64,
    pub t_horizon: f64,
    /// Extra derivative-discontinuity times the integrator must step onto.
    pub breakpoint_times: Vec<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            h_init: None,
            h_min: 1e-12,
            h_max: f64::INFINITY,
            r_max: 1e8,
            t_horizon: 100.0,
            breakpoint_times: Vec::new(),
            max_steps: 10_000_000,
        }
    }
}

impl IntegratorOptions {
    pub fn validate(&self) -> Result<(), IntegratorError> {
        let bad = |m: &str| Err(IntegratorError::InvalidOptions(m.to_string()));
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad("tolerances must be > 0");
        }
        if !(self.h_min > 0.0 && self.h_min <= self.h_max) {
            return bad("need 0 < h_min <= h_max");
        }
        if let Some(h) = self.h_init {
            if !(h > 0.0 && h.is_finite()) {
                return bad("h_init must be positive and finite");
            }
        }
        if !(self.r_max > 0.0) {
            return bad("r_max must be > 0");
        }
        if !(self.t_horizon > 0.0) {
            return bad("t_horizon must be > 0");
        }
        if self.breakpoint_times.iter().any(|t| !t.is_finite()) {
            return bad("breakpoint times must be finite");
        }
        Ok(())
    }
}

// PI controller constants (Hairer's DOPRI5 defaults)
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_MIN_INV: f64 = 1.0 / 0.2; // at most 5x shrink per step
const FAC_MAX_INV: f64 = 1.0 / 10.0; // at most 10x growth per step

fn rms_scaled<const N: usize>(v: &[f64; N], y: &[f64; N], rtol: f64, atol: f64) -> f64 {
    let s: f64 = v
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let q = a / (atol + rtol * b.abs());
            q * q
        })
        .sum();
    (s / N as f64).sqrt()
}

/// Starting step heuristic from Hairer's `hinit`.
fn initial_step<const N: usize>(
    f: &mut impl FnMut(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    f0: &[f64; N],
    opts: &IntegratorOptions,
    h_cap: f64,
) -> f64 {
    let d0 = rms_scaled(y, y, opts.rel_tol, opts.abs_tol);
    let d1 = rms_scaled(f0, y, opts.rel_tol, opts.abs_tol);
    let mut h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(h_cap);
    let y1: [f64; N] = std::array::from_fn(|i| y[i] + h0 * f0[i]);
    let f1 = f(t + h0, &y1);
    let diff: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
    let d2 = rms_scaled(&diff, y, opts.rel_tol, opts.abs_tol) / h0;
    let der = d1.max(d2);
    let h1 = if !der.is_finite() {
        h0 * 1e-3
    } else if der <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / der).powf(0.2)
    };
    (100.0 * h0).min(h1).min(h_cap).max(opts.h_min)
}

/// Sorted, de-duplicated breakpoints strictly inside `(t0, t_end)`.
fn prepare_breakpoints(mut bps: Vec<f64>, t0: f64, t_end: f64) -> Vec<f64> {
    bps.retain(|&b| b > t0 && b < t_end);
    bps.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(bps.len());
    for b in bps {
        match out.last() {
            Some(&last) if b - last <= 1e-12 * b.abs().max(1.0) => {}
            _ => out.push(b),
        }
    }
    out
}

/// Shared adaptive driver. `f` may fail (delayed lookups); `radius`
/// evaluates the guard quantity.
fn drive<const N: usize>(
    mut f: impl FnMut(&Trajectory<N>, f64, &[f64; N]) -> Result<[f64; N], IntegratorError>,
    radius: impl Fn(&[f64; N]) -> f64,
    mut traj: Trajectory<N>,
    t_end: f64,
    breakpoints: Vec<f64>,
    opts: &IntegratorOptions,
) -> Result<Trajectory<N>, IntegratorError> {
    let mut t = traj.t_start();
    let mut y = traj.states[0];
    let bps = prepare_breakpoints(breakpoints, t, t_end);
    let mut next_bp = 0usize;
    // all breakpoints plus the end time
    let target = |i: usize| if i < bps.len() { bps[i] } else { t_end };

    let mut evals = 0usize;
    let mut err_slot: Option<IntegratorError> = None;

    macro_rules! rhs {
        ($traj:expr) => {
            |tt: f64, yy: &[f64; N]| -> [f64; N] {
                evals += 1;
                match f($traj, tt, yy) {
                    Ok(v) => v,
                    Err(e) => {
                        err_slot.get_or_insert(e);
                        [f64::NAN; N]
                    }
                }
            }
        };
    }

    let mut k1 = rhs!(&traj)(t, &y);
    if let Some(e) = err_slot.take() {
        return Err(e);
    }
    if !k1.iter().chain(y.iter()).all(|v| v.is_finite()) {
        return Err(IntegratorError::NonFiniteStart);
    }
    if radius(&y) >= opts.r_max {
        traj.status = StopStatus::BlowUpSuspected;
        return Ok(traj);
    }

    let mut h = match opts.h_init {
        Some(h) => h.min(opts.h_max),
        None => {
            let cap = (target(0) - t).min(opts.h_max);
            let h = initial_step(&mut rhs!(&traj), t, &y, &k1, opts, cap);
            if let Some(e) = err_slot.take() {
                return Err(e);
            }
            h
        }
    };
    let mut fac_old = 1e-4f64;
    let mut last_rejected = false;

    loop {
        if t >= t_end {
            traj.status = StopStatus::Completed;
            break;
        }
        if traj.stats.accepted >= opts.max_steps {
            traj.status = StopStatus::StepLimit;
            break;
        }
        while next_bp < bps.len() && bps[next_bp] <= t {
            next_bp += 1;
        }
        let goal = target(next_bp);
        h = h.min(opts.h_max);
        let mut lands = false;
        // stretch slightly rather than leave a sliver before the breakpoint
        if t + 1.01 * h >= goal {
            h = goal - t;
            lands = true;
        }

        let res = dopri::step(
            &mut rhs!(&traj),
            t,
            &y,
            &k1,
            h,
            opts.rel_tol,
            opts.abs_tol,
            Advance::Fifth,
        );
        if let Some(e) = err_slot.take() {
            return Err(e);
        }

        let fac11 = res.err.powf(EXPO1);
        if !res.finite || !(res.err <= 1.0) {
            traj.stats.rejected += 1;
            traj.rejected_over_guard = !res.finite || radius(&res.y_new) > opts.r_max;
            let h_new = if res.finite {
                h / FAC_MIN_INV.min(fac11 / SAFETY)
            } else {
                h * 0.2
            };
            last_rejected = true;
            if h_new < opts.h_min {
                traj.status = if traj.rejected_over_guard {
                    StopStatus::BlowUpSuspected
                } else {
                    StopStatus::StepFloor
                };
                break;
            }
            h = h_new;
            continue;
        }

        // accepted
        traj.stats.accepted += 1;
        traj.rejected_over_guard = false;
        let fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(FAC_MAX_INV, FAC_MIN_INV);
        let mut h_new = h / fac;
        fac_old = res.err.max(1e-4);
        if last_rejected {
            h_new = h_new.min(h);
        }
        last_rejected = false;

        let t_new = if lands { goal } else { t + h };
        traj.push(t_new, res.y_new, res.dense);
        t = t_new;
        y = res.y_new;

        if radius(&y) >= opts.r_max {
            traj.status = StopStatus::BlowUpSuspected;
            break;
        }
        // the derivative may jump at a breakpoint, so do not reuse the FSAL stage
        k1 = if lands && t < t_end {
            let k = rhs!(&traj)(t, &y);
            if let Some(e) = err_slot.take() {
                return Err(e);
            }
            k
        } else {
            res.k7
        };
        if !k1.iter().all(|v| v.is_finite()) {
            traj.status = StopStatus::NonFiniteDerivative;
            break;
        }
        h = h_new.max(opts.h_min);
    }
    traj.stats.rhs_evals = evals;
    Ok(traj)
}

/// Integrates an ODE over `t_span` (clipped to `opts.t_horizon` past its start).
pub fn integrate_ode<const N: usize, S: OdeSystem<N> + ?Sized>(
    system: &S,
    initial: [f64; N],
    t_span: (f64, f64),
    opts: &IntegratorOptions,
) -> Result<Trajectory<N>, IntegratorError> {
    opts.validate()?;
    let (t0, t1) = t_span;
    if !(t1 > t0) {
        return Err(IntegratorError::EmptySpan(t0, t1));
    }
    let t_end = t1.min(t0 + opts.t_horizon);
    let traj = Trajectory::start(t0, initial, None);
    drive(
        |_, t, y| Ok(system.rhs(t, y)),
        |y| system.radius(y),
        traj,
        t_end,
        opts.breakpoint_times.clone(),
        opts,
    )
}

/// Integrates a constant-delay DDE from `t = 0` to `t_end` by the method of steps.
///
/// `history` must span exactly `[-tau, 0]`. The returned trajectory starts
/// at 0 and carries the history as its prefix.
pub fn integrate_dde<const N: usize, S: DdeSystem<N> + ?Sized>(
    system: &S,
    history: &HistoryFunction<N>,
    t_end: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory<N>, IntegratorError> {
    opts.validate()?;
    let tau = system.delay();
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(IntegratorError::InvalidOptions(format!(
            "delay must be positive and finite, got {tau}"
        )));
    }
    let (lo, hi) = history.span();
    let span_tol = 1e-12 * tau.max(1.0);
    if (lo + tau).abs() > span_tol || hi.abs() > span_tol {
        return Err(IntegratorError::HistorySpanMismatch {
            expected_lo: -tau,
            expected_hi: 0.0,
            lo,
            hi,
        });
    }
    if !(t_end > 0.0) {
        return Err(IntegratorError::EmptySpan(0.0, t_end));
    }
    let t_end = t_end.min(opts.t_horizon);

    // k tau + b for every history breakpoint b (b = -tau and 0 give k tau)
    let mut bps = opts.breakpoint_times.clone();
    let k_max = (t_end / tau).ceil() as i64 + 1;
    for k in 1..=k_max {
        let base = k as f64 * tau;
        for &b in history.breakpoints() {
            bps.push(base + b);
        }
    }

    let y0 = history.eval(0.0);
    let traj = Trajectory::start(0.0, y0, Some(history.clone()));
    drive(
        |traj, t, y| {
            let td = t - tau;
            let delayed = if td <= 0.0 {
                history.eval(td)
            } else {
                let known = traj.t_stop();
                if td > known + 1e-12 * known.abs().max(1.0) {
                    return Err(IntegratorError::DelayedInsideStep { t_delayed: td, known });
                }
                traj.eval_unchecked(td.min(known))
            };
            Ok(system.rhs(t, y, &delayed))
        },
        |y| system.radius(y),
        traj,
        t_end,
        bps,
        opts,
    )
}
