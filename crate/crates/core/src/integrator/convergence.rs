use serde::Serialize;

use super::dopri::{self, Advance};
use super::{IntegratorError, OdeSystem, StopStatus, Trajectory};
use crate::model::{nondelay_exact_radius, NonDelayPolar};

/// Integrates with a constant step `h` (the last step is shortened to hit
/// the end). No error control; used for order verification.
pub fn fixed_step_ode<const N: usize, S: OdeSystem<N> + ?Sized>(
    system: &S,
    initial: [f64; N],
    t_span: (f64, f64),
    h: f64,
    advance: Advance,
) -> Result<Trajectory<N>, IntegratorError> {
    let (t0, t1) = t_span;
    if !(t1 > t0) {
        return Err(IntegratorError::EmptySpan(t0, t1));
    }
    if !(h > 0.0) {
        return Err(IntegratorError::InvalidOptions("step must be > 0".into()));
    }
    let n = ((t1 - t0) / h - 1e-9).ceil().max(1.0) as usize;
    let mut traj = Trajectory::start(t0, initial, None);
    let mut f = |t: f64, y: &[f64; N]| system.rhs(t, y);
    let mut y = initial;
    let mut k1 = f(t0, &y);
    let mut t = t0;
    for i in 1..=n {
        let t_next = if i == n { t1 } else { t0 + i as f64 * h };
        let res = dopri::step(&mut f, t, &y, &k1, t_next - t, 1.0, 1.0, advance);
        traj.push(t_next, res.y_new, res.dense);
        traj.stats.accepted += 1;
        t = t_next;
        y = res.y_new;
        k1 = if advance == Advance::Fifth { res.k7 } else { f(t, &y) };
        if !res.finite {
            traj.status = StopStatus::NonFiniteDerivative;
            break;
        }
    }
    Ok(traj)
}

/// Problems with a closed-form reference solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleProblem {
    /// `tau = 0` polar system started at radius `r0`, compared in `r`.
    NonDelayPolar { r0: f64, t_end: f64 },
    /// `x' = x`, `x(0) = 1`, compared by relative error.
    Exponential { t_end: f64 },
}

impl OracleProblem {
    fn run(&self, h: f64, advance: Advance) -> Result<Trajectory<2>, IntegratorError> {
        match *self {
            OracleProblem::NonDelayPolar { r0, t_end } => {
                fixed_step_ode(&NonDelayPolar, [r0, 0.0], (0.0, t_end), h, advance)
            }
            OracleProblem::Exponential { t_end } => {
                let sys = super::FnOde(|_t: f64, y: &[f64; 2]| [y[0], 0.0]);
                fixed_step_ode(&sys, [1.0, 0.0], (0.0, t_end), h, advance)
            }
        }
    }

    fn error_at(&self, t: f64, y: &[f64; 2]) -> f64 {
        match *self {
            OracleProblem::NonDelayPolar { r0, .. } => (y[0] - nondelay_exact_radius(r0, t)).abs(),
            OracleProblem::Exponential { .. } => (y[0] - t.exp()).abs() / t.exp(),
        }
    }
}

/// Errors of fixed-step runs with successively halved steps.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub steps: Vec<f64>,
    /// Max error over knots.
    pub knot_errors: Vec<f64>,
    /// Max error at off-knot points (fractions 0.3, 0.5, 0.7 of each step).
    pub dense_errors: Vec<f64>,
    /// `log2(e_k / e_{k+1})` for consecutive knot errors.
    pub knot_orders: Vec<f64>,
    pub dense_orders: Vec<f64>,
}

impl ConvergenceReport {
    pub fn knot_ratios(&self) -> Vec<f64> {
        self.knot_orders.iter().map(|p| p.exp2()).collect()
    }

    pub fn min_knot_order(&self) -> f64 {
        self.knot_orders.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_dense_order(&self) -> f64 {
        self.dense_orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Runs `problem` at each step in `steps` and reports observed orders.
pub fn convergence_study(
    problem: OracleProblem,
    steps: &[f64],
    advance: Advance,
) -> Result<ConvergenceReport, IntegratorError> {
    let mut knot_errors = Vec::with_capacity(steps.len());
    let mut dense_errors = Vec::with_capacity(steps.len());
    for &h in steps {
        let traj = problem.run(h, advance)?;
        let ke = traj
            .knots()
            .iter()
            .zip(traj.states())
            .map(|(&t, y)| problem.error_at(t, y))
            .fold(0.0, f64::max);
        let mut de = 0.0f64;
        for w in traj.knots().windows(2) {
            for frac in [0.3, 0.5, 0.7] {
                let t = w[0] + frac * (w[1] - w[0]);
                de = de.max(problem.error_at(t, &traj.eval_unchecked(t)));
            }
        }
        knot_errors.push(ke);
        dense_errors.push(de);
    }
    Ok(ConvergenceReport {
        steps: steps.to_vec(),
        knot_orders: orders(&knot_errors),
        dense_orders: orders(&dense_errors),
        knot_errors,
        dense_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const STEPS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

    #[test]
    fn fifth_order_advance_is_at_least_fourth_order() {
        for problem in [
            OracleProblem::NonDelayPolar { r0: 0.1, t_end: 10.0 },
            OracleProblem::Exponential { t_end: 2.0 },
        ] {
            let rep = convergence_study(problem, &STEPS, Advance::Fifth).unwrap();
            assert!(rep.min_knot_order() >= 4.0, "{problem:?}: {rep:?}");
            assert!(rep.min_dense_order() >= 3.0, "{problem:?}: {rep:?}");
        }
    }

    #[test]
    fn embedded_formula_is_fourth_order() {
        let rep = convergence_study(
            OracleProblem::Exponential { t_end: 2.0 },
            &STEPS,
            Advance::EmbeddedFourth,
        )
        .unwrap();
        for r in rep.knot_ratios() {
            assert!((r - 16.0).abs() <= 0.2 * 16.0, "{rep:?}");
        }
    }

    #[test]
    fn fixed_step_hits_end_exactly() {
        let traj = OracleProblem::Exponential { t_end: 1.0 }
            .run(0.3, Advance::Fifth)
            .unwrap();
        assert_eq!(traj.t_stop(), 1.0);
        assert_eq!(traj.knots().len(), 5);
    }
}
