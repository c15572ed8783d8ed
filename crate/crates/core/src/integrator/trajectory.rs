use serde::{Deserialize, Serialize};

use super::dopri::DenseSegment;
use super::IntegratorError;
use crate::model::HistoryFunction;

/// Why an integration run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopStatus {
    /// Reached the requested end time.
    Completed,
    /// The radius guard tripped.
    BlowUpSuspected,
    /// The step size fell below `h_min` with no sign of divergence.
    StepFloor,
    /// The derivative at an accepted state was not finite.
    NonFiniteDerivative,
    /// `max_steps` accepted steps were taken.
    StepLimit,
}

impl StopStatus {
    pub fn describe(self) -> &'static str {
        match self {
            StopStatus::Completed => "completed",
            StopStatus::BlowUpSuspected => "blow-up suspected",
            StopStatus::StepFloor => "step floor reached",
            StopStatus::NonFiniteDerivative => "non-finite derivative",
            StopStatus::StepLimit => "step limit reached",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Dense solution of an integration run.
///
/// Knots `t_0 < ... < t_N` carry the accepted states; each interval has its
/// own interpolant. Delay runs also carry the history as an evaluable prefix
/// on `[t_0 - tau, t_0]`.
#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize> {
    pub(crate) prefix: Option<HistoryFunction<N>>,
    pub(crate) knots: Vec<f64>,
    pub(crate) states: Vec<[f64; N]>,
    pub(crate) segments: Vec<DenseSegment<N>>,
    pub(crate) status: StopStatus,
    pub(crate) stats: StepStats,
    /// The last rejected trial point was beyond the radius guard.
    pub(crate) rejected_over_guard: bool,
}

impl<const N: usize> Trajectory<N> {
    pub(crate) fn start(t0: f64, y0: [f64; N], prefix: Option<HistoryFunction<N>>) -> Self {
        Self {
            prefix,
            knots: vec![t0],
            states: vec![y0],
            segments: Vec::new(),
            status: StopStatus::Completed,
            stats: StepStats::default(),
            rejected_over_guard: false,
        }
    }

    pub(crate) fn push(&mut self, t: f64, y: [f64; N], seg: DenseSegment<N>) {
        self.knots.push(t);
        self.states.push(y);
        self.segments.push(seg);
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn states(&self) -> &[[f64; N]] {
        &self.states
    }

    pub fn status(&self) -> StopStatus {
        self.status
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    pub fn rejected_over_guard(&self) -> bool {
        self.rejected_over_guard
    }

    pub fn history(&self) -> Option<&HistoryFunction<N>> {
        self.prefix.as_ref()
    }

    pub fn t_start(&self) -> f64 {
        self.knots[0]
    }

    /// Last integrated time.
    pub fn t_stop(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn last_state(&self) -> [f64; N] {
        *self.states.last().unwrap()
    }

    /// Evaluable span, including any history prefix.
    pub fn span(&self) -> (f64, f64) {
        let lo = self
            .prefix
            .as_ref()
            .map_or(self.t_start(), |h| h.span().0);
        (lo, self.t_stop())
    }

    /// Evaluates the solution at `t`. At a knot the segment to its right
    /// is used, which reproduces the stored knot state exactly.
    pub fn eval(&self, t: f64) -> Result<[f64; N], IntegratorError> {
        let (lo, hi) = self.span();
        if !(t >= lo && t <= hi) {
            return Err(IntegratorError::OutOfSpan { t, lo, hi });
        }
        Ok(self.eval_unchecked(t))
    }

    /// Same as [`eval`](Self::eval) without the span check; `t` is clamped
    /// to the span.
    pub(crate) fn eval_unchecked(&self, t: f64) -> [f64; N] {
        if t < self.t_start() {
            if let Some(h) = &self.prefix {
                return h.eval(t);
            }
            return self.states[0];
        }
        let idx = self.knots.partition_point(|&k| k <= t);
        // idx >= 1 because knots[0] <= t
        let i = idx - 1;
        if i >= self.segments.len() {
            return *self.states.last().unwrap();
        }
        if t == self.knots[i] {
            return self.states[i];
        }
        self.segments[i].eval(t)
    }

    /// Largest mismatch between a segment's right end and the next knot
    /// state, relative to `max(1, |y|)`.
    pub fn max_knot_discontinuity(&self) -> f64 {
        self.segments
            .iter()
            .zip(&self.states[1..])
            .map(|(seg, y)| {
                let end = seg.eval_fraction(1.0);
                end.iter()
                    .zip(y)
                    .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Samples on a uniform grid of `n + 1` points over `[t_start, t_stop]`.
    pub fn resample(&self, n: usize) -> Vec<(f64, [f64; N])> {
        let (a, b) = (self.t_start(), self.t_stop());
        (0..=n)
            .map(|k| {
                let t = if k == n {
                    b
                } else {
                    a + (b - a) * k as f64 / n as f64
                };
                (t, self.eval_unchecked(t))
            })
            .collect()
    }
}
