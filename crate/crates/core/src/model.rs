//! The planar delayed oscillator
//!
//! ```text
//! x' = x - y - x(t - tau) (x^2 + y^2)
//! y' = x + y - y(t - tau) (x^2 + y^2)
//! ```
//!
//! in Cartesian and polar form, the stage-one ODE that the delayed system
//! reduces to on `[0, tau/2]` for the constructed blow-up history, the
//! constructed history itself, and the closed-form radius of the
//! non-delayed system.
//!
//! Angles are always *unwrapped* reals. Nothing in this module reduces an
//! angle modulo `2 pi`, because event detection downstream relies on
//! `theta` moving continuously through `-pi/4`, `0`, and beyond.

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::{DdeSystem, OdeSystem};

/// Tolerance used when validating the endpoints of a user-supplied
/// `phi_tilde` and the continuity of a declared-continuous history.
pub const ENDPOINT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("polar angle undefined at origin")]
    PolarAtOrigin,
    #[error("phi_tilde violates the {endpoint} endpoint condition: expected {expected}, got {actual}")]
    EndpointMismatch {
        endpoint: &'static str,
        expected: f64,
        actual: f64,
    },
    #[error("history pieces do not cover the span: {0}")]
    BadHistory(String),
    #[error("history is discontinuous at t = {at}: jump {jump:e}")]
    Discontinuous { at: f64, jump: f64 },
}

/// Delay `tau` and history amplitude `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    tau: f64,
    delta: f64,
}

impl ModelParams {
    pub fn new(tau: f64, delta: f64) -> Result<Self, ModelError> {
        if !tau.is_finite() || tau < 0.0 {
            return Err(ModelError::InvalidParams(format!(
                "tau must be finite and >= 0, got {tau}"
            )));
        }
        if !delta.is_finite() || delta <= 0.0 {
            return Err(ModelError::InvalidParams(format!(
                "delta must be finite and > 0, got {delta}"
            )));
        }
        Ok(Self { tau, delta })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Half the delay; the length of the constant stretch of the
    /// constructed history.
    pub fn tau_prime(&self) -> f64 {
        self.tau / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianState {
    pub x: f64,
    pub y: f64,
}

impl CartesianState {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn radius(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        Self { x: a[0], y: a[1] }
    }
}

/// Radius and unwrapped angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarState {
    pub r: f64,
    pub theta: f64,
}

impl PolarState {
    pub const fn new(r: f64, theta: f64) -> Self {
        Self { r, theta }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.r, self.theta]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        Self { r: a[0], theta: a[1] }
    }
}

/// Right-hand side of the Cartesian delay system.
pub fn cartesian_rhs(
    _params: &ModelParams,
    current: CartesianState,
    delayed: CartesianState,
) -> CartesianState {
    let CartesianState { x, y } = current;
    let sq = x * x + y * y;
    CartesianState {
        x: x - y - delayed.x * sq,
        y: x + y - delayed.y * sq,
    }
}

/// Right-hand side of the polar delay system, returned as `(r', theta')`.
pub fn polar_rhs(_params: &ModelParams, current: PolarState, delayed: PolarState) -> PolarState {
    let PolarState { r, theta } = current;
    let coupling = r * delayed.r;
    let lag = theta - delayed.theta;
    PolarState {
        r: r * (1.0 - coupling * lag.cos()),
        theta: 1.0 + coupling * lag.sin(),
    }
}

/// The delay system with the delayed state frozen at `(-delta, -delta)`.
///
/// Written so that it evaluates bit-identically to
/// `cartesian_rhs(params, s, (-delta, -delta))`.
pub fn stage1_ode_rhs(params: &ModelParams, current: CartesianState) -> CartesianState {
    let d = -params.delta;
    let CartesianState { x, y } = current;
    let sq = x * x + y * y;
    CartesianState {
        x: x - y - d * sq,
        y: x + y - d * sq,
    }
}

/// Stage-one system in polar coordinates, `(r', theta')`.
pub fn stage1_polar_rhs(params: &ModelParams, current: PolarState) -> PolarState {
    let PolarState { r, theta } = current;
    let delta = params.delta;
    PolarState {
        r: r + SQRT_2 * delta * r * r * (theta + FRAC_PI_4).sin(),
        theta: 1.0 + SQRT_2 * delta * r * (theta + 3.0 * FRAC_PI_4).sin(),
    }
}

/// Radius derivative and instantaneous frequency of the frequency-form
/// polar system, given the accumulated phase `lag_phase` (the integral of
/// `omega` over the last delay interval).
pub fn omega_form(current_r: f64, delayed_r: f64, lag_phase: f64) -> (f64, f64) {
    let coupling = current_r * delayed_r;
    (
        current_r * (1.0 - coupling * lag_phase.cos()),
        1.0 + coupling * lag_phase.sin(),
    )
}

/// Representative of `value + 2 pi k` closest to `hint`.
pub fn unwrap_near(value: f64, hint: f64) -> f64 {
    let turns = ((hint - value) / (2.0 * PI)).round();
    value + 2.0 * PI * turns
}

/// Converts to polar coordinates, choosing the angle branch nearest `theta_hint`.
pub fn to_polar(state: CartesianState, theta_hint: f64) -> Result<PolarState, ModelError> {
    if state.x == 0.0 && state.y == 0.0 {
        return Err(ModelError::PolarAtOrigin);
    }
    Ok(PolarState {
        r: state.radius(),
        theta: unwrap_near(state.y.atan2(state.x), theta_hint),
    })
}

pub fn to_cartesian(state: PolarState) -> CartesianState {
    let (s, c) = state.theta.sin_cos();
    CartesianState {
        x: state.r * c,
        y: state.r * s,
    }
}

/// Radius of the non-delayed system `r' = r (1 - r^2)` started from `r0`.
pub fn nondelay_exact_radius(r0: f64, t: f64) -> f64 {
    // r0 e^t / sqrt(1 + r0^2 (e^{2t} - 1)), divided through by e^t so large t
    // cannot overflow
    let r0_sq = r0 * r0;
    r0 / (r0_sq + (1.0 - r0_sq) * (-2.0 * t).exp()).sqrt()
}

type PieceFn<const N: usize> = Arc<dyn Fn(f64) -> [f64; N] + Send + Sync>;

#[derive(Clone)]
struct HistoryPiece<const N: usize> {
    start: f64,
    end: f64,
    eval: PieceFn<N>,
}

/// Piecewise-defined initial function on `[start, end]` (normally `[-tau, 0]`).
///
/// Pieces are half-open `[start, end)` except the last, which is closed.
/// Breakpoints are the piece boundaries including both span ends.
#[derive(Clone)]
pub struct HistoryFunction<const N: usize = 2> {
    pieces: Vec<HistoryPiece<N>>,
    breakpoints: Vec<f64>,
}

impl<const N: usize> fmt::Debug for HistoryFunction<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HistoryFunction")
            .field("breakpoints", &self.breakpoints)
            .finish()
    }
}

impl<const N: usize> HistoryFunction<N> {
    /// Builds a history from contiguous pieces given as `(start, end, f)`.
    pub fn from_pieces(pieces: Vec<(f64, f64, PieceFn<N>)>) -> Result<Self, ModelError> {
        if pieces.is_empty() {
            return Err(ModelError::BadHistory("no pieces".into()));
        }
        let mut out = Vec::with_capacity(pieces.len());
        let mut breakpoints = vec![pieces[0].0];
        for (i, (start, end, eval)) in pieces.into_iter().enumerate() {
            if !(start.is_finite() && end.is_finite()) || end < start {
                return Err(ModelError::BadHistory(format!(
                    "piece {i} has invalid interval [{start}, {end}]"
                )));
            }
            let prev = *breakpoints.last().unwrap();
            if start != prev {
                return Err(ModelError::BadHistory(format!(
                    "piece {i} starts at {start} but previous piece ends at {prev}"
                )));
            }
            if i > 0 || end > start {
                breakpoints.push(end);
            }
            out.push(HistoryPiece { start, end, eval });
        }
        breakpoints.dedup();
        Ok(Self {
            pieces: out,
            breakpoints,
        })
    }

    /// A single smooth piece.
    pub fn smooth(start: f64, end: f64, f: impl Fn(f64) -> [f64; N] + Send + Sync + 'static) -> Self {
        Self::from_pieces(vec![(start, end, Arc::new(f))]).expect("single piece is always valid")
    }

    pub fn constant(start: f64, end: f64, value: [f64; N]) -> Self {
        Self::smooth(start, end, move |_| value)
    }

    pub fn span(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    /// Sorted piece boundaries, both span ends included.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    fn piece_index(&self, t: f64) -> usize {
        // first piece whose end is > t; the last piece also owns its end point
        let idx = self.pieces.partition_point(|p| p.end <= t);
        idx.min(self.pieces.len() - 1)
    }

    /// Evaluates the history. Times outside the span are clamped to the
    /// nearest end; callers that care check the span first.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let (lo, hi) = self.span();
        let t = t.clamp(lo, hi);
        (self.pieces[self.piece_index(t)].eval)(t)
    }

    /// Values at `t` taken from the pieces on either side of it.
    pub fn eval_sides(&self, t: f64) -> ([f64; N], [f64; N]) {
        let right = self.piece_index(t);
        let left = if right > 0 && self.pieces[right].start == t {
            right - 1
        } else {
            right
        };
        ((self.pieces[left].eval)(t), (self.pieces[right].eval)(t))
    }

    /// Largest jump across an interior breakpoint.
    pub fn max_jump(&self) -> (f64, f64) {
        let mut worst = (f64::NAN, 0.0);
        for &b in &self.breakpoints[1..self.breakpoints.len() - 1] {
            let (l, r) = self.eval_sides(b);
            let jump = l
                .iter()
                .zip(&r)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if jump >= worst.1 {
                worst = (b, jump);
            }
        }
        worst
    }

    pub fn check_continuous(&self, tol: f64) -> Result<(), ModelError> {
        let (at, jump) = self.max_jump();
        if jump > tol {
            return Err(ModelError::Discontinuous { at, jump });
        }
        Ok(())
    }

    /// Applies `f` pointwise, keeping the piece structure.
    pub fn map<const M: usize>(
        &self,
        f: impl Fn(f64, [f64; N]) -> [f64; M] + Send + Sync + 'static,
    ) -> HistoryFunction<M> {
        let f = Arc::new(f);
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let inner = p.eval.clone();
                let f = f.clone();
                let eval: PieceFn<M> = Arc::new(move |t| f(t, inner(t)));
                HistoryPiece {
                    start: p.start,
                    end: p.end,
                    eval,
                }
            })
            .collect();
        HistoryFunction {
            pieces,
            breakpoints: self.breakpoints.clone(),
        }
    }
}

impl HistoryFunction<2> {
    /// Re-expresses a Cartesian history in polar coordinates, unwrapping
    /// every angle to the branch nearest `theta_hint`.
    ///
    /// Fails if the history touches the origin at any breakpoint or at any
    /// of 64 interior samples per piece.
    pub fn cartesian_to_polar(&self, theta_hint: f64) -> Result<HistoryFunction<2>, ModelError> {
        for p in &self.pieces {
            for k in 0..=64 {
                let t = p.start + (p.end - p.start) * k as f64 / 64.0;
                to_polar(CartesianState::from_array((p.eval)(t)), theta_hint)?;
            }
        }
        Ok(self.map(move |_, v| {
            to_polar(CartesianState::from_array(v), theta_hint)
                .map(PolarState::to_array)
                .unwrap_or([0.0, theta_hint])
        }))
    }
}

/// The varying part of the constructed history on `(-tau/2, 0]`.
#[derive(Clone)]
pub enum PhiTilde {
    /// `2 delta t / tau`
    Linear,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for PhiTilde {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhiTilde::Linear => f.write_str("Linear"),
            PhiTilde::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl PhiTilde {
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "linear" => Some(PhiTilde::Linear),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PhiTilde::Linear => "linear",
            PhiTilde::Custom(_) => "custom",
        }
    }

    fn into_fn(self, params: &ModelParams) -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
        match self {
            PhiTilde::Linear => {
                let (delta, tau) = (params.delta, params.tau);
                Arc::new(move |t| 2.0 * delta * t / tau)
            }
            PhiTilde::Custom(f) => f,
        }
    }
}

/// The Cartesian history used to produce blow-up: `psi = -delta` throughout,
/// `phi = -delta` on `[-tau, -tau/2]` and `phi = phi_tilde` on `(-tau/2, 0]`.
pub fn theorem1_history(
    params: &ModelParams,
    phi_tilde: PhiTilde,
) -> Result<HistoryFunction<2>, ModelError> {
    if params.tau <= 0.0 {
        return Err(ModelError::InvalidParams(
            "the constructed history needs tau > 0".into(),
        ));
    }
    let delta = params.delta;
    let tau_p = params.tau_prime();
    let phi = phi_tilde.into_fn(params);

    let tol = ENDPOINT_TOLERANCE * delta.max(1.0);
    let left = phi(-tau_p);
    if !((left + delta).abs() <= tol) {
        return Err(ModelError::EndpointMismatch {
            endpoint: "left (t = -tau/2)",
            expected: -delta,
            actual: left,
        });
    }
    let right = phi(0.0);
    if !(right.abs() <= tol) {
        return Err(ModelError::EndpointMismatch {
            endpoint: "right (t = 0)",
            expected: 0.0,
            actual: right,
        });
    }

    HistoryFunction::from_pieces(vec![
        (-params.tau, -tau_p, Arc::new(move |_| [-delta, -delta])),
        (-tau_p, 0.0, Arc::new(move |t| [phi(t), -delta])),
    ])
}

/// Polar form of [`theorem1_history`]. Angles on the history lie in
/// `[-3 pi/4, -pi/2]` for any `phi_tilde` between `-delta` and `0`.
pub fn theorem1_polar_history(
    params: &ModelParams,
    phi_tilde: PhiTilde,
) -> Result<HistoryFunction<2>, ModelError> {
    theorem1_history(params, phi_tilde)?.cartesian_to_polar(-5.0 * PI / 8.0)
}

/// Cartesian delay system, state `[x, y]`.
#[derive(Debug, Clone, Copy)]
pub struct CartesianDde(pub ModelParams);

impl DdeSystem<2> for CartesianDde {
    fn rhs(&self, _t: f64, y: &[f64; 2], delayed: &[f64; 2]) -> [f64; 2] {
        cartesian_rhs(
            &self.0,
            CartesianState::from_array(*y),
            CartesianState::from_array(*delayed),
        )
        .to_array()
    }

    fn delay(&self) -> f64 {
        self.0.tau
    }
}

/// Polar delay system, state `[r, theta]`.
#[derive(Debug, Clone, Copy)]
pub struct PolarDde(pub ModelParams);

impl DdeSystem<2> for PolarDde {
    fn rhs(&self, _t: f64, y: &[f64; 2], delayed: &[f64; 2]) -> [f64; 2] {
        polar_rhs(
            &self.0,
            PolarState::from_array(*y),
            PolarState::from_array(*delayed),
        )
        .to_array()
    }

    fn delay(&self) -> f64 {
        self.0.tau
    }

    fn radius(&self, y: &[f64; 2]) -> f64 {
        y[0].abs()
    }
}

/// Stage-one ODE in Cartesian form.
#[derive(Debug, Clone, Copy)]
pub struct Stage1Cartesian(pub ModelParams);

impl OdeSystem<2> for Stage1Cartesian {
    fn rhs(&self, _t: f64, y: &[f64; 2]) -> [f64; 2] {
        stage1_ode_rhs(&self.0, CartesianState::from_array(*y)).to_array()
    }
}

/// Stage-one ODE in polar form.
#[derive(Debug, Clone, Copy)]
pub struct Stage1Polar(pub ModelParams);

impl OdeSystem<2> for Stage1Polar {
    fn rhs(&self, _t: f64, y: &[f64; 2]) -> [f64; 2] {
        stage1_polar_rhs(&self.0, PolarState::from_array(*y)).to_array()
    }

    fn radius(&self, y: &[f64; 2]) -> f64 {
        y[0].abs()
    }
}

/// The system with `tau = 0` in polar form: `r' = r (1 - r^2)`, `theta' = 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NonDelayPolar;

impl OdeSystem<2> for NonDelayPolar {
    fn rhs(&self, _t: f64, y: &[f64; 2]) -> [f64; 2] {
        let s = PolarState::from_array(*y);
        // parameters are irrelevant to the algebra
        let p = ModelParams { tau: 0.0, delta: 1.0 };
        polar_rhs(&p, s, s).to_array()
    }

    fn radius(&self, y: &[f64; 2]) -> f64 {
        y[0].abs()
    }
}

/// The system with `tau = 0` in Cartesian form.
#[derive(Debug, Clone, Copy, Default)]
pub struct NonDelayCartesian;

impl OdeSystem<2> for NonDelayCartesian {
    fn rhs(&self, _t: f64, y: &[f64; 2]) -> [f64; 2] {
        let s = CartesianState::from_array(*y);
        let p = ModelParams { tau: 0.0, delta: 1.0 };
        cartesian_rhs(&p, s, s).to_array()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(tau: f64, delta: f64) -> ModelParams {
        ModelParams::new(tau, delta).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(-1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 0.0).is_err());
        assert!(ModelParams::new(f64::NAN, 1.0).is_err());
        assert_eq!(p(1.0, 2.0).tau_prime(), 0.5);
        assert!(ModelParams::new(0.0, 1.0).is_ok());
    }

    #[test]
    fn cartesian_rhs_examples() {
        let pp = p(1.0, 5.0);
        let z = CartesianState::new(0.0, 0.0);
        let anything = CartesianState::new(3.0, -7.0);
        assert_eq!(cartesian_rhs(&pp, z, anything), z);

        let u = CartesianState::new(1.0, 0.0);
        assert_eq!(cartesian_rhs(&pp, u, u), CartesianState::new(0.0, 1.0));

        let start = CartesianState::new(0.0, -5.0);
        let lag = CartesianState::new(-5.0, -5.0);
        assert_eq!(cartesian_rhs(&pp, start, lag), CartesianState::new(130.0, 120.0));
    }

    #[test]
    fn stage1_matches_frozen_delay() {
        let pp = p(1.0, 5.0);
        let s = CartesianState::new(0.0, -5.0);
        assert_eq!(stage1_ode_rhs(&pp, s), CartesianState::new(130.0, 120.0));
        assert_eq!(
            stage1_ode_rhs(&pp, CartesianState::new(0.0, 0.0)),
            CartesianState::new(0.0, 0.0)
        );
        // delta -> 0 leaves the linear part; ModelParams forbids delta = 0,
        // so evaluate through the struct directly.
        let zero = ModelParams { tau: 1.0, delta: 0.0 };
        assert_eq!(
            stage1_ode_rhs(&zero, CartesianState::new(1.0, 0.0)),
            CartesianState::new(1.0, 1.0)
        );
    }

    #[test]
    fn polar_rhs_examples() {
        let pp = p(1.0, 1.0);
        let d = polar_rhs(&pp, PolarState::new(0.0, 0.3), PolarState::new(4.0, -2.0));
        assert_eq!(d, PolarState::new(0.0, 1.0));
        let d = polar_rhs(&pp, PolarState::new(1.0, 0.7), PolarState::new(1.0, 0.7));
        assert_eq!(d, PolarState::new(0.0, 1.0));
    }

    #[test]
    fn stage1_polar_examples() {
        for delta in [0.5, 1.0, 5.0, 100.0] {
            let pp = p(1.0, delta);
            let d = stage1_polar_rhs(&pp, PolarState::new(delta, -PI / 2.0));
            let tol = 1e-14 * delta.powi(3).max(1.0);
            assert!((d.r - (delta - delta.powi(3))).abs() < tol, "{d:?}");
            assert!((d.theta - (1.0 + delta * delta)).abs() < 1e-14 * delta * delta + 1e-14);
        }
        let pp = p(1.0, 3.0);
        assert_eq!(stage1_polar_rhs(&pp, PolarState::new(0.0, 1.1)), PolarState::new(0.0, 1.0));
        let d = stage1_polar_rhs(&pp, PolarState::new(2.0, FRAC_PI_4));
        assert!((d.theta - 1.0).abs() < 1e-14);
    }

    #[test]
    fn omega_form_at_rest() {
        // unit circle with no phase lag rotates uniformly
        assert_eq!(omega_form(1.0, 1.0, 0.0), (0.0, 1.0));
        assert_eq!(omega_form(0.0, 3.0, 1.0), (0.0, 1.0));
    }

    #[test]
    fn polar_conversion_examples() {
        let delta = 2.5;
        let s = to_polar(CartesianState::new(0.0, -delta), -PI / 2.0).unwrap();
        assert_eq!(s.r, delta);
        assert!((s.theta + PI / 2.0).abs() < 1e-15);

        let s = to_polar(CartesianState::new(-delta, -delta), -PI).unwrap();
        assert!((s.r - SQRT_2 * delta).abs() < 1e-14);
        assert!((s.theta + 3.0 * PI / 4.0).abs() < 1e-15);

        let s = to_polar(CartesianState::new(1.0, 0.0), 2.0 * PI).unwrap();
        assert_eq!(s, PolarState::new(1.0, 2.0 * PI));

        assert_eq!(
            to_polar(CartesianState::new(0.0, 0.0), 0.0),
            Err(ModelError::PolarAtOrigin)
        );
    }

    #[test]
    fn cartesian_conversion_examples() {
        assert_eq!(to_cartesian(PolarState::new(1.0, 0.0)), CartesianState::new(1.0, 0.0));
        let c = to_cartesian(PolarState::new(3.0, -PI / 2.0));
        assert!(c.x.abs() < 1e-15 && (c.y + 3.0).abs() < 1e-15);
        let c = to_cartesian(PolarState::new(2.0, 5.0 * PI / 2.0));
        assert!(c.x.abs() < 1e-14 && (c.y - 2.0).abs() < 1e-14);
    }

    #[test]
    fn linear_history_values() {
        let pp = p(1.0, 1.0);
        let h = theorem1_history(&pp, PhiTilde::Linear).unwrap();
        assert_eq!(h.eval(-0.75), [-1.0, -1.0]);
        assert_eq!(h.eval(-0.25), [-0.5, -1.0]);
        assert_eq!(h.eval(-0.1)[1], -1.0);
        assert_eq!(h.breakpoints(), &[-1.0, -0.5, 0.0]);
        assert_eq!(h.span(), (-1.0, 0.0));
        h.check_continuous(ENDPOINT_TOLERANCE).unwrap();
    }

    #[test]
    fn history_start_state() {
        for (tau, delta) in [(1.0, 5.0), (0.2, 2.0), (0.01, 13.7)] {
            let pp = p(tau, delta);
            let h = theorem1_history(&pp, PhiTilde::Linear).unwrap();
            assert_eq!(h.eval(0.0), [0.0, -delta]);
            let ph = theorem1_polar_history(&pp, PhiTilde::Linear).unwrap();
            let s = ph.eval(0.0);
            assert!((s[0] - delta).abs() < 1e-15 * delta);
            assert!((s[1] + PI / 2.0).abs() < 1e-15);
            let s = ph.eval(-tau);
            assert!((s[1] + 3.0 * PI / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn history_endpoint_errors() {
        let pp = p(1.0, 2.0);
        let bad_right = PhiTilde::Custom(Arc::new(|t| 4.0 * t + 0.2));
        match theorem1_history(&pp, bad_right) {
            Err(ModelError::EndpointMismatch { endpoint, .. }) => assert!(endpoint.contains("left")),
            other => panic!("{other:?}"),
        }
        // left end fine, right end off by 0.1 delta
        let bad_right = PhiTilde::Custom(Arc::new(|t| 4.4 * t + 0.2));
        match theorem1_history(&pp, bad_right) {
            Err(ModelError::EndpointMismatch { endpoint, .. }) => assert!(endpoint.contains("right")),
            other => panic!("{other:?}"),
        }
        // a curved phi_tilde with the right endpoints is accepted
        let quad = PhiTilde::Custom(Arc::new(|t: f64| -8.0 * t * t));
        assert!(theorem1_history(&pp, quad).is_ok());
    }

    #[test]
    fn history_pieces_must_tile() {
        let f: PieceFn<2> = Arc::new(|_| [0.0, 0.0]);
        let gap = HistoryFunction::from_pieces(vec![(-1.0, -0.5, f.clone()), (-0.4, 0.0, f.clone())]);
        assert!(matches!(gap, Err(ModelError::BadHistory(_))));
        let jumpy = HistoryFunction::from_pieces(vec![
            (-1.0, -0.5, f.clone()),
            (-0.5, 0.0, Arc::new(|_| [1.0, 0.0]) as PieceFn<2>),
        ])
        .unwrap();
        assert!(matches!(
            jumpy.check_continuous(1e-9),
            Err(ModelError::Discontinuous { at, .. }) if at == -0.5
        ));
    }

    #[test]
    fn exact_radius_examples() {
        for t in [0.0, 0.5, 3.0, 50.0, 1000.0] {
            assert!((nondelay_exact_radius(1.0, t) - 1.0).abs() < 1e-15);
        }
        assert!((nondelay_exact_radius(0.1, 60.0) - 1.0).abs() < 1e-15);
        let e = 1f64.exp();
        let direct = 2.0 * e / (1.0 + 4.0 * (e * e - 1.0)).sqrt();
        assert!((nondelay_exact_radius(2.0, 1.0) - direct).abs() < 1e-15);
    }

    #[test]
    fn exact_radius_solves_the_ode() {
        let h = 1e-6;
        for r0 in [0.1, 0.5, 1.5, 2.0] {
            for t in [0.1, 1.0, 2.5, 7.0] {
                let r = nondelay_exact_radius(r0, t);
                let dr = (nondelay_exact_radius(r0, t + h) - nondelay_exact_radius(r0, t - h)) / (2.0 * h);
                assert!((dr - r * (1.0 - r * r)).abs() < 1e-10, "r0={r0} t={t} {}", (dr - r * (1.0 - r * r)).abs());
            }
        }
    }
}
