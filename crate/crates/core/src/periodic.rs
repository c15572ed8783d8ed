//! Constant-radius periodic solutions.
//!
//! A periodic solution `r = const`, `theta' = omega` exists exactly when
//!
//! ```text
//! 1     = r^2 cos(omega tau)
//! omega = 1 + r^2 sin(omega tau)
//! ```
//!
//! which gives `r^4 = omega^2 - 2 omega + 2` and, with `omega tau` in the
//! `n`-th window `(-pi/2, pi/2) + 2 n pi`, the branch functions
//! `tau = k_n(omega) = (atan(omega - 1) + 2 n pi) / omega`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::HistoryFunction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PeriodicError {
    #[error("omega must be nonzero")]
    ZeroOmega,
    #[error("tau must be positive and finite, got {0}")]
    InvalidTau(f64),
    #[error("invalid range: {0}")]
    InvalidRange(String),
}

/// Margin by which `omega tau` must sit inside its window.
pub const WINDOW_MARGIN: f64 = 1e-9;

/// Log grid used to locate the `n = 0` roots.
const SCAN_LO: f64 = 1e-6;
const SCAN_HI: f64 = 1e6;
const SCAN_NODES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    pub n: i64,
    pub omega: f64,
    pub r: f64,
    pub tau: f64,
}

impl EquilibriumPoint {
    pub fn residuals(&self) -> (f64, f64) {
        equilibrium_residual(self)
    }

    /// `r^4 - (omega^2 - 2 omega + 2)`.
    pub fn relation_residual(&self) -> f64 {
        self.r.powi(4) - (self.omega * self.omega - 2.0 * self.omega + 2.0)
    }

    /// `r^4 tau`; equals one at the turning point of the `n = 0` branch.
    pub fn r4tau(&self) -> f64 {
        self.r.powi(4) * self.tau
    }

    /// `omega tau - 2 n pi`, which lies in `(-pi/2, pi/2)` for a genuine point.
    pub fn window_offset(&self) -> f64 {
        self.omega * self.tau - 2.0 * PI * self.n as f64
    }
}

/// `tau` as a function of `omega` on branch `n`.
pub fn k_n(omega: f64, n: i64) -> Result<f64, PeriodicError> {
    if omega == 0.0 {
        return Err(PeriodicError::ZeroOmega);
    }
    Ok(k_n_unchecked(omega, n))
}

fn k_n_unchecked(omega: f64, n: i64) -> f64 {
    ((omega - 1.0).atan() + 2.0 * PI * n as f64) / omega
}

pub fn radius_from_omega(omega: f64) -> f64 {
    let d = omega - 1.0;
    (d * d + 1.0).sqrt().sqrt()
}

/// Derivative of `k_0`.
pub fn k0_prime(omega: f64) -> Result<f64, PeriodicError> {
    if omega == 0.0 {
        return Err(PeriodicError::ZeroOmega);
    }
    let d = omega - 1.0;
    Ok((1.0 / (1.0 + d * d) - d.atan() / omega) / omega)
}

pub fn equilibrium_residual(point: &EquilibriumPoint) -> (f64, f64) {
    let phase = point.omega * point.tau;
    let r2 = point.r * point.r;
    (1.0 - r2 * phase.cos(), point.omega - 1.0 - r2 * phase.sin())
}

/// Root of a monotone `g` on `[a, b]` given `g(a)` and `g(b)` of opposite
/// sign: bisection down to adjacent floats, then a few secant steps kept
/// inside the final bracket.
fn bracketed_root(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut ga = g(a);
    let mut gb = g(b);
    if ga == 0.0 {
        return a;
    }
    if gb == 0.0 {
        return b;
    }
    debug_assert!(ga.signum() != gb.signum());
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a.min(b) || m >= a.max(b) {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if gm.signum() == ga.signum() {
            a = m;
            ga = gm;
        } else {
            b = m;
            gb = gm;
        }
    }
    // secant polish
    let (lo, hi) = (a.min(b), a.max(b));
    let mut best = if ga.abs() < gb.abs() { (a, ga) } else { (b, gb) };
    let (mut x0, mut g0, mut x1, mut g1) = (a, ga, b, gb);
    for _ in 0..4 {
        if g1 == g0 {
            break;
        }
        let x2 = x1 - g1 * (x1 - x0) / (g1 - g0);
        if !(x2 >= lo && x2 <= hi) {
            break;
        }
        let g2 = g(x2);
        if g2.abs() < best.1.abs() {
            best = (x2, g2);
        }
        (x0, g0, x1, g1) = (x1, g1, x2, g2);
    }
    best.0
}

fn in_window(omega: f64, tau: f64, n: i64) -> bool {
    let off = omega * tau - 2.0 * PI * n as f64;
    off.abs() < FRAC_PI_2 - WINDOW_MARGIN
}

fn point(n: i64, omega: f64, tau: f64) -> EquilibriumPoint {
    EquilibriumPoint {
        n,
        omega,
        r: radius_from_omega(omega),
        tau,
    }
}

/// Root of the branch that is monotone in `omega` on one sign of the axis,
/// with `k -> infinity` as `omega -> 0` and `k -> 0` as `|omega| -> infinity`.
fn monotone_root(tau: f64, n: i64, positive: bool) -> Option<f64> {
    let s = if positive { 1.0 } else { -1.0 };
    let g = |w: f64| k_n_unchecked(s * w, n) - tau;
    // in |omega|: g decreases from +inf to -tau
    let mut near = 1.0;
    let mut far = 1.0;
    let mut guard = 0;
    while g(near) <= 0.0 {
        near *= 0.5;
        guard += 1;
        if guard > 2000 || near == 0.0 {
            return None;
        }
    }
    while g(far) >= 0.0 {
        far *= 2.0;
        guard += 1;
        if guard > 2000 || !far.is_finite() {
            return None;
        }
    }
    Some(s * bracketed_root(g, near, far))
}

/// All equilibria on branch `n` at delay `tau`.
///
/// Branches `n >= 1` live on `omega > 0` and `n <= -1` on `omega < 0`, each
/// with exactly one root. Branch `0` has one root with `omega < 0` and up to
/// two with `omega > 1` (none once `tau` exceeds the turning point).
pub fn solve_branch(tau: f64, n: i64) -> Result<Vec<EquilibriumPoint>, PeriodicError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(PeriodicError::InvalidTau(tau));
    }
    let mut omegas = Vec::new();
    match n {
        n if n >= 1 => omegas.extend(monotone_root(tau, n, true)),
        n if n <= -1 => omegas.extend(monotone_root(tau, n, false)),
        _ => {
            omegas.extend(monotone_root(tau, 0, false));
            omegas.extend(scan_positive_k0(tau));
        }
    }
    let mut pts: Vec<_> = omegas
        .into_iter()
        .filter(|&w| in_window(w, tau, n))
        .map(|w| point(n, w, tau))
        .collect();
    pts.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    Ok(pts)
}

fn scan_positive_k0(tau: f64) -> Vec<f64> {
    let g = |w: f64| k_n_unchecked(w, 0) - tau;
    let ratio = (SCAN_HI / SCAN_LO).ln() / (SCAN_NODES - 1) as f64;
    let node = |i: usize| SCAN_LO * (ratio * i as f64).exp();
    let mut roots = Vec::new();
    let mut a = node(0);
    let mut ga = g(a);
    for i in 1..SCAN_NODES {
        let b = node(i);
        let gb = g(b);
        if ga == 0.0 {
            roots.push(a);
        } else if ga.signum() != gb.signum() && gb != 0.0 {
            roots.push(bracketed_root(g, a, b));
        }
        a = b;
        ga = gb;
    }
    roots
}

/// Union of [`solve_branch`] over `|n| <= n_max`, sorted by `omega`.
pub fn enumerate_equilibria(tau: f64, n_max: u32) -> Result<Vec<EquilibriumPoint>, PeriodicError> {
    let n_max = n_max as i64;
    let mut all = Vec::new();
    for n in -n_max..=n_max {
        all.extend(solve_branch(tau, n)?);
    }
    all.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    Ok(all)
}

/// Turning point of the `n = 0` branch on `omega > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct K0Maximum {
    pub omega_star: f64,
    pub tau_star: f64,
    /// `r(omega_star)^4 * tau_star`.
    pub r4tau: f64,
}

pub fn k0_maximum() -> K0Maximum {
    // k0' > 0 at 2 and < 0 at 3
    let (mut a, mut b) = (2.0f64, 3.0f64);
    let fp = |w: f64| k0_prime(w).expect("omega > 0");
    while b - a > 1e-12 {
        let m = 0.5 * (a + b);
        if fp(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let omega_star = 0.5 * (a + b);
    let tau_star = k_n_unchecked(omega_star, 0);
    K0Maximum {
        omega_star,
        tau_star,
        r4tau: radius_from_omega(omega_star).powi(4) * tau_star,
    }
}

/// One monotone stretch of a branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSample {
    pub n: i64,
    /// Ordered by increasing `omega`.
    pub points: Vec<EquilibriumPoint>,
}

/// Samples `count` values log-uniformly in `|omega - pivot|` between `a` and `b`
/// (same side of the pivot).
fn log_samples(pivot: f64, a: f64, b: f64, count: usize) -> Vec<f64> {
    let (da, db) = ((a - pivot).abs(), (b - pivot).abs());
    let s = (a - pivot).signum();
    let count = count.max(2);
    let (la, lb) = (da.ln(), db.ln());
    let mut v: Vec<f64> = (0..count)
        .map(|i| {
            let f = i as f64 / (count - 1) as f64;
            pivot + s * (la + (lb - la) * f).exp()
        })
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Parametric samples of every branch `n` in `n_range` restricted to
/// `tau in tau_range`, `samples` points per monotone stretch.
pub fn bifurcation_diagram(
    tau_range: (f64, f64),
    n_range: (i64, i64),
    samples: usize,
) -> Result<Vec<BranchSample>, PeriodicError> {
    let (t_lo, t_hi) = tau_range;
    if !(t_lo > 0.0 && t_hi > t_lo && t_hi.is_finite()) {
        return Err(PeriodicError::InvalidRange(format!(
            "tau range must satisfy 0 < lo < hi, got [{t_lo}, {t_hi}]"
        )));
    }
    if n_range.0 > n_range.1 {
        return Err(PeriodicError::InvalidRange(format!(
            "empty branch range {:?}",
            n_range
        )));
    }
    let mut out = Vec::new();
    let mut emit = |n: i64, omegas: Vec<f64>| {
        let points: Vec<_> = omegas
            .into_iter()
            .filter_map(|w| {
                let tau = k_n_unchecked(w, n);
                let slack = 1e-12 * t_hi;
                (tau >= t_lo - slack && tau <= t_hi + slack).then(|| point(n, w, tau))
            })
            .collect();
        if !points.is_empty() {
            out.push(BranchSample { n, points });
        }
    };
    for n in n_range.0..=n_range.1 {
        if n != 0 {
            let positive = n > 0;
            let (Some(w_hi_tau), Some(w_lo_tau)) = (
                monotone_root(t_hi, n, positive),
                monotone_root(t_lo, n, positive),
            ) else {
                continue;
            };
            emit(n, log_samples(0.0, w_hi_tau, w_lo_tau, samples));
            continue;
        }
        if let (Some(a), Some(b)) = (monotone_root(t_hi, 0, false), monotone_root(t_lo, 0, false)) {
            emit(0, log_samples(0.0, a, b, samples));
        }
        let max = k0_maximum();
        if t_lo < max.tau_star {
            // rising stretch from near omega = 1 up to the turning point
            let g = |w: f64| k_n_unchecked(w, 0) - t_lo;
            let start = bracketed_root(g, 1.0 + t_lo * 1e-3, max.omega_star);
            emit(0, log_samples(1.0, start, max.omega_star, samples));
            // falling stretch beyond it
            let mut far = 2.0 * max.omega_star;
            while g(far) > 0.0 {
                far *= 2.0;
            }
            let end = bracketed_root(g, max.omega_star, far);
            emit(0, log_samples(0.0, max.omega_star, end, samples));
        }
    }
    Ok(out)
}

/// Polar history `r = point.r`, `theta = omega t` on `[-tau, 0]`.
pub fn periodic_seed_history(point: &EquilibriumPoint) -> HistoryFunction<2> {
    let (r, omega) = (point.r, point.omega);
    HistoryFunction::smooth(-point.tau, 0.0, move |t| [r, omega * t])
}

/// The `n = 0`, `omega > 1` point continuing the non-delayed limit cycle
/// `(tau, omega) = (0, 1)`: the smaller of the positive roots.
pub fn limit_cycle_branch_point(tau: f64) -> Result<Option<EquilibriumPoint>, PeriodicError> {
    Ok(solve_branch(tau, 0)?.into_iter().find(|p| p.omega > 1.0))
}
