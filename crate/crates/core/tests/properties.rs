use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

use delay_blowup::blowup::theta_equilibria;
use delay_blowup::model::{
    cartesian_rhs, polar_rhs, stage1_ode_rhs, stage1_polar_rhs, to_cartesian, to_polar,
    CartesianState, ModelParams, PolarState,
};
use delay_blowup::periodic::{k_n, radius_from_omega, solve_branch};
use proptest::prelude::*;

fn params(delta: f64) -> ModelParams {
    ModelParams::new(1.0, delta).unwrap()
}

proptest! {
    #[test]
    fn polar_round_trip(r in 1e-6f64..1e6, theta in -50.0f64..50.0) {
        let c = to_cartesian(PolarState { r, theta });
        let p = to_polar(c, theta).unwrap();
        prop_assert!((p.r - r).abs() <= 1e-12 * r);
        prop_assert!((p.theta - theta).abs() <= 1e-10 * theta.abs().max(1.0));
    }

    #[test]
    fn cartesian_round_trip(x in -1e4f64..1e4, y in -1e4f64..1e4, hint in -30.0f64..30.0) {
        prop_assume!(x != 0.0 || y != 0.0);
        let c = to_cartesian(to_polar(CartesianState { x, y }, hint).unwrap());
        let scale = x.hypot(y);
        prop_assert!((c.x - x).abs() <= 1e-12 * scale && (c.y - y).abs() <= 1e-12 * scale);
    }

    #[test]
    fn stage1_is_frozen_delay(delta in 1e-3f64..1e3, x in -1e3f64..1e3, y in -1e3f64..1e3) {
        let p = params(delta);
        let s = CartesianState { x, y };
        let a = stage1_ode_rhs(&p, s);
        let b = cartesian_rhs(&p, s, CartesianState { x: -delta, y: -delta });
        prop_assert_eq!(a.x.to_bits(), b.x.to_bits());
        prop_assert_eq!(a.y.to_bits(), b.y.to_bits());
    }

    #[test]
    fn polar_rhs_matches_cartesian(
        r in 1e-3f64..1e3, th in -10.0f64..10.0,
        rd in 0.0f64..1e3, thd in -10.0f64..10.0,
    ) {
        let p = params(1.0);
        let cur = PolarState { r, theta: th };
        let del = PolarState { r: rd, theta: thd };
        let c = to_cartesian(cur);
        let f = cartesian_rhs(&p, c, to_cartesian(del));
        let pr = polar_rhs(&p, cur, del);
        // project the Cartesian velocity onto the polar frame
        let (s, co) = th.sin_cos();
        let dr = f.x * co + f.y * s;
        let dth = (-f.x * s + f.y * co) / r;
        let scale = 1.0 + r * r * rd;
        prop_assert!((dr - pr.r).abs() <= 1e-12 * scale * r);
        prop_assert!((dth - pr.theta).abs() <= 1e-12 * scale);
    }

    #[test]
    fn stage1_polar_matches_cartesian(delta in 1e-2f64..1e2, r in 1e-2f64..1e2, th in -PI..PI) {
        let p = params(delta);
        let cur = PolarState { r, theta: th };
        let f = stage1_ode_rhs(&p, to_cartesian(cur));
        let pr = stage1_polar_rhs(&p, cur);
        let (s, co) = th.sin_cos();
        let scale = 1.0 + delta * r * r;
        prop_assert!((f.x * co + f.y * s - pr.r).abs() <= 1e-10 * scale);
        prop_assert!(((-f.x * s + f.y * co) / r - pr.theta).abs() <= 1e-10 * scale);
    }

    #[test]
    fn theta_equilibria_are_zeros(delta in 1e-2f64..1e2, r in 1e-2f64..1e3) {
        let eq = theta_equilibria(delta, r);
        prop_assert_eq!(eq.exists, delta * r > 1.0 / SQRT_2);
        if eq.exists {
            for th in [eq.theta_s, eq.theta_u] {
                let g = 1.0 + SQRT_2 * delta * r * (th + 3.0 * FRAC_PI_4).sin();
                prop_assert!(g.abs() <= 1e-9, "{}", g);
            }
            prop_assert!(eq.theta_s > FRAC_PI_4 && eq.theta_s <= 3.0 * FRAC_PI_4 + 1e-12);
        }
    }

    #[test]
    fn branch_round_trip(n in -6i64..=6, frac in 0.05f64..0.95) {
        // pick omega inside the window of branch n, then solve back from tau
        let omega = if n == 0 { -10.0 * frac } else { 2.0 * PI * n as f64 * (0.2 + frac) };
        let tau = k_n(omega, n).unwrap();
        prop_assume!(tau > 1e-6 && tau < 1e3);
        let pts = solve_branch(tau, n).unwrap();
        let hit = pts.iter().find(|p| (p.omega - omega).abs() <= 1e-7 * omega.abs().max(1.0));
        prop_assert!(hit.is_some(), "omega {} tau {} got {:?}", omega, tau, pts);
        let p = hit.unwrap();
        prop_assert!((p.r - radius_from_omega(omega)).abs() <= 1e-9 * p.r);
    }
}
