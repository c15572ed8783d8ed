use delay_blowup::blowup::{
    alpha_constant, classify_run, threshold_search, verify_theorem1_bounds, CheckStatus,
    Classification, ModelForm, RunRequest, CHECK_BLOWUP_TIME, CHECK_QUARTER_TIME,
};
use delay_blowup::integrator::IntegratorOptions;
use delay_blowup::model::{ModelParams, PhiTilde};

fn classify(tau: f64, delta: f64, form: ModelForm, opts: &IntegratorOptions) -> Classification {
    let req = RunRequest::new(ModelParams::new(tau, delta).unwrap()).with_form(form);
    classify_run(&req, opts).unwrap().1.classification
}

#[test]
fn figure_parameter_sets_classify_as_captioned() {
    let o = IntegratorOptions::default();
    for form in [ModelForm::Polar, ModelForm::Cartesian] {
        for d in [0.01, 0.1, 1.0, 5.0] {
            assert_eq!(classify(1.0, d, form, &o), Classification::BlowUp, "tau 1, delta {d}");
        }
        assert_eq!(classify(0.2, 2.0, form, &o), Classification::Bounded);
        assert_eq!(classify(0.2, 3.0, form, &o), Classification::BlowUp);
    }
}

#[test]
fn report_invariants() {
    let o = IntegratorOptions::default();
    for (tau, d) in [(1.0, 5.0), (0.2, 2.0), (0.2, 3.0), (1.0, 0.01)] {
        let req = RunRequest::new(ModelParams::new(tau, d).unwrap());
        let (_, rep) = classify_run(&req, &o).unwrap();
        match rep.classification {
            Classification::BlowUp => {
                assert!(rep.r_last >= o.r_max);
                assert!(rep.t_est.unwrap() >= rep.t_stop);
                assert!(rep.extrapolation_points >= 4);
            }
            Classification::Bounded => {
                assert_eq!(rep.t_stop, o.t_horizon);
                assert!(rep.tail_radius_max.unwrap() < o.r_max / 10.0);
                assert!(rep.t_est.is_none());
            }
            Classification::HorizonReached => panic!("unexpected horizon-reached"),
        }
    }
}

#[test]
fn bounded_tail_settles_on_a_circle() {
    let o = IntegratorOptions::default();
    let req = RunRequest::new(ModelParams::new(0.2, 2.0).unwrap());
    let (_, rep) = classify_run(&req, &o).unwrap();
    assert!(rep.tail_radius_std.unwrap() < 1e-3);
}

#[test]
fn horizon_before_blowup_is_judged_by_tail_radius() {
    let o = IntegratorOptions {
        t_horizon: 0.05,
        ..IntegratorOptions::default()
    };
    // stopped at t = 0.05, long before the pole, with r far below r_max / 10
    let req = RunRequest::new(ModelParams::new(1.0, 5.0).unwrap());
    let (_, rep) = classify_run(&req, &o).unwrap();
    assert_eq!(rep.t_stop, 0.05);
    assert_eq!(rep.classification, Classification::Bounded);
}

#[test]
fn large_delta_passes_every_estimate() {
    let (_, rep) =
        verify_theorem1_bounds(100.0, 1.0, PhiTilde::Linear, &IntegratorOptions::default()).unwrap();
    assert!(rep.all_pass(), "{rep:#?}");
    assert_eq!(rep.tau_prime, 0.5);
    assert_eq!(rep.alpha_delta, alpha_constant() * 100.0);
}

#[test]
fn small_delta_records_actuals() {
    let (_, rep) =
        verify_theorem1_bounds(0.01, 1.0, PhiTilde::Linear, &IntegratorOptions::default()).unwrap();
    assert_eq!(rep.classification, Classification::BlowUp);
    assert!(!rep.all_pass());
    assert_eq!(rep.check(CHECK_QUARTER_TIME).unwrap().status, CheckStatus::Fail);
    // blows up, but after tau'
    assert_eq!(rep.check(CHECK_BLOWUP_TIME).unwrap().status, CheckStatus::Fail);
}

#[test]
fn threshold_at_tau_02_lies_between_captions() {
    let o = IntegratorOptions::default();
    let res = threshold_search(0.2, 2.0, 3.0, 0.01, &PhiTilde::Linear, &o).unwrap();
    assert!(res.lower > 2.0 && res.upper < 3.0);
    assert!(res.width() < 0.01);
    assert!(res.is_monotone());
    let tight = IntegratorOptions {
        rel_tol: o.rel_tol / 10.0,
        ..o.clone()
    };
    for p in &res.probes {
        assert_eq!(classify(0.2, p.delta, ModelForm::Polar, &tight), p.classification, "{p:?}");
    }
}
