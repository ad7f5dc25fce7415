use proptest::prelude::*;

use drive_observability::lab::{constant_theta_o_with, realize_voltages, LocusDriver, MechanicalMode, ScalarProfile};
use drive_observability::machine::{ImParams, PmsmParams};
use drive_observability::observability::{
    im_condition_5d, im_condition_terms, observability_vector, pmsm_condition, pmsm_determinant, theta_o_rate,
};

fn log_range(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

fn salient() -> impl Strategy<Value = PmsmParams> {
    (log_range(1e-3, 1e-1), log_range(1e-3, 1e-1), log_range(0.01, 1.0))
        .prop_filter("needs saliency", |(l_d, l_q, _)| (l_d - l_q).abs() > 1e-4)
        .prop_map(|(l_d, l_q, k_e)| PmsmParams::new(l_d, l_q, k_e, 0.5, 4, 1e-3).unwrap())
}

fn any_machine() -> impl Strategy<Value = PmsmParams> {
    prop_oneof![
        salient(),
        (log_range(1e-3, 1e-1), log_range(0.01, 1.0))
            .prop_map(|(l, k_e)| PmsmParams::new(l, l, k_e, 0.5, 4, 1e-3).unwrap()),
    ]
}

fn current() -> impl Strategy<Value = f64> {
    -20.0..20.0
}

fn rate() -> impl Strategy<Value = f64> {
    -2e3..2e3
}

proptest! {
    #[test]
    fn determinant_is_flux_squared_times_speed_margin(
        params in any_machine(),
        i_d in current(), i_q in current(), di_d in rate(), di_q in rate(), omega in -500.0..500.0f64,
    ) {
        let psi = observability_vector(i_d, i_q, &params);
        prop_assume!(!psi.is_degenerate(&params, i_d, i_q));
        let rate = theta_o_rate(i_d, i_q, di_d, di_q, &params).unwrap();
        let expected = psi.magnitude.powi(2) * (omega - rate) / (params.L_d * params.L_q);
        let d = pmsm_determinant(i_d, i_q, di_d, di_q, omega, &params);
        let scale = psi.magnitude.powi(2) * (omega.abs() + rate.abs()) / (params.L_d * params.L_q);
        prop_assert!((d - expected).abs() <= 1e-10 * scale, "D = {d}, expected {expected}");
        prop_assert_eq!(d > 0.0, omega - rate > 0.0);
    }

    #[test]
    fn phase_rate_matches_finite_difference(
        params in salient(), i_d in current(), i_q in current(), di_d in rate(), di_q in rate(),
    ) {
        let h = 1e-7;
        let theta = |s: f64| observability_vector(i_d + s * di_d, i_q + s * di_q, &params).theta_o;
        let psi = observability_vector(i_d, i_q, &params);
        // keep the central difference away from the atan2 branch cut and the origin
        prop_assume!(psi.magnitude > 1e-3 && psi.theta_o.abs() < 3.0);
        let fd = (theta(h) - theta(-h)) / (2.0 * h);
        let rate = theta_o_rate(i_d, i_q, di_d, di_q, &params).unwrap();
        prop_assert!((fd - rate).abs() <= 1e-5 * rate.abs().max(1.0), "fd {fd}, closed form {rate}");
    }

    #[test]
    fn surface_mounted_is_unobservable_only_at_standstill(
        l in log_range(1e-3, 1e-1), k_e in log_range(0.01, 1.0),
        i_d in current(), i_q in current(), di_d in rate(), di_q in rate(),
        omega in prop_oneof![-500.0..500.0f64, -2e-6..2e-6f64],
    ) {
        let params = PmsmParams::new(l, l, k_e, 0.5, 4, 1e-3).unwrap();
        let eps = 1e-6;
        prop_assert_eq!(theta_o_rate(i_d, i_q, di_d, di_q, &params).unwrap(), 0.0);
        let verdict = pmsm_condition(i_d, i_q, di_d, di_q, omega, &params, eps);
        prop_assert_eq!(verdict.observable, omega.abs() > eps);
    }

    #[test]
    fn constant_phase_locus_keeps_its_phase(
        params in salient(),
        theta_o in -1.4..1.4f64,
        start in 0.05..0.5f64,
        shrink in 1.5..10.0f64,
        t in 0.0..0.05f64,
    ) {
        let driver = LocusDriver::FluxMagnitude(ScalarProfile::Hyperbolic { start, end: start / shrink, duration: 0.05 });
        let profile = constant_theta_o_with(&params, theta_o, driver, 0.05).unwrap();
        let c = profile.eval(t);
        let psi = observability_vector(c.i_d, c.i_q, &params);
        prop_assert!((psi.theta_o - theta_o).abs() < 1e-9, "phase {} vs {theta_o}", psi.theta_o);
        let rate = theta_o_rate(c.i_d, c.i_q, c.di_d, c.di_q, &params).unwrap();
        let flux_speed = params.delta_l().abs() * c.di_d.hypot(c.di_q) / psi.magnitude;
        prop_assert!(rate.abs() <= 1e-9 * flux_speed.max(1.0), "phase rate {rate}");
        prop_assert!(pmsm_determinant(c.i_d, c.i_q, c.di_d, c.di_q, 0.0, &params).abs() < 1e-6);
    }

    #[test]
    fn constant_speed_induction_machine_conditions_coincide(
        psi in (-1.0..1.0f64, -1.0..1.0f64),
        dpsi in (-300.0..300.0f64, -300.0..300.0f64),
        omega in -400.0..400.0f64,
    ) {
        let params = ImParams::default_machine();
        let terms = im_condition_terms(psi, dpsi, omega, 0.0, &params).unwrap();
        prop_assert_eq!(terms.acceleration_term, 0.0);
        prop_assert_eq!(terms.value().abs(), im_condition_5d(psi, dpsi, 1e-6).value.abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Voltages computed from a prescribed current path reproduce it in open loop.
    #[test]
    fn realised_voltages_reproduce_the_currents(
        params in salient(),
        theta_o in -1.2..1.2f64,
        start in 0.1..0.5f64,
        shrink in 1.5..5.0f64,
        theta_e in -3.0..3.0f64,
    ) {
        let driver = LocusDriver::FluxMagnitude(ScalarProfile::Hyperbolic { start, end: start / shrink, duration: 0.02 });
        let profile = constant_theta_o_with(&params, theta_o, driver, 0.02).unwrap();
        let excitation = realize_voltages(&profile, &params, MechanicalMode::LockedRotor { theta_e }).unwrap();
        let trajectory = excitation.simulate(1e-5, 2000).unwrap();
        let error = excitation.tracking_error(&trajectory);
        prop_assert!(error < 1e-3, "relative tracking error {error}");
    }
}
