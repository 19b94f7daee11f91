use approx::assert_relative_eq;
use rmtlab::montecarlo::{
    clt_from_spectra, cov_from_spectra, default_m, esd_from_spectra, ratio_consistent, run_clt, run_moment_check,
    run_trace_check, simulate_matrix, simulate_spectra, simulate_traces, ExperimentConfig,
};
use rmtlab::Error;
use rmtlab_core::variance::VarianceSettings;
use rmtlab_core::{Complex64, SigmaMeasure, TestFunction, VectorLaw};

fn cfg(law: &str, sigma: SigmaMeasure, n: usize, r: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig::new(law.parse().unwrap(), sigma, n, None, r, seed).unwrap()
}

#[test]
fn ratio_rule() {
    assert_eq!(default_m(512, 1.0), 512);
    assert_eq!(default_m(100, 0.25), 25);
    assert_eq!(default_m(100, 0.0), 1);
    assert!(ratio_consistent(100, 1, 0.0));
    assert!(ratio_consistent(100, 25, 0.25));
    assert!(!ratio_consistent(100, 40, 0.25));
    let sigma = SigmaMeasure::point_mass(1.0, 1.0).unwrap();
    assert!(matches!(
        ExperimentConfig::new(VectorLaw::Sphere, sigma.clone(), 10, Some(30), 4, 1),
        Err(Error::Usage(_))
    ));
    assert!(ExperimentConfig::new(VectorLaw::Sphere, sigma, 10, None, 1, 1).is_err());
}

#[test]
fn single_vector_leaves_n_minus_one_zeros() {
    let c = cfg("iid:gaussian", SigmaMeasure::point_mass(1.0, 0.0).unwrap(), 64, 2, 3);
    assert_eq!(c.m, 1);
    for s in simulate_spectra(&c).unwrap() {
        let top = s.eigenvalues[63];
        let zeros = s.eigenvalues.iter().filter(|v| v.abs() <= 1e-12 * top).count();
        assert_eq!(zeros, 63);
    }
}

#[test]
fn matrix_trace_matches_vector_norms() {
    let c = cfg(
        "lpball:1.5",
        SigmaMeasure::parse("0.5:0.5,2:0.5", 0.5).unwrap(),
        40,
        3,
        8,
    );
    let taus = c.taus().unwrap();
    let traces = simulate_traces(&c).unwrap();
    for r in 0..3u64 {
        let (m, t) = simulate_matrix(&c, &taus, r).unwrap();
        assert_relative_eq!(m.trace(), t, max_relative = 1e-12);
        assert_eq!(traces[r as usize], t);
        assert_eq!(m.max_asymmetry(), 0.0);
    }
}

#[test]
fn sphere_trace_is_deterministic() {
    // ‖y‖ = 1 makes N[λ] = Σ τ_α exactly
    let c = cfg("sphere", SigmaMeasure::point_mass(1.0, 1.0).unwrap(), 48, 30, 4);
    let r = run_clt(&c, &TestFunction::poly(&[0.0, 1.0]).unwrap(), &VarianceSettings::default(), false).unwrap();
    assert!(r.sample_variance < 1e-20, "{}", r.sample_variance);
    assert!(r.predicted_variance.abs() < 1e-6);
    assert!(r.ks_statistic.is_none() || r.sample_variance > 0.0);
}

#[test]
fn trace_variance_matches_exact_formula() {
    let c = cfg("iid:rademacher", SigmaMeasure::point_mass(1.0, 1.0).unwrap(), 64, 400, 17);
    let r = run_trace_check(&c).unwrap();
    // Rademacher: ‖y‖² ≡ 1
    assert!(r.exact_variance.abs() < 1e-12);
    assert!(r.sample_variance < 1e-20);
    let c = cfg("iid:gaussian", SigmaMeasure::point_mass(1.0, 1.0).unwrap(), 64, 400, 17);
    let r = run_trace_check(&c).unwrap();
    // m · 2/n for gaussian vectors
    assert_relative_eq!(r.exact_variance, 2.0, max_relative = 1e-12);
    assert!(r.z_score.abs() < 4.0, "{r:?}");
}

#[test]
fn null_ensemble_has_zero_covariance() {
    let c = cfg("iid:gaussian", SigmaMeasure::point_mass(0.0, 1.0).unwrap(), 32, 10, 2);
    let spectra = simulate_spectra(&c).unwrap();
    let z1 = Complex64::new(0.0, 1.0);
    let z2 = Complex64::new(1.0, 2.0);
    let r = cov_from_spectra(&c, &spectra, z1, z2).unwrap();
    assert_eq!(r.empirical, Complex64::new(0.0, 0.0));
    assert!(r.predicted.norm() < 1e-9);
    assert!(r.within_4se);
    assert_relative_eq!(r.mean_gamma_z1.im, (-32.0 / z1).im, max_relative = 1e-14);
}

#[test]
fn conjugate_pair_covariance_is_psd_and_real() {
    let c = cfg("iid:gaussian", SigmaMeasure::point_mass(1.0, 1.0).unwrap(), 48, 60, 21);
    let spectra = simulate_spectra(&c).unwrap();
    let z = Complex64::new(0.5, 1.0);
    let r = cov_from_spectra(&c, &spectra, z, z.conj()).unwrap();
    assert!(r.covariance_psd);
    // E|γ°|² is real and nonnegative
    assert!(r.empirical.re > 0.0);
    assert!(r.empirical.im.abs() < 1e-9 * r.empirical.re);
    assert!(r.predicted.re > 0.0);
}

#[test]
fn esd_is_close_at_moderate_size() {
    let c = cfg("iid:gaussian", SigmaMeasure::point_mass(1.0, 0.5).unwrap(), 128, 4, 6);
    let spectra = simulate_spectra(&c).unwrap();
    let r = esd_from_spectra(&c, &spectra, 20).unwrap();
    assert!(r.ks_distance < 0.08, "{}", r.ks_distance);
    let emp: f64 = r.histogram.iter().map(|b| b.empirical).sum();
    let lim: f64 = r.histogram.iter().map(|b| b.limit).sum();
    assert_relative_eq!(emp, 1.0, epsilon = 1e-12);
    assert_relative_eq!(lim, 1.0, epsilon = 1e-6);
}

#[test]
fn esd_accounts_for_the_zero_atom() {
    let c = cfg("iid:gaussian", SigmaMeasure::point_mass(1.0, 0.25).unwrap(), 128, 4, 9);
    let spectra = simulate_spectra(&c).unwrap();
    let r = esd_from_spectra(&c, &spectra, 30).unwrap();
    assert_relative_eq!(r.atom_mass, 0.75, epsilon = 1e-12);
    assert_relative_eq!(r.zero_fraction, 0.75, epsilon = 1e-12);
    assert!(r.ks_distance < 0.08, "{}", r.ks_distance);
}

#[test]
fn clt_report_keeps_values_on_request() {
    let c = cfg("iid:uniform", SigmaMeasure::point_mass(1.0, 1.0).unwrap(), 24, 12, 5);
    let spectra = simulate_spectra(&c).unwrap();
    let phi = TestFunction::exp(1.0).unwrap();
    let with = clt_from_spectra(&c, &phi, &spectra, 0.1, true).unwrap();
    let without = clt_from_spectra(&c, &phi, &spectra, 0.1, false).unwrap();
    assert_eq!(with.values.as_ref().map(Vec::len), Some(12));
    assert!(without.values.is_none());
    assert_eq!(with.sample_variance, without.sample_variance);
    assert_relative_eq!(with.b, -1.2, epsilon = 1e-12);
}

#[test]
fn moment_check_needs_many_replicates() {
    assert!(matches!(
        run_moment_check(&VectorLaw::Sphere, &[8], 100, 1, 1),
        Err(Error::Usage(_))
    ));
}

#[test]
fn gaussian_moment_ladder_is_flat() {
    let r = run_moment_check(&"iid:gaussian".parse().unwrap(), &[8, 32], 10_000, 3, 2).unwrap();
    for row in &r.rows {
        assert!(row.a_hat.abs() <= 4.0 * row.a_hat_se, "{row:?}");
        assert!(row.b_hat.abs() <= 4.0 * row.b_hat_se, "{row:?}");
        assert_eq!(row.a_exact_n, 0.0);
    }
}
