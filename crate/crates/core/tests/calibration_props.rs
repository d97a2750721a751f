use pipeleak::*;
use proptest::prelude::*;

fn exponential(p1: f64, beta: f64, times: &[f64]) -> PressureSeries {
    PressureSeries::new(times.iter().map(|&t| (t, inlet_model(p1, beta, t))).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn noiseless_recovery(log_beta in -6.0..-2.0f64, p1 in 1e5..1e7f64) {
        let beta = 10f64.powf(log_beta);
        let times: Vec<f64> = (0..=5).map(|i| 300.0 * f64::from(i)).collect();
        let s = exponential(p1, beta, &times);
        for method in [BetaMethod::LogLinearThroughOrigin, BetaMethod::NonlinearLS] {
            let fit = fit_beta(&s, p1, method).unwrap();
            prop_assert!((fit.beta - beta).abs() <= 1e-10 * beta, "{:?}", fit);
        }
    }
}

#[test]
fn noisy_six_samples() {
    let mut b = ScenarioBundle::reference();
    b.scenario = b.scenario.with_beta(&b.spec, 3.65e-4).unwrap();
    let sampling = Sampling::new(0.0, 1500.0, 300.0).unwrap();
    let s = synth_series(&b, &sampling, &NoiseSpec::new(0.01, 7).unwrap(), SeriesSource::PureExponential).unwrap();
    assert_eq!(s.len(), 6);
    let fit = fit_beta_unguarded(&s, 5.5e5, BetaMethod::NonlinearLS).unwrap();
    assert!((fit.beta - 3.65e-4).abs() <= 0.05 * 3.65e-4, "{fit:?}");
}

#[test]
fn published_table_fit() {
    let s = read_series(pipeleak::io::REFERENCE_INLET_CSV.as_bytes()).unwrap();
    let ll = fit_beta(&s, 5.5e5, BetaMethod::LogLinearThroughOrigin).unwrap();
    let nls = fit_beta(&s, 5.5e5, BetaMethod::NonlinearLS).unwrap();
    assert!((ll.beta - 3.6518e-4).abs() < 1e-8, "{ll:?}");
    assert!((nls.beta - 3.8318e-4).abs() < 1e-8, "{nls:?}");
}

#[test]
fn too_few_samples() {
    let s = exponential(5.5e5, 1e-4, &[0.0, 100.0]);
    assert!(matches!(fit_beta(&s, 5.5e5, BetaMethod::default()), Err(Error::InsufficientData(_))));
}

#[test]
fn rising_pressure_is_rejected() {
    let s = PressureSeries::new(vec![(0.0, 5.5e5), (100.0, 5.6e5), (200.0, 5.4e5)]).unwrap();
    assert!(matches!(fit_beta(&s, 5.5e5, BetaMethod::default()), Err(Error::NonDecayingData { .. })));
}

#[test]
fn k_reproduces_the_onset_outflow() {
    let b = ScenarioBundle::reference();
    for mode in [KMode::PaperNumeric, KMode::FormulaWithG] {
        let k = calibrate_k(&b.spec, &b.boundary, mode).unwrap();
        let scenario = b.scenario.with_k(&b.spec, k).unwrap().with_k_mode(mode);
        let g0 = leak_rate_at_onset(&b.spec, &b.boundary, &scenario);
        assert!((g0 - b.boundary.base_mass_flux()).abs() < 1e-12 * g0);
    }
}
