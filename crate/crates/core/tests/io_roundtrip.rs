use pipeleak::io::{REFERENCE_CONFIG, SYNTHETIC_INLET_CSV};
use pipeleak::*;

fn sampling() -> Sampling {
    Sampling::new(0.0, 600.0, 10.0).unwrap()
}

#[test]
fn written_series_reads_back_within_print_precision() {
    let b = ScenarioBundle::reference();
    let s = synth_series(&b, &sampling(), &NoiseSpec::new(0.01, 3).unwrap(), SeriesSource::AnalyticForward).unwrap();
    let mut buf = Vec::new();
    write_series(&s, &mut buf).unwrap();
    let back = read_series(buf.as_slice()).unwrap();
    assert_eq!(back.len(), s.len());
    for (a, b) in s.samples().iter().zip(back.samples()) {
        assert_eq!(a.0, b.0);
        assert!((a.1 - b.1).abs() <= 1e-8 * a.1);
    }
}

#[test]
fn same_seed_same_series() {
    let b = ScenarioBundle::reference();
    let noise = NoiseSpec::new(0.005, 11).unwrap();
    let a = synth_series(&b, &sampling(), &noise, SeriesSource::AnalyticForward).unwrap();
    let c = synth_series(&b, &sampling(), &noise, SeriesSource::AnalyticForward).unwrap();
    assert_eq!(a, c);
    let other = synth_series(&b, &sampling(), &NoiseSpec::new(0.005, 12).unwrap(), SeriesSource::AnalyticForward).unwrap();
    assert_ne!(a, other);
}

#[test]
fn zero_noise_is_the_closed_form() {
    let b = ScenarioBundle::reference();
    let s = synth_series(&b, &sampling(), &NoiseSpec::new(0.0, 99).unwrap(), SeriesSource::AnalyticForward).unwrap();
    for &(t, p) in s.samples() {
        assert_eq!(p, inlet_pressure(&b.spec, &b.boundary, &b.scenario, &b.series_cfg, t).unwrap());
    }
}

#[test]
fn bundled_synthetic_series_is_current() {
    let b = ScenarioBundle::reference();
    let fresh = synth_series(&b, &Sampling::new(0.0, 1200.0, 1.0).unwrap(), &NoiseSpec::none(), SeriesSource::AnalyticForward).unwrap();
    let mut buf = Vec::new();
    write_series(&fresh, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), SYNTHETIC_INLET_CSV);
}

#[test]
fn reference_config_parses_cleanly() {
    let (bundle, warnings) = parse_config(REFERENCE_CONFIG).unwrap();
    assert!(warnings.is_empty(), "{warnings:?}");
    assert_eq!(bundle.scenario.location(), 25e3);
    assert_eq!(bundle.spec.length(), 100e3);
}

#[test]
fn malformed_series_reports_the_line() {
    let err = read_series("t_s,p_pa\n0,5.5e5\n10,abc\n".as_bytes()).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    let err = read_series("t_s,p_pa\n0,5.5e5\n20,5.4e5\n10,5.3e5\n".as_bytes()).unwrap_err();
    assert!(matches!(err, Error::Order { .. }), "{err}");
}

#[test]
fn profile_table_has_one_row_per_node() {
    let b = ScenarioBundle::reference();
    let xs: Vec<f64> = (0..=20).map(|i| 5e3 * f64::from(i)).collect();
    let f = pressure_field(&b.spec, &b.boundary, &b.scenario, &b.series_cfg, &xs, &[100.0, 300.0, 600.0]).unwrap();
    let mut buf = Vec::new();
    write_profile_table(&f, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 22);
    assert!(text.starts_with("x_m,seg1_t100,seg2_t100,seg3_t100,"));
}
