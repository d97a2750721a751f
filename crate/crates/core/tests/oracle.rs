use pipeleak::*;

fn reference() -> ScenarioBundle {
    ScenarioBundle::reference()
}

fn coarse(scheme: Scheme) -> FdConfig {
    FdConfig { nx_per_line: 401, dt: 1.0, scheme, output_interval: 50.0, output_dx: 2500.0, ..FdConfig::default() }
}

#[test]
fn pressure_never_rises_above_the_steady_state() {
    // A pure sink can only lower the field relative to the steady profile.
    let b = reference();
    let sol = fd_solve(&b.spec, &b.boundary, &b.scenario, &coarse(Scheme::CrankNicolson)).unwrap();
    for seg in SegmentId::ALL {
        for (ix, _, p) in sol.field.entries(seg) {
            let steady = steady_profile(&b.spec, &b.boundary, sol.field.x_grid()[ix]).unwrap();
            assert!(p <= steady + 1e-6 * steady, "{p} above {steady}");
        }
    }
}

#[test]
fn implicit_euler_and_crank_nicolson_agree() {
    let b = reference();
    let ie = fd_solve(&b.spec, &b.boundary, &b.scenario, &coarse(Scheme::ImplicitEuler)).unwrap();
    let cn = fd_solve(&b.spec, &b.boundary, &b.scenario, &coarse(Scheme::CrankNicolson)).unwrap();
    let report = compare_fields(&ie.field, &cn.field).unwrap();
    assert!(report.max_rel < 0.01, "{report:?}");
}

#[test]
fn flux_jump_at_the_leak_matches_the_outflow() {
    let b = reference();
    let sol = fd_solve(&b.spec, &b.boundary, &b.scenario, &FdConfig { t_end: 300.0, ..FdConfig::default() }).unwrap();
    for &(t, jump) in sol.leak_jump_trace.iter().filter(|(t, _)| *t >= 10.0) {
        let outflow = leak_rate(&b.spec, &b.boundary, &b.scenario, t).unwrap();
        assert!((jump - outflow).abs() <= 0.02 * outflow, "t={t}: {jump} vs {outflow}");
    }
}

#[test]
fn reconciled_field_matches_the_march() {
    let b = reference();
    let fd_cfg = FdConfig { nx_per_line: 1001, dt: 1.0, ..FdConfig::default() };
    let rec = reconcile(&b.spec, &b.boundary, &b.scenario, &fd_cfg, &b.series_cfg).unwrap();
    assert_eq!(rec.selected, AmplitudeVariant::FluxConsistent);
    assert!(rec.selected_report().max_rel < 0.05);
    // Every rejected variant is clearly worse.
    for r in rec.reports.iter().filter(|r| r.variant_tag != rec.selected.tag()) {
        assert!(r.max_rel > 10.0 * rec.selected_report().max_rel, "{r:?}");
    }
}

#[test]
fn leak_on_a_junction_is_rejected() {
    let b = reference();
    let scenario = b.scenario.with_location(&b.spec, 10.0).unwrap();
    let err = fd_solve(&b.spec, &b.boundary, &scenario, &coarse(Scheme::CrankNicolson)).unwrap_err();
    assert!(matches!(err, Error::GridMismatch(_)), "{err}");
}
