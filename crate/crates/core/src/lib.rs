//! Transient pressure in a pair of parallel gas lines with a leak: closed-form
//! solution, a finite-difference oracle, leak-model calibration from inlet
//! pressure records, and leak localization.
//!
//! ```
//! use pipeleak::{pressure_at, FlowBoundary, LeakScenario, PipelineSpec, SegmentId, SeriesConfig};
//!
//! let spec = PipelineSpec::reference();
//! let boundary = FlowBoundary::new(&spec, 5.5e5, 30.0, 1.5)?;
//! let leak = LeakScenario::new(&spec, 25e3, 0.802, 1.03e-4)?;
//! let p = pressure_at(&spec, &boundary, &leak, &SeriesConfig::default(), SegmentId::Intact, 0.0, 300.0)?;
//! assert!(p < 5.5e5);
//! # Ok::<(), pipeleak::Error>(())
//! ```

pub mod analytic;
pub mod calibration;
pub mod error;
pub mod fd;
pub mod field;
pub mod io;
pub mod localization;
pub mod model;
mod tridiag;

pub use analytic::{
    amplitude, flux_from_pressure, inlet_pressure, mean_decay, pressure_at, pressure_field, series_kernel,
    truncation_bound, AmplitudeVariant, SegmentId, SeriesConfig,
};
pub use calibration::{
    calibrate_k, fit_beta, fit_beta_unguarded, inlet_model, leak_rate, leak_rate_at_onset, BetaFit, BetaMethod, KMode, PressureSeries,
};
pub use error::{Error, Result};
pub use fd::{
    compare_fields, fd_solve, pde_residual, reconcile, DiscrepancyReport, FdConfig, FdSolution, Reconciliation,
    Scheme, WorstPoint,
};
pub use field::{Quantity, ScalarField};
pub use io::{
    load_config, parse_config, read_series, read_series_path, synth_series, write_plot_data, write_profile_table,
    write_series, NoiseSpec, PlotSeries, Sampling, ScenarioBundle, SeriesSource,
};
pub use localization::{
    lhs_series, lhs_terms, localize, normalize_curve, rhs_curve, LocalizationResult, Scaling, SearchConfig, Target,
    WindowPolicy,
};
pub use model::{
    alpha_eigenrate, chernov_coefficient, split_gradient, steady_profile, wave_delay, FlowBoundary, FrictionInputs,
    LeakScenario, PipelineSpec, STANDARD_GRAVITY,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/closed-form.md")]
    mod closed_form {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/calibration.md")]
    mod calibration {}
    #[doc = include_str!("../../../book/src/localization.md")]
    mod localization {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
