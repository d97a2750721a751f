//! Closed-form transient pressure in the three pipeline segments after a leak opens.
//!
//! The parallel pair behaves as one ring of circumference `2L`: the intact line
//! runs from inlet to outlet and the damaged line runs back. A decaying point
//! sink on that ring gives, per segment,
//!
//! ```text
//! P(x,t) = P₁ − s₀·x − A·[ (1 − e^{-βt})/β + 2·Σₙ (−1)ⁿ·C·cos(πn·arg/L)·kₙ(t) ]
//! kₙ(t)  = (e^{-βt} − e^{-αn²t}) / (αn² − β)
//! ```
//!
//! with `arg = L−ℓ−x`, `L−ℓ+x`, `L+ℓ−x` for the intact line and the damaged
//! line up- and downstream of the leak.

use std::f64::consts::PI;

use crate::calibration::{check_time, leak_rate_at_onset};
use crate::error::{Error, Result};
use crate::field::{check_grid, slope3, Quantity, ScalarField};
use crate::model::{alpha_eigenrate, check_in_line, FlowBoundary, LeakScenario, PipelineSpec};

/// The three solution branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SegmentId {
    /// The undamaged line, `x ∈ [0, L]`.
    Intact,
    /// The damaged line between inlet and leak, `x ∈ [0, ℓ]`.
    UpstreamOfLeak,
    /// The damaged line between leak and outlet, `x ∈ [ℓ, L]`.
    DownstreamOfLeak,
}

impl SegmentId {
    pub const ALL: [SegmentId; 3] = [SegmentId::Intact, SegmentId::UpstreamOfLeak, SegmentId::DownstreamOfLeak];

    pub fn index(self) -> usize {
        self as usize
    }

    /// 1, 2 or 3, as segments are numbered in tables.
    pub fn number(self) -> usize {
        self as usize + 1
    }

    pub fn domain(self, length: f64, leak_at: f64) -> (f64, f64) {
        match self {
            SegmentId::Intact => (0.0, length),
            SegmentId::UpstreamOfLeak => (0.0, leak_at),
            SegmentId::DownstreamOfLeak => (leak_at, length),
        }
    }

    /// Argument of the cosine terms, in metres.
    fn cosine_argument(self, length: f64, leak_at: f64, x: f64) -> f64 {
        match self {
            SegmentId::Intact => length - leak_at - x,
            SegmentId::UpstreamOfLeak => length - leak_at + x,
            SegmentId::DownstreamOfLeak => length + leak_at - x,
        }
    }
}

/// How the leak amplitude `A` in front of the bracket is computed.
///
/// The transcribed coefficient `K·g·P₁/(4aL)` and the amplitude that actually
/// balances the leak flux differ by the factor `g` under the default
/// calibration; the `HalfUpstream` forms also halve the amplitude on the
/// upstream branch. The oracle picks between them (see [`crate::fd::reconcile`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum AmplitudeVariant {
    /// `K·g·P₁/(2·2a·L)` on every segment.
    Transcribed,
    /// `c²·G(0)/(2L)`, where `G(0)` is the calibrated initial leak outflow.
    #[default]
    FluxConsistent,
    TranscribedHalfUpstream,
    FluxConsistentHalfUpstream,
}

impl AmplitudeVariant {
    pub const ALL: [AmplitudeVariant; 4] = [
        AmplitudeVariant::Transcribed,
        AmplitudeVariant::FluxConsistent,
        AmplitudeVariant::TranscribedHalfUpstream,
        AmplitudeVariant::FluxConsistentHalfUpstream,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            AmplitudeVariant::Transcribed => "transcribed",
            AmplitudeVariant::FluxConsistent => "flux-consistent",
            AmplitudeVariant::TranscribedHalfUpstream => "transcribed-half-upstream",
            AmplitudeVariant::FluxConsistentHalfUpstream => "flux-consistent-half-upstream",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        AmplitudeVariant::ALL.into_iter().find(|v| v.tag() == tag)
    }
}

/// Truncation and coefficient settings of the cosine series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesConfig {
    pub n_terms: usize,
    /// Multiplier on every cosine term; 1 unless a study says otherwise.
    pub c_const: f64,
    /// Relative gap between `αn²` and `β` below which the kernel switches to its limit.
    pub degeneracy_tol: f64,
    pub amplitude: AmplitudeVariant,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig { n_terms: 20, c_const: 1.0, degeneracy_tol: 1e-10, amplitude: AmplitudeVariant::default() }
    }
}

impl SeriesConfig {
    pub fn with_terms(mut self, n_terms: usize) -> Self {
        self.n_terms = n_terms;
        self
    }

    pub fn with_amplitude(mut self, amplitude: AmplitudeVariant) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_terms == 0 {
            return Err(Error::InvalidScenario("series needs at least one term".into()));
        }
        if !self.c_const.is_finite() {
            return Err(Error::InvalidScenario(format!("series constant {} is not finite", self.c_const)));
        }
        if !(self.degeneracy_tol.is_finite() && self.degeneracy_tol > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "degeneracy tolerance must be positive, got {}",
                self.degeneracy_tol
            )));
        }
        Ok(())
    }
}

/// `(e^{-βt} − e^{-rt})/(r − β)`, switching to the limit `t·e^{-βt}` when
/// `r` and `β` coincide within `tol` (relative).
pub fn series_kernel(rate_n: f64, beta: f64, t: f64, tol: f64) -> f64 {
    let gap = rate_n - beta;
    if gap.abs() > tol * rate_n.abs().max(beta.abs()) {
        // e^{-βt}·(1 − e^{-(r−β)t})/(r−β), free of cancellation for small gaps.
        (-beta * t).exp() * -(-gap * t).exp_m1() / gap
    } else {
        t * (-beta * t).exp()
    }
}

/// `(1 − e^{-βt})/β`, equal to `t` at `β = 0`.
pub fn mean_decay(beta: f64, t: f64) -> f64 {
    if beta == 0.0 {
        t
    } else {
        -(-beta * t).exp_m1() / beta
    }
}

/// Leak amplitude `A` in front of the bracket on segment `seg`, Pa/s.
pub fn amplitude(
    spec: &PipelineSpec,
    boundary: &FlowBoundary,
    scenario: &LeakScenario,
    variant: AmplitudeVariant,
    seg: SegmentId,
) -> f64 {
    let transcribed = || {
        scenario.coeff_k() * spec.gravity() * boundary.inlet_pressure() / (2.0 * spec.lin_coeff_2a() * spec.length())
    };
    let flux = || {
        let c = spec.sound_speed();
        c * c * leak_rate_at_onset(spec, boundary, scenario) / (2.0 * spec.length())
    };
    let half = if seg == SegmentId::UpstreamOfLeak { 0.5 } else { 1.0 };
    match variant {
        AmplitudeVariant::Transcribed => transcribed(),
        AmplitudeVariant::FluxConsistent => flux(),
        AmplitudeVariant::TranscribedHalfUpstream => half * transcribed(),
        AmplitudeVariant::FluxConsistentHalfUpstream => half * flux(),
    }
}

/// The truncated cosine sum `Σₙ (−1)ⁿ·C·cos(πn·arg/L)·kₙ(t)`.
fn cosine_sum(spec: &PipelineSpec, beta: f64, cfg: &SeriesConfig, arg: f64, t: f64) -> f64 {
    let alpha = alpha_eigenrate(spec);
    let theta = PI * arg / spec.length();
    let mut sum = 0.0;
    for n in 1..=cfg.n_terms {
        let nf = n as f64;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * (nf * theta).cos() * series_kernel(alpha * nf * nf, beta, t, cfg.degeneracy_tol);
    }
    cfg.c_const * sum
}

/// Pressure on segment `seg` at `(x, t)`, Pa.
pub fn pressure_at(
    spec: &PipelineSpec,
    boundary: &FlowBoundary,
    scenario: &LeakScenario,
    cfg: &SeriesConfig,
    seg: SegmentId,
    x: f64,
    t: f64,
) -> Result<f64> {
    cfg.validate()?;
    check_time(t)?;
    let (lo, hi) = seg.domain(spec.length(), scenario.location());
    if !(x.is_finite() && x >= lo && x <= hi) {
        return Err(Error::OutOfDomain { x, lo, hi });
    }
    Ok(pressure_unchecked(spec, boundary, scenario, cfg, seg, x, t))
}

fn pressure_unchecked(
    spec: &PipelineSpec,
    boundary: &FlowBoundary,
    scenario: &LeakScenario,
    cfg: &SeriesConfig,
    seg: SegmentId,
    x: f64,
    t: f64,
) -> f64 {
    let beta = scenario.decay_beta();
    let amp = amplitude(spec, boundary, scenario, cfg.amplitude, seg);
    let arg = seg.cosine_argument(spec.length(), scenario.location(), x);
    let steady = boundary.inlet_pressure() - boundary.steady_gradient() * x;
    if amp == 0.0 {
        return steady;
    }
    steady - amp * (mean_decay(beta, t) + 2.0 * cosine_sum(spec, beta, cfg, arg, t))
}

/// Inlet pressure as seen from the damaged line, `P₂(0, t)`.
pub fn inlet_pressure(
    spec: &PipelineSpec,
    boundary: &FlowBoundary,
    scenario: &LeakScenario,
    cfg: &SeriesConfig,
    t: f64,
) -> Result<f64> {
    pressure_at(spec, boundary, scenario, cfg, SegmentId::UpstreamOfLeak, 0.0, t)
}

/// Evaluates every segment on the grid. Nodes outside a segment's domain are absent.
pub fn pressure_field(
    spec: &PipelineSpec,
    boundary: &FlowBoundary,
    scenario: &LeakScenario,
    cfg: &SeriesConfig,
    x_grid: &[f64],
    t_grid: &[f64],
) -> Result<ScalarField> {
    cfg.validate()?;
    check_grid("x", x_grid)?;
    check_grid("t", t_grid)?;
    check_in_line(spec, x_grid[0])?;
    check_in_line(spec, x_grid[x_grid.len() - 1])?;
    check_time(t_grid[0])?;
    let domains = SegmentId::ALL.map(|s| s.domain(spec.length(), scenario.location()));
    ScalarField::from_fn(Quantity::Pressure, x_grid.to_vec(), t_grid.to_vec(), domains, |seg, x, t| {
        Ok(pressure_unchecked(spec, boundary, scenario, cfg, seg, x, t))
    })
}

/// Mass flux `G = −(∂P/∂x)/(2a)` from a pressure field, differentiated per
/// segment with three-point stencils (one-sided at segment ends).
pub fn flux_from_pressure(field: &ScalarField, spec: &PipelineSpec) -> Result<ScalarField> {
    if field.quantity() != Quantity::Pressure {
        return Err(Error::GridMismatch("flux needs a pressure field".into()));
    }
    let xs = field.x_grid();
    let nt = field.t_grid().len();
    let two_a = spec.lin_coeff_2a();
    let mut out: [Vec<f64>; 3] = Default::default();
    for seg in SegmentId::ALL {
        let range = field.x_range(seg);
        let n = range.len();
        if n < 3 {
            return Err(Error::InsufficientGrid(format!(
                "segment {} has {n} x-points, flux needs at least 3",
                seg.number()
            )));
        }
        let mut values = Vec::with_capacity(n * nt);
        for i in 0..n {
            // Stencil start and the position of the evaluation point inside it.
            let (s, at) = match i {
                0 => (0, 0),
                _ if i == n - 1 => (n - 3, 2),
                _ => (i - 1, 1),
            };
            let ix = range.start + s;
            let sx = [xs[ix], xs[ix + 1], xs[ix + 2]];
            for it in 0..nt {
                let p = |k: usize| field.get(seg, ix + k, it).expect("inside segment");
                values.push(-slope3(sx, [p(0), p(1), p(2)], at) / two_a);
            }
        }
        out[seg.index()] = values;
    }
    field.with_values(Quantity::MassFlux, out)
}

/// Upper bound on the series tail beyond `n_terms`, Pa: `Σ_{n>N} 2A|C|/(αn² − β)`.
/// Infinite when `β` is not below `α(N+1)²`.
pub fn truncation_bound(
    spec: &PipelineSpec,
    boundary: &FlowBoundary,
    scenario: &LeakScenario,
    cfg: &SeriesConfig,
) -> f64 {
    let alpha = alpha_eigenrate(spec);
    let beta = scenario.decay_beta();
    let n = cfg.n_terms as f64;
    let next = alpha * (n + 1.0) * (n + 1.0);
    if beta >= next {
        return f64::INFINITY;
    }
    let amp = SegmentId::ALL
        .iter()
        .map(|&s| amplitude(spec, boundary, scenario, cfg.amplitude, s))
        .fold(0.0, f64::max);
    2.0 * amp * cfg.c_const.abs() / (alpha * n * (1.0 - beta / next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::{calibrate_k, leak_rate, KMode};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sec6() -> (PipelineSpec, FlowBoundary, LeakScenario) {
        let spec = PipelineSpec::reference();
        let b = FlowBoundary::new(&spec, 5.5e5, 30.0, 1.5).unwrap();
        let s = LeakScenario::new(&spec, 25e3, 0.802, 1.03e-4).unwrap();
        (spec, b, s)
    }

    #[test]
    fn kernel_limits() {
        let b = 2e-3;
        assert_eq!(series_kernel(b, b, 100.0, 1e-10), 100.0 * (-b * 100.0).exp());
        assert_eq!(series_kernel(5e-3, 1e-4, 0.0, 1e-10), 0.0);
        let limit = 100.0 * (-b * 100.0f64).exp();
        for r in [b * (1.0 + 1e-12), b * (1.0 - 1e-12)] {
            // Force the general branch right next to the switch.
            let general = series_kernel(r, b, 100.0, 1e-15);
            assert!(((general - limit) / limit).abs() < 1e-9, "{general} vs {limit}");
        }
    }

    #[test]
    fn mean_decay_limit() {
        assert_eq!(mean_decay(0.0, 120.0), 120.0);
        assert_relative_eq!(mean_decay(1e-300, 120.0), 120.0, max_relative = 1e-12);
        assert_relative_eq!(mean_decay(1e-3, 1000.0), (1.0 - (-1.0f64).exp()) / 1e-3, max_relative = 1e-14);
    }

    #[test]
    fn amplitudes_of_the_reference_scenario() {
        let (spec, b, s) = sec6();
        let a = |v| amplitude(&spec, &b, &s, v, SegmentId::Intact);
        assert!((a(AmplitudeVariant::Transcribed) - 216.36).abs() < 0.01);
        assert!((a(AmplitudeVariant::FluxConsistent) - 22.055).abs() < 0.001);
        assert_relative_eq!(
            amplitude(&spec, &b, &s, AmplitudeVariant::TranscribedHalfUpstream, SegmentId::UpstreamOfLeak),
            0.5 * a(AmplitudeVariant::Transcribed)
        );
        // With exact calibration the flux-consistent amplitude is c²G₀/(2L).
        let k = calibrate_k(&spec, &b, KMode::PaperNumeric).unwrap();
        let exact = s.with_k(&spec, k).unwrap();
        assert_relative_eq!(
            amplitude(&spec, &b, &exact, AmplitudeVariant::FluxConsistent, SegmentId::Intact),
            383.3 * 383.3 * 30.0 / 2e5,
            max_relative = 1e-14
        );
    }

    #[test]
    fn transcribed_amplitude_reproduces_tabulated_inlet_value() {
        let (spec, b, s) = sec6();
        let cfg = SeriesConfig::default().with_amplitude(AmplitudeVariant::Transcribed);
        let p = pressure_at(&spec, &b, &s, &cfg, SegmentId::Intact, 0.0, 300.0).unwrap();
        assert!((p - 45.39e4).abs() < 0.01e4, "{p}");
        let p = pressure_at(&spec, &b, &s, &cfg, SegmentId::DownstreamOfLeak, 1e5, 600.0).unwrap();
        assert!((p - 38.18e4).abs() < 0.01e4, "{p}");
    }

    #[test]
    fn initial_state_is_steady() {
        let (spec, b, s) = sec6();
        let cfg = SeriesConfig::default();
        for seg in SegmentId::ALL {
            let (lo, hi) = seg.domain(spec.length(), s.location());
            for x in [lo, 0.5 * (lo + hi), hi] {
                assert_eq!(pressure_at(&spec, &b, &s, &cfg, seg, x, 0.0).unwrap(), 5.5e5 - 1.5 * x);
            }
        }
    }

    #[test]
    fn domain_and_time_errors() {
        let (spec, b, s) = sec6();
        let cfg = SeriesConfig::default();
        assert!(matches!(
            pressure_at(&spec, &b, &s, &cfg, SegmentId::UpstreamOfLeak, 30e3, 1.0),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(matches!(
            pressure_at(&spec, &b, &s, &cfg, SegmentId::DownstreamOfLeak, 20e3, 1.0),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(matches!(pressure_at(&spec, &b, &s, &cfg, SegmentId::Intact, 0.0, -1.0), Err(Error::InvalidTime(_))));
        assert!(pressure_at(&spec, &b, &s, &cfg.with_terms(0), SegmentId::Intact, 0.0, 1.0).is_err());
        assert!(matches!(pressure_field(&spec, &b, &s, &cfg, &[], &[1.0]), Err(Error::EmptyGrid)));
    }

    #[test]
    fn table_grid_layout() {
        let (spec, b, s) = sec6();
        let xs: Vec<f64> = (0..=20).map(|i| 5e3 * i as f64).collect();
        let f = pressure_field(&spec, &b, &s, &SeriesConfig::default(), &xs, &[100.0, 300.0, 600.0]).unwrap();
        assert_eq!(f.x_range(SegmentId::UpstreamOfLeak), 0..6);
        assert_eq!(f.x_range(SegmentId::DownstreamOfLeak), 5..21);
        assert!(f.get(SegmentId::UpstreamOfLeak, 6, 0).is_none());
        let one = pressure_field(&spec, &b, &s, &SeriesConfig::default(), &[40e3], &[300.0]).unwrap();
        assert_eq!(
            one.get(SegmentId::Intact, 0, 0).unwrap(),
            pressure_at(&spec, &b, &s, &SeriesConfig::default(), SegmentId::Intact, 40e3, 300.0).unwrap()
        );
    }

    #[test]
    fn zero_leak_field_is_steady_and_flux_uniform() {
        let (spec, b, s) = sec6();
        let dry = s.with_k(&spec, 0.0).unwrap();
        let xs: Vec<f64> = (0..=20).map(|i| 5e3 * i as f64).collect();
        let ts = [0.0, 100.0, 600.0];
        let f = pressure_field(&spec, &b, &dry, &SeriesConfig::default(), &xs, &ts).unwrap();
        for seg in SegmentId::ALL {
            for (ix, _, v) in f.entries(seg) {
                assert_eq!(v, 5.5e5 - 1.5 * xs[ix]);
            }
        }
        let g = flux_from_pressure(&f, &spec).unwrap();
        for seg in SegmentId::ALL {
            for (_, _, v) in g.entries(seg) {
                assert_relative_eq!(v, 15.0, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn flux_jump_at_leak_matches_leak_rate() {
        let (spec, b, s) = sec6();
        let ell = s.location();
        let h = 100.0;
        let xs: Vec<f64> = (-3..=3).map(|i| ell + h * i as f64).collect();
        let cfg = SeriesConfig::default().with_terms(20_000);
        for t in [300.0, 600.0] {
            let f = pressure_field(&spec, &b, &s, &cfg, &xs, &[t]).unwrap();
            let g = flux_from_pressure(&f, &spec).unwrap();
            let up = g.value_at(SegmentId::UpstreamOfLeak, ell, t).unwrap();
            let down = g.value_at(SegmentId::DownstreamOfLeak, ell, t).unwrap();
            let want = leak_rate(&spec, &b, &s, t).unwrap();
            assert!(((up - down) - want).abs() < 0.1 * want, "t={t}: jump {} vs {want}", up - down);
        }
    }

    #[test]
    fn truncation_bound_covers_refinement() {
        let (spec, b, s) = sec6();
        let cfg = SeriesConfig::default();
        let bound = truncation_bound(&spec, &b, &s, &cfg);
        for t in [100.0, 300.0, 600.0] {
            let p20 = pressure_at(&spec, &b, &s, &cfg, SegmentId::Intact, 0.0, t).unwrap();
            let p40 = pressure_at(&spec, &b, &s, &cfg.with_terms(40), SegmentId::Intact, 0.0, t).unwrap();
            assert!((p40 - p20).abs() <= bound, "{} > {bound}", (p40 - p20).abs());
        }
    }

    fn scenario_strategy() -> impl Strategy<Value = (PipelineSpec, FlowBoundary, LeakScenario, f64)> {
        (
            1e4..2e5f64,
            200.0..450.0f64,
            0.02..0.3f64,
            0.05..0.95f64,
            0.0..2.0f64,
            0.0..1e-3f64,
            0.0..2000.0f64,
        )
            .prop_map(|(l, c, two_a, frac, k, beta, t)| {
                let spec = PipelineSpec::new(l, c, two_a).unwrap();
                let b = FlowBoundary::new(&spec, 5.5e5, 30.0, 1.0e5 / l).unwrap();
                let s = LeakScenario::new(&spec, frac * l, k, beta).unwrap();
                (spec, b, s, t)
            })
    }

    proptest! {
        #[test]
        fn matching_conditions_hold((spec, b, s, t) in scenario_strategy()) {
            let cfg = SeriesConfig::default();
            let l = spec.length();
            let ell = s.location();
            let p = |seg, x| pressure_at(&spec, &b, &s, &cfg, seg, x, t).unwrap();
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
            prop_assert!(close(p(SegmentId::Intact, 0.0), p(SegmentId::UpstreamOfLeak, 0.0)));
            prop_assert!(close(p(SegmentId::Intact, l), p(SegmentId::DownstreamOfLeak, l)));
            prop_assert!(close(p(SegmentId::UpstreamOfLeak, ell), p(SegmentId::DownstreamOfLeak, ell)));
        }

        #[test]
        fn bracket_survives_vanishing_beta(t in 0.0..3000.0f64) {
            let (spec, b, s) = sec6();
            let s0 = s.with_beta(&spec, 0.0).unwrap();
            let p = pressure_at(&spec, &b, &s0, &SeriesConfig::default(), SegmentId::Intact, 1e4, t).unwrap();
            prop_assert!(p.is_finite());
        }
    }
}
