//! Leak-rate model and its calibration from system constants and inlet data.
//!
//! The leak outflow decays exponentially, `G(t) = G(0)·e^{-βt}`. The amplitude
//! is pinned by the coefficient `K`, chosen at commissioning so that `G(0)`
//! equals the known base flux `G₀`; the decay rate `β` comes from a
//! least-squares fit of the inlet pressure to `P₁·e^{-βt}`.

use crate::error::{Error, Result};
use crate::model::{FlowBoundary, LeakScenario, PipelineSpec};

/// Convention used to compute (and later interpret) the leak coefficient `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum KMode {
    /// `K = 2a·c²·G₀/P₁`; the leak amplitude is `K·P₁/(2a·c²)`.
    #[default]
    PaperNumeric,
    /// `K = 2a·c²·G₀/(g·P₁)`; the leak amplitude is `K·g·P₁/(2a·c²)`.
    FormulaWithG,
}

impl KMode {
    pub fn tag(self) -> &'static str {
        match self {
            KMode::PaperNumeric => "paper-numeric",
            KMode::FormulaWithG => "formula-with-g",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "paper-numeric" | "paper_numeric" => Some(KMode::PaperNumeric),
            "formula-with-g" | "formula_with_g" => Some(KMode::FormulaWithG),
            _ => None,
        }
    }

    fn gravity_factor(self, spec: &PipelineSpec) -> f64 {
        match self {
            KMode::PaperNumeric => 1.0,
            KMode::FormulaWithG => spec.gravity(),
        }
    }
}

/// Calibrates `K` so that the modelled leak rate starts at `G₀`.
pub fn calibrate_k(spec: &PipelineSpec, boundary: &FlowBoundary, mode: KMode) -> Result<f64> {
    let p1 = boundary.inlet_pressure();
    if !(p1 > 0.0) {
        return Err(Error::InvalidBoundary(format!("inlet pressure must be positive, got {p1}")));
    }
    let c = spec.sound_speed();
    Ok(spec.lin_coeff_2a() * c * c * boundary.base_mass_flux() / (mode.gravity_factor(spec) * p1))
}

/// Initial leak outflow `G(0)` implied by `K` under the scenario's calibration mode, Pa·s/m.
pub fn leak_rate_at_onset(spec: &PipelineSpec, boundary: &FlowBoundary, scenario: &LeakScenario) -> f64 {
    let c = spec.sound_speed();
    scenario.coeff_k() * scenario.k_mode().gravity_factor(spec) * boundary.inlet_pressure()
        / (spec.lin_coeff_2a() * c * c)
}

/// Leak outflow `G(t)`, Pa·s/m.
pub fn leak_rate(spec: &PipelineSpec, boundary: &FlowBoundary, scenario: &LeakScenario, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(leak_rate_at_onset(spec, boundary, scenario) * (-scenario.decay_beta() * t).exp())
}

/// Exponential inlet-pressure model `P₁·e^{-βt}`.
pub fn inlet_model(p1: f64, beta: f64, t: f64) -> f64 {
    p1 * (-beta * t).exp()
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidTime(t));
    }
    Ok(())
}

/// Time-ordered pressure samples `(t [s], p [Pa])`.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureSeries {
    samples: Vec<(f64, f64)>,
}

impl PressureSeries {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (i, &(t, p)) in samples.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::InvalidSample { index: i, msg: format!("time {t} is not finite") });
            }
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::InvalidSample { index: i, msg: format!("pressure {p} must be positive") });
            }
            if i > 0 && t <= samples[i - 1].0 {
                return Err(Error::InvalidSample {
                    index: i,
                    msg: format!("time {t} does not increase past {}", samples[i - 1].0),
                });
            }
        }
        Ok(PressureSeries { samples })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> (f64, f64) {
        self.samples[0]
    }

    pub fn last(&self) -> (f64, f64) {
        self.samples[self.samples.len() - 1]
    }

    /// Linear interpolation; `None` outside the sampled span.
    pub fn interpolate(&self, t: f64) -> Option<f64> {
        let (t0, _) = self.first();
        let (t1, p1) = self.last();
        if !(t >= t0 && t <= t1) {
            return None;
        }
        if t == t1 {
            return Some(p1);
        }
        let i = self.samples.partition_point(|&(ts, _)| ts <= t);
        let (ta, pa) = self.samples[i - 1];
        let (tb, pb) = self.samples[i];
        Some(pa + (pb - pa) * (t - ta) / (tb - ta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum BetaMethod {
    /// Slope of `ln(p/P₁)` against `t` through the origin.
    #[default]
    LogLinearThroughOrigin,
    /// Minimizes `Σ (pᵢ − P₁e^{-βtᵢ})²` directly.
    NonlinearLS,
}

impl BetaMethod {
    pub fn tag(self) -> &'static str {
        match self {
            BetaMethod::LogLinearThroughOrigin => "log-linear",
            BetaMethod::NonlinearLS => "nonlinear",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "log-linear" | "loglinear" | "log_linear" => Some(BetaMethod::LogLinearThroughOrigin),
            "nonlinear" | "nls" | "nonlinear-ls" => Some(BetaMethod::NonlinearLS),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaFit {
    pub beta: f64,
    pub method: BetaMethod,
    /// RMS of `pᵢ − P₁e^{-βtᵢ}` over all samples, Pa.
    pub rms_residual: f64,
    pub sample_count: usize,
}

/// Relative slack allowed above `P₁` before data counts as non-decaying.
pub const DECAY_SLACK: f64 = 1e-6;

/// Fits the decay rate of `P₁·e^{-βt}` to `series`.
pub fn fit_beta(series: &PressureSeries, p1: f64, method: BetaMethod) -> Result<BetaFit> {
    let samples = series.samples();
    if samples.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 samples, got {}", samples.len())));
    }
    if !(p1.is_finite() && p1 > 0.0) {
        return Err(Error::InvalidBoundary(format!("reference pressure must be positive, got {p1}")));
    }
    if let Some(&(t, p)) = samples.iter().find(|&&(_, p)| p > p1 * (1.0 + DECAY_SLACK)) {
        return Err(Error::NonDecayingData { t, p });
    }
    fit_beta_unguarded(series, p1, method)
}

/// [`fit_beta`] without the decaying-data guard. Noisy records sit above `P₁`
/// by the noise amplitude right after onset, which is harmless for the fit.
pub fn fit_beta_unguarded(series: &PressureSeries, p1: f64, method: BetaMethod) -> Result<BetaFit> {
    let samples = series.samples();
    if samples.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 samples, got {}", samples.len())));
    }
    if !(p1.is_finite() && p1 > 0.0) {
        return Err(Error::InvalidBoundary(format!("reference pressure must be positive, got {p1}")));
    }
    if samples.iter().all(|&(t, _)| t == 0.0) {
        return Err(Error::DegenerateTimes);
    }

    let log_linear = log_linear_slope(samples, p1)?;
    let beta = match method {
        BetaMethod::LogLinearThroughOrigin => log_linear,
        BetaMethod::NonlinearLS => nonlinear_beta(samples, p1, log_linear),
    };
    let sse: f64 = samples.iter().map(|&(t, p)| (p - inlet_model(p1, beta, t)).powi(2)).sum();
    Ok(BetaFit {
        beta,
        method,
        rms_residual: (sse / samples.len() as f64).sqrt(),
        sample_count: samples.len(),
    })
}

fn log_linear_slope(samples: &[(f64, f64)], p1: f64) -> Result<f64> {
    let (num, den) = samples
        .iter()
        .filter(|&&(t, _)| t > 0.0)
        .fold((0.0, 0.0), |(num, den), &(t, p)| (num - t * (p / p1).ln(), den + t * t));
    if den == 0.0 {
        return Err(Error::DegenerateTimes);
    }
    Ok((num / den).max(0.0))
}

/// Root of the least-squares gradient by safeguarded Newton iteration.
fn nonlinear_beta(samples: &[(f64, f64)], p1: f64, guess: f64) -> f64 {
    // Half-gradient of the SSE and its derivative in beta.
    let grad = |beta: f64| -> (f64, f64) {
        samples.iter().fold((0.0, 0.0), |(g, h), &(t, p)| {
            let e = (-beta * t).exp();
            let r = p - p1 * e;
            let dr = p1 * t * e;
            (g + r * dr, h + dr * dr - r * p1 * t * t * e)
        })
    };

    let (g0, _) = grad(0.0);
    if g0 >= 0.0 {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = guess.max(1e-12);
    let mut expansions = 0;
    while grad(hi).0 < 0.0 {
        lo = hi;
        hi *= 4.0;
        expansions += 1;
        if expansions > 200 {
            return hi;
        }
    }

    let mut beta = guess.clamp(lo, hi);
    for _ in 0..200 {
        let (g, h) = grad(beta);
        if g == 0.0 {
            return beta;
        }
        if g < 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        let newton = beta - g / h;
        let next = if h > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - beta).abs() <= 1e-15 * next.abs() || hi - lo <= 1e-15 * hi {
            return next;
        }
        beta = next;
    }
    beta
}
