//! Leak localization from the inlet pressure record.
//!
//! At the inlet the closed form reduces to
//!
//! ```text
//! P₂(0,t) = P₁ − A·[ (1 − e^{-βt})/β + 2·S(ℓ,t) ],   S(ℓ,t) = Σₙ C·cos(πnℓ/L)·kₙ(t)
//! ```
//!
//! so every candidate `ℓ` predicts a curve `S(ℓ,·)`. The search compares that
//! curve with a target over a time window that starts no earlier than the
//! acoustic delay `ℓ/c`, and keeps the candidate with the smallest RMS mismatch.
//!
//! Two targets are available. [`Target::Measured`] isolates `S` from the
//! recorded series itself. [`Target::ClosedForm`] is the fixed right-hand side
//! `(2aL/(Kg))·[1 − (1 − e^{-βt})/(4β) − e^{-βt}]`, which depends on the data
//! only through `β`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::analytic::{amplitude, mean_decay, series_kernel, SegmentId, SeriesConfig};
use crate::calibration::{check_time, fit_beta_unguarded, BetaFit, BetaMethod, KMode, PressureSeries};
use crate::error::{Error, Result};
use crate::model::{alpha_eigenrate, FlowBoundary, LeakScenario, PipelineSpec};

/// The fixed window of the reference replication, s.
pub const PAPER_WINDOW: (f64, f64) = (65.0, 130.0);

/// Fitted decay rates below this count as "no leak", 1/s.
pub const DETECTION_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum WindowPolicy {
    /// `[65 s, 130 s]`, tuned to a leak near 25 km on the reference line.
    PaperFixed,
    /// `[τ(ℓ̂), 2τ(ℓ̂)]`, starting from `ℓ̂ = L/2` and re-centred twice.
    DelayScaled,
    /// From the acoustic delay to the last sample.
    #[default]
    DelayToEnd,
}

impl WindowPolicy {
    pub fn tag(self) -> &'static str {
        match self {
            WindowPolicy::PaperFixed => "paper-fixed",
            WindowPolicy::DelayScaled => "delay-scaled",
            WindowPolicy::DelayToEnd => "delay-to-end",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "paper-fixed" | "paper" => Some(WindowPolicy::PaperFixed),
            "delay-scaled" => Some(WindowPolicy::DelayScaled),
            "delay-to-end" => Some(WindowPolicy::DelayToEnd),
            _ => None,
        }
    }
}

/// What each candidate curve is matched against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum Target {
    /// `S` isolated from the recorded inlet pressure.
    #[default]
    Measured,
    /// The fixed right-hand side built from `β` alone.
    ClosedForm,
}

impl Target {
    pub fn tag(self) -> &'static str {
        match self {
            Target::Measured => "measured",
            Target::ClosedForm => "closed-form",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "measured" => Some(Target::Measured),
            "closed-form" => Some(Target::ClosedForm),
            _ => None,
        }
    }
}

/// How the two curves are brought to a common scale before differencing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum Scaling {
    /// Both curves divided by the target's peak magnitude over the policy window.
    #[default]
    Shared,
    /// Each curve divided by its own peak magnitude over the candidate's window.
    Independent,
}

impl Scaling {
    pub fn tag(self) -> &'static str {
        match self {
            Scaling::Shared => "shared",
            Scaling::Independent => "independent",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "shared" => Some(Scaling::Shared),
            "independent" => Some(Scaling::Independent),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    /// Candidate spacing, m.
    pub l_grid_step: f64,
    /// Golden-section refinement of the best candidate down to 100 m.
    pub refine: bool,
    pub window_policy: WindowPolicy,
    pub target: Target,
    pub scaling: Scaling,
    /// Calibration convention that produced `K`.
    pub k_mode: KMode,
    /// Use this decay rate instead of fitting one.
    pub beta_override: Option<f64>,
    pub beta_method: BetaMethod,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            l_grid_step: 1000.0,
            refine: true,
            window_policy: WindowPolicy::default(),
            target: Target::default(),
            scaling: Scaling::default(),
            k_mode: KMode::default(),
            beta_override: None,
            beta_method: BetaMethod::default(),
        }
    }
}

impl SearchConfig {
    /// Fixed window, fixed right-hand side, per-curve normalization and the
    /// published decay rate `1.03e-4 1/s`.
    pub fn paper_replication() -> Self {
        SearchConfig {
            window_policy: WindowPolicy::PaperFixed,
            target: Target::ClosedForm,
            scaling: Scaling::Independent,
            beta_override: Some(1.03e-4),
            ..SearchConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.l_grid_step.is_finite() && self.l_grid_step > 0.0) {
            return Err(Error::InvalidScenario(format!("candidate spacing must be positive, got {}", self.l_grid_step)));
        }
        if let Some(b) = self.beta_override {
            if !(b.is_finite() && b >= 0.0) {
                return Err(Error::InvalidScenario(format!("beta override must be non-negative, got {b}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    /// Estimated leak position, m.
    pub l_hat: f64,
    /// `(candidate ℓ, RMS mismatch)` on the search grid.
    pub objective_curve: Vec<(f64, f64)>,
    /// Window used for `l_hat` after delay gating, s.
    pub window: (f64, f64),
    /// First crossing of the two scaled curves inside the window.
    pub intersection_time: Option<f64>,
    pub beta_used: f64,
    /// The fit behind `beta_used`, unless it was overridden.
    pub beta_fit: Option<BetaFit>,
    /// `(t, scaled candidate curve, scaled target)` for `l_hat` over the window.
    pub curves: Vec<(f64, f64, f64)>,
}

/// The per-term contributions `C·cos(πnℓ/L)·kₙ(t)`, `n = 1..=N`.
pub fn lhs_terms(l: f64, t: f64, cfg: &SeriesConfig, spec: &PipelineSpec, beta: f64) -> Vec<f64> {
    let alpha = alpha_eigenrate(spec);
    let theta = PI * l / spec.length();
    (1..=cfg.n_terms)
        .map(|n| {
            let nf = n as f64;
            cfg.c_const * (nf * theta).cos() * series_kernel(alpha * nf * nf, beta, t, cfg.degeneracy_tol)
        })
        .collect()
}

/// `S(ℓ,t) = Σₙ C·cos(πnℓ/L)·kₙ(t)`.
pub fn lhs_series(l: f64, t: f64, cfg: &SeriesConfig, spec: &PipelineSpec, beta: f64) -> f64 {
    lhs_terms(l, t, cfg, spec, beta).iter().sum()
}

/// `(2aL/(Kg))·[1 − (1 − e^{-βt})/(4β) − e^{-βt}]`.
pub fn rhs_curve(t: f64, spec: &PipelineSpec, k: f64, beta: f64) -> Result<f64> {
    check_time(t)?;
    if k == 0.0 {
        return Err(Error::NoLeakModel);
    }
    let bracket = 1.0 - mean_decay(beta, t) / 4.0 - (-beta * t).exp();
    Ok(spec.lin_coeff_2a() * spec.length() / (k * spec.gravity()) * bracket)
}

/// Divides every value by the largest magnitude.
pub fn normalize_curve(samples: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    let peak = samples.iter().fold(0.0f64, |m, &(_, v)| m.max(v.abs()));
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::DegenerateCurve);
    }
    Ok(samples.iter().map(|&(t, v)| (t, v / peak)).collect())
}

/// Everything a candidate evaluation needs, precomputed on integer seconds.
struct Problem<'a> {
    spec: &'a PipelineSpec,
    cfg: &'a SeriesConfig,
    search: &'a SearchConfig,
    /// First tabulated second.
    t0: usize,
    /// `kernel[n-1][i]` at `t = t0 + i`.
    kernel: Vec<Vec<f64>>,
    /// Target at `t = t0 + i`.
    target: Vec<f64>,
    /// Peak |target| over the policy window, for shared scaling.
    shared_peak: f64,
}

impl Problem<'_> {
    fn t_end(&self) -> usize {
        self.t0 + self.target.len() - 1
    }

    /// Integer seconds of the window for candidate `l`, or `None` if too short.
    fn window_for(&self, l: f64, window: (f64, f64)) -> Option<(usize, usize)> {
        let tau = l / self.spec.sound_speed();
        let lo = window.0.max(tau).ceil().max(self.t0 as f64) as usize;
        let hi = (window.1.floor() as usize).min(self.t_end());
        (hi > lo).then_some((lo, hi))
    }

    fn candidate(&self, l: f64, lo: usize, hi: usize) -> Vec<f64> {
        let theta = PI * l / self.spec.length();
        let weights: Vec<f64> = (1..=self.cfg.n_terms).map(|n| self.cfg.c_const * (n as f64 * theta).cos()).collect();
        (lo..=hi)
            .map(|t| {
                let i = t - self.t0;
                weights.iter().zip(&self.kernel).map(|(w, k)| w * k[i]).sum()
            })
            .collect()
    }

    /// Scaled candidate and target curves over `[lo, hi]`.
    fn scaled(&self, l: f64, lo: usize, hi: usize) -> Option<(Vec<f64>, Vec<f64>)> {
        let cand = self.candidate(l, lo, hi);
        let targ = &self.target[lo - self.t0..=hi - self.t0];
        let peak = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let (pc, pt) = match self.search.scaling {
            Scaling::Shared => (self.shared_peak, self.shared_peak),
            Scaling::Independent => (peak(&cand), peak(targ)),
        };
        if !(pc > 0.0 && pt > 0.0) {
            return None;
        }
        Some((cand.iter().map(|v| v / pc).collect(), targ.iter().map(|v| v / pt).collect()))
    }

    fn mismatch(&self, l: f64, window: (f64, f64)) -> Option<f64> {
        let (lo, hi) = self.window_for(l, window)?;
        let (a, b) = self.scaled(l, lo, hi)?;
        let sse: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        Some((sse / a.len() as f64).sqrt())
    }

    fn grid_search(&self, candidates: &[f64], window: (f64, f64)) -> Result<(f64, f64, Vec<(f64, f64)>)> {
        let scores: Vec<Option<f64>> = candidates.par_iter().map(|&l| self.mismatch(l, window)).collect();
        let curve: Vec<(f64, f64)> =
            candidates.iter().zip(&scores).filter_map(|(&l, s)| s.map(|s| (l, s))).collect();
        // Strict comparison keeps the smallest ℓ on ties.
        let best = curve.iter().copied().fold(None, |best: Option<(f64, f64)>, (l, s)| match best {
            Some((_, bs)) if bs <= s => best,
            _ => Some((l, s)),
        });
        let (l, s) = best.ok_or(Error::WindowEmpty)?;
        Ok((l, s, curve))
    }

    fn refine(&self, l: f64, score: f64, window: (f64, f64)) -> f64 {
        let step = self.search.l_grid_step;
        let length = self.spec.length();
        let mut a = (l - step).max(1e-3 * step);
        let mut b = (l + step).min(length - 1e-3 * step);
        let f = |x: f64| self.mismatch(x, window).unwrap_or(f64::INFINITY);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        while b - a > 100.0 {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = f(d);
            }
        }
        let x = 0.5 * (a + b);
        if f(x) <= score {
            x
        } else {
            l
        }
    }
}

/// Estimates the leak position from an inlet pressure record.
pub fn localize(
    series: &PressureSeries,
    spec: &PipelineSpec,
    boundary: &FlowBoundary,
    k: f64,
    search: &SearchConfig,
    cfg: &SeriesConfig,
) -> Result<LocalizationResult> {
    search.validate()?;
    cfg.validate()?;
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::NoLeakModel);
    }
    let p1 = boundary.inlet_pressure();
    let (beta, beta_fit) = match search.beta_override {
        Some(b) => (b, None),
        None => {
            let fit = fit_beta_unguarded(series, p1, search.beta_method)?;
            (fit.beta, Some(fit))
        }
    };
    if beta < DETECTION_FLOOR {
        return Err(Error::NoLeakDetected { beta });
    }

    let (t_first, _) = series.first();
    let (t_last, _) = series.last();
    let t0 = t_first.max(0.0).ceil() as usize;
    let t_end = t_last.floor() as usize;
    if t_end < t0 + 1 {
        return Err(Error::WindowEmpty);
    }

    let alpha = alpha_eigenrate(spec);
    let times: Vec<f64> = (t0..=t_end).map(|t| t as f64).collect();
    let kernel: Vec<Vec<f64>> = (1..=cfg.n_terms)
        .map(|n| {
            let rate = alpha * (n * n) as f64;
            times.iter().map(|&t| series_kernel(rate, beta, t, cfg.degeneracy_tol)).collect()
        })
        .collect();

    let target: Vec<f64> = match search.target {
        Target::ClosedForm => times.iter().map(|&t| rhs_curve(t, spec, k, beta)).collect::<Result<_>>()?,
        Target::Measured => {
            let probe = LeakScenario::new(spec, 0.5 * spec.length(), k, beta)?.with_k_mode(search.k_mode);
            let amp = amplitude(spec, boundary, &probe, cfg.amplitude, SegmentId::UpstreamOfLeak);
            times
                .iter()
                .map(|&t| {
                    let p = series.interpolate(t).expect("inside the sampled span");
                    ((p1 - p) / amp - mean_decay(beta, t)) / 2.0
                })
                .collect()
        }
    };

    let policy_window = |center: f64| -> (f64, f64) {
        match search.window_policy {
            WindowPolicy::PaperFixed => PAPER_WINDOW,
            WindowPolicy::DelayScaled => {
                let tau = center / spec.sound_speed();
                (tau, 2.0 * tau)
            }
            WindowPolicy::DelayToEnd => (0.0, t_last),
        }
    };

    let mut problem = Problem { spec, cfg, search, t0, kernel, target, shared_peak: 0.0 };
    let set_peak = |problem: &mut Problem, window: (f64, f64)| {
        let lo = window.0.ceil().max(t0 as f64) as usize;
        let hi = (window.1.floor() as usize).min(t_end);
        problem.shared_peak = if hi >= lo {
            problem.target[lo - t0..=hi - t0].iter().fold(0.0f64, |m, v| m.max(v.abs()))
        } else {
            0.0
        };
    };

    let length = spec.length();
    let step = search.l_grid_step;
    let candidates: Vec<f64> =
        (1..).map(|i| i as f64 * step).take_while(|&l| l < length * (1.0 - 1e-12)).collect();
    if candidates.is_empty() {
        return Err(Error::InvalidScenario(format!("candidate spacing {step} m leaves no candidate inside the line")));
    }

    let mut window = policy_window(0.5 * length);
    let rounds = if search.window_policy == WindowPolicy::DelayScaled { 2 } else { 1 };
    let mut found = None;
    for round in 0..rounds {
        set_peak(&mut problem, window);
        let (l, s, curve) = problem.grid_search(&candidates, window)?;
        found = Some((l, s, curve));
        if round + 1 < rounds {
            window = policy_window(l);
        }
    }
    let (mut l_hat, score, objective_curve) = found.expect("at least one round");
    if search.refine {
        l_hat = problem.refine(l_hat, score, window);
    }

    let (lo, hi) = problem.window_for(l_hat, window).ok_or(Error::WindowEmpty)?;
    let (a, b) = problem.scaled(l_hat, lo, hi).ok_or(Error::DegenerateCurve)?;
    let curves: Vec<(f64, f64, f64)> = (lo..=hi).zip(a.iter().zip(&b)).map(|(t, (&x, &y))| (t as f64, x, y)).collect();
    let intersection_time = first_crossing(&curves);

    Ok(LocalizationResult {
        l_hat,
        objective_curve,
        window: (lo as f64, hi as f64),
        intersection_time,
        beta_used: beta,
        beta_fit,
        curves,
    })
}

/// First time at which `a − b` reaches zero, linearly interpolated between samples.
fn first_crossing(curves: &[(f64, f64, f64)]) -> Option<f64> {
    let diff: Vec<(f64, f64)> = curves.iter().map(|&(t, a, b)| (t, a - b)).collect();
    if let Some(&(t, _)) = diff.first().filter(|(_, d)| *d == 0.0) {
        return Some(t);
    }
    diff.windows(2).find_map(|w| {
        let ((t0, d0), (t1, d1)) = (w[0], w[1]);
        if d1 == 0.0 {
            Some(t1)
        } else if d0.signum() != d1.signum() {
            Some(t0 + (t1 - t0) * d0 / (d0 - d1))
        } else {
            None
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const BETA: f64 = 1.03e-4;

    #[test]
    fn lhs_examples() {
        let spec = PipelineSpec::reference();
        let cfg = SeriesConfig::default();
        assert_eq!(lhs_series(25e3, 0.0, &cfg, &spec, BETA), 0.0);
        let terms = lhs_terms(5e4, 300.0, &cfg, &spec, BETA);
        for (i, v) in terms.iter().enumerate() {
            if i % 2 == 0 {
                assert!(v.abs() < 1e-12, "odd n = {} gives {v}", i + 1);
            }
        }
        let v = lhs_series(25e3, 120.0, &cfg, &spec, BETA);
        assert!((v.abs() - 5.99).abs() < 0.01, "{v}");
    }

    #[test]
    fn rhs_examples() {
        let spec = PipelineSpec::reference();
        assert_eq!(rhs_curve(0.0, &spec, 0.802, BETA).unwrap(), 0.0);
        let v = rhs_curve(120.0, &spec, 0.802, BETA).unwrap();
        assert!(v < 0.0 && (v.abs() - 37_880.0).abs() < 0.02 * 37_880.0, "{v}");
        let far = rhs_curve(1e7, &spec, 0.802, BETA).unwrap();
        let asym = 0.1 * 1e5 / (0.802 * 9.81) * (1.0 - 1.0 / (4.0 * BETA));
        assert!((far - asym).abs() < 1e-6 * asym.abs());
        assert!((asym + 3.08e6).abs() < 0.01e6);
        assert!(matches!(rhs_curve(1.0, &spec, 0.0, BETA), Err(Error::NoLeakModel)));
    }

    #[test]
    fn normalize_examples() {
        let v = normalize_curve(&[(0.0, 1.0), (1.0, -2.0), (2.0, 4.0)]).unwrap();
        assert_eq!(v, vec![(0.0, 0.25), (1.0, -0.5), (2.0, 1.0)]);
        assert_eq!(normalize_curve(&v).unwrap(), v);
        assert!(matches!(normalize_curve(&[(0.0, 0.0), (1.0, 0.0)]), Err(Error::DegenerateCurve)));
    }

    #[test]
    fn crossing_detection() {
        assert_eq!(first_crossing(&[(0.0, 1.0, 0.0), (1.0, -1.0, 0.0)]), Some(0.5));
        assert_eq!(first_crossing(&[(0.0, 1.0, 0.0), (1.0, 2.0, 0.0)]), None);
        assert_eq!(first_crossing(&[(3.0, 0.0, 0.0), (4.0, 2.0, 0.0)]), Some(3.0));
    }

    proptest! {
        #[test]
        fn normalization_keeps_shape(v in prop::collection::vec(-1e6..1e6f64, 1..50)) {
            prop_assume!(v.iter().any(|x| *x != 0.0));
            let s: Vec<(f64, f64)> = v.iter().enumerate().map(|(i, &x)| (i as f64, x)).collect();
            let n = normalize_curve(&s).unwrap();
            let peak = n.iter().fold(0.0f64, |m, &(_, x)| m.max(x.abs()));
            prop_assert_eq!(peak, 1.0);
            for (a, b) in s.iter().zip(&n) {
                prop_assert_eq!(a.1 == 0.0, b.1 == 0.0);
                prop_assert_eq!(a.1 > 0.0, b.1 > 0.0);
            }
        }

        #[test]
        fn reflection_flips_odd_terms(l in 1e3..99e3f64, t in 0.0..2000.0f64) {
            let spec = PipelineSpec::reference();
            let cfg = SeriesConfig::default();
            let a = lhs_terms(l, t, &cfg, &spec, BETA);
            let b = lhs_terms(spec.length() - l, t, &cfg, &spec, BETA);
            for (n, (x, y)) in a.iter().zip(&b).enumerate() {
                let sign = if (n + 1) % 2 == 0 { 1.0 } else { -1.0 };
                prop_assert!((y - sign * x).abs() <= 1e-9 * x.abs() + 1e-12 * t.max(1.0));
            }
        }
    }
}
