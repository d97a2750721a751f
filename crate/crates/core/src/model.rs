//! Physical constants of the parallel pipeline pair and its steady pre-leak state.
//!
//! All quantities are SI: meters, seconds, pascals. The mass flux `G` follows the
//! pressure-per-velocity convention (Pa·s/m) so that the momentum balance reads
//! `-∂P/∂x = 2a·G` and continuity reads `-(1/c²)·∂P/∂t = ∂G/∂x`.

use std::f64::consts::PI;

use crate::calibration::KMode;
use crate::error::{Error, Result};

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Geometry and gas-dynamic constants shared by both lines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineSpec {
    length: f64,
    sound_speed: f64,
    lin_coeff_2a: f64,
    gravity: f64,
    friction: Option<FrictionInputs>,
}

/// Inputs of the linearized friction coefficient, kept for provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionInputs {
    pub lambda: f64,
    pub base_velocity: f64,
    pub diameter: f64,
}

impl PipelineSpec {
    /// `length` in m, `sound_speed` in m/s, `lin_coeff_2a` (the full `2a`) in 1/s.
    pub fn new(length: f64, sound_speed: f64, lin_coeff_2a: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGeometry(format!("length must be positive, got {length}")));
        }
        if !(sound_speed.is_finite() && sound_speed > 0.0) {
            return Err(Error::InvalidGas(format!("sound speed must be positive, got {sound_speed}")));
        }
        if !(lin_coeff_2a.is_finite() && lin_coeff_2a > 0.0) {
            return Err(Error::InvalidGas(format!(
                "linearized friction coefficient 2a must be positive, got {lin_coeff_2a}"
            )));
        }
        Ok(PipelineSpec { length, sound_speed, lin_coeff_2a, gravity: STANDARD_GRAVITY, friction: None })
    }

    /// Builds the spec from friction factor, base velocity and diameter via the
    /// linearization `2a = λ·v₀/(2d)`.
    pub fn from_friction(length: f64, sound_speed: f64, friction: FrictionInputs) -> Result<Self> {
        let two_a = chernov_coefficient(friction.lambda, friction.base_velocity, friction.diameter)?;
        let mut spec = PipelineSpec::new(length, sound_speed, two_a)?;
        spec.friction = Some(friction);
        Ok(spec)
    }

    pub fn with_gravity(mut self, gravity: f64) -> Result<Self> {
        if !(gravity.is_finite() && gravity > 0.0) {
            return Err(Error::InvalidGas(format!("gravity must be positive, got {gravity}")));
        }
        self.gravity = gravity;
        Ok(self)
    }

    /// The two-line system used throughout the worked scenario: L = 100 km,
    /// c = 383.3 m/s, 2a = 0.1 1/s.
    pub fn reference() -> Self {
        PipelineSpec::new(100_000.0, 383.3, 0.1).expect("reference constants are valid")
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn sound_speed(&self) -> f64 {
        self.sound_speed
    }

    /// The linearized friction coefficient `2a`, 1/s.
    pub fn lin_coeff_2a(&self) -> f64 {
        self.lin_coeff_2a
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    pub fn friction(&self) -> Option<FrictionInputs> {
        self.friction
    }

    /// Pressure diffusivity `c²/(2a)`, m²/s.
    pub fn diffusivity(&self) -> f64 {
        self.sound_speed * self.sound_speed / self.lin_coeff_2a
    }
}

/// Inlet state of the system before the leak opens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowBoundary {
    inlet_pressure: f64,
    base_mass_flux: f64,
    steady_gradient: f64,
}

impl FlowBoundary {
    /// `inlet_pressure` P₁ in Pa, `base_mass_flux` G₀ in Pa·s/m, `steady_gradient`
    /// s₀ in Pa/m. The outlet pressure `P₁ − s₀·L` must stay positive.
    pub fn new(spec: &PipelineSpec, inlet_pressure: f64, base_mass_flux: f64, steady_gradient: f64) -> Result<Self> {
        if !(inlet_pressure.is_finite() && inlet_pressure > 0.0) {
            return Err(Error::InvalidBoundary(format!("inlet pressure must be positive, got {inlet_pressure}")));
        }
        if !(base_mass_flux.is_finite() && base_mass_flux >= 0.0) {
            return Err(Error::InvalidBoundary(format!("base mass flux must be non-negative, got {base_mass_flux}")));
        }
        if !(steady_gradient.is_finite() && steady_gradient >= 0.0) {
            return Err(Error::InvalidBoundary(format!("steady gradient must be non-negative, got {steady_gradient}")));
        }
        if steady_gradient * spec.length() >= inlet_pressure {
            return Err(Error::InvalidBoundary(format!(
                "outlet pressure {} Pa is not positive",
                inlet_pressure - steady_gradient * spec.length()
            )));
        }
        Ok(FlowBoundary { inlet_pressure, base_mass_flux, steady_gradient })
    }

    /// Uses the gradient at which each of the two lines carries half of G₀:
    /// `s₀ = (2a/2)·G₀`.
    pub fn with_split_gradient(spec: &PipelineSpec, inlet_pressure: f64, base_mass_flux: f64) -> Result<Self> {
        FlowBoundary::new(spec, inlet_pressure, base_mass_flux, split_gradient(spec, base_mass_flux))
    }

    pub fn inlet_pressure(&self) -> f64 {
        self.inlet_pressure
    }

    pub fn base_mass_flux(&self) -> f64 {
        self.base_mass_flux
    }

    pub fn steady_gradient(&self) -> f64 {
        self.steady_gradient
    }

    /// Total flux through the shared inlet (and outlet) that keeps the stored
    /// gradient steady in both lines.
    pub fn junction_flux(&self, spec: &PipelineSpec) -> f64 {
        2.0 * self.steady_gradient / spec.lin_coeff_2a()
    }
}

/// The steady gradient at which two identical lines split a total flux `g0` evenly.
pub fn split_gradient(spec: &PipelineSpec, g0: f64) -> f64 {
    0.5 * spec.lin_coeff_2a() * g0
}

/// Leak position and the parameters of its decaying outflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakScenario {
    location: f64,
    coeff_k: f64,
    decay_beta: f64,
    k_mode: KMode,
}

impl LeakScenario {
    pub fn new(spec: &PipelineSpec, location: f64, coeff_k: f64, decay_beta: f64) -> Result<Self> {
        if !(location.is_finite() && location > 0.0 && location < spec.length()) {
            return Err(Error::InvalidScenario(format!(
                "leak location {location} m must lie strictly inside (0, {}) m",
                spec.length()
            )));
        }
        if !(coeff_k.is_finite() && coeff_k >= 0.0) {
            return Err(Error::InvalidScenario(format!("K must be non-negative, got {coeff_k}")));
        }
        if !(decay_beta.is_finite() && decay_beta >= 0.0) {
            return Err(Error::InvalidScenario(format!("beta must be non-negative, got {decay_beta}")));
        }
        Ok(LeakScenario { location, coeff_k, decay_beta, k_mode: KMode::default() })
    }

    /// Declares which calibration convention produced `K`; this fixes the leak
    /// amplitude so that `G(0) = G₀` holds.
    pub fn with_k_mode(mut self, mode: KMode) -> Self {
        self.k_mode = mode;
        self
    }

    pub fn with_location(self, spec: &PipelineSpec, location: f64) -> Result<Self> {
        Ok(LeakScenario::new(spec, location, self.coeff_k, self.decay_beta)?.with_k_mode(self.k_mode))
    }

    pub fn with_beta(self, spec: &PipelineSpec, beta: f64) -> Result<Self> {
        Ok(LeakScenario::new(spec, self.location, self.coeff_k, beta)?.with_k_mode(self.k_mode))
    }

    pub fn with_k(self, spec: &PipelineSpec, k: f64) -> Result<Self> {
        Ok(LeakScenario::new(spec, self.location, k, self.decay_beta)?.with_k_mode(self.k_mode))
    }

    pub fn location(&self) -> f64 {
        self.location
    }

    pub fn coeff_k(&self) -> f64 {
        self.coeff_k
    }

    pub fn decay_beta(&self) -> f64 {
        self.decay_beta
    }

    pub fn k_mode(&self) -> KMode {
        self.k_mode
    }
}

/// Linearized friction coefficient `2a = λ·v₀/(2d)`, 1/s.
pub fn chernov_coefficient(friction_lambda: f64, v0: f64, d: f64) -> Result<f64> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::InvalidGeometry(format!("diameter must be positive, got {d}")));
    }
    if !(friction_lambda.is_finite() && friction_lambda >= 0.0) {
        return Err(Error::InvalidGeometry(format!("friction factor must be non-negative, got {friction_lambda}")));
    }
    if !(v0.is_finite() && v0 >= 0.0) {
        return Err(Error::InvalidGeometry(format!("base velocity must be non-negative, got {v0}")));
    }
    Ok(friction_lambda * v0 / (2.0 * d))
}

/// Acoustic travel time over `distance`.
pub fn wave_delay(distance: f64, c: f64) -> Result<f64> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidGas(format!("sound speed must be positive, got {c}")));
    }
    if !(distance.is_finite() && distance >= 0.0) {
        return Err(Error::InvalidGeometry(format!("distance must be non-negative, got {distance}")));
    }
    Ok(distance / c)
}

/// Fundamental decay rate `α = π²c²/(2a·L²)` of the cosine modes; mode `n`
/// decays at `α·n²`.
pub fn alpha_eigenrate(spec: &PipelineSpec) -> f64 {
    let l = spec.length();
    PI * PI * spec.diffusivity() / (l * l)
}

/// Pre-leak pressure `P₁ − s₀·x`.
pub fn steady_profile(spec: &PipelineSpec, boundary: &FlowBoundary, x: f64) -> Result<f64> {
    check_in_line(spec, x)?;
    Ok(boundary.inlet_pressure() - boundary.steady_gradient() * x)
}

pub(crate) fn check_in_line(spec: &PipelineSpec, x: f64) -> Result<()> {
    if !(x.is_finite() && (0.0..=spec.length()).contains(&x)) {
        return Err(Error::OutOfDomain { x, lo: 0.0, hi: spec.length() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn boundary() -> (PipelineSpec, FlowBoundary) {
        let spec = PipelineSpec::reference();
        let b = FlowBoundary::new(&spec, 5.5e5, 30.0, 1.5).unwrap();
        (spec, b)
    }

    #[test]
    fn chernov_examples() {
        assert_relative_eq!(chernov_coefficient(0.02, 10.0, 1.0).unwrap(), 0.1, max_relative = 1e-15);
        assert_eq!(chernov_coefficient(0.0, 10.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(chernov_coefficient(0.03, 5.0, 0.5).unwrap(), 0.15, max_relative = 1e-15);
        assert!(matches!(chernov_coefficient(0.02, 10.0, 0.0), Err(Error::InvalidGeometry(_))));
        assert!(matches!(chernov_coefficient(0.02, 10.0, -1.0), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn wave_delay_examples() {
        assert!((wave_delay(50_000.0, 383.0).unwrap() - 130.5).abs() < 0.05);
        assert!((wave_delay(25_000.0, 383.3).unwrap() - 65.2).abs() < 0.05);
        assert_eq!(wave_delay(0.0, 383.3).unwrap(), 0.0);
        assert!(matches!(wave_delay(1.0, 0.0), Err(Error::InvalidGas(_))));
    }

    #[test]
    fn alpha_examples() {
        let spec = PipelineSpec::reference();
        assert!((alpha_eigenrate(&spec) - 1.450e-3).abs() < 5e-7);
        let doubled = PipelineSpec::new(2e5, 383.3, 0.1).unwrap();
        assert_relative_eq!(alpha_eigenrate(&doubled) * 4.0, alpha_eigenrate(&spec), max_relative = 1e-14);
        let unit = PipelineSpec::new(PI, 1.0, 1.0).unwrap();
        assert_relative_eq!(alpha_eigenrate(&unit), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn steady_profile_examples() {
        let (spec, b) = boundary();
        assert_eq!(steady_profile(&spec, &b, 0.0).unwrap(), 55.0e4);
        assert_relative_eq!(steady_profile(&spec, &b, 1e5).unwrap(), 40.0e4, max_relative = 1e-15);
        assert_relative_eq!(steady_profile(&spec, &b, 5e4).unwrap(), 47.5e4, max_relative = 1e-15);
        assert!(matches!(steady_profile(&spec, &b, 1e5 + 1.0), Err(Error::OutOfDomain { .. })));
        assert!(matches!(steady_profile(&spec, &b, -1.0), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn split_gradient_matches_reference_table_endpoints() {
        let spec = PipelineSpec::reference();
        let b = FlowBoundary::with_split_gradient(&spec, 5.5e5, 30.0).unwrap();
        assert_relative_eq!(b.steady_gradient(), 1.5, max_relative = 1e-15);
        assert_relative_eq!(b.junction_flux(&spec), 30.0, max_relative = 1e-15);
    }

    #[test]
    fn invariants_are_enforced() {
        assert!(PipelineSpec::new(0.0, 1.0, 1.0).is_err());
        assert!(PipelineSpec::new(1.0, -1.0, 1.0).is_err());
        assert!(PipelineSpec::new(1.0, 1.0, 0.0).is_err());
        assert!(PipelineSpec::reference().with_gravity(0.0).is_err());
        let spec = PipelineSpec::reference();
        assert!(FlowBoundary::new(&spec, 5.5e5, 30.0, 5.5).is_err());
        assert!(FlowBoundary::new(&spec, 0.0, 30.0, 0.0).is_err());
        assert!(FlowBoundary::new(&spec, 5.5e5, -1.0, 0.0).is_err());
        assert!(LeakScenario::new(&spec, 0.0, 0.8, 1e-4).is_err());
        assert!(LeakScenario::new(&spec, 1e5, 0.8, 1e-4).is_err());
        assert!(LeakScenario::new(&spec, 5e4, -0.1, 1e-4).is_err());
        assert!(LeakScenario::new(&spec, 5e4, 0.8, -1e-4).is_err());
        let f = FrictionInputs { lambda: 0.02, base_velocity: 10.0, diameter: 1.0 };
        let spec = PipelineSpec::from_friction(1e5, 383.3, f).unwrap();
        assert_relative_eq!(spec.lin_coeff_2a(), 0.1, max_relative = 1e-15);
        assert_eq!(spec.friction(), Some(f));
    }

    proptest! {
        #[test]
        fn steady_profile_is_affine(x1 in 0.0..1e5f64, x2 in 0.0..1e5f64) {
            let (spec, b) = boundary();
            let lhs = steady_profile(&spec, &b, x1).unwrap() + steady_profile(&spec, &b, x2).unwrap();
            let rhs = 2.0 * steady_profile(&spec, &b, 0.5 * (x1 + x2)).unwrap();
            prop_assert!((lhs - rhs).abs() <= 4.0 * f64::EPSILON * lhs.abs());
        }

        #[test]
        fn wave_delay_is_linear(d in 0.0..1e6f64, c in 1.0..2000.0f64) {
            let one = wave_delay(d, c).unwrap();
            let two = wave_delay(2.0 * d, c).unwrap();
            prop_assert!((two - 2.0 * one).abs() <= 1e-15 * two.abs().max(1.0));
        }

        #[test]
        fn alpha_identity(l in 1e3..1e6f64, c in 50.0..1000.0f64, two_a in 1e-3..1.0f64) {
            let spec = PipelineSpec::new(l, c, two_a).unwrap();
            let v = alpha_eigenrate(&spec) * two_a * l * l / (c * c);
            prop_assert!((v - PI * PI).abs() <= 1e-12 * PI * PI);
        }

        #[test]
        fn chernov_homogeneity(lambda in 0.0..0.1f64, v0 in 0.0..30.0f64, d in 0.05..2.0f64, s in 0.1..10.0f64) {
            let base = chernov_coefficient(lambda, v0, d).unwrap();
            let scaled_v = chernov_coefficient(lambda, s * v0, d).unwrap();
            let scaled_d = chernov_coefficient(lambda, v0, s * d).unwrap();
            prop_assert!((scaled_v - s * base).abs() <= 1e-14 * scaled_v.abs().max(1e-300));
            prop_assert!((scaled_d - base / s).abs() <= 1e-14 * base.abs().max(1e-300));
        }
    }
}
