//! Finite-difference oracle for the coupled pair of lines.
//!
//! The intact line `[0, L]` and the damaged line traversed backwards from the
//! outlet form one ring of `2M` nodes with spacing `dx = L/M`. The shared inlet
//! and outlet nodes carry the pressure-equality conditions automatically; their
//! total-flux conditions and the leak's flux jump become point sources:
//!
//! ```text
//! ∂u/∂t = D·u_xx + (c²/dx)·[G_b·δ_inlet − G_b·δ_outlet − G(t)·δ_leak],   D = c²/(2a)
//! ```
//!
//! Summing the nodal equation with its two half-cells is exactly the
//! ghost-node form of the Neumann jump `∂P₃/∂x − ∂P₂/∂x = 2a·G(t)`.

use crate::analytic::{pressure_field, AmplitudeVariant, SegmentId, SeriesConfig};
use crate::calibration::leak_rate_at_onset;
use crate::error::{Error, Result};
use crate::field::{curvature3, slope3, Quantity, ScalarField};
use crate::model::{FlowBoundary, LeakScenario, PipelineSpec};
use crate::tridiag::CyclicTridiag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum Scheme {
    ImplicitEuler,
    /// Crank–Nicolson, started with four implicit-Euler half steps so the
    /// point-source start-up transient does not spoil second-order accuracy.
    #[default]
    CrankNicolson,
}

impl Scheme {
    pub fn tag(self) -> &'static str {
        match self {
            Scheme::ImplicitEuler => "implicit-euler",
            Scheme::CrankNicolson => "crank-nicolson",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "implicit-euler" | "ie" => Some(Scheme::ImplicitEuler),
            "crank-nicolson" | "cn" => Some(Scheme::CrankNicolson),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    /// Nodes per line, both ends included.
    pub nx_per_line: usize,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    /// Spacing of the stored time levels, s; a multiple of `dt`.
    pub output_interval: f64,
    /// Spacing of the stored nodes, m; a multiple of the grid spacing.
    pub output_dx: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            nx_per_line: 2001,
            dt: 0.5,
            t_end: 600.0,
            scheme: Scheme::default(),
            output_interval: 10.0,
            output_dx: 500.0,
        }
    }
}

/// `value / unit` as an integer when it is one to within 1e-9 relative.
fn whole_multiple(value: f64, unit: f64) -> Option<usize> {
    let q = value / unit;
    let r = q.round();
    ((q - r).abs() <= 1e-9 * q.abs().max(1.0) && r >= 1.0).then_some(r as usize)
}

impl FdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nx_per_line < 11 {
            return Err(Error::InsufficientGrid(format!("need at least 11 nodes per line, got {}", self.nx_per_line)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InsufficientGrid(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::InsufficientGrid(format!("end time must be positive, got {}", self.t_end)));
        }
        if self.dt > self.t_end / 10.0 {
            return Err(Error::InsufficientGrid(format!(
                "time step {} s exceeds a tenth of the end time {} s",
                self.dt, self.t_end
            )));
        }
        if whole_multiple(self.t_end, self.dt).is_none() {
            return Err(Error::GridMismatch(format!("end time {} s is not a multiple of dt {} s", self.t_end, self.dt)));
        }
        if whole_multiple(self.output_interval, self.dt).is_none() {
            return Err(Error::GridMismatch(format!(
                "output interval {} s is not a multiple of dt {} s",
                self.output_interval, self.dt
            )));
        }
        Ok(())
    }
}

/// Result of a march: the sampled field plus diagnostics recorded at every step.
#[derive(Debug, Clone)]
pub struct FdSolution {
    /// Pressure on the output grid. The leak sits at the snapped node.
    pub field: ScalarField,
    /// Snapped leak position, m.
    pub leak_node_x: f64,
    /// Requested minus snapped leak position, m.
    pub leak_offset: f64,
    /// `(t, P(0, t))` at every step.
    pub inlet_trace: Vec<(f64, f64)>,
    /// `(t, G₂(ℓ⁻) − G₃(ℓ⁺))` at every step, from one-sided differences at the leak node.
    pub leak_jump_trace: Vec<(f64, f64)>,
}

/// Marches the coupled lines from the steady state.
pub fn fd_solve(spec: &PipelineSpec, boundary: &FlowBoundary, scenario: &LeakScenario, cfg: &FdConfig) -> Result<FdSolution> {
    cfg.validate()?;
    let l = spec.length();
    let m = cfg.nx_per_line - 1;
    let dx = l / m as f64;
    let n = 2 * m;
    let x_stride = whole_multiple(cfg.output_dx, dx).ok_or_else(|| {
        Error::GridMismatch(format!("output spacing {} m is not a multiple of dx = {dx} m", cfg.output_dx))
    })?;
    if m % x_stride != 0 {
        return Err(Error::GridMismatch(format!("output spacing {} m does not divide the line length", cfg.output_dx)));
    }

    let leak_node = (scenario.location() / dx).round() as usize;
    let leak_offset = scenario.location() - leak_node as f64 * dx;
    if leak_offset.abs() > dx {
        return Err(Error::GridMismatch(format!("leak snaps {leak_offset} m away, more than dx = {dx} m")));
    }
    if leak_node == 0 || leak_node >= m {
        return Err(Error::GridMismatch(format!(
            "leak at {} m snaps onto a junction node; refine the grid",
            scenario.location()
        )));
    }
    let leak_ring = n - leak_node;

    // Ring node k ≤ M is intact-line x = k·dx; k > M is damaged-line x = (2M − k)·dx.
    let ring_x = |k: usize| if k <= m { k as f64 * dx } else { (n - k) as f64 * dx };
    let mut u: Vec<f64> = (0..n).map(|k| boundary.inlet_pressure() - boundary.steady_gradient() * ring_x(k)).collect();

    let c2 = spec.sound_speed() * spec.sound_speed();
    let diffusivity = spec.diffusivity();
    let junction = c2 * boundary.junction_flux(spec) / dx;
    let leak0 = c2 * leak_rate_at_onset(spec, boundary, scenario) / dx;
    let beta = scenario.decay_beta();
    let two_a = spec.lin_coeff_2a();

    // Adds h·f(t) to `rhs`.
    let add_source = |rhs: &mut [f64], h: f64, t: f64| {
        rhs[0] += h * junction;
        rhs[m] -= h * junction;
        rhs[leak_ring] -= h * leak0 * (-beta * t).exp();
    };
    let laplacian = |u: &[f64], k: usize| u[(k + n - 1) % n] - 2.0 * u[k] + u[(k + 1) % n];
    let jump = |u: &[f64]| laplacian(u, leak_ring) / (dx * two_a);

    let steps = whole_multiple(cfg.t_end, cfg.dt).expect("validated");
    let out_every = whole_multiple(cfg.output_interval, cfg.dt).expect("validated");
    let r = diffusivity * cfg.dt / (dx * dx);
    let half = CyclicTridiag::new(n, 1.0 + r, -0.5 * r);
    let full = match cfg.scheme {
        Scheme::ImplicitEuler => Some(CyclicTridiag::new(n, 1.0 + 2.0 * r, -r)),
        Scheme::CrankNicolson => None,
    };

    let mut snapshots = vec![u.clone()];
    let mut t_grid = vec![0.0];
    let mut inlet_trace = Vec::with_capacity(steps + 1);
    let mut leak_jump_trace = Vec::with_capacity(steps + 1);
    inlet_trace.push((0.0, u[0]));
    leak_jump_trace.push((0.0, jump(&u)));
    let mut rhs = vec![0.0; n];

    for step in 0..steps {
        let t0 = step as f64 * cfg.dt;
        let t1 = (step + 1) as f64 * cfg.dt;
        match (cfg.scheme, &full) {
            (Scheme::ImplicitEuler, Some(solver)) => {
                rhs.copy_from_slice(&u);
                add_source(&mut rhs, cfg.dt, t1);
                solver.solve_in_place(&mut rhs);
                std::mem::swap(&mut u, &mut rhs);
            }
            _ if step < 2 => {
                for sub in 1..=2 {
                    rhs.copy_from_slice(&u);
                    add_source(&mut rhs, 0.5 * cfg.dt, t0 + 0.5 * cfg.dt * sub as f64);
                    half.solve_in_place(&mut rhs);
                    std::mem::swap(&mut u, &mut rhs);
                }
            }
            _ => {
                for k in 0..n {
                    rhs[k] = u[k] + 0.5 * r * laplacian(&u, k);
                }
                add_source(&mut rhs, 0.5 * cfg.dt, t0);
                add_source(&mut rhs, 0.5 * cfg.dt, t1);
                half.solve_in_place(&mut rhs);
                std::mem::swap(&mut u, &mut rhs);
            }
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBlowup { t: t1 });
        }
        inlet_trace.push((t1, u[0]));
        leak_jump_trace.push((t1, jump(&u)));
        if (step + 1) % out_every == 0 || step + 1 == steps {
            snapshots.push(u.clone());
            t_grid.push(t1);
        }
    }

    let mut nodes: Vec<usize> = (0..=m).step_by(x_stride).collect();
    if let Err(pos) = nodes.binary_search(&leak_node) {
        nodes.insert(pos, leak_node);
    }
    let x_grid: Vec<f64> = nodes.iter().map(|&i| i as f64 * dx).collect();
    let leak_x = leak_node as f64 * dx;
    let domains = SegmentId::ALL.map(|s| s.domain(l, leak_x));
    let field = ScalarField::from_fn(Quantity::Pressure, x_grid, t_grid.clone(), domains, |seg, x, t| {
        let i = (x / dx).round() as usize;
        let it = t_grid.partition_point(|&g| g < t - 1e-9);
        let ring = match seg {
            SegmentId::Intact => i,
            _ => (n - i) % n,
        };
        Ok(snapshots[it][ring])
    })?;

    Ok(FdSolution { field, leak_node_x: leak_x, leak_offset, inlet_trace, leak_jump_trace })
}

/// Largest normalized residual of `P_xx = (2a/c²)·P_t` over interior nodes,
/// skipping two nodes on either side of the leak. The scale is
/// `(2a/c²)·P₁/t_end`, with `t_end` the last time level.
pub fn pde_residual(field: &ScalarField, spec: &PipelineSpec, boundary: &FlowBoundary) -> Result<f64> {
    if field.quantity() != Quantity::Pressure {
        return Err(Error::GridMismatch("residual needs a pressure field".into()));
    }
    let xs = field.x_grid();
    let ts = field.t_grid();
    if ts.len() < 3 {
        return Err(Error::InsufficientGrid(format!("need at least 3 time levels, got {}", ts.len())));
    }
    let t_end = ts[ts.len() - 1];
    if !(t_end > 0.0) {
        return Err(Error::InsufficientGrid("last time level must be positive".into()));
    }
    let inv_d = spec.lin_coeff_2a() / (spec.sound_speed() * spec.sound_speed());
    let scale = inv_d * boundary.inlet_pressure() / t_end;
    const COLLAR: usize = 2;

    let mut worst: f64 = 0.0;
    for seg in SegmentId::ALL {
        let range = field.x_range(seg);
        let nx = range.len();
        if nx < 5 {
            return Err(Error::InsufficientGrid(format!(
                "segment {} has {nx} x-points, the residual needs at least 5",
                seg.number()
            )));
        }
        let (lo_skip, hi_skip) = match seg {
            SegmentId::Intact => (1, 1),
            SegmentId::UpstreamOfLeak => (1, COLLAR + 1),
            SegmentId::DownstreamOfLeak => (COLLAR + 1, 1),
        };
        for i in range.start + lo_skip..range.end.saturating_sub(hi_skip) {
            let sx = [xs[i - 1], xs[i], xs[i + 1]];
            for it in 1..ts.len() - 1 {
                let p = |ix: usize, jt: usize| field.get(seg, ix, jt).expect("inside segment");
                let pxx = curvature3(sx, [p(i - 1, it), p(i, it), p(i + 1, it)]);
                let pt = slope3([ts[it - 1], ts[it], ts[it + 1]], [p(i, it - 1), p(i, it), p(i, it + 1)], 1);
                worst = worst.max((pxx - inv_d * pt).abs() / scale);
            }
        }
    }
    Ok(worst)
}

/// Location of the largest discrepancy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstPoint {
    pub segment: SegmentId,
    pub x: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyReport {
    pub max_rel: f64,
    pub mean_rel: f64,
    pub worst_point: WorstPoint,
    pub variant_tag: String,
}

/// Pointwise `|a − b| / max(|a|, |b|)` over entries present in both fields.
pub fn compare_fields(a: &ScalarField, b: &ScalarField) -> Result<DiscrepancyReport> {
    if !a.same_layout(b) {
        return Err(Error::GridMismatch("fields differ in grid, segment layout or quantity".into()));
    }
    let mut max_rel: f64 = 0.0;
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut worst = WorstPoint { segment: SegmentId::Intact, x: a.x_grid()[0], t: a.t_grid()[0] };
    for seg in SegmentId::ALL {
        for (ix, it, va) in a.entries(seg) {
            let vb = b.get(seg, ix, it).expect("same layout");
            let den = va.abs().max(vb.abs());
            let rel = if den == 0.0 { 0.0 } else { (va - vb).abs() / den };
            if rel > max_rel {
                max_rel = rel;
                worst = WorstPoint { segment: seg, x: a.x_grid()[ix], t: a.t_grid()[it] };
            }
            sum += rel;
            count += 1;
        }
    }
    let mean_rel = if count == 0 { 0.0 } else { sum / count as f64 };
    Ok(DiscrepancyReport { max_rel, mean_rel, worst_point: worst, variant_tag: String::new() })
}

/// Outcome of checking every amplitude variant against the oracle.
#[derive(Debug, Clone)]
pub struct Reconciliation {
    /// One report per variant, in [`AmplitudeVariant::ALL`] order.
    pub reports: Vec<DiscrepancyReport>,
    /// Normalized PDE residual per variant, same order.
    pub residuals: Vec<f64>,
    pub selected: AmplitudeVariant,
    pub fd: FdSolution,
}

impl Reconciliation {
    pub fn selected_report(&self) -> &DiscrepancyReport {
        let i = AmplitudeVariant::ALL.iter().position(|&v| v == self.selected).expect("known variant");
        &self.reports[i]
    }

    pub fn selected_residual(&self) -> f64 {
        let i = AmplitudeVariant::ALL.iter().position(|&v| v == self.selected).expect("known variant");
        self.residuals[i]
    }
}

/// Terms used for the residual check; the 20-term series is too rough to differentiate twice.
pub const RESIDUAL_TERMS: usize = 200;

/// Compares every amplitude variant with `fd_solve` and keeps the one with the
/// smallest worst-case relative discrepancy. Residuals are evaluated with
/// [`RESIDUAL_TERMS`] terms on a 1 km × 10 s grid. The closed form is
/// evaluated at the snapped leak position so both fields share a layout.
pub fn reconcile(
    spec: &PipelineSpec,
    boundary: &FlowBoundary,
    scenario: &LeakScenario,
    fd_cfg: &FdConfig,
    series: &SeriesConfig,
) -> Result<Reconciliation> {
    let fd = fd_solve(spec, boundary, scenario, fd_cfg)?;
    let snapped = scenario.with_location(spec, fd.leak_node_x)?;
    let l = spec.length();
    let coarse_x: Vec<f64> = (0..=100).map(|i| l * i as f64 / 100.0).collect();
    let steps = (fd_cfg.t_end / 10.0).round().max(2.0) as usize;
    let coarse_t: Vec<f64> = (0..=steps).map(|i| fd_cfg.t_end * i as f64 / steps as f64).collect();

    let mut reports = Vec::new();
    let mut residuals = Vec::new();
    for variant in AmplitudeVariant::ALL {
        let cfg = series.with_amplitude(variant);
        let cf = pressure_field(spec, boundary, &snapped, &cfg, fd.field.x_grid(), fd.field.t_grid())?;
        let mut report = compare_fields(&cf, &fd.field)?;
        report.variant_tag = variant.tag().to_string();
        reports.push(report);
        let fine = pressure_field(spec, boundary, &snapped, &cfg.with_terms(RESIDUAL_TERMS), &coarse_x, &coarse_t)?;
        residuals.push(pde_residual(&fine, spec, boundary)?);
    }
    let best = (0..reports.len())
        .min_by(|&i, &j| reports[i].max_rel.total_cmp(&reports[j].max_rel))
        .expect("variants exist");
    Ok(Reconciliation { reports, residuals, selected: AmplitudeVariant::ALL[best], fd })
}
