//! Values of one physical quantity on an `(x, t)` grid, stored per pipeline segment.

use rayon::prelude::*;

use crate::analytic::SegmentId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantity {
    /// Pa.
    Pressure,
    /// Pa·s/m.
    MassFlux,
}

/// One segment's block: the contiguous run of x-indices inside its domain,
/// with values stored row-major as `[x][t]`.
#[derive(Debug, Clone, PartialEq)]
struct Block {
    domain: (f64, f64),
    x_start: usize,
    x_len: usize,
    values: Vec<f64>,
}

/// A quantity sampled on a shared grid. Points outside a segment's domain are
/// absent rather than filled with a marker value.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    quantity: Quantity,
    x_grid: Vec<f64>,
    t_grid: Vec<f64>,
    blocks: [Block; 3],
}

/// Absolute slack used when deciding whether a grid node lies in a segment domain.
pub(crate) fn domain_slack(hi: f64) -> f64 {
    1e-9 * hi.abs().max(1.0)
}

pub(crate) fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::GridMismatch(format!("{name} grid contains a non-finite value")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::GridMismatch(format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

impl ScalarField {
    /// Evaluates `f(segment, x, t)` at every grid point inside each segment's
    /// domain. Points are evaluated in parallel; each value depends only on its
    /// own inputs, so the result matches sequential evaluation bit for bit.
    pub fn from_fn<F>(
        quantity: Quantity,
        x_grid: Vec<f64>,
        t_grid: Vec<f64>,
        domains: [(f64, f64); 3],
        f: F,
    ) -> Result<Self>
    where
        F: Fn(SegmentId, f64, f64) -> Result<f64> + Sync,
    {
        check_grid("x", &x_grid)?;
        check_grid("t", &t_grid)?;
        let nt = t_grid.len();
        let mut blocks = Vec::with_capacity(3);
        for (seg, &(lo, hi)) in SegmentId::ALL.iter().zip(domains.iter()) {
            let slack = domain_slack(hi);
            let x_start = x_grid.partition_point(|&x| x < lo - slack);
            let x_end = x_grid.partition_point(|&x| x <= hi + slack);
            let x_len = x_end.saturating_sub(x_start);
            let values = (0..x_len * nt)
                .into_par_iter()
                .map(|k| {
                    let x = x_grid[x_start + k / nt].clamp(lo, hi);
                    f(*seg, x, t_grid[k % nt])
                })
                .collect::<Result<Vec<f64>>>()?;
            blocks.push(Block { domain: (lo, hi), x_start, x_len, values });
        }
        let blocks: [Block; 3] = blocks.try_into().expect("three segments");
        let field = ScalarField { quantity, x_grid, t_grid, blocks };
        field.check_values()?;
        Ok(field)
    }

    fn check_values(&self) -> Result<()> {
        for seg in SegmentId::ALL {
            for (ix, it, v) in self.entries(seg) {
                let t = self.t_grid[it];
                if !v.is_finite() {
                    return Err(Error::NumericalBlowup { t });
                }
                if self.quantity == Quantity::Pressure && v <= 0.0 {
                    return Err(Error::InvalidScenario(format!(
                        "pressure {v} Pa is not positive at x = {} m, t = {t} s",
                        self.x_grid[ix]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn quantity(&self) -> Quantity {
        self.quantity
    }

    pub fn x_grid(&self) -> &[f64] {
        &self.x_grid
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    /// The x-interval the segment was evaluated on.
    pub fn domain(&self, seg: SegmentId) -> (f64, f64) {
        self.blocks[seg.index()].domain
    }

    /// Global x-indices covered by the segment.
    pub fn x_range(&self, seg: SegmentId) -> std::ops::Range<usize> {
        let b = &self.blocks[seg.index()];
        b.x_start..b.x_start + b.x_len
    }

    /// Value at global indices `(ix, it)`, or `None` outside the segment domain.
    pub fn get(&self, seg: SegmentId, ix: usize, it: usize) -> Option<f64> {
        let b = &self.blocks[seg.index()];
        let nt = self.t_grid.len();
        if ix < b.x_start || ix >= b.x_start + b.x_len || it >= nt {
            return None;
        }
        Some(b.values[(ix - b.x_start) * nt + it])
    }

    /// All present values of a segment as `(ix, it, value)`.
    pub fn entries(&self, seg: SegmentId) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let b = &self.blocks[seg.index()];
        let nt = self.t_grid.len();
        b.values.iter().enumerate().map(move |(k, &v)| (b.x_start + k / nt, k % nt, v))
    }

    /// Index of `t` in the time grid, matched to within 1e-9 s.
    pub fn t_index(&self, t: f64) -> Option<usize> {
        self.t_grid.iter().position(|&g| (g - t).abs() <= 1e-9 * g.abs().max(1.0))
    }

    /// Index of `x` in the space grid, matched to within a nanometre-scale slack.
    pub fn x_index(&self, x: f64) -> Option<usize> {
        let slack = domain_slack(*self.x_grid.last().unwrap_or(&1.0));
        self.x_grid.iter().position(|&g| (g - x).abs() <= slack)
    }

    /// Looks a value up by coordinates rather than indices.
    pub fn value_at(&self, seg: SegmentId, x: f64, t: f64) -> Option<f64> {
        self.get(seg, self.x_index(x)?, self.t_index(t)?)
    }

    /// Builds a field of another quantity on the same grid and segment layout.
    pub(crate) fn with_values(&self, quantity: Quantity, per_segment: [Vec<f64>; 3]) -> Result<Self> {
        let mut out = self.clone();
        out.quantity = quantity;
        for (b, values) in out.blocks.iter_mut().zip(per_segment) {
            debug_assert_eq!(values.len(), b.values.len());
            b.values = values;
        }
        out.check_values()?;
        Ok(out)
    }

    /// Whether two fields share grids, segment layout and quantity.
    pub fn same_layout(&self, other: &ScalarField) -> bool {
        self.quantity == other.quantity
            && self.x_grid == other.x_grid
            && self.t_grid == other.t_grid
            && SegmentId::ALL.iter().all(|&s| self.x_range(s) == other.x_range(s))
    }
}

/// Slope at `xs[at]` of the quadratic through three points (non-uniform spacing allowed).
pub(crate) fn slope3(xs: [f64; 3], fs: [f64; 3], at: usize) -> f64 {
    let z = xs[at];
    let [x0, x1, x2] = xs;
    fs[0] * ((z - x1) + (z - x2)) / ((x0 - x1) * (x0 - x2))
        + fs[1] * ((z - x0) + (z - x2)) / ((x1 - x0) * (x1 - x2))
        + fs[2] * ((z - x0) + (z - x1)) / ((x2 - x0) * (x2 - x1))
}

/// Second derivative of the quadratic through three points.
pub(crate) fn curvature3(xs: [f64; 3], fs: [f64; 3]) -> f64 {
    let [x0, x1, x2] = xs;
    2.0 * (fs[0] / ((x0 - x1) * (x0 - x2)) + fs[1] / ((x1 - x0) * (x1 - x2)) + fs[2] / ((x2 - x0) * (x2 - x1)))
}
