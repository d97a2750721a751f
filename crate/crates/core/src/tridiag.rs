//! Prefactored solver for the constant-coefficient cyclic tridiagonal systems of the ring march.

/// `diag` on the main diagonal, `off` on both off-diagonals and in the two
/// wrap-around corners. Solved by Thomas elimination on a corner-corrected
/// tridiagonal matrix plus one Sherman–Morrison update.
#[derive(Debug, Clone)]
pub(crate) struct CyclicTridiag {
    off: f64,
    // Thomas factors of the corrected matrix B: modified super-diagonal and pivots.
    gam: Vec<f64>,
    inv_piv: Vec<f64>,
    // B⁻¹u and the Sherman–Morrison denominator pieces.
    z: Vec<f64>,
    v_last: f64,
    denom: f64,
}

impl CyclicTridiag {
    /// Needs `n ≥ 3` and a diagonally dominant matrix (`|diag| > 2|off|`).
    pub(crate) fn new(n: usize, diag: f64, off: f64) -> Self {
        assert!(n >= 3, "cyclic system needs at least 3 unknowns");
        // A = B + u·vᵀ with u = (γ, 0, …, 0, off), v = (1, 0, …, 0, off/γ).
        let gamma = -diag;
        let mut b_diag = vec![diag; n];
        b_diag[0] -= gamma;
        b_diag[n - 1] -= off * off / gamma;

        let mut gam = vec![0.0; n];
        let mut inv_piv = vec![0.0; n];
        inv_piv[0] = 1.0 / b_diag[0];
        for j in 1..n {
            gam[j] = off * inv_piv[j - 1];
            inv_piv[j] = 1.0 / (b_diag[j] - off * gam[j]);
        }

        let mut solver = CyclicTridiag { off, gam, inv_piv, z: vec![0.0; n], v_last: off / gamma, denom: 0.0 };
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = off;
        solver.thomas(&mut u);
        solver.denom = 1.0 + u[0] + solver.v_last * u[n - 1];
        solver.z = u;
        solver
    }

    fn thomas(&self, r: &mut [f64]) {
        let n = r.len();
        r[0] *= self.inv_piv[0];
        for j in 1..n {
            r[j] = (r[j] - self.off * r[j - 1]) * self.inv_piv[j];
        }
        for j in (0..n - 1).rev() {
            r[j] -= self.gam[j + 1] * r[j + 1];
        }
    }

    /// Overwrites `rhs` with the solution.
    pub(crate) fn solve_in_place(&self, rhs: &mut [f64]) {
        debug_assert_eq!(rhs.len(), self.z.len());
        self.thomas(rhs);
        let n = rhs.len();
        let factor = (rhs[0] + self.v_last * rhs[n - 1]) / self.denom;
        for (x, z) in rhs.iter_mut().zip(&self.z) {
            *x -= factor * z;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply(diag: f64, off: f64, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n).map(|i| diag * x[i] + off * (x[(i + n - 1) % n] + x[(i + 1) % n])).collect()
    }

    #[test]
    fn solves_cyclic_systems() {
        for n in [3, 4, 17, 400] {
            let (diag, off) = (1.0 + 2.0 * 37.5, -37.5);
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() + 2.0).collect();
            let mut r = apply(diag, off, &x);
            CyclicTridiag::new(n, diag, off).solve_in_place(&mut r);
            for (a, b) in r.iter().zip(&x) {
                assert!((a - b).abs() < 1e-10, "n={n}: {a} vs {b}");
            }
        }
    }
}
