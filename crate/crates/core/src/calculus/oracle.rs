use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{col_to_vec, init_determinism, vec_to_col, CsrMatrix};
use crate::C64;

/// Largest dimension accepted by the dense oracle.
pub const ORACLE_MAX_DIM: usize = 4096;

/// Dense eigendecomposition `A = V Λ V⁻¹`, evaluating `ψ(A) = V ψ(Λ) V⁻¹`.
pub struct EigenOracle {
    values: Vec<C64>,
    v: Mat<C64>,
    v_inv: Mat<C64>,
    null_tol: f64,
    /// `‖V‖_F ‖V⁻¹‖_F`.
    pub condition: f64,
    /// Set when the eigenbasis is too ill-conditioned for the results to be trusted.
    pub ill_conditioned: bool,
}

impl EigenOracle {
    pub fn new(matrix: &CsrMatrix) -> Result<Self> {
        let dim = matrix.nrows();
        if dim > ORACLE_MAX_DIM {
            return Err(Error::Precondition(format!("oracle limited to dimension {ORACLE_MAX_DIM}, got {dim}")));
        }
        init_determinism();
        let dense = matrix.to_dense();
        let evd = dense.eigen().map_err(|e| Error::Numerical(format!("dense eigensolve failed: {e:?}")))?;
        let values: Vec<C64> = evd.S().column_vector().iter().copied().collect();
        let v = evd.U().to_owned();
        let lu = v.partial_piv_lu();
        let v_inv = lu.solve(Mat::<C64>::identity(dim, dim).as_ref());
        let condition = v.norm_l2() * v_inv.norm_l2();
        let scale = values.iter().map(|l| l.norm()).fold(0.0, f64::max);
        let ill_conditioned = !(condition < 1e8);
        if ill_conditioned {
            log::warn!("eigenbasis condition {condition:.3e}: oracle results are unreliable");
        }
        Ok(Self { values, v, v_inv, null_tol: 1e-9 * scale.max(1e-300), condition, ill_conditioned })
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.values
    }

    pub fn is_null(&self, lambda: C64) -> bool {
        lambda.norm() < self.null_tol
    }

    /// `V ψ(Λ) V⁻¹ f`; null eigenvalues map to `at_zero` (or zero when `None`).
    pub fn apply<F: Fn(C64) -> C64>(&self, psi: F, at_zero: Option<C64>, f: &[C64]) -> Vec<C64> {
        let coeff = &self.v_inv * vec_to_col(f);
        let scaled = Mat::from_fn(self.values.len(), 1, |i, _| {
            let l = self.values[i];
            let w = if self.is_null(l) { at_zero.unwrap_or(C64::new(0.0, 0.0)) } else { psi(l) };
            w * coeff[(i, 0)]
        });
        col_to_vec((&self.v * scaled).as_ref(), 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_vector, rel_diff};

    #[test]
    fn reproduces_the_matrix() {
        let n = 12;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, C64::new(2.0 + i as f64, 0.1)));
            trip.push((i, (i + 1) % n, C64::new(-0.5, 0.2)));
        }
        let a = CsrMatrix::from_triplets(n, n, trip);
        let o = EigenOracle::new(&a).unwrap();
        let f = random_vector(n, 3);
        let af = o.apply(|z| z, None, &f);
        assert!(rel_diff(&af, &a.matvec(&f)) < 1e-12);
        assert!(!o.ill_conditioned);
    }
}
