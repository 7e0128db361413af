use std::sync::OnceLock;

use super::coefficients::{invert_small, CoefficientField};
use super::grid::GridSpec;
use crate::error::{check_len, Result};
use crate::linalg::{CsrMatrix, SparseLu};
use crate::C64;

/// Forward-difference gradient `G: ℂ^{m·cells} → ℂ^{mn·cells}` as a sparse matrix.
pub fn gradient_matrix(grid: &GridSpec) -> CsrMatrix {
    let (n, m) = (grid.n(), grid.m());
    let mut trip = Vec::with_capacity(grid.gradient_dim() * 2);
    for cell in 0..grid.cells() {
        for axis in 0..n {
            let h = grid.spacing()[axis];
            let next = grid.shift(cell, axis, 1);
            for comp in 0..m {
                let row = cell * n * m + axis * m + comp;
                trip.push((row, next * m + comp, C64::new(1.0 / h, 0.0)));
                trip.push((row, cell * m + comp, C64::new(-1.0 / h, 0.0)));
            }
        }
    }
    CsrMatrix::from_triplets(grid.gradient_dim(), grid.scalar_dim(), trip)
}

/// Matrix-free forward-difference gradient.
pub fn gradient(grid: &GridSpec, u: &[C64]) -> Vec<C64> {
    let (n, m) = (grid.n(), grid.m());
    let mut out = vec![C64::new(0.0, 0.0); grid.gradient_dim()];
    for cell in 0..grid.cells() {
        for axis in 0..n {
            let inv_h = 1.0 / grid.spacing()[axis];
            let next = grid.shift(cell, axis, 1);
            for comp in 0..m {
                out[cell * n * m + axis * m + comp] = (u[next * m + comp] - u[cell * m + comp]) * inv_h;
            }
        }
    }
    out
}

/// Matrix-free backward-difference divergence, the exact negative adjoint of [`gradient`].
pub fn divergence(grid: &GridSpec, w: &[C64]) -> Vec<C64> {
    let (n, m) = (grid.n(), grid.m());
    let mut out = vec![C64::new(0.0, 0.0); grid.scalar_dim()];
    for cell in 0..grid.cells() {
        for axis in 0..n {
            let inv_h = 1.0 / grid.spacing()[axis];
            let prev = grid.shift(cell, axis, -1);
            for comp in 0..m {
                out[cell * m + comp] += (w[cell * n * m + axis * m + comp] - w[prev * n * m + axis * m + comp]) * inv_h;
            }
        }
    }
    out
}

/// Applies a block-diagonal field of row-major `k×k` blocks.
pub fn apply_blocks(blocks: &[C64], k: usize, x: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); x.len()];
    for (cell, blk) in blocks.chunks(k * k).enumerate() {
        for r in 0..k {
            let mut s = C64::new(0.0, 0.0);
            for c in 0..k {
                s += blk[r * k + c] * x[cell * k + c];
            }
            out[cell * k + r] = s;
        }
    }
    out
}

/// The divergence-form operator `L = −a⁻¹ div(d ∇)` on the periodic grid.
#[derive(Debug, Clone)]
pub struct DivFormOperator {
    grid: GridSpec,
    coeffs: CoefficientField,
    gradient: CsrMatrix,
    divergence: CsrMatrix,
    a_mat: CsrMatrix,
    a_inv_mat: CsrMatrix,
    d_mat: CsrMatrix,
    matrix: CsrMatrix,
    /// `(Σ_x a(x))⁻¹`, used by the spectral projection onto the nullspace.
    a_sum_inv: Vec<C64>,
    /// Factored bordered system for inverting `L` on its range.
    range_solver: OnceLock<SparseLu>,
}

impl DivFormOperator {
    pub fn assemble(coeffs: &CoefficientField) -> Result<Self> {
        let grid = coeffs.grid().clone();
        let (m, nm) = (grid.m(), grid.m() * grid.n());
        check_len(grid.cells() * m * m, coeffs.a().len())?;
        check_len(grid.cells() * nm * nm, coeffs.d().len())?;
        let gradient = gradient_matrix(&grid);
        let divergence = gradient.adjoint().scale(C64::new(-1.0, 0.0));
        let split = |blocks: &[C64], k: usize| -> Vec<Vec<C64>> { blocks.chunks(k * k).map(|b| b.to_vec()).collect() };
        let a_mat = CsrMatrix::block_diagonal(m, &split(coeffs.a(), m));
        let a_inv_mat = CsrMatrix::block_diagonal(m, &split(coeffs.a_inv(), m));
        let d_mat = CsrMatrix::block_diagonal(nm, &split(coeffs.d(), nm));
        let matrix = a_inv_mat.mul(&divergence.mul(&d_mat.mul(&gradient))).scale(C64::new(-1.0, 0.0));
        let mut a_sum = vec![C64::new(0.0, 0.0); m * m];
        for blk in coeffs.a().chunks(m * m) {
            for (s, v) in a_sum.iter_mut().zip(blk) {
                *s += v;
            }
        }
        let a_sum_inv = invert_small(&a_sum, m)?;
        Ok(Self {
            grid,
            coeffs: coeffs.clone(),
            gradient,
            divergence,
            a_mat,
            a_inv_mat,
            d_mat,
            matrix,
            a_sum_inv,
            range_solver: OnceLock::new(),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &CoefficientField {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.grid.scalar_dim()
    }

    /// Assembled sparse form of `L`.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn gradient_matrix(&self) -> &CsrMatrix {
        &self.gradient
    }

    pub fn divergence_matrix(&self) -> &CsrMatrix {
        &self.divergence
    }

    pub fn a_matrix(&self) -> &CsrMatrix {
        &self.a_mat
    }

    pub fn a_inv_matrix(&self) -> &CsrMatrix {
        &self.a_inv_mat
    }

    pub fn d_matrix(&self) -> &CsrMatrix {
        &self.d_mat
    }

    pub fn gradient(&self, u: &[C64]) -> Vec<C64> {
        gradient(&self.grid, u)
    }

    pub fn divergence(&self, w: &[C64]) -> Vec<C64> {
        divergence(&self.grid, w)
    }

    pub fn mul_a(&self, u: &[C64]) -> Vec<C64> {
        apply_blocks(self.coeffs.a(), self.grid.m(), u)
    }

    pub fn mul_a_inv(&self, u: &[C64]) -> Vec<C64> {
        apply_blocks(self.coeffs.a_inv(), self.grid.m(), u)
    }

    pub fn mul_d(&self, w: &[C64]) -> Vec<C64> {
        apply_blocks(self.coeffs.d(), self.grid.m() * self.grid.n(), w)
    }

    /// `div(d ∇u)`, matrix-free.
    pub fn div_d_grad(&self, u: &[C64]) -> Vec<C64> {
        self.divergence(&self.mul_d(&self.gradient(u)))
    }

    /// Matrix-free `L u = −a⁻¹ div(d ∇u)`.
    pub fn apply(&self, u: &[C64]) -> Vec<C64> {
        self.mul_a_inv(&self.div_d_grad(u)).into_iter().map(|v| -v).collect()
    }

    /// `L^† u` through the assembled adjoint.
    pub fn apply_adjoint(&self, u: &[C64]) -> Vec<C64> {
        self.matrix.adjoint().matvec(u)
    }

    /// Orthonormal basis of the nullspace (constants, one per component).
    pub fn nullspace_basis(&self) -> Vec<Vec<C64>> {
        let m = self.grid.m();
        let s = 1.0 / (self.grid.cells() as f64).sqrt();
        (0..m)
            .map(|comp| {
                let mut v = vec![C64::new(0.0, 0.0); self.dim()];
                for cell in 0..self.grid.cells() {
                    v[cell * m + comp] = C64::new(s, 0.0);
                }
                v
            })
            .collect()
    }

    /// The constant `c` with `Σ_x a(x)(f(x) − c) = 0`: the component of `f`
    /// in `ker L` along `ran L`.
    pub fn null_component(&self, f: &[C64]) -> Vec<C64> {
        let m = self.grid.m();
        let af = self.mul_a(f);
        let mut sum = vec![C64::new(0.0, 0.0); m];
        for cell in 0..self.grid.cells() {
            for c in 0..m {
                sum[c] += af[cell * m + c];
            }
        }
        let mut constant = vec![C64::new(0.0, 0.0); m];
        for r in 0..m {
            for c in 0..m {
                constant[r] += self.a_sum_inv[r * m + c] * sum[c];
            }
        }
        constant
    }

    /// Splits `f = c + r` with `c ∈ ker L` constant and `r ∈ ran L`.
    pub fn split_nullspace(&self, f: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let m = self.grid.m();
        let c = self.null_component(f);
        let null: Vec<C64> = (0..f.len()).map(|i| c[i % m]).collect();
        let range = f.iter().zip(&null).map(|(a, b)| a - b).collect();
        (null, range)
    }

    /// Projects `f` onto `ran L` (the "mean-zero" part in the `a`-weighted sense).
    pub fn project_range(&self, f: &[C64]) -> Vec<C64> {
        self.split_nullspace(f).1
    }

    /// The unique `u ∈ ran L` with `L u = r`, for `r ∈ ran L`.
    ///
    /// Solves the bordered system `[[L, E], [W, 0]]` where the columns of `E`
    /// span the constants and `W u = Σ_x a(x) u(x)`.
    pub fn solve_on_range(&self, r: &[C64]) -> Result<Vec<C64>> {
        check_len(self.dim(), r.len())?;
        let lu = match self.range_solver.get() {
            Some(lu) => lu,
            None => {
                let lu = SparseLu::new(&self.bordered_matrix())?;
                self.range_solver.get_or_init(|| lu)
            }
        };
        let mut rhs = r.to_vec();
        rhs.extend(std::iter::repeat(C64::new(0.0, 0.0)).take(self.grid.m()));
        let mut u = lu.solve_vec(&rhs)?;
        u.truncate(self.dim());
        Ok(u)
    }

    fn bordered_matrix(&self) -> CsrMatrix {
        let (m, dim) = (self.grid.m(), self.dim());
        let mut trip = self.matrix.triplets();
        let one = C64::new(1.0, 0.0);
        for cell in 0..self.grid.cells() {
            let blk = self.coeffs.a_block(cell);
            for r in 0..m {
                trip.push((cell * m + r, dim + r, one));
                for c in 0..m {
                    trip.push((dim + r, cell * m + c, blk[r * m + c]));
                }
            }
        }
        CsrMatrix::from_triplets(dim + m, dim + m, trip)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::plane_wave;
    use crate::linalg::{dot, norm2, random_vector, rel_diff};
    use crate::operators::CoefficientFamily;
    use std::f64::consts::PI;

    fn op(n: usize, m: usize, pts: usize, fam: CoefficientFamily) -> DivFormOperator {
        let lens = vec![2.0 * PI; n];
        let g = GridSpec::new(n, m, pts, &lens).unwrap();
        DivFormOperator::assemble(&CoefficientField::from_family(&g, &fam).unwrap()).unwrap()
    }

    #[test]
    fn fourier_mode_has_discrete_symbol() {
        let l = op(1, 1, 32, CoefficientFamily::t1());
        let h = l.grid().spacing()[0];
        for k in [1i64, 3, 7] {
            let f = plane_wave(l.grid(), [k, 0], &[C64::new(1.0, 0.0)]);
            let s = 4.0 * (k as f64 * h / 2.0).sin().powi(2) / (h * h);
            let lf = l.apply(&f);
            let expect: Vec<C64> = f.iter().map(|v| v * s).collect();
            assert!(rel_diff(&lf, &expect) < 1e-12);
        }
    }

    #[test]
    fn constants_are_annihilated() {
        for fam in [CoefficientFamily::t1(), CoefficientFamily::t2(), CoefficientFamily::t3()] {
            let l = op(2, 2, 8, fam);
            let ones = vec![C64::new(1.0, 0.0); l.dim()];
            assert!(norm2(&l.apply(&ones)) < 1e-12);
        }
    }

    #[test]
    fn divergence_is_negative_adjoint_of_gradient() {
        let l = op(2, 2, 8, CoefficientFamily::t3());
        let f = random_vector(l.dim(), 1);
        let g = random_vector(l.grid().gradient_dim(), 2);
        let lhs = dot(&g, &l.gradient(&f));
        let rhs = -dot(&l.divergence(&g), &f);
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));
        let dm = l.divergence_matrix().matvec(&g);
        assert!(rel_diff(&dm, &l.divergence(&g)) < 1e-14);
    }

    #[test]
    fn assembled_matches_matrix_free() {
        for fam in [CoefficientFamily::t2(), CoefficientFamily::t3(), CoefficientFamily::Checkerboard { contrast: 4.0 }]
        {
            let l = op(2, 1, 8, fam);
            let f = random_vector(l.dim(), 9);
            assert!(rel_diff(&l.matrix().matvec(&f), &l.apply(&f)) < 1e-13);
        }
    }

    #[test]
    fn a_weighted_form_is_accretive() {
        for fam in [CoefficientFamily::t1(), CoefficientFamily::t2(), CoefficientFamily::t3()] {
            let l = op(1, 1, 32, fam);
            for seed in 0..5 {
                let f = random_vector(l.dim(), seed);
                let form = dot(&f, &l.mul_a(&l.apply(&f)));
                assert!(form.re >= -1e-12 * norm2(&f).powi(2));
            }
        }
    }

    #[test]
    fn range_inverse_solves_and_stays_in_range() {
        for fam in [CoefficientFamily::t2(), CoefficientFamily::t3()] {
            let l = op(2, 2, 8, fam);
            let r = l.apply(&random_vector(l.dim(), 11));
            let u = l.solve_on_range(&r).unwrap();
            assert!(rel_diff(&l.apply(&u), &r) < 1e-11);
            assert!(rel_diff(&l.project_range(&u), &u) < 1e-12);
        }
    }

    #[test]
    fn null_split_lands_in_range() {
        let l = op(1, 2, 16, CoefficientFamily::t3());
        let f = random_vector(l.dim(), 4);
        let (c, r) = l.split_nullspace(&f);
        assert!(norm2(&l.apply(&c)) < 1e-12);
        let ar = l.mul_a(&r);
        for comp in 0..2 {
            let s: C64 = ar.iter().skip(comp).step_by(2).sum();
            assert!(s.norm() < 1e-12);
        }
    }
}
