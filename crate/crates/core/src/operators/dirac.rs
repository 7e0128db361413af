use super::coefficients::CoefficientField;
use super::divform::DivFormOperator;
use super::grid::GridSpec;
use crate::error::{check_len, Result};
use crate::fft;
use crate::linalg::CsrMatrix;
use crate::C64;

/// The first-order pair `D = [[0, div], [−∇, 0]]`, `B = diag(a⁻¹, d)` acting
/// on `[scalar block, gradient block]` fields.
#[derive(Debug, Clone)]
pub struct DiracOperator {
    grid: GridSpec,
    d_op: CsrMatrix,
    b_op: CsrMatrix,
    db: CsrMatrix,
    squared: CsrMatrix,
    upper: CsrMatrix,
    lower: CsrMatrix,
    divform: DivFormOperator,
}

impl DiracOperator {
    pub fn assemble(coeffs: &CoefficientField) -> Result<Self> {
        let divform = DivFormOperator::assemble(coeffs)?;
        Self::from_divform(divform)
    }

    pub fn from_divform(divform: DivFormOperator) -> Result<Self> {
        let grid = divform.grid().clone();
        let (s, g) = (grid.scalar_dim(), grid.gradient_dim());
        let neg = C64::new(-1.0, 0.0);
        let grad = divform.gradient_matrix();
        let div = divform.divergence_matrix();
        let minus_grad = grad.scale(neg);
        let d_op = CsrMatrix::from_blocks((s, g), (s, g), [None, Some(div), Some(&minus_grad), None]);
        let b_op = divform.a_inv_matrix().direct_sum(divform.d_matrix());
        check_len(s + g, b_op.nrows())?;
        let db = d_op.mul(&b_op);
        let squared = db.mul(&db);
        let div_d = div.mul(divform.d_matrix());
        let grad_ainv = grad.mul(divform.a_inv_matrix());
        let upper = div_d.mul(&grad_ainv).scale(neg);
        let lower = grad_ainv.mul(&div_d).scale(neg);
        Ok(Self { grid, d_op, b_op, db, squared, upper, lower, divform })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn divform(&self) -> &DivFormOperator {
        &self.divform
    }

    pub fn dim(&self) -> usize {
        self.grid.dirac_dim()
    }

    pub fn d_matrix(&self) -> &CsrMatrix {
        &self.d_op
    }

    pub fn b_matrix(&self) -> &CsrMatrix {
        &self.b_op
    }

    pub fn db_matrix(&self) -> &CsrMatrix {
        &self.db
    }

    /// `(DB)²` assembled as a product.
    pub fn squared_matrix(&self) -> &CsrMatrix {
        &self.squared
    }

    /// `−div d ∇ a⁻¹`, the scalar diagonal block of `(DB)²`.
    pub fn upper_block(&self) -> &CsrMatrix {
        &self.upper
    }

    /// `M̃ = −∇ a⁻¹ div d`, the gradient diagonal block of `(DB)²`.
    pub fn lower_block(&self) -> &CsrMatrix {
        &self.lower
    }

    /// The block-diagonal matrix `diag(upper, lower)` assembled independently of `(DB)²`.
    pub fn block_diagonal_square(&self) -> CsrMatrix {
        self.upper.direct_sum(&self.lower)
    }

    pub fn apply_db(&self, h: &[C64]) -> Vec<C64> {
        self.db.matvec(h)
    }

    /// Splits a Dirac field into its scalar and gradient blocks.
    pub fn split<'a>(&self, h: &'a [C64]) -> (&'a [C64], &'a [C64]) {
        h.split_at(self.grid.scalar_dim())
    }

    pub fn join(&self, scalar: &[C64], gradient: &[C64]) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.dim());
        out.extend_from_slice(scalar);
        out.extend_from_slice(gradient);
        out
    }

    /// Orthogonal projection onto `ran(D) = (mean-zero scalars) ⊕ ran(∇)`.
    /// The gradient part is projected mode by mode onto the symbol of `∇`.
    pub fn project_range(&self, h: &[C64]) -> Vec<C64> {
        let grid = &self.grid;
        let (m, n) = (grid.m(), grid.n());
        let (scalar, gradient) = self.split(h);
        let cells = grid.cells();

        let mut s = scalar.to_vec();
        for comp in 0..m {
            let mean: C64 = s.iter().skip(comp).step_by(m).sum::<C64>() / cells as f64;
            s.iter_mut().skip(comp).step_by(m).for_each(|v| *v -= mean);
        }

        let width = n * m;
        let mut w = gradient.to_vec();
        fft::transform(grid, &mut w, width, false);
        for cell in 0..cells {
            let c = grid.coords(cell);
            let sym: Vec<C64> = (0..n)
                .map(|axis| {
                    let theta = 2.0 * std::f64::consts::PI * c[axis] as f64 / grid.points() as f64;
                    (C64::from_polar(1.0, theta) - 1.0) / grid.spacing()[axis]
                })
                .collect();
            let norm2: f64 = sym.iter().map(|v| v.norm_sqr()).sum();
            for comp in 0..m {
                let base = cell * width;
                if norm2 == 0.0 {
                    for axis in 0..n {
                        w[base + axis * m + comp] = C64::new(0.0, 0.0);
                    }
                    continue;
                }
                let proj: C64 = (0..n).map(|axis| sym[axis].conj() * w[base + axis * m + comp]).sum::<C64>() / norm2;
                for axis in 0..n {
                    w[base + axis * m + comp] = sym[axis] * proj;
                }
            }
        }
        fft::transform(grid, &mut w, width, true);
        self.join(&s, &w)
    }
}
