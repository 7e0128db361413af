//! Holomorphic functional calculus for `L` and `(DB)²` by contour quadrature,
//! with a dense eigendecomposition oracle.

mod auxiliary;
mod contour;
mod functional;
mod oracle;

use std::f64::consts::PI;

use faer::{Mat, Side};

pub use auxiliary::AuxiliaryFunction;
pub use contour::{contour_family, radial_window, Contour, QuadratureReport, ResolventBank, DEFAULT_TOL};
pub use functional::{
    apply_psi, apply_psi_family, dirac_first_order, dirac_semigroup, dirac_semigroup_family, estimate_sector,
    intertwining_residual, inv_sqrt_apply, inv_sqrt_apply_many, link_residual, poisson_family, poisson_semigroup,
    resolvent, riesz_transform, sqrt_apply, sqrt_apply_many, SectorMethod, SectorialProfile, SECTOR_EIGEN_LIMIT,
};
pub use oracle::{EigenOracle, ORACLE_MAX_DIM};

use crate::error::Result;
use crate::linalg::CsrMatrix;
use crate::operators::{DiracOperator, DivFormOperator};
use crate::C64;

/// Cheap a-priori spectral information used to place contours.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    /// Lower bound (with safety margin) on `|λ|` for nonzero eigenvalues.
    pub lower: f64,
    /// Upper bound on `|λ|`.
    pub upper: f64,
    /// Rigorous upper bound on `max |arg λ|`.
    pub angle: f64,
}

/// An operator whose spectrum lies in a sector `|arg z| ≤ ω < π`, with an
/// explicitly tracked nullspace.
pub trait SectorialOperator: Sync {
    fn dim(&self) -> usize;

    fn matrix(&self) -> &CsrMatrix;

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.matrix().matvec(x)
    }

    /// `(nullspace part, range part)`.
    fn split_null(&self, f: &[C64]) -> (Vec<C64>, Vec<C64>);

    fn project_range(&self, f: &[C64]) -> Vec<C64> {
        self.split_null(f).1
    }

    fn spectral_bounds(&self) -> SpectralBounds;

    /// Inverse on the range. Not every operator provides one.
    fn solve_on_range(&self, _r: &[C64]) -> Result<Vec<C64>> {
        Err(crate::Error::Precondition("inverse on the range is not available for this operator".into()))
    }
}

/// Largest spectral norm of row-major `k×k` blocks.
pub(crate) fn block_norm_max(blocks: &[C64], k: usize) -> f64 {
    blocks
        .chunks(k * k)
        .map(|b| {
            if k == 1 {
                return b[0].norm();
            }
            let m = Mat::from_fn(k, k, |i, j| b[i * k + j]);
            let g = m.adjoint() * &m;
            g.self_adjoint_eigenvalues(Side::Lower)
                .map(|v| v.into_iter().fold(0.0, f64::max).sqrt())
                .unwrap_or(f64::INFINITY)
        })
        .fold(0.0, f64::max)
}

/// Largest spectral norm of the skew-Hermitian parts `(b − b^†)/2` of the blocks.
pub(crate) fn block_skew_norm_max(blocks: &[C64], k: usize) -> f64 {
    let skew: Vec<C64> = blocks
        .chunks(k * k)
        .flat_map(|b| {
            (0..k * k).map(move |idx| {
                let (i, j) = (idx / k, idx % k);
                (b[i * k + j] - b[j * k + i].conj()) * 0.5
            })
        })
        .collect();
    block_norm_max(&skew, k)
}

fn divform_bounds(op: &DivFormOperator) -> SpectralBounds {
    let c = op.coeffs();
    let grid = op.grid();
    let (m, nm) = (grid.m(), grid.m() * grid.n());
    let a_norm = block_norm_max(c.a(), m);
    let a_inv_norm = block_norm_max(c.a_inv(), m);
    let d_norm = block_norm_max(c.d(), nm);
    // |arg⟨bξ, ξ⟩| ≤ atan(‖skew part‖ / accretivity constant) for both forms.
    let arg_d = (block_skew_norm_max(c.d(), nm) / c.lambda_d).atan();
    let arg_a = (block_skew_norm_max(c.a(), m) / c.lambda_a).atan();
    SpectralBounds {
        lower: 0.01 * c.lambda_d * grid.laplace_gap() / a_norm,
        upper: d_norm * grid.laplace_max() * a_inv_norm,
        angle: (arg_d + arg_a).min(PI - 0.05),
    }
}

impl SectorialOperator for DivFormOperator {
    fn dim(&self) -> usize {
        DivFormOperator::dim(self)
    }

    fn matrix(&self) -> &CsrMatrix {
        DivFormOperator::matrix(self)
    }

    fn split_null(&self, f: &[C64]) -> (Vec<C64>, Vec<C64>) {
        self.split_nullspace(f)
    }

    fn spectral_bounds(&self) -> SpectralBounds {
        divform_bounds(self)
    }

    fn solve_on_range(&self, r: &[C64]) -> Result<Vec<C64>> {
        DivFormOperator::solve_on_range(self, r)
    }
}

/// `(DB)²` viewed as a sectorial operator on `ran(D)`.
///
/// The nonzero spectrum of both diagonal blocks coincides with that of `L`,
/// so the contour bounds are inherited. The null split is the orthogonal
/// projection onto `ran(D)`, which agrees with the spectral one on `ran(D)`.
#[derive(Debug, Clone, Copy)]
pub struct DiracSquare<'a> {
    pub dirac: &'a DiracOperator,
}

impl<'a> DiracSquare<'a> {
    pub fn new(dirac: &'a DiracOperator) -> Self {
        Self { dirac }
    }
}

impl SectorialOperator for DiracSquare<'_> {
    fn dim(&self) -> usize {
        self.dirac.dim()
    }

    fn matrix(&self) -> &CsrMatrix {
        self.dirac.squared_matrix()
    }

    fn split_null(&self, f: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let r = self.dirac.project_range(f);
        let k = f.iter().zip(&r).map(|(a, b)| a - b).collect();
        (k, r)
    }

    fn spectral_bounds(&self) -> SpectralBounds {
        divform_bounds(self.dirac.divform())
    }
}
