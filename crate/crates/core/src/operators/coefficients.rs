use std::f64::consts::PI;

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use super::divform::gradient_matrix;
use super::grid::GridSpec;
use crate::error::{Error, Result};
use crate::C64;

/// Built-in coefficient families. Complex scalars are written `[re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientFamily {
    /// `a = α·I`, `d = δ·I`.
    Constant { a: [f64; 2], d: [f64; 2] },
    /// `a = (1 + a_amplitude·cos x₀)·I`, `d = (1 + amplitude·Π sin x_k)·I`
    /// plus a symmetric real cross-axis coupling when `n = 2`.
    SmoothReal { amplitude: f64, a_amplitude: f64 },
    /// `d = e^{iθ(x)}·I` with `θ = angle·sin(x₀ + x₁)`, `a = e^{i·a_angle·cos x₀}·I`.
    ComplexRotation { angle: f64, a_angle: f64 },
    /// `a = I`, `d = contrast·I` on alternating half-period blocks and `I` elsewhere.
    Checkerboard { contrast: f64 },
}

impl CoefficientFamily {
    /// Constant coefficients `a = d = I` (family T1).
    pub fn t1() -> Self {
        CoefficientFamily::Constant { a: [1.0, 0.0], d: [1.0, 0.0] }
    }

    /// Smooth real coefficients (family T2).
    pub fn t2() -> Self {
        CoefficientFamily::SmoothReal { amplitude: 0.5, a_amplitude: 0.25 }
    }

    /// Complex coefficients (family T3).
    pub fn t3() -> Self {
        CoefficientFamily::ComplexRotation { angle: PI / 3.0, a_angle: 0.3 }
    }

    pub fn label(&self) -> String {
        match self {
            CoefficientFamily::Constant { a, d } => format!("constant(a={:?},d={:?})", a, d),
            CoefficientFamily::SmoothReal { amplitude, a_amplitude } => {
                format!("smooth_real(amp={amplitude},a_amp={a_amplitude})")
            }
            CoefficientFamily::ComplexRotation { angle, a_angle } => {
                format!("complex_rotation(angle={angle:.6},a_angle={a_angle})")
            }
            CoefficientFamily::Checkerboard { contrast } => format!("checkerboard(contrast={contrast})"),
        }
    }

    /// Samples `(a, d)` on the grid: `a` at nodes, `d` at cell centres.
    pub fn sample(&self, grid: &GridSpec) -> (Vec<C64>, Vec<C64>) {
        let (n, m) = (grid.n(), grid.m());
        let nm = n * m;
        let mut a = Vec::with_capacity(grid.cells() * m * m);
        let mut d = Vec::with_capacity(grid.cells() * nm * nm);
        let angle = |x: &[f64], axis: usize| 2.0 * PI * x[axis] / grid.lengths()[axis];
        for cell in 0..grid.cells() {
            let xn = grid.position(cell);
            let xm = grid.midpoint(cell);
            let (a_scalar, d_axes) = match *self {
                CoefficientFamily::Constant { a, d } => {
                    let dv = C64::new(d[0], d[1]);
                    (C64::new(a[0], a[1]), scalar_axes(n, dv))
                }
                CoefficientFamily::SmoothReal { amplitude, a_amplitude } => {
                    let av = 1.0 + a_amplitude * angle(&xn, 0).cos();
                    let prod: f64 = (0..n).map(|k| angle(&xm, k).sin()).product();
                    let diag = 1.0 + amplitude * prod;
                    let mut axes = scalar_axes(n, C64::new(diag, 0.0));
                    if n == 2 {
                        let off = 0.25 * amplitude * angle(&xm, 0).cos() * angle(&xm, 1).cos();
                        axes[1] = C64::new(off, 0.0);
                        axes[2] = C64::new(off, 0.0);
                    }
                    (C64::new(av, 0.0), axes)
                }
                CoefficientFamily::ComplexRotation { angle: th, a_angle } => {
                    let phase_arg: f64 = (0..n).map(|k| angle(&xm, k)).sum();
                    let theta = th * phase_arg.sin();
                    let av = C64::from_polar(1.0, a_angle * angle(&xn, 0).cos());
                    (av, scalar_axes(n, C64::from_polar(1.0, theta)))
                }
                CoefficientFamily::Checkerboard { contrast } => {
                    let parity: usize = (0..n).map(|k| if xm[k] < grid.lengths()[k] / 2.0 { 0 } else { 1 }).sum();
                    let dv = if parity % 2 == 1 { contrast } else { 1.0 };
                    (C64::new(1.0, 0.0), scalar_axes(n, C64::new(dv, 0.0)))
                }
            };
            for i in 0..m {
                for j in 0..m {
                    a.push(if i == j { a_scalar } else { C64::new(0.0, 0.0) });
                }
            }
            // d acts on index axis·m + comp; axis coupling ⊗ I_m.
            for r in 0..nm {
                for c in 0..nm {
                    let (ra, rc) = (r / m, r % m);
                    let (ca, cc) = (c / m, c % m);
                    d.push(if rc == cc { d_axes[ra * n + ca] } else { C64::new(0.0, 0.0) });
                }
            }
        }
        (a, d)
    }
}

fn scalar_axes(n: usize, v: C64) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for k in 0..n {
        out[k * n + k] = v;
    }
    out
}

/// How the Gårding constant was certified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GardingMethod {
    /// Smallest eigenvalue of the compressed Hermitian form on `ran(G)`.
    Spectral,
    /// Pointwise lower bound `min_x λ_min(Re d(x))`, used above the dense size limit.
    PointwiseBound,
}

/// Problems with more unknowns than this fall back to the pointwise Gårding bound.
pub const GARDING_DENSE_LIMIT: usize = 1100;

/// Coefficients `(a, d)` on a grid with their measured ellipticity constants.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    grid: GridSpec,
    a: Vec<C64>,
    a_inv: Vec<C64>,
    d: Vec<C64>,
    pub lambda_a: f64,
    pub lambda_a_inv: f64,
    pub lambda_d: f64,
    pub garding_method: GardingMethod,
    pub warnings: Vec<String>,
}

impl CoefficientField {
    pub fn from_family(grid: &GridSpec, family: &CoefficientFamily) -> Result<Self> {
        let (a, d) = family.sample(grid);
        Self::from_tables(grid, a, d)
    }

    /// Validates tabulated blocks: `a` is `cells·m²`, `d` is `cells·(nm)²`, row-major per cell.
    pub fn from_tables(grid: &GridSpec, a: Vec<C64>, d: Vec<C64>) -> Result<Self> {
        let (m, nm) = (grid.m(), grid.m() * grid.n());
        crate::error::check_len(grid.cells() * m * m, a.len())?;
        crate::error::check_len(grid.cells() * nm * nm, d.len())?;
        if a.iter().chain(d.iter()).any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Coefficients("non-finite coefficient entry".into()));
        }
        let lambda_a = verify_accretivity(&a, m)?;
        let a_inv = a.chunks(m * m).map(|blk| invert_small(blk, m)).collect::<Result<Vec<_>>>()?.concat();
        let lambda_a_inv = verify_accretivity(&a_inv, m)?;
        let garding = verify_garding(grid, &d)?;
        let mut warnings = Vec::new();
        if let Some(w) = garding.warning.clone() {
            log::warn!("{w}");
            warnings.push(w);
        }
        Ok(Self {
            grid: grid.clone(),
            a,
            a_inv,
            d,
            lambda_a,
            lambda_a_inv,
            lambda_d: garding.lambda,
            garding_method: garding.method,
            warnings,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn a(&self) -> &[C64] {
        &self.a
    }

    pub fn a_inv(&self) -> &[C64] {
        &self.a_inv
    }

    pub fn d(&self) -> &[C64] {
        &self.d
    }

    pub fn a_block(&self, cell: usize) -> &[C64] {
        let mm = self.grid.m() * self.grid.m();
        &self.a[cell * mm..(cell + 1) * mm]
    }

    pub fn d_block(&self, cell: usize) -> &[C64] {
        let k = self.grid.m() * self.grid.n();
        &self.d[cell * k * k..(cell + 1) * k * k]
    }

    /// Coefficients of the adjoint equation: `(a^*, d^*)` blockwise.
    pub fn adjoint(&self) -> Result<Self> {
        let m = self.grid.m();
        let nm = m * self.grid.n();
        let a = conj_transpose_blocks(&self.a, m);
        let d = conj_transpose_blocks(&self.d, nm);
        Self::from_tables(&self.grid, a, d)
    }

    /// Same coefficients with `d` multiplied by `factor`.
    pub fn scale_d(&self, factor: f64) -> Result<Self> {
        let d = self.d.iter().map(|v| v * factor).collect();
        Self::from_tables(&self.grid, self.a.clone(), d)
    }

    /// Largest operator norm of `a` over the grid (Frobenius bound).
    pub fn a_max(&self) -> f64 {
        block_frobenius_max(&self.a, self.grid.m())
    }

    pub fn a_inv_max(&self) -> f64 {
        block_frobenius_max(&self.a_inv, self.grid.m())
    }

    pub fn d_max(&self) -> f64 {
        block_frobenius_max(&self.d, self.grid.m() * self.grid.n())
    }
}

fn block_frobenius_max(blocks: &[C64], k: usize) -> f64 {
    blocks.chunks(k * k).map(|b| b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()).fold(0.0, f64::max)
}

fn conj_transpose_blocks(blocks: &[C64], k: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(blocks.len());
    for b in blocks.chunks(k * k) {
        for i in 0..k {
            for j in 0..k {
                out.push(b[j * k + i].conj());
            }
        }
    }
    out
}

/// Inverse of a small row-major `k×k` block.
pub fn invert_small(block: &[C64], k: usize) -> Result<Vec<C64>> {
    if k == 1 {
        if block[0].norm() == 0.0 {
            return Err(Error::Coefficients("singular coefficient block".into()));
        }
        return Ok(vec![block[0].inv()]);
    }
    let m = Mat::from_fn(k, k, |i, j| block[i * k + j]);
    let lu = m.partial_piv_lu();
    use faer::linalg::solvers::DenseSolveCore;
    let inv = lu.inverse();
    let mut out = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let v = inv[(i, j)];
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::Coefficients("singular coefficient block".into()));
            }
            out.push(v);
        }
    }
    Ok(out)
}

/// Smallest eigenvalue of the Hermitian part of a row-major `k×k` block.
pub fn hermitian_part_min(block: &[C64], k: usize) -> f64 {
    if k == 1 {
        return block[0].re;
    }
    let h = Mat::from_fn(k, k, |i, j| (block[i * k + j] + block[j * k + i].conj()) * 0.5);
    h.self_adjoint_eigenvalues(Side::Lower).map(|v| v.into_iter().fold(f64::INFINITY, f64::min)).unwrap_or(f64::NAN)
}

/// Accretivity constant `min_x λ_min((a + a^†)/2)`; rejects the field when ≤ 0.
pub fn verify_accretivity(blocks: &[C64], m: usize) -> Result<f64> {
    let lambda = blocks.chunks(m * m).map(|b| hermitian_part_min(b, m)).fold(f64::INFINITY, f64::min);
    if !(lambda > 0.0) {
        return Err(Error::Coefficients(format!(
            "coefficient a is not strictly accretive (min Hermitian eigenvalue {lambda:.3e})"
        )));
    }
    Ok(lambda)
}

#[derive(Debug, Clone)]
pub struct GardingReport {
    pub lambda: f64,
    pub method: GardingMethod,
    pub warning: Option<String>,
}

/// Discrete Gårding constant of `d` on the range of the forward-difference gradient.
pub fn verify_garding(grid: &GridSpec, d: &[C64]) -> Result<GardingReport> {
    let nm = grid.n() * grid.m();
    crate::error::check_len(grid.cells() * nm * nm, d.len())?;
    let (lambda, method) = if grid.scalar_dim() <= GARDING_DENSE_LIMIT {
        (garding_spectral(grid, d)?, GardingMethod::Spectral)
    } else {
        let bound = d.chunks(nm * nm).map(|b| hermitian_part_min(b, nm)).fold(f64::INFINITY, f64::min);
        (bound, GardingMethod::PointwiseBound)
    };
    if !(lambda > 0.0) {
        return Err(Error::Coefficients(format!(
            "Gårding inequality fails on the discrete gradient range (constant {lambda:.3e})"
        )));
    }
    let warning =
        (lambda < 1e-10).then(|| format!("Gårding constant {lambda:.3e} is nearly degenerate for this discretization"));
    Ok(GardingReport { lambda, method, warning })
}

fn garding_spectral(grid: &GridSpec, d: &[C64]) -> Result<f64> {
    let g = gradient_matrix(grid).to_dense();
    let gtg = g.adjoint() * &g;
    let evd = gtg
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigensolve of G^†G failed: {e:?}")))?;
    let s: Vec<f64> = evd.S().column_vector().iter().map(|v| v.re).collect();
    let u = evd.U();
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > 1e-10 * smax).collect();
    let vplus = Mat::from_fn(u.nrows(), keep.len(), |i, j| u[(i, keep[j])] / s[keep[j]].sqrt());
    let w = &g * &vplus;
    let nm = grid.n() * grid.m();
    let gd = g.nrows();
    // Hermitian part of the block-diagonal d applied to W.
    let mut hw = Mat::<C64>::zeros(gd, w.ncols());
    for cell in 0..grid.cells() {
        let blk = &d[cell * nm * nm..(cell + 1) * nm * nm];
        for r in 0..nm {
            for c in 0..nm {
                let h = (blk[r * nm + c] + blk[c * nm + r].conj()) * 0.5;
                if h == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..w.ncols() {
                    let add = h * w[(cell * nm + c, j)];
                    hw[(cell * nm + r, j)] += add;
                }
            }
        }
    }
    let compressed = w.adjoint() * &hw;
    let ev = compressed
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("compressed Gårding eigensolve failed: {e:?}")))?;
    Ok(ev.into_iter().fold(f64::INFINITY, f64::min))
}
