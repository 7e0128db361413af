use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, Scale};
use serde::{Deserialize, Serialize};

use super::bvp::BvpSolution;
use crate::calculus::poisson_family;
use crate::error::{check_len, Error, Result};
use crate::linalg::{col_to_vec, init_determinism, norm2, vec_to_col, SparseLu};
use crate::operators::DivFormOperator;
use crate::C64;

/// Largest spatial dimension accepted by the energy oracle.
pub const ENERGY_MAX_DIM: usize = 1024;

/// Closure of the strip at `t = T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopCondition {
    /// `∂_t u + L^{1/2} u = 0`, exact for decaying solutions.
    Robin,
    /// `u(T) = 0`.
    Dirichlet,
}

/// Direct solution of `∂_t(a∂_t u) + div(d∇u) = 0` on `[0, T] × torus`,
/// Chebyshev collocation in `t` and the finite-difference operator in `x`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergySolution {
    pub height: f64,
    pub top: TopCondition,
    /// Chebyshev nodes in `t`, from `0` to `T`.
    pub nodes: Vec<f64>,
    pub values: Vec<Vec<C64>>,
    /// Relative residual of the assembled collocation system.
    pub residual: f64,
}

/// Chebyshev differentiation matrix on `t_i = T(1 − cos(πi/N))/2`.
pub fn chebyshev_matrix(nt: usize, height: f64) -> (Vec<f64>, Mat<f64>) {
    let x: Vec<f64> = (0..=nt).map(|i| (std::f64::consts::PI * i as f64 / nt as f64).cos()).collect();
    let c = |i: usize| -> f64 {
        let s = if i == 0 || i == nt { 2.0 } else { 1.0 };
        if i % 2 == 0 {
            s
        } else {
            -s
        }
    };
    let mut d = Mat::<f64>::zeros(nt + 1, nt + 1);
    for i in 0..=nt {
        for j in 0..=nt {
            if i != j {
                d[(i, j)] = c(i) / c(j) / (x[i] - x[j]);
            }
        }
        let row: f64 = (0..=nt).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -row;
    }
    // t = T(1 − x)/2, so d/dt = −(2/T) d/dx.
    let scale = -2.0 / height;
    let d = Mat::from_fn(nt + 1, nt + 1, |i, j| scale * d[(i, j)]);
    let t = x.iter().map(|xi| height * (1.0 - xi) / 2.0).collect();
    (t, d)
}

/// Dense `L^{1/2}` by the Denman–Beavers iteration on `L + P`, with `P`
/// the spectral projector onto the constants, so that
/// `(L + P)^{1/2} = L^{1/2} + P`. Independent of the contour quadrature and
/// indifferent to the conditioning of the eigenbasis.
pub fn dense_sqrt(op: &DivFormOperator) -> Result<Mat<C64>> {
    if op.dim() > ENERGY_MAX_DIM {
        return Err(Error::Precondition(format!("dense square root limited to dimension {ENERGY_MAX_DIM}")));
    }
    let n = op.dim();
    let one = C64::new(1.0, 0.0);
    let null_cols: Vec<Vec<C64>> = (0..n)
        .map(|j| {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[j] = one;
            op.split_nullspace(&e).0
        })
        .collect();
    let p = Mat::from_fn(n, n, |i, j| null_cols[j][i]);
    let l = op.matrix().to_dense();
    let mut y = Mat::from_fn(n, n, |i, j| l[(i, j)] + p[(i, j)]);
    let mut z = Mat::<C64>::identity(n, n);
    let half = Scale(C64::new(0.5, 0.0));
    for _ in 0..DB_MAX_ITER {
        let y_inv = y.partial_piv_lu().inverse();
        let z_inv = z.partial_piv_lu().inverse();
        let y_next = half * (&y + &z_inv);
        z = half * (&z + &y_inv);
        let change = (&y_next - &y).norm_l2() / y_next.norm_l2();
        y = y_next;
        if !change.is_finite() {
            break;
        }
        if change < DB_TOL {
            return Ok(&y - &p);
        }
    }
    Err(Error::Numerical("matrix square root iteration did not converge".into()))
}

const DB_MAX_ITER: usize = 100;
const DB_TOL: f64 = 1e-14;

/// Solves the strip problem with `u(0) = f` by fast diagonalisation of the
/// interior Chebyshev second-derivative block.
pub fn energy_solution(
    op: &DivFormOperator,
    f: &[C64],
    height: f64,
    nt: usize,
    top: TopCondition,
) -> Result<EnergySolution> {
    check_len(op.dim(), f.len())?;
    let dim = op.dim();
    if dim > ENERGY_MAX_DIM {
        return Err(Error::Precondition(format!("energy oracle limited to dimension {ENERGY_MAX_DIM}, got {dim}")));
    }
    if nt < 4 || !(height > 0.0) {
        return Err(Error::Precondition(format!("invalid strip discretisation: nt = {nt}, T = {height}")));
    }
    init_determinism();
    let (nodes, d1) = chebyshev_matrix(nt, height);
    let d2 = &d1 * &d1;
    let ni = nt - 1;
    let e = Mat::<C64>::from_fn(ni, ni, |i, j| C64::new(d2[(i + 1, j + 1)], 0.0));
    let evd = e.eigen().map_err(|err| Error::Numerical(format!("Chebyshev eigensolve failed: {err:?}")))?;
    let mu: Vec<C64> = evd.S().column_vector().iter().copied().collect();
    let q = evd.U().to_owned();
    let q_inv = q.partial_piv_lu().solve(Mat::<C64>::identity(ni, ni).as_ref());
    let col = |j: usize| Mat::<C64>::from_fn(ni, 1, |i, _| C64::new(d2[(i + 1, j)], 0.0));
    let c0 = &q_inv * col(0);
    let cn = &q_inv * col(nt);
    let top_row = Mat::<C64>::from_fn(1, ni, |_, j| C64::new(d1[(nt, j + 1)], 0.0));
    let ek = &top_row * &q;

    let shifted: Vec<SparseLu> = mu.iter().map(|&m| SparseLu::shifted(op.matrix(), m)).collect::<Result<Vec<_>>>()?;

    // Interior modes: V_k = −(μ_k − L)^{-1}(c0_k f + cN_k w).
    let w = match top {
        TopCondition::Dirichlet => vec![C64::new(0.0, 0.0); dim],
        TopCondition::Robin => {
            let s = dense_sqrt(op)?;
            let mut m = s;
            for i in 0..dim {
                m[(i, i)] += C64::new(d1[(nt, nt)], 0.0);
            }
            let mut rhs = Scale(C64::new(-d1[(nt, 0)], 0.0)) * vec_to_col(f);
            let ident = Mat::<C64>::identity(dim, dim);
            let fcol = vec_to_col(f);
            for (k, lu) in shifted.iter().enumerate() {
                let coef_n = ek[(0, k)] * cn[(k, 0)];
                let coef_0 = ek[(0, k)] * c0[(k, 0)];
                let r_ident = lu.solve(ident.as_ref())?;
                m -= Scale(coef_n) * &r_ident;
                rhs += Scale(coef_0) * lu.solve(fcol.as_ref())?;
            }
            let sol = m.partial_piv_lu().solve(rhs.as_ref());
            col_to_vec(sol.as_ref(), 0)
        }
    };
    let mut v = Vec::with_capacity(ni);
    for (k, lu) in shifted.iter().enumerate() {
        let b: Vec<C64> = f.iter().zip(&w).map(|(a, b)| -(c0[(k, 0)] * a + cn[(k, 0)] * b)).collect();
        v.push(lu.solve_vec(&b)?);
    }
    let mut values = vec![f.to_vec()];
    for i in 0..ni {
        let mut ui = vec![C64::new(0.0, 0.0); dim];
        for (k, vk) in v.iter().enumerate() {
            let qik = q[(i, k)];
            ui.iter_mut().zip(vk).for_each(|(a, b)| *a += qik * b);
        }
        values.push(ui);
    }
    values.push(w);
    if values.iter().flatten().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Numerical("energy oracle produced non-finite values".into()));
    }
    let residual = collocation_residual(op, &d1, &d2, &values, top)?;
    Ok(EnergySolution { height, top, nodes, values, residual })
}

fn collocation_residual(
    op: &DivFormOperator,
    d1: &Mat<f64>,
    d2: &Mat<f64>,
    values: &[Vec<C64>],
    top: TopCondition,
) -> Result<f64> {
    let nt = values.len() - 1;
    let dim = values[0].len();
    let combine = |d: &Mat<f64>, i: usize| -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); dim];
        for (j, vj) in values.iter().enumerate() {
            let c = d[(i, j)];
            out.iter_mut().zip(vj).for_each(|(a, b)| *a += b * c);
        }
        out
    };
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 1..nt {
        let dtt = combine(d2, i);
        let lu = op.apply(&values[i]);
        let r: Vec<C64> = dtt.iter().zip(&lu).map(|(a, b)| a - b).collect();
        num += norm2(&r).powi(2);
        den += norm2(&dtt).powi(2) + norm2(&lu).powi(2);
    }
    if top == TopCondition::Robin {
        let dt = combine(d1, nt);
        let s = crate::calculus::sqrt_apply(op, &values[nt])?;
        let r: Vec<C64> = dt.iter().zip(&s).map(|(a, b)| a + b).collect();
        num += norm2(&r).powi(2);
        den += norm2(&dt).powi(2) + norm2(&s).powi(2);
    }
    Ok(if den > 0.0 { (num / den).sqrt() } else { 0.0 })
}

/// Semigroup-versus-energy comparison on `[0, T/2]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub rel_l2_error: f64,
    pub nodes_compared: usize,
    pub energy_residual: f64,
}

/// Relative `L²` error between the semigroup solution of `bvp` and the energy
/// solution over the Chebyshev nodes in `[0, T/2]`, trapezoid-weighted in `t`.
pub fn check_compatibility(
    op: &DivFormOperator,
    bvp: &BvpSolution,
    energy: &EnergySolution,
) -> Result<CompatibilityReport> {
    compare_with_semigroup(op, &bvp.trace, energy)
}

/// [`check_compatibility`] starting from boundary data directly.
pub fn compare_with_semigroup(op: &DivFormOperator, f: &[C64], energy: &EnergySolution) -> Result<CompatibilityReport> {
    let idx: Vec<usize> = (0..energy.nodes.len()).filter(|&i| energy.nodes[i] <= energy.height / 2.0).collect();
    let positive: Vec<f64> = idx.iter().map(|&i| energy.nodes[i]).filter(|&t| t > 0.0).collect();
    let semigroup = if positive.is_empty() { Vec::new() } else { poisson_family(op, &positive, f)? };
    let mut sg = Vec::with_capacity(idx.len());
    let mut it = semigroup.into_iter();
    for &i in &idx {
        if energy.nodes[i] > 0.0 {
            sg.push(it.next().unwrap());
        } else {
            sg.push(f.to_vec());
        }
    }
    let ts: Vec<f64> = idx.iter().map(|&i| energy.nodes[i]).collect();
    let weights: Vec<f64> = (0..ts.len())
        .map(|k| {
            let left = if k > 0 { ts[k] - ts[k - 1] } else { 0.0 };
            let right = if k + 1 < ts.len() { ts[k + 1] - ts[k] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for ((k, &i), w) in idx.iter().enumerate().zip(&weights) {
        let diff: Vec<C64> = sg[k].iter().zip(&energy.values[i]).map(|(a, b)| a - b).collect();
        num += w * norm2(&diff).powi(2);
        den += w * norm2(&sg[k]).powi(2);
    }
    let rel = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    Ok(CompatibilityReport { rel_l2_error: rel, nodes_compared: idx.len(), energy_residual: energy.residual })
}

/// Least-squares slope of `−log(error)` against `log(N)`.
pub fn measured_order(ns: &[usize], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| -e.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
