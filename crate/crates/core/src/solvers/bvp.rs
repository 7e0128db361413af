use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    carleson, conical_square, holder_norm, hp_quasinorm, lp_norm, nt_maximal, relative_mean, whitney_convergence_curve,
    whitney_deviation, HalfSpaceField, HpProfile, TGrid, MEAN_ZERO_TOL,
};
use crate::calculus::{apply_psi_family, inv_sqrt_apply, sqrt_apply, AuxiliaryFunction};
use crate::error::{check_len, Error, Result};
use crate::linalg::norm2;
use crate::operators::DivFormOperator;
use crate::C64;

/// Log-step of the finite-difference stencils used for t-derivatives.
pub const STENCIL_STEP: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    DirichletF,
    NeumannG,
    HolderF,
}

/// Boundary data with the space it is measured in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryData {
    pub kind: BoundaryKind,
    pub field: Vec<C64>,
    /// `p` for Dirichlet and Neumann data, `α` for Hölder data.
    pub declared: f64,
    pub normalization: f64,
}

/// Named scalars and curves produced by a solver.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub values: BTreeMap<String, f64>,
    pub curves: BTreeMap<String, Vec<[f64; 2]>>,
}

impl Diagnostics {
    pub fn set(&mut self, key: &str, v: f64) {
        self.values.insert(key.to_string(), v);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    pub fn curve(&mut self, key: &str, xs: &[f64], ys: &[f64]) {
        self.curves.insert(key.to_string(), xs.iter().zip(ys).map(|(x, y)| [*x, *y]).collect());
    }

    /// Adds `key_a/key_b` style ratios for every pair of the listed values.
    pub fn pairwise_ratios(&mut self, keys: &[&str]) {
        for (i, a) in keys.iter().enumerate() {
            for b in &keys[i + 1..] {
                let r = ratio(self.values[*a], self.values[*b]);
                self.set(&format!("ratio {a}/{b}"), r);
            }
        }
    }

    /// The ratios added by [`Diagnostics::pairwise_ratios`].
    pub fn ratios(&self) -> impl Iterator<Item = (&String, &f64)> {
        self.values.iter().filter(|(k, _)| k.starts_with("ratio "))
    }
}

/// `a/b`, with `0/0 = 0`.
pub fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        a / b
    }
}

/// Upper Sobolev exponent `p^* = np/(n−p)` for `p < n`, infinite otherwise.
pub fn p_star(n: usize, p: f64) -> f64 {
    let n = n as f64;
    if p < n {
        n * p / (n - p)
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BvpSolution {
    pub data: BoundaryData,
    /// Boundary trace `f` of the solution.
    pub trace: Vec<C64>,
    pub u: HalfSpaceField,
    /// `∂_t u` on the same nodes.
    pub dt_u: HalfSpaceField,
    /// `g = −a L^{1/2} f` where applicable.
    pub conormal: Option<Vec<C64>>,
    /// `F = [a ∂_t u, ∇_x u]`, interleaved per cell.
    pub conormal_gradient: HalfSpaceField,
    pub diagnostics: Diagnostics,
}

fn d_poisson(t: f64) -> AuxiliaryFunction {
    AuxiliaryFunction::new(
        format!("-z^1/2 exp(-{t} z^1/2)"),
        0.5,
        f64::INFINITY,
        PI,
        Some(C64::new(0.0, 0.0)),
        move |z| {
            let r = z.sqrt();
            -r * (-r * t).exp()
        },
    )
}

/// `u(t) = e^{−tL^{1/2}} f` and `∂_t u(t)` at every requested time, for each input.
fn poisson_with_derivative(
    op: &DivFormOperator,
    ts: &[f64],
    fs: &[Vec<C64>],
) -> Result<(Vec<Vec<Vec<C64>>>, Vec<Vec<Vec<C64>>>)> {
    let mut psis: Vec<AuxiliaryFunction> = ts.iter().map(|&t| AuxiliaryFunction::poisson(t)).collect();
    psis.extend(ts.iter().map(|&t| d_poisson(t)));
    let (out, _) = apply_psi_family(op, &psis, fs)?;
    let (u, du) = out.split_at(ts.len());
    // Regroup as [input][time].
    let regroup = |block: &[Vec<Vec<C64>>]| -> Vec<Vec<Vec<C64>>> {
        (0..fs.len()).map(|j| block.iter().map(|per_t| per_t[j].clone()).collect()).collect()
    };
    Ok((regroup(u), regroup(du)))
}

/// Interleaves two per-cell blocks of widths `wa` and `wb`.
fn interleave(a: &[C64], wa: usize, b: &[C64], wb: usize) -> Vec<C64> {
    let cells = a.len() / wa;
    let mut out = Vec::with_capacity(a.len() + b.len());
    for c in 0..cells {
        out.extend_from_slice(&a[c * wa..(c + 1) * wa]);
        out.extend_from_slice(&b[c * wb..(c + 1) * wb]);
    }
    out
}

/// Relative residuals of the second-order equation `∂_t(a∂_t u) + div(d∇u) = 0`
/// and of the first-order system `∂_t F + DB F = 0` for the Poisson extension
/// of `f`, maximised over the interior nodes of `tgrid`. t-derivatives are
/// fourth-order central differences in `log t` with step [`STENCIL_STEP`].
/// Nodes below the grid spacing are skipped: there the differences resolve
/// `t·|∇u|` far below the quadrature error and measure only round-off.
pub fn pde_residuals(op: &DivFormOperator, f: &[C64], tgrid: &TGrid) -> Result<(f64, f64)> {
    let h_min = op.grid().h_min();
    let interior = &tgrid.values()[1..tgrid.len().saturating_sub(1)];
    let nodes: Vec<f64> = interior.iter().copied().filter(|&t| t >= h_min).collect();
    if nodes.is_empty() {
        return Ok((0.0, 0.0));
    }
    let shifts = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let ts: Vec<f64> = nodes.iter().flat_map(|&t| shifts.iter().map(move |m| t * (m * STENCIL_STEP).exp())).collect();
    let (u, du) = poisson_with_derivative(op, &ts, &[f.to_vec()])?;
    let (u, du) = (&u[0], &du[0]);
    let h = STENCIL_STEP;
    let d1 = |v: &[Vec<C64>], base: usize, i: usize| -> C64 {
        (-v[base + 4][i] + v[base + 3][i] * 8.0 - v[base + 1][i] * 8.0 + v[base][i]) / (12.0 * h)
    };
    let mut second: f64 = 0.0;
    let mut first: f64 = 0.0;
    for (k, &t) in nodes.iter().enumerate() {
        let base = 5 * k;
        let dim = f.len();
        // ∂_t(a∂_t u) as a log-t difference of the computed ∂_t u; a second
        // difference of u itself cancels catastrophically at small t.
        let a_dtt = op.mul_a(&(0..dim).map(|i| d1(du, base, i) / t).collect::<Vec<_>>());
        let div = op.div_d_grad(&u[base + 2]);
        let r: Vec<C64> = a_dtt.iter().zip(&div).map(|(a, b)| a + b).collect();
        let scale = norm2(&a_dtt) + norm2(&div);
        if scale > 0.0 {
            second = second.max(norm2(&r) / scale);
        }

        // First order: ∂_t [a∂_t u, ∇u] + DB [a∂_t u, ∇u].
        let dt_a_dtu = &a_dtt;
        let grad_u_s: Vec<Vec<C64>> = (0..5).map(|m| op.gradient(&u[base + m])).collect();
        let gdim = grad_u_s[0].len();
        let dt_grad: Vec<C64> = (0..gdim).map(|i| d1(&grad_u_s, 0, i) / t).collect();
        let db_upper = div.clone();
        let db_lower: Vec<C64> = op.gradient(&du[base + 2]).into_iter().map(|v| -v).collect();
        let r_upper: Vec<C64> = dt_a_dtu.iter().zip(&db_upper).map(|(a, b)| a + b).collect();
        let r_lower: Vec<C64> = dt_grad.iter().zip(&db_lower).map(|(a, b)| a + b).collect();
        let num = (norm2(&r_upper).powi(2) + norm2(&r_lower).powi(2)).sqrt();
        let scale = (norm2(dt_a_dtu).powi(2) + norm2(&dt_grad).powi(2)).sqrt()
            + (norm2(&db_upper).powi(2) + norm2(&db_lower).powi(2)).sqrt();
        if scale > 0.0 {
            first = first.max(num / scale);
        }
    }
    Ok((second, first))
}

/// Poisson extension on `tgrid` packaged as a solution with empty diagnostics.
fn extend(op: &DivFormOperator, data: BoundaryData, f: Vec<C64>, tgrid: &TGrid) -> Result<BvpSolution> {
    let (u, du) = poisson_with_derivative(op, tgrid.values(), &[f.clone()])?;
    let grid = op.grid().clone();
    let (m, nm) = (grid.m(), grid.m() * grid.n());
    let u_field = HalfSpaceField::new(grid.clone(), tgrid.clone(), m, u[0].clone())?;
    let du_field = HalfSpaceField::new(grid.clone(), tgrid.clone(), m, du[0].clone())?;
    let cg: Vec<Vec<C64>> =
        u[0].iter().zip(&du[0]).map(|(uj, dj)| interleave(&op.mul_a(dj), m, &op.gradient(uj), nm)).collect();
    let conormal_gradient = HalfSpaceField::new(grid, tgrid.clone(), m + nm, cg)?;
    Ok(BvpSolution {
        data,
        trace: f,
        u: u_field,
        dt_u: du_field,
        conormal: None,
        conormal_gradient,
        diagnostics: Diagnostics::default(),
    })
}

/// `[t ∂_t w, t ∇_x w]` per node, interleaved per cell.
fn t_full_gradient(op: &DivFormOperator, w: &HalfSpaceField, dt_w: &[Vec<C64>]) -> Result<HalfSpaceField> {
    let (m, nm) = (op.grid().m(), op.grid().m() * op.grid().n());
    let values = w
        .values
        .iter()
        .zip(dt_w)
        .zip(w.tgrid.values())
        .map(|((wj, dj), &t)| {
            let a: Vec<C64> = dj.iter().map(|v| v * t).collect();
            let b: Vec<C64> = op.gradient(wj).into_iter().map(|v| v * t).collect();
            interleave(&a, m, &b, nm)
        })
        .collect();
    HalfSpaceField::new(w.grid.clone(), w.tgrid.clone(), m + nm, values)
}

fn record_residuals(op: &DivFormOperator, sol: &mut BvpSolution) -> Result<()> {
    let (second, first) = pde_residuals(op, &sol.trace, &sol.u.tgrid)?;
    sol.diagnostics.set("residual_second_order", second);
    sol.diagnostics.set("residual_first_order", first);
    Ok(())
}

fn sup_ratio(
    grid: &crate::operators::GridSpec,
    fields: &[Vec<C64>],
    width: usize,
    p: f64,
    reference: f64,
) -> Result<f64> {
    let mut best: f64 = 0.0;
    for v in fields {
        best = best.max(HpProfile::new(grid, v, width)?.norm(p)?);
    }
    Ok(ratio(best, reference))
}

/// Dirichlet problem with `L^p` (`p > 1`) or `H^p` (`p ≤ 1`) data:
/// `u(t) = e^{−tL^{1/2}} f`.
pub fn solve_dirichlet(op: &DivFormOperator, f: &[C64], p: f64, tgrid: &TGrid) -> Result<BvpSolution> {
    check_len(op.dim(), f.len())?;
    if p <= 1.0 {
        return solve_dirichlet_hp(op, f, p, tgrid);
    }
    dirichlet_pipeline(op, f, p, tgrid)
}

/// Dirichlet problem with data in `a⁻¹H^p`, `p ≤ 1`.
pub fn solve_dirichlet_hp(op: &DivFormOperator, f: &[C64], p: f64, tgrid: &TGrid) -> Result<BvpSolution> {
    check_len(op.dim(), f.len())?;
    if p > 1.0 {
        return Err(Error::Precondition(format!("Hardy-space Dirichlet solver needs p <= 1, got {p}")));
    }
    let af = op.mul_a(f);
    if relative_mean(&af, op.grid().m()) > MEAN_ZERO_TOL {
        return Err(Error::Precondition("Dirichlet data in a^-1 H^p must satisfy sum(a f) = 0".into()));
    }
    dirichlet_pipeline(op, f, p, tgrid)
}

fn dirichlet_pipeline(op: &DivFormOperator, f: &[C64], p: f64, tgrid: &TGrid) -> Result<BvpSolution> {
    let grid = op.grid();
    let m = grid.m();
    let af = op.mul_a(f);
    let norm_af = hp_quasinorm(grid, &af, m, p)?;
    let data = BoundaryData { kind: BoundaryKind::DirichletF, field: f.to_vec(), declared: p, normalization: norm_af };
    let mut sol = extend(op, data, f.to_vec(), tgrid)?;
    let d = &mut sol.diagnostics;
    d.set("p", p);
    d.set("nt_u", lp_norm(grid, &nt_maximal(&sol.u), p));
    d.set("af_hp", norm_af);
    let tg = t_full_gradient(op, &sol.u, &sol.dt_u.values)?;
    d.set("square_t_grad_u", lp_norm(grid, &conical_square(&tg), p));
    d.pairwise_ratios(&["nt_u", "af_hp", "square_t_grad_u"]);
    let au: Vec<Vec<C64>> = sol.u.values.iter().map(|v| op.mul_a(v)).collect();
    d.set("sup_t_au_hp_ratio", sup_ratio(grid, &au, m, p, norm_af)?);
    d.curve("whitney_trace", tgrid.values(), &whitney_convergence_curve(&sol.u, f));
    record_residuals(op, &mut sol)?;
    Ok(sol)
}

/// Regularity problem: `u` is the Poisson extension of `f` and the conormal
/// derivative is `g = −aL^{1/2} f`.
pub fn solve_regularity(op: &DivFormOperator, f: &[C64], p: f64, tgrid: &TGrid) -> Result<BvpSolution> {
    check_len(op.dim(), f.len())?;
    let f = op.project_range(f);
    let g: Vec<C64> = op.mul_a(&sqrt_apply(op, &f)?).into_iter().map(|v| -v).collect();
    regularity_pipeline(op, f, g, p, tgrid, BoundaryKind::DirichletF)
}

fn regularity_pipeline(
    op: &DivFormOperator,
    f: Vec<C64>,
    g: Vec<C64>,
    p: f64,
    tgrid: &TGrid,
    kind: BoundaryKind,
) -> Result<BvpSolution> {
    let grid = op.grid().clone();
    let (m, nm) = (grid.m(), grid.m() * grid.n());
    let grad_f = op.gradient(&f);
    let norm_grad_f = hp_quasinorm(&grid, &grad_f, nm, p)?;
    let norm_g = hp_quasinorm(&grid, &g, m, p)?;
    let (field, normalization) = match kind {
        BoundaryKind::NeumannG => (g.clone(), norm_g),
        _ => (f.clone(), norm_grad_f),
    };
    let data = BoundaryData { kind, field, declared: p, normalization };
    let mut sol = extend(op, data, f.clone(), tgrid)?;
    sol.conormal = Some(g.clone());

    // ∇u = [∂_t u, ∇_x u] and t∇∂_t u = [t ∂_t² u, t ∇_x ∂_t u] with ∂_t² u = L u.
    let grad_u_values: Vec<Vec<C64>> =
        sol.u.values.iter().zip(&sol.dt_u.values).map(|(uj, dj)| interleave(dj, m, &op.gradient(uj), nm)).collect();
    let grad_u = HalfSpaceField::new(grid.clone(), tgrid.clone(), m + nm, grad_u_values)?;
    let dtt: Vec<Vec<C64>> = sol.u.values.iter().map(|v| op.apply(v)).collect();
    let t_grad_dtu = t_full_gradient(op, &sol.dt_u, &dtt)?;

    let nt_grad = nt_maximal(&grad_u);
    let d = &mut sol.diagnostics;
    d.set("p", p);
    d.set("p_star", p_star(grid.n(), p));
    d.set("nt_grad_u", lp_norm(&grid, &nt_grad, p));
    d.set("square_t_grad_dtu", lp_norm(&grid, &conical_square(&t_grad_dtu), p));
    d.set("grad_f_hp", norm_grad_f);
    d.set("g_hp", norm_g);
    d.pairwise_ratios(&["nt_grad_u", "square_t_grad_dtu", "grad_f_hp", "g_hp"]);

    // Whitney oscillation: ⨍⨍_W |u − f(x)|² ≤ C (t Ñ(∇u)(x))².
    let dev = whitney_deviation(&sol.u, &f);
    let mut c_osc: f64 = 0.0;
    for (row, &t) in dev.iter().zip(tgrid.values()) {
        for (dv, nv) in row.iter().zip(&nt_grad) {
            let bound = t * nv;
            if bound > 0.0 {
                c_osc = c_osc.max((dv / bound).powi(2));
            }
        }
    }
    d.set("whitney_oscillation_constant", c_osc);

    let target = interleave(&g, m, &grad_f, nm);
    d.curve("whitney_conormal_trace", tgrid.values(), &whitney_convergence_curve(&sol.conormal_gradient, &target));
    let grads: Vec<Vec<C64>> = sol.u.values.iter().map(|v| op.gradient(v)).collect();
    d.set("sup_t_grad_u_hp_ratio", sup_ratio(&grid, &grads, nm, p, norm_grad_f)?);
    let conormals: Vec<Vec<C64>> = sol.dt_u.values.iter().map(|v| op.mul_a(v)).collect();
    d.set("sup_t_conormal_hp_ratio", sup_ratio(&grid, &conormals, m, p, norm_g)?);
    record_residuals(op, &mut sol)?;
    Ok(sol)
}

/// Neumann problem via `u = −e^{−tL^{1/2}} (aL^{1/2})^{−1} g`, normalised to
/// mean zero at every node.
pub fn solve_neumann(op: &DivFormOperator, g: &[C64], p: f64, tgrid: &TGrid) -> Result<BvpSolution> {
    check_len(op.dim(), g.len())?;
    let m = op.grid().m();
    if relative_mean(g, m) > MEAN_ZERO_TOL {
        return Err(Error::Precondition("Neumann data must have zero mean on the torus".into()));
    }
    let f: Vec<C64> = inv_sqrt_apply(op, &op.mul_a_inv(g))?.into_iter().map(|v| -v).collect();
    let mut sol = regularity_pipeline(op, f, g.to_vec(), p, tgrid, BoundaryKind::NeumannG)?;
    for v in sol.u.values.iter_mut() {
        remove_mean(v, m);
    }
    let first = &sol.conormal_gradient.values[0];
    let width = sol.conormal_gradient.width;
    let flux: Vec<C64> = first.chunks(width).flat_map(|c| c[..m].iter().copied()).collect();
    let diff: Vec<C64> = flux.iter().zip(g).map(|(a, b)| a - b).collect();
    sol.diagnostics.set("flux_error_l2", ratio(norm2(&diff), norm2(g)));
    sol.diagnostics.set("flux_t_min", tgrid.t_min());
    let conormal_part = sol.conormal_gradient.components(0, m);
    sol.diagnostics.curve("whitney_flux", tgrid.values(), &whitney_convergence_curve(&conormal_part, g));
    Ok(sol)
}

/// Subtracts the per-component mean.
pub fn remove_mean(v: &mut [C64], width: usize) {
    let cells = v.len() / width;
    for c in 0..width {
        let mean = v.iter().skip(c).step_by(width).sum::<C64>() / cells as f64;
        v.iter_mut().skip(c).step_by(width).for_each(|x| *x -= mean);
    }
}

/// Radii `2^j h` of the truncation windows, up to one beyond the first that
/// covers the whole torus.
pub fn truncation_radii(grid: &crate::operators::GridSpec) -> Vec<f64> {
    let diameter = grid.lengths().iter().map(|l| (l / 2.0).powi(2)).sum::<f64>().sqrt();
    let mut radii = Vec::new();
    let mut r = grid.h_min();
    loop {
        radii.push(r);
        if r > diameter {
            break;
        }
        r *= 2.0;
    }
    radii.push(2.0 * r);
    radii
}

/// Dirichlet problem with Hölder (or BMO for `α = 0`) data, realised as the
/// limit of Poisson extensions of the truncations `1_{|x| < 2^j h} f`.
/// `declare_adjoint_hypothesis` enables the sup-norm comparability diagnostic.
pub fn solve_dirichlet_holder(
    op: &DivFormOperator,
    f: &[C64],
    alpha: f64,
    tgrid: &TGrid,
    declare_adjoint_hypothesis: bool,
) -> Result<BvpSolution> {
    check_len(op.dim(), f.len())?;
    let grid = op.grid().clone();
    let m = grid.m();
    let norm_f = holder_norm(&grid, f, m, alpha)?;
    let radii = truncation_radii(&grid);
    let windows: Vec<Vec<C64>> = radii
        .iter()
        .map(|&r| {
            let mut w = f.to_vec();
            for cell in 0..grid.cells() {
                if !(grid.distance(cell, 0) < r) {
                    w[cell * m..(cell + 1) * m].iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
                }
            }
            w
        })
        .collect();
    let (us, _) = poisson_with_derivative(op, tgrid.values(), &windows)?;

    // Successive differences on the interior cylinder (h, ℓ/4] × B(0, ℓ/4).
    let quarter = grid.period_max() / 4.0;
    let rows: Vec<usize> = (0..tgrid.len()).filter(|&j| tgrid.values()[j] <= quarter).collect();
    let cells: Vec<usize> = (0..grid.cells()).filter(|&c| grid.distance(c, 0) < quarter).collect();
    let dt = tgrid.dt_weights();
    let cyl = |a: &[Vec<C64>], b: Option<&[Vec<C64>]>| -> f64 {
        let mut s = 0.0;
        for &j in &rows {
            for &c in &cells {
                for k in 0..m {
                    let i = c * m + k;
                    let v = match b {
                        Some(b) => a[j][i] - b[j][i],
                        None => a[j][i],
                    };
                    s += dt[j] * v.norm_sqr();
                }
            }
        }
        (s * grid.cell_volume()).sqrt()
    };
    let scale = cyl(us.last().unwrap(), None);
    let diffs: Vec<f64> = us.windows(2).map(|w| ratio(cyl(&w[1], Some(&w[0])), scale)).collect();

    let data = BoundaryData { kind: BoundaryKind::HolderF, field: f.to_vec(), declared: alpha, normalization: norm_f };
    let mut sol = extend(op, data, f.to_vec(), tgrid)?;
    let last = *diffs.last().unwrap_or(&0.0);
    if !(last <= 1e-8) {
        return Err(Error::Numerical(format!(
            "truncated extensions do not stabilise: successive differences {diffs:?}"
        )));
    }
    let d = &mut sol.diagnostics;
    d.set("alpha", alpha);
    d.set("holder_f", norm_f);
    d.curve("truncation_differences", &radii[1..], &diffs);
    d.set("truncation_final_difference", last);

    let t_grad = t_full_gradient(op, &sol.u, &sol.dt_u.values)?;
    let c_alpha = carleson(&t_grad, alpha).into_iter().fold(0.0, f64::max);
    d.set("carleson_t_grad_u", c_alpha);
    d.set("carleson_ratio", ratio(c_alpha, norm_f));
    let continuity: Vec<f64> =
        sol.u.values.iter().map(|v| v.iter().zip(f).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)).collect();
    d.curve("boundary_continuity", tgrid.values(), &continuity);
    if declare_adjoint_hypothesis {
        let mut best: f64 = 0.0;
        for v in &sol.u.values {
            best = best.max(holder_norm(&grid, v, m, alpha)?);
        }
        d.set("sup_t_holder_ratio", ratio(best, norm_f));
    }
    record_residuals(op, &mut sol)?;
    Ok(sol)
}
