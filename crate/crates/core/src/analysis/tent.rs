use rayon::prelude::*;

use super::boundary::lp_norm;
use super::field::HalfSpaceField;
use crate::operators::GridSpec;
use crate::C64;

/// Cells inside the periodic ball `|x − y| < r` around every node, as offsets.
fn ball(grid: &GridSpec, r: f64) -> Vec<[isize; 2]> {
    grid.ball_offsets(r)
}

/// Conical square function
/// `SF(x)² = Σ_j Σ_{|x−y|<t_j} |F(t_j, y)|² Δt_j Δy / t_j^{1+n}`
/// with `Δt_j = t_j Δlog t_j`.
pub fn conical_square(field: &HalfSpaceField) -> Vec<f64> {
    let grid = &field.grid;
    let n = grid.n() as i32;
    let dy = grid.cell_volume();
    let density = field.density();
    let weights: Vec<f64> =
        field.tgrid.values().iter().zip(field.tgrid.log_weights()).map(|(t, w)| w * dy / t.powi(n)).collect();
    let balls: Vec<Vec<[isize; 2]>> = field.tgrid.values().iter().map(|&t| ball(grid, t)).collect();
    (0..grid.cells())
        .into_par_iter()
        .map(|x| {
            let mut s = 0.0;
            for (j, rho) in density.iter().enumerate() {
                let inner: f64 = balls[j].iter().map(|&o| rho[grid.offset_cell(x, o)]).sum();
                s += weights[j] * inner;
            }
            s.sqrt()
        })
        .collect()
}

/// Tent quasi-norm `‖S(t^{−s} F)‖_p`.
pub fn tent_norm(field: &HalfSpaceField, s: f64, p: f64) -> f64 {
    let scaled = if s == 0.0 { field.clone() } else { field.scale_by(|t| t.powf(-s)) };
    lp_norm(&field.grid, &conical_square(&scaled), p)
}

/// Right-hand side of the discrete Fubini identity for `‖SF‖₂²`:
/// `Σ_j Σ_y |F(t_j, y)|² Δlog t_j Δy |B(t_j)| / t_j^n`, where `|B(t)|` is the
/// discrete volume of the open ball of radius `t`.
pub fn fubini_tent_square(field: &HalfSpaceField) -> f64 {
    let grid = &field.grid;
    let dy = grid.cell_volume();
    let n = grid.n() as i32;
    field
        .density()
        .iter()
        .zip(field.tgrid.values())
        .zip(field.tgrid.log_weights())
        .map(|((rho, &t), w)| {
            let vol = ball(grid, t).len() as f64 * dy;
            w * dy * vol / t.powi(n) * rho.iter().sum::<f64>()
        })
        .sum()
}

/// Whitney-average non-tangential maximal function
/// `ÑF(x) = max_k (⨍⨍_{W(t_k, x)} |F|²)^{1/2}` over all t-nodes.
pub fn nt_maximal(field: &HalfSpaceField) -> Vec<f64> {
    let all: Vec<usize> = (0..field.tgrid.len()).collect();
    nt_maximal_over(field, &all)
}

/// [`nt_maximal`] with the supremum restricted to the candidate t-nodes
/// `candidates`. Whitney slabs still use every node of the grid.
pub fn nt_maximal_over(field: &HalfSpaceField, candidates: &[usize]) -> Vec<f64> {
    let grid = &field.grid;
    let density = field.density();
    let dt = field.tgrid.dt_weights();
    let ts = field.tgrid.values();
    let regions: Vec<(Vec<usize>, Vec<[isize; 2]>)> = candidates
        .iter()
        .map(|&k| (field.tgrid.whitney_slab(ts[k]), ball(grid, ts[k])))
        .filter(|(slab, b)| !slab.is_empty() && !b.is_empty())
        .collect();
    (0..grid.cells())
        .into_par_iter()
        .map(|x| {
            let mut best = 0.0f64;
            for (slab, b) in &regions {
                let wsum: f64 = slab.iter().map(|&j| dt[j]).sum();
                let mut acc = 0.0;
                for &j in slab {
                    let inner: f64 = b.iter().map(|&o| density[j][grid.offset_cell(x, o)]).sum();
                    acc += dt[j] * inner;
                }
                best = best.max(acc / (wsum * b.len() as f64));
            }
            best.sqrt()
        })
        .collect()
}

/// Carleson functional
/// `C_α F(x) = max_k t_k^{−α} (t_k^{−n} Σ_{s_j ≤ t_k} Σ_{y ∈ B(x,t_k)} |F|² Δy Δs/s)^{1/2}`,
/// with trapezoid weights in `log s` over the truncated grid.
pub fn carleson(field: &HalfSpaceField, alpha: f64) -> Vec<f64> {
    let all: Vec<usize> = (0..field.tgrid.len()).collect();
    carleson_over(field, alpha, &all)
}

/// [`carleson`] with the supremum restricted to the candidate t-nodes.
pub fn carleson_over(field: &HalfSpaceField, alpha: f64, candidates: &[usize]) -> Vec<f64> {
    let grid = &field.grid;
    let n = grid.n() as i32;
    let dy = grid.cell_volume();
    let density = field.density();
    let ts = field.tgrid.values();
    let boxes: Vec<(f64, Vec<f64>, Vec<[isize; 2]>)> = candidates
        .iter()
        .filter(|&&k| k > 0)
        .map(|&k| (ts[k], field.tgrid.partial_log_weights(k), ball(grid, ts[k])))
        .collect();
    (0..grid.cells())
        .into_par_iter()
        .map(|x| {
            let mut best = 0.0f64;
            for (t, w, b) in &boxes {
                let mut acc = 0.0;
                for (j, wj) in w.iter().enumerate() {
                    let inner: f64 = b.iter().map(|&o| density[j][grid.offset_cell(x, o)]).sum();
                    acc += wj * inner;
                }
                best = best.max(t.powf(-alpha) * (acc * dy / t.powi(n)).sqrt());
            }
            best
        })
        .collect()
}

/// `(⨍⨍_{W(t_k, x)} |F − g(x)|²)^{1/2}` for every t-node `k` (outer index) and cell `x`.
pub fn whitney_deviation(field: &HalfSpaceField, target: &[C64]) -> Vec<Vec<f64>> {
    let grid = &field.grid;
    let w = field.width;
    let dt = field.tgrid.dt_weights();
    let ts = field.tgrid.values();
    (0..ts.len())
        .into_par_iter()
        .map(|k| {
            let slab = field.tgrid.whitney_slab(ts[k]);
            let b = ball(grid, ts[k]);
            let wsum: f64 = slab.iter().map(|&j| dt[j]).sum::<f64>() * b.len() as f64;
            (0..grid.cells())
                .map(|x| {
                    let g = &target[x * w..(x + 1) * w];
                    let mut acc = 0.0;
                    for &j in &slab {
                        let v = &field.values[j];
                        let inner: f64 = b
                            .iter()
                            .map(|&o| {
                                let y = grid.offset_cell(x, o);
                                v[y * w..(y + 1) * w].iter().zip(g).map(|(a, c)| (a - c).norm_sqr()).sum::<f64>()
                            })
                            .sum();
                        acc += dt[j] * inner;
                    }
                    (acc / wsum).sqrt()
                })
                .collect()
        })
        .collect()
}

/// `max_x` of [`whitney_deviation`] for each t-node.
pub fn whitney_convergence_curve(field: &HalfSpaceField, target: &[C64]) -> Vec<f64> {
    whitney_deviation(field, target).iter().map(|row| row.iter().cloned().fold(0.0, f64::max)).collect()
}
