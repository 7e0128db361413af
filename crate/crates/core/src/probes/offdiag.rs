use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{operator_norm, CsrMatrix, SparseLu};
use crate::operators::{DivFormOperator, GridSpec};
use crate::C64;

/// Largest admissible residual of the power-law fit.
pub const FIT_RESIDUAL_MAX: f64 = 0.2;

/// Ratios `d(E, F)/|z|` of the default z-grid.
pub const DEFAULT_SEPARATION_RATIOS: [f64; 7] = [8.0, 10.0, 12.0, 14.0, 16.0, 20.0, 24.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffDiagFamily {
    /// `(1 + z²L)⁻¹`
    Resolvent,
    /// `z∇(1 + z²L)⁻¹`
    GradientResolvent,
}

impl OffDiagFamily {
    pub const ALL: [OffDiagFamily; 2] = [OffDiagFamily::Resolvent, OffDiagFamily::GradientResolvent];

    pub fn label(self) -> &'static str {
        match self {
            OffDiagFamily::Resolvent => "resolvent",
            OffDiagFamily::GradientResolvent => "gradient_resolvent",
        }
    }
}

/// Measured norms `‖1_F T(z) 1_E‖` and the fitted order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OffDiagFit {
    pub family: OffDiagFamily,
    pub separation: f64,
    pub z: Vec<f64>,
    pub norms: Vec<f64>,
    /// Negated slope of `log ‖·‖` against `log(1 + d/|z|)`.
    pub gamma: f64,
    /// RMS misfit of the linear fit divided by the range of `log ‖·‖`.
    pub residual: f64,
    /// False when the fit residual exceeds [`FIT_RESIDUAL_MAX`]: no power-law regime.
    pub power_law: bool,
}

/// Minimal periodic distance between two cell sets.
pub fn set_distance(grid: &GridSpec, e: &[usize], f: &[usize]) -> f64 {
    e.par_iter()
        .map(|&x| f.iter().map(|&y| grid.distance(x, y)).fold(f64::INFINITY, f64::min))
        .reduce(|| f64::INFINITY, f64::min)
}

/// `E = B(0, w)` and `F` = cells at distance at least `w + separation` from
/// the origin, with `w` a sixteenth of the period.
pub fn separated_sets(grid: &GridSpec, separation: f64) -> (Vec<usize>, Vec<usize>) {
    let w = grid.period_max() / 16.0;
    let e = (0..grid.cells()).filter(|&x| grid.distance(x, 0) < w).collect();
    let f = (0..grid.cells()).filter(|&x| grid.distance(x, 0) >= w + separation).collect();
    (e, f)
}

pub fn default_z_grid(separation: f64) -> Vec<f64> {
    DEFAULT_SEPARATION_RATIOS.iter().map(|r| separation / r).collect()
}

fn restrict(v: &mut [C64], keep: &[bool], width: usize) {
    for (cell, chunk) in v.chunks_mut(width).enumerate() {
        if !keep[cell] {
            chunk.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        }
    }
}

/// `‖1_F T(z) 1_E‖₂→₂` for each `z`, by power iteration on `T` and `T^†`.
pub fn offdiag_norms(
    op: &DivFormOperator,
    family: OffDiagFamily,
    e: &[usize],
    f: &[usize],
    z_grid: &[f64],
) -> Result<Vec<f64>> {
    let grid = op.grid();
    let (m, nm) = (grid.m(), grid.m() * grid.n());
    let mut in_e = vec![false; grid.cells()];
    let mut in_f = vec![false; grid.cells()];
    e.iter().for_each(|&x| in_e[x] = true);
    f.iter().for_each(|&x| in_f[x] = true);
    let out_width = match family {
        OffDiagFamily::Resolvent => m,
        OffDiagFamily::GradientResolvent => nm,
    };
    let grad = op.gradient_matrix();
    let grad_adj = grad.adjoint();
    z_grid
        .par_iter()
        .map(|&z| {
            let shifted = CsrMatrix::identity(op.dim()).add_scaled(C64::new(z * z, 0.0), op.matrix());
            let lu = SparseLu::new(&shifted)?;
            let scale = C64::new(z, 0.0);
            operator_norm(
                op.dim(),
                |v| {
                    let mut x = v.to_vec();
                    restrict(&mut x, &in_e, m);
                    let u = lu.solve_vec(&x)?;
                    let mut y = match family {
                        OffDiagFamily::Resolvent => u,
                        OffDiagFamily::GradientResolvent => grad.matvec(&u).into_iter().map(|w| w * scale).collect(),
                    };
                    restrict(&mut y, &in_f, out_width);
                    Ok(y)
                },
                |w| {
                    let mut y = w.to_vec();
                    restrict(&mut y, &in_f, out_width);
                    let r = match family {
                        OffDiagFamily::Resolvent => y,
                        OffDiagFamily::GradientResolvent => {
                            grad_adj.matvec(&y).into_iter().map(|v| v * scale).collect()
                        }
                    };
                    let mut x = lu.solve_adjoint_vec(&r)?;
                    restrict(&mut x, &in_e, m);
                    Ok(x)
                },
                500,
                1e-9,
            )
        })
        .collect()
}

/// Measures the off-diagonal decay of `family` between `E` and `F` and fits
/// `‖1_F T(z) 1_E‖ ≈ C (1 + d/|z|)^{−γ}`.
pub fn offdiag_measure(
    op: &DivFormOperator,
    family: OffDiagFamily,
    e: &[usize],
    f: &[usize],
    z_grid: &[f64],
) -> Result<OffDiagFit> {
    let grid = op.grid();
    if e.is_empty() || f.is_empty() {
        return Err(Error::Precondition("off-diagonal sets must be non-empty".into()));
    }
    if let Some(&bad) = e.iter().chain(f).find(|&&x| x >= grid.cells()) {
        return Err(Error::Precondition(format!("cell index {bad} outside the grid")));
    }
    let separation = set_distance(grid, e, f);
    if !(separation > 0.0) {
        return Err(Error::Precondition("E and F must be disjoint with positive distance".into()));
    }
    if z_grid.len() < 2 || z_grid.iter().any(|z| !(*z > 0.0)) {
        return Err(Error::Precondition("z-grid needs at least two positive values".into()));
    }
    let norms = offdiag_norms(op, family, e, f, z_grid)?;
    let points: Vec<(f64, f64)> = z_grid
        .iter()
        .zip(&norms)
        .filter(|(_, n)| **n > 0.0)
        .map(|(z, n)| ((1.0 + separation / z).ln(), n.ln()))
        .collect();
    let (gamma, residual) = if points.len() >= 2 {
        let (slope, rms) = linear_fit(&points);
        let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
        let range = hi - lo;
        (-slope, if range > 0.0 { rms / range } else { 0.0 })
    } else {
        (0.0, f64::INFINITY)
    };
    let power_law = residual <= FIT_RESIDUAL_MAX;
    if !power_law {
        log::warn!("{}: no power-law regime (fit residual {residual:.3})", family.label());
    }
    Ok(OffDiagFit { family, separation, z: z_grid.to_vec(), norms, gamma, residual, power_law })
}

/// Least-squares slope and RMS residual of `y` against `x`.
pub(crate) fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let rms = (points.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum::<f64>() / n).sqrt();
    (slope, rms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{CoefficientFamily, CoefficientField};
    use std::f64::consts::PI;

    fn op() -> DivFormOperator {
        let g = GridSpec::new(1, 1, 64, &[2.0 * PI]).unwrap();
        DivFormOperator::assemble(&CoefficientField::from_family(&g, &CoefficientFamily::t1()).unwrap()).unwrap()
    }

    #[test]
    fn identical_sets_are_rejected() {
        let l = op();
        let e = vec![0, 1, 2];
        let err = offdiag_measure(&l, OffDiagFamily::Resolvent, &e, &e, &[0.1, 0.05]).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn constant_coefficients_decay_fast() {
        let l = op();
        let d = 2.0 * PI / 4.0;
        let (e, f) = separated_sets(l.grid(), d);
        let sep = set_distance(l.grid(), &e, &f);
        assert!(sep >= d);
        for fam in OffDiagFamily::ALL {
            let fit = offdiag_measure(&l, fam, &e, &f, &default_z_grid(sep)).unwrap();
            assert!(fit.gamma >= 5.0 && fit.power_law, "{fit:?}");
            // Exponential envelope of the constant-coefficient kernel.
            for (z, n) in fit.z.iter().zip(&fit.norms) {
                assert!(*n <= (-0.5 * sep / z).exp(), "{z} {n}");
            }
        }
    }

    #[test]
    fn fit_recovers_a_power_law() {
        let pts: Vec<(f64, f64)> = (1..6).map(|i| (i as f64, 3.0 - 7.0 * i as f64)).collect();
        let (s, r) = linear_fit(&pts);
        assert!((s + 7.0).abs() < 1e-12 && r < 1e-12);
    }
}
