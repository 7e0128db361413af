//! Two-ray contour quadrature with nested node refinement.
//!
//! Nodes are `z = e^{x ± iν}` on a uniform grid in `x = log|z|`, anchored at
//! `x = 0`, so halving the step reuses every previous resolvent solve.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::auxiliary::AuxiliaryFunction;
use super::SectorialOperator;
use crate::error::{Error, Result};
use crate::linalg::{cols_to_mat, mat_to_cols, norm2, SparseLu};
use crate::C64;

/// Coarsest step in `log|z|`.
pub const BASE_STEP: f64 = 0.5;
/// Finest refinement level supported (`step = BASE_STEP / 2^MAX_LEVEL`).
pub const MAX_LEVEL: u32 = 8;
/// Relative change between successive levels accepted as converged.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Integrand magnitude, relative to its peak, below which the rays are cut.
pub const CUTOFF: f64 = 1e-15;

/// A realised contour: two rays at angle `±ν`, truncated to `[e^{x_min}, e^{x_max}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub angle: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub step: f64,
}

impl Contour {
    pub fn r_min(&self) -> f64 {
        self.x_min.exp()
    }

    pub fn r_max(&self) -> f64 {
        self.x_max.exp()
    }

    fn index_range(&self) -> (i64, i64) {
        ((self.x_min / self.step).floor() as i64, (self.x_max / self.step).ceil() as i64)
    }

    pub fn nodes_per_ray(&self) -> usize {
        let (lo, hi) = self.index_range();
        (hi - lo + 1) as usize
    }

    /// `(z, w)` pairs with `ψ(A) ≈ Σ w·ψ(z)·(z − A)⁻¹`.
    pub fn nodes(&self) -> Vec<(C64, C64)> {
        let (lo, hi) = self.index_range();
        let scale = C64::new(0.0, -self.step / (2.0 * PI));
        let mut out = Vec::with_capacity(2 * self.nodes_per_ray());
        for k in lo..=hi {
            let x = k as f64 * self.step;
            let zl = C64::from_polar(x.exp(), -self.angle);
            let zu = C64::from_polar(x.exp(), self.angle);
            out.push((zl, scale * zl));
            out.push((zu, -scale * zu));
        }
        out
    }

    /// Smallest `dist(z, λ)/|z|` over nodes and the given spectrum sample.
    pub fn min_relative_margin(&self, spectrum: &[C64]) -> f64 {
        let mut best = f64::INFINITY;
        for (z, _) in self.nodes() {
            for &l in spectrum {
                best = best.min((z - l).norm() / z.norm());
            }
        }
        best
    }
}

/// Diagnostics of one quadrature run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureReport {
    pub contour: Contour,
    pub level: u32,
    pub rel_change: f64,
    pub solves: usize,
}

struct NodeSolve {
    /// `z·(z − A)⁻¹ r_j` on the lower and upper ray.
    lower: Vec<Vec<C64>>,
    upper: Vec<Vec<C64>>,
}

/// Cache of resolvent solves against a fixed block of right-hand sides.
pub struct ResolventBank<'a, O: SectorialOperator + ?Sized> {
    op: &'a O,
    angle: f64,
    rhs: Vec<Vec<C64>>,
    x_min: f64,
    x_max: f64,
    nodes: BTreeMap<i64, NodeSolve>,
}

fn key_of(k: i64, level: u32) -> i64 {
    k << (MAX_LEVEL - level)
}

fn x_of(key: i64) -> f64 {
    key as f64 * BASE_STEP / (1u64 << MAX_LEVEL) as f64
}

impl<'a, O: SectorialOperator + ?Sized> ResolventBank<'a, O> {
    pub fn new(op: &'a O, angle: f64, rhs: Vec<Vec<C64>>, x_min: f64, x_max: f64) -> Self {
        crate::linalg::init_determinism();
        Self { op, angle, rhs, x_min, x_max, nodes: BTreeMap::new() }
    }

    fn level_keys(&self, level: u32) -> Vec<i64> {
        let step = BASE_STEP / (1u64 << level) as f64;
        let lo = (self.x_min / step).floor() as i64;
        let hi = (self.x_max / step).ceil() as i64;
        (lo..=hi).map(|k| key_of(k, level)).collect()
    }

    fn solve_node(&self, key: i64) -> Result<NodeSolve> {
        let x = x_of(key);
        let rhs = cols_to_mat(&self.rhs);
        let mut sides = Vec::with_capacity(2);
        for sign in [-1.0, 1.0] {
            let z = C64::from_polar(x.exp(), sign * self.angle);
            let lu = SparseLu::shifted(self.op.matrix(), z)?;
            let sol = mat_to_cols(lu.solve(rhs.as_ref())?.as_ref());
            sides.push(
                sol.into_iter().map(|v| self.op.project_range(&v).into_iter().map(|e| e * z).collect()).collect(),
            );
        }
        let upper = sides.pop().unwrap();
        let lower = sides.pop().unwrap();
        Ok(NodeSolve { lower, upper })
    }

    /// Ensures every node of `level` is solved; new nodes are solved in parallel.
    pub fn refine(&mut self, level: u32) -> Result<usize> {
        let missing: Vec<i64> = self.level_keys(level).into_iter().filter(|k| !self.nodes.contains_key(k)).collect();
        let solved: Vec<Result<NodeSolve>> = missing.par_iter().map(|&k| self.solve_node(k)).collect();
        let count = missing.len();
        for (k, s) in missing.into_iter().zip(solved) {
            self.nodes.insert(k, s?);
        }
        Ok(count)
    }

    /// Trapezoid sums `ψ(A) r_j` at `level` for every right-hand side.
    pub fn integrate(&self, psi: &AuxiliaryFunction, level: u32) -> Vec<Vec<C64>> {
        let step = BASE_STEP / (1u64 << level) as f64;
        let dim = self.rhs.first().map_or(0, |r| r.len());
        let mut out = vec![vec![C64::new(0.0, 0.0); dim]; self.rhs.len()];
        for key in self.level_keys(level) {
            let node = &self.nodes[&key];
            let x = x_of(key);
            let wl = psi.eval(C64::from_polar(x.exp(), -self.angle));
            let wu = -psi.eval(C64::from_polar(x.exp(), self.angle));
            for (j, acc) in out.iter_mut().enumerate() {
                for ((a, l), u) in acc.iter_mut().zip(&node.lower[j]).zip(&node.upper[j]) {
                    *a += wl * l + wu * u;
                }
            }
        }
        let scale = C64::new(0.0, -step / (2.0 * PI));
        for acc in out.iter_mut() {
            acc.iter_mut().for_each(|v| *v *= scale);
        }
        out
    }

    pub fn contour(&self, level: u32) -> Contour {
        Contour { angle: self.angle, x_min: self.x_min, x_max: self.x_max, step: BASE_STEP / (1u64 << level) as f64 }
    }

    pub fn solves(&self) -> usize {
        2 * self.nodes.len()
    }
}

/// Radial window `[x_min, x_max]` outside which every `ψ` in the family
/// contributes below `CUTOFF` of its peak.
pub fn radial_window(psis: &[AuxiliaryFunction], angle: f64, lower: f64, upper: f64) -> Result<(f64, f64)> {
    let (scan_lo, scan_hi) = (lower.ln() - 80.0, upper.ln() + 80.0);
    let nscan = ((scan_hi - scan_lo) / 0.25) as usize;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for psi in psis {
        let g: Vec<f64> = (0..=nscan)
            .map(|i| {
                let x = scan_lo + i as f64 * 0.25;
                let r = x.exp();
                let damp = (r / lower).min(1.0);
                let a = psi.eval(C64::from_polar(r, angle)).norm();
                let b = psi.eval(C64::from_polar(r, -angle)).norm();
                a.max(b) * damp
            })
            .collect();
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Quadrature(format!("{} is not finite on the contour", psi.label())));
        }
        let peak = g.iter().cloned().fold(0.0, f64::max);
        if peak == 0.0 {
            continue;
        }
        let first = g.iter().position(|&v| v >= CUTOFF * peak).unwrap();
        let last = g.iter().rposition(|&v| v >= CUTOFF * peak).unwrap();
        if first == 0 || last == nscan {
            return Err(Error::Quadrature(format!(
                "{} decays too slowly for the radial cutoffs (σ={}, τ={})",
                psi.label(),
                psi.sigma,
                psi.tau
            )));
        }
        lo = lo.min(scan_lo + first as f64 * 0.25 - 0.5);
        hi = hi.max(scan_lo + last as f64 * 0.25 + 0.5);
    }
    if !lo.is_finite() {
        // Every ψ vanishes identically; any window will do.
        return Ok((0.0, 0.0));
    }
    Ok((lo, hi))
}

/// `ψ_i(A) r_j` for every function and every right-hand side (assumed in
/// the range of `A`), refined until the relative change between levels is
/// at most `tol` for all pairs.
pub fn contour_family<O: SectorialOperator + ?Sized>(
    op: &O,
    psis: &[AuxiliaryFunction],
    rhs: &[Vec<C64>],
    angle: Option<f64>,
    tol: f64,
) -> Result<(Vec<Vec<Vec<C64>>>, QuadratureReport)> {
    let bounds = op.spectral_bounds();
    let mu = psis.iter().map(|p| p.mu).fold(PI, f64::min);
    if mu <= bounds.angle {
        return Err(Error::Precondition(format!(
            "auxiliary functions are holomorphic only on |arg z| < {mu:.4}, inside the sector bound {:.4}",
            bounds.angle
        )));
    }
    let angle = angle.unwrap_or((bounds.angle + mu) / 2.0);
    if angle <= bounds.angle || angle >= PI {
        return Err(Error::Precondition(format!(
            "contour angle {angle:.4} must lie strictly between the sector bound {:.4} and π",
            bounds.angle
        )));
    }
    for psi in psis {
        if psi.mu <= angle {
            log::debug!("{} is evaluated beyond its declared sector ({:.3} ≤ {:.3})", psi.label(), psi.mu, angle);
        }
    }
    let (x_min, x_max) = radial_window(psis, angle, bounds.lower, bounds.upper)?;
    let mut bank = ResolventBank::new(op, angle, rhs.to_vec(), x_min, x_max);
    let floors: Vec<f64> = rhs.iter().map(|r| 1e-4 * norm2(r)).collect();
    bank.refine(0)?;
    let mut prev: Vec<Vec<Vec<C64>>> = psis.iter().map(|p| bank.integrate(p, 0)).collect();
    let mut worst = f64::INFINITY;
    for level in 1..=MAX_LEVEL {
        bank.refine(level)?;
        let cur: Vec<Vec<Vec<C64>>> = psis.iter().map(|p| bank.integrate(p, level)).collect();
        worst = 0.0;
        for (pc, pp) in cur.iter().zip(&prev) {
            for ((c, p), floor) in pc.iter().zip(pp).zip(&floors) {
                let diff: f64 = c.iter().zip(p).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
                let den = norm2(c).max(*floor);
                if den > 0.0 {
                    worst = worst.max(diff / den);
                }
            }
        }
        if level >= 2 && worst <= tol {
            let report =
                QuadratureReport { contour: bank.contour(level), level, rel_change: worst, solves: bank.solves() };
            return Ok((cur, report));
        }
        prev = cur;
    }
    Err(Error::Quadrature(format!(
        "node doubling did not converge: relative change {worst:.3e} at the finest level (tolerance {tol:.1e})"
    )))
}
