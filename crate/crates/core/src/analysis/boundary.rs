use rayon::prelude::*;

use super::tgrid::TGrid;
use crate::error::{check_len, Error, Result};
use crate::fft;
use crate::operators::{gradient, GridSpec};
use crate::C64;

/// Relative size of a component mean below which data count as mean-zero.
pub const MEAN_ZERO_TOL: f64 = 1e-10;

/// Discrete `L^p` (quasi-)norm `(Σ_x Δx |g(x)|^p)^{1/p}`; `p = ∞` gives the maximum.
pub fn lp_norm(grid: &GridSpec, g: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return g.iter().fold(0.0, |a, v| a.max(v.abs()));
    }
    let dx = grid.cell_volume();
    let s: f64 = g.iter().map(|v| v.abs().powf(p)).sum();
    (dx * s).powf(1.0 / p)
}

/// Pointwise Euclidean norm over the `width` components of each cell.
pub fn pointwise_norm(f: &[C64], width: usize) -> Vec<f64> {
    f.chunks(width).map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect()
}

/// `‖f‖₂` with the cell-volume weight.
pub fn l2_norm(grid: &GridSpec, f: &[C64], width: usize) -> f64 {
    lp_norm(grid, &pointwise_norm(f, width), 2.0)
}

/// Largest component mean relative to the root-mean-square of `f`.
pub fn relative_mean(f: &[C64], width: usize) -> f64 {
    let cells = f.len() / width;
    let rms = (f.iter().map(|z| z.norm_sqr()).sum::<f64>() / cells as f64).sqrt();
    if rms == 0.0 {
        return 0.0;
    }
    (0..width).map(|c| f.iter().skip(c).step_by(width).sum::<C64>().norm() / cells as f64).fold(0.0, f64::max) / rms
}

/// The smooth maximal function `sup_{t ∈ {0} ∪ T} |φ_t * f|` realising `H^p`
/// for `p ≤ 1`, with `φ̂_t(ξ) = e^{−t²|ξ|²}` and `T` the default t-grid.
/// Computed once and reused for every exponent.
#[derive(Debug, Clone)]
pub struct HpProfile {
    grid: GridSpec,
    pointwise: Vec<f64>,
    maximal: Vec<f64>,
    mean_zero: bool,
}

impl HpProfile {
    pub fn new(grid: &GridSpec, f: &[C64], width: usize) -> Result<Self> {
        check_len(grid.cells() * width, f.len())?;
        let pointwise = pointwise_norm(f, width);
        let mean_zero = relative_mean(f, width) <= MEAN_ZERO_TOL;
        let maximal = if mean_zero { smooth_maximal(grid, f, width) } else { Vec::new() };
        Ok(Self { grid: grid.clone(), pointwise, maximal, mean_zero })
    }

    /// The maximal function, empty when the data are not mean-zero.
    pub fn maximal(&self) -> &[f64] {
        &self.maximal
    }

    /// `L^p` norm for `p > 1`, the smooth-maximal quasi-norm for `p ≤ 1`.
    pub fn norm(&self, p: f64) -> Result<f64> {
        if !(p > 0.5) {
            return Err(Error::Precondition(format!("Hardy exponent must exceed 1/2, got {p}")));
        }
        if p > 1.0 {
            return Ok(lp_norm(&self.grid, &self.pointwise, p));
        }
        if !self.mean_zero {
            return Err(Error::Precondition(format!("H^p with p = {p} <= 1 requires mean-zero data")));
        }
        Ok(lp_norm(&self.grid, &self.maximal, p))
    }
}

fn smooth_maximal(grid: &GridSpec, f: &[C64], width: usize) -> Vec<f64> {
    let mut hat = f.to_vec();
    fft::transform(grid, &mut hat, width, false);
    let k2: Vec<f64> = (0..grid.cells()).map(|c| grid.wave_vector(c).iter().map(|k| k * k).sum()).collect();
    let ts: Vec<f64> = std::iter::once(0.0).chain(TGrid::default_for(grid).values().iter().copied()).collect();
    ts.par_iter()
        .map(|&t| {
            let mut g = hat.clone();
            for (cell, chunk) in g.chunks_mut(width).enumerate() {
                let w = (-t * t * k2[cell]).exp();
                chunk.iter_mut().for_each(|z| *z *= w);
            }
            fft::transform(grid, &mut g, width, true);
            pointwise_norm(&g, width)
        })
        .reduce_with(|a, b| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect())
        .unwrap_or_default()
}

/// `‖f‖_{H^p}` for a field with `width` components per cell.
pub fn hp_quasinorm(grid: &GridSpec, f: &[C64], width: usize, p: f64) -> Result<f64> {
    HpProfile::new(grid, f, width)?.norm(p)
}

/// `‖∇f‖_{H^p}` for a scalar-block field.
pub fn sobolev_homog_norm(grid: &GridSpec, f: &[C64], p: f64) -> Result<f64> {
    check_len(grid.scalar_dim(), f.len())?;
    hp_quasinorm(grid, &gradient(grid, f), grid.m() * grid.n(), p)
}

/// Homogeneous Hölder seminorm. For `α > 0` the maximum over node pairs of
/// `|f(x) − f(y)| / dist(x, y)^α`; for `α = 0` the dyadic BMO norm
/// `max_Q ⨍_Q |f − f_Q|`.
pub fn holder_norm(grid: &GridSpec, f: &[C64], width: usize, alpha: f64) -> Result<f64> {
    check_len(grid.cells() * width, f.len())?;
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Precondition(format!("Hölder exponent must lie in [0, 1), got {alpha}")));
    }
    if alpha == 0.0 {
        return Ok(dyadic_bmo(grid, f, width));
    }
    let cells = grid.cells();
    let value = |a: usize, b: usize| -> f64 {
        (0..width).map(|c| (f[a * width + c] - f[b * width + c]).norm_sqr()).sum::<f64>().sqrt()
    };
    Ok((0..cells)
        .into_par_iter()
        .map(|x| (x + 1..cells).map(|y| value(x, y) / grid.distance(x, y).powf(alpha)).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max))
}

fn dyadic_bmo(grid: &GridSpec, f: &[C64], width: usize) -> f64 {
    let np = grid.points();
    let n = grid.n();
    let mut intervals = vec![(0usize, np)];
    let mut levels = Vec::new();
    while !intervals.is_empty() {
        levels.push(intervals.clone());
        intervals = intervals
            .iter()
            .filter(|(a, b)| b - a > 1)
            .flat_map(|&(a, b)| {
                let mid = a + (b - a) / 2;
                [(a, mid), (mid, b)]
            })
            .collect();
    }
    let mut best = 0.0f64;
    for level in &levels {
        let ys: Vec<(usize, usize)> = if n == 2 { level.clone() } else { vec![(0, 1)] };
        for &(x0, x1) in level {
            for &(y0, y1) in &ys {
                let cells: Vec<usize> = (y0..y1).flat_map(|y| (x0..x1).map(move |x| grid.cell_index([x, y]))).collect();
                let count = cells.len() as f64;
                let mean: Vec<C64> =
                    (0..width).map(|c| cells.iter().map(|&i| f[i * width + c]).sum::<C64>() / count).collect();
                let osc: f64 = cells
                    .iter()
                    .map(|&i| (0..width).map(|c| (f[i * width + c] - mean[c]).norm_sqr()).sum::<f64>().sqrt())
                    .sum::<f64>()
                    / count;
                best = best.max(osc);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::plane_wave;
    use crate::linalg::random_vector;
    use std::f64::consts::PI;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(1, 1, n, &[2.0 * PI]).unwrap()
    }

    #[test]
    fn p2_is_the_l2_norm() {
        let g = grid(32);
        let f = random_vector(32, 9);
        let expect = (g.cell_volume() * f.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
        assert!((hp_quasinorm(&g, &f, 1, 2.0).unwrap() - expect).abs() < 1e-14 * expect);
    }

    #[test]
    fn small_p_requires_mean_zero() {
        let g = grid(16);
        let ones = vec![C64::new(1.0, 0.0); 16];
        assert!(hp_quasinorm(&g, &ones, 1, 0.8).is_err());
        let w = plane_wave(&g, [1, 0], &[C64::new(1.0, 0.0)]);
        let a = hp_quasinorm(&g, &w, 1, 0.8).unwrap();
        let b = hp_quasinorm(&g, &w.iter().map(|z| z * 3.0).collect::<Vec<_>>(), 1, 0.8).unwrap();
        assert!((b - 3.0 * a).abs() < 1e-12 * b);
        assert!(hp_quasinorm(&g, &w, 1, 0.5).is_err());
    }

    #[test]
    fn sobolev_norm_of_a_fourier_mode() {
        let g = grid(32);
        let f = plane_wave(&g, [2, 0], &[C64::new(1.0, 0.0)]);
        let h = g.spacing()[0];
        let sym = 2.0 * (h).sin() / h;
        let expect = sym * (2.0 * PI).sqrt();
        assert!((sobolev_homog_norm(&g, &f, 2.0).unwrap() - expect).abs() < 1e-12 * expect);
        let ones = vec![C64::new(1.0, 0.0); 32];
        assert_eq!(sobolev_homog_norm(&g, &ones, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn holder_and_bmo_examples() {
        let g = grid(64);
        let ones = vec![C64::new(2.0, 0.0); 64];
        assert_eq!(holder_norm(&g, &ones, 1, 0.5).unwrap(), 0.0);
        assert_eq!(holder_norm(&g, &ones, 1, 0.0).unwrap(), 0.0);
        let step: Vec<C64> = (0..64).map(|i| C64::new(if i < 32 { 1.0 } else { -1.0 }, 0.0)).collect();
        assert!((holder_norm(&g, &step, 1, 0.0).unwrap() - 1.0).abs() < 1e-15);
        let alpha = 0.5;
        let cusp: Vec<C64> = (0..64).map(|i| C64::new(g.distance(i, 0).powf(alpha), 0.0)).collect();
        let v = holder_norm(&g, &cusp, 1, alpha).unwrap();
        assert!((0.999..1.5).contains(&v), "{v}");
    }
}
