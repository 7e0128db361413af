use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fft;
use crate::operators::GridSpec;
use crate::C64;

/// Composition of the finite test families used by the probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestFamily {
    /// Plane waves `e^{ik·x}` for `k = 1, …, fourier_modes` along the first axis
    /// (and the diagonal when `n = 2`).
    pub fourier_modes: usize,
    /// Random fields supported on `0 < |k|_∞ ≤ band`, per repetition.
    pub band_limited: usize,
    /// Dipole atoms `χ_B − χ_{B'}` with adjacent balls of radius `2^j h`
    /// (at most an eighth of the period), per repetition.
    pub atoms: usize,
    /// Band limit; `None` means a quarter of the points per axis.
    pub band: Option<usize>,
}

impl Default for TestFamily {
    fn default() -> Self {
        Self { fourier_modes: 4, band_limited: 4, atoms: 4, band: None }
    }
}

impl TestFamily {
    pub fn doubled(&self) -> Self {
        Self {
            fourier_modes: 2 * self.fourier_modes,
            band_limited: 2 * self.band_limited,
            atoms: 2 * self.atoms,
            band: self.band,
        }
    }

    pub fn band_for(&self, grid: &GridSpec) -> usize {
        self.band.unwrap_or(grid.points() / 4).clamp(1, grid.points() / 2 - 1)
    }

    /// Labelled members, each with `m` components per cell and zero mean in
    /// every component. Deterministic in `seed`.
    pub fn members(&self, grid: &GridSpec, reps: usize, seed: u64) -> Vec<(String, Vec<C64>)> {
        let m = grid.m();
        let mut out = Vec::new();
        let unit: Vec<C64> = (0..m).map(|c| C64::new(if c == 0 { 1.0 } else { 0.5 }, 0.0)).collect();
        let max_k = (grid.points() / 2 - 1) as i64;
        for k in 1..=self.fourier_modes as i64 {
            let k = k.min(max_k);
            let wave = if grid.n() == 2 && k % 2 == 0 { [k / 2, k / 2] } else { [k, 0] };
            out.push((format!("fourier{wave:?}"), fft::plane_wave(grid, wave, &unit)));
        }
        let band = self.band_for(grid);
        for rep in 0..reps.max(1) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(rep as u64 + 1)));
            for j in 0..self.band_limited {
                out.push((format!("band{band}#{rep}.{j}"), band_limited(grid, band, &mut rng)));
            }
            for j in 0..self.atoms {
                let radius = (grid.h_min() * f64::powi(2.0, 1 + (j % 3) as i32)).min(grid.period_max() / 8.0);
                let centre = rng.gen_range(0..grid.cells());
                out.push((format!("atom(r={radius:.4})#{rep}.{j}"), dipole(grid, centre, radius, &unit)));
            }
        }
        out
    }
}

/// Unit-`ℓ²` random field with Fourier support in `0 < |k|_∞ ≤ band`.
pub fn band_limited(grid: &GridSpec, band: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let m = grid.m();
    let mut hat = vec![C64::new(0.0, 0.0); grid.cells() * m];
    for cell in 0..grid.cells() {
        let c = grid.coords(cell);
        let k: Vec<usize> = (0..grid.n())
            .map(|a| {
                let i = c[a];
                i.min(grid.points() - i)
            })
            .collect();
        let kmax = k.iter().copied().max().unwrap_or(0);
        if kmax == 0 || kmax > band {
            continue;
        }
        for comp in 0..m {
            hat[cell * m + comp] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    fft::transform(grid, &mut hat, m, true);
    let norm = crate::linalg::norm2(&hat);
    if norm > 0.0 {
        hat.iter_mut().for_each(|v| *v /= norm);
    }
    hat
}

/// `χ_{B(x₀, r)} − χ_{B(x₁, r)}` with `x₁` shifted by `2r` along the first
/// axis; the second ball is rescaled so the mean vanishes exactly.
fn dipole(grid: &GridSpec, centre: usize, radius: f64, amplitude: &[C64]) -> Vec<C64> {
    let m = grid.m();
    let steps = (2.0 * radius / grid.spacing()[0]).round().max(1.0) as isize;
    let other = grid.shift(centre, 0, steps);
    let plus: Vec<bool> = (0..grid.cells()).map(|x| grid.distance(x, centre) < radius).collect();
    let minus: Vec<bool> = (0..grid.cells()).map(|x| grid.distance(x, other) < radius && !plus[x]).collect();
    let (np, nm) = (plus.iter().filter(|b| **b).count(), minus.iter().filter(|b| **b).count());
    let weight = if nm > 0 { np as f64 / nm as f64 } else { 0.0 };
    let mut out = vec![C64::new(0.0, 0.0); grid.cells() * m];
    for x in 0..grid.cells() {
        let s = if plus[x] {
            1.0
        } else if minus[x] {
            -weight
        } else {
            0.0
        };
        for c in 0..m {
            out[x * m + c] = amplitude[c] * s;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{relative_mean, MEAN_ZERO_TOL};

    #[test]
    fn members_are_mean_zero_and_deterministic() {
        for (n, pts) in [(1, 64), (2, 16)] {
            let g = GridSpec::new(n, 2, pts, &vec![2.0 * std::f64::consts::PI; n]).unwrap();
            let fam = TestFamily::default();
            let a = fam.members(&g, 2, 7);
            let b = fam.members(&g, 2, 7);
            assert_eq!(a.len(), 4 + 2 * 8);
            for ((la, fa), (lb, fb)) in a.iter().zip(&b) {
                assert_eq!(la, lb);
                assert_eq!(fa, fb);
                assert!(relative_mean(fa, 2) <= MEAN_ZERO_TOL, "{la}");
                assert!(fa.iter().any(|z| z.norm() > 0.0), "{la}");
            }
        }
    }
}
