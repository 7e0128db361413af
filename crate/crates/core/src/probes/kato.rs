use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::family::band_limited;
use crate::analysis::l2_norm;
use crate::calculus::sqrt_apply_many;
use crate::error::{Error, Result};
use crate::operators::DivFormOperator;
use crate::C64;

pub const KATO_MIN_SAMPLES: usize = 100;
const PATHOLOGY_BOUNDS: [f64; 2] = [1e-6, 1e6];

/// Range of `‖aL^{1/2}f‖₂ / ‖∇f‖₂` over random band-limited data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KatoInterval {
    pub min: f64,
    pub max: f64,
    pub samples: usize,
    pub band: usize,
    pub seed: u64,
    /// Set when a ratio leaves `[1e-6, 1e6]`, a sign of a broken discretisation.
    pub pathology: bool,
}

pub fn kato_ratio(op: &DivFormOperator, samples: usize, band: usize, seed: u64) -> Result<KatoInterval> {
    if samples < KATO_MIN_SAMPLES {
        return Err(Error::Precondition(format!(
            "Kato probe needs at least {KATO_MIN_SAMPLES} samples, got {samples}"
        )));
    }
    let grid = op.grid();
    let band = band.clamp(1, grid.points() / 2 - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs: Vec<Vec<C64>> = (0..samples).map(|_| op.project_range(&band_limited(grid, band, &mut rng))).collect();
    let roots = sqrt_apply_many(op, &fs)?;
    let (m, nm) = (grid.m(), grid.m() * grid.n());
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for (f, r) in fs.iter().zip(&roots) {
        let num = l2_norm(grid, &op.mul_a(r), m);
        let den = l2_norm(grid, &op.gradient(f), nm);
        let q = num / den;
        lo = lo.min(q);
        hi = hi.max(q);
    }
    let pathology = !(lo >= PATHOLOGY_BOUNDS[0] && hi <= PATHOLOGY_BOUNDS[1]);
    if pathology {
        log::warn!("Kato ratios [{lo:.3e}, {hi:.3e}] indicate a discretisation pathology");
    }
    Ok(KatoInterval { min: lo, max: hi, samples, band, seed, pathology })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{CoefficientFamily, CoefficientField, GridSpec};

    fn coeffs(fam: CoefficientFamily) -> CoefficientField {
        let g = GridSpec::new(1, 1, 64, &[2.0 * std::f64::consts::PI]).unwrap();
        CoefficientField::from_family(&g, &fam).unwrap()
    }

    #[test]
    fn constant_coefficients_give_one() {
        let l = DivFormOperator::assemble(&coeffs(CoefficientFamily::t1())).unwrap();
        let k = kato_ratio(&l, 100, 16, 1).unwrap();
        assert!((k.min - 1.0).abs() < 1e-9 && (k.max - 1.0).abs() < 1e-9, "{k:?}");
    }

    #[test]
    fn scaling_d_scales_ratio_by_root() {
        let c = coeffs(CoefficientFamily::t2());
        let l = DivFormOperator::assemble(&c).unwrap();
        let l4 = DivFormOperator::assemble(&c.scale_d(4.0).unwrap()).unwrap();
        let k = kato_ratio(&l, 100, 16, 3).unwrap();
        let k4 = kato_ratio(&l4, 100, 16, 3).unwrap();
        assert!((k4.max / k.max - 2.0).abs() < 1e-8);
        assert!(k.min >= 0.3 && k.max <= 3.5, "{k:?}");
    }

    #[test]
    fn too_few_samples() {
        let l = DivFormOperator::assemble(&coeffs(CoefficientFamily::t1())).unwrap();
        assert!(kato_ratio(&l, 10, 4, 0).is_err());
    }
}
