//! Measurement campaigns: off-diagonal decay, Kato ratios, boundedness curves
//! of resolvent, gradient and Riesz families on Hardy spaces, identification
//! of adapted and classical norms, and critical-exponent estimation.
//!
//! Every operator norm on `H^p` for `p ≠ 2` is a supremum over a finite test
//! family and therefore only a lower bound for the true norm.

mod critical;
mod family;
mod kato;
mod offdiag;

pub use critical::{
    adjoint_operator, bounded_interval, estimate_critical, identification_curves, identification_ratio,
    probe_gradient_hp, probe_resolvent_hp, probe_riesz, BoundednessProbe, CriticalBound, CriticalEstimate,
    IdentificationCurve, IdentificationMode, ProbeCurve, StructuralCheck, BREAKDOWN_FACTOR,
};
pub use family::{band_limited, TestFamily};
pub use kato::{kato_ratio, KatoInterval, KATO_MIN_SAMPLES};
pub use offdiag::{
    default_z_grid, offdiag_measure, offdiag_norms, separated_sets, set_distance, OffDiagFamily, OffDiagFit,
    DEFAULT_SEPARATION_RATIOS, FIT_RESIDUAL_MAX,
};

use serde::{Deserialize, Serialize};

use crate::analysis::TGrid;
use crate::error::{Error, Result};
use crate::operators::GridSpec;

/// Number of points of the default exponent grid.
pub const DEFAULT_P_POINTS: usize = 24;
/// Range of the default exponent grid.
pub const DEFAULT_P_RANGE: [f64; 2] = [0.55, 16.0];

/// Settings shared by the probe campaigns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub p_grid: Vec<f64>,
    /// Scales `t` of the operator families; `None` means four points per
    /// decade from the grid spacing to the period.
    pub t_grid: Option<Vec<f64>>,
    pub family: TestFamily,
    /// Independent draws of the random members of the test family.
    pub reps: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { p_grid: default_p_grid(), t_grid: None, family: TestFamily::default(), reps: 1, seed: 2024 }
    }
}

/// `DEFAULT_P_POINTS` log-spaced exponents spanning `DEFAULT_P_RANGE`.
pub fn default_p_grid() -> Vec<f64> {
    let [lo, hi] = DEFAULT_P_RANGE;
    let k = DEFAULT_P_POINTS - 1;
    (0..=k).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / k as f64).exp()).collect()
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_grid.len() < 2 {
            return Err(Error::Config("p_grid needs at least two exponents".into()));
        }
        if self.p_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("p_grid must be strictly increasing".into()));
        }
        if let Some(&p) = self.p_grid.iter().find(|p| !(**p > 0.5) || !p.is_finite()) {
            return Err(Error::Config(format!("exponent {p} is not above the Hardy floor 1/2")));
        }
        if let Some(ts) = &self.t_grid {
            TGrid::new(ts.clone())?;
        }
        if self.family.fourier_modes + self.family.band_limited + self.family.atoms == 0 {
            return Err(Error::Config("test family is empty".into()));
        }
        Ok(())
    }

    pub fn tgrid_for(&self, grid: &GridSpec) -> Result<TGrid> {
        match &self.t_grid {
            Some(ts) => TGrid::new(ts.clone()),
            None => TGrid::log_uniform(grid.h_min(), grid.period_max(), 4),
        }
    }
}
