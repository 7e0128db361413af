use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::GridSpec;

/// Points per decade of the default logarithmic t-grid.
pub const POINTS_PER_DECADE: usize = 16;

/// Decades below the grid spacing covered by [`TGrid::trace_for`].
pub const TRACE_DECADES: f64 = 5.0;

/// A strictly increasing positive t-grid with trapezoid weights in `log t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TGrid {
    values: Vec<f64>,
}

impl TGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Precondition("t-grid must not be empty".into()));
        }
        if values.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::Precondition("t-grid values must be positive and finite".into()));
        }
        if values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition("t-grid must be strictly increasing".into()));
        }
        Ok(Self { values })
    }

    /// Log-uniform grid from `t_min` to `t_max` inclusive.
    pub fn log_uniform(t_min: f64, t_max: f64, per_decade: usize) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min) || per_decade == 0 {
            return Err(Error::Precondition(format!("invalid t-range [{t_min}, {t_max}]")));
        }
        let decades = (t_max / t_min).log10();
        let count = (decades * per_decade as f64).ceil().max(1.0) as usize + 1;
        let (lo, hi) = (t_min.ln(), t_max.ln());
        let values = (0..count).map(|i| (lo + (hi - lo) * i as f64 / (count - 1) as f64).exp()).collect();
        Self::new(values)
    }

    /// `t_min = h`, `t_max =` period, 16 points per decade.
    pub fn default_for(grid: &GridSpec) -> Self {
        Self::log_uniform(grid.h_min(), grid.period_max(), POINTS_PER_DECADE).expect("grid spacing below period")
    }

    /// The default grid extended [`TRACE_DECADES`] below `h`, so boundary
    /// traces can be observed as `t → 0`.
    pub fn trace_for(grid: &GridSpec) -> Self {
        let t_min = grid.h_min() * 10f64.powf(-TRACE_DECADES);
        Self::log_uniform(t_min, grid.period_max(), POINTS_PER_DECADE).expect("grid spacing below period")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t_min(&self) -> f64 {
        self.values[0]
    }

    pub fn t_max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Trapezoid weights `Δ log t` (half cells at both ends; a single node gets weight 1).
    pub fn log_weights(&self) -> Vec<f64> {
        let n = self.values.len();
        if n == 1 {
            return vec![1.0];
        }
        let l: Vec<f64> = self.values.iter().map(|t| t.ln()).collect();
        (0..n)
            .map(|j| {
                let left = if j > 0 { l[j] - l[j - 1] } else { 0.0 };
                let right = if j + 1 < n { l[j + 1] - l[j] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect()
    }

    /// `Δt_j = t_j · Δlog t_j`.
    pub fn dt_weights(&self) -> Vec<f64> {
        self.values.iter().zip(self.log_weights()).map(|(t, w)| t * w).collect()
    }

    /// Trapezoid weights in `log s` over the truncated grid `t_0 … t_k`.
    pub fn partial_log_weights(&self, k: usize) -> Vec<f64> {
        if k == 0 {
            return vec![0.0];
        }
        let l: Vec<f64> = self.values[..=k].iter().map(|t| t.ln()).collect();
        (0..=k)
            .map(|j| {
                let left = if j > 0 { l[j] - l[j - 1] } else { 0.0 };
                let right = if j < k { l[j + 1] - l[j] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect()
    }

    /// Indices of nodes strictly inside `(t/2, 2t)`.
    pub fn whitney_slab(&self, t: f64) -> Vec<usize> {
        (0..self.values.len()).filter(|&j| self.values[j] > t / 2.0 && self.values[j] < 2.0 * t).collect()
    }

    /// Sub-grid of every `stride`-th node (used for the restriction property).
    pub fn subsample(&self, stride: usize) -> Self {
        Self { values: self.values.iter().step_by(stride.max(1)).cloned().collect() }
    }
}
