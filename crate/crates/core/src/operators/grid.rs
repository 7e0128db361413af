use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A flat periodic grid in one or two dimensions.
///
/// Cells are numbered with the first axis fastest: `cell = i0 + N·i1`.
/// A field with `w` components per cell stores component `c` of cell `k` at
/// `k·w + c`. Scalar fields carry `m` components, gradient fields carry
/// `m·n` components ordered `axis·m + comp`, and Dirac fields are the
/// concatenation `[scalar block, gradient block]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    m: usize,
    points: usize,
    lengths: Vec<f64>,
    spacing: Vec<f64>,
}

impl GridSpec {
    pub fn new(n: usize, m: usize, points: usize, lengths: &[f64]) -> Result<Self> {
        if !(1..=2).contains(&n) {
            return Err(Error::InvalidGrid(format!("dimension n={n} unsupported (only 1 or 2)")));
        }
        if m == 0 {
            return Err(Error::InvalidGrid("system size m must be at least 1".into()));
        }
        if points % 2 != 0 {
            return Err(Error::InvalidGrid(format!("N must be even (got {points})")));
        }
        if points < 8 {
            return Err(Error::InvalidGrid(format!("N must be at least 8 (got {points})")));
        }
        if lengths.len() != n {
            return Err(Error::InvalidGrid(format!("expected {n} period lengths, got {}", lengths.len())));
        }
        if lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidGrid("period lengths must be positive and finite".into()));
        }
        let spacing = lengths.iter().map(|l| l / points as f64).collect();
        Ok(Self { n, m, points, lengths: lengths.to_vec(), spacing })
    }

    /// Same grid with a different system size.
    pub fn with_m(&self, m: usize) -> Result<Self> {
        Self::new(self.n, m, self.points, &self.lengths)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Points per axis.
    pub fn points(&self) -> usize {
        self.points
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn h_min(&self) -> f64 {
        self.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn period_max(&self) -> f64 {
        self.lengths.iter().cloned().fold(0.0, f64::max)
    }

    pub fn cells(&self) -> usize {
        self.points.pow(self.n as u32)
    }

    /// Volume element `Π h_axis`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn scalar_dim(&self) -> usize {
        self.m * self.cells()
    }

    pub fn gradient_dim(&self) -> usize {
        self.m * self.n * self.cells()
    }

    pub fn dirac_dim(&self) -> usize {
        self.scalar_dim() + self.gradient_dim()
    }

    /// Multi-index of a cell.
    pub fn coords(&self, cell: usize) -> [usize; 2] {
        if self.n == 1 {
            [cell, 0]
        } else {
            [cell % self.points, cell / self.points]
        }
    }

    pub fn cell_index(&self, idx: [usize; 2]) -> usize {
        if self.n == 1 {
            idx[0]
        } else {
            idx[0] + self.points * idx[1]
        }
    }

    /// Neighbour of `cell` shifted by `delta` along `axis`, periodically.
    pub fn shift(&self, cell: usize, axis: usize, delta: isize) -> usize {
        let mut c = self.coords(cell);
        let np = self.points as isize;
        c[axis] = ((c[axis] as isize + delta).rem_euclid(np)) as usize;
        self.cell_index(c)
    }

    /// Node position `i·h` of a cell along each axis.
    pub fn position(&self, cell: usize) -> Vec<f64> {
        let c = self.coords(cell);
        (0..self.n).map(|a| c[a] as f64 * self.spacing[a]).collect()
    }

    /// Cell-centre position `(i + 1/2)·h`.
    pub fn midpoint(&self, cell: usize) -> Vec<f64> {
        let c = self.coords(cell);
        (0..self.n).map(|a| (c[a] as f64 + 0.5) * self.spacing[a]).collect()
    }

    /// Periodic Euclidean distance between two cell nodes.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let ca = self.coords(a);
        let cb = self.coords(b);
        let mut s = 0.0;
        for axis in 0..self.n {
            let np = self.points as isize;
            let raw = (ca[axis] as isize - cb[axis] as isize).rem_euclid(np);
            let k = raw.min(np - raw) as f64;
            let d = k * self.spacing[axis];
            s += d * d;
        }
        s.sqrt()
    }

    /// Offsets (as integer shifts per axis) of all cells with periodic
    /// distance to the origin strictly below `radius`.
    pub fn ball_offsets(&self, radius: f64) -> Vec<[isize; 2]> {
        let np = self.points as isize;
        let half = np / 2;
        let mut out = Vec::new();
        let range = |axis: usize| -> Vec<isize> {
            if axis < self.n {
                // Offsets −N/2+1..=N/2 enumerate each residue exactly once.
                (-half + 1..=half).collect()
            } else {
                vec![0]
            }
        };
        for dy in range(1) {
            for dx in range(0) {
                let mut d2 = 0.0;
                for (axis, k) in [dx, dy].iter().enumerate().take(self.n) {
                    let kk = (*k).abs().min(np - (*k).abs()) as f64 * self.spacing[axis];
                    d2 += kk * kk;
                }
                if d2.sqrt() < radius {
                    out.push([dx, dy]);
                }
            }
        }
        out
    }

    pub fn offset_cell(&self, cell: usize, off: [isize; 2]) -> usize {
        let mut c = cell;
        for axis in 0..self.n {
            if off[axis] != 0 {
                c = self.shift(c, axis, off[axis]);
            }
        }
        c
    }

    /// Continuous wave vector `2π k / ℓ` for the Fourier index of a cell,
    /// with indices folded into `(−N/2, N/2]`.
    pub fn wave_vector(&self, cell: usize) -> Vec<f64> {
        let c = self.coords(cell);
        (0..self.n)
            .map(|a| {
                let np = self.points as isize;
                let mut k = c[a] as isize;
                if k > np / 2 {
                    k -= np;
                }
                2.0 * std::f64::consts::PI * k as f64 / self.lengths[a]
            })
            .collect()
    }

    /// Eigenvalue of `G^†G` (forward-difference Laplacian) for wave index `cell`.
    pub fn laplace_symbol(&self, cell: usize) -> f64 {
        let c = self.coords(cell);
        (0..self.n)
            .map(|a| {
                let h = self.spacing[a];
                let theta = std::f64::consts::PI * c[a] as f64 / self.points as f64;
                4.0 * theta.sin().powi(2) / (h * h)
            })
            .sum()
    }

    /// Smallest nonzero eigenvalue of the discrete Laplacian.
    pub fn laplace_gap(&self) -> f64 {
        (0..self.n)
            .map(|a| {
                let h = self.spacing[a];
                4.0 * (std::f64::consts::PI / self.points as f64).sin().powi(2) / (h * h)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest eigenvalue of the discrete Laplacian.
    pub fn laplace_max(&self) -> f64 {
        self.spacing.iter().map(|h| 4.0 / (h * h)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn spacing_is_length_over_points() {
        let g = GridSpec::new(1, 1, 128, &[2.0 * PI]).unwrap();
        assert_eq!(g.spacing()[0], 2.0 * PI / 128.0);
        assert_eq!(g.cells(), 128);
    }

    #[test]
    fn two_dimensional_field_sizes() {
        let g = GridSpec::new(2, 2, 32, &[2.0 * PI, 2.0 * PI]).unwrap();
        assert_eq!(g.cells(), 32 * 32);
        assert_eq!(g.scalar_dim() / g.cells(), 2);
        assert_eq!(g.gradient_dim() / g.cells(), 4);
        assert_eq!(g.dirac_dim(), 6 * 1024);
    }

    #[test]
    fn rejects_bad_input() {
        let e = GridSpec::new(1, 1, 7, &[1.0]).unwrap_err();
        assert!(e.to_string().contains("N must be even"));
        assert!(GridSpec::new(3, 1, 8, &[1.0; 3]).is_err());
        assert!(GridSpec::new(1, 1, 8, &[0.0]).is_err());
        assert!(GridSpec::new(1, 1, 8, &[-2.0]).is_err());
        assert!(GridSpec::new(1, 1, 6, &[1.0]).is_err());
    }

    #[test]
    fn periodic_distance_and_balls() {
        let g = GridSpec::new(1, 1, 16, &[16.0]).unwrap();
        assert_eq!(g.distance(0, 15), 1.0);
        assert_eq!(g.distance(0, 8), 8.0);
        assert_eq!(g.ball_offsets(1.5).len(), 3);
        assert_eq!(g.ball_offsets(100.0).len(), 16);
        let g2 = GridSpec::new(2, 1, 8, &[8.0, 8.0]).unwrap();
        assert_eq!(g2.ball_offsets(1.01).len(), 5);
        assert_eq!(g2.shift(g2.cell_index([7, 3]), 0, 1), g2.cell_index([0, 3]));
    }
}
