use serde::{Deserialize, Serialize};

use super::tgrid::TGrid;
use crate::calculus::{apply_psi_family, contour_family, AuxiliaryFunction, DiracSquare, DEFAULT_TOL};
use crate::error::{check_len, Error, Result};
use crate::operators::{DiracOperator, DivFormOperator, GridSpec};
use crate::C64;

/// A function `F(t, x)` on `tgrid × grid` with `width` components per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpaceField {
    pub grid: GridSpec,
    pub tgrid: TGrid,
    pub width: usize,
    /// One vector of length `cells·width` per t-node.
    pub values: Vec<Vec<C64>>,
    /// Free-form provenance (generating operator and ψ).
    pub metadata: String,
}

impl HalfSpaceField {
    pub fn new(grid: GridSpec, tgrid: TGrid, width: usize, values: Vec<Vec<C64>>) -> Result<Self> {
        if values.len() != tgrid.len() {
            return Err(Error::Dimension { expected: tgrid.len(), found: values.len() });
        }
        for v in &values {
            check_len(grid.cells() * width, v.len())?;
            if v.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::Numerical("half-space field contains non-finite values".into()));
            }
        }
        Ok(Self { grid, tgrid, width, values, metadata: String::new() })
    }

    pub fn zeros(grid: GridSpec, tgrid: TGrid, width: usize) -> Self {
        let len = grid.cells() * width;
        let values = vec![vec![C64::new(0.0, 0.0); len]; tgrid.len()];
        Self { grid, tgrid, width, values, metadata: String::new() }
    }

    pub fn with_metadata(mut self, metadata: impl Into<String>) -> Self {
        self.metadata = metadata.into();
        self
    }

    /// `|F(t_j, x)|²` summed over components, per node and cell.
    pub fn density(&self) -> Vec<Vec<f64>> {
        self.values
            .iter()
            .map(|v| v.chunks(self.width).map(|c| c.iter().map(|z| z.norm_sqr()).sum()).collect())
            .collect()
    }

    /// Nodewise `g(t_j)·F(t_j, ·)`.
    pub fn scale_by<F: Fn(f64) -> f64>(&self, g: F) -> Self {
        let values = self
            .values
            .iter()
            .zip(self.tgrid.values())
            .map(|(v, &t)| {
                let s = g(t);
                v.iter().map(|z| z * s).collect()
            })
            .collect();
        Self { values, ..self.clone() }
    }

    pub fn scale(&self, c: C64) -> Self {
        let values = self.values.iter().map(|v| v.iter().map(|z| z * c).collect()).collect();
        Self { values, ..self.clone() }
    }

    /// Restriction to the t-nodes selected by `idx`.
    pub fn restrict(&self, idx: &[usize]) -> Result<Self> {
        let tgrid = TGrid::new(idx.iter().map(|&j| self.tgrid.values()[j]).collect())?;
        let values = idx.iter().map(|&j| self.values[j].clone()).collect();
        Ok(Self { tgrid, values, ..self.clone() })
    }

    /// Keeps only the components `[start, start + width)` of each cell.
    pub fn components(&self, start: usize, width: usize) -> Self {
        let values = self
            .values
            .iter()
            .map(|v| v.chunks(self.width).flat_map(|c| c[start..start + width].iter().copied()).collect())
            .collect();
        Self { width, values, ..self.clone() }
    }
}

/// Which operator an extension is built from. `L` uses second-order scaling
/// `ψ(t²L)`; `Dirac` uses first-order scaling `ψ(tDB)` with `ψ(ζ) = φ(ζ²)`,
/// realised as `φ(t²(DB)²)`.
#[derive(Debug, Clone, Copy)]
pub enum ExtensionOperator<'a> {
    L(&'a DivFormOperator),
    Dirac(&'a DiracOperator),
}

/// `(Q f)(t_j) = ψ(t_j² L) f`, or `φ(t_j² (DB)²) h` in Dirac mode.
pub fn q_extension(
    target: ExtensionOperator<'_>,
    psi: &AuxiliaryFunction,
    f: &[C64],
    tgrid: &TGrid,
) -> Result<HalfSpaceField> {
    q_extension_many(target, psi, &[f.to_vec()], tgrid).map(|mut v| v.pop().unwrap())
}

/// Batched [`q_extension`] sharing the resolvent solves across inputs.
pub fn q_extension_many(
    target: ExtensionOperator<'_>,
    psi: &AuxiliaryFunction,
    fs: &[Vec<C64>],
    tgrid: &TGrid,
) -> Result<Vec<HalfSpaceField>> {
    let psis: Vec<AuxiliaryFunction> = tgrid.values().iter().map(|&t| psi.dilate(t * t)).collect();
    let (grid, width, out, label) = match target {
        ExtensionOperator::L(op) => {
            let (out, _) = apply_psi_family(op, &psis, fs)?;
            (op.grid().clone(), op.grid().m(), out, format!("psi(t^2 L), psi = {}", psi.label()))
        }
        ExtensionOperator::Dirac(dirac) => {
            let sq = DiracSquare::new(dirac);
            let rhs: Vec<Vec<C64>> = fs.iter().map(|h| dirac.project_range(h)).collect();
            for h in &rhs {
                check_len(dirac.dim(), h.len())?;
            }
            let (out, _) = contour_family(&sq, &psis, &rhs, None, DEFAULT_TOL)?;
            let g = dirac.grid();
            (g.clone(), g.m() + g.m() * g.n(), out, format!("phi(t^2 (DB)^2), phi = {}", psi.label()))
        }
    };
    (0..fs.len())
        .map(|j| {
            let values = out.iter().map(|per_t| per_t[j].clone()).collect();
            let values = match target {
                ExtensionOperator::L(_) => values,
                ExtensionOperator::Dirac(d) => dirac_cellwise(d, values),
            };
            Ok(HalfSpaceField::new(grid.clone(), tgrid.clone(), width, values)?.with_metadata(label.clone()))
        })
        .collect()
}

/// Reorders `[scalar block, gradient block]` into per-cell interleaving.
pub(crate) fn dirac_cellwise(d: &DiracOperator, values: Vec<Vec<C64>>) -> Vec<Vec<C64>> {
    let g = d.grid();
    let (m, nm) = (g.m(), g.m() * g.n());
    values
        .into_iter()
        .map(|h| {
            let (s, w) = d.split(&h);
            let mut out = Vec::with_capacity(h.len());
            for cell in 0..g.cells() {
                out.extend_from_slice(&s[cell * m..(cell + 1) * m]);
                out.extend_from_slice(&w[cell * nm..(cell + 1) * nm]);
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::plane_wave;
    use crate::linalg::rel_diff;
    use crate::operators::{CoefficientFamily, CoefficientField};
    use std::f64::consts::PI;

    #[test]
    fn z_exp_extension_of_fourier_mode() {
        let g = GridSpec::new(1, 1, 32, &[2.0 * PI]).unwrap();
        let l =
            DivFormOperator::assemble(&CoefficientField::from_family(&g, &CoefficientFamily::t1()).unwrap()).unwrap();
        let f = plane_wave(&g, [2, 0], &[C64::new(1.0, 0.0)]);
        let tg = TGrid::log_uniform(0.1, 2.0, 4).unwrap();
        let q = q_extension(ExtensionOperator::L(&l), &AuxiliaryFunction::z_exp(), &f, &tg).unwrap();
        let h = g.spacing()[0];
        let s = 4.0 * (h).sin().powi(2) / (h * h);
        for (t, v) in tg.values().iter().zip(&q.values) {
            let w = t * t * s;
            let expect: Vec<C64> = f.iter().map(|z| z * w * (-w).exp()).collect();
            assert!(rel_diff(v, &expect) < 1e-9);
        }
        let zero =
            q_extension(ExtensionOperator::L(&l), &AuxiliaryFunction::z_exp(), &vec![C64::new(0.0, 0.0); 32], &tg)
                .unwrap();
        assert!(zero.values.iter().all(|v| v.iter().all(|z| z.norm() == 0.0)));
    }
}
