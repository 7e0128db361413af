//! Tabulated coefficients stored as a SCALC1 boundary field.
//!
//! Each cell carries `m² + (nm)²` values: the row-major `a` block followed by
//! the row-major `d` block.

use std::path::Path;

use super::field::FieldFile;
use crate::error::{Error, Result};
use crate::operators::{CoefficientField, GridSpec};
use crate::C64;

pub fn encode_coefficients(coeffs: &CoefficientField) -> Result<Vec<u8>> {
    let grid = coeffs.grid();
    let (m, nm) = (grid.m(), grid.m() * grid.n());
    let width = m * m + nm * nm;
    let mut values = Vec::with_capacity(grid.cells() * width);
    for cell in 0..grid.cells() {
        values.extend_from_slice(coeffs.a_block(cell));
        values.extend_from_slice(coeffs.d_block(cell));
    }
    Ok(FieldFile::boundary(grid, width, values)?.encode())
}

/// Decodes tabulated coefficients. The container does not store lengths, so
/// they are supplied by the caller (one per axis).
pub fn decode_coefficients(bytes: &[u8], lengths: &[f64]) -> Result<CoefficientField> {
    let file = FieldFile::decode(bytes)?;
    if !file.is_boundary() {
        return Err(Error::Format("coefficient files carry no t-grid".into()));
    }
    if lengths.len() != file.n {
        return Err(Error::Config(format!("{} lengths given for a {}-dimensional grid", lengths.len(), file.n)));
    }
    let (m, nm) = (file.m, file.m * file.n);
    let width = m * m + nm * nm;
    if file.width != width {
        return Err(Error::Format(format!("coefficient files need {width} values per cell, found {}", file.width)));
    }
    let grid = GridSpec::new(file.n, m, file.points[0], lengths)?;
    let mut a: Vec<C64> = Vec::with_capacity(grid.cells() * m * m);
    let mut d: Vec<C64> = Vec::with_capacity(grid.cells() * nm * nm);
    for cell in file.values.chunks(width) {
        a.extend_from_slice(&cell[..m * m]);
        d.extend_from_slice(&cell[m * m..]);
    }
    CoefficientField::from_tables(&grid, a, d)
}

pub fn read_coefficients(path: &Path, lengths: &[f64]) -> Result<CoefficientField> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Config(format!("cannot read coefficient file {}: {e}", path.display())))?;
    decode_coefficients(&bytes, lengths)
}

pub fn write_coefficients(coeffs: &CoefficientField, path: &Path) -> Result<()> {
    super::write_atomic(path, &encode_coefficients(coeffs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::CoefficientFamily;
    use std::f64::consts::PI;

    #[test]
    fn tabulated_round_trip() {
        let g = GridSpec::new(2, 1, 8, &[2.0 * PI, 2.0 * PI]).unwrap();
        let c = CoefficientField::from_family(&g, &CoefficientFamily::t3()).unwrap();
        let back = decode_coefficients(&encode_coefficients(&c).unwrap(), g.lengths()).unwrap();
        assert_eq!(back.a(), c.a());
        assert_eq!(back.d(), c.d());
        assert_eq!(back.lambda_d, c.lambda_d);
    }

    #[test]
    fn wrong_width_rejected() {
        let g = GridSpec::new(1, 1, 8, &[1.0]).unwrap();
        let bytes = FieldFile::boundary(&g, 3, vec![C64::new(1.0, 0.0); 24]).unwrap().encode();
        assert!(matches!(decode_coefficients(&bytes, &[1.0]), Err(Error::Format(_))));
    }

    #[test]
    fn non_elliptic_table_rejected() {
        let g = GridSpec::new(1, 1, 8, &[1.0]).unwrap();
        let mut values = vec![C64::new(1.0, 0.0); 16];
        values[3] = C64::new(-1.0, 0.0);
        let bytes = FieldFile::boundary(&g, 2, values).unwrap().encode();
        assert!(matches!(decode_coefficients(&bytes, &[1.0]), Err(Error::Coefficients(_))));
    }
}
