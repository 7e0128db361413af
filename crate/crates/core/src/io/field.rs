//! The SCALC1 array container.
//!
//! Layout, all integers `u64` and all floats `f64`, little-endian:
//!
//! ```text
//! "SCALC1" | n | m | N_0 … N_{n−1} | T | t_0 … t_{T−1} | (re, im) pairs
//! ```
//!
//! The payload is row-major: t-node slowest, then cell, then component.
//! `T = 0` marks a boundary field. The number of components per cell is
//! whatever divides the payload evenly.

use std::path::Path;

use crate::analysis::{HalfSpaceField, TGrid};
use crate::error::{Error, Result};
use crate::operators::GridSpec;
use crate::C64;

pub const MAGIC: &[u8; 6] = b"SCALC1";
/// Largest number of grid points per axis accepted by the decoder.
pub const MAX_POINTS: u64 = 1 << 16;
/// Largest number of complex values accepted by the decoder.
pub const MAX_VALUES: u64 = 1 << 28;

/// Decoded contents of a SCALC1 container.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub n: usize,
    pub m: usize,
    pub points: Vec<usize>,
    /// Empty for a boundary field.
    pub tgrid: Vec<f64>,
    /// Components per cell.
    pub width: usize,
    pub values: Vec<C64>,
}

impl FieldFile {
    pub fn boundary(grid: &GridSpec, width: usize, values: Vec<C64>) -> Result<Self> {
        crate::error::check_len(grid.cells() * width, values.len())?;
        Ok(Self { n: grid.n(), m: grid.m(), points: vec![grid.points(); grid.n()], tgrid: Vec::new(), width, values })
    }

    pub fn half_space(field: &HalfSpaceField) -> Self {
        let g = &field.grid;
        Self {
            n: g.n(),
            m: g.m(),
            points: vec![g.points(); g.n()],
            tgrid: field.tgrid.values().to_vec(),
            width: field.width,
            values: field.values.iter().flatten().copied().collect(),
        }
    }

    pub fn cells(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_boundary(&self) -> bool {
        self.tgrid.is_empty()
    }

    /// Checks the header against a grid (the container does not store lengths).
    pub fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        if self.n != grid.n() || self.m != grid.m() || self.points.iter().any(|&p| p != grid.points()) {
            return Err(Error::Format(format!(
                "file grid n={}, m={}, N={:?} does not match n={}, m={}, N={}",
                self.n,
                self.m,
                self.points,
                grid.n(),
                grid.m(),
                grid.points()
            )));
        }
        Ok(())
    }

    pub fn into_half_space(self, grid: &GridSpec) -> Result<HalfSpaceField> {
        self.check_grid(grid)?;
        if self.is_boundary() {
            return Err(Error::Format("expected a half-space field, found a boundary field".into()));
        }
        let tgrid = TGrid::new(self.tgrid)?;
        let slice = self.values.len() / tgrid.len();
        let values = self.values.chunks(slice).map(<[C64]>::to_vec).collect();
        HalfSpaceField::new(grid.clone(), tgrid, self.width, values)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(6 + 8 * (3 + self.n + self.tgrid.len()) + 16 * self.values.len());
        out.extend_from_slice(MAGIC);
        for v in [self.n, self.m].iter().chain(&self.points) {
            out.extend_from_slice(&(*v as u64).to_le_bytes());
        }
        out.extend_from_slice(&(self.tgrid.len() as u64).to_le_bytes());
        for t in &self.tgrid {
            out.extend_from_slice(&t.to_le_bytes());
        }
        for z in &self.values {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(6)? != MAGIC {
            return Err(Error::Format("bad magic (expected SCALC1)".into()));
        }
        let n = r.u64()?;
        if !(1..=2).contains(&n) {
            return Err(Error::Format(format!("dimension n = {n} not in {{1, 2}}")));
        }
        let m = r.u64()?;
        if !(1..=16).contains(&m) {
            return Err(Error::Format(format!("component count m = {m} not in 1..=16")));
        }
        let mut points = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let p = r.u64()?;
            if !(2..=MAX_POINTS).contains(&p) {
                return Err(Error::Format(format!("points per axis {p} out of range")));
            }
            points.push(p as usize);
        }
        if n == 2 && points[0] != points[1] {
            return Err(Error::Format("grids must have the same number of points per axis".into()));
        }
        let tlen = r.u64()?;
        if tlen > (r.remaining() / 8) as u64 {
            return Err(Error::Format(format!("t-grid length {tlen} exceeds the file")));
        }
        let mut tgrid = Vec::with_capacity(tlen as usize);
        for _ in 0..tlen {
            tgrid.push(r.f64()?);
        }
        if !tgrid.is_empty() {
            TGrid::new(tgrid.clone()).map_err(|e| Error::Format(format!("invalid t-grid: {e}")))?;
        }
        let payload = r.remaining();
        if payload % 16 != 0 {
            return Err(Error::Format(format!("payload of {payload} bytes is not a whole number of complex values")));
        }
        let count = (payload / 16) as u64;
        if count > MAX_VALUES {
            return Err(Error::Format(format!("payload of {count} values exceeds the decoder limit")));
        }
        let cells: u64 = points.iter().map(|&p| p as u64).product();
        let slices = cells * tlen.max(1);
        if count == 0 || count % slices != 0 {
            return Err(Error::Format(format!("{count} values do not fill {slices} cell slices evenly")));
        }
        let width = (count / slices) as usize;
        let mut values = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let re = r.f64()?;
            let im = r.f64()?;
            if !(re.is_finite() && im.is_finite()) {
                return Err(Error::Format("non-finite value in payload".into()));
            }
            values.push(C64::new(re, im));
        }
        Ok(Self { n: n as usize, m: m as usize, points, tgrid, width, values })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn write(&self, path: &Path) -> Result<()> {
        super::write_atomic(path, &self.encode())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.remaining() < k {
            return Err(Error::Format(format!("truncated file at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_vector;

    #[test]
    fn boundary_round_trip_is_bit_exact() {
        let g = GridSpec::new(2, 2, 8, &[1.0, 1.0]).unwrap();
        let v = random_vector(64 * 2, 4);
        let f = FieldFile::boundary(&g, 2, v.clone()).unwrap();
        let bytes = f.encode();
        let back = FieldFile::decode(&bytes).unwrap();
        assert_eq!(back, f);
        assert!(back.is_boundary());
        assert_eq!(back.encode(), bytes);
    }

    #[test]
    fn half_space_round_trip() {
        let g = GridSpec::new(1, 1, 16, &[1.0]).unwrap();
        let tg = TGrid::log_uniform(0.1, 1.0, 4).unwrap();
        let values = (0..tg.len()).map(|j| random_vector(16 * 3, j as u64)).collect();
        let field = HalfSpaceField::new(g.clone(), tg, 3, values).unwrap();
        let back = FieldFile::decode(&FieldFile::half_space(&field).encode()).unwrap().into_half_space(&g).unwrap();
        assert_eq!(back.values, field.values);
        assert_eq!(back.tgrid, field.tgrid);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let g = GridSpec::new(1, 1, 8, &[1.0]).unwrap();
        let good = FieldFile::boundary(&g, 1, random_vector(8, 1)).unwrap().encode();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(FieldFile::decode(&bad), Err(Error::Format(_))));
        assert!(FieldFile::decode(&good[..good.len() - 3]).is_err());
        assert!(FieldFile::decode(&good[..20]).is_err());
        let mut huge = good.clone();
        huge[6..14].copy_from_slice(&7u64.to_le_bytes());
        assert!(FieldFile::decode(&huge).is_err());
    }
}
