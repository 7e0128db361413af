//! Discrete Fourier transforms of grid fields (per component, over the cells).

use rustfft::FftPlanner;

use crate::operators::GridSpec;
use crate::C64;

/// In-place unnormalised DFT over the cell index of every component of a
/// field with `width` components per cell. `inverse` also divides by the
/// number of cells, so forward followed by inverse is the identity.
pub fn transform(grid: &GridSpec, data: &mut [C64], width: usize, inverse: bool) {
    let np = grid.points();
    let cells = grid.cells();
    assert_eq!(data.len(), cells * width, "field length does not match grid");
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(np) } else { planner.plan_fft_forward(np) };
    let mut line = vec![C64::new(0.0, 0.0); np];
    for comp in 0..width {
        for axis in 0..grid.n() {
            let stride = if axis == 0 { 1 } else { np };
            let lines = cells / np;
            for l in 0..lines {
                let base = if axis == 0 { l * np } else { l };
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[(base + i * stride) * width + comp];
                }
                fft.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    data[(base + i * stride) * width + comp] = *v;
                }
            }
        }
    }
    if inverse {
        let s = 1.0 / cells as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }
}

/// Plane wave `e^{i k·x}` on the grid nodes for integer wave numbers `k`,
/// replicated into each of `width` components with the given amplitudes.
pub fn plane_wave(grid: &GridSpec, k: [i64; 2], amplitudes: &[C64]) -> Vec<C64> {
    let width = amplitudes.len();
    let mut out = Vec::with_capacity(grid.cells() * width);
    for cell in 0..grid.cells() {
        let x = grid.position(cell);
        let phase: f64 =
            (0..grid.n()).map(|a| 2.0 * std::f64::consts::PI * k[a] as f64 * x[a] / grid.lengths()[a]).sum();
        let e = C64::from_polar(1.0, phase);
        out.extend(amplitudes.iter().map(|amp| amp * e));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_vector, rel_diff};

    #[test]
    fn roundtrip_two_dimensional() {
        let g = GridSpec::new(2, 1, 8, &[1.0, 2.0]).unwrap();
        let x = random_vector(64 * 3, 5);
        let mut y = x.clone();
        transform(&g, &mut y, 3, false);
        transform(&g, &mut y, 3, true);
        assert!(rel_diff(&y, &x) < 1e-14);
    }

    #[test]
    fn plane_wave_hits_single_bin() {
        let g = GridSpec::new(1, 1, 16, &[3.0]).unwrap();
        let mut w = plane_wave(&g, [3, 0], &[C64::new(1.0, 0.0)]);
        transform(&g, &mut w, 1, false);
        assert!((w[3] - C64::new(16.0, 0.0)).norm() < 1e-12);
        assert!(w.iter().enumerate().filter(|(i, _)| *i != 3).all(|(_, v)| v.norm() < 1e-12));
    }
}
