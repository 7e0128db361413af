use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::auxiliary::AuxiliaryFunction;
use super::contour::{contour_family, QuadratureReport, DEFAULT_TOL};
use super::oracle::EigenOracle;
use super::{DiracSquare, SectorialOperator};
use crate::error::{check_len, Error, Result};
use crate::linalg::{norm2, operator_norm, rel_diff, sub, SparseLu};
use crate::operators::{DiracOperator, DivFormOperator};
use crate::C64;

/// Dimension up to which `estimate_sector` uses a dense eigensolve.
pub const SECTOR_EIGEN_LIMIT: usize = 1024;

/// `(z − A)⁻¹ f` by sparse LU, refusing `z` inside the sector bound.
pub fn resolvent<O: SectorialOperator + ?Sized>(op: &O, z: C64, f: &[C64]) -> Result<Vec<C64>> {
    check_len(op.dim(), f.len())?;
    let bounds = op.spectral_bounds();
    if z == C64::new(0.0, 0.0) || z.arg().abs() <= bounds.angle {
        return Err(Error::Precondition(format!(
            "z = {z} lies inside the spectral sector of half-angle {:.4}",
            bounds.angle
        )));
    }
    let u = SparseLu::shifted(op.matrix(), z)?.solve_vec(f)?;
    let residual = norm2(&sub(&sub(&u.iter().map(|v| v * z).collect::<Vec<_>>(), &op.apply(&u)), f));
    let fnorm = norm2(f);
    if residual > 1e-10 * fnorm {
        return Err(Error::Numerical(format!(
            "resolvent residual {:.3e} exceeds tolerance (‖f‖ = {fnorm:.3e})",
            residual
        )));
    }
    Ok(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorMethod {
    Eigen,
    /// Dimension too large: the rigorous form bound is reported instead.
    FieldOfValuesBound,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorialProfile {
    pub omega_est: f64,
    pub method: SectorMethod,
    /// `(μ, M_μ)`; `None` when `μ ≤ omega_est`.
    pub resolvent_bounds: Vec<(f64, Option<f64>)>,
    pub spectrum_sample: Vec<C64>,
}

/// Sectoriality angle and resolvent constants `M_μ = sup ‖z(z − A)⁻¹‖` over
/// the rays `|arg z| = μ` (sampled log-uniformly across the spectral range).
pub fn estimate_sector<O: SectorialOperator + ?Sized>(op: &O, mu_grid: &[f64]) -> Result<SectorialProfile> {
    let bounds = op.spectral_bounds();
    let (omega_est, method, spectrum_sample) = if op.dim() <= SECTOR_EIGEN_LIMIT {
        let oracle = EigenOracle::new(op.matrix())?;
        let vals = oracle.eigenvalues().to_vec();
        let omega = vals.iter().filter(|l| !oracle.is_null(**l)).map(|l| l.arg().abs()).fold(0.0, f64::max);
        (omega, SectorMethod::Eigen, vals)
    } else {
        (bounds.angle, SectorMethod::FieldOfValuesBound, Vec::new())
    };
    let mut resolvent_bounds = Vec::with_capacity(mu_grid.len());
    for &mu in mu_grid {
        if mu <= omega_est || mu >= PI {
            resolvent_bounds.push((mu, None));
            continue;
        }
        let mut best: f64 = 1.0;
        let (lo, hi) = ((bounds.lower / 10.0).ln(), (bounds.upper * 10.0).ln());
        for i in 0..16 {
            let r = (lo + (hi - lo) * i as f64 / 15.0).exp();
            for sign in [-1.0, 1.0] {
                let z = C64::from_polar(r, sign * mu);
                let lu = SparseLu::shifted(op.matrix(), z)?;
                let norm = operator_norm(
                    op.dim(),
                    |v| Ok(lu.solve_vec(v)?.into_iter().map(|x| x * z).collect()),
                    |v| Ok(lu.solve_adjoint_vec(v)?.into_iter().map(|x| x * z.conj()).collect()),
                    300,
                    1e-7,
                )?;
                best = best.max(norm);
            }
        }
        resolvent_bounds.push((mu, Some(best)));
    }
    Ok(SectorialProfile { omega_est, method, resolvent_bounds, spectrum_sample })
}

/// `ψ_i(A) f_j` for every pair. Inputs are split along the nullspace; the
/// nullspace part is multiplied by `ψ(0)` when the function declares one.
pub fn apply_psi_family<O: SectorialOperator + ?Sized>(
    op: &O,
    psis: &[AuxiliaryFunction],
    fs: &[Vec<C64>],
) -> Result<(Vec<Vec<Vec<C64>>>, QuadratureReport)> {
    for f in fs {
        check_len(op.dim(), f.len())?;
    }
    let splits: Vec<(Vec<C64>, Vec<C64>)> = fs.iter().map(|f| op.split_null(f)).collect();
    let ranges: Vec<Vec<C64>> = splits.iter().map(|s| s.1.clone()).collect();
    let (mut out, report) = contour_family(op, psis, &ranges, None, DEFAULT_TOL)?;
    for (psi, per_f) in psis.iter().zip(out.iter_mut()) {
        if let Some(c) = psi.at_zero() {
            for (res, (null, _)) in per_f.iter_mut().zip(&splits) {
                res.iter_mut().zip(null).for_each(|(r, n)| *r += c * n);
            }
        }
    }
    Ok((out, report))
}

pub fn apply_psi<O: SectorialOperator + ?Sized>(op: &O, psi: &AuxiliaryFunction, f: &[C64]) -> Result<Vec<C64>> {
    let (mut out, _) = apply_psi_family(op, std::slice::from_ref(psi), &[f.to_vec()])?;
    Ok(out.pop().unwrap().pop().unwrap())
}

/// `z^{1/2}(1+z)^{−2}`, the regularised integrand shared by both square-root splittings.
fn sqrt_kernel() -> AuxiliaryFunction {
    AuxiliaryFunction::new("z^1/2(1+z)^-2", 0.5, 1.5, PI, Some(C64::new(0.0, 0.0)), |z| {
        z.sqrt() / ((z + 1.0) * (z + 1.0))
    })
}

fn one_plus_squared<O: SectorialOperator + ?Sized>(op: &O, r: &[C64]) -> Vec<C64> {
    let ar = op.apply(r);
    let aar = op.apply(&ar);
    let v: Vec<C64> = r.iter().zip(&ar).zip(&aar).map(|((x, y), z)| x + y * 2.0 + z).collect();
    op.project_range(&v)
}

/// `A^{1/2} f = [z^{1/2}(1+z)^{−2}](A)·(1+A)² f`.
pub fn sqrt_apply<O: SectorialOperator + ?Sized>(op: &O, f: &[C64]) -> Result<Vec<C64>> {
    Ok(sqrt_apply_many(op, &[f.to_vec()])?.pop().unwrap())
}

pub fn sqrt_apply_many<O: SectorialOperator + ?Sized>(op: &O, fs: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
    let rhs: Vec<Vec<C64>> = fs.iter().map(|f| one_plus_squared(op, &op.project_range(f))).collect();
    let (mut out, _) = contour_family(op, &[sqrt_kernel()], &rhs, None, DEFAULT_TOL)?;
    Ok(out.pop().unwrap())
}

/// `A^{−1/2} f = [z^{1/2}(1+z)^{−2}](A)·(1+A)² A⁻¹ f` on the range.
pub fn inv_sqrt_apply<O: SectorialOperator + ?Sized>(op: &O, f: &[C64]) -> Result<Vec<C64>> {
    Ok(inv_sqrt_apply_many(op, &[f.to_vec()])?.pop().unwrap())
}

pub fn inv_sqrt_apply_many<O: SectorialOperator + ?Sized>(op: &O, fs: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
    let mut rhs = Vec::with_capacity(fs.len());
    for f in fs {
        let u = op.solve_on_range(&op.project_range(f))?;
        rhs.push(one_plus_squared(op, &u));
    }
    let (mut out, _) = contour_family(op, &[sqrt_kernel()], &rhs, None, DEFAULT_TOL)?;
    Ok(out.pop().unwrap())
}

/// `e^{−t A^{1/2}} f`; the nullspace part is carried along unchanged.
pub fn poisson_semigroup<O: SectorialOperator + ?Sized>(op: &O, t: f64, f: &[C64]) -> Result<Vec<C64>> {
    Ok(poisson_family(op, &[t], f)?.pop().unwrap())
}

pub fn poisson_family<O: SectorialOperator + ?Sized>(op: &O, ts: &[f64], f: &[C64]) -> Result<Vec<Vec<C64>>> {
    if let Some(t) = ts.iter().find(|t| !(**t > 0.0)) {
        return Err(Error::Precondition(format!("semigroup time must be positive, got {t}")));
    }
    let psis: Vec<AuxiliaryFunction> = ts.iter().map(|&t| AuxiliaryFunction::poisson(t)).collect();
    let (out, _) = apply_psi_family(op, &psis, &[f.to_vec()])?;
    Ok(out.into_iter().map(|mut v| v.pop().unwrap()).collect())
}

/// `e^{−t[DB]} h` for `h` projected onto `ran(D)`; the component outside
/// `ran(D)` is discarded.
pub fn dirac_semigroup(dirac: &DiracOperator, t: f64, h: &[C64]) -> Result<Vec<C64>> {
    Ok(dirac_semigroup_family(dirac, &[t], h)?.pop().unwrap())
}

pub fn dirac_semigroup_family(dirac: &DiracOperator, ts: &[f64], h: &[C64]) -> Result<Vec<Vec<C64>>> {
    check_len(dirac.dim(), h.len())?;
    if let Some(t) = ts.iter().find(|t| !(**t > 0.0)) {
        return Err(Error::Precondition(format!("semigroup time must be positive, got {t}")));
    }
    let sq = DiracSquare::new(dirac);
    let r = dirac.project_range(h);
    let psis: Vec<AuxiliaryFunction> = ts.iter().map(|&t| AuxiliaryFunction::poisson(t)).collect();
    let (out, _) = contour_family(&sq, &psis, &[r], None, DEFAULT_TOL)?;
    Ok(out.into_iter().map(|mut v| v.pop().unwrap()).collect())
}

/// First-order scaling `ψ(t·DB) h` with `ψ(ζ) = φ(ζ²)`, i.e. `φ(t²(DB)²) h`.
pub fn dirac_first_order(
    dirac: &DiracOperator,
    phi: &AuxiliaryFunction,
    ts: &[f64],
    h: &[C64],
) -> Result<Vec<Vec<C64>>> {
    check_len(dirac.dim(), h.len())?;
    let sq = DiracSquare::new(dirac);
    let r = dirac.project_range(h);
    let psis: Vec<AuxiliaryFunction> = ts.iter().map(|&t| phi.dilate(t * t)).collect();
    let (out, _) = contour_family(&sq, &psis, &[r], None, DEFAULT_TOL)?;
    Ok(out.into_iter().map(|mut v| v.pop().unwrap()).collect())
}

/// `∇ L^{−1/2} f`.
pub fn riesz_transform(op: &DivFormOperator, f: &[C64]) -> Result<Vec<C64>> {
    Ok(op.gradient(&inv_sqrt_apply(op, f)?))
}

/// Relative residual of `DB e^{−t[DB]} [af, 0] = [0, −∇ e^{−tL^{1/2}} f]` for `f ∈ ran L`.
pub fn link_residual(dirac: &DiracOperator, t: f64, f: &[C64]) -> Result<f64> {
    let l = dirac.divform();
    let f = l.project_range(f);
    let zero_g = vec![C64::new(0.0, 0.0); dirac.grid().gradient_dim()];
    let h = dirac.join(&l.mul_a(&f), &zero_g);
    let lhs = dirac.apply_db(&dirac_semigroup(dirac, t, &h)?);
    let u = poisson_semigroup(l, t, &f)?;
    let grad: Vec<C64> = l.gradient(&u).into_iter().map(|v| -v).collect();
    let rhs = dirac.join(&vec![C64::new(0.0, 0.0); l.dim()], &grad);
    Ok(rel_diff(&lhs, &rhs))
}

/// Relative residual of `e^{−t[DB]} [−aL^{1/2}f, ∇f] = [a∂_t u, ∇u](t)`
/// with `u = e^{−tL^{1/2}} f`.
pub fn intertwining_residual(dirac: &DiracOperator, t: f64, f: &[C64]) -> Result<f64> {
    let l = dirac.divform();
    let f = l.project_range(f);
    let minus_a_sqrt: Vec<C64> = l.mul_a(&sqrt_apply(l, &f)?).into_iter().map(|v| -v).collect();
    let lhs = dirac_semigroup(dirac, t, &dirac.join(&minus_a_sqrt, &l.gradient(&f)))?;
    let u = poisson_semigroup(l, t, &f)?;
    let a_dt_u: Vec<C64> = l.mul_a(&sqrt_apply(l, &u)?).into_iter().map(|v| -v).collect();
    let rhs = dirac.join(&a_dt_u, &l.gradient(&u));
    Ok(rel_diff(&lhs, &rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::plane_wave;
    use crate::linalg::random_vector;
    use crate::operators::{CoefficientFamily, CoefficientField, GridSpec};

    fn divform(n_pts: usize, fam: CoefficientFamily) -> DivFormOperator {
        let g = GridSpec::new(1, 1, n_pts, &[2.0 * PI]).unwrap();
        DivFormOperator::assemble(&CoefficientField::from_family(&g, &fam).unwrap()).unwrap()
    }

    fn symbol(l: &DivFormOperator, k: i64) -> f64 {
        let h = l.grid().spacing()[0];
        4.0 * (k as f64 * h / 2.0).sin().powi(2) / (h * h)
    }

    #[test]
    fn resolvent_of_fourier_mode() {
        let l = divform(32, CoefficientFamily::t1());
        let f = plane_wave(l.grid(), [3, 0], &[C64::new(1.0, 0.0)]);
        let u = resolvent(&l, C64::new(-1.0, 0.0), &f).unwrap();
        let expect: Vec<C64> = f.iter().map(|v| -v / (1.0 + symbol(&l, 3))).collect();
        assert!(rel_diff(&u, &expect) < 1e-13);
        assert!(resolvent(&l, C64::new(2.0, 0.0), &f).is_err());
    }

    #[test]
    fn poisson_and_sqrt_of_fourier_mode() {
        let l = divform(32, CoefficientFamily::t1());
        for k in [1i64, 5] {
            let f = plane_wave(l.grid(), [k, 0], &[C64::new(1.0, 0.0)]);
            let s = symbol(&l, k);
            let p = poisson_semigroup(&l, 0.7, &f).unwrap();
            let expect: Vec<C64> = f.iter().map(|v| v * (-0.7 * s.sqrt()).exp()).collect();
            assert!(rel_diff(&p, &expect) < 1e-9, "poisson k={k}: {}", rel_diff(&p, &expect));
            let q = sqrt_apply(&l, &f).unwrap();
            let expect: Vec<C64> = f.iter().map(|v| v * s.sqrt()).collect();
            assert!(rel_diff(&q, &expect) < 1e-9, "sqrt k={k}: {}", rel_diff(&q, &expect));
        }
    }

    #[test]
    fn constants_pass_through_the_semigroup() {
        let l = divform(16, CoefficientFamily::t2());
        let ones = vec![C64::new(1.0, 0.0); 16];
        let p = poisson_semigroup(&l, 1.0, &ones).unwrap();
        assert!(rel_diff(&p, &ones) < 1e-12);
        assert!(norm2(&sqrt_apply(&l, &ones).unwrap()) < 1e-12);
    }

    #[test]
    fn sqrt_matches_oracle_on_complex_coefficients() {
        let l = divform(32, CoefficientFamily::t3());
        let oracle = EigenOracle::new(l.matrix()).unwrap();
        let f = random_vector(32, 17);
        let a = sqrt_apply(&l, &f).unwrap();
        let b = oracle.apply(|z| z.sqrt(), Some(C64::new(0.0, 0.0)), &f);
        assert!(rel_diff(&a, &b) < 1e-8, "{}", rel_diff(&a, &b));
        let c = inv_sqrt_apply(&l, &a).unwrap();
        assert!(rel_diff(&c, &l.project_range(&f)) < 1e-8);
    }

    #[test]
    fn sector_of_rotated_scalar_coefficient() {
        let fam = CoefficientFamily::Constant { a: [(PI / 4.0).cos(), (PI / 4.0).sin()], d: [1.0, 0.0] };
        let l = divform(16, fam);
        let p = estimate_sector(&l, &[PI / 2.0, 3.0 * PI / 4.0]).unwrap();
        assert!((p.omega_est - PI / 4.0).abs() < 1e-10);
        let m: Vec<f64> = p.resolvent_bounds.iter().map(|(_, m)| m.unwrap()).collect();
        assert!(m[0] >= 1.0 && m[1] >= 1.0 && m[1] <= m[0] + 1e-9);
    }

    #[test]
    fn link_identity_on_smooth_coefficients() {
        let g = GridSpec::new(1, 1, 32, &[2.0 * PI]).unwrap();
        let c = CoefficientField::from_family(&g, &CoefficientFamily::t2()).unwrap();
        let d = DiracOperator::assemble(&c).unwrap();
        let f = random_vector(32, 4);
        assert!(link_residual(&d, 0.5, &f).unwrap() < 1e-7);
        assert!(intertwining_residual(&d, 0.5, &f).unwrap() < 1e-6);
    }
}
