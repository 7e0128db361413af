//! Independent references for the calculus and the adapted norms: dense
//! elimination, closed-form Fourier evaluations and algebraic identities.

use std::f64::consts::PI;

use scalc_core::analysis::{adapted_hardy_norm, l2_norm, nt_maximal, q_extension, ExtensionOperator, TGrid};
use scalc_core::calculus::{apply_psi, poisson_family, resolvent, sqrt_apply, AuxiliaryFunction};
use scalc_core::operators::{CoefficientFamily, CoefficientField, DivFormOperator, GridSpec};
use scalc_core::C64;

fn op(n: usize, m: usize, points: usize, family: &CoefficientFamily) -> DivFormOperator {
    let grid = GridSpec::new(n, m, points, &vec![2.0 * PI; n]).unwrap();
    DivFormOperator::assemble(&CoefficientField::from_family(&grid, family).unwrap()).unwrap()
}

fn families() -> [CoefficientFamily; 3] {
    [CoefficientFamily::t1(), CoefficientFamily::t2(), CoefficientFamily::t3()]
}

fn pseudo_random(len: usize, seed: u64) -> Vec<C64> {
    let mut s = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
    let mut next = || {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    (0..len).map(|_| C64::new(next(), next())).collect()
}

fn rel_err(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den.max(1e-300)).sqrt()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
fn dense_solve(mut a: Vec<Vec<C64>>, mut b: Vec<C64>) -> Vec<C64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].norm().total_cmp(&a[j][k].norm())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                let v = a[k][j];
                a[i][j] -= f * v;
            }
            let v = b[k];
            b[i] -= f * v;
        }
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let s: C64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Dense matrix of `op` built column by column from matrix-free applications.
fn dense(op: &DivFormOperator) -> Vec<Vec<C64>> {
    let n = op.dim();
    let mut rows = vec![vec![C64::new(0.0, 0.0); n]; n];
    for j in 0..n {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[j] = C64::new(1.0, 0.0);
        for (i, v) in op.apply(&e).into_iter().enumerate() {
            rows[i][j] = v;
        }
    }
    rows
}

fn mode(grid: &GridSpec, k: i64) -> Vec<C64> {
    (0..grid.cells()).map(|c| C64::from_polar(1.0, k as f64 * grid.position(c)[0])).collect()
}

#[test]
fn resolvent_matches_dense_elimination() {
    let cases = [
        op(1, 1, 16, &CoefficientFamily::t3()),
        op(2, 1, 8, &CoefficientFamily::t2()),
        op(1, 2, 8, &CoefficientFamily::t3()),
    ];
    for (k, l) in cases.iter().enumerate() {
        let z = C64::new(-1.5, 0.7);
        let f = pseudo_random(l.dim(), k as u64 + 1);
        let mut a = dense(l);
        for (i, row) in a.iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v = -*v;
            }
            row[i] += z;
        }
        let expect = dense_solve(a, f.clone());
        let got = resolvent(l, z, &f).unwrap();
        assert!(rel_err(&got, &expect) < 1e-10, "case {k}: {:e}", rel_err(&got, &expect));
    }
}

#[test]
fn square_root_squares_to_the_operator() {
    for family in families() {
        let l = op(1, 1, 32, &family);
        let f = l.project_range(&pseudo_random(l.dim(), 7));
        let twice = sqrt_apply(&l, &sqrt_apply(&l, &f).unwrap()).unwrap();
        let expect = l.apply(&f);
        assert!(rel_err(&twice, &expect) < 1e-8, "{family:?}: {:e}", rel_err(&twice, &expect));
    }
}

#[test]
fn calculus_composes_like_functions() {
    let bump =
        || AuxiliaryFunction::new("z(1+z)^-2", 1.0, 1.0, PI, Some(C64::new(0.0, 0.0)), |z| z / ((1.0 + z) * (1.0 + z)));
    for family in families() {
        let l = op(1, 1, 32, &family);
        let f = l.project_range(&pseudo_random(l.dim(), 3));
        // z(1+z)^-2 applied twice is z²(1+z)^-4, the default auxiliary function.
        let composed = apply_psi(&l, &bump(), &apply_psi(&l, &bump(), &f).unwrap()).unwrap();
        let product = apply_psi(&l, &AuxiliaryFunction::default_family(), &f).unwrap();
        assert!(rel_err(&composed, &product) < 1e-7);
        // (−1 − L)⁻¹ = −(1 + L)⁻¹, so L(1+L)⁻² f = L R(−1) R(−1) f.
        let z = C64::new(-1.0, 0.0);
        let direct = l.apply(&resolvent(&l, z, &resolvent(&l, z, &f).unwrap()).unwrap());
        let single = apply_psi(&l, &bump(), &f).unwrap();
        assert!(rel_err(&single, &direct) < 1e-8);
    }
}

#[test]
fn sqrt_exp_norm_of_a_mode_matches_per_mode_quadrature() {
    let l = op(1, 1, 64, &CoefficientFamily::t1());
    let grid = l.grid().clone();
    let h = 2.0 * PI / 64.0;
    let tgrid = TGrid::default_for(&grid);
    let ts = tgrid.values();
    let logs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    for k in [1i64, 3, 9] {
        let f = mode(&grid, k);
        let symbol = 4.0 * (k as f64 * h / 2.0).sin().powi(2) / (h * h);
        let mut square = 0.0;
        for (j, &t) in ts.iter().enumerate() {
            let left = if j > 0 { logs[j] - logs[j - 1] } else { 0.0 };
            let right = if j + 1 < ts.len() { logs[j + 1] - logs[j] } else { 0.0 };
            let balls = (0..64usize).filter(|&i| (i.min(64 - i) as f64) * h < t).count() as f64 * h;
            let r = t * symbol.sqrt();
            let psi = r * (-r).exp();
            square += 0.5 * (left + right) * balls / t * psi * psi * 2.0 * PI;
        }
        let norm = adapted_hardy_norm(&l, &f, 0.0, 2.0, &AuxiliaryFunction::sqrt_exp(), &tgrid).unwrap();
        assert!((norm - square.sqrt()).abs() <= 1e-6 * norm, "k = {k}: {norm} vs {}", square.sqrt());
    }
}

#[test]
fn poisson_extension_of_modes_follows_the_symbol() {
    let l = op(1, 1, 32, &CoefficientFamily::t1());
    let grid = l.grid().clone();
    let h = 2.0 * PI / 32.0;
    let ts = [0.01, 0.1, 1.0, 3.0];
    for k in [1i64, 5, 15] {
        let f = mode(&grid, k);
        let root = 2.0 * (k as f64 * h / 2.0).sin().abs() / h;
        for (t, u) in ts.iter().zip(poisson_family(&l, &ts, &f).unwrap()) {
            let expect: Vec<C64> = f.iter().map(|v| v * (-t * root).exp()).collect();
            // Deeply decayed modes sit at rounding level relative to the input.
            let err = rel_err(&u, &expect) * norm(&expect);
            assert!(err <= 1e-8 * norm(&expect) + 1e-14 * norm(&f), "k = {k}, t = {t}: {err:e}");
        }
    }
}

#[test]
fn nontangential_bound_is_stable_across_modes() {
    let l = op(1, 1, 64, &CoefficientFamily::t1());
    let grid = l.grid().clone();
    let tgrid = TGrid::default_for(&grid);
    let ratios: Vec<f64> = [1i64, 2, 4, 8]
        .iter()
        .map(|&k| {
            let f = mode(&grid, k);
            let u = q_extension(ExtensionOperator::L(&l), &AuxiliaryFunction::poisson(1.0), &f, &tgrid).unwrap();
            let n = nt_maximal(&u);
            l2_norm(&grid, &n.iter().map(|v| C64::new(*v, 0.0)).collect::<Vec<_>>(), 1) / l2_norm(&grid, &f, 1)
        })
        .collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(*r), b.max(*r)));
    // |u| ≤ |f| pointwise for a decaying mode, and the first slab keeps most of it.
    assert!(hi <= 1.0 + 1e-9, "{ratios:?}");
    assert!(lo >= 0.3, "{ratios:?}");
}
