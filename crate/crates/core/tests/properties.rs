use std::f64::consts::PI;

use proptest::prelude::*;
use scalc_core::analysis::{
    carleson, carleson_over, conical_square, fubini_tent_square, nt_maximal, nt_maximal_over, tent_norm,
    HalfSpaceField, TGrid,
};
use scalc_core::calculus::resolvent;
use scalc_core::io::{
    decode_coefficients, emit_config, encode_coefficients, parse_config, Campaign, CoefficientSource, FieldFile,
    GridConfig, Preset, RunConfig,
};
use scalc_core::operators::{divergence, gradient, CoefficientFamily, CoefficientField, DivFormOperator, GridSpec};
use scalc_core::solvers::solve_dirichlet;
use scalc_core::C64;

fn complex() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| C64::new(re, im))
}

fn vector(len: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec(complex(), len)
}

fn grid_1d(points: usize) -> GridSpec {
    GridSpec::new(1, 1, points, &[2.0 * PI]).unwrap()
}

fn family(k: usize) -> CoefficientFamily {
    [CoefficientFamily::t1(), CoefficientFamily::t2(), CoefficientFamily::t3()][k % 3].clone()
}

fn operator(grid: &GridSpec, k: usize) -> DivFormOperator {
    DivFormOperator::assemble(&CoefficientField::from_family(grid, &family(k)).unwrap()).unwrap()
}

/// A small half-space field on a 1-d or 2-d grid.
fn field() -> impl Strategy<Value = HalfSpaceField> {
    (1usize..=2, 1usize..=2, 0u64..1000).prop_flat_map(|(n, width, _)| {
        let points = if n == 1 { 16 } else { 8 };
        let grid = GridSpec::new(n, 1, points, &vec![2.0 * PI; n]).unwrap();
        let tgrid = TGrid::log_uniform(grid.h_min(), grid.period_max(), 4).unwrap();
        let len = grid.cells() * width;
        prop::collection::vec(vector(len), tgrid.len())
            .prop_map(move |values| HalfSpaceField::new(grid.clone(), tgrid.clone(), width, values).unwrap())
    })
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gradient_and_divergence_are_adjoint(f in vector(64), g in vector(128)) {
        let grid = GridSpec::new(2, 1, 8, &[1.0, 3.0]).unwrap();
        let lhs = dot(&gradient(&grid, &f), &g);
        let rhs = -dot(&f, &divergence(&grid, &g));
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
    }

    #[test]
    fn functionals_are_positively_homogeneous(field in field(), lambda in 0.01..100.0f64) {
        let scaled = field.scale_by(|_| lambda);
        prop_assert!(rel(tent_norm(&scaled, 0.0, 2.0), lambda * tent_norm(&field, 0.0, 2.0)) < 1e-12);
        prop_assert!(rel(tent_norm(&scaled, 1.0, 1.5), lambda * tent_norm(&field, 1.0, 1.5)) < 1e-12);
        for (a, b) in nt_maximal(&scaled).iter().zip(nt_maximal(&field)) {
            prop_assert!(rel(*a, lambda * b) < 1e-12);
        }
        for (a, b) in carleson(&scaled, 0.5).iter().zip(carleson(&field, 0.5)) {
            prop_assert!(rel(*a, lambda * b) < 1e-12);
        }
    }

    #[test]
    fn functionals_are_monotone_under_domination(field in field(), seed in any::<u64>()) {
        // Shrink each entry by a factor in [0, 1].
        let mut smaller = field.clone();
        let mut state = seed | 1;
        for v in smaller.values.iter_mut().flatten() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            *v *= (state % 1000) as f64 / 1000.0;
        }
        for (a, b) in conical_square(&smaller).iter().zip(conical_square(&field)) {
            prop_assert!(*a <= b * (1.0 + 1e-12));
        }
        for (a, b) in nt_maximal(&smaller).iter().zip(nt_maximal(&field)) {
            prop_assert!(*a <= b * (1.0 + 1e-12));
        }
        for (a, b) in carleson(&smaller, 0.0).iter().zip(carleson(&field, 0.0)) {
            prop_assert!(*a <= b * (1.0 + 1e-12));
        }
    }

    #[test]
    fn restricting_the_sup_candidates_never_increases(field in field(), mask in any::<u64>()) {
        let subset: Vec<usize> = (0..field.tgrid.len()).filter(|k| mask >> (k % 64) & 1 == 1).collect();
        for (a, b) in nt_maximal_over(&field, &subset).iter().zip(nt_maximal(&field)) {
            prop_assert!(*a <= b);
        }
        for (a, b) in carleson_over(&field, 0.3, &subset).iter().zip(carleson(&field, 0.3)) {
            prop_assert!(*a <= b);
        }
    }

    #[test]
    fn fubini_identity_is_exact(field in field()) {
        let direct = tent_norm(&field, 0.0, 2.0).powi(2);
        prop_assert!(rel(direct, fubini_tent_square(&field)) < 1e-12);
    }

    #[test]
    fn field_files_round_trip(n in 1usize..=2, m in 1usize..=3, tlen in 0usize..3, seed in any::<u64>()) {
        let grid = GridSpec::new(n, m, 8, &vec![1.5; n]).unwrap();
        let width = m + seed as usize % 3;
        let nodes = tlen.max(1);
        let values: Vec<C64> = (0..grid.cells() * width * nodes)
            .map(|i| C64::new((i as f64 + seed as f64).sin(), f64::from_bits(seed.rotate_left(i as u32) & 0x3fef_ffff_ffff_ffff)))
            .collect();
        let file = if tlen == 0 {
            FieldFile::boundary(&grid, width, values).unwrap()
        } else {
            let tgrid = TGrid::log_uniform(0.1, 1.0 + tlen as f64, 1).unwrap();
            let t = tgrid.len();
            let per: Vec<Vec<C64>> = values.chunks(grid.cells() * width).take(t).map(|c| c.to_vec()).collect();
            if per.len() < t {
                return Ok(());
            }
            FieldFile::half_space(&HalfSpaceField::new(grid, tgrid, width, per).unwrap())
        };
        let bytes = file.encode();
        let back = FieldFile::decode(&bytes).unwrap();
        prop_assert_eq!(back.encode(), bytes);
        prop_assert_eq!(back, file);
    }

    #[test]
    fn field_decoder_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..512)) {
        let _ = FieldFile::decode(&bytes);
        let mut prefixed = b"SCALC1".to_vec();
        prefixed.extend_from_slice(&bytes);
        let _ = FieldFile::decode(&prefixed);
    }

    #[test]
    fn corrupted_field_files_are_rejected_or_consistent(flip in 0usize..400, bit in 0u8..8) {
        let grid = GridSpec::new(1, 1, 8, &[1.0]).unwrap();
        let file = FieldFile::boundary(&grid, 2, (0..16).map(|i| C64::new(i as f64, 1.0)).collect()).unwrap();
        let mut bytes = file.encode();
        let at = flip % bytes.len();
        bytes[at] ^= 1 << bit;
        if let Ok(back) = FieldFile::decode(&bytes) {
            prop_assert_eq!(back.encode(), bytes);
        }
    }

    #[test]
    fn configs_round_trip(
        points in (4usize..128).prop_map(|k| 2 * k),
        n in 1usize..=2,
        seed in any::<u64>(),
        exponents in prop::collection::vec(0.51..20.0f64, 1..4),
        alpha in 0.01..0.99f64,
        campaign in 0usize..12,
        preset in 0usize..3,
        svg in any::<bool>(),
    ) {
        let campaigns = [
            Campaign::OperatorCheck, Campaign::CalculusCheck, Campaign::SolveDirichlet, Campaign::SolveRegularity,
            Campaign::SolveNeumann, Campaign::SolveHolder, Campaign::ProbeOffdiag, Campaign::ProbeCritical,
            Campaign::ProbeRiesz, Campaign::ProbeKato, Campaign::ProbeIdentify, Campaign::VerifyAll,
        ];
        let cfg = RunConfig {
            campaign: campaigns[campaign],
            grid: GridConfig { n, points, ..GridConfig::default() },
            coefficients: vec![CoefficientSource::Preset([Preset::T1, Preset::T2, Preset::T3][preset])],
            exponents,
            alpha,
            seed,
            svg,
            ..RunConfig::default()
        };
        let text = emit_config(&cfg);
        prop_assert_eq!(parse_config(&text).unwrap(), cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn coefficient_tables_round_trip(k in 0usize..3, n in 1usize..=2) {
        let grid = GridSpec::new(n, 1, 8, &vec![2.0 * PI; n]).unwrap();
        let c = CoefficientField::from_family(&grid, &family(k)).unwrap();
        let back = decode_coefficients(&encode_coefficients(&c).unwrap(), grid.lengths()).unwrap();
        prop_assert_eq!(back.a(), c.a());
        prop_assert_eq!(back.d(), c.d());
    }

    #[test]
    fn resolvent_identity_holds(k in 0usize..3, f in vector(32), r1 in 0.2..3.0f64, r2 in 0.2..3.0f64) {
        let op = operator(&grid_1d(32), k);
        let f = op.project_range(&f);
        let (z1, z2) = (C64::new(-r1, 0.0), C64::from_polar(r2, 2.5));
        let a = resolvent(&op, z1, &f).unwrap();
        let b = resolvent(&op, z2, &f).unwrap();
        let lhs: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let rhs: Vec<C64> = resolvent(&op, z1, &b).unwrap().into_iter().map(|v| v * (z2 - z1)).collect();
        let err: f64 = lhs.iter().zip(&rhs).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        let size: f64 = rhs.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-9 * size.max(1e-300));
    }

    #[test]
    fn dirichlet_solution_is_linear(k in 0usize..3, f in vector(16), g in vector(16), alpha in complex(), beta in complex()) {
        let grid = grid_1d(16);
        let op = operator(&grid, k);
        let tgrid = TGrid::default_for(&grid);
        let combo: Vec<C64> = f.iter().zip(&g).map(|(x, y)| alpha * x + beta * y).collect();
        let uf = solve_dirichlet(&op, &f, 2.0, &tgrid).unwrap();
        let ug = solve_dirichlet(&op, &g, 2.0, &tgrid).unwrap();
        let uc = solve_dirichlet(&op, &combo, 2.0, &tgrid).unwrap();
        for j in 0..tgrid.len() {
            for i in 0..grid.cells() {
                let expect = alpha * uf.u.values[j][i] + beta * ug.u.values[j][i];
                prop_assert!((uc.u.values[j][i] - expect).norm() <= 1e-10 * (1.0 + expect.norm()));
            }
        }
    }
}
