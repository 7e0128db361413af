use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ProbeConfig;
use crate::analysis::{
    admissible, conical_square, dirac_cellwise, lp_norm, one_lower_star, q_extension_many, ExtensionOperator,
    HalfSpaceField, HpProfile, TGrid,
};
use crate::calculus::{inv_sqrt_apply_many, AuxiliaryFunction};
use crate::error::Result;
use crate::linalg::{col_to_vec, operator_norm, vec_to_col, CsrMatrix, SparseLu};
use crate::operators::{gradient, DiracOperator, DivFormOperator, GridSpec};
use crate::solvers::{dense_sqrt, p_star, ENERGY_MAX_DIM};
use crate::C64;

/// A curve breaks down at `p` when `B(p)` exceeds this multiple of `B(2)`.
pub const BREAKDOWN_FACTOR: f64 = 50.0;
/// A curve value above this multiple of both neighbours counts as a spike.
const SPIKE_FACTOR: f64 = 2.0;

/// `B(p) = sup_{t, f} ‖T_t f‖_{H^p} / ‖f‖_{H^p}` over the test family.
/// A lower bound for the operator norms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeCurve {
    pub name: String,
    pub p: Vec<f64>,
    pub sup: Vec<f64>,
    /// Scales of the family; a single `0` for the scale-free Riesz transform.
    pub t: Vec<f64>,
    /// `sup_f` of the ratio per `(p, t)`.
    pub per_t: Vec<Vec<f64>>,
    /// `B(2)`.
    pub at_two: f64,
    pub family_size: usize,
}

/// End point of a detected interval of boundedness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalBound {
    /// Last bounded exponent of the grid on this side of 2 (2 itself when
    /// the neighbouring grid point already breaks down).
    pub value: f64,
    /// `[p_broken, p_bounded]` ordered increasingly; degenerate without breakdown.
    pub bracket: [f64; 2],
    pub breakdown: bool,
    /// Position in the exponent grid of the first broken exponent, or the
    /// grid end when nothing broke.
    pub index: isize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundednessProbe {
    pub curve: ProbeCurve,
    pub lower: CriticalBound,
    pub upper: CriticalBound,
    /// Re-runs with a doubled test family triggered by isolated spikes.
    pub reruns: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentificationMode {
    /// `‖ψ(t²L)f‖_{T^{0,p}}` against `‖af‖_{H^p}`.
    Hardy,
    /// `‖ψ(t²L)f‖_{T^{1,p}}` against `‖∇f‖_{H^p}`.
    Sobolev,
    /// `‖ψ(tDB)h‖_{T^{0,p}}` against `‖h‖_{H^p}` on `ran D`.
    Dirac,
}

impl IdentificationMode {
    pub const ALL: [IdentificationMode; 3] =
        [IdentificationMode::Hardy, IdentificationMode::Sobolev, IdentificationMode::Dirac];

    fn smoothness(self) -> f64 {
        match self {
            IdentificationMode::Sobolev => 1.0,
            _ => 0.0,
        }
    }
}

/// Range of adapted over classical norms across the test family, per `p`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentificationCurve {
    pub mode: IdentificationMode,
    pub psi: String,
    pub p: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructuralCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Estimated breakdown exponents with brackets, the curves they were read
/// from, and the structural consistency checks between them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalEstimate {
    pub grid: String,
    pub p_minus: CriticalBound,
    pub p_plus: CriticalBound,
    pub q_minus: CriticalBound,
    pub q_plus: CriticalBound,
    pub riesz_lower: CriticalBound,
    pub riesz_upper: CriticalBound,
    pub curves: Vec<ProbeCurve>,
    pub reruns: usize,
    pub identification_curves: Vec<IdentificationCurve>,
    pub checks: Vec<StructuralCheck>,
    pub note: String,
}

impl CriticalEstimate {
    /// False when a structural fact failed; the curves are then a probe artifact.
    pub fn consistent(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// True when none of the curves broke down anywhere on the grid.
    pub fn no_breakdown(&self) -> bool {
        [self.p_minus, self.p_plus, self.q_minus, self.q_plus, self.riesz_lower, self.riesz_upper]
            .iter()
            .all(|b| !b.breakdown)
    }
}

/// The operator with coefficients `(a^*, d^*)`.
pub fn adjoint_operator(op: &DivFormOperator) -> Result<DivFormOperator> {
    DivFormOperator::assemble(&op.coeffs().adjoint()?)
}

#[derive(Clone, Copy)]
enum Family {
    Resolvent,
    Gradient,
    Riesz,
}

impl Family {
    fn name(self) -> &'static str {
        match self {
            Family::Resolvent => "resolvent a(1+t^2L)^-1 a^-1",
            Family::Gradient => "gradient t grad (1+t^2L)^-1 a^-1",
            Family::Riesz => "riesz grad L^-1/2 a^-1",
        }
    }
}

fn shifted_identity(op: &DivFormOperator, t: f64) -> CsrMatrix {
    CsrMatrix::identity(op.dim()).add_scaled(C64::new(t * t, 0.0), op.matrix())
}

/// Evaluates one family on the test data `gs` (mean-zero, `m` components).
/// Returns the outputs per scale and their width.
fn outputs(op: &DivFormOperator, family: Family, ts: &[f64], gs: &[Vec<C64>]) -> Result<(Vec<Vec<Vec<C64>>>, usize)> {
    let grid = op.grid();
    let (m, nm) = (grid.m(), grid.m() * grid.n());
    let fs: Vec<Vec<C64>> = gs.iter().map(|g| op.mul_a_inv(g)).collect();
    match family {
        Family::Riesz => {
            let roots = inv_sqrt_apply_many(op, &fs)?;
            Ok((vec![roots.iter().map(|r| op.gradient(r)).collect()], nm))
        }
        Family::Resolvent | Family::Gradient => {
            let out: Result<Vec<Vec<Vec<C64>>>> = ts
                .par_iter()
                .map(|&t| {
                    let lu = SparseLu::new(&shifted_identity(op, t))?;
                    fs.iter()
                        .map(|f| {
                            let u = lu.solve_vec(f)?;
                            Ok(match family {
                                Family::Resolvent => op.mul_a(&u),
                                _ => op.gradient(&u).into_iter().map(|v| v * t).collect(),
                            })
                        })
                        .collect()
                })
                .collect();
            Ok((out?, if matches!(family, Family::Resolvent) { m } else { nm }))
        }
    }
}

fn probe_curve(op: &DivFormOperator, family: Family, config: &ProbeConfig, doubled: bool) -> Result<ProbeCurve> {
    config.validate()?;
    let grid = op.grid();
    let fam = if doubled { config.family.doubled() } else { config.family.clone() };
    let members = fam.members(grid, config.reps, config.seed);
    let gs: Vec<Vec<C64>> = members.into_iter().map(|(_, g)| g).collect();
    let ts: Vec<f64> = match family {
        Family::Riesz => vec![0.0],
        _ => config.tgrid_for(grid)?.values().to_vec(),
    };
    let (outs, width) = outputs(op, family, &ts, &gs)?;
    let m = grid.m();
    let inputs: Vec<HpProfile> = gs.par_iter().map(|g| HpProfile::new(grid, g, m)).collect::<Result<_>>()?;
    let mut ps = config.p_grid.clone();
    ps.push(2.0);
    // ratio[t][j][p]
    let ratios: Vec<Vec<Vec<f64>>> = outs
        .par_iter()
        .map(|per_f| {
            per_f
                .iter()
                .zip(&inputs)
                .map(|(out, inp)| {
                    let prof = HpProfile::new(grid, out, width)?;
                    ps.iter()
                        .map(|&p| {
                            let den = inp.norm(p)?;
                            Ok(if den > 0.0 { prof.norm(p)? / den } else { 0.0 })
                        })
                        .collect()
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let per_t_all: Vec<Vec<f64>> = (0..ps.len())
        .map(|k| ratios.iter().map(|per_f| per_f.iter().map(|r| r[k]).fold(0.0, f64::max)).collect())
        .collect();
    let sup_all: Vec<f64> = per_t_all.iter().map(|row| row.iter().cloned().fold(0.0, f64::max)).collect();
    let np = config.p_grid.len();
    Ok(ProbeCurve {
        name: family.name().into(),
        p: config.p_grid.clone(),
        sup: sup_all[..np].to_vec(),
        t: ts,
        per_t: per_t_all[..np].to_vec(),
        at_two: sup_all[np],
        family_size: gs.len(),
    })
}

fn has_spike(sup: &[f64]) -> bool {
    sup.windows(3).any(|w| w[1] > SPIKE_FACTOR * w[0].max(w[2]))
}

/// Growth-in-t confirmation: the supremum over the upper half of the scales
/// is at least the supremum over the lower half.
fn grows_in_t(per_t: &[f64]) -> bool {
    if per_t.len() < 2 {
        return true;
    }
    let mid = per_t.len() / 2;
    let lower = per_t[..mid].iter().cloned().fold(0.0, f64::max);
    let upper = per_t[mid..].iter().cloned().fold(0.0, f64::max);
    upper >= lower
}

fn broken(curve: &ProbeCurve) -> Vec<bool> {
    curve.sup.iter().zip(&curve.per_t).map(|(b, row)| *b > BREAKDOWN_FACTOR * curve.at_two && grows_in_t(row)).collect()
}

/// The interval of boundedness around `p = 2` read off a curve.
pub fn bounded_interval(curve: &ProbeCurve) -> (CriticalBound, CriticalBound) {
    let p = &curve.p;
    let br = broken(curve);
    let below: Vec<usize> = (0..p.len()).filter(|&i| p[i] < 2.0).rev().collect();
    let above: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 2.0).collect();
    let scan = |order: &[usize], end: isize| -> CriticalBound {
        let mut last = 2.0;
        for &i in order {
            if br[i] {
                let mut bracket = [p[i], last];
                bracket.sort_by(f64::total_cmp);
                return CriticalBound { value: last, bracket, breakdown: true, index: i as isize };
            }
            last = p[i];
        }
        CriticalBound { value: last, bracket: [last, last], breakdown: false, index: end }
    };
    (scan(&below, -1), scan(&above, p.len() as isize))
}

fn run_probe(op: &DivFormOperator, family: Family, config: &ProbeConfig) -> Result<BoundednessProbe> {
    let mut curve = probe_curve(op, family, config, false)?;
    let mut reruns = 0;
    if has_spike(&curve.sup) {
        log::info!("{}: isolated spike, re-running with a doubled test family", family.name());
        curve = probe_curve(op, family, config, true)?;
        reruns = 1;
    }
    let (lower, upper) = bounded_interval(&curve);
    Ok(BoundednessProbe { curve, lower, upper, reruns })
}

/// Uniform `H^p` boundedness of `a(1+t²L)⁻¹a⁻¹`, estimating `p₋` and `p₊`.
pub fn probe_resolvent_hp(op: &DivFormOperator, config: &ProbeConfig) -> Result<BoundednessProbe> {
    run_probe(op, Family::Resolvent, config)
}

/// Uniform `H^p` boundedness of `t∇(1+t²L)⁻¹a⁻¹`, estimating `q₋` and `q₊`.
pub fn probe_gradient_hp(op: &DivFormOperator, config: &ProbeConfig) -> Result<BoundednessProbe> {
    run_probe(op, Family::Gradient, config)
}

/// `H^p` boundedness of the Riesz transform `∇L^{−1/2}a⁻¹`.
pub fn probe_riesz(op: &DivFormOperator, config: &ProbeConfig) -> Result<BoundednessProbe> {
    run_probe(op, Family::Riesz, config)
}

/// Extensions for each test member and the classical norms they are compared with.
fn identification_fields(
    op: &DivFormOperator,
    mode: IdentificationMode,
    psi: &AuxiliaryFunction,
    config: &ProbeConfig,
) -> Result<(Vec<HalfSpaceField>, Vec<HpProfile>)> {
    let grid = op.grid();
    let tgrid = TGrid::default_for(grid);
    let gs: Vec<Vec<C64>> = config.family.members(grid, config.reps, config.seed).into_iter().map(|(_, g)| g).collect();
    let (m, nm) = (grid.m(), grid.m() * grid.n());
    match mode {
        IdentificationMode::Hardy | IdentificationMode::Sobolev => {
            let fs: Vec<Vec<C64>> = gs.iter().map(|g| op.mul_a_inv(g)).collect();
            let fields = q_extension_many(ExtensionOperator::L(op), psi, &fs, &tgrid)?;
            let classical = if mode == IdentificationMode::Hardy {
                gs.iter().map(|g| HpProfile::new(grid, g, m)).collect::<Result<_>>()?
            } else {
                fs.iter().map(|f| HpProfile::new(grid, &gradient(grid, f), nm)).collect::<Result<_>>()?
            };
            Ok((fields, classical))
        }
        IdentificationMode::Dirac => {
            let dirac = DiracOperator::from_divform(op.clone())?;
            let hs: Vec<Vec<C64>> =
                gs.iter().map(|g| dirac.project_range(&dirac.join(g, &gradient(grid, g)))).collect();
            let fields = q_extension_many(ExtensionOperator::Dirac(&dirac), psi, &hs, &tgrid)?;
            let cellwise = dirac_cellwise(&dirac, hs);
            let classical = cellwise.iter().map(|h| HpProfile::new(grid, h, m + nm)).collect::<Result<_>>()?;
            Ok((fields, classical))
        }
    }
}

/// Exponents of the config grid (plus 2) at which `psi` is admissible for `mode`.
fn identification_exponents(
    n: usize,
    mode: IdentificationMode,
    psi: &AuxiliaryFunction,
    config: &ProbeConfig,
) -> Vec<f64> {
    let mut ps: Vec<f64> = config.p_grid.clone();
    if !ps.contains(&2.0) {
        ps.push(2.0);
        ps.sort_by(f64::total_cmp);
    }
    ps.into_iter().filter(|&p| p > one_lower_star(n) && admissible(psi, n, mode.smoothness(), p).is_ok()).collect()
}

/// Conical square functions of `t^{−s}` times each field; independent of `p`.
fn square_functions(fields: &[HalfSpaceField], s: f64) -> Vec<Vec<f64>> {
    fields.iter().map(|f| conical_square(&if s == 0.0 { f.clone() } else { f.scale_by(|t| t.powf(-s)) })).collect()
}

fn ratio_range(grid: &GridSpec, squares: &[Vec<f64>], classical: &[HpProfile], p: f64) -> Result<[f64; 2]> {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for (sf, c) in squares.iter().zip(classical) {
        let den = c.norm(p)?;
        if den > 0.0 {
            let r = lp_norm(grid, sf, p) / den;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    Ok([lo, hi])
}

/// `[min, max]` over the test family of adapted over classical norms at one exponent.
pub fn identification_ratio(
    op: &DivFormOperator,
    mode: IdentificationMode,
    p: f64,
    psi: &AuxiliaryFunction,
    config: &ProbeConfig,
) -> Result<[f64; 2]> {
    admissible(psi, op.grid().n(), mode.smoothness(), p)?;
    let (fields, classical) = identification_fields(op, mode, psi, config)?;
    ratio_range(op.grid(), &square_functions(&fields, mode.smoothness()), &classical, p)
}

/// Identification ranges across the exponent grid for every mode.
pub fn identification_curves(
    op: &DivFormOperator,
    psi: &AuxiliaryFunction,
    config: &ProbeConfig,
) -> Result<Vec<IdentificationCurve>> {
    IdentificationMode::ALL
        .iter()
        .map(|&mode| {
            let ps = identification_exponents(op.grid().n(), mode, psi, config);
            let (fields, classical) = identification_fields(op, mode, psi, config)?;
            let squares = square_functions(&fields, mode.smoothness());
            let mut min = Vec::with_capacity(ps.len());
            let mut max = Vec::with_capacity(ps.len());
            for &p in &ps {
                let [lo, hi] = ratio_range(op.grid(), &squares, &classical, p)?;
                min.push(lo);
                max.push(hi);
            }
            Ok(IdentificationCurve { mode, psi: psi.label().to_string(), p: ps, min, max })
        })
        .collect()
}

/// `sup_t` of the `L²` operator norm of a scale family, by power iteration.
fn l2_family_norm(op: &DivFormOperator, family: Family, ts: &[f64]) -> Result<f64> {
    let a = op.a_matrix();
    let a_inv = op.a_inv_matrix();
    let (a_adj, a_inv_adj) = (a.adjoint(), a_inv.adjoint());
    let grad = op.gradient_matrix();
    let grad_adj = grad.adjoint();
    let norms: Vec<f64> = ts
        .par_iter()
        .map(|&t| {
            let lu = SparseLu::new(&shifted_identity(op, t))?;
            let tc = C64::new(t, 0.0);
            operator_norm(
                op.dim(),
                |v| {
                    let u = lu.solve_vec(&a_inv.matvec(v))?;
                    Ok(match family {
                        Family::Resolvent => a.matvec(&u),
                        _ => grad.matvec(&u).into_iter().map(|x| x * tc).collect(),
                    })
                },
                |w| {
                    let r = match family {
                        Family::Resolvent => a_adj.matvec(w),
                        _ => grad_adj.matvec(w).into_iter().map(|x| x * tc).collect(),
                    };
                    Ok(a_inv_adj.matvec(&lu.solve_adjoint_vec(&r)?))
                },
                500,
                1e-10,
            )
        })
        .collect::<Result<_>>()?;
    Ok(norms.into_iter().fold(0.0, f64::max))
}

/// `‖∇L^{−1/2}a⁻¹‖₂` from the dense square root, `None` above its size limit.
/// On `ran L` the inverse root is `(L + P)^{−1/2}`, and `∇P = 0`.
fn riesz_l2_norm(op: &DivFormOperator) -> Result<Option<f64>> {
    if op.dim() > ENERGY_MAX_DIM {
        return Ok(None);
    }
    let n = op.dim();
    let null_cols: Vec<Vec<C64>> = (0..n)
        .map(|j| {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[j] = C64::new(1.0, 0.0);
            op.split_nullspace(&e).0
        })
        .collect();
    let root = dense_sqrt(op)?;
    let inv_root = Mat::from_fn(n, n, |i, j| root[(i, j)] + null_cols[j][i]).partial_piv_lu().inverse();
    let inv_root_adj = inv_root.adjoint().to_owned();
    let (a_inv, grad) = (op.a_inv_matrix(), op.gradient_matrix());
    let (a_inv_adj, grad_adj) = (a_inv.adjoint(), grad.adjoint());
    let dense = |m: &Mat<C64>, v: &[C64]| col_to_vec((m * vec_to_col(v)).as_ref(), 0);
    let norm = operator_norm(
        op.dim(),
        |v| Ok(grad.matvec(&dense(&inv_root, &a_inv.matvec(v)))),
        |w| Ok(a_inv_adj.matvec(&dense(&inv_root_adj, &grad_adj.matvec(w)))),
        1000,
        1e-10,
    )?;
    Ok(Some(norm))
}

fn check(name: &str, passed: bool, detail: String) -> StructuralCheck {
    StructuralCheck { name: name.into(), passed, detail }
}

/// Runs the three boundedness probes and the identification curves and
/// checks the structural relations between them.
pub fn estimate_critical(
    op: &DivFormOperator,
    config: &ProbeConfig,
    psi: &AuxiliaryFunction,
) -> Result<CriticalEstimate> {
    config.validate()?;
    let grid = op.grid();
    let res = probe_resolvent_hp(op, config)?;
    let grad = probe_gradient_hp(op, config)?;
    let riesz = probe_riesz(op, config)?;
    let identification_curves = identification_curves(op, psi, config)?;
    let ts = config.tgrid_for(grid)?;

    let mut checks = Vec::new();
    let contains_two = [&res, &grad, &riesz]
        .iter()
        .all(|b| b.lower.value <= 2.0 && b.upper.value >= 2.0 && b.curve.at_two.is_finite());
    checks.push(check("two_in_every_interval", contains_two, "each detected interval contains p = 2".into()));

    let dq = (res.lower.index - grad.lower.index).abs();
    checks.push(check(
        "q_minus_equals_p_minus",
        dq <= 1,
        format!("p_minus = {:.4}, q_minus = {:.4}, grid offset {dq}", res.lower.value, grad.lower.value),
    ));

    let (dl, du) = ((riesz.lower.index - grad.lower.index).abs(), (riesz.upper.index - grad.upper.index).abs());
    checks.push(check(
        "riesz_matches_gradient",
        dl <= 1 && du <= 1,
        format!(
            "riesz ({:.4}, {:.4}) vs gradient ({:.4}, {:.4})",
            riesz.lower.value, riesz.upper.value, grad.lower.value, grad.upper.value
        ),
    ));

    let star_ok = if grad.upper.breakdown && res.upper.breakdown {
        res.upper.bracket[1] >= p_star(grid.n(), grad.upper.value)
    } else {
        true
    };
    checks.push(check(
        "p_plus_at_least_q_plus_star",
        star_ok,
        format!("p_plus = {:.4}, q_plus = {:.4}", res.upper.value, grad.upper.value),
    ));

    let res_l2 = l2_family_norm(op, Family::Resolvent, ts.values())?;
    checks.push(check(
        "resolvent_l2_bound",
        res.curve.at_two <= res_l2 * (1.0 + 1e-6),
        format!("B(2) = {:.6}, sup_t L2 norm = {:.6}", res.curve.at_two, res_l2),
    ));
    let grad_l2 = l2_family_norm(op, Family::Gradient, ts.values())?;
    checks.push(check(
        "gradient_l2_bound",
        grad.curve.at_two <= grad_l2 * (1.0 + 1e-6),
        format!("B(2) = {:.6}, sup_t L2 norm = {:.6}", grad.curve.at_two, grad_l2),
    ));
    checks.push(match riesz_l2_norm(op)? {
        Some(norm) => check(
            "riesz_l2_bound",
            riesz.curve.at_two <= norm * (1.0 + 1e-6),
            format!("B(2) = {:.6}, dense L2 norm = {norm:.6}", riesz.curve.at_two),
        ),
        None => check("riesz_l2_bound", true, format!("skipped above dimension {ENERGY_MAX_DIM}")),
    });

    let reruns = res.reruns + grad.reruns + riesz.reruns;
    let estimate = CriticalEstimate {
        grid: format!("n={}, m={}, N={}, lengths={:?}", grid.n(), grid.m(), grid.points(), grid.lengths()),
        p_minus: res.lower,
        p_plus: res.upper,
        q_minus: grad.lower,
        q_plus: grad.upper,
        riesz_lower: riesz.lower,
        riesz_upper: riesz.upper,
        curves: vec![res.curve, grad.curve, riesz.curve],
        reruns,
        identification_curves,
        checks,
        note: "suprema over finite test families: lower bounds for the true operator norms; \
               breakdown means growth beyond 50 B(2) with a growing-in-t profile"
            .into(),
    };
    if !estimate.consistent() {
        log::warn!("structural check failed; treat the curves as a probe artifact");
    }
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::tent_norm;
    use crate::fft::plane_wave;
    use crate::operators::{CoefficientFamily, CoefficientField};
    use std::f64::consts::PI;

    fn op(points: usize, fam: CoefficientFamily) -> DivFormOperator {
        let g = GridSpec::new(1, 1, points, &[2.0 * PI]).unwrap();
        DivFormOperator::assemble(&CoefficientField::from_family(&g, &fam).unwrap()).unwrap()
    }

    fn curve(sup: Vec<f64>, at_two: f64) -> ProbeCurve {
        let p = (0..sup.len()).map(|i| 0.6 + 0.5 * i as f64).collect();
        let per_t = sup.iter().map(|&s| vec![s / 2.0, s]).collect();
        ProbeCurve { name: "x".into(), p, sup, t: vec![1.0, 2.0], per_t, at_two, family_size: 1 }
    }

    #[test]
    fn interval_detection() {
        // p = 0.6, 1.1, 1.6, 2.1, 2.6, 3.1
        let c = curve(vec![100.0, 1.0, 1.0, 1.0, 1.0, 60.0], 1.0);
        let (lo, hi) = bounded_interval(&c);
        assert!(lo.breakdown && (lo.value - 1.1).abs() < 1e-12 && lo.bracket == [0.6, 1.1]);
        assert!(hi.breakdown && (hi.value - 2.6).abs() < 1e-12 && hi.index == 5);
        let (lo, hi) = bounded_interval(&curve(vec![1.0; 6], 1.0));
        assert!(!lo.breakdown && !hi.breakdown && lo.value == 0.6);
        assert!(has_spike(&[1.0, 3.0, 1.0]) && !has_spike(&[1.0, 1.5, 2.5]));
    }

    #[test]
    fn constant_coefficients_show_no_breakdown() {
        let l = op(32, CoefficientFamily::t1());
        let est = estimate_critical(&l, &ProbeConfig::default(), &AuxiliaryFunction::default_family()).unwrap();
        assert!(est.no_breakdown(), "{:?}", est.checks);
        assert!(est.consistent(), "{:?}", est.checks);
        // The constant-coefficient Riesz transform is a unimodular multiplier.
        assert!((est.curves[2].at_two - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sobolev_identification_matches_mode_quadrature() {
        let l = op(64, CoefficientFamily::t1());
        let g = l.grid().clone();
        let psi = AuxiliaryFunction::default_family();
        let tg = TGrid::default_for(&g);
        let f = plane_wave(&g, [3, 0], &[C64::new(1.0, 0.0)]);
        let field = q_extension_many(ExtensionOperator::L(&l), &psi, &[f.clone()], &tg).unwrap().pop().unwrap();
        let ratio = tent_norm(&field, 1.0, 2.0) / crate::analysis::sobolev_homog_norm(&g, &f, 2.0).unwrap();
        // Per-mode oracle: Σ_j w_j |ψ(t_j² λ)|² |B(t_j)| / (t_j³ λ).
        let h = g.spacing()[0];
        let lambda = 4.0 * (3.0 * h / 2.0).sin().powi(2) / (h * h);
        let oracle: f64 = tg
            .values()
            .iter()
            .zip(tg.log_weights())
            .map(|(&t, w)| {
                let vol = g.ball_offsets(t).len() as f64 * g.cell_volume();
                w * psi.eval(C64::new(t * t * lambda, 0.0)).norm_sqr() * vol / (t.powi(3) * lambda)
            })
            .sum::<f64>()
            .sqrt();
        assert!((ratio - oracle).abs() < 1e-8 * oracle, "{ratio} vs {oracle}");
    }

    #[test]
    fn adjoint_of_real_symmetric_is_itself() {
        let l = op(16, CoefficientFamily::t2());
        let adj = adjoint_operator(&l).unwrap();
        assert!(adj.matrix().max_abs_diff(l.matrix()) < 1e-14);
    }
}
