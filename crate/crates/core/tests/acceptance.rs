//! Acceptance suite: one line per criterion, all tolerances pinned here.
//!
//! Runs without the libtest harness so the summary is always printed.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scalc_core::analysis::{fubini_tent_square, tent_norm, HalfSpaceField, TGrid};
use scalc_core::io::{
    fubini_gap, hardy_identification, oracle_discrepancies, random_data, run_campaign, run_suite, setup, Campaign,
    Check, CoefficientSource, GridConfig, Preset, Report, RunConfig, Tolerances,
};
use scalc_core::operators::{DiracOperator, GridSpec};
use scalc_core::C64;

const ORACLE_REL: f64 = 1e-8;
const ORACLE_BUDGET: Duration = Duration::from_secs(60);
const RESOLVENT_IDENTITY: f64 = 1e-9;
const SEMIGROUP: f64 = 1e-7;
const BLOCK_IDENTITY: f64 = 1e-12;
const LINK: f64 = 1e-7;
const INTERTWINING: f64 = 1e-6;
const KATO_CONSTANT: f64 = 1e-9;
const KATO_STABILITY: f64 = 0.10;
const IDENTIFICATION_C: f64 = 20.0;
const PSI_INDEPENDENCE_C: f64 = 10.0;
const FUBINI: f64 = 1e-12;
const RESIDUAL: f64 = 1e-5;
const CONSISTENCY: f64 = 1e-8;
const COMPATIBILITY: f64 = 1e-6;
const MIN_ORDER: f64 = 1.0;
const COMPARABILITY_C: f64 = 100.0;
const RESCALING: f64 = 1e-12;
const OFFDIAG_GAMMA: f64 = 5.0;
const FIT_RESIDUAL: f64 = 0.2;

const FAMILIES: [Preset; 3] = [Preset::T1, Preset::T2, Preset::T3];

fn pinned() -> Tolerances {
    Tolerances {
        oracle: ORACLE_REL,
        resolvent_identity: RESOLVENT_IDENTITY,
        semigroup: SEMIGROUP,
        block_identity: BLOCK_IDENTITY,
        link: LINK,
        intertwining: INTERTWINING,
        fubini: FUBINI,
        kato_constant: KATO_CONSTANT,
        kato_stability: KATO_STABILITY,
        identification_c: IDENTIFICATION_C,
        psi_independence_c: PSI_INDEPENDENCE_C,
        residual: RESIDUAL,
        consistency: CONSISTENCY,
        comparability_c: COMPARABILITY_C,
        rescaling: RESCALING,
        compatibility: COMPATIBILITY,
        min_order: MIN_ORDER,
        offdiag_gamma: OFFDIAG_GAMMA,
        fit_residual: FIT_RESIDUAL,
        ..Tolerances::default()
    }
}

fn config(points: usize, samples: usize) -> RunConfig {
    RunConfig {
        grid: GridConfig { points, ..GridConfig::default() },
        samples,
        tolerances: pinned(),
        ..RunConfig::default()
    }
}

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }

    fn error(e: impl std::fmt::Display) -> Self {
        Self::new(false, format!("error: {e}"))
    }
}

/// Runs `suite` for every source and returns the combined report.
fn run_suites(cfg: &RunConfig, suites: &[Campaign]) -> Result<Report, String> {
    let mut report = Report::new(cfg);
    for source in &cfg.coefficients {
        for &suite in suites {
            run_suite(suite, cfg, source, &mut report)
                .map_err(|e| format!("{} [{}]: {e}", suite.label(), source.label()))?;
        }
    }
    Ok(report)
}

fn families() -> Vec<CoefficientSource> {
    FAMILIES.iter().map(|&p| CoefficientSource::Preset(p)).collect()
}

/// Worst value among checks whose name starts with `prefix` and contains
/// `suffix`, and whether every such value is within `limit`.
fn worst(report: &Report, prefix: &str, suffix: &str, limit: f64) -> (usize, f64, bool) {
    let found: Vec<&Check> = report.checks_named(prefix).filter(|c| c.name.contains(suffix)).collect();
    let value = found.iter().map(|c| c.value).fold(0.0, f64::max);
    (found.len(), value, !found.is_empty() && found.iter().all(|c| c.value <= limit))
}

fn criterion_oracle() -> Outcome {
    let start = Instant::now();
    let cfg = config(32, 20);
    let mut lines = Vec::new();
    let mut ok = true;
    for source in families() {
        let s = match setup(&cfg, &source, 32) {
            Ok(Some(s)) => s,
            Ok(None) => return Outcome::new(false, "no setup"),
            Err(e) => return Outcome::error(e),
        };
        let dirac = match DiracOperator::from_divform(s.op.clone()) {
            Ok(d) => d,
            Err(e) => return Outcome::error(e),
        };
        let inputs = random_data(&s.op, 20, cfg.seed);
        match oracle_discrepancies(&s.op, &dirac, &inputs, cfg.seed) {
            Ok(d) => {
                let w = d.iter().map(|x| x.1).fold(0.0, f64::max);
                ok &= d.len() == 4 && w <= ORACLE_REL;
                lines.push(format!("{} {w:.1e}", source.label()));
            }
            Err(e) => return Outcome::error(e),
        }
    }
    let elapsed = start.elapsed();
    ok &= elapsed < ORACLE_BUDGET;
    Outcome::new(ok, format!("worst relative gap {} in {:.1}s", lines.join(", "), elapsed.as_secs_f64()))
}

fn criterion_identities() -> Outcome {
    let cfg = RunConfig { coefficients: families(), ..config(64, 5) };
    let report = match run_suites(&cfg, &[Campaign::CalculusCheck]) {
        Ok(r) => r,
        Err(e) => return Outcome::error(e),
    };
    let items = [
        ("calculus.resolvent_identity", RESOLVENT_IDENTITY),
        ("calculus.semigroup_property", SEMIGROUP),
        ("calculus.block_identity", BLOCK_IDENTITY),
        ("calculus.link", LINK),
        ("calculus.intertwining", INTERTWINING),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, limit) in items {
        let (count, value, pass) = worst(&report, name, "", limit);
        ok &= pass && count == 3;
        parts.push(format!("{} {value:.1e}", name.trim_start_matches("calculus.")));
    }
    Outcome::new(ok, parts.join(", "))
}

fn criterion_kato() -> Outcome {
    let cfg = RunConfig { coefficients: families(), refinement: vec![64, 128], ..config(64, 1) };
    let report = match run_suites(&cfg, &[Campaign::ProbeKato]) {
        Ok(r) => r,
        Err(e) => return Outcome::error(e),
    };
    let (nc, dev, c_ok) = worst(&report, "probe.kato.constant", "", KATO_CONSTANT);
    let (ns, drift, s_ok) = worst(&report, "probe.kato.stability", "", KATO_STABILITY);
    let finite = report.checks_named("probe.kato.finite").all(|c| c.passed);
    let ok = c_ok && nc == 2 && s_ok && ns == 3 && finite;
    Outcome::new(ok, format!("T1 deviation {dev:.1e}, worst N=64/128 drift {drift:.3}"))
}

fn criterion_identification() -> Outcome {
    let cfg = config(64, 100);
    let mut ok = true;
    let mut parts = Vec::new();
    for source in families() {
        let s = match setup(&cfg, &source, 64) {
            Ok(Some(s)) => s,
            _ => return Outcome::new(false, "no setup"),
        };
        match hardy_identification(&s.op, 100, cfg.seed ^ 0x6000) {
            Ok((lo, hi, [plo, phi])) => {
                let c = hi.max(1.0 / lo);
                let cpsi = phi.max(1.0 / plo);
                ok &= c <= IDENTIFICATION_C && cpsi <= PSI_INDEPENDENCE_C;
                parts.push(format!("{} C={c:.1} psi C={cpsi:.1}", source.label()));
            }
            Err(e) => return Outcome::error(e),
        }
    }
    Outcome::new(ok, parts.join(", "))
}

/// Direct evaluation of `‖SF‖₂²` on a one-dimensional grid: periodic distance
/// between cell indices, trapezoid weights in `log t`, every pair visited.
fn brute_tent_square(field: &HalfSpaceField) -> f64 {
    let grid = &field.grid;
    let n = grid.points();
    let h = grid.lengths()[0] / n as f64;
    let ts = field.tgrid.values();
    let logs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let k = ts.len();
    let weight = |j: usize| {
        let left = if j > 0 { logs[j] - logs[j - 1] } else { 0.0 };
        let right = if j + 1 < k { logs[j + 1] - logs[j] } else { 0.0 };
        0.5 * (left + right)
    };
    let mut total = 0.0;
    for x in 0..n {
        for (j, &t) in ts.iter().enumerate() {
            for y in 0..n {
                let d = x.abs_diff(y).min(n - x.abs_diff(y)) as f64 * h;
                if d < t {
                    let v: f64 =
                        field.values[j][y * field.width..(y + 1) * field.width].iter().map(|z| z.norm_sqr()).sum();
                    total += h * h * weight(j) / t * v;
                }
            }
        }
    }
    total
}

fn criterion_fubini() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut gap = 0.0f64;
    let mut brute = 0.0f64;
    for (dim, points, width) in [(1, 32, 1), (1, 64, 2), (2, 16, 1), (2, 16, 3)] {
        let lengths = vec![2.0 * PI; dim];
        let grid = GridSpec::new(dim, 1, points, &lengths).unwrap();
        let tgrid = TGrid::default_for(&grid);
        let values = (0..tgrid.len())
            .map(|_| {
                (0..grid.cells() * width)
                    .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect()
            })
            .collect();
        let field = HalfSpaceField::new(grid, tgrid, width, values).unwrap();
        gap = gap.max(fubini_gap(&field));
        if dim == 1 {
            let direct = tent_norm(&field, 0.0, 2.0).powi(2);
            let b = brute_tent_square(&field);
            brute = brute.max((direct - b).abs() / b).max((fubini_tent_square(&field) - b).abs() / b);
        }
    }
    Outcome::new(gap <= FUBINI && brute <= FUBINI, format!("Fubini gap {gap:.1e}, brute-force gap {brute:.1e}"))
}

/// Criteria 6 and 8 share the solver runs: Dirichlet and regularity at p = 2
/// over 50 random data, Neumann and Hölder over fewer.
fn solver_reports() -> Result<(Report, Report), String> {
    let main = RunConfig { coefficients: families(), refinement: vec![32], ..config(32, 50) };
    let a = run_suites(&main, &[Campaign::SolveDirichlet, Campaign::SolveRegularity])?;
    let rest = RunConfig { coefficients: families(), refinement: vec![32], ..config(32, 5) };
    let b = run_suites(&rest, &[Campaign::SolveNeumann, Campaign::SolveHolder])?;
    Ok((a, b))
}

fn criterion_residuals(reports: &Result<(Report, Report), String>) -> Outcome {
    let (a, b) = match reports {
        Ok(r) => r,
        Err(e) => return Outcome::error(e),
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["dirichlet", "regularity", "neumann", "holder"] {
        let report = if matches!(name, "dirichlet" | "regularity") { a } else { b };
        let prefix = format!("solve.{name}(");
        let (n2, r2, ok2) = worst(report, &prefix, "residual_second_order", RESIDUAL);
        let (n1, r1, ok1) = worst(report, &prefix, "residual_first_order", RESIDUAL);
        ok &= ok1 && ok2 && n1 >= 3 && n2 >= 3;
        parts.push(format!("{name} {:.1e}", r1.max(r2)));
    }
    let (nc, cons, okc) = worst(b, "solve.neumann(", "consistency", CONSISTENCY);
    ok &= okc && nc == 3;
    Outcome::new(ok, format!("residuals {}, consistency {cons:.1e}", parts.join(", ")))
}

fn criterion_compatibility() -> Outcome {
    let cfg = RunConfig { coefficients: families(), refinement: vec![32, 64, 128], ..config(64, 1) };
    let report = match run_suites(&cfg, &[Campaign::SolveDirichlet]) {
        Ok(r) => r,
        Err(e) => return Outcome::error(e),
    };
    let (nc, err, c_ok) = worst(&report, "solve.compatibility.constant", "", COMPATIBILITY);
    let refine: Vec<&Check> = report.checks_named("solve.compatibility.refinement").collect();
    let r_ok = refine.len() == 2 && refine.iter().all(|c| c.passed && c.value >= MIN_ORDER);
    let orders: Vec<String> = refine.iter().map(|c| format!("{:.1}", c.value)).collect();
    Outcome::new(c_ok && nc == 1 && r_ok, format!("T1 error {err:.1e}, T2/T3 orders {}", orders.join("/")))
}

fn criterion_comparability(reports: &Result<(Report, Report), String>) -> Outcome {
    let (a, _) = match reports {
        Ok(r) => r,
        Err(e) => return Outcome::error(e),
    };
    let (nc, c, c_ok) = worst(a, "solve.", "comparability", COMPARABILITY_C);
    let (nr, r, r_ok) = worst(a, "solve.", "rescaling", RESCALING);
    let samples = a.checks_named("solve.dirichlet(").next().map(|_| a.config.samples).unwrap_or(0);
    Outcome::new(
        c_ok && r_ok && nc >= 6 && nr >= 6 && samples >= 50,
        format!("worst C {c:.2} over {samples} data, rescaling {r:.1e}"),
    )
}

fn criterion_offdiag() -> Outcome {
    let cfg = RunConfig { coefficients: families(), ..config(64, 1) };
    let report = match run_suites(&cfg, &[Campaign::ProbeOffdiag]) {
        Ok(r) => r,
        Err(e) => return Outcome::error(e),
    };
    let gammas: Vec<f64> = report.measurements.iter().filter(|m| m.name.ends_with(".gamma")).map(|m| m.value).collect();
    let residuals: Vec<f64> =
        report.measurements.iter().filter(|m| m.name.ends_with(".fit_residual")).map(|m| m.value).collect();
    let gmin = gammas.iter().copied().fold(f64::INFINITY, f64::min);
    let rmax = residuals.iter().copied().fold(0.0, f64::max);
    let ok = gammas.len() == 6 && residuals.len() == 6 && gmin >= OFFDIAG_GAMMA && rmax <= FIT_RESIDUAL;
    Outcome::new(ok, format!("min gamma {gmin:.2}, max fit residual {rmax:.3}"))
}

fn critical_report() -> Result<Report, String> {
    let cfg = RunConfig { coefficients: families(), refinement: vec![32, 64, 128], ..config(64, 1) };
    run_suites(&cfg, &[Campaign::ProbeCritical])
}

fn criterion_no_breakdown(report: &Result<Report, String>) -> Outcome {
    let report = match report {
        Ok(r) => r,
        Err(e) => return Outcome::error(e),
    };
    let checks: Vec<&Check> = report.checks.iter().filter(|c| c.name.ends_with(".no_breakdown")).collect();
    let failed: Vec<String> =
        checks.iter().filter(|c| !c.passed).map(|c| format!("{} {}", c.context.coefficients, c.name)).collect();
    Outcome::new(
        checks.len() == 9 && failed.is_empty(),
        format!(
            "{} of {} family/N combinations without breakdown {failed:?}",
            checks.len() - failed.len(),
            checks.len()
        ),
    )
}

fn criterion_structure(report: &Result<Report, String>) -> Outcome {
    let report = match report {
        Ok(r) => r,
        Err(e) => return Outcome::error(e),
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["two_in_every_interval", "q_minus_equals_p_minus", "riesz_matches_gradient"] {
        let found: Vec<&Check> = report.checks.iter().filter(|c| c.name.ends_with(name)).collect();
        let pass = found.len() == 9 && found.iter().all(|c| c.passed);
        ok &= pass;
        parts.push(format!("{name} {}/{}", found.iter().filter(|c| c.passed).count(), found.len()));
    }
    Outcome::new(ok, parts.join(", "))
}

fn criterion_determinism() -> Outcome {
    let cfg = RunConfig { refinement: vec![32, 64], ..config(32, 4) };
    let first = run_campaign(&cfg).to_json();
    let second = run_campaign(&cfg).to_json();
    Outcome::new(first == second, format!("{} bytes, identical: {}", first.len(), first == second))
}

fn main() {
    let _ = std::io::Write::flush(&mut std::io::stdout());
    let started = Instant::now();
    let solvers = solver_reports();
    let critical = critical_report();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("calculus oracle equivalence", Box::new(criterion_oracle)),
        ("structural identities", Box::new(criterion_identities)),
        ("Kato ratio", Box::new(criterion_kato)),
        ("p=2 identification", Box::new(criterion_identification)),
        ("Fubini tent identity", Box::new(criterion_fubini)),
        ("solver residuals and consistency", Box::new(|| criterion_residuals(&solvers))),
        ("compatibility with the energy solution", Box::new(criterion_compatibility)),
        ("comparability diagnostics", Box::new(|| criterion_comparability(&solvers))),
        ("off-diagonal decay", Box::new(criterion_offdiag)),
        ("no breakdown for constant and one-dimensional coefficients", Box::new(|| criterion_no_breakdown(&critical))),
        ("probe structure", Box::new(|| criterion_structure(&critical))),
        ("deterministic reruns", Box::new(criterion_determinism)),
    ];
    let mut failed = 0;
    for (i, (title, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = run();
        if !outcome.passed {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {title}: {} ({:.1}s)",
            i + 1,
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
