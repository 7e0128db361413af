//! Campaign reports: a JSON document, one CSV table per curve and optional
//! SVG line plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::operators::GridSpec;

pub const TOOL: &str = "scalc";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Where a number was measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub n: usize,
    pub m: usize,
    pub points: usize,
    pub lengths: Vec<f64>,
    pub coefficients: String,
    pub seed: u64,
}

impl Context {
    pub fn new(grid: &GridSpec, coefficients: impl Into<String>, seed: u64) -> Self {
        Self {
            n: grid.n(),
            m: grid.m(),
            points: grid.points(),
            lengths: grid.lengths().to_vec(),
            coefficients: coefficients.into(),
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// Pass when `value ≤ tolerance`.
    AtMost,
    /// Pass when `value ≥ tolerance`.
    AtLeast,
    /// Pass on a structural condition; `value` is informational.
    Holds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub comparison: Comparison,
    pub tolerance: f64,
    pub context: Context,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub detail: String,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64, context: &Context) -> Self {
        Self::build(name, value, Comparison::AtMost, tolerance, value <= tolerance, context)
    }

    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64, context: &Context) -> Self {
        Self::build(name, value, Comparison::AtLeast, tolerance, value >= tolerance, context)
    }

    pub fn holds(name: impl Into<String>, passed: bool, value: f64, tolerance: f64, context: &Context) -> Self {
        Self::build(name, value, Comparison::Holds, tolerance, passed, context)
    }

    fn build(
        name: impl Into<String>,
        value: f64,
        comparison: Comparison,
        tolerance: f64,
        passed: bool,
        context: &Context,
    ) -> Self {
        Self {
            name: name.into(),
            passed,
            value,
            comparison,
            tolerance,
            context: context.clone(),
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
    pub context: Context,
    /// Tolerance of the computation the number came from, when meaningful.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub context: Context,
}

impl Curve {
    /// File stem safe for every platform.
    pub fn file_stem(&self) -> String {
        let raw = format!("{}-{}-N{}", self.name, self.context.coefficients, self.context.points);
        raw.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Config,
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: String,
    pub kind: FailureKind,
    pub message: String,
}

impl Failure {
    pub fn from_error(stage: impl Into<String>, err: &Error) -> Self {
        let kind = match err {
            Error::Config(_) | Error::Io(_) | Error::Format(_) | Error::Coefficients(_) | Error::InvalidGrid(_) => {
                FailureKind::Config
            }
            _ => FailureKind::Numerical,
        };
        Self { stage: stage.into(), kind, message: err.to_string() }
    }
}

/// Overall outcome, ordered by severity of the exit code it maps to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    CheckFailure,
    ConfigError,
    NumericalFailure,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::CheckFailure => 1,
            Status::ConfigError => 2,
            Status::NumericalFailure => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub campaign: String,
    pub status: Status,
    pub config: RunConfig,
    pub checks: Vec<Check>,
    pub measurements: Vec<Measurement>,
    pub curves: Vec<Curve>,
    pub failures: Vec<Failure>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            campaign: config.campaign.label().into(),
            status: Status::Pass,
            config: config.clone(),
            checks: Vec::new(),
            measurements: Vec::new(),
            curves: Vec::new(),
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn check(&mut self, check: Check) {
        if !check.passed {
            log::warn!("check {} failed: value {:.3e}, tolerance {:.3e}", check.name, check.value, check.tolerance);
        }
        self.checks.push(check);
    }

    pub fn measure(&mut self, name: impl Into<String>, value: f64, context: &Context) {
        self.measurements.push(Measurement { name: name.into(), value, context: context.clone(), tolerance: None });
    }

    pub fn measure_tol(&mut self, name: impl Into<String>, value: f64, tolerance: f64, context: &Context) {
        self.measurements.push(Measurement {
            name: name.into(),
            value,
            context: context.clone(),
            tolerance: Some(tolerance),
        });
    }

    pub fn curve(&mut self, name: impl Into<String>, columns: &[&str], rows: Vec<Vec<f64>>, context: &Context) {
        self.curves.push(Curve {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows,
            context: context.clone(),
        });
    }

    pub fn fail(&mut self, stage: impl Into<String>, err: &Error) {
        let f = Failure::from_error(stage, err);
        log::error!("{}: {}", f.stage, f.message);
        self.failures.push(f);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        let note = note.into();
        if !self.notes.contains(&note) {
            self.notes.push(note);
        }
    }

    pub fn finalize(&mut self) {
        let worst = self.failures.iter().map(|f| f.kind).max();
        self.status = match worst {
            Some(FailureKind::Numerical) => Status::NumericalFailure,
            Some(FailureKind::Config) => Status::ConfigError,
            None if self.checks.iter().any(|c| !c.passed) => Status::CheckFailure,
            None => Status::Pass,
        };
    }

    pub fn checks_named<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a Check> + 'a {
        self.checks.iter().filter(move |c| c.name.starts_with(prefix))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Writes `report.json`, `curves/*.csv` and, when enabled, `plots/*.svg`.
    /// Every file is written atomically.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir.join("curves"))?;
        let mut written = Vec::new();
        let mut stems: BTreeMap<String, usize> = BTreeMap::new();
        for curve in &self.curves {
            let mut stem = curve.file_stem();
            let seen = stems.entry(stem.clone()).or_insert(0);
            *seen += 1;
            if *seen > 1 {
                stem = format!("{stem}-{seen}");
            }
            let csv_path = dir.join("curves").join(format!("{stem}.csv"));
            super::write_atomic(&csv_path, &curve_csv(curve)?)?;
            written.push(csv_path);
            if self.config.svg {
                std::fs::create_dir_all(dir.join("plots"))?;
                let svg_path = dir.join("plots").join(format!("{stem}.svg"));
                super::write_atomic(&svg_path, svg_plot(curve).as_bytes())?;
                written.push(svg_path);
            }
        }
        let json = dir.join("report.json");
        super::write_atomic(&json, self.to_json().as_bytes())?;
        written.push(json);
        Ok(written)
    }
}

pub fn curve_csv(curve: &Curve) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(&curve.columns).map_err(io)?;
    for row in &curve.rows {
        w.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Line plot of every column against the first. Axes are logarithmic when all
/// values on them are positive.
pub fn svg_plot(curve: &Curve) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
    let finite = |v: f64| v.is_finite();
    let xs: Vec<f64> = curve.rows.iter().map(|r| r[0]).collect();
    let ys: Vec<f64> = curve.rows.iter().flat_map(|r| r[1..].iter().copied()).filter(|v| finite(*v)).collect();
    let log_x = !xs.is_empty() && xs.iter().all(|v| *v > 0.0);
    let log_y = !ys.is_empty() && ys.iter().all(|v| *v > 0.0);
    let tx = |v: f64| if log_x { v.log10() } else { v };
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let range = |vals: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) =
            vals.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-300 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = range(&mut xs.iter().map(|v| tx(*v)));
    let (y0, y1) = range(&mut ys.iter().map(|v| ty(*v)));
    let px = |v: f64| PAD + (tx(v) - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |v: f64| H - PAD - (ty(v) - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<path d="M{PAD},{PAD} V{} H{}" stroke="black" fill="none"/>"#, H - PAD, W - PAD);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, W / 2.0, escape(&curve.name));
    let axis = |name: &str, log: bool| if log { format!("log10 {name}") } else { name.to_string() };
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 10.0,
        escape(&axis(&curve.columns[0], log_x))
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="start">{:.3e}</text>"#, PAD, H - PAD + 15.0, x0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.3e}</text>"#, W - PAD, H - PAD + 15.0, x1);
    let _ = writeln!(s, r#"<text x="5" y="{}">{:.3e}</text>"#, H - PAD, y0);
    let _ = writeln!(s, r#"<text x="5" y="{}">{:.3e}</text>"#, PAD, y1);
    for (k, name) in curve.columns.iter().enumerate().skip(1) {
        let colour = COLOURS[(k - 1) % COLOURS.len()];
        let pts: Vec<String> = curve
            .rows
            .iter()
            .filter(|r| finite(r[0]) && finite(r[k]) && (!log_x || r[0] > 0.0) && (!log_y || r[k] > 0.0))
            .map(|r| format!("{:.2},{:.2}", px(r[0]), py(r[k])))
            .collect();
        let _ = writeln!(s, r#"<polyline points="{}" stroke="{colour}" fill="none"/>"#, pts.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{colour}" text-anchor="end">{}</text>"#,
            W - PAD,
            PAD + 15.0 * k as f64,
            escape(&axis(name, log_y))
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn context() -> Context {
        Context::new(&GridSpec::new(1, 1, 8, &[1.0]).unwrap(), "T1", 7)
    }

    #[test]
    fn status_follows_worst_outcome() {
        let cfg = RunConfig::default();
        let mut r = Report::new(&cfg);
        r.check(Check::at_most("a", 1e-10, 1e-9, &context()));
        r.finalize();
        assert_eq!(r.status, Status::Pass);
        r.check(Check::at_least("b", 1.0, 5.0, &context()));
        r.finalize();
        assert_eq!(r.status.exit_code(), 1);
        r.fail("stage", &Error::Numerical("boom".into()));
        r.finalize();
        assert_eq!(r.status.exit_code(), 3);
    }

    #[test]
    fn files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig { svg: true, ..RunConfig::default() };
        let mut r = Report::new(&cfg);
        r.curve("decay", &["z", "norm"], vec![vec![0.1, 1e-3], vec![1.0, 0.5]], &context());
        r.curve("decay", &["z", "norm"], vec![vec![0.2, 1e-3]], &context());
        let files = r.write(dir.path()).unwrap();
        assert_eq!(files.len(), 5);
        let csv = std::fs::read_to_string(&files[0]).unwrap();
        assert!(csv.starts_with("z,norm\n"));
        let svg = std::fs::read_to_string(&files[1]).unwrap();
        assert!(svg.contains("<polyline"));
        let back: Report =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(back.curves, r.curves);
        assert!(std::fs::read_dir(dir.path()).unwrap().all(|e| !e
            .unwrap()
            .file_name()
            .to_string_lossy()
            .contains(".tmp")));
    }
}
