//! Run configuration: JSON with defaults for every field and unknown keys rejected.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::coefficients::read_coefficients;
use crate::error::{Error, Result};
use crate::operators::{CoefficientFamily, CoefficientField, GridSpec};
use crate::probes::ProbeConfig;

/// Lowest admissible exponent: `1_* = n/(n+1)` at `n = 1`.
pub const EXPONENT_FLOOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Campaign {
    OperatorCheck,
    CalculusCheck,
    SolveDirichlet,
    SolveRegularity,
    SolveNeumann,
    SolveHolder,
    ProbeOffdiag,
    ProbeCritical,
    ProbeRiesz,
    ProbeKato,
    ProbeIdentify,
    VerifyAll,
}

impl Campaign {
    pub fn label(self) -> &'static str {
        match self {
            Campaign::OperatorCheck => "operator-check",
            Campaign::CalculusCheck => "calculus-check",
            Campaign::SolveDirichlet => "solve-dirichlet",
            Campaign::SolveRegularity => "solve-regularity",
            Campaign::SolveNeumann => "solve-neumann",
            Campaign::SolveHolder => "solve-holder",
            Campaign::ProbeOffdiag => "probe-offdiag",
            Campaign::ProbeCritical => "probe-critical",
            Campaign::ProbeRiesz => "probe-riesz",
            Campaign::ProbeKato => "probe-kato",
            Campaign::ProbeIdentify => "probe-identify",
            Campaign::VerifyAll => "verify-all",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n: usize,
    pub m: usize,
    pub points: usize,
    /// Period per axis; `None` means `2π` on every axis.
    pub lengths: Option<Vec<f64>>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 1, m: 1, points: 64, lengths: None }
    }
}

impl GridConfig {
    pub fn lengths(&self) -> Vec<f64> {
        self.lengths.clone().unwrap_or_else(|| vec![2.0 * PI; self.n])
    }

    pub fn spec(&self) -> Result<GridSpec> {
        self.spec_with_points(self.points)
    }

    pub fn spec_with_points(&self, points: usize) -> Result<GridSpec> {
        GridSpec::new(self.n, self.m, points, &self.lengths())
    }
}

/// Named shortcuts for the three reference families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    T1,
    T2,
    T3,
}

impl Preset {
    pub fn family(self) -> CoefficientFamily {
        match self {
            Preset::T1 => CoefficientFamily::t1(),
            Preset::T2 => CoefficientFamily::t2(),
            Preset::T3 => CoefficientFamily::t3(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSource {
    Preset(Preset),
    Family(CoefficientFamily),
    /// Tabulated SCALC1 file; its header fixes the grid.
    File(PathBuf),
}

impl CoefficientSource {
    pub fn label(&self) -> String {
        match self {
            CoefficientSource::Preset(p) => format!("{p:?}"),
            CoefficientSource::Family(f) => f.label(),
            CoefficientSource::File(p) => format!("file:{}", p.display()),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(
            self,
            CoefficientSource::Preset(Preset::T1) | CoefficientSource::Family(CoefficientFamily::Constant { .. })
        )
    }

    /// Builds the coefficients on `grid`. Files must agree with the grid.
    pub fn build(&self, grid: &GridSpec) -> Result<CoefficientField> {
        match self {
            CoefficientSource::Preset(p) => CoefficientField::from_family(grid, &p.family()),
            CoefficientSource::Family(f) => CoefficientField::from_family(grid, f),
            CoefficientSource::File(path) => {
                let c = read_coefficients(path, grid.lengths())?;
                if c.grid() != grid {
                    return Err(Error::Config(format!(
                        "coefficient file {} is tabulated on a different grid than the run",
                        path.display()
                    )));
                }
                Ok(c)
            }
        }
    }
}

/// Pass thresholds of every check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub oracle: f64,
    pub resolvent_identity: f64,
    pub semigroup: f64,
    pub block_identity: f64,
    pub link: f64,
    pub intertwining: f64,
    pub adjointness: f64,
    pub fubini: f64,
    pub kato_constant: f64,
    pub kato_stability: f64,
    pub identification_c: f64,
    pub psi_independence_c: f64,
    pub residual: f64,
    pub consistency: f64,
    pub comparability_c: f64,
    pub rescaling: f64,
    pub compatibility: f64,
    pub min_order: f64,
    pub offdiag_gamma: f64,
    pub fit_residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            oracle: 1e-8,
            resolvent_identity: 1e-9,
            semigroup: 1e-7,
            block_identity: 1e-12,
            link: 1e-7,
            intertwining: 1e-6,
            adjointness: 1e-12,
            fubini: 1e-12,
            kato_constant: 1e-9,
            kato_stability: 0.1,
            identification_c: 20.0,
            psi_independence_c: 10.0,
            residual: 1e-5,
            consistency: 1e-8,
            comparability_c: 100.0,
            rescaling: 1e-12,
            compatibility: 1e-6,
            min_order: 1.0,
            offdiag_gamma: 5.0,
            fit_residual: 0.2,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<()> {
        let v = serde_json::to_value(self).map_err(|e| Error::Config(e.to_string()))?;
        for (k, x) in v.as_object().into_iter().flatten() {
            match x.as_f64() {
                Some(x) if x > 0.0 && x.is_finite() => {}
                _ => return Err(Error::Config(format!("tolerance {k} must be positive and finite"))),
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub campaign: Campaign,
    pub grid: GridConfig,
    pub coefficients: Vec<CoefficientSource>,
    /// Exponents for the solver diagnostics.
    pub exponents: Vec<f64>,
    /// Hölder exponent for the Hölder Dirichlet problem.
    pub alpha: f64,
    /// Declare the adjoint hypothesis enabling the `sup_t` Hölder diagnostic.
    pub holder_hypothesis: bool,
    /// Grid sizes for refinement studies (Kato stability, compatibility order).
    pub refinement: Vec<usize>,
    /// Random inputs per family for checks drawn over random data.
    pub samples: usize,
    pub kato_samples: usize,
    pub probe: ProbeConfig,
    /// Also probe the adjoint operator.
    pub adjoint: bool,
    pub tolerances: Tolerances,
    /// Where reports are written; `None` keeps the report in memory.
    pub output_dir: Option<PathBuf>,
    pub svg: bool,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            campaign: Campaign::VerifyAll,
            grid: GridConfig::default(),
            coefficients: vec![CoefficientSource::Preset(Preset::T1)],
            exponents: vec![2.0],
            alpha: 0.5,
            holder_hypothesis: false,
            refinement: vec![32, 64, 128],
            samples: 20,
            kato_samples: 100,
            probe: ProbeConfig::default(),
            adjoint: false,
            tolerances: Tolerances::default(),
            output_dir: None,
            svg: false,
            seed: 2024,
        }
    }
}

fn check_exponent(p: f64, what: &str) -> Result<()> {
    if !(p > EXPONENT_FLOOR) || !p.is_finite() {
        return Err(Error::Config(format!(
            "{what} exponent {p} is not above the 1_* floor {EXPONENT_FLOOR} (1_* = n/(n+1) at n = 1)"
        )));
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.spec().map_err(|e| Error::Config(e.to_string()))?;
        if self.coefficients.is_empty() {
            return Err(Error::Config("at least one coefficient source is required".into()));
        }
        if self.exponents.is_empty() {
            return Err(Error::Config("at least one solver exponent is required".into()));
        }
        for &p in &self.exponents {
            check_exponent(p, "solver")?;
        }
        for &p in &self.probe.p_grid {
            check_exponent(p, "probe")?;
        }
        self.probe.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("Hölder exponent {} must lie in (0, 1)", self.alpha)));
        }
        if self.refinement.len() < 2 || self.refinement.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("refinement needs at least two increasing grid sizes".into()));
        }
        for &k in &self.refinement {
            self.grid.spec_with_points(k).map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.samples == 0 {
            return Err(Error::Config("samples must be positive".into()));
        }
        if self.kato_samples < crate::probes::KATO_MIN_SAMPLES {
            return Err(Error::Config(format!("kato_samples must be at least {}", crate::probes::KATO_MIN_SAMPLES)));
        }
        self.tolerances.validate()
    }
}

/// Parses and validates a JSON configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn emit_config(cfg: &RunConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("configuration serialises")
}
