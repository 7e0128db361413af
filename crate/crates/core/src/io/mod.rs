//! Files and campaigns: the SCALC1 array container, tabulated coefficients,
//! run configuration, reports and the campaign runner behind the CLI.

mod campaign;
mod coefficients;
mod config;
mod field;
mod report;

use std::io::Write;
use std::path::Path;

pub use campaign::{
    band_limited_data, fubini_gap, hardy_identification, oracle_discrepancies, random_data, run_campaign, run_suite,
    setup, suites, Setup,
};
pub use coefficients::{decode_coefficients, encode_coefficients, read_coefficients, write_coefficients};
pub use config::{
    emit_config, load_config, parse_config, Campaign, CoefficientSource, GridConfig, Preset, RunConfig, Tolerances,
    EXPONENT_FLOOR,
};
pub use field::{FieldFile, MAGIC, MAX_POINTS, MAX_VALUES};
pub use report::{
    curve_csv, svg_plot, Check, Comparison, Context, Curve, Failure, FailureKind, Measurement, Report, Status, TOOL,
    VERSION,
};

use crate::error::{Error, Result};

/// Writes `bytes` to a temporary sibling of `path`, syncs it and renames it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut file = std::fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    Ok(result?)
}
