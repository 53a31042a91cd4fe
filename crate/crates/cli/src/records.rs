//! CSV schemas. Reals are written with 17 significant digits so that every
//! `f64` round-trips exactly; lines end in `\n`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{CliError, CliResult};

/// Bumped whenever a column is added, removed or changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

pub fn real<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{x:.16e}"))
}

fn opt_real<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => real(v, s),
        None => s.serialize_str(""),
    }
}

/// One row per (run, level) from `estimate`. Non-adaptive methods write a
/// single level with `n_ce` equal to the sample size and `j_max = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub schema_version: u32,
    pub method: String,
    pub problem: String,
    pub n: usize,
    #[serde(serialize_with = "real")]
    pub z: f64,
    pub n_ce: usize,
    pub j_max: usize,
    pub level: usize,
    #[serde(rename = "N_cumulative")]
    pub n_cumulative: usize,
    /// Evaluations spent up to and including this level, optimizer included.
    pub n_f: u64,
    pub n_grad: u64,
    #[serde(serialize_with = "real")]
    pub p_hat: f64,
    pub seed: u64,
}

/// One row per (method, problem, n, z, n_ce, j_max, level) from `aggregate`.
/// Statistics that are undefined for the group (a CV over fewer than two
/// runs, a bias test over fewer than 30) are left empty.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub schema_version: u32,
    pub method: String,
    pub problem: String,
    pub n: usize,
    #[serde(serialize_with = "real")]
    pub z: f64,
    pub n_ce: usize,
    pub j_max: usize,
    pub level: usize,
    #[serde(rename = "N_cumulative")]
    pub n_cumulative: usize,
    pub n_f: u64,
    pub runs: usize,
    #[serde(serialize_with = "real")]
    pub mean_p_hat: f64,
    #[serde(serialize_with = "opt_real")]
    pub cv: Option<f64>,
    #[serde(serialize_with = "real")]
    pub rrmse: f64,
    #[serde(serialize_with = "opt_real")]
    pub bias_z: Option<f64>,
    pub bias_pass: Option<bool>,
    #[serde(serialize_with = "real")]
    pub p_ref: f64,
}

pub fn write_rows<T: Serialize, W: Write>(out: W, rows: &[T]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for r in rows {
        w.serialize(r)
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(())
}

pub fn write_rows_to_path<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut buf = std::io::BufWriter::new(file);
    write_rows(&mut buf, rows).map_err(|e| CliError::io(path, e))?;
    buf.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_estimate_rows<R: Read>(input: R) -> CliResult<Vec<EstimateRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r
        .headers()
        .map_err(|e| CliError::Config(e.to_string()))?
        .clone();
    if header.get(0) != Some("schema_version") {
        return Err(CliError::IncompatibleConfigs(
            "not an estimate CSV (first column must be schema_version)".into(),
        ));
    }
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        let row: EstimateRow = rec.map_err(|e| CliError::Config(e.to_string()))?;
        if row.schema_version != SCHEMA_VERSION {
            return Err(CliError::IncompatibleConfigs(format!(
                "schema version {} (this build reads {SCHEMA_VERSION})",
                row.schema_version
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_estimate_rows_from_path(path: &Path) -> CliResult<Vec<EstimateRow>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_estimate_rows(file).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        CliError::IncompatibleConfigs(m) => {
            CliError::IncompatibleConfigs(format!("{}: {m}", path.display()))
        }
        other => other,
    })
}
