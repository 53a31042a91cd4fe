//! Experiment configuration. One TOML file per experiment:
//!
//! ```toml
//! z = 4.0
//!
//! [problem]
//! kind = "quadratic"      # or "diffusion"
//! n = 334
//! kappa = 5.0
//!
//! [method]
//! name = "lais-dm"        # mc | lsis | lais-s | lais-dm
//! n_ce = 1000
//! j_max = 5
//! epsilon = 1.0
//!
//! [ensemble]
//! runs = 100
//! base_seed = 0
//!
//! [output]
//! csv = "quadratic-lais-dm.csv"
//! ```
//!
//! Diffusion problems take `elements`, `modes`, `corr_len`, `mean_a`,
//! `var_a` and an optional `kl_cache` path instead of `n` and `kappa`.
//! `mc` and `lsis` read `samples` from `[method]`. Relative output paths are
//! resolved against `$LAIS_OUTPUT_DIR` when it is set.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use lais_core::estimators::WeightScheme;
use lais_core::problems::KlParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const OUTPUT_DIR_ENV: &str = "LAIS_OUTPUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Failure threshold: the event is `F(θ) ≥ z`.
    pub z: f64,
    pub problem: ProblemConfig,
    pub method: MethodConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemConfig {
    Quadratic {
        n: usize,
        #[serde(default = "default_kappa")]
        kappa: f64,
    },
    Diffusion {
        #[serde(default = "default_elements")]
        elements: usize,
        #[serde(default = "default_modes")]
        modes: usize,
        #[serde(default = "default_corr_len")]
        corr_len: f64,
        #[serde(default = "default_mean_a")]
        mean_a: f64,
        #[serde(default = "default_var_a")]
        var_a: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kl_cache: Option<PathBuf>,
    },
}

fn default_kappa() -> f64 {
    5.0
}
fn default_elements() -> usize {
    KlParams::default().elements
}
fn default_modes() -> usize {
    KlParams::default().modes
}
fn default_corr_len() -> f64 {
    KlParams::default().corr_len
}
fn default_mean_a() -> f64 {
    KlParams::default().mean_a
}
fn default_var_a() -> f64 {
    KlParams::default().var_a
}

impl ProblemConfig {
    /// Parameter dimension.
    pub fn dim(&self) -> usize {
        match self {
            ProblemConfig::Quadratic { n, .. } => *n,
            ProblemConfig::Diffusion { modes, .. } => *modes,
        }
    }

    pub fn kl_params(&self) -> Option<KlParams> {
        match *self {
            ProblemConfig::Diffusion {
                elements,
                modes,
                corr_len,
                mean_a,
                var_a,
                ..
            } => Some(KlParams {
                elements,
                corr_len,
                mean_a,
                var_a,
                modes,
            }),
            ProblemConfig::Quadratic { .. } => None,
        }
    }

    /// Self-describing label written to the `problem` CSV column, e.g.
    /// `quadratic(kappa=5)`. Contains no commas.
    pub fn label(&self) -> String {
        match self {
            ProblemConfig::Quadratic { kappa, .. } => format!("quadratic(kappa={kappa})"),
            ProblemConfig::Diffusion {
                elements,
                modes,
                corr_len,
                mean_a,
                var_a,
                ..
            } => format!(
                "diffusion(elements={elements};modes={modes};corr_len={corr_len};mean_a={mean_a};var_a={var_a})"
            ),
        }
    }
}

/// Parsed form of [`ProblemConfig::label`] (dimension not included).
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemLabel {
    pub kind: String,
    pub params: BTreeMap<String, String>,
}

impl ProblemLabel {
    pub fn param(&self, key: &str) -> CliResult<f64> {
        self.params
            .get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| CliError::Config(format!("problem label lacks numeric `{key}`")))
    }
}

impl FromStr for ProblemLabel {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let bad = || CliError::Config(format!("malformed problem label `{s}`"));
        let (kind, rest) = s.split_once('(').ok_or_else(bad)?;
        let body = rest.strip_suffix(')').ok_or_else(bad)?;
        let mut params = BTreeMap::new();
        for kv in body.split(';').filter(|kv| !kv.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(bad)?;
            params.insert(k.to_string(), v.to_string());
        }
        Ok(Self {
            kind: kind.to_string(),
            params,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mc,
    Lsis,
    LaisS,
    LaisDm,
}

impl Method {
    pub fn weight_scheme(self) -> Option<WeightScheme> {
        match self {
            Method::LaisS => Some(WeightScheme::Standard),
            Method::LaisDm => Some(WeightScheme::DeterministicMixture),
            Method::Mc | Method::Lsis => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Mc => "mc",
            Method::Lsis => "lsis",
            Method::LaisS => "lais-s",
            Method::LaisDm => "lais-dm",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub name: Method,
    /// Samples per level (LAIS).
    #[serde(default = "default_n_ce")]
    pub n_ce: usize,
    /// Levels (LAIS).
    #[serde(default = "default_j_max")]
    pub j_max: usize,
    /// Subspace threshold; required by LAIS and `ldt-solve`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "default_r_max")]
    pub r_max: usize,
    /// Sample size (MC, LSIS).
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_n_ce() -> usize {
    1000
}
fn default_j_max() -> usize {
    5
}
fn default_r_max() -> usize {
    lais_core::ldt::DEFAULT_R_MAX
}
fn default_samples() -> usize {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub runs: u64,
    /// Run `k` uses seed `base_seed + k`.
    pub base_seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            runs: 100,
            base_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: PathBuf,
    /// LDT artifact: written by `ldt-solve`, reused by `estimate` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub artifact: Option<PathBuf>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            csv: PathBuf::from("results.csv"),
            artifact: None,
        }
    }
}

/// Command-line overrides of config-file values.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    #[arg(long)]
    pub z: Option<f64>,
    /// Dimension of the quadratic problem.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long)]
    pub n_ce: Option<usize>,
    #[arg(long)]
    pub j_max: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub r_max: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub runs: Option<u64>,
    #[arg(long)]
    pub base_seed: Option<u64>,
    /// CSV output path.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub artifact: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) -> CliResult<()> {
        if let Some(z) = o.z {
            self.z = z;
        }
        match &mut self.problem {
            ProblemConfig::Quadratic { n, kappa } => {
                if let Some(v) = o.n {
                    *n = v;
                }
                if let Some(v) = o.kappa {
                    *kappa = v;
                }
            }
            ProblemConfig::Diffusion { .. } => {
                if o.n.is_some() || o.kappa.is_some() {
                    return Err(CliError::Config(
                        "--n and --kappa apply to the quadratic problem only".into(),
                    ));
                }
            }
        }
        let m = &mut self.method;
        if let Some(v) = o.method {
            m.name = v;
        }
        if let Some(v) = o.n_ce {
            m.n_ce = v;
        }
        if let Some(v) = o.j_max {
            m.j_max = v;
        }
        if let Some(v) = o.epsilon {
            m.epsilon = Some(v);
        }
        if let Some(v) = o.r_max {
            m.r_max = v;
        }
        if let Some(v) = o.samples {
            m.samples = v;
        }
        if let Some(v) = o.runs {
            self.ensemble.runs = v;
        }
        if let Some(v) = o.base_seed {
            self.ensemble.base_seed = v;
        }
        if let Some(v) = &o.output {
            self.output.csv = v.clone();
        }
        if let Some(v) = &o.artifact {
            self.output.artifact = Some(v.clone());
        }
        self.validate()
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if !self.z.is_finite() {
            return bad(format!("z must be finite, got {}", self.z));
        }
        match &self.problem {
            ProblemConfig::Quadratic { n, kappa } => {
                if *n == 0 || !kappa.is_finite() {
                    return bad("quadratic problem needs n >= 1 and finite kappa".into());
                }
            }
            ProblemConfig::Diffusion { .. } => {
                let p = self.problem.kl_params().expect("diffusion");
                if p.elements == 0 || p.modes == 0 || p.modes > p.elements {
                    return bad("diffusion problem needs 1 <= modes <= elements".into());
                }
                if !(p.corr_len > 0.0 && p.mean_a > 0.0 && p.var_a >= 0.0) {
                    return bad(
                        "diffusion problem needs corr_len, mean_a > 0 and var_a >= 0".into(),
                    );
                }
            }
        }
        let m = &self.method;
        match m.name {
            Method::Mc | Method::Lsis if m.samples == 0 => {
                return bad("samples must be at least 1".into())
            }
            Method::LaisS | Method::LaisDm => {
                if m.n_ce == 0 || m.j_max == 0 || m.r_max == 0 {
                    return bad("n_ce, j_max and r_max must be at least 1".into());
                }
                self.epsilon()?;
            }
            _ => {}
        }
        if let Some(e) = m.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return bad(format!("epsilon must be positive, got {e}"));
            }
        }
        if self.ensemble.runs == 0 {
            return bad("ensemble needs at least one run".into());
        }
        Ok(())
    }

    pub fn epsilon(&self) -> CliResult<f64> {
        self.method
            .epsilon
            .ok_or_else(|| CliError::Config("method.epsilon is required for the subspace".into()))
    }

    pub fn csv_path(&self) -> PathBuf {
        resolve_output(&self.output.csv)
    }

    pub fn artifact_path(&self) -> Option<PathBuf> {
        self.output.artifact.as_deref().map(resolve_output)
    }
}

/// Relative paths land under `$LAIS_OUTPUT_DIR` when it is set.
pub fn resolve_output(p: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if p.is_relative() => PathBuf::from(dir).join(p),
        _ => p.to_path_buf(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUADRATIC: &str = r#"
z = 4.0

[problem]
kind = "quadratic"
n = 334

[method]
name = "lais-dm"
epsilon = 1.0
"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_toml(QUADRATIC).unwrap();
        assert_eq!(c.problem, ProblemConfig::Quadratic { n: 334, kappa: 5.0 });
        assert_eq!(
            (c.method.n_ce, c.method.j_max, c.method.r_max),
            (1000, 5, 20)
        );
        assert_eq!(c.ensemble, EnsembleConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = QUADRATIC.replace("epsilon = 1.0", "epsilon = 1.0\nnce = 3");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn lais_requires_epsilon() {
        let text = QUADRATIC.replace("epsilon = 1.0", "");
        let c = ExperimentConfig::from_toml(&text).unwrap();
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn overrides_win() {
        let mut c = ExperimentConfig::from_toml(QUADRATIC).unwrap();
        let o = Overrides {
            z: Some(2.0),
            n: Some(10),
            method: Some(Method::Mc),
            runs: Some(3),
            ..Default::default()
        };
        c.apply(&o).unwrap();
        assert_eq!(c.z, 2.0);
        assert_eq!(c.problem.dim(), 10);
        assert_eq!(c.method.name, Method::Mc);
        assert_eq!(c.ensemble.runs, 3);
    }

    #[test]
    fn labels_parse_back() {
        let d = ProblemConfig::Diffusion {
            elements: 512,
            modes: 150,
            corr_len: 0.01,
            mean_a: 1.0,
            var_a: 0.01,
            kl_cache: None,
        };
        let l: ProblemLabel = d.label().parse().unwrap();
        assert_eq!(l.kind, "diffusion");
        assert_eq!(l.param("corr_len").unwrap(), 0.01);
        let q: ProblemLabel = ProblemConfig::Quadratic { n: 3, kappa: 5.0 }
            .label()
            .parse()
            .unwrap();
        assert_eq!(q.param("kappa").unwrap(), 5.0);
        assert!(!d.label().contains(','));
    }
}
