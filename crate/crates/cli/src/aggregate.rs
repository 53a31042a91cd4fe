//! Cross-run statistics over estimate CSVs.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use lais_core::diagnostics::{
    bias_test, cv_of_ensemble, rrmse_of_ensemble, RunEnsemble, MIN_BIAS_RUNS,
};
use lais_core::problems::{
    quadratic_oracle_pf, KlParams, DEFAULT_ORACLE_NODES, DIFFUSION_REFERENCE,
};

use crate::config::ProblemLabel;
use crate::error::{CliError, CliResult};
use crate::records::{EstimateRow, SummaryRow, SCHEMA_VERSION};

/// Source of the reference probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PRef {
    /// Quadrature oracle of the quadratic problem.
    Oracle,
    /// A fixed value applied to every group.
    Value(f64),
    /// The committed LSIS reference of the default diffusion problem.
    LsisReference,
}

impl FromStr for PRef {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "oracle" => Ok(PRef::Oracle),
            "lsis-reference" => Ok(PRef::LsisReference),
            _ => {
                let v: f64 = s.strip_prefix("value=").unwrap_or(s).parse().map_err(|_| {
                    CliError::Config(format!(
                        "p-ref must be `oracle`, `lsis-reference` or a positive number, got `{s}`"
                    ))
                })?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(CliError::Config(format!("p-ref must be positive, got {v}")));
                }
                Ok(PRef::Value(v))
            }
        }
    }
}

impl PRef {
    pub fn resolve(&self, problem: &str, z: f64) -> CliResult<f64> {
        let label: ProblemLabel = problem.parse()?;
        match *self {
            PRef::Value(v) => Ok(v),
            PRef::Oracle => {
                if label.kind != "quadratic" {
                    return Err(CliError::IncompatibleConfigs(format!(
                        "no quadrature oracle for `{problem}`"
                    )));
                }
                Ok(quadratic_oracle_pf(
                    z,
                    label.param("kappa")?,
                    DEFAULT_ORACLE_NODES,
                )?)
            }
            PRef::LsisReference => {
                let d = KlParams::default();
                let matches = label.kind == "diffusion"
                    && label.param("elements")? == d.elements as f64
                    && label.param("modes")? == d.modes as f64
                    && label.param("corr_len")? == d.corr_len
                    && label.param("mean_a")? == d.mean_a
                    && label.param("var_a")? == d.var_a
                    && z == DIFFUSION_REFERENCE.z;
                if !matches {
                    return Err(CliError::IncompatibleConfigs(format!(
                        "the LSIS reference covers the default diffusion problem at z = {}, not `{problem}` at z = {z}",
                        DIFFUSION_REFERENCE.z
                    )));
                }
                Ok(DIFFUSION_REFERENCE.p)
            }
        }
    }
}

type GroupKey = (String, String, usize, u64, usize, usize, usize);

fn key(r: &EstimateRow) -> GroupKey {
    (
        r.method.clone(),
        r.problem.clone(),
        r.n,
        r.z.to_bits(),
        r.n_ce,
        r.j_max,
        r.level,
    )
}

/// One summary row per (method, problem, n, z, n_ce, j_max, level), in
/// sorted key order.
pub fn aggregate(rows: &[EstimateRow], p_ref: PRef) -> CliResult<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(CliError::Config("no estimate rows to aggregate".into()));
    }
    if let PRef::Value(_) = p_ref {
        let targets: BTreeSet<(&str, u64)> = rows
            .iter()
            .map(|r| (r.problem.as_str(), r.z.to_bits()))
            .collect();
        if targets.len() > 1 {
            return Err(CliError::IncompatibleConfigs(
                "a single p-ref value cannot serve several (problem, z) combinations".into(),
            ));
        }
    }
    let mut groups: BTreeMap<GroupKey, Vec<&EstimateRow>> = BTreeMap::new();
    for r in rows {
        groups.entry(key(r)).or_default().push(r);
    }
    let mut out = Vec::with_capacity(groups.len());
    for (_, runs) in groups {
        let first = runs[0];
        let mut seeds = BTreeSet::new();
        for r in &runs {
            if !seeds.insert(r.seed) {
                return Err(CliError::IncompatibleConfigs(format!(
                    "seed {} appears twice for {} on {} (level {})",
                    r.seed, r.method, r.problem, r.level
                )));
            }
            if r.n_cumulative != first.n_cumulative {
                return Err(CliError::IncompatibleConfigs(format!(
                    "runs of {} at level {} disagree on the sample count",
                    r.method, r.level
                )));
            }
        }
        let p = p_ref.resolve(&first.problem, first.z)?;
        let n_f = runs.iter().map(|r| r.n_f).max().unwrap_or(0);
        let ens = RunEnsemble::new(
            runs.iter().map(|r| r.p_hat).collect(),
            n_f,
            first.method.clone(),
        );
        let bias = (ens.len() >= MIN_BIAS_RUNS)
            .then(|| bias_test(&ens, p))
            .transpose()?;
        out.push(SummaryRow {
            schema_version: SCHEMA_VERSION,
            method: first.method.clone(),
            problem: first.problem.clone(),
            n: first.n,
            z: first.z,
            n_ce: first.n_ce,
            j_max: first.j_max,
            level: first.level,
            n_cumulative: first.n_cumulative,
            n_f,
            runs: ens.len(),
            mean_p_hat: ens.mean(),
            cv: cv_of_ensemble(&ens).ok(),
            rrmse: rrmse_of_ensemble(&ens, p)?,
            bias_z: bias.map(|b| b.z_score),
            bias_pass: bias.map(|b| b.pass),
            p_ref: p,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(values: &[f64], z: f64) -> Vec<EstimateRow> {
        values
            .iter()
            .enumerate()
            .map(|(k, &p_hat)| EstimateRow {
                schema_version: SCHEMA_VERSION,
                method: "mc".into(),
                problem: "quadratic(kappa=5)".into(),
                n: 2,
                z,
                n_ce: 100,
                j_max: 1,
                level: 1,
                n_cumulative: 100,
                n_f: 100,
                n_grad: 0,
                p_hat,
                seed: k as u64,
            })
            .collect()
    }

    #[test]
    fn identical_estimates_have_zero_cv() {
        let s = aggregate(&rows(&[0.02; 100], 2.0), PRef::Value(0.02)).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].cv, Some(0.0));
        assert_eq!(s[0].rrmse, 0.0);
        assert_eq!(s[0].bias_pass, Some(true));
    }

    #[test]
    fn planted_bias_fails() {
        let oracle = quadratic_oracle_pf(2.0, 5.0, DEFAULT_ORACLE_NODES).unwrap();
        let values: Vec<f64> = (0..50)
            .map(|k| oracle * (1.0 + 0.01 * ((k % 7) as f64 - 3.0)))
            .collect();
        let ok = aggregate(&rows(&values, 2.0), PRef::Oracle).unwrap();
        assert_eq!(ok[0].bias_pass, Some(true));
        let bad = aggregate(&rows(&values, 2.0), PRef::Value(2.0 * oracle)).unwrap();
        assert_eq!(bad[0].bias_pass, Some(false));
    }

    #[test]
    fn small_groups_leave_bias_empty() {
        let s = aggregate(&rows(&[0.01, 0.03], 2.0), PRef::Value(0.02)).unwrap();
        assert!(s[0].bias_z.is_none());
        assert!(s[0].cv.is_some());
    }

    #[test]
    fn incompatible_inputs() {
        let mut r = rows(&[0.01, 0.02], 2.0);
        r.extend(rows(&[0.001], 3.0));
        assert!(matches!(
            aggregate(&r, PRef::Value(0.01)),
            Err(CliError::IncompatibleConfigs(_))
        ));
        assert!(aggregate(&r, PRef::Oracle).is_ok());
        let dup = rows(&[0.01, 0.02], 2.0)
            .into_iter()
            .chain(rows(&[0.01], 2.0))
            .collect::<Vec<_>>();
        assert!(matches!(
            aggregate(&dup, PRef::Oracle),
            Err(CliError::IncompatibleConfigs(_))
        ));
        assert!(matches!(
            aggregate(&r, PRef::LsisReference),
            Err(CliError::IncompatibleConfigs(_))
        ));
    }

    #[test]
    fn p_ref_parsing() {
        assert_eq!("oracle".parse::<PRef>().unwrap(), PRef::Oracle);
        assert_eq!(
            "lsis-reference".parse::<PRef>().unwrap(),
            PRef::LsisReference
        );
        assert_eq!("value=1e-4".parse::<PRef>().unwrap(), PRef::Value(1e-4));
        assert_eq!("2.5e-6".parse::<PRef>().unwrap(), PRef::Value(2.5e-6));
        assert!("-1".parse::<PRef>().is_err());
        assert!("nope".parse::<PRef>().is_err());
    }
}
