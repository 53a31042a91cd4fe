use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use lais_core::estimators::{lsis_estimate, mc_estimate};
use lais_core::lais::{run_lais_in_subspace, LaisConfig};
use lais_core::ldt::{
    build_subspace, read_artifact, second_order_prob, solve_ldt, write_artifact, LdtOptions,
    LdtSolution, Subspace,
};
use lais_core::numerics::RngStream;
use lais_core::problems::{build_kl_field, DiffusionMap, EventMap, KlField, QuadraticMap};
use rayon::prelude::*;

use crate::config::{resolve_output, ExperimentConfig, Method, ProblemConfig};
use crate::error::{CliError, CliResult};
use crate::records::{EstimateRow, SCHEMA_VERSION};

pub type DynMap = Box<dyn EventMap<f64> + Send>;

/// Where `ldt-solve` writes when the config names no artifact.
pub const DEFAULT_ARTIFACT: &str = "ldt-artifact.txt";

/// Uses the configured cache when it exists and matches the parameters;
/// otherwise builds the field.
pub fn load_kl_field(problem: &ProblemConfig) -> CliResult<KlField<f64>> {
    let params = problem
        .kl_params()
        .ok_or_else(|| CliError::Config("the KL field belongs to the diffusion problem".into()))?;
    if let ProblemConfig::Diffusion {
        kl_cache: Some(path),
        ..
    } = problem
    {
        if path.exists() {
            let file = File::open(path).map_err(|e| CliError::io(path, e))?;
            let field = KlField::read_cache(BufReader::new(file))?;
            if field.matches(&params) {
                log::info!("KL field loaded from {}", path.display());
                return Ok(field);
            }
            log::warn!(
                "{} was built for other parameters; rebuilding",
                path.display()
            );
        }
    }
    Ok(build_kl_field(params)?)
}

pub fn build_map(cfg: &ExperimentConfig) -> CliResult<DynMap> {
    Ok(match &cfg.problem {
        ProblemConfig::Quadratic { n, kappa } => Box::new(QuadraticMap::new(*n, *kappa)?),
        ProblemConfig::Diffusion { .. } => {
            Box::new(DiffusionMap::new(Arc::new(load_kl_field(&cfg.problem)?)))
        }
    })
}

/// Writes the KL cache to `output`, or to the configured `kl_cache` path.
pub fn cmd_cache_kl(cfg: &ExperimentConfig, output: Option<&Path>) -> CliResult<PathBuf> {
    let path = match (output, &cfg.problem) {
        (Some(p), _) => resolve_output(p),
        (
            None,
            ProblemConfig::Diffusion {
                kl_cache: Some(p), ..
            },
        ) => p.clone(),
        _ => {
            return Err(CliError::Config(
                "no cache path: pass --output or set problem.kl_cache".into(),
            ))
        }
    };
    let params = cfg
        .problem
        .kl_params()
        .ok_or_else(|| CliError::Config("cache-kl needs a diffusion problem".into()))?;
    let field = build_kl_field::<f64>(params)?;
    create_parent(&path)?;
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut w = BufWriter::new(file);
    field.write_cache(&mut w)?;
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn create_parent(path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    Ok(())
}

fn read_artifact_file(path: &Path) -> CliResult<(LdtSolution<f64>, Option<Subspace<f64>>)> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(read_artifact(BufReader::new(file))?)
}

/// Optimizer and, when `with_subspace`, the subspace: from the configured
/// artifact when one exists, computed otherwise. A stored subspace built
/// with a different threshold or rank cap is rebuilt from the stored
/// optimizer.
pub fn ldt_for(
    cfg: &ExperimentConfig,
    map: &dyn EventMap<f64>,
    with_subspace: bool,
) -> CliResult<(LdtSolution<f64>, Option<Subspace<f64>>)> {
    let stored = match cfg.artifact_path() {
        Some(p) if p.exists() => {
            let (sol, sub) = read_artifact_file(&p)?;
            if sol.dim() != map.dim() || sol.z != cfg.z {
                return Err(CliError::IncompatibleConfigs(format!(
                    "{} holds n = {}, z = {}; config has n = {}, z = {}",
                    p.display(),
                    sol.dim(),
                    sol.z,
                    map.dim(),
                    cfg.z
                )));
            }
            log::info!("optimizer loaded from {}", p.display());
            Some((sol, sub))
        }
        _ => None,
    };
    let (sol, sub) = match stored {
        Some(s) => s,
        None => (solve_ldt(map, cfg.z, &LdtOptions::default())?, None),
    };
    if !with_subspace {
        return Ok((sol, sub));
    }
    let eps = cfg.epsilon()?;
    let r_max = cfg.method.r_max;
    let sub = match sub {
        Some(s) if stored_subspace_fits(&s, &sol, eps, r_max) => s,
        _ => build_subspace(map, &sol, eps, r_max)?,
    };
    Ok((sol, Some(sub)))
}

/// True when applying the rank rule with `(eps, r_max)` to the stored
/// eigenvalues is decidable from them and reproduces the stored rank.
fn stored_subspace_fits(
    sub: &Subspace<f64>,
    sol: &LdtSolution<f64>,
    eps: f64,
    r_max: usize,
) -> bool {
    if sub.epsilon_used != eps {
        return false;
    }
    let eigs = &sub.computed_eigs;
    let cap = r_max - 1;
    let keep = eigs
        .iter()
        .take(cap)
        .take_while(|l| sol.lambda * l.abs() > eps)
        .count();
    let decided = keep == cap || keep < eigs.len() || eigs.len() + 1 == sol.dim();
    decided && keep + 1 == sub.rank()
}

/// Solves, writes the artifact, and returns the console summary.
pub fn cmd_ldt_solve(cfg: &ExperimentConfig) -> CliResult<String> {
    let map = build_map(cfg)?;
    let sol = solve_ldt(map.as_ref(), cfg.z, &LdtOptions::default())?;
    let sub = match cfg.method.epsilon {
        Some(eps) => Some(build_subspace(map.as_ref(), &sol, eps, cfg.method.r_max)?),
        None => None,
    };
    let path = cfg
        .artifact_path()
        .unwrap_or_else(|| resolve_output(Path::new(DEFAULT_ARTIFACT)));
    create_parent(&path)?;
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut w = BufWriter::new(file);
    write_artifact(&mut w, &sol, sub.as_ref())?;
    w.flush().map_err(|e| CliError::io(&path, e))?;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "problem        {} (n = {})",
        cfg.problem.label(),
        sol.dim()
    );
    let _ = writeln!(s, "z              {}", cfg.z);
    let _ = writeln!(s, "I* = {:.6}", sol.i_star);
    let _ = writeln!(s, "lambda = {:.6}", sol.lambda);
    let _ = writeln!(s, "|c(theta*)|    {:.3e}", sol.constraint_residual);
    let mut n_grad = sol.n_grad_used;
    match &sub {
        Some(sub) => {
            let _ = writeln!(s, "r = {} (epsilon = {})", sub.rank(), sub.epsilon_used);
            for (i, e) in sub.h_eigs.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "  eig {:>2}: {:+.6e}  lambda*|eig| = {:.6e}",
                    i + 1,
                    e,
                    sol.lambda * e.abs()
                );
            }
            match second_order_prob(&sol, &sub.computed_eigs) {
                Ok(p) => {
                    let k = sub.computed_eigs.len();
                    let _ = writeln!(
                        s,
                        "p_SO = {p:.6e} (k = {k} eigenvalues, the rest taken as zero)"
                    );
                }
                Err(e) => {
                    let _ = writeln!(s, "p_SO undefined: {e}");
                }
            }
            n_grad += sub.n_grad_used;
        }
        None => {
            let _ = writeln!(
                s,
                "r not computed: set method.epsilon to build the subspace"
            );
        }
    }
    let _ = writeln!(
        s,
        "cost           {} evaluations, {n_grad} gradients",
        sol.n_f_used
    );
    let _ = writeln!(s, "artifact       {}", path.display());
    Ok(s)
}

/// Runs the ensemble and returns rows ordered by run, then level.
pub fn cmd_estimate(cfg: &ExperimentConfig) -> CliResult<Vec<EstimateRow>> {
    cfg.validate()?;
    let map = build_map(cfg)?;
    let map = map.as_ref();
    let m = &cfg.method;
    let problem = cfg.problem.label();
    let n = map.dim();
    let row = |level, n_ce, j_max, n_cumulative, n_f, n_grad, p_hat, seed| EstimateRow {
        schema_version: SCHEMA_VERSION,
        method: m.name.to_string(),
        problem: problem.clone(),
        n,
        z: cfg.z,
        n_ce,
        j_max,
        level,
        n_cumulative,
        n_f,
        n_grad,
        p_hat,
        seed,
    };
    let seeds: Vec<u64> = (0..cfg.ensemble.runs)
        .map(|k| cfg.ensemble.base_seed.wrapping_add(k))
        .collect();

    let per_run: Vec<Vec<EstimateRow>> = match m.name {
        Method::Mc => seeds
            .par_iter()
            .map(|&seed| {
                let e = mc_estimate(map, cfg.z, m.samples, &mut RngStream::new(seed, 0))?;
                let ns = m.samples as u64;
                Ok(vec![row(1, m.samples, 1, m.samples, ns, 0, e.p_hat, seed)])
            })
            .collect::<CliResult<_>>()?,
        Method::Lsis => {
            let (sol, _) = ldt_for(cfg, map, false)?;
            seeds
                .par_iter()
                .map(|&seed| {
                    let e = lsis_estimate(
                        map,
                        cfg.z,
                        &sol.theta_star,
                        m.samples,
                        &mut RngStream::new(seed, 0),
                    )?;
                    let n_f = sol.n_f_used + m.samples as u64;
                    Ok(vec![row(
                        1,
                        m.samples,
                        1,
                        m.samples,
                        n_f,
                        sol.n_grad_used,
                        e.p_hat,
                        seed,
                    )])
                })
                .collect::<CliResult<_>>()?
        }
        Method::LaisS | Method::LaisDm => {
            let scheme = m.name.weight_scheme().expect("adaptive method");
            let (sol, sub) = ldt_for(cfg, map, true)?;
            let sub = sub.expect("subspace requested");
            log::info!("subspace rank {}", sub.rank());
            let eps = cfg.epsilon()?;
            seeds
                .par_iter()
                .map(|&seed| {
                    let c = LaisConfig {
                        n_ce: m.n_ce,
                        j_max: m.j_max,
                        epsilon: eps,
                        r_max: m.r_max,
                        weight_scheme: scheme,
                        seed,
                    };
                    let rep = run_lais_in_subspace(map, cfg.z, sol.clone(), sub.clone(), &c)?;
                    let base = rep.n_f - (m.j_max * m.n_ce) as u64;
                    Ok(rep
                        .per_level
                        .iter()
                        .map(|l| {
                            let n_f = base + l.n_cumulative as u64;
                            row(
                                l.level,
                                m.n_ce,
                                m.j_max,
                                l.n_cumulative,
                                n_f,
                                rep.n_grad,
                                l.p_hat,
                                seed,
                            )
                        })
                        .collect())
                })
                .collect::<CliResult<_>>()?
        }
    };
    Ok(per_run.into_iter().flatten().collect())
}
