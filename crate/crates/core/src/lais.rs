//! The full LAIS pipeline: rate-function minimization, subspace
//! construction, then cross-entropy adaptation of a Gaussian proposal in the
//! subspace with every evaluation pooled by multiple importance sampling.

use crate::estimators::{
    ce_update, evaluate_indicators, GaussianProposal, MisHistory, WeightScheme,
};
use crate::ldt::{build_subspace, solve_ldt, LdtOptions, LdtSolution, Subspace, DEFAULT_R_MAX};
use crate::numerics::{RngStream, SpdMatrix};
use crate::problems::EventMap;
use crate::{Error, Real, Result};

/// RNG stream carrying subspace draws.
pub const SUBSPACE_STREAM: u64 = 0;
/// RNG stream carrying prior draws for the orthogonal complement.
pub const COMPLEMENT_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct LaisConfig {
    /// Samples per cross-entropy level.
    pub n_ce: usize,
    /// Number of levels; the proposal is updated between levels only.
    pub j_max: usize,
    /// Rank threshold on `λ·|λ_i(H)|`.
    pub epsilon: f64,
    pub r_max: usize,
    pub weight_scheme: WeightScheme,
    pub seed: u64,
}

impl LaisConfig {
    pub fn new(
        n_ce: usize,
        j_max: usize,
        epsilon: f64,
        weight_scheme: WeightScheme,
        seed: u64,
    ) -> Self {
        Self {
            n_ce,
            j_max,
            epsilon,
            r_max: DEFAULT_R_MAX,
            weight_scheme,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ce == 0 || self.j_max == 0 {
            return Err(Error::InvalidArgument(
                "n_ce and j_max must be at least 1".into(),
            ));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.r_max == 0 {
            return Err(Error::InvalidArgument("r_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// State after one level.
#[derive(Clone, Debug)]
pub struct LevelSummary<T> {
    /// One-based level index.
    pub level: usize,
    pub failing: usize,
    pub n_cumulative: usize,
    pub p_hat: T,
    /// Pooled-IS diagnostic CV.
    pub cv_hat: Option<T>,
    /// Proposal the level was drawn from.
    pub proposal: GaussianProposal<T>,
}

#[derive(Clone, Debug)]
pub struct LaisReport<T> {
    pub p_hat: T,
    pub per_level: Vec<LevelSummary<T>>,
    /// Evaluations: optimizer plus `j_max·n_ce` indicators.
    pub n_f: u64,
    /// Gradients: optimizer plus eigensolver.
    pub n_grad: u64,
    pub ldt: LdtSolution<T>,
    pub subspace: Subspace<T>,
}

/// `θ_prior − Φ Φᵀ θ_prior + Φ θ_r`: replaces the subspace component of a
/// prior draw and keeps its orthogonal complement.
pub fn assemble_full_sample<T: Real>(
    theta_prior: &[T],
    subspace: &Subspace<T>,
    theta_r: &[T],
) -> Result<Vec<T>> {
    if theta_prior.len() != subspace.dim() {
        return Err(Error::DimensionMismatch {
            expected: subspace.dim(),
            got: theta_prior.len(),
        });
    }
    if theta_r.len() != subspace.rank() {
        return Err(Error::DimensionMismatch {
            expected: subspace.rank(),
            got: theta_r.len(),
        });
    }
    let coeffs: Vec<T> = subspace
        .project(theta_prior)
        .iter()
        .zip(theta_r)
        .map(|(&p, &t)| t - p)
        .collect();
    let shift = subspace.lift(&coeffs);
    Ok(theta_prior
        .iter()
        .zip(&shift)
        .map(|(&a, &b)| a + b)
        .collect())
}

/// Runs the whole pipeline with default optimizer settings.
pub fn run_lais<T: Real, M: EventMap<T> + ?Sized>(
    map: &M,
    z: T,
    config: &LaisConfig,
) -> Result<LaisReport<T>> {
    config.validate()?;
    let ldt = solve_ldt(map, z, &LdtOptions::default())?;
    let subspace = build_subspace(map, &ldt, T::lit(config.epsilon), config.r_max)?;
    run_lais_in_subspace(map, z, ldt, subspace, config)
}

/// Sampling phase only, for a precomputed optimizer and subspace. Their
/// recorded costs are still charged to the report.
pub fn run_lais_in_subspace<T: Real, M: EventMap<T> + ?Sized>(
    map: &M,
    z: T,
    ldt: LdtSolution<T>,
    subspace: Subspace<T>,
    config: &LaisConfig,
) -> Result<LaisReport<T>> {
    config.validate()?;
    if ldt.dim() != map.dim() || subspace.dim() != map.dim() {
        return Err(Error::DimensionMismatch {
            expected: map.dim(),
            got: subspace.dim(),
        });
    }
    let n = map.dim();
    let r = subspace.rank();
    let mut sub_rng = RngStream::new(config.seed, SUBSPACE_STREAM);
    let mut prior_rng = RngStream::new(config.seed, COMPLEMENT_STREAM);

    let mut proposal =
        GaussianProposal::new(subspace.project(&ldt.theta_star), SpdMatrix::identity(r))?;
    let mut history = MisHistory::new(config.n_ce)?;
    let mut per_level = Vec::with_capacity(config.j_max);

    for level in 1..=config.j_max {
        let thetas_r: Vec<Vec<T>> = (0..config.n_ce)
            .map(|_| proposal.sample(&mut sub_rng))
            .collect();
        let full = thetas_r
            .iter()
            .map(|t| assemble_full_sample(&prior_rng.std_normal_vec(n), &subspace, t))
            .collect::<Result<Vec<_>>>()?;
        let fails = evaluate_indicators(map, z, &full)?;
        let failing = fails.iter().filter(|&&d| d).count();
        history.push_level(
            proposal.clone(),
            thetas_r.into_iter().zip(fails).collect(),
            config.weight_scheme,
        )?;
        let est = history.estimate();
        log::debug!(
            "lais level {level}: {failing} failing, p_hat = {:e}",
            est.p_hat
        );
        per_level.push(LevelSummary {
            level,
            failing,
            n_cumulative: history.total(),
            p_hat: est.p_hat,
            cv_hat: est.cv_hat,
            proposal: proposal.clone(),
        });
        if level == config.j_max {
            break;
        }
        match ce_update(history.records()) {
            Ok(p) => proposal = p,
            Err(Error::NoFailureSamples) => {
                log::warn!("level {level}: no failing samples, keeping the proposal");
            }
            Err(e) => return Err(e),
        }
    }

    let n_f = ldt.n_f_used + (config.j_max * config.n_ce) as u64;
    let n_grad = ldt.n_grad_used + subspace.n_grad_used;
    Ok(LaisReport {
        p_hat: per_level.last().map(|l| l.p_hat).unwrap_or_else(T::zero),
        per_level,
        n_f,
        n_grad,
        ldt,
        subspace,
    })
}
