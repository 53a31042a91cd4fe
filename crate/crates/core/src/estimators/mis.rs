use super::baseline::{weighted_mean, Estimate};
use super::GaussianProposal;
use crate::numerics::SpdMatrix;
use crate::scalar::log_sum_exp;
use crate::{Error, Real, Result};

/// How weights of pooled samples are formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WeightScheme {
    /// Each sample keeps the IS weight of the proposal that drew it.
    Standard,
    /// Each sample is weighted against the equal-size mixture of all
    /// proposals so far; earlier weights are revised at every level.
    DeterministicMixture,
}

/// One evaluated sample in subspace coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord<T> {
    pub theta_r: Vec<T>,
    pub indicator: bool,
    /// Natural log of the current MIS weight.
    pub log_weight: T,
    /// One-based index of the level (and proposal) that drew the sample.
    pub level: usize,
}

impl<T: Real> SampleRecord<T> {
    pub fn weight(&self) -> T {
        self.log_weight.exp()
    }

    /// `d·w`
    pub fn term(&self) -> T {
        if self.indicator {
            self.weight()
        } else {
            T::zero()
        }
    }
}

/// `ln w` for the standard scheme: the record's own proposal only.
pub fn smis_log_weight<T: Real>(theta_r: &[T], proposal: &GaussianProposal<T>) -> T {
    proposal.log_weight(theta_r)
}

pub fn smis_weight<T: Real>(record: &SampleRecord<T>, proposal: &GaussianProposal<T>) -> T {
    smis_log_weight(&record.theta_r, proposal).exp()
}

/// Mixture weight `w = J / Σ_j 1/w_GIS(θ; μ_j, Σ_j)` of a sample against
/// `J` equally sized levels, in log space.
pub fn dmmis_log_weight<T: Real>(theta_r: &[T], proposals: &[GaussianProposal<T>]) -> T {
    let inv: Vec<T> = proposals.iter().map(|p| -p.log_weight(theta_r)).collect();
    T::from_usize_lossy(proposals.len()).ln() - log_sum_exp(&inv)
}

/// Pooled samples from a sequence of proposals with `n_per_level` samples
/// each.
#[derive(Clone, Debug)]
pub struct MisHistory<T> {
    proposals: Vec<GaussianProposal<T>>,
    records: Vec<SampleRecord<T>>,
    n_per_level: usize,
}

impl<T: Real> MisHistory<T> {
    pub fn new(n_per_level: usize) -> Result<Self> {
        if n_per_level == 0 {
            return Err(Error::InvalidArgument(
                "need at least one sample per level".into(),
            ));
        }
        Ok(Self {
            proposals: Vec::new(),
            records: Vec::new(),
            n_per_level,
        })
    }

    pub fn proposals(&self) -> &[GaussianProposal<T>] {
        &self.proposals
    }

    pub fn records(&self) -> &[SampleRecord<T>] {
        &self.records
    }

    pub fn n_per_level(&self) -> usize {
        self.n_per_level
    }

    pub fn levels(&self) -> usize {
        self.proposals.len()
    }

    /// Total sample count `N`.
    pub fn total(&self) -> usize {
        self.records.len()
    }

    /// Appends one level: `samples` were drawn from `proposal` and carry
    /// their indicator values.
    pub fn push_level(
        &mut self,
        proposal: GaussianProposal<T>,
        samples: Vec<(Vec<T>, bool)>,
        scheme: WeightScheme,
    ) -> Result<()> {
        if samples.len() != self.n_per_level {
            return Err(Error::DimensionMismatch {
                expected: self.n_per_level,
                got: samples.len(),
            });
        }
        if let Some((t, _)) = samples.iter().find(|(t, _)| t.len() != proposal.dim()) {
            return Err(Error::DimensionMismatch {
                expected: proposal.dim(),
                got: t.len(),
            });
        }
        if scheme == WeightScheme::DeterministicMixture && !self.proposals.is_empty() {
            dmmis_update_weights(self, &proposal);
        }
        self.proposals.push(proposal);
        let level = self.proposals.len();
        let newest = &self.proposals[level - 1];
        for (theta_r, indicator) in samples {
            let log_weight = match scheme {
                WeightScheme::Standard => smis_log_weight(&theta_r, newest),
                WeightScheme::DeterministicMixture => dmmis_log_weight(&theta_r, &self.proposals),
            };
            self.records.push(SampleRecord {
                theta_r,
                indicator,
                log_weight,
                level,
            });
        }
        Ok(())
    }

    /// `p̂ = (1/N) Σ d w` with the pooled-IS CV. Under the mixture scheme
    /// that CV ignores the dependence between levels and is a diagnostic
    /// only.
    pub fn estimate(&self) -> Estimate<T> {
        let terms: Vec<T> = self.records.iter().map(SampleRecord::term).collect();
        weighted_mean(&terms)
    }
}

/// Revises every stored weight for one more level of `n_per_level` samples
/// from `new_proposal`:
/// `w ← (N + N_ce) / (N/w + N_ce/w_GIS(θ; new_proposal))`.
///
/// The proposal is not appended; [`MisHistory::push_level`] does that.
pub fn dmmis_update_weights<T: Real>(
    history: &mut MisHistory<T>,
    new_proposal: &GaussianProposal<T>,
) {
    let n = T::from_usize_lossy(history.total());
    let n_ce = T::from_usize_lossy(history.n_per_level);
    let (ln_n, ln_nce, ln_total) = (n.ln(), n_ce.ln(), (n + n_ce).ln());
    for rec in history.records.iter_mut() {
        let a = ln_n - rec.log_weight;
        let b = ln_nce - new_proposal.log_weight(&rec.theta_r);
        rec.log_weight = ln_total - log_sum_exp(&[a, b]);
    }
}

/// Cross-entropy update over the failing records:
/// `μ = Σ d w θ / Σ d w` and `Σ = Σ d w (θ − μ)(θ − μ)ᵀ / Σ d w`, with the
/// one-shot jitter of [`GaussianProposal::new_with_jitter`].
pub fn ce_update<T: Real>(records: &[SampleRecord<T>]) -> Result<GaussianProposal<T>> {
    let failing: Vec<&SampleRecord<T>> = records.iter().filter(|r| r.indicator).collect();
    let max_lw = failing
        .iter()
        .map(|r| r.log_weight)
        .fold(T::neg_infinity(), T::max);
    if failing.is_empty() || !max_lw.is_finite() {
        return Err(Error::NoFailureSamples);
    }
    let dim = failing[0].theta_r.len();
    // weights rescaled by the largest one; the scale cancels in both ratios
    let w: Vec<T> = failing
        .iter()
        .map(|r| (r.log_weight - max_lw).exp())
        .collect();
    let total: T = w.iter().copied().sum();

    let mut mean = vec![T::zero(); dim];
    for (r, &wi) in failing.iter().zip(&w) {
        for (m, &t) in mean.iter_mut().zip(&r.theta_r) {
            *m += wi * t;
        }
    }
    for m in mean.iter_mut() {
        *m /= total;
    }
    let mut cov = SpdMatrix::<T>::zeros(dim);
    for (r, &wi) in failing.iter().zip(&w) {
        let d: Vec<T> = r.theta_r.iter().zip(&mean).map(|(&t, &m)| t - m).collect();
        for i in 0..dim {
            for j in 0..=i {
                let v = cov.get(i, j) + wi * d[i] * d[j];
                cov.set(i, j, v);
            }
        }
    }
    let cov = SpdMatrix::from_fn(dim, |i, j| cov.get(i, j) / total);
    GaussianProposal::new_with_jitter(mean, cov)
}

/// Pooled estimate over every level of `history`.
pub fn mis_estimate<T: Real>(history: &MisHistory<T>) -> Result<Estimate<T>> {
    if history.total() == 0 {
        return Err(Error::InvalidArgument("empty sample history".into()));
    }
    Ok(history.estimate())
}
