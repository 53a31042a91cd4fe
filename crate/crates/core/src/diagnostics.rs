//! Statistics across independent runs of one estimator configuration.
//!
//! Every function here depends only on the multiset of estimates, never on
//! their order: sums run over a sorted copy, so results are bit-identical
//! under any permutation.

use crate::{Error, Real, Result};

/// Bias tests with `|z|` above this fail.
pub const BIAS_Z_THRESHOLD: f64 = 4.0;
/// Fewest runs for which the bias test is attempted.
pub const MIN_BIAS_RUNS: usize = 30;

/// Estimates from runs that share a configuration and differ only in seed.
#[derive(Clone, Debug, PartialEq)]
pub struct RunEnsemble<T> {
    pub estimates: Vec<T>,
    /// Evaluation cost of a single run.
    pub n_per_run: u64,
    pub method: String,
}

impl<T: Real> RunEnsemble<T> {
    pub fn new(estimates: Vec<T>, n_per_run: u64, method: impl Into<String>) -> Self {
        Self {
            estimates,
            n_per_run,
            method: method.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    pub fn mean(&self) -> T {
        mean(&self.estimates)
    }

    /// Standard deviation with divisor `n − 1`.
    pub fn sample_std(&self) -> T {
        let k = self.estimates.len();
        if k < 2 {
            return T::zero();
        }
        (sum_sq_dev(&self.estimates) / T::from_usize_lossy(k - 1)).sqrt()
    }

    /// Standard deviation with divisor `n`.
    pub fn population_std(&self) -> T {
        if self.estimates.is_empty() {
            return T::zero();
        }
        (sum_sq_dev(&self.estimates) / T::from_usize_lossy(self.estimates.len())).sqrt()
    }
}

fn sorted_sum<T: Real>(mut xs: Vec<T>) -> T {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    xs.into_iter().sum()
}

fn mean<T: Real>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::zero();
    }
    // shifted by the minimum so that identical estimates give their value
    // back exactly
    let lo = xs
        .iter()
        .copied()
        .fold(xs[0], |a, b| if b < a { b } else { a });
    lo + sorted_sum(xs.iter().map(|&x| x - lo).collect()) / T::from_usize_lossy(xs.len())
}

fn sum_sq_dev<T: Real>(xs: &[T]) -> T {
    let m = mean(xs);
    sorted_sum(xs.iter().map(|&x| (x - m) * (x - m)).collect())
}

fn check_p_ref<T: Real>(p_ref: T) -> Result<()> {
    if !(p_ref > T::zero()) || !p_ref.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "reference probability must be positive, got {p_ref:e}"
        )));
    }
    Ok(())
}

/// Sample standard deviation over sample mean.
pub fn cv_of_ensemble<T: Real>(ens: &RunEnsemble<T>) -> Result<T> {
    if ens.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 runs for a CV, got {}",
            ens.len()
        )));
    }
    let m = ens.mean();
    if m == T::zero() {
        return Err(Error::ZeroMean);
    }
    Ok(ens.sample_std() / m.abs())
}

/// `√(mean((p̂_k − p_ref)²)) / p_ref`
pub fn rrmse_of_ensemble<T: Real>(ens: &RunEnsemble<T>, p_ref: T) -> Result<T> {
    check_p_ref(p_ref)?;
    if ens.is_empty() {
        return Err(Error::InvalidArgument("empty ensemble".into()));
    }
    let ms = mean(
        &ens.estimates
            .iter()
            .map(|&p| (p - p_ref) * (p - p_ref))
            .collect::<Vec<_>>(),
    );
    Ok(ms.sqrt() / p_ref)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiasTest<T> {
    pub z_score: T,
    pub pass: bool,
}

/// `z = (mean − p_ref) / (s/√K)`, passing when `|z| ≤ 4`. A zero-spread
/// ensemble gets `z = 0` when it sits exactly on `p_ref` and `±∞` otherwise.
pub fn bias_test<T: Real>(ens: &RunEnsemble<T>, p_ref: T) -> Result<BiasTest<T>> {
    check_p_ref(p_ref)?;
    if ens.len() < MIN_BIAS_RUNS {
        return Err(Error::InvalidArgument(format!(
            "bias test needs at least {MIN_BIAS_RUNS} runs, got {}",
            ens.len()
        )));
    }
    let diff = ens.mean() - p_ref;
    let se = ens.sample_std() / T::from_usize_lossy(ens.len()).sqrt();
    let z_score = if diff == T::zero() {
        T::zero()
    } else {
        diff / se
    };
    Ok(BiasTest {
        z_score,
        pass: z_score.abs() <= T::lit(BIAS_Z_THRESHOLD),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ens(xs: &[f64]) -> RunEnsemble<f64> {
        RunEnsemble::new(xs.to_vec(), 100, "test")
    }

    #[test]
    fn cv_examples() {
        assert_eq!(cv_of_ensemble(&ens(&[3.0; 5])).unwrap(), 0.0);
        assert_eq!(cv_of_ensemble(&ens(&[0.02; 100])).unwrap(), 0.0);
        assert_relative_eq!(
            cv_of_ensemble(&ens(&[1.0, 3.0])).unwrap(),
            2f64.sqrt() / 2.0,
            max_relative = 1e-15
        );
        assert!(cv_of_ensemble(&ens(&[1.0])).is_err());
        assert!(matches!(
            cv_of_ensemble(&ens(&[0.0, 0.0])),
            Err(Error::ZeroMean)
        ));
    }

    #[test]
    fn rrmse_examples() {
        let p = 2.5e-6;
        assert_eq!(rrmse_of_ensemble(&ens(&[p; 4]), p).unwrap(), 0.0);
        assert_relative_eq!(rrmse_of_ensemble(&ens(&[0.0, 2.0 * p]), p).unwrap(), 1.0);
        assert!(rrmse_of_ensemble(&ens(&[p]), 0.0).is_err());
    }

    #[test]
    fn bias_examples() {
        let exact: Vec<f64> = (0..40)
            .map(|k| if k % 2 == 0 { 1.25 } else { 0.75 })
            .collect();
        let t = bias_test(&ens(&exact), 1.0).unwrap();
        assert_eq!(t.z_score, 0.0);
        assert!(t.pass);

        let biased: Vec<f64> = (0..100).map(|k| 1.5 + 1e-6 * (k as f64 - 49.5)).collect();
        assert!(!bias_test(&ens(&biased), 1.0).unwrap().pass);
        assert!(bias_test(&ens(&exact[..10]), 1.0).is_err());
    }

    #[test]
    fn order_invariant() {
        let a = [1.0, 4.0, 2.5, 0.5, 3.0];
        let mut b = a;
        b.reverse();
        assert_eq!(
            cv_of_ensemble(&ens(&a)).unwrap(),
            cv_of_ensemble(&ens(&b)).unwrap()
        );
    }
}
