//! Parameter-to-event maps: the [`EventMap`] contract and the benchmark
//! problems built on it.

mod diffusion;
mod kl;
mod quadratic;

use std::sync::atomic::{AtomicU64, Ordering};

pub use diffusion::{fem_endpoint_value, DiffusionMap, DiffusionReference, DIFFUSION_REFERENCE};
pub use kl::{build_kl_field, KlField, KlParams};
pub use quadratic::{
    gauss_hermite, quadratic_eval, quadratic_grad, quadratic_oracle_pf, std_normal_sf,
    QuadraticMap, DEFAULT_ORACLE_NODES,
};

use crate::scalar::dot;
use crate::{Error, Real, Result};

/// Evaluation and gradient tallies. These are the cost ledger for every
/// experiment, so they only ever increase, by exactly one per call.
#[derive(Debug, Default)]
pub struct CallCounters {
    evals: AtomicU64,
    grads: AtomicU64,
}

impl CallCounters {
    pub fn evaluations(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    pub fn gradients(&self) -> u64 {
        self.grads.load(Ordering::Relaxed)
    }

    fn bump_eval(&self) {
        self.evals.fetch_add(1, Ordering::Relaxed);
    }

    fn bump_grad(&self) {
        self.grads.fetch_add(1, Ordering::Relaxed);
    }
}

/// A scalar event map `F: ℝⁿ → ℝ` with a gradient oracle. Failure is the
/// event `F(θ) ≥ z` under a standard-normal prior on `θ`.
///
/// Implementors provide the raw `compute_*` methods; callers go through
/// [`evaluate`](EventMap::evaluate) and [`gradient`](EventMap::gradient),
/// which keep the counters honest.
pub trait EventMap<T: Real>: Sync {
    fn dim(&self) -> usize;

    fn counters(&self) -> &CallCounters;

    fn compute_value(&self, theta: &[T]) -> Result<T>;

    fn compute_gradient(&self, theta: &[T]) -> Result<Vec<T>>;

    fn evaluate(&self, theta: &[T]) -> Result<T> {
        self.check_dim(theta)?;
        self.counters().bump_eval();
        self.compute_value(theta)
    }

    fn gradient(&self, theta: &[T]) -> Result<Vec<T>> {
        self.check_dim(theta)?;
        self.counters().bump_grad();
        self.compute_gradient(theta)
    }

    /// `1_F(θ) = [F(θ) ≥ z]`; one evaluation.
    fn fails(&self, theta: &[T], z: T) -> Result<bool> {
        Ok(self.evaluate(theta)? >= z)
    }

    fn check_dim(&self, theta: &[T]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        Ok(())
    }
}

impl<T: Real, M: EventMap<T> + ?Sized> EventMap<T> for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn counters(&self) -> &CallCounters {
        (**self).counters()
    }
    fn compute_value(&self, theta: &[T]) -> Result<T> {
        (**self).compute_value(theta)
    }
    fn compute_gradient(&self, theta: &[T]) -> Result<Vec<T>> {
        (**self).compute_gradient(theta)
    }
}

/// `F(θ) = aᵀθ + b`. Its failure set is a half-space, so every quantity has
/// a closed form, which makes it the reference case for the estimators.
#[derive(Debug)]
pub struct LinearMap<T> {
    coeffs: Vec<T>,
    offset: T,
    counters: CallCounters,
}

impl<T: Real> LinearMap<T> {
    pub fn new(coeffs: Vec<T>) -> Result<Self> {
        Self::with_offset(coeffs, T::zero())
    }

    pub fn with_offset(coeffs: Vec<T>, offset: T) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument("linear map needs n >= 1".into()));
        }
        Ok(Self {
            coeffs,
            offset,
            counters: CallCounters::default(),
        })
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }
}

impl<T: Real> EventMap<T> for LinearMap<T> {
    fn dim(&self) -> usize {
        self.coeffs.len()
    }

    fn counters(&self) -> &CallCounters {
        &self.counters
    }

    fn compute_value(&self, theta: &[T]) -> Result<T> {
        Ok(dot(&self.coeffs, theta) + self.offset)
    }

    fn compute_gradient(&self, _theta: &[T]) -> Result<Vec<T>> {
        Ok(self.coeffs.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counters_track_calls() {
        let map = LinearMap::new(vec![1.0, 2.0]).unwrap();
        map.evaluate(&[0.0, 1.0]).unwrap();
        map.evaluate(&[0.0, 1.0]).unwrap();
        map.gradient(&[0.0, 1.0]).unwrap();
        assert_eq!(map.counters().evaluations(), 2);
        assert_eq!(map.counters().gradients(), 1);
        assert!(map.fails(&[1.0, 1.0], 3.0).unwrap());
        assert!(!map.fails(&[1.0, 0.0], 3.0).unwrap());
        assert_eq!(map.counters().evaluations(), 4);
    }

    #[test]
    fn wrong_dimension_is_not_counted() {
        let map = LinearMap::new(vec![1.0, 2.0]).unwrap();
        assert!(map.evaluate(&[0.0]).is_err());
        assert_eq!(map.counters().evaluations(), 0);
    }
}
