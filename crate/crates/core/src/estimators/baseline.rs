use rayon::prelude::*;

use crate::numerics::RngStream;
use crate::problems::EventMap;
use crate::scalar::dot;
use crate::{Error, Real, Result};

/// Samples are drawn sequentially and evaluated in parallel in blocks of this
/// size, so results do not depend on the worker count.
pub(crate) const CHUNK: usize = 4096;

/// Point estimate with its within-run coefficient of variation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate<T> {
    pub p_hat: T,
    /// `None` when `p_hat = 0`.
    pub cv_hat: Option<T>,
    pub n: usize,
}

/// Indicator values `F(θ_i) ≥ z`, evaluated in parallel and returned in
/// input order.
pub fn evaluate_indicators<T: Real, M: EventMap<T> + ?Sized>(
    map: &M,
    z: T,
    thetas: &[Vec<T>],
) -> Result<Vec<bool>> {
    thetas.par_iter().map(|t| map.fails(t, z)).collect()
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample size must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Plain Monte Carlo under the prior; `cv = √((p̂ − p̂²)/N) / p̂`.
pub fn mc_estimate<T: Real, M: EventMap<T> + ?Sized>(
    map: &M,
    z: T,
    n: usize,
    rng: &mut RngStream,
) -> Result<Estimate<T>> {
    check_n(n)?;
    let dim = map.dim();
    let mut hits = 0usize;
    let mut done = 0;
    while done < n {
        let m = CHUNK.min(n - done);
        let thetas: Vec<Vec<T>> = (0..m).map(|_| rng.std_normal_vec(dim)).collect();
        hits += evaluate_indicators(map, z, &thetas)?
            .iter()
            .filter(|&&d| d)
            .count();
        done += m;
    }
    let nf = T::from_usize_lossy(n);
    let p = T::from_usize_lossy(hits) / nf;
    let cv_hat = (p > T::zero()).then(|| ((p - p * p) / nf).sqrt() / p);
    Ok(Estimate {
        p_hat: p,
        cv_hat,
        n,
    })
}

/// Importance sampling from the prior shifted to `θ*`:
/// `p̂ = (1/N) Σ 1_F(θ_i) w(θ_i)` with `θ_i ~ N(θ*, I)` and
/// `ln w(θ) = ½‖θ*‖² − θ·θ*`. The CV uses the sample variance of `1_F·w`.
pub fn lsis_estimate<T: Real, M: EventMap<T> + ?Sized>(
    map: &M,
    z: T,
    theta_star: &[T],
    n: usize,
    rng: &mut RngStream,
) -> Result<Estimate<T>> {
    check_n(n)?;
    let dim = map.dim();
    if theta_star.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: theta_star.len(),
        });
    }
    let half_norm2 = T::lit(0.5) * dot(theta_star, theta_star);
    let mut terms = Vec::with_capacity(n);
    let mut done = 0;
    while done < n {
        let m = CHUNK.min(n - done);
        let thetas: Vec<Vec<T>> = (0..m)
            .map(|_| {
                let mut t = rng.std_normal_vec(dim);
                for (ti, &s) in t.iter_mut().zip(theta_star) {
                    *ti += s;
                }
                t
            })
            .collect();
        let fails = evaluate_indicators(map, z, &thetas)?;
        for (t, d) in thetas.iter().zip(fails) {
            terms.push(if d {
                (half_norm2 - dot(t, theta_star)).exp()
            } else {
                T::zero()
            });
        }
        done += m;
    }
    Ok(weighted_mean(&terms))
}

/// Mean of the terms `d_i w_i` and `cv = s / (√N p̂)` with the unbiased
/// sample standard deviation `s`.
pub(crate) fn weighted_mean<T: Real>(terms: &[T]) -> Estimate<T> {
    let n = terms.len();
    let nf = T::from_usize_lossy(n);
    let p = terms.iter().copied().sum::<T>() / nf;
    let cv_hat = (p > T::zero() && n > 1).then(|| {
        let ss: T = terms.iter().map(|&t| (t - p) * (t - p)).sum();
        let s = (ss / (nf - T::one())).sqrt();
        s / (nf.sqrt() * p)
    });
    Estimate {
        p_hat: p,
        cv_hat,
        n,
    }
}
