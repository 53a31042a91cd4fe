use crate::numerics::{cholesky, Cholesky, RngStream, SpdMatrix};
use crate::scalar::dot;
use crate::{Error, Real, Result};

/// Relative diagonal shift tried once when a covariance fails to factor.
pub const JITTER: f64 = 1e-10;

/// Gaussian proposal `N(μ, Σ)` with its Cholesky factor cached.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianProposal<T> {
    mean: Vec<T>,
    cov: SpdMatrix<T>,
    chol: Cholesky<T>,
    log_det: T,
}

impl<T: Real> GaussianProposal<T> {
    pub fn new(mean: Vec<T>, cov: SpdMatrix<T>) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                got: mean.len(),
            });
        }
        if mean.is_empty() {
            return Err(Error::InvalidArgument(
                "proposal dimension must be positive".into(),
            ));
        }
        let chol = cholesky(&cov)?;
        let log_det = chol.log_det();
        Ok(Self {
            mean,
            cov,
            chol,
            log_det,
        })
    }

    /// `N(μ, I)`
    pub fn standard(mean: Vec<T>) -> Result<Self> {
        let dim = mean.len();
        Self::new(mean, SpdMatrix::identity(dim))
    }

    /// Like [`new`](Self::new), but on a failed factorization retries once
    /// with `Σ + 1e-10·(tr Σ / dim)·I`. A zero-trace covariance (a single
    /// failure sample) is shifted by `1e-10·I` instead.
    pub fn new_with_jitter(mean: Vec<T>, cov: SpdMatrix<T>) -> Result<Self> {
        match Self::new(mean.clone(), cov.clone()) {
            Err(Error::NotPositiveDefinite { pivot, value }) => {
                let dim = cov.dim();
                let scale = cov.trace() / T::from_usize_lossy(dim);
                let scale = if scale > T::zero() { scale } else { T::one() };
                log::warn!(
                    "covariance not positive definite (pivot {pivot}, value {value:e}); adding jitter"
                );
                let mut shifted = cov;
                shifted.add_diagonal(T::lit(JITTER) * scale);
                Self::new(mean, shifted)
            }
            other => other,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn cov(&self) -> &SpdMatrix<T> {
        &self.cov
    }

    pub fn chol(&self) -> &Cholesky<T> {
        &self.chol
    }

    pub fn log_det(&self) -> T {
        self.log_det
    }

    /// `ln w_GIS(θ) = ½ ln det Σ − ½‖θ‖² + ½‖θ − μ‖²_{Σ⁻¹}`, the log of the
    /// prior-to-proposal density ratio.
    pub fn log_weight(&self, theta: &[T]) -> T {
        debug_assert_eq!(theta.len(), self.dim());
        let diff: Vec<T> = theta.iter().zip(&self.mean).map(|(&t, &m)| t - m).collect();
        let half = T::lit(0.5);
        half * self.log_det - half * dot(theta, theta) + half * self.chol.inv_quad_form(&diff)
    }

    pub fn weight(&self, theta: &[T]) -> T {
        self.log_weight(theta).exp()
    }

    /// `μ + L ξ` with `ξ ~ N(0, I)`.
    pub fn sample(&self, rng: &mut RngStream) -> Vec<T> {
        let xi = rng.std_normal_vec(self.dim());
        let mut x = self.chol.mul_vec(&xi);
        for (xi, &m) in x.iter_mut().zip(&self.mean) {
            *xi += m;
        }
        x
    }
}

/// `w_GIS(θ; μ, Σ)` after checking dimensions.
pub fn gaussian_is_weight<T: Real>(theta: &[T], proposal: &GaussianProposal<T>) -> Result<T> {
    if theta.len() != proposal.dim() {
        return Err(Error::DimensionMismatch {
            expected: proposal.dim(),
            got: theta.len(),
        });
    }
    Ok(proposal.weight(theta))
}
