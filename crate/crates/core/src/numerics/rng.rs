use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Real, Result};

/// Reproducible random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha8, a counter-based generator: every stream id selects an
/// independent keystream for the same key, so parallel workers can be handed
/// distinct ids without coordinating.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Fresh stream sharing this seed under a different id.
    pub fn substream(&self, stream_id: u64) -> Self {
        Self::new(self.seed, stream_id)
    }

    pub fn std_normal<T: Real>(&mut self) -> T {
        let x: f64 = self.inner.sample(StandardNormal);
        T::lit(x)
    }

    /// `n` i.i.d. standard-normal variates.
    pub fn sample_std_normal<T: Real>(&mut self, n: usize) -> Result<Vec<T>> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "sample size must be at least 1".into(),
            ));
        }
        Ok(self.std_normal_vec(n))
    }

    pub(crate) fn std_normal_vec<T: Real>(&mut self, n: usize) -> Vec<T> {
        (0..n).map(|_| self.std_normal()).collect()
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random()
    }
}
