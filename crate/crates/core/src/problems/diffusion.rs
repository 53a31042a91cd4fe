use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::kl::KlField;
use super::{CallCounters, EventMap};
use crate::{Error, Real, Result};

/// Solves the linear-element system for `−(a v')' = f` on `[0, 1]` with
/// `v(0) = 0`, `v'(1) = 0` and one coefficient value per element. `rhs`
/// holds the assembled load at nodes `x_1 … x_E`; returns the nodal values
/// there.
///
/// Row `i` of the stiffness system reads `q_i − q_{i+1} = rhs_i` with element
/// flux `q_e = a_e (v_{e+1} − v_e)/h` and `q_E = 0`. Eliminating from the
/// Neumann end turns it into a tail sum for the fluxes followed by a prefix
/// sum for the values. For positive loads both sums only add positive terms,
/// so the result is accurate to a few ulps, unlike top-down elimination
/// whose error grows with the `O(E²)` condition number.
fn solve_stiffness<T: Real>(coeff: &[T], rhs: &[T]) -> Vec<T> {
    let ne = coeff.len();
    let h = T::from_usize_lossy(ne).recip();
    let mut flux = vec![T::zero(); ne];
    let mut acc = T::zero();
    for e in (0..ne).rev() {
        acc += rhs[e];
        flux[e] = acc;
    }
    let mut v = Vec::with_capacity(ne);
    let mut prev = T::zero();
    for e in 0..ne {
        prev += h * flux[e] / coeff[e];
        v.push(prev);
    }
    v
}

fn load<T: Real>(ne: usize) -> Vec<T> {
    let h = T::from_usize_lossy(ne).recip();
    let mut b = vec![h; ne];
    b[ne - 1] = h / T::lit(2.0);
    b
}

/// FEM value `v_h(1)` for a piecewise-constant coefficient given per element.
pub fn fem_endpoint_value<T: Real>(coeff: &[T]) -> Result<T> {
    if coeff.is_empty() || coeff.iter().any(|&a| !(a > T::zero())) {
        return Err(Error::InvalidArgument(
            "coefficient must be positive on at least one element".into(),
        ));
    }
    let v = solve_stiffness(coeff, &load(coeff.len()));
    Ok(v[v.len() - 1])
}

/// Committed LSIS reference for the default diffusion problem
/// ([`KlParams::default`](super::KlParams)).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionReference {
    pub z: f64,
    pub p: f64,
    /// Estimated standard error of `p`.
    pub std_error: f64,
    pub samples: usize,
    /// Seed of the single stream (id 0) the samples were drawn from.
    pub seed: u64,
}

/// Reproduced by the acceptance suite, which fails if the value drifts.
pub const DIFFUSION_REFERENCE: DiffusionReference = DiffusionReference {
    z: 0.535,
    p: 1.6306450435393723e-4,
    std_error: 3.3625513443651885e-7,
    samples: 1_000_000,
    seed: 535,
};

/// `F(θ) = v(1)` for the 1D diffusion problem with log-normal coefficient
/// `a(x) = exp(Z(x; θ))`.
///
/// Gradients come from one adjoint solve with the same stiffness matrix, so
/// a gradient call costs two linear solves.
#[derive(Debug)]
pub struct DiffusionMap<T> {
    field: Arc<KlField<T>>,
    counters: CallCounters,
    solves: AtomicU64,
}

impl<T: Real> DiffusionMap<T> {
    pub fn new(field: Arc<KlField<T>>) -> Self {
        Self {
            field,
            counters: CallCounters::default(),
            solves: AtomicU64::new(0),
        }
    }

    pub fn field(&self) -> &KlField<T> {
        &self.field
    }

    /// Total tridiagonal solves performed so far.
    pub fn linear_solves(&self) -> u64 {
        self.solves.load(Ordering::Relaxed)
    }

    fn coefficient(&self, theta: &[T]) -> Result<Vec<T>> {
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("non-finite parameter".into()));
        }
        Ok(self
            .field
            .log_coefficient(theta)?
            .into_iter()
            .map(T::exp)
            .collect())
    }

    fn solve(&self, coeff: &[T], rhs: &[T]) -> Vec<T> {
        self.solves.fetch_add(1, Ordering::Relaxed);
        solve_stiffness(coeff, rhs)
    }
}

impl<T: Real> EventMap<T> for DiffusionMap<T> {
    fn dim(&self) -> usize {
        self.field.modes()
    }

    fn counters(&self) -> &CallCounters {
        &self.counters
    }

    fn compute_value(&self, theta: &[T]) -> Result<T> {
        let coeff = self.coefficient(theta)?;
        let v = self.solve(&coeff, &load(coeff.len()));
        Ok(v[v.len() - 1])
    }

    /// `∂F/∂θ_m = −Σ_e (∂a_e/∂θ_m)/h · Δv_e Δw_e` with `K w = e_E` and
    /// `∂a_e/∂θ_m = a_e √λ_m e_m(x_e)`.
    fn compute_gradient(&self, theta: &[T]) -> Result<Vec<T>> {
        let coeff = self.coefficient(theta)?;
        let ne = coeff.len();
        let v = self.solve(&coeff, &load(ne));
        let mut unit = vec![T::zero(); ne];
        unit[ne - 1] = T::one();
        let w = self.solve(&coeff, &unit);

        let inv_h = T::from_usize_lossy(ne);
        let modes = self.field.modes();
        let mut grad = vec![T::zero(); modes];
        let mut prev_v = T::zero();
        let mut prev_w = T::zero();
        for e in 0..ne {
            let flux = coeff[e] * (v[e] - prev_v) * (w[e] - prev_w) * inv_h;
            prev_v = v[e];
            prev_w = w[e];
            for (m, g) in grad.iter_mut().enumerate() {
                *g -= flux * self.field.scaled_mode(e, m);
            }
        }
        Ok(grad)
    }
}
