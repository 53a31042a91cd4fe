use crate::problems::EventMap;
use crate::scalar::norm;
use crate::{Error, Real, Result};

/// Central-difference step `√ε_machine·(1 + ‖θ‖)`.
pub fn default_fd_step<T: Real>(theta: &[T]) -> T {
    T::epsilon().sqrt() * (T::one() + norm(theta))
}

/// `∇²F(θ)·v ≈ (∇F(θ + h v) − ∇F(θ − h v)) / 2h`, using exactly two
/// gradient evaluations.
pub fn fd_hessian_vector<T: Real, M: EventMap<T> + ?Sized>(
    map: &M,
    theta: &[T],
    v: &[T],
    h: T,
) -> Result<Vec<T>> {
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "step must be positive, got {h}"
        )));
    }
    if theta.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            got: v.len(),
        });
    }
    let plus: Vec<T> = theta.iter().zip(v).map(|(&t, &d)| t + h * d).collect();
    let minus: Vec<T> = theta.iter().zip(v).map(|(&t, &d)| t - h * d).collect();
    let gp = map.gradient(&plus)?;
    let gm = map.gradient(&minus)?;
    let two_h = h + h;
    Ok(gp.iter().zip(&gm).map(|(&a, &b)| (a - b) / two_h).collect())
}
