use super::{CallCounters, EventMap};
use crate::{Error, Real, Result};

/// Default Gauss–Hermite order for [`quadratic_oracle_pf`].
pub const DEFAULT_ORACLE_NODES: usize = 200;

/// Arguments of the survival function above this contribute below `1e-349`.
const SURVIVAL_CUTOFF: f64 = 40.0;

/// `F(θ) = (1/√n) Σθ_k − (κ/4)(θ_1 − θ_2)²`
pub fn quadratic_eval<T: Real>(theta: &[T], kappa: T) -> Result<T> {
    let n = theta.len();
    if n < 2 {
        return Err(Error::InvalidArgument("quadratic map needs n >= 2".into()));
    }
    let scale = T::from_usize_lossy(n).sqrt().recip();
    let sum: T = theta.iter().copied().sum();
    let d = theta[0] - theta[1];
    Ok(scale * sum - kappa / T::lit(4.0) * d * d)
}

pub fn quadratic_grad<T: Real>(theta: &[T], kappa: T) -> Result<Vec<T>> {
    let n = theta.len();
    if n < 2 {
        return Err(Error::InvalidArgument("quadratic map needs n >= 2".into()));
    }
    let scale = T::from_usize_lossy(n).sqrt().recip();
    let half_k = kappa / T::lit(2.0);
    let mut g = vec![scale; n];
    g[0] = half_k * (theta[1] - theta[0]) + scale;
    g[1] = half_k * (theta[0] - theta[1]) + scale;
    Ok(g)
}

/// Linear drift in all `n` coordinates plus a concave quadratic in the first
/// two. The failure probability does not depend on `n`.
#[derive(Debug)]
pub struct QuadraticMap<T> {
    n: usize,
    kappa: T,
    counters: CallCounters,
}

impl<T: Real> QuadraticMap<T> {
    pub fn new(n: usize, kappa: T) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument("quadratic map needs n >= 2".into()));
        }
        Ok(Self {
            n,
            kappa,
            counters: CallCounters::default(),
        })
    }

    pub fn kappa(&self) -> T {
        self.kappa
    }

    /// Closed-form minimizer of `½‖θ‖²` on `F(θ) = z`: `(z/√n)·1`.
    pub fn analytic_optimizer(&self, z: T) -> Vec<T> {
        vec![z / T::from_usize_lossy(self.n).sqrt(); self.n]
    }
}

impl<T: Real> EventMap<T> for QuadraticMap<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn counters(&self) -> &CallCounters {
        &self.counters
    }

    fn compute_value(&self, theta: &[T]) -> Result<T> {
        quadratic_eval(theta, self.kappa)
    }

    fn compute_gradient(&self, theta: &[T]) -> Result<Vec<T>> {
        quadratic_grad(theta, self.kappa)
    }
}

/// Standard-normal survival function `Φ̄(x) = P(X > x)`.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Gauss–Hermite nodes and weights for the weight `exp(−x²)`. Nodes start
/// from the Jacobi-matrix eigenvalues and are polished by Newton iteration on
/// the orthonormal Hermite recurrence, which also gives the weights. Nodes
/// ascend.
pub fn gauss_hermite(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 {
        return Err(Error::InvalidArgument(
            "quadrature order must be positive".into(),
        ));
    }
    const PIM4: f64 = 0.751_125_544_464_942_5; // π^(-1/4)
    let n = order;
    let off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    let mut x = crate::numerics::tridiagonal_eig(&vec![0.0; n], &off)?.values;
    x.sort_by(f64::total_cmp);
    let mut w = vec![0.0; n];
    for (xi, wi) in x.iter_mut().zip(w.iter_mut()) {
        let mut z = *xi;
        let mut pp = 0.0;
        for _ in 0..8 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let step = p1 / pp;
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        *xi = z;
        *wi = 2.0 / (pp * pp);
    }
    // restore exact symmetry
    for i in 0..n / 2 {
        let (a, b) = (x[n - 1 - i], w[n - 1 - i]);
        x[i] = -a;
        w[i] = b;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    Ok((x, w))
}

/// Exact failure probability of the quadratic map, for any `n`.
///
/// Rotating to `u = (θ₁+θ₂)/√2`, `v = (θ₁−θ₂)/√2` writes `F = G − (κ/2)v²`
/// with `G ~ N(0,1)` independent of `v`, hence
/// `p_F = E_v[Φ̄(z + (κ/2)v²)]`, evaluated here by Gauss–Hermite quadrature.
/// Nodes whose survival argument exceeds 40 are skipped.
pub fn quadratic_oracle_pf(z: f64, kappa: f64, quad_nodes: usize) -> Result<f64> {
    if quad_nodes < 64 {
        return Err(Error::InvalidArgument(format!(
            "oracle needs at least 64 nodes, got {quad_nodes}"
        )));
    }
    let (x, w) = gauss_hermite(quad_nodes)?;
    let mut acc = 0.0;
    for (&xi, &wi) in x.iter().zip(&w) {
        let v = std::f64::consts::SQRT_2 * xi;
        let arg = z + 0.5 * kappa * v * v;
        if arg > SURVIVAL_CUTOFF {
            continue;
        }
        acc += wi * std_normal_sf(arg);
    }
    Ok(acc / std::f64::consts::PI.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn eval_examples() {
        assert_eq!(quadratic_eval(&[0.0; 5], 5.0).unwrap(), 0.0);
        let s = 4.0 / 2f64.sqrt();
        assert_relative_eq!(quadratic_eval(&[s, s], 5.0).unwrap(), 4.0, epsilon = 1e-14);
        assert_relative_eq!(
            quadratic_eval(&[1.0, -1.0], 5.0).unwrap(),
            -5.0,
            epsilon = 1e-14
        );
        assert!(quadratic_eval(&[1.0], 5.0).is_err());
    }

    #[test]
    fn grad_examples() {
        assert_eq!(quadratic_grad(&[0.0; 4], 5.0).unwrap(), vec![0.5; 4]);
        let r = 0.5f64.sqrt();
        let g = quadratic_grad(&[1.0, -1.0], 5.0).unwrap();
        assert_relative_eq!(g[0], -5.0 + r, epsilon = 1e-14);
        assert_relative_eq!(g[1], 5.0 + r, epsilon = 1e-14);
        assert!(quadratic_grad(&[1.0], 5.0).is_err());
    }

    #[test]
    fn hermite_rule_moments() {
        let (x, w) = gauss_hermite(200).unwrap();
        let pi_sqrt = std::f64::consts::PI.sqrt();
        assert_relative_eq!(w.iter().sum::<f64>(), pi_sqrt, max_relative = 1e-13);
        let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert_relative_eq!(m2, pi_sqrt / 2.0, max_relative = 1e-12);
        let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert_relative_eq!(m4, 0.75 * pi_sqrt, max_relative = 1e-12);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn oracle_linear_case_is_normal_tail() {
        // Φ̄(4) = 3.1671241833119863e-05 (standard tables)
        let p = quadratic_oracle_pf(4.0, 0.0, 200).unwrap();
        assert_relative_eq!(p, 3.167_124_183_311_986e-5, max_relative = 1e-12);
    }

    #[test]
    fn oracle_whole_space() {
        // failure unless v² > 80, which has probability ~1e-19
        let p = quadratic_oracle_pf(-200.0, 5.0, 200).unwrap();
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-15);
    }

    /// Trapezoid rule on the standard-normal density over `v ∈ [−12, 12]`.
    fn trapezoid_pf(z: f64, kappa: f64) -> f64 {
        let steps = 200_000;
        let h = 24.0 / steps as f64;
        let f = |v: f64| {
            (-0.5 * v * v).exp() / (2.0 * std::f64::consts::PI).sqrt()
                * std_normal_sf(z + 0.5 * kappa * v * v)
        };
        let inner: f64 = (1..steps).map(|i| f(-12.0 + i as f64 * h)).sum();
        h * (inner + 0.5 * (f(-12.0) + f(12.0)))
    }

    #[test]
    fn oracle_matches_trapezoid() {
        for z in [1.0, 3.0, 4.0, 6.0] {
            let p = quadratic_oracle_pf(z, 5.0, 200).unwrap();
            assert_relative_eq!(p, trapezoid_pf(z, 5.0), max_relative = 1e-6);
        }
        let p4 = quadratic_oracle_pf(4.0, 5.0, 200).unwrap();
        assert!((6.4e-6..=6.9e-6).contains(&p4), "{p4}");
    }

    #[test]
    fn oracle_rejects_coarse_rule() {
        assert!(quadratic_oracle_pf(4.0, 5.0, 32).is_err());
    }
}
