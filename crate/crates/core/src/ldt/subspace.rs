use super::LdtSolution;
use crate::numerics::{default_fd_step, fd_hessian_vector, orthonormalize, sym_eig_topk, Mat};
use crate::problems::EventMap;
use crate::scalar::{axpy, dot, norm};
use crate::{Error, Real, Result};

/// Default cap on the subspace rank.
pub const DEFAULT_R_MAX: usize = 20;

/// Orthonormal `n × r` basis whose first column is the constraint normal
/// `n̂`, followed by the retained eigenvectors of the projected Hessian.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace<T> {
    pub basis: Mat<T>,
    /// Retained projected-Hessian eigenvalues (`r − 1` of them), `|·|`
    /// descending.
    pub h_eigs: Vec<T>,
    /// Every eigenvalue the eigensolver returned, retained or not.
    pub computed_eigs: Vec<T>,
    pub epsilon_used: T,
    pub n_grad_used: u64,
}

impl<T: Real> Subspace<T> {
    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    /// `Φ_r ξ`
    pub fn lift(&self, xi: &[T]) -> Vec<T> {
        self.basis.mul_vec(xi)
    }

    /// `Φ_rᵀ θ`
    pub fn project(&self, theta: &[T]) -> Vec<T> {
        self.basis.tr_mul_vec(theta)
    }
}

fn project_out<T: Real>(n_hat: &[T], v: &mut [T]) {
    let a = dot(n_hat, v);
    axpy(-a, n_hat, v);
}

/// `v ↦ P ∇²F(θ*) P v` with `P = I − n̂n̂ᵀ`; each application costs two
/// gradients, except for inputs parallel to `n̂`, which map to zero for free.
pub fn build_h_ldt_matvec<'a, T: Real, M: EventMap<T> + ?Sized>(
    map: &'a M,
    sol: &'a LdtSolution<T>,
) -> impl FnMut(&[T]) -> Result<Vec<T>> + 'a {
    let h = default_fd_step(&sol.theta_star);
    move |v: &[T]| {
        if v.len() != sol.dim() {
            return Err(Error::DimensionMismatch {
                expected: sol.dim(),
                got: v.len(),
            });
        }
        let mut u = v.to_vec();
        project_out(&sol.n_hat, &mut u);
        let s = norm(&u);
        let vn = norm(v);
        if s <= T::epsilon() * vn || s == T::zero() {
            return Ok(vec![T::zero(); v.len()]);
        }
        for x in u.iter_mut() {
            *x /= s;
        }
        let mut hu = fd_hessian_vector(map, &sol.theta_star, &u, h)?;
        for x in hu.iter_mut() {
            *x *= s;
        }
        project_out(&sol.n_hat, &mut hu);
        Ok(hu)
    }
}

/// Chooses the smallest rank with `λ·|λ_i(H)| ≤ ε` for every discarded
/// eigenvalue, capped at `r_max`, and returns the basis `[n̂, v_1, …, v_{r−1}]`.
///
/// `min(r_max + 5, n)` eigenpairs are computed so the first discarded value
/// is always inspected.
pub fn build_subspace<T: Real, M: EventMap<T> + ?Sized>(
    map: &M,
    sol: &LdtSolution<T>,
    epsilon: T,
    r_max: usize,
) -> Result<Subspace<T>> {
    if !(epsilon > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if r_max == 0 {
        return Err(Error::InvalidArgument("r_max must be at least 1".into()));
    }
    let n = sol.dim();
    let grads0 = map.counters().gradients();
    let k = (r_max + 5).min(n);
    let eig = sym_eig_topk(
        build_h_ldt_matvec(map, sol),
        n,
        k,
        T::lit(crate::numerics::DEFAULT_EIG_TOL),
    )?;

    let keep = eig
        .values
        .iter()
        .take(r_max.min(n) - 1)
        .take_while(|&&l| sol.lambda * l.abs() > epsilon)
        .count();

    let mut cols = Vec::with_capacity(keep + 1);
    cols.push(sol.n_hat.clone());
    for j in 0..keep {
        cols.push(eig.vectors.col(j).to_vec());
    }
    let mut basis = orthonormalize(&Mat::from_columns(&cols)?)?;
    basis.col_mut(0).copy_from_slice(&sol.n_hat);

    Ok(Subspace {
        basis,
        h_eigs: eig.values[..keep].to_vec(),
        computed_eigs: eig.values,
        epsilon_used: epsilon,
        n_grad_used: map.counters().gradients() - grads0,
    })
}

/// Second-order asymptotic probability
/// `(2π)^{−½} (2I*)^{−½} Π_i [1 − λλ_i]^{−½} e^{−I*}`.
///
/// Eigenvalues not passed in are taken as zero.
pub fn second_order_prob<T: Real>(sol: &LdtSolution<T>, eigs: &[T]) -> Result<T> {
    let mut log_p = -T::lit(0.5) * T::lit((2.0 * std::f64::consts::PI).ln())
        - T::lit(0.5) * (T::lit(2.0) * sol.i_star).ln()
        - sol.i_star;
    for (index, &l) in eigs.iter().enumerate() {
        let factor = T::one() - sol.lambda * l;
        if !(factor > T::zero()) {
            return Err(Error::CurvatureViolation {
                index,
                value: factor.as_f64(),
            });
        }
        log_p -= T::lit(0.5) * factor.ln();
    }
    Ok(log_p.exp())
}
