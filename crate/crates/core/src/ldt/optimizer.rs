use std::collections::VecDeque;

use crate::problems::EventMap;
use crate::scalar::{axpy, dot, norm};
use crate::{Error, Real, Result};

const LBFGS_MEMORY: usize = 10;
const INNER_MAX_ITER: usize = 200;
const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;
const PENALTY_GROWTH: f64 = 10.0;

/// Rate-function minimizer `θ*` of `½‖θ‖²` on `{F(θ) = z}` and the first-order
/// quantities derived from it.
#[derive(Clone, Debug, PartialEq)]
pub struct LdtSolution<T> {
    pub z: T,
    pub theta_star: Vec<T>,
    /// `I* = ½‖θ*‖²`
    pub i_star: T,
    /// `‖θ*‖ / ‖∇F(θ*)‖`
    pub lambda: T,
    /// `∇F(θ*) / ‖∇F(θ*)‖`
    pub n_hat: Vec<T>,
    pub constraint_residual: T,
    pub n_f_used: u64,
    pub n_grad_used: u64,
}

impl<T: Real> LdtSolution<T> {
    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }
}

#[derive(Clone, Debug)]
pub struct LdtOptions<T> {
    /// Starting point; defaults to the linearized-constraint point
    /// `(z − F(0)) ∇F(0) / ‖∇F(0)‖²`.
    pub x0: Option<Vec<T>>,
    /// Cap on outer (multiplier) iterations.
    pub max_iter: usize,
    /// Required `|F(θ) − z| / max(1, |z|)`.
    pub constraint_tol: T,
    /// Required `‖θ − (‖θ‖/‖∇F‖)∇F‖ / ‖θ‖`.
    pub stationarity_tol: T,
}

impl<T: Real> Default for LdtOptions<T> {
    fn default() -> Self {
        Self {
            x0: None,
            max_iter: 50,
            constraint_tol: T::lit(1e-8),
            stationarity_tol: T::lit(1e-6),
        }
    }
}

struct Point<T> {
    theta: Vec<T>,
    /// `F(θ) − z`
    c: T,
    grad_f: Vec<T>,
}

/// Augmented-Lagrangian merit `½‖θ‖² − μc + ½ρc²`.
fn merit<T: Real>(theta: &[T], c: T, mu: T, rho: T) -> T {
    T::lit(0.5) * dot(theta, theta) - mu * c + T::lit(0.5) * rho * c * c
}

fn merit_grad<T: Real>(p: &Point<T>, mu: T, rho: T) -> Vec<T> {
    let mut g = p.theta.clone();
    axpy(rho * p.c - mu, &p.grad_f, &mut g);
    g
}

fn stationarity<T: Real>(theta: &[T], grad_f: &[T]) -> T {
    let tn = norm(theta);
    let gn = norm(grad_f);
    if tn == T::zero() || gn == T::zero() {
        return T::infinity();
    }
    let scale = tn / gn;
    let mut r = theta.to_vec();
    axpy(-scale, grad_f, &mut r);
    norm(&r) / tn
}

/// Solves `min ½‖θ‖²  s.t.  F(θ) = z`, the equality form of the rare-event
/// constraint `F(θ) ≥ z`, which is active whenever `F(0) < z`.
///
/// Augmented Lagrangian with an L-BFGS inner solver and Armijo backtracking.
/// Backtracking costs one evaluation per trial; gradients are taken only at
/// accepted points.
pub fn solve_ldt<T: Real, M: EventMap<T> + ?Sized>(
    map: &M,
    z: T,
    opts: &LdtOptions<T>,
) -> Result<LdtSolution<T>> {
    let n = map.dim();
    if opts.max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be positive".into()));
    }
    let evals0 = map.counters().evaluations();
    let grads0 = map.counters().gradients();

    let origin = vec![T::zero(); n];
    let f0 = map.evaluate(&origin)?;
    if f0 >= z {
        return Err(Error::NotRare {
            f0: f0.as_f64(),
            z: z.as_f64(),
        });
    }
    let x0 = match &opts.x0 {
        Some(x) => {
            if x.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: x.len(),
                });
            }
            x.clone()
        }
        None => {
            let g0 = map.gradient(&origin)?;
            let gg = dot(&g0, &g0);
            if !(gg > T::zero()) {
                return Err(Error::SolverFailure(
                    "gradient vanishes at the origin".into(),
                ));
            }
            g0.iter().map(|&g| g * (z - f0) / gg).collect()
        }
    };

    let mut p = Point {
        c: map.evaluate(&x0)? - z,
        grad_f: map.gradient(&x0)?,
        theta: x0,
    };
    let ctol = opts.constraint_tol * T::one().max(z.abs());
    let stol = opts.stationarity_tol;
    let done = |p: &Point<T>| p.c.abs() <= ctol && stationarity(&p.theta, &p.grad_f) <= stol;

    let gg = dot(&p.grad_f, &p.grad_f);
    if !(gg > T::zero()) {
        return Err(Error::SolverFailure(
            "gradient vanishes at the start point".into(),
        ));
    }
    let mut mu = dot(&p.theta, &p.grad_f) / gg;
    let mut rho = T::lit(10.0) / gg;

    for outer in 0..opts.max_iter {
        if done(&p) {
            return Ok(finish(map, p, z, evals0, grads0));
        }
        let c_before = p.c;
        let inner_tol = T::lit(0.5) * stol * norm(&p.theta).max(T::epsilon());
        p = minimize_merit(map, z, p, mu, rho, inner_tol, &done, outer == 0)?;
        if done(&p) {
            return Ok(finish(map, p, z, evals0, grads0));
        }
        mu -= rho * p.c;
        if p.c.abs() > T::lit(0.25) * c_before.abs() {
            rho *= T::lit(PENALTY_GROWTH);
        }
        log::debug!(
            "ldt outer {outer}: c = {:e}, stationarity = {:e}, mu = {:e}, rho = {:e}",
            p.c,
            stationarity(&p.theta, &p.grad_f),
            mu,
            rho
        );
    }
    Err(Error::NoConvergence {
        what: "rate-function minimization",
        iterations: opts.max_iter,
        residual: (p.c.abs() / T::one().max(z.abs()))
            .max(stationarity(&p.theta, &p.grad_f))
            .as_f64(),
    })
}

fn finish<T: Real, M: EventMap<T> + ?Sized>(
    map: &M,
    p: Point<T>,
    z: T,
    evals0: u64,
    grads0: u64,
) -> LdtSolution<T> {
    let tn = norm(&p.theta);
    let gn = norm(&p.grad_f);
    LdtSolution {
        z,
        i_star: T::lit(0.5) * tn * tn,
        lambda: tn / gn,
        n_hat: p.grad_f.iter().map(|&g| g / gn).collect(),
        constraint_residual: p.c.abs(),
        theta_star: p.theta,
        n_f_used: map.counters().evaluations() - evals0,
        n_grad_used: map.counters().gradients() - grads0,
    }
}

/// L-BFGS on the merit function for fixed `(μ, ρ)`. Returns early when the
/// outer stopping test already holds.
#[allow(clippy::too_many_arguments)]
fn minimize_merit<T: Real, M: EventMap<T> + ?Sized>(
    map: &M,
    z: T,
    mut p: Point<T>,
    mu: T,
    rho: T,
    tol: T,
    done: &impl Fn(&Point<T>) -> bool,
    strict: bool,
) -> Result<Point<T>> {
    let mut pairs: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(LBFGS_MEMORY);
    let mut g = merit_grad(&p, mu, rho);
    let mut phi = merit(&p.theta, p.c, mu, rho);
    // inverse curvature of the penalty direction bounds the first step
    let gamma0 = (T::one() + rho * dot(&p.grad_f, &p.grad_f)).recip();

    for iter in 0..INNER_MAX_ITER {
        if norm(&g) <= tol || done(&p) {
            break;
        }
        let mut d = two_loop(&g, &pairs, gamma0);
        let mut slope = dot(&g, &d);
        if !(slope < T::zero()) {
            pairs.clear();
            d = g.iter().map(|&x| -gamma0 * x).collect();
            slope = dot(&g, &d);
        }

        let mut alpha = T::one();
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut trial = p.theta.clone();
            axpy(alpha, &d, &mut trial);
            let f = map.evaluate(&trial)?;
            if f.is_finite() {
                let c = f - z;
                let phi_t = merit(&trial, c, mu, rho);
                // the strict test rejects steps lost to rounding
                if phi_t < phi && phi_t <= phi + T::lit(ARMIJO_C1) * alpha * slope {
                    accepted = Some((trial, c, phi_t));
                    break;
                }
            }
            alpha *= T::lit(0.5);
        }
        let Some((theta, c, phi_new)) = accepted else {
            if strict && iter == 0 {
                return Err(Error::LineSearchFailure);
            }
            // no representable decrease left along this direction
            break;
        };

        let grad_f = map.gradient(&theta)?;
        let q = Point { theta, c, grad_f };
        let g_new = merit_grad(&q, mu, rho);
        let s: Vec<T> = q.theta.iter().zip(&p.theta).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = g_new.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > T::lit(1e-12) * norm(&s) * norm(&y) {
            if pairs.len() == LBFGS_MEMORY {
                pairs.pop_front();
            }
            pairs.push_back((s, y, sy.recip()));
        }
        p = q;
        g = g_new;
        phi = phi_new;
    }
    Ok(p)
}

/// L-BFGS two-loop recursion: returns `−H·g`.
fn two_loop<T: Real>(g: &[T], pairs: &VecDeque<(Vec<T>, Vec<T>, T)>, gamma0: T) -> Vec<T> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = *rho * dot(s, &q);
        axpy(-a, y, &mut q);
        alphas.push(a);
    }
    let gamma = match pairs.back() {
        Some((s, y, _)) => dot(s, y) / dot(y, y),
        None => gamma0,
    };
    for x in q.iter_mut() {
        *x *= gamma;
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        axpy(a - b, s, &mut q);
    }
    for x in q.iter_mut() {
        *x = -*x;
    }
    q
}
