use super::linalg::Mat;
use super::rng::RngStream;
use crate::scalar::{axpy, dot, norm};
use crate::{Error, Real, Result};

/// Eigensolver tolerance used when callers have no reason to pick another.
pub const DEFAULT_EIG_TOL: f64 = 1e-8;

const QL_MAX_SWEEPS: usize = 60;

/// Eigenpairs sorted by `|λ|` descending; `vectors` holds one eigenvector
/// per column.
#[derive(Clone, Debug)]
pub struct SymEig<T> {
    pub values: Vec<T>,
    pub vectors: Mat<T>,
    /// Ritz residual bound `‖A v − λ v‖` per pair (zero for dense solves).
    pub residuals: Vec<T>,
    /// Number of operator applications spent.
    pub matvecs: usize,
}

/// Implicit QL on a symmetric tridiagonal matrix.
///
/// `diag` has length `n`; `off[i]` couples rows `i` and `i+1` (length `n-1`).
/// Eigenvectors accumulate into `z`, which must hold the basis the
/// tridiagonal matrix is expressed in (the identity for a bare tridiagonal).
fn ql_implicit<T: Real>(d: &mut [T], off: &[T], z: &mut Mat<T>) -> Result<()> {
    let n = d.len();
    let mut e = vec![T::zero(); n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    let two = T::lit(2.0);
    let eps = T::epsilon();

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > QL_MAX_SWEEPS {
                return Err(Error::NoConvergence {
                    what: "tridiagonal QL",
                    iterations: iter,
                    residual: e[l].abs().as_f64(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..z.rows() {
                    let f = z[(k, i + 1)];
                    let zi = z[(k, i)];
                    z[(k, i + 1)] = s * zi + c * f;
                    z[(k, i)] = c * zi - s * f;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(())
}

/// Householder reduction of a dense symmetric matrix to tridiagonal form.
/// Returns `(Q, diag, off)` with `A = Q·T·Qᵀ`.
fn householder_tridiagonal<T: Real>(a: &Mat<T>) -> (Mat<T>, Vec<T>, Vec<T>) {
    let n = a.rows();
    // Work on row-major `z[i][j]` semantics through (i, j) indexing.
    let mut z = a.clone();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = T::zero();
        if l > 0 {
            let scale: T = (0..i).map(|k| z[(i, k)].abs()).sum();
            if scale == T::zero() {
                e[i] = z[(i, l)];
            } else {
                for k in 0..i {
                    z[(i, k)] /= scale;
                    h += z[(i, k)] * z[(i, k)];
                }
                let f = z[(i, l)];
                let g = if f >= T::zero() { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z[(i, l)] = f - g;
                let mut f = T::zero();
                for j in 0..i {
                    z[(j, i)] = z[(i, j)] / h;
                    let mut g = T::zero();
                    for k in 0..=j {
                        g += z[(j, k)] * z[(i, k)];
                    }
                    for k in j + 1..i {
                        g += z[(k, j)] * z[(i, k)];
                    }
                    e[j] = g / h;
                    f += e[j] * z[(i, j)];
                }
                let hh = f / (h + h);
                for j in 0..i {
                    let f = z[(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        let v = z[(j, k)] - (f * e[k] + g * z[(i, k)]);
                        z[(j, k)] = v;
                    }
                }
            }
        } else {
            e[i] = z[(i, l)];
        }
        d[i] = h;
    }
    if n > 0 {
        d[0] = T::zero();
        e[0] = T::zero();
    }
    for i in 0..n {
        if d[i] != T::zero() {
            for j in 0..i {
                let mut g = T::zero();
                for k in 0..i {
                    g += z[(i, k)] * z[(k, j)];
                }
                for k in 0..i {
                    let v = z[(k, j)] - g * z[(k, i)];
                    z[(k, j)] = v;
                }
            }
        }
        d[i] = z[(i, i)];
        z[(i, i)] = T::one();
        for j in 0..i {
            z[(j, i)] = T::zero();
            z[(i, j)] = T::zero();
        }
    }
    // e[i] couples rows i-1 and i
    let off = e.into_iter().skip(1).collect();
    (z, d, off)
}

fn sort_by_magnitude<T: Real>(values: Vec<T>, vectors: &Mat<T>) -> (Vec<T>, Mat<T>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .abs()
            .partial_cmp(&values[a].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sorted_vals = order.iter().map(|&i| values[i]).collect();
    let cols: Vec<Vec<T>> = order.iter().map(|&i| vectors.col(i).to_vec()).collect();
    (
        sorted_vals,
        Mat::from_columns(&cols).expect("equal-length columns"),
    )
}

/// Full eigendecomposition of a symmetric tridiagonal matrix, sorted by `|λ|`
/// descending.
pub fn tridiagonal_eig<T: Real>(diag: &[T], off: &[T]) -> Result<SymEig<T>> {
    let n = diag.len();
    if off.len() + 1 != n.max(1) {
        return Err(Error::InvalidArgument(
            "off-diagonal must have n-1 entries".into(),
        ));
    }
    let mut d = diag.to_vec();
    let mut z = Mat::identity(n);
    ql_implicit(&mut d, off, &mut z)?;
    let (values, vectors) = sort_by_magnitude(d, &z);
    Ok(SymEig {
        residuals: vec![T::zero(); n],
        values,
        vectors,
        matvecs: 0,
    })
}

/// Full eigendecomposition of a dense symmetric matrix (Householder
/// tridiagonalization followed by implicit QL), sorted by `|λ|` descending.
/// Only the lower triangle of `a` is trusted.
pub fn sym_eig_dense<T: Real>(a: &Mat<T>) -> Result<SymEig<T>> {
    if a.rows() != a.cols() {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    let n = a.rows();
    let sym = Mat::from_fn(n, n, |i, j| if i >= j { a[(i, j)] } else { a[(j, i)] });
    let (mut q, mut d, off) = householder_tridiagonal(&sym);
    ql_implicit(&mut d, &off, &mut q)?;
    let (values, vectors) = sort_by_magnitude(d, &q);
    Ok(SymEig {
        residuals: vec![T::zero(); n],
        values,
        vectors,
        matvecs: 0,
    })
}

/// Orthogonalizes `w` against every column in `basis`, twice.
fn reorthogonalize<T: Real>(basis: &[Vec<T>], w: &mut [T]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, w);
            axpy(-c, q, w);
        }
    }
}

/// Draws a unit vector orthogonal to `basis`; `None` if the draw collapses.
fn fresh_direction<T: Real>(rng: &mut RngStream, basis: &[Vec<T>], n: usize) -> Option<Vec<T>> {
    for _attempt in 0..4 {
        let mut v: Vec<T> = rng.std_normal_vec(n);
        let before = norm(&v);
        reorthogonalize(basis, &mut v);
        let nv = norm(&v);
        if nv > T::lit(1e-8) * before {
            v.iter_mut().for_each(|x| *x /= nv);
            return Some(v);
        }
    }
    None
}

/// Top-`k` eigenpairs (by `|λ|`) of a symmetric operator known only through
/// `matvec`.
///
/// Lanczos with full reorthogonalization. When the Krylov space becomes
/// invariant before `k` pairs have converged, the iteration restarts from a
/// fresh random direction orthogonal to everything seen so far, which keeps
/// the projected matrix block tridiagonal. The iteration stops once every
/// requested Ritz pair satisfies `|β_m s_{m,i}| ≤ tol·max(|λ_1|, 1)`, or
/// fails with [`Error::NoConvergence`] after `10k + 50` steps.
pub fn sym_eig_topk<T, F>(mut matvec: F, n: usize, k: usize, tol: T) -> Result<SymEig<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<Vec<T>>,
{
    if n == 0 || k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    if !(tol > T::zero()) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let cap = 10 * k + 50;
    let mut rng = RngStream::new(0x1a2c_5e00_d15c_0de5, 0);

    let mut basis: Vec<Vec<T>> = Vec::with_capacity(cap.min(n));
    let mut alpha: Vec<T> = Vec::new();
    // beta[i] couples basis i and i+1; zero marks a restart
    let mut beta: Vec<T> = Vec::new();
    let mut q = fresh_direction(&mut rng, &basis, n).expect("empty basis");
    let mut matvecs = 0;
    let mut anorm = T::zero();
    let mut last_residual;

    loop {
        let mut w = matvec(&q)?;
        matvecs += 1;
        if w.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: w.len(),
            });
        }
        let a = dot(&q, &w);
        basis.push(q);
        alpha.push(a);
        reorthogonalize(&basis, &mut w);
        let b = norm(&w);
        anorm = anorm.max(a.abs() + b);
        let m = basis.len();

        // Ritz pairs of the current projected matrix.
        let ritz = tridiagonal_eig(&alpha, &beta)?;
        let take = k.min(m);
        let scale = ritz.values[0].abs().max(T::one());
        let resid: Vec<T> = (0..take)
            .map(|i| (b * ritz.vectors[(m - 1, i)]).abs())
            .collect();
        let worst = resid.iter().copied().fold(T::zero(), T::max);
        last_residual = worst;

        let exhausted = m == n;
        let breakdown = b <= T::lit(64.0) * T::epsilon() * anorm.max(T::one());
        if take == k && (worst <= tol * scale || exhausted) {
            let vectors = Mat::from_fn(n, k, |row, col| {
                basis
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v[row] * ritz.vectors[(j, col)])
                    .sum()
            });
            return Ok(SymEig {
                values: ritz.values[..k].to_vec(),
                vectors,
                residuals: resid,
                matvecs,
            });
        }
        if exhausted || m >= cap {
            break;
        }
        if breakdown {
            match fresh_direction(&mut rng, &basis, n) {
                Some(v) => {
                    q = v;
                    beta.push(T::zero());
                }
                None => break,
            }
        } else {
            q = w.iter().map(|&x| x / b).collect();
            beta.push(b);
        }
    }
    Err(Error::NoConvergence {
        what: "Lanczos eigensolver",
        iterations: basis.len(),
        residual: last_residual.as_f64(),
    })
}
