use std::io::{BufRead, BufReader, Read, Write};

use crate::numerics::{sym_eig_dense, Mat};
use crate::{Error, Real, Result};

const CACHE_MAGIC: &str = "kl-field v1";

/// Parameters of the log-normal coefficient field and its discretization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KlParams {
    /// Equidistant elements on `[0, 1]`, one quadrature point (midpoint) each.
    pub elements: usize,
    /// Correlation length of the exponential kernel.
    pub corr_len: f64,
    /// Mean of the coefficient `a = exp(Z)`.
    pub mean_a: f64,
    /// Variance of the coefficient `a`.
    pub var_a: f64,
    /// Retained modes (the parameter dimension).
    pub modes: usize,
}

impl Default for KlParams {
    fn default() -> Self {
        Self {
            elements: 512,
            corr_len: 0.01,
            mean_a: 1.0,
            var_a: 0.01,
            modes: 150,
        }
    }
}

impl KlParams {
    /// `σ_Z² = ln((V + E²)/E²)`
    pub fn sigma2_z(&self) -> f64 {
        ((self.var_a + self.mean_a * self.mean_a) / (self.mean_a * self.mean_a)).ln()
    }

    /// `μ_Z = ln E − σ_Z²/2`
    pub fn mu_z(&self) -> f64 {
        self.mean_a.ln() - 0.5 * self.sigma2_z()
    }

    fn validate(&self) -> Result<()> {
        if self.elements == 0 || self.modes == 0 || self.modes > self.elements {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= modes <= elements, got modes = {}, elements = {}",
                self.modes, self.elements
            )));
        }
        if !(self.corr_len > 0.0) || !(self.mean_a > 0.0) || !(self.var_a >= 0.0) {
            return Err(Error::InvalidArgument(
                "correlation length and mean must be positive, variance non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Truncated Karhunen–Loève expansion of the Gaussian field
/// `Z(x) = μ_Z + Σ_m √λ_m e_m(x) θ_m` with covariance `σ_Z² exp(−|x−y|/l)`,
/// sampled at element midpoints.
#[derive(Clone, Debug)]
pub struct KlField<T> {
    params: KlParams,
    mu_z: T,
    sigma2_z: T,
    eigenvalues: Vec<T>,
    /// `e_m` at the grid points, one column per mode, normalized so that
    /// `h Σ_i e_m(x_i)² = 1`.
    eigenfunctions: Mat<T>,
    /// `√λ_m e_m(x_i)`, laid out by grid point for the field synthesis loop.
    scaled_modes: Vec<T>,
}

/// Nyström discretization of the exponential kernel on the midpoint grid.
pub fn build_kl_field<T: Real>(params: KlParams) -> Result<KlField<T>> {
    params.validate()?;
    let ne = params.elements;
    let h = 1.0 / ne as f64;
    let sigma2 = params.sigma2_z();
    let grid: Vec<f64> = (0..ne).map(|i| (i as f64 + 0.5) * h).collect();
    // Equal quadrature weights keep the weighted Nyström matrix symmetric.
    let kernel = Mat::from_fn(ne, ne, |i, j| {
        T::lit(h * sigma2 * (-(grid[i] - grid[j]).abs() / params.corr_len).exp())
    });
    let eig = sym_eig_dense(&kernel)?;
    // Kernel is positive semi-definite: the |λ| ordering is the λ ordering.
    let inv_sqrt_h = T::lit(h.sqrt().recip());
    let mut eigenvalues = Vec::with_capacity(params.modes);
    let mut eigenfunctions = Mat::zeros(ne, params.modes);
    for m in 0..params.modes {
        eigenvalues.push(eig.values[m].max(T::zero()));
        let col = eig.vectors.col(m);
        // Sign convention: positive value at the left end of the domain.
        let sign = if col[0] < T::zero() {
            -T::one()
        } else {
            T::one()
        };
        for (dst, &src) in eigenfunctions.col_mut(m).iter_mut().zip(col) {
            *dst = sign * src * inv_sqrt_h;
        }
    }
    Ok(KlField::from_parts(params, eigenvalues, eigenfunctions))
}

impl<T: Real> KlField<T> {
    fn from_parts(params: KlParams, eigenvalues: Vec<T>, eigenfunctions: Mat<T>) -> Self {
        let ne = params.elements;
        let modes = params.modes;
        let mut scaled_modes = vec![T::zero(); ne * modes];
        for m in 0..modes {
            let s = eigenvalues[m].sqrt();
            for i in 0..ne {
                scaled_modes[i * modes + m] = s * eigenfunctions[(i, m)];
            }
        }
        Self {
            mu_z: T::lit(params.mu_z()),
            sigma2_z: T::lit(params.sigma2_z()),
            params,
            eigenvalues,
            eigenfunctions,
            scaled_modes,
        }
    }

    pub fn params(&self) -> &KlParams {
        &self.params
    }

    pub fn modes(&self) -> usize {
        self.params.modes
    }

    pub fn elements(&self) -> usize {
        self.params.elements
    }

    pub fn mu_z(&self) -> T {
        self.mu_z
    }

    pub fn sigma2_z(&self) -> T {
        self.sigma2_z
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn eigenfunctions(&self) -> &Mat<T> {
        &self.eigenfunctions
    }

    /// `√λ_m e_m(x_i)`
    #[inline]
    pub fn scaled_mode(&self, point: usize, mode: usize) -> T {
        self.scaled_modes[point * self.params.modes + mode]
    }

    /// `Z(x_i)` at every grid point.
    pub fn log_coefficient(&self, theta: &[T]) -> Result<Vec<T>> {
        let modes = self.params.modes;
        if theta.len() != modes {
            return Err(Error::DimensionMismatch {
                expected: modes,
                got: theta.len(),
            });
        }
        Ok(self
            .scaled_modes
            .chunks_exact(modes)
            .map(|row| {
                self.mu_z
                    + row
                        .iter()
                        .zip(theta)
                        .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect())
    }

    /// Variance of the truncated field at each grid point, `Σ_m λ_m e_m(x_i)²`.
    pub fn pointwise_variance(&self) -> Vec<T> {
        let modes = self.params.modes;
        self.scaled_modes
            .chunks_exact(modes)
            .map(|row| row.iter().map(|&a| a * a).sum())
            .collect()
    }

    /// Writes the eigenpairs as text: a header line with the parameters, then
    /// one row per mode holding `λ_m` followed by `e_m` on the grid, 17
    /// significant digits.
    pub fn write_cache<W: Write>(&self, mut out: W) -> Result<()> {
        let p = &self.params;
        writeln!(
            out,
            "{CACHE_MAGIC} elements={} corr_len={:.16e} mean_a={:.16e} var_a={:.16e} modes={}",
            p.elements, p.corr_len, p.mean_a, p.var_a, p.modes
        )?;
        let mut line = String::new();
        for m in 0..p.modes {
            line.clear();
            line.push_str(&format!("{:.16e}", self.eigenvalues[m].as_f64()));
            for &v in self.eigenfunctions.col(m) {
                line.push_str(&format!(" {:.16e}", v.as_f64()));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Reads a cache written by [`write_cache`](Self::write_cache).
    pub fn read_cache<R: Read>(input: R) -> Result<Self> {
        let mut lines = BufReader::new(input).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty KL cache".into()))??;
        let params = parse_header(&header)?;
        params.validate()?;
        let mut eigenvalues = Vec::with_capacity(params.modes);
        let mut eigenfunctions = Mat::zeros(params.elements, params.modes);
        for m in 0..params.modes {
            let line = lines
                .next()
                .ok_or_else(|| Error::Format(format!("KL cache truncated at mode {m}")))??;
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("mode {m}: {e}")))?;
            if values.len() != params.elements + 1 {
                return Err(Error::Format(format!(
                    "mode {m}: expected {} values, got {}",
                    params.elements + 1,
                    values.len()
                )));
            }
            eigenvalues.push(T::lit(values[0]));
            for (dst, &v) in eigenfunctions.col_mut(m).iter_mut().zip(&values[1..]) {
                *dst = T::lit(v);
            }
        }
        Ok(Self::from_parts(params, eigenvalues, eigenfunctions))
    }

    /// True when this field was built from `params` (cache key check).
    pub fn matches(&self, params: &KlParams) -> bool {
        self.params == *params
    }
}

fn parse_field<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::Format(format!("bad value for {key}: {value}")))
}

fn parse_header(header: &str) -> Result<KlParams> {
    let rest = header
        .strip_prefix(CACHE_MAGIC)
        .ok_or_else(|| Error::Format(format!("unsupported KL cache header: {header}")))?;
    let mut params = KlParams::default();
    let mut seen = 0;
    for tok in rest.split_whitespace() {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad header token {tok}")))?;
        match key {
            "elements" => params.elements = parse_field(key, value)?,
            "modes" => params.modes = parse_field(key, value)?,
            "corr_len" => params.corr_len = parse_field(key, value)?,
            "mean_a" => params.mean_a = parse_field(key, value)?,
            "var_a" => params.var_a = parse_field(key, value)?,
            _ => return Err(Error::Format(format!("unknown header key {key}"))),
        }
        seen += 1;
    }
    if seen != 5 {
        return Err(Error::Format("KL cache header incomplete".into()));
    }
    Ok(params)
}
