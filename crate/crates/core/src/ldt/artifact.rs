//! Plain-text artifact holding an [`LdtSolution`] and optionally its
//! [`Subspace`], so sampling can be rerun without repeating the optimization.
//!
//! One `key values…` record per line, reals at 17 significant digits:
//!
//! ```text
//! ldt-artifact v1
//! n 3
//! z 4.0000000000000000e0
//! ...
//! theta_star <n reals>
//! n_hat <n reals>
//! rank 2
//! basis <n reals>      (one line per column)
//! ```

use std::io::{BufRead, Write};

use super::{LdtSolution, Subspace};
use crate::numerics::Mat;
use crate::{Error, Real, Result};

const HEADER: &str = "ldt-artifact v1";

fn fmt_reals<T: Real>(xs: &[T]) -> String {
    xs.iter()
        .map(|x| format!("{:.16e}", x.as_f64()))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn write_artifact<T: Real, W: Write>(
    mut w: W,
    sol: &LdtSolution<T>,
    subspace: Option<&Subspace<T>>,
) -> Result<()> {
    writeln!(w, "{HEADER}")?;
    writeln!(w, "n {}", sol.dim())?;
    writeln!(w, "z {}", fmt_reals(&[sol.z]))?;
    writeln!(w, "i_star {}", fmt_reals(&[sol.i_star]))?;
    writeln!(w, "lambda {}", fmt_reals(&[sol.lambda]))?;
    writeln!(
        w,
        "constraint_residual {}",
        fmt_reals(&[sol.constraint_residual])
    )?;
    writeln!(w, "n_f_used {}", sol.n_f_used)?;
    writeln!(w, "n_grad_used {}", sol.n_grad_used)?;
    writeln!(w, "theta_star {}", fmt_reals(&sol.theta_star))?;
    writeln!(w, "n_hat {}", fmt_reals(&sol.n_hat))?;
    if let Some(s) = subspace {
        writeln!(w, "rank {}", s.rank())?;
        writeln!(w, "epsilon {}", fmt_reals(&[s.epsilon_used]))?;
        writeln!(w, "subspace_n_grad {}", s.n_grad_used)?;
        writeln!(w, "h_eigs {}", fmt_reals(&s.h_eigs))?;
        writeln!(w, "computed_eigs {}", fmt_reals(&s.computed_eigs))?;
        for col in s.basis.columns() {
            writeln!(w, "basis {}", fmt_reals(col))?;
        }
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_record(&mut self) -> Result<Option<(String, String)>> {
        for line in self.inner.by_ref() {
            let line = line?;
            self.line_no += 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once(' ').unwrap_or((line, ""));
            return Ok(Some((k.to_string(), v.trim().to_string())));
        }
        Ok(None)
    }

    fn expect(&mut self, key: &str) -> Result<String> {
        match self.next_record()? {
            Some((k, v)) if k == key => Ok(v),
            Some((k, _)) => Err(self.err(format!("expected `{key}`, found `{k}`"))),
            None => Err(self.err(format!("missing `{key}`"))),
        }
    }

    fn err(&self, msg: String) -> Error {
        Error::Format(format!("ldt artifact line {}: {msg}", self.line_no))
    }

    fn reals<T: Real>(&self, s: &str, len: Option<usize>) -> Result<Vec<T>> {
        let out = s
            .split_whitespace()
            .map(|t| t.parse::<f64>().map(T::lit))
            .collect::<std::result::Result<Vec<T>, _>>()
            .map_err(|e| self.err(e.to_string()))?;
        if let Some(len) = len {
            if out.len() != len {
                return Err(self.err(format!("expected {len} values, found {}", out.len())));
            }
        }
        Ok(out)
    }

    fn real<T: Real>(&self, s: &str) -> Result<T> {
        Ok(self.reals(s, Some(1))?[0])
    }

    fn count(&self, s: &str) -> Result<u64> {
        s.parse()
            .map_err(|e: std::num::ParseIntError| self.err(e.to_string()))
    }

    fn real_field<T: Real>(&mut self, key: &str) -> Result<T> {
        let v = self.expect(key)?;
        self.real(&v)
    }

    fn reals_field<T: Real>(&mut self, key: &str, len: Option<usize>) -> Result<Vec<T>> {
        let v = self.expect(key)?;
        self.reals(&v, len)
    }

    fn count_field(&mut self, key: &str) -> Result<u64> {
        let v = self.expect(key)?;
        self.count(&v)
    }
}

pub fn read_artifact<T: Real, R: BufRead>(r: R) -> Result<(LdtSolution<T>, Option<Subspace<T>>)> {
    let mut lines = Lines {
        inner: r.lines(),
        line_no: 0,
    };
    match lines.inner.next() {
        Some(Ok(h)) if h.trim() == HEADER => lines.line_no = 1,
        _ => {
            return Err(Error::Format(format!(
                "ldt artifact: missing header `{HEADER}`"
            )))
        }
    }
    let n = lines.count_field("n")? as usize;
    let z = lines.real_field("z")?;
    let i_star = lines.real_field("i_star")?;
    let lambda = lines.real_field("lambda")?;
    let constraint_residual = lines.real_field("constraint_residual")?;
    let n_f_used = lines.count_field("n_f_used")?;
    let n_grad_used = lines.count_field("n_grad_used")?;
    let theta_star = lines.reals_field("theta_star", Some(n))?;
    let n_hat = lines.reals_field("n_hat", Some(n))?;
    let sol = LdtSolution {
        z,
        theta_star,
        i_star,
        lambda,
        n_hat,
        constraint_residual,
        n_f_used,
        n_grad_used,
    };

    let rank = match lines.next_record()? {
        None => return Ok((sol, None)),
        Some((k, v)) if k == "rank" => lines.count(&v)? as usize,
        Some((k, _)) => return Err(lines.err(format!("expected `rank`, found `{k}`"))),
    };
    if rank == 0 || rank > n {
        return Err(lines.err(format!("rank {rank} outside 1..={n}")));
    }
    let epsilon_used = lines.real_field("epsilon")?;
    let n_grad_sub = lines.count_field("subspace_n_grad")?;
    let h_eigs = lines.reals_field("h_eigs", Some(rank - 1))?;
    let computed_eigs = lines.reals_field("computed_eigs", None)?;
    let mut cols = Vec::with_capacity(rank);
    for _ in 0..rank {
        cols.push(lines.reals_field("basis", Some(n))?);
    }
    if let Some((k, _)) = lines.next_record()? {
        return Err(lines.err(format!("unexpected trailing record `{k}`")));
    }
    let sub = Subspace {
        basis: Mat::from_columns(&cols)?,
        h_eigs,
        computed_eigs,
        epsilon_used,
        n_grad_used: n_grad_sub,
    };
    Ok((sol, Some(sub)))
}
