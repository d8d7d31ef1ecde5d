//! Relative error of the multi-factor Riccati solution against the fractional one.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernel::{build_kernel, f1_bound, f2_bound, l1_error, FactorChoice};
use crate::params::ModelParams;
use crate::riccati::{solve_multifactor_riccati, AdamsSolver};

/// Below this `|ψ(T, ib)|` the relative error is reported as undefined.
pub const DEGENERATE_PSI: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub n: usize,
    pub b: f64,
    /// `|ψⁿ(T, ib) - ψ(T, ib)| / |ψ(T, ib)|`; `None` when `|ψ(T, ib)| < 1e-14`.
    pub rel_err: Option<f64>,
    pub l1_err: f64,
    pub f1_bound: f64,
    pub f2_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub params: ModelParams,
    pub choice: FactorChoice,
    pub maturity: f64,
    pub steps: usize,
    pub rows: Vec<ErrorRow>,
}

impl ErrorReport {
    /// Writes `n,b,rel_err,l1_err,f1_bound,f2_bound`; an undefined error is an empty field.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "b", "rel_err", "l1_err", "f1_bound", "f2_bound"])?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.b.to_string(),
                r.rel_err.map(|v| v.to_string()).unwrap_or_default(),
                r.l1_err.to_string(),
                r.f1_bound.to_string(),
                r.f2_bound.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Rows for one factor count, in `b` order.
    pub fn rows_for(&self, n: usize) -> impl Iterator<Item = &ErrorRow> {
        self.rows.iter().filter(move |r| r.n == n)
    }

    /// Largest defined relative error for one factor count.
    pub fn max_rel_err(&self, n: usize) -> Option<f64> {
        self.rows_for(n).filter_map(|r| r.rel_err).reduce(f64::max)
    }
}

/// Relative errors at `t = T` for `z = ib` between the multi-factor solution
/// with each factor count and the Adams solution, with the kernel norms.
pub fn riccati_error_report(
    params: &ModelParams,
    factor_counts: &[usize],
    b_grid: &[f64],
    maturity: f64,
    choice: FactorChoice,
    steps: usize,
) -> Result<ErrorReport> {
    if factor_counts.is_empty() || b_grid.is_empty() {
        return invalid("factor counts and b grid must be non-empty");
    }
    if b_grid.iter().any(|b| !b.is_finite()) {
        return invalid("b grid must be finite");
    }
    let p = params.with_horizon(maturity);
    p.validate()?;
    let adams = AdamsSolver::new(p.alpha(), maturity, steps)?;
    let reference: Vec<Complex64> = b_grid
        .par_iter()
        .map(|&b| Ok(adams.solve(&p, Complex64::new(0.0, b))?.terminal()))
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(factor_counts.len() * b_grid.len());
    for &n in factor_counts {
        let built = build_kernel(choice, n, p.hurst, maturity)?;
        let l1 = l1_error(&built.kernel, p.hurst, maturity)?;
        let f1 = f1_bound(p.hurst, maturity, &built.partition)?;
        let f2 = f2_bound(p.hurst, maturity, &built.partition)?;
        let approx: Vec<Complex64> = b_grid
            .par_iter()
            .map(|&b| Ok(solve_multifactor_riccati(&built.kernel, &p, Complex64::new(0.0, b), steps)?.terminal()))
            .collect::<Result<_>>()?;
        for ((&b, r), a) in b_grid.iter().zip(&reference).zip(approx) {
            let rel_err = (r.norm() >= DEGENERATE_PSI).then(|| (a - r).norm() / r.norm());
            rows.push(ErrorRow {
                n,
                b,
                rel_err,
                l1_err: l1,
                f1_bound: f1,
                f2_bound: f2,
            });
        }
    }
    Ok(ErrorReport {
        params: p,
        choice,
        maturity,
        steps,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_frequency_is_flagged() {
        let r = riccati_error_report(
            &ModelParams::default(),
            &[5],
            &[0.0, 1.0],
            1.0,
            FactorChoice::UniformOptimal,
            50,
        )
        .unwrap();
        assert_eq!(r.rows[0].rel_err, None);
        assert!(r.rows[1].rel_err.unwrap() > 0.0);
        assert!(r.rows[0].l1_err <= r.rows[0].f1_bound);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "n,b,rel_err,l1_err,f1_bound,f2_bound");
        assert!(lines[1].starts_with("5,0,,"));
    }

    #[test]
    fn error_shrinks_with_factors() {
        let r = riccati_error_report(
            &ModelParams::default(),
            &[10, 100],
            &[10.0],
            1.0,
            FactorChoice::UniformOptimal,
            100,
        )
        .unwrap();
        assert!(r.max_rel_err(100).unwrap() < r.max_rel_err(10).unwrap());
    }

    #[test]
    fn rejects_empty_inputs() {
        let p = ModelParams::default();
        assert!(riccati_error_report(&p, &[], &[1.0], 1.0, FactorChoice::UniformOptimal, 10).is_err());
        assert!(riccati_error_report(&p, &[3], &[], 1.0, FactorChoice::UniformOptimal, 10).is_err());
    }
}
