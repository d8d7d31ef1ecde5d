//! Riccati equations of the rough and multi-factor Heston models and the
//! log-price characteristic function built from them.
//!
//! With `F(z, x) = ½(z² - z) + (ρνz - λ)x + ½ν²x²`, the rough model needs the
//! solution of `ψ = K * F(z, ψ)` and the multi-factor model the `n` linear-stiff
//! ODEs `∂ₜψⁱ = -γᵢψⁱ + F(z, Σ cⱼψʲ)`.

mod adams;
mod charfn;
mod multifactor;

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};
use crate::params::ModelParams;

pub use adams::{solve_fractional_riccati_adams, AdamsSolver};
pub use charfn::{char_fn, g_curve, CharFnEngine, CharFnForm, GVariant};
pub use multifactor::{
    solve_multifactor_riccati, solve_multifactor_riccati_with, MultiFactorOptions, MultiFactorScheme,
};

/// `F(z, x) = ½(z² - z) + (ρνz - λ)x + ½ν²x²`.
pub fn riccati_rhs(z: Complex64, x: Complex64, params: &ModelParams) -> Complex64 {
    RhsCoefficients::new(z, params).eval(x)
}

/// `F(z, ·)` with its coefficients evaluated once.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RhsCoefficients {
    constant: Complex64,
    linear: Complex64,
    quadratic: f64,
}

impl RhsCoefficients {
    pub(crate) fn new(z: Complex64, p: &ModelParams) -> Self {
        Self {
            constant: 0.5 * (z * z - z),
            linear: p.rho * p.nu * z - p.lambda,
            quadratic: 0.5 * p.nu * p.nu,
        }
    }

    #[inline]
    pub(crate) fn eval(&self, x: Complex64) -> Complex64 {
        self.constant + x * (self.linear + self.quadratic * x)
    }
}

pub(crate) fn check_strip(z: Complex64) -> Result<()> {
    if !(z.re >= 0.0 && z.re <= 1.0) || !z.im.is_finite() {
        return domain(format!("Re z must lie in [0, 1], got z = {z}"));
    }
    Ok(())
}

pub(crate) fn check_steps(steps: usize) -> Result<()> {
    if steps < 1 {
        return invalid("steps must be >= 1");
    }
    Ok(())
}

/// `ψ(·, z)` on a uniform grid `0 = t₀ < … < t_m = T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiccatiSolution {
    pub z: Complex64,
    pub grid: Vec<f64>,
    pub psi: Vec<Complex64>,
    /// Per-factor states `ψⁱ(t_j)`, indexed `[i][j]`, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor_states: Option<Vec<Vec<Complex64>>>,
}

impl RiccatiSolution {
    pub fn terminal(&self) -> Complex64 {
        self.psi[self.psi.len() - 1]
    }

    pub fn steps(&self) -> usize {
        self.grid.len() - 1
    }

    /// Writes `t,re_psi,im_psi` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "re_psi", "im_psi"])?;
        for (t, p) in self.grid.iter().zip(&self.psi) {
            w.write_record([t.to_string(), p.re.to_string(), p.im.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn uniform_grid(horizon: f64, steps: usize) -> Vec<f64> {
    let dt = horizon / steps as f64;
    (0..=steps)
        .map(|j| if j == steps { horizon } else { j as f64 * dt })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rhs_examples() {
        let p = ModelParams::default();
        let zero = Complex64::new(0.0, 0.0);
        assert_eq!(riccati_rhs(zero, zero, &p), zero);
        assert_eq!(riccati_rhs(Complex64::new(1.0, 0.0), zero, &p), zero);
        let got = riccati_rhs(Complex64::i(), zero, &p);
        assert!((got - Complex64::new(-0.5, -0.5)).norm() < 1e-16);
        let x = Complex64::new(-0.3, 0.7);
        let z = Complex64::new(0.5, 2.0);
        let want = 0.5 * (z * z - z) + (p.rho * p.nu * z - p.lambda) * x + 0.5 * p.nu * p.nu * x * x;
        assert!((riccati_rhs(z, x, &p) - want).norm() < 1e-15);
    }

    #[test]
    fn strip_check() {
        assert!(check_strip(Complex64::new(1.5, 0.0)).is_err());
        assert!(check_strip(Complex64::new(-0.1, 3.0)).is_err());
        check_strip(Complex64::new(0.5, -30.0)).unwrap();
    }

    #[test]
    fn csv_layout() {
        let sol = RiccatiSolution {
            z: Complex64::new(0.5, 1.0),
            grid: vec![0.0, 0.5, 1.0],
            psi: vec![
                Complex64::new(0.0, 0.0),
                Complex64::new(-0.1, 0.2),
                Complex64::new(-0.3, 0.4),
            ],
            factor_states: None,
        };
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,re_psi,im_psi");
        assert_eq!(lines[2], "0.5,-0.1,0.2");
        assert_eq!(lines.len(), 4);
    }
}
