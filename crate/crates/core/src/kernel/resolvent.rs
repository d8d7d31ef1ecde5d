//! Resolvent of an exponential-sum kernel: `Rⁿ = Kⁿ - λ Kⁿ * Rⁿ`.
//!
//! The Laplace transform `K̂(s)/(1 + λK̂(s))` with `K̂(s) = Σ cᵢ/(s + γᵢ)` is a
//! rational function whose poles are the `n` real roots of `1 + λK̂(s) = 0`,
//! one below each `-γᵢ`. Hence `Rⁿ(t) = Σ rₖ e^{sₖt}` with `rₖ = 1/(λ² Σ cᵢ/(sₖ+γᵢ)²)`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};
use crate::params::ModelParams;

use super::{phi1, phi2, MultiFactorKernel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiFactorResolvent {
    /// Decay rates `-sₖ > 0`, increasing.
    pub rates: Vec<f64>,
    pub residues: Vec<f64>,
}

impl MultiFactorResolvent {
    pub fn new(kernel: &MultiFactorKernel, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return invalid(format!("lambda must be >= 0, got {lambda}"));
        }
        if kernel.is_empty() {
            return invalid("resolvent of an empty kernel");
        }
        let c = kernel.weights();
        let g = kernel.rates();
        if lambda == 0.0 {
            return Ok(Self {
                rates: g.to_vec(),
                residues: c.to_vec(),
            });
        }
        let n = c.len();
        let mut rates = Vec::with_capacity(n);
        let mut residues = Vec::with_capacity(n);
        for i in 0..n {
            // the root sits at s = -γᵢ - d with d in (0, γᵢ₊₁ - γᵢ); offsets from
            // -γᵢ keep the near-pole differences exact
            let shifted = |d: f64, j: usize| (g[j] - g[i]) - d;
            let f = |d: f64| 1.0 + lambda * (0..n).map(|j| c[j] / shifted(d, j)).sum::<f64>();
            let mut lo = 0.0;
            let mut hi = if i + 1 < n {
                g[i + 1] - g[i]
            } else {
                // below -γₙ, K̂ ≥ -Σc/d, so d = λΣc suffices
                let mut hi = lambda * c.iter().sum::<f64>();
                while f(hi) < 0.0 {
                    hi *= 2.0;
                }
                hi
            };
            // f increases from -∞ at d = 0 to +∞ (or a positive value) at hi
            loop {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if f(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let d = 0.5 * (lo + hi);
            let slope: f64 = (0..n).map(|j| c[j] / shifted(d, j).powi(2)).sum();
            rates.push(g[i] + d);
            residues.push(1.0 / (lambda * lambda * slope));
        }
        Ok(Self { rates, residues })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.rates
            .iter()
            .zip(&self.residues)
            .map(|(s, r)| r * (-s * t).exp())
            .sum()
    }

    /// `∫₀ᵗ Rⁿ`.
    pub fn integral(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        self.rates
            .iter()
            .zip(&self.residues)
            .map(|(s, r)| r * t * phi1(s * t))
            .sum()
    }

    /// `∫₀ᵗ ∫₀ᵘ Rⁿ`.
    pub fn double_integral(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        self.rates
            .iter()
            .zip(&self.residues)
            .map(|(s, r)| r * t * t * phi2(s * t))
            .sum()
    }
}

fn check_time(params: &ModelParams, t: f64) -> Result<()> {
    params.validate()?;
    if !(0.0..=params.horizon).contains(&t) {
        return domain(format!("t = {t} outside [0, {}]", params.horizon));
    }
    Ok(())
}

/// `E[Vⁿ_t] = V₀ + ∫₀ᵗ Rⁿ(t-s)(θ(s) - λV₀) ds` for the multi-factor model.
pub fn multifactor_forward_variance(params: &ModelParams, kernel: &MultiFactorKernel, t: f64) -> Result<f64> {
    check_time(params, t)?;
    let r = MultiFactorResolvent::new(kernel, params.lambda)?;
    let drift = params.theta.convolve_with(|u| r.integral(u), t);
    Ok(params.v0 + drift - params.lambda * params.v0 * r.integral(t))
}

/// `∫₀ᵗ E[Vⁿ_s] ds` for the multi-factor model.
pub fn multifactor_integrated_forward_variance(
    params: &ModelParams,
    kernel: &MultiFactorKernel,
    t: f64,
) -> Result<f64> {
    check_time(params, t)?;
    let r = MultiFactorResolvent::new(kernel, params.lambda)?;
    let drift = params.theta.convolve_with(|u| r.double_integral(u), t);
    Ok(params.v0 * t + drift - params.lambda * params.v0 * r.double_integral(t))
}
