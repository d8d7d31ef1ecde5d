//! Rough Heston parameter set and the mean-reversion level curve.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Mean-reversion level θ: constant, or piecewise constant on `[breaks[j], breaks[j+1])`
/// with the last value extended to infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaCurve {
    Constant(f64),
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
}

impl ThetaCurve {
    pub fn validate(&self) -> Result<()> {
        match self {
            ThetaCurve::Constant(v) => {
                if !(v.is_finite() && *v >= 0.0) {
                    return invalid(format!("theta must be finite and non-negative, got {v}"));
                }
            }
            ThetaCurve::Piecewise { breaks, values } => {
                if breaks.is_empty() || breaks.len() != values.len() {
                    return invalid("piecewise theta needs one value per break");
                }
                if breaks[0] != 0.0 {
                    return invalid("piecewise theta must start at t = 0");
                }
                if breaks.windows(2).any(|w| !(w[1] > w[0])) {
                    return invalid("piecewise theta breaks must be strictly increasing");
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return invalid("piecewise theta values must be finite and non-negative");
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            ThetaCurve::Constant(v) => *v,
            ThetaCurve::Piecewise { breaks, values } => {
                let idx = breaks.partition_point(|&b| b <= t);
                values[idx.saturating_sub(1)]
            }
        }
    }

    /// Constant pieces `(start, end, value)` covering `[0, ∞)`.
    pub fn pieces(&self) -> Vec<(f64, f64, f64)> {
        match self {
            ThetaCurve::Constant(v) => vec![(0.0, f64::INFINITY, *v)],
            ThetaCurve::Piecewise { breaks, values } => breaks
                .iter()
                .enumerate()
                .map(|(j, &a)| {
                    let b = breaks.get(j + 1).copied().unwrap_or(f64::INFINITY);
                    (a, b, values[j])
                })
                .collect(),
        }
    }

    /// `∫₀ᵗ k(t-s) θ(s) ds` given the kernel primitive `prim(u) = ∫₀ᵘ k`.
    pub fn convolve_with<P: FnMut(f64) -> f64>(&self, mut prim: P, t: f64) -> f64 {
        self.pieces()
            .into_iter()
            .filter(|&(a, _, v)| a < t && v != 0.0)
            .map(|(a, b, v)| {
                let upper = prim(t - a);
                let lower = if b < t { prim(t - b) } else { 0.0 };
                v * (upper - lower)
            })
            .sum()
    }
}

impl Default for ThetaCurve {
    fn default() -> Self {
        ThetaCurve::Constant(0.02)
    }
}

/// Rough Heston parameters `(λ, ρ, ν, H, V₀, θ, S₀, T)`.
///
/// `hurst` lies in `(0, 1/2)`; `hurst = 1/2` (the classical Heston limit with
/// `K ≡ 1`) is accepted only with `classical` set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub rho: f64,
    pub nu: f64,
    pub hurst: f64,
    pub v0: f64,
    #[serde(default)]
    pub theta: ThetaCurve,
    #[serde(default = "one")]
    pub s0: f64,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default)]
    pub classical: bool,
}

fn one() -> f64 {
    1.0
}

impl Default for ModelParams {
    /// The reference experiment: λ=0.3, ρ=-0.7, ν=0.3, H=0.1, V₀=0.02, θ≡0.02, T=1.
    fn default() -> Self {
        Self {
            lambda: 0.3,
            rho: -0.7,
            nu: 0.3,
            hurst: 0.1,
            v0: 0.02,
            theta: ThetaCurve::Constant(0.02),
            s0: 1.0,
            horizon: 1.0,
            classical: false,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.lambda,
            self.rho,
            self.nu,
            self.hurst,
            self.v0,
            self.s0,
            self.horizon,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return invalid("model parameters must be finite");
        }
        if self.lambda < 0.0 {
            return invalid(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return invalid(format!("rho must lie in [-1, 1], got {}", self.rho));
        }
        if self.nu < 0.0 {
            return invalid(format!("nu must be >= 0, got {}", self.nu));
        }
        if self.classical {
            if self.hurst != 0.5 {
                return invalid("classical mode requires hurst = 0.5");
            }
        } else if !(self.hurst > 0.0 && self.hurst < 0.5) {
            return invalid(format!("hurst must lie in (0, 1/2), got {}", self.hurst));
        }
        if self.v0 < 0.0 {
            return invalid(format!("v0 must be >= 0, got {}", self.v0));
        }
        if self.s0 <= 0.0 {
            return invalid(format!("s0 must be > 0, got {}", self.s0));
        }
        if self.horizon <= 0.0 {
            return invalid(format!("horizon must be > 0, got {}", self.horizon));
        }
        self.theta.validate()
    }

    /// Fractional order `α = H + 1/2`.
    pub fn alpha(&self) -> f64 {
        self.hurst + 0.5
    }

    pub fn with_horizon(&self, horizon: f64) -> Self {
        Self {
            horizon,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        ModelParams::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_fields() {
        let base = ModelParams::default();
        for p in [
            ModelParams {
                hurst: 0.5,
                ..base.clone()
            },
            ModelParams {
                hurst: 0.0,
                ..base.clone()
            },
            ModelParams {
                rho: 1.5,
                ..base.clone()
            },
            ModelParams {
                lambda: -0.1,
                ..base.clone()
            },
            ModelParams {
                s0: 0.0,
                ..base.clone()
            },
            ModelParams {
                theta: ThetaCurve::Constant(-1.0),
                ..base.clone()
            },
        ] {
            assert!(p.validate().is_err(), "{p:?}");
        }
        let classical = ModelParams {
            hurst: 0.5,
            classical: true,
            ..base
        };
        classical.validate().unwrap();
    }

    #[test]
    fn piecewise_lookup_and_pieces() {
        let th = ThetaCurve::Piecewise {
            breaks: vec![0.0, 0.5],
            values: vec![0.01, 0.03],
        };
        th.validate().unwrap();
        assert_eq!(th.value(0.2), 0.01);
        assert_eq!(th.value(0.5), 0.03);
        assert_eq!(th.value(7.0), 0.03);
        let pieces = th.pieces();
        assert_eq!(pieces[0], (0.0, 0.5, 0.01));
        assert_eq!(pieces[1].1, f64::INFINITY);
    }

    #[test]
    fn convolution_of_unit_kernel_is_integral() {
        let th = ThetaCurve::Piecewise {
            breaks: vec![0.0, 0.5],
            values: vec![1.0, 3.0],
        };
        // ∫₀¹ θ = 0.5 + 1.5
        let got = th.convolve_with(|u| u, 1.0);
        assert!((got - 2.0).abs() < 1e-15);
    }

    #[test]
    fn theta_json_forms() {
        let c: ThetaCurve = serde_json::from_str("0.02").unwrap();
        assert_eq!(c, ThetaCurve::Constant(0.02));
        let p: ThetaCurve = serde_json::from_str(r#"{"breaks":[0,1],"values":[0.1,0.2]}"#).unwrap();
        assert!(matches!(p, ThetaCurve::Piecewise { .. }));
    }
}
