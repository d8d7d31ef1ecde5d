//! Fractional Adams predictor-corrector (PECE) scheme for `ψ = K * F(z, ψ)`.

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::params::ModelParams;
use crate::special::gamma;

use super::{check_steps, check_strip, uniform_grid, RhsCoefficients, RiccatiSolution};

/// `(m+1)^p - m^p` without cancellation.
fn first_difference(p: f64, m: f64) -> f64 {
    if m == 0.0 {
        1.0
    } else {
        m.powf(p) * (p * (1.0 / m).ln_1p()).exp_m1()
    }
}

/// `(m+2)^p - 2(m+1)^p + m^p` without cancellation.
fn second_difference(p: f64, m: f64) -> f64 {
    if m == 0.0 {
        2f64.powf(p) - 2.0
    } else {
        let u = (p * (1.0 / m).ln_1p()).exp_m1();
        let v = (p * (2.0 / m).ln_1p()).exp_m1();
        m.powf(p) * (v - 2.0 * u)
    }
}

/// Quadrature weights of the scheme for one `(α, T, steps)`; reusable across `z`.
#[derive(Debug, Clone)]
pub struct AdamsSolver {
    alpha: f64,
    horizon: f64,
    steps: usize,
    // predictor: b[m] with m = k - j
    predictor: Vec<f64>,
    // corrector: interior weights by m = k - j, starting weights by k, and the new-point weight
    corrector: Vec<f64>,
    corrector_start: Vec<f64>,
    corrector_new: f64,
    passes: usize,
}

impl AdamsSolver {
    /// `alpha ∈ (1/2, 1]`; `alpha = 1` is the classical Heston Riccati ODE.
    pub fn new(alpha: f64, horizon: f64, steps: usize) -> Result<Self> {
        check_steps(steps)?;
        if !(alpha > 0.5 && alpha <= 1.0) {
            return invalid(format!("Adams order alpha must lie in (1/2, 1], got {alpha}"));
        }
        if !(horizon > 0.0) {
            return invalid(format!("horizon must be > 0, got {horizon}"));
        }
        let dt = horizon / steps as f64;
        let pred_scale = dt.powf(alpha) / gamma(alpha + 1.0);
        let corr_scale = dt.powf(alpha) / gamma(alpha + 2.0);
        let predictor = (0..steps)
            .map(|m| pred_scale * first_difference(alpha, m as f64))
            .collect();
        let corrector = (0..steps)
            .map(|m| corr_scale * second_difference(alpha + 1.0, m as f64))
            .collect();
        let corrector_start = (0..steps)
            .map(|k| {
                let k = k as f64;
                // k^{α+1} - (k-α)(k+1)^α
                let val = if k == 0.0 {
                    alpha
                } else {
                    let kp = k.powf(alpha);
                    // k^α [k - (k-α)(1+1/k)^α]
                    let growth = (alpha * (1.0 / k).ln_1p()).exp_m1();
                    kp * (alpha - (k - alpha) * growth)
                };
                corr_scale * val
            })
            .collect();
        Ok(Self {
            alpha,
            horizon,
            steps,
            predictor,
            corrector,
            corrector_start,
            corrector_new: corr_scale,
            passes: 1,
        })
    }

    /// Number of corrector evaluations per step (1 = PECE).
    pub fn with_corrector_passes(mut self, passes: usize) -> Self {
        self.passes = passes.max(1);
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn passes(&self) -> usize {
        self.passes
    }

    /// Solves for one `z`. `params.hurst` must match the solver order.
    pub fn solve(&self, params: &ModelParams, z: Complex64) -> Result<RiccatiSolution> {
        check_strip(z)?;
        if (params.alpha() - self.alpha).abs() > 1e-15 || (params.horizon - self.horizon).abs() > 0.0 {
            return invalid("Adams solver was built for a different hurst or horizon");
        }
        let rhs = RhsCoefficients::new(z, params);
        let n = self.steps;
        let mut psi = Vec::with_capacity(n + 1);
        let mut f = Vec::with_capacity(n + 1);
        psi.push(Complex64::new(0.0, 0.0));
        f.push(rhs.eval(psi[0]));
        for k in 0..n {
            let mut pred = Complex64::new(0.0, 0.0);
            let mut corr = self.corrector_start[k] * f[0];
            for j in 0..=k {
                pred += self.predictor[k - j] * f[j];
            }
            for j in 1..=k {
                corr += self.corrector[k - j] * f[j];
            }
            let mut next = corr + self.corrector_new * rhs.eval(pred);
            for _ in 1..self.passes {
                next = corr + self.corrector_new * rhs.eval(next);
            }
            psi.push(next);
            f.push(rhs.eval(next));
        }
        Ok(RiccatiSolution {
            z,
            grid: uniform_grid(self.horizon, n),
            psi,
            factor_states: None,
        })
    }
}

/// Solves the fractional Riccati equation of order `α = H + 1/2` on `[0, T]`.
pub fn solve_fractional_riccati_adams(params: &ModelParams, z: Complex64, steps: usize) -> Result<RiccatiSolution> {
    AdamsSolver::new(params.alpha(), params.horizon, steps)?.solve(params, z)
}
