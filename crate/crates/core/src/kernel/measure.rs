//! The Laplace measure of the fractional kernel, partition-based weights and
//! mean reversions, and the analytic L¹/L² error bounds.

use crate::error::{domain, invalid, Result};
use crate::quad::gauss_legendre_16;
use crate::special::gamma;

use super::{check_hurst, MultiFactorKernel, Partition};

fn mu_norm(hurst: f64) -> f64 {
    gamma(hurst + 0.5) * gamma(0.5 - hurst)
}

/// Density of `μ(dγ) = γ^{-H-1/2} / (Γ(H+1/2)Γ(1/2-H)) dγ`.
pub fn mu_density(hurst: f64, gamma_: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if !(gamma_ > 0.0) {
        return domain(format!("mu_density requires gamma > 0, got {gamma_}"));
    }
    Ok(gamma_.powf(-hurst - 0.5) / mu_norm(hurst))
}

/// `∫ₐᵇ γ^{p-1} dγ = (b^p - a^p)/p`, accurate for narrow cells.
fn power_integral(p: f64, a: f64, b: f64) -> f64 {
    if a == 0.0 {
        b.powf(p) / p
    } else {
        a.powf(p) * (p * (b / a).ln()).exp_m1() / p
    }
}

/// Moments of μ restricted to one cell `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMoments {
    /// `∫ μ(dγ)`, the factor weight.
    pub mass: f64,
    /// `∫ γ μ(dγ) / mass`, the factor mean reversion.
    pub mean: f64,
    /// `∫ (γ - mean)² μ(dγ)`.
    pub spread: f64,
}

/// Cell moments from the closed-form power antiderivatives. For cells with
/// `b ≤ 1.5a` the centered second moment is taken by 16-point Gauss-Legendre
/// instead, since `M₂ - M₁²/M₀` cancels there.
pub fn cell_moments(hurst: f64, a: f64, b: f64) -> CellMoments {
    let z = mu_norm(hurst);
    let p = 0.5 - hurst;
    let m0 = power_integral(p, a, b) / z;
    let m1 = power_integral(p + 1.0, a, b) / z;
    let mean = m1 / m0;
    let spread = if a == 0.0 || b > 1.5 * a {
        let m2 = power_integral(p + 2.0, a, b) / z;
        (m2 - m1 * mean).max(0.0)
    } else {
        let beta = hurst + 0.5;
        gauss_legendre_16(|g| (g - mean).powi(2) * g.powf(-beta), a, b) / z
    };
    CellMoments { mass: m0, mean, spread }
}

/// Weights `cᵢ = μ([ηᵢ₋₁, ηᵢ])` and rates `γᵢ = ∫ γ μ(dγ) / cᵢ` over each cell.
pub fn weights_from_partition(hurst: f64, partition: &Partition) -> Result<MultiFactorKernel> {
    check_hurst(hurst)?;
    let (weights, rates): (Vec<f64>, Vec<f64>) = partition
        .cells()
        .map(|(a, b)| {
            let m = cell_moments(hurst, a, b);
            (m.mass, m.mean)
        })
        .unzip();
    MultiFactorKernel::new(weights, rates, Some(hurst))
}

/// `[0, step, 2·step, …, n·step]`.
pub fn uniform_partition(n: usize, step: f64) -> Result<Partition> {
    if n < 1 {
        return invalid("uniform_partition requires n >= 1");
    }
    if !(step > 0.0 && step.is_finite()) {
        return invalid(format!("uniform_partition requires step > 0, got {step}"));
    }
    Partition::new((0..=n).map(|i| i as f64 * step).collect())
}

/// Step `πₙ = n^{-1/5}/T · (√10 (1-2H)/(5-2H))^{2/5}` minimizing the L² bound
/// of the uniform partition.
pub fn optimal_step(n: usize, horizon: f64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if n < 1 {
        return invalid("optimal_step requires n >= 1");
    }
    if !(horizon > 0.0) {
        return invalid(format!("optimal_step requires horizon > 0, got {horizon}"));
    }
    let ratio = 10f64.sqrt() * (1.0 - 2.0 * hurst) / (5.0 - 2.0 * hurst);
    Ok((n as f64).powf(-0.2) / horizon * ratio.powf(0.4))
}

pub(crate) fn total_spread(hurst: f64, etas: &[f64]) -> f64 {
    etas.windows(2).map(|w| cell_moments(hurst, w[0], w[1]).spread).sum()
}

/// Coefficients `(A, B, p)` of a bound `A Σ spreadᵢ + B ηₙ^{-p}`.
pub(crate) fn bound_coefficients(objective: super::Objective, hurst: f64, horizon: f64) -> (f64, f64, f64) {
    match objective {
        super::Objective::F2 => (
            horizon.powf(2.5) / (2.0 * 5f64.sqrt()),
            1.0 / (hurst * mu_norm(hurst) * 2f64.sqrt()),
            hurst,
        ),
        super::Objective::F1 => (
            horizon.powi(3) / 6.0,
            1.0 / (gamma(hurst + 1.5) * gamma(0.5 - hurst)),
            hurst + 0.5,
        ),
    }
}

fn bound(objective: super::Objective, hurst: f64, horizon: f64, partition: &Partition) -> Result<f64> {
    check_hurst(hurst)?;
    if !(horizon > 0.0) {
        return invalid(format!("horizon must be > 0, got {horizon}"));
    }
    let (a, b, p) = bound_coefficients(objective, hurst, horizon);
    Ok(a * total_spread(hurst, partition.etas()) + b * partition.last().powf(-p))
}

/// Upper bound `f⁽²⁾` of `‖Kⁿ - K‖_{L²[0,T]}` for the kernel built from `partition`.
pub fn f2_bound(hurst: f64, horizon: f64, partition: &Partition) -> Result<f64> {
    bound(super::Objective::F2, hurst, horizon, partition)
}

/// Upper bound `f⁽¹⁾` of `∫₀ᵀ |Kⁿ - K|` for the kernel built from `partition`.
pub fn f1_bound(hurst: f64, horizon: f64, partition: &Partition) -> Result<f64> {
    bound(super::Objective::F1, hurst, horizon, partition)
}

/// Bound value and gradient with respect to `η₁, …, ηₙ`.
///
/// `∂/∂b ∫ₐᵇ (γ-γ̄)² μ = μ(b)(b-γ̄)²` and `∂/∂a = -μ(a)(a-γ̄)²`; the
/// dependence through `γ̄` vanishes because γ̄ is the cell mean.
pub(crate) fn bound_with_gradient(
    objective: super::Objective,
    hurst: f64,
    horizon: f64,
    etas: &[f64],
) -> (f64, Vec<f64>) {
    let (ca, cb, p) = bound_coefficients(objective, hurst, horizon);
    let z = mu_norm(hurst);
    let beta = hurst + 0.5;
    let n = etas.len() - 1;
    let mut grad = vec![0.0; n];
    let mut spread = 0.0;
    for i in 1..=n {
        let (a, b) = (etas[i - 1], etas[i]);
        let m = cell_moments(hurst, a, b);
        spread += m.spread;
        grad[i - 1] += ca * b.powf(-beta) / z * (b - m.mean).powi(2);
        if i >= 2 {
            grad[i - 2] -= ca * a.powf(-beta) / z * (a - m.mean).powi(2);
        }
    }
    let last = etas[n];
    grad[n - 1] += -p * cb * last.powf(-p - 1.0);
    (ca * spread + cb * last.powf(-p), grad)
}
