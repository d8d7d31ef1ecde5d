//! Gamma, incomplete Gamma, two-parameter Mittag-Leffler, the canonical
//! resolvent of the fractional kernel and the forward variance curve.
//!
//! Mittag-Leffler evaluation on the real line uses three regimes:
//!
//! - `|x| ≤ 1` or `x > 0`: the defining power series (for `x > 0` all terms
//!   are positive, so there is no cancellation).
//! - `x < -1` with `|x|^{1/α} < 60`: the integral representation along the
//!   degenerate Hankel contour (valid for `|arg x| = π > απ`),
//!   `E_{α,β}(-r) = (1/π) ∫₀^∞ e^{-u} u^{α-β} (u^α sin π(1-β) + r sin π(1-β+α))
//!   / (u^{2α} + 2 r u^α cos πα + r²) du` for `β < 1 + α`; larger `β` is
//!   reduced with `E_{α,β}(x) = (E_{α,β-α}(x) - 1/Γ(β-α)) / x`.
//! - `|x|^{1/α} ≥ 60`: the algebraic asymptotic expansion
//!   `-Σ_{k≥1} x^{-k} / Γ(β - αk)`, whose remainder is of order `e^{-|x|^{1/α}}`.
//!
//! `α = 1` has its own closed forms and a Kummer-transformed series with
//! positive terms.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::params::ModelParams;
use crate::quad::{integrate, Tolerance};

/// `Γ(x)` for `x > 0`.
pub fn gamma_eval(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("gamma_eval requires x > 0, got {x}"));
    }
    Ok(libm::tgamma(x))
}

/// `Γ(x)` on the whole real line (infinite at the poles).
pub(crate) fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// `1/Γ(x)`, which is entire: zero at `x = 0, -1, -2, …`.
pub fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return 0.0;
    }
    if x > 170.0 {
        return (-libm::lgamma(x)).exp();
    }
    1.0 / libm::tgamma(x)
}

/// Lower incomplete gamma `γ(a, x) = ∫₀ˣ t^{a-1} e^{-t} dt` for `a > 0`, `x ≥ 0`.
pub fn lower_incomplete_gamma(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    let log_prefactor = a * x.ln() - x;
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut n = 1.0;
        loop {
            term *= x / (a + n);
            sum += term;
            if term < sum * 1e-17 || n > 10_000.0 {
                break;
            }
            n += 1.0;
        }
        sum * log_prefactor.exp()
    } else {
        // Γ(a, x) by the modified Lentz continued fraction.
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        gamma(a) - h * log_prefactor.exp()
    }
}

/// Index pair of a two-parameter Mittag-Leffler function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MittagLefflerParams {
    pub alpha: f64,
    pub beta: f64,
}

impl MittagLefflerParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return invalid(format!("Mittag-Leffler alpha must lie in (0, 1], got {alpha}"));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return invalid(format!("Mittag-Leffler beta must be > 0, got {beta}"));
        }
        Ok(Self { alpha, beta })
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        mittag_leffler(self.alpha, self.beta, x)
    }
}

/// Largest supported `|x|`. Beyond it only the asymptotic regime would apply
/// and `x > 0` overflows long before.
pub const ML_MAX_ARG: f64 = 1e8;

/// `E_{α,β}(x) = Σ_{k≥0} x^k / Γ(αk + β)` for `α ∈ (0, 1]`, `β > 0`, `|x| ≤ 1e8`.
///
/// Negative arguments are supported on the whole range; positive arguments
/// are supported as long as the result is finite (an overflow is reported as
/// a domain error).
pub fn mittag_leffler(alpha: f64, beta: f64, x: f64) -> Result<f64> {
    MittagLefflerParams::new(alpha, beta)?;
    if !x.is_finite() || x.abs() > ML_MAX_ARG {
        return domain(format!(
            "Mittag-Leffler argument {x} outside [-{ML_MAX_ARG}, {ML_MAX_ARG}]"
        ));
    }
    let value = if alpha == 1.0 {
        ml_alpha_one(beta, x)?
    } else if x >= -1.0 {
        ml_series(alpha, beta, x)?
    } else {
        ml_negative(alpha, beta, -x)?
    };
    if !value.is_finite() {
        return domain(format!("E_({alpha},{beta})({x}) overflows"));
    }
    Ok(value)
}

/// The standard one-parameter function `E_α(x) = E_{α,1}(x)`.
pub fn mittag_leffler_std(alpha: f64, x: f64) -> Result<f64> {
    mittag_leffler(alpha, 1.0, x)
}

fn ml_series(alpha: f64, beta: f64, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(rgamma(beta));
    }
    let mut sum = 0.0;
    if x < 0.0 {
        // |x| ≤ 1: alternating with decaying magnitude.
        let mut power = 1.0;
        for k in 0..2000 {
            let term = power * rgamma(alpha * k as f64 + beta);
            sum += term;
            if k > 2 && term.abs() <= 1e-16 * sum.abs() {
                return Ok(sum);
            }
            power *= x;
        }
    } else {
        let lx = x.ln();
        let mut peaked = false;
        let mut prev = 0.0;
        for k in 0..20_000 {
            let kf = k as f64;
            let arg = alpha * kf + beta;
            let term = if arg > 0.0 {
                (kf * lx - libm::lgamma(arg)).exp()
            } else {
                x.powi(k) * rgamma(arg)
            };
            sum += term;
            if term < prev {
                peaked = true;
            }
            if !sum.is_finite() {
                return Ok(sum);
            }
            if peaked && term <= 1e-17 * sum {
                return Ok(sum);
            }
            prev = term;
        }
    }
    Err(Error::Numerical {
        what: "Mittag-Leffler series",
        detail: format!("no convergence for alpha={alpha}, beta={beta}, x={x}; partial sum {sum}"),
    })
}

/// `E_{α,β}(-r)` for `r > 1`, `α ∈ (0, 1)`.
fn ml_negative(alpha: f64, beta: f64, r: f64) -> Result<f64> {
    if r.powf(1.0 / alpha) >= 60.0 {
        if let Some(v) = ml_asymptotic(alpha, beta, -r) {
            return Ok(v);
        }
    }
    if beta >= 1.0 + alpha {
        let lower = ml_negative(alpha, beta - alpha, r)?;
        return Ok((lower - rgamma(beta - alpha)) / (-r));
    }
    ml_integral(alpha, beta, r)
}

/// Asymptotic expansion for large negative `x`; `None` when the smallest term
/// is not negligible.
///
/// `|1/Γ(β-αk)|` oscillates through the poles of Γ, so truncation is decided
/// on the smooth envelope `Γ(1+αk-β)/(π|x|^k)` from the reflection formula.
fn ml_asymptotic(alpha: f64, beta: f64, x: f64) -> Option<f64> {
    let inv = 1.0 / x;
    let log_r = x.abs().ln();
    let mut power = 1.0;
    let mut sum = 0.0;
    let mut prev_envelope = f64::INFINITY;
    for k in 1..2000 {
        let kf = k as f64;
        power *= inv;
        let envelope_arg = 1.0 + alpha * kf - beta;
        let log_envelope = if envelope_arg > 0.0 {
            libm::lgamma(envelope_arg) - kf * log_r
        } else {
            -kf * log_r
        };
        let envelope = log_envelope.exp();
        if envelope > prev_envelope && k > 2 {
            break;
        }
        sum -= power * rgamma(beta - alpha * kf);
        if envelope <= 1e-17 * sum.abs() {
            return Some(sum);
        }
        prev_envelope = envelope;
    }
    if prev_envelope <= 1e-14 * sum.abs() {
        Some(sum)
    } else {
        None
    }
}

fn ml_integral(alpha: f64, beta: f64, r: f64) -> Result<f64> {
    debug_assert!(beta < 1.0 + alpha);
    let s1 = (PI * (1.0 - beta)).sin();
    let s2 = (PI * (1.0 - beta + alpha)).sin();
    let c = (PI * alpha).cos();
    let core = move |u: f64| {
        let ua = u.powf(alpha);
        (-u).exp() * (ua * s1 + r * s2) / (ua * ua + 2.0 * r * c * ua + r * r)
    };
    let tol = Tolerance {
        abs: 1e-300,
        rel: 1e-14,
        max_segments: 4000,
    };
    // On [0, 1] substitute u = v^m with m(1 + α - β) = 1, which absorbs u^{α-β}.
    let m = 1.0 / (1.0 + alpha - beta);
    let head = integrate(|v: f64| m * core(v.powf(m)), 0.0, 1.0, tol)?.value;
    let peak = r.powf(1.0 / alpha);
    let mut breaks = vec![1.0];
    if peak > 1.0 && peak < 80.0 {
        breaks.push(peak);
    }
    breaks.push(80.0);
    let mut tail = 0.0;
    for w in breaks.windows(2) {
        tail += integrate(|u: f64| u.powf(alpha - beta) * core(u), w[0], w[1], tol)?.value;
    }
    Ok((head + tail) / PI)
}

fn ml_alpha_one(beta: f64, x: f64) -> Result<f64> {
    if beta == 1.0 {
        return Ok(x.exp());
    }
    if beta == 2.0 {
        return Ok(if x == 0.0 { 1.0 } else { x.exp_m1() / x });
    }
    if x >= -1.0 {
        return ml_series(1.0, beta, x);
    }
    if x >= -40.0 {
        // Kummer: M(1, β, x) = e^x M(β-1, β, -x), and (β-1)_k/(β)_k = (β-1)/(β-1+k).
        let y = -x;
        let mut t = 1.0;
        let mut sum = 1.0;
        for k in 1..2000 {
            let kf = k as f64;
            t *= y / kf;
            let term = t * (beta - 1.0) / (beta - 1.0 + kf);
            sum += term;
            if kf > y && term.abs() <= 1e-17 * sum.abs() {
                return Ok(x.exp() * rgamma(beta) * sum);
            }
        }
        return Err(Error::Numerical {
            what: "Mittag-Leffler Kummer series",
            detail: format!("no convergence for beta={beta}, x={x}"),
        });
    }
    ml_asymptotic(1.0, beta, x).ok_or_else(|| Error::Numerical {
        what: "Mittag-Leffler asymptotic expansion",
        detail: format!("insufficient accuracy for alpha=1, beta={beta}, x={x}"),
    })
}

/// Canonical resolvent of the fractional kernel with parameter `λ`:
/// `t^{α-1} E_{α,α}(-λ t^α)`, for `α ∈ (1/2, 1]`, `λ ≥ 0`, `t > 0`.
pub fn frac_resolvent(alpha: f64, lambda: f64, t: f64) -> Result<f64> {
    check_resolvent_args(alpha, lambda)?;
    if !(t > 0.0) {
        return domain(format!("frac_resolvent requires t > 0, got {t}"));
    }
    Ok(t.powf(alpha - 1.0) * mittag_leffler(alpha, alpha, -lambda * t.powf(alpha))?)
}

/// `∫₀ᵗ frac_resolvent(α, λ, s) ds = t^α E_{α,α+1}(-λ t^α)` for `t ≥ 0`.
pub fn frac_resolvent_integral(alpha: f64, lambda: f64, t: f64) -> Result<f64> {
    check_resolvent_args(alpha, lambda)?;
    if t < 0.0 {
        return domain(format!("resolvent integral requires t >= 0, got {t}"));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let ta = t.powf(alpha);
    Ok(ta * mittag_leffler(alpha, alpha + 1.0, -lambda * ta)?)
}

fn check_resolvent_args(alpha: f64, lambda: f64) -> Result<()> {
    if !(alpha > 0.5 && alpha <= 1.0) {
        return domain(format!("resolvent order alpha must lie in (1/2, 1], got {alpha}"));
    }
    if !(lambda >= 0.0) {
        return domain(format!("resolvent parameter lambda must be >= 0, got {lambda}"));
    }
    Ok(())
}

/// Forward variance `E[V_t] = V₀ E_α(-λt^α) + ∫₀ᵗ E_λ(t-s) θ(s) ds` with
/// `α = H + 1/2` and `E_α = E_{α,1}`.
///
/// This solves `E[V_t] = V₀ + ∫₀ᵗ K(t-s)(θ(s) - λE[V_s]) ds`; the `V₀` term
/// decays through `1 - λ∫₀ᵗ E_λ = E_α(-λt^α)`. Each constant piece of θ
/// integrates the resolvent in closed form through `∫₀ᵘ E_λ = u^α E_{α,α+1}(-λ u^α)`.
pub fn forward_variance(params: &ModelParams, t: f64) -> Result<f64> {
    params.validate()?;
    if !(0.0..=params.horizon).contains(&t) {
        return domain(format!("forward_variance: t = {t} outside [0, {}]", params.horizon));
    }
    let alpha = params.alpha();
    let mut failure = None;
    let integral = params.theta.convolve_with(
        |u| {
            frac_resolvent_integral(alpha, params.lambda, u).unwrap_or_else(|e| {
                failure = Some(e);
                f64::NAN
            })
        },
        t,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let start = params.v0 * mittag_leffler(alpha, 1.0, -params.lambda * t.powf(alpha))?;
    Ok(start + integral)
}

/// `∫₀ᵗ E[V_s] ds`, the expected integrated variance.
pub fn integrated_forward_variance(params: &ModelParams, t: f64) -> Result<f64> {
    params.validate()?;
    if !(0.0..=params.horizon).contains(&t) {
        return domain(format!("integrated variance: t = {t} outside [0, {}]", params.horizon));
    }
    // ∫₀ᵘ u'^α E_{α,α+1}(-λ u'^α) du' = u^{α+1} E_{α,α+2}(-λ u^α)
    let alpha = params.alpha();
    let lambda = params.lambda;
    let mut failure = None;
    let prim2 = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let ua = u.powf(alpha);
        match mittag_leffler(alpha, alpha + 2.0, -lambda * ua) {
            Ok(v) => u * ua * v,
            Err(e) => {
                failure = Some(e);
                f64::NAN
            }
        }
    };
    let integral = params.theta.convolve_with(prim2, t);
    if let Some(e) = failure {
        return Err(e);
    }
    // ∫₀ᵗ E_α(-λs^α) ds = t E_{α,2}(-λ t^α)
    let start = params.v0 * t * mittag_leffler(alpha, 2.0, -lambda * t.powf(alpha))?;
    Ok(start + integral)
}
