//! Call prices by Lewis Fourier inversion, Black-Scholes, implied volatility
//! and smiles.
//!
//! With zero rates, `C(k, T) = S₀ - S₀e^{k/2}/π ∫₀^∞ Re(e^{-ibk} L(½+ib)) / (b² + ¼) db`
//! where `L(z) = E[exp(z log(S_T/S₀))]` and `k` is the log-moneyness.

mod report;

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::VolKernel;
use crate::params::ModelParams;
use crate::riccati::{CharFnEngine, CharFnForm};

pub use report::{riccati_error_report, ErrorReport, ErrorRow};

/// Characteristic function of `log(S_T/S₀)` on the line `Re z = ½`.
pub trait CharacteristicFunction: Sync {
    fn eval(&self, z: Complex64) -> Result<Complex64>;

    fn eval_batch(&self, zs: &[Complex64]) -> Result<Vec<Complex64>> {
        zs.par_iter().map(|z| self.eval(*z)).collect()
    }
}

impl CharacteristicFunction for CharFnEngine {
    fn eval(&self, z: Complex64) -> Result<Complex64> {
        CharFnEngine::eval(self, z)
    }
}

/// Log-normal characteristic function `exp(½(z²-z)w)` for total variance `w`.
#[derive(Debug, Clone, Copy)]
pub struct LognormalCharFn {
    pub total_variance: f64,
}

impl CharacteristicFunction for LognormalCharFn {
    fn eval(&self, z: Complex64) -> Result<Complex64> {
        Ok((0.5 * (z * z - z) * self.total_variance).exp())
    }
}

/// Truncation and discretization of the inversion integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegrationConfig {
    /// Initial truncation point of the `b` half-line.
    pub b_max: f64,
    /// Trapezoid intervals on `[0, b_max]`; the spacing is kept when `b_max` doubles.
    pub n_b: usize,
    /// Largest allowed share of the integral coming from the last tenth of `[0, b_max]`.
    pub tail_tol: f64,
    pub max_doublings: usize,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            b_max: 200.0,
            n_b: 2000,
            tail_tol: 1e-10,
            max_doublings: 6,
        }
    }
}

impl IntegrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.b_max > 0.0 && self.b_max.is_finite()) {
            return invalid(format!("b_max must be > 0, got {}", self.b_max));
        }
        if self.n_b < 10 {
            return invalid(format!("n_b must be >= 10, got {}", self.n_b));
        }
        if !(self.tail_tol > 0.0) {
            return invalid("tail_tol must be > 0");
        }
        Ok(())
    }
}

fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Zero-rate Black-Scholes call at strike `S₀e^k` with total volatility `σ√T`.
pub fn bs_call_price(s0: f64, k: f64, total_vol: f64) -> f64 {
    let intrinsic = (s0 - s0 * k.exp()).max(0.0);
    if total_vol <= 0.0 {
        return intrinsic;
    }
    if total_vol.is_infinite() {
        return s0;
    }
    let d1 = -k / total_vol + 0.5 * total_vol;
    let d2 = d1 - total_vol;
    let price = s0 * (norm_cdf(d1) - k.exp() * norm_cdf(d2));
    price.clamp(intrinsic, s0)
}

/// Volatility `σ` with `bs_call_price(s0, k, σ√T) = price`.
///
/// Bisection on the total volatility to `1e-10`, then Newton steps.
pub fn implied_vol(price: f64, s0: f64, k: f64, maturity: f64) -> Result<f64> {
    if !(s0 > 0.0 && maturity > 0.0) {
        return invalid("implied_vol requires s0 > 0 and maturity > 0");
    }
    let intrinsic = (s0 - s0 * k.exp()).max(0.0);
    if !(price > intrinsic) {
        return Err(Error::BelowIntrinsic { price, intrinsic });
    }
    if !(price < s0) {
        return Err(Error::AboveSpot { price, spot: s0 });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while bs_call_price(s0, k, hi) < price {
        hi *= 2.0;
        if hi > 1e3 {
            break;
        }
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if bs_call_price(s0, k, mid) < price {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut v = 0.5 * (lo + hi);
    for _ in 0..3 {
        let d1 = -k / v + 0.5 * v;
        let vega = s0 * norm_pdf(d1);
        if vega < 1e-300 {
            break;
        }
        let step = (bs_call_price(s0, k, v) - price) / vega;
        let next = v - step;
        if !(next > lo - 1e-9 && next < hi + 1e-9) {
            break;
        }
        v = next;
    }
    Ok(v / maturity.sqrt())
}

/// Characteristic function values on the trapezoid nodes of `b`, extended
/// lazily when the truncation point doubles.
#[derive(Debug, Clone)]
pub struct FourierGrid {
    spacing: f64,
    values: Vec<Complex64>,
    b_max: f64,
}

impl FourierGrid {
    pub fn build<C: CharacteristicFunction + ?Sized>(cf: &C, config: &IntegrationConfig) -> Result<Self> {
        config.validate()?;
        let spacing = config.b_max / config.n_b as f64;
        let mut grid = Self {
            spacing,
            values: Vec::new(),
            b_max: 0.0,
        };
        grid.extend_to(cf, config.n_b)?;
        Ok(grid)
    }

    fn extend_to<C: CharacteristicFunction + ?Sized>(&mut self, cf: &C, intervals: usize) -> Result<()> {
        let have = self.values.len();
        if intervals < have {
            return Ok(());
        }
        let zs: Vec<Complex64> = (have..=intervals)
            .map(|j| Complex64::new(0.5, j as f64 * self.spacing))
            .collect();
        self.values.extend(cf.eval_batch(&zs)?);
        self.b_max = intervals as f64 * self.spacing;
        Ok(())
    }

    pub fn b_max(&self) -> f64 {
        self.b_max
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(j, v)| (j as f64 * self.spacing, *v))
    }

    fn integrand(&self, j: usize, k: f64) -> f64 {
        let b = j as f64 * self.spacing;
        let phase = Complex64::new(0.0, -b * k).exp();
        (phase * self.values[j]).re / (b * b + 0.25)
    }

    // trapezoid on [0, intervals·h], plus the share from the last tenth
    fn integrate(&self, k: f64, intervals: usize) -> (f64, f64) {
        let h = self.spacing;
        let tail_start = intervals - intervals / 10;
        let mut total = 0.0;
        let mut tail = 0.0;
        for j in 0..=intervals {
            let w = if j == 0 || j == intervals { 0.5 * h } else { h };
            let v = w * self.integrand(j, k);
            total += v;
            if j >= tail_start {
                tail += v;
            }
        }
        (total, tail)
    }
}

fn invert<C: CharacteristicFunction + ?Sized>(
    cf: &C,
    grid: &mut FourierGrid,
    k: f64,
    config: &IntegrationConfig,
) -> Result<f64> {
    let mut intervals = config.n_b;
    let mut last = (0.0, 0.0);
    for _ in 0..=config.max_doublings {
        grid.extend_to(cf, intervals)?;
        let (total, tail) = grid.integrate(k, intervals);
        if !total.is_finite() {
            return Err(Error::Numerical {
                what: "Fourier inversion",
                detail: format!("non-finite integral at k = {k}"),
            });
        }
        if tail.abs() <= config.tail_tol * total.abs() {
            return Ok(total);
        }
        last = (total, tail);
        intervals *= 2;
    }
    Err(Error::Numerical {
        what: "Fourier inversion",
        detail: format!(
            "tail share {:.3e} of integral {:.6e} above {:.1e} at k = {k} with b_max = {}",
            (last.1 / last.0).abs(),
            last.0,
            config.tail_tol,
            (intervals / 2) as f64 * grid.spacing
        ),
    })
}

fn price_from_integral(s0: f64, k: f64, integral: f64) -> f64 {
    s0 - s0 * (0.5 * k).exp() / PI * integral
}

/// Lewis call price for log-moneyness `k`.
pub fn lewis_call_price<C: CharacteristicFunction + ?Sized>(
    cf: &C,
    k: f64,
    s0: f64,
    config: &IntegrationConfig,
) -> Result<f64> {
    let mut grid = FourierGrid::build(cf, config)?;
    Ok(price_from_integral(s0, k, invert(cf, &mut grid, k, config)?))
}

/// Lewis prices for many strikes sharing one characteristic function grid.
pub fn lewis_call_prices<C: CharacteristicFunction + ?Sized>(
    cf: &C,
    ks: &[f64],
    s0: f64,
    config: &IntegrationConfig,
) -> Result<Vec<f64>> {
    let mut grid = FourierGrid::build(cf, config)?;
    ks.iter()
        .map(|&k| Ok(price_from_integral(s0, k, invert(cf, &mut grid, k, config)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmilePoint {
    pub k: f64,
    pub price: f64,
    /// `None` when the price falls outside the open no-arbitrage interval.
    pub iv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Smile {
    pub maturity: f64,
    pub points: Vec<SmilePoint>,
}

impl Smile {
    /// Writes `k,price,iv` rows; a missing volatility is an empty field.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "price", "iv"])?;
        for p in &self.points {
            let iv = p.iv.map(|v| v.to_string()).unwrap_or_default();
            w.write_record([p.k.to_string(), p.price.to_string(), iv])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn iv_at(&self, k: f64) -> Option<f64> {
        self.points.iter().find(|p| p.k == k).and_then(|p| p.iv)
    }
}

/// Implied volatility smile of the model with `kernel` at `maturity`.
pub fn smile(
    params: &ModelParams,
    kernel: &VolKernel,
    k_grid: &[f64],
    maturity: f64,
    steps: usize,
    integration: &IntegrationConfig,
) -> Result<Smile> {
    let p = params.with_horizon(maturity);
    let engine = CharFnEngine::new(&p, kernel, steps, CharFnForm::FForm)?;
    smile_from(&engine, p.s0, k_grid, maturity, integration)
}

/// Smile from any characteristic function of `log(S_T/S₀)`.
pub fn smile_from<C: CharacteristicFunction + ?Sized>(
    cf: &C,
    s0: f64,
    k_grid: &[f64],
    maturity: f64,
    integration: &IntegrationConfig,
) -> Result<Smile> {
    if k_grid.iter().any(|k| !k.is_finite()) {
        return invalid("log-moneyness grid must be finite");
    }
    let prices = lewis_call_prices(cf, k_grid, s0, integration)?;
    let points = k_grid
        .iter()
        .zip(prices)
        .map(|(&k, price)| SmilePoint {
            k,
            price,
            iv: implied_vol(price, s0, k, maturity).ok(),
        })
        .collect();
    Ok(Smile { maturity, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bs_limits() {
        assert!((bs_call_price(1.0, -0.2, 0.0) - (1.0 - (-0.2f64).exp())).abs() < 1e-16);
        assert_eq!(bs_call_price(1.0, 0.2, 0.0), 0.0);
        assert!((bs_call_price(1.0, 0.0, 60.0) - 1.0).abs() < 1e-12);
        assert_eq!(bs_call_price(2.0, 0.3, f64::INFINITY), 2.0);
        // ATM: S₀(2N(v/2) - 1)
        let v = 0.2;
        assert!((bs_call_price(1.0, 0.0, v) - (2.0 * norm_cdf(v / 2.0) - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn implied_vol_roundtrip() {
        for k in [-1.0, -0.5, 0.0, 0.3, 1.0] {
            for sigma in [0.05, 0.2, 0.5, 1.0] {
                for t in [0.25, 1.0] {
                    let price = bs_call_price(1.0, k, sigma * f64::sqrt(t));
                    let time_value = price - (1.0 - k.exp()).max(0.0);
                    if time_value <= 0.0 {
                        // deep in the money and low vol: price rounds to intrinsic
                        assert!(implied_vol(price, 1.0, k, t).is_err());
                        continue;
                    }
                    let iv = implied_vol(price, 1.0, k, t).unwrap();
                    let back = bs_call_price(1.0, k, iv * f64::sqrt(t));
                    assert!((back - price).abs() < 1e-8, "k={k} σ={sigma}");
                    if time_value > 1e-10 {
                        assert!((iv - sigma).abs() < 1e-6, "k={k} σ={sigma}: {iv}");
                    }
                }
            }
        }
    }

    #[test]
    fn implied_vol_boundaries() {
        let intrinsic = 1.0 - (-0.1f64).exp();
        assert!(matches!(
            implied_vol(intrinsic, 1.0, -0.1, 1.0),
            Err(Error::BelowIntrinsic { .. })
        ));
        assert!(matches!(implied_vol(1.0, 1.0, 0.0, 1.0), Err(Error::AboveSpot { .. })));
        assert!(matches!(
            implied_vol(0.0, 1.0, 0.2, 1.0),
            Err(Error::BelowIntrinsic { .. })
        ));
    }

    #[test]
    fn lewis_reproduces_black_scholes() {
        let cf = LognormalCharFn { total_variance: 0.04 };
        let cfg = IntegrationConfig::default();
        for k in [-0.4, -0.1, 0.0, 0.2, 0.5] {
            let got = lewis_call_price(&cf, k, 1.0, &cfg).unwrap();
            let want = bs_call_price(1.0, k, 0.2);
            assert!((got - want).abs() < 1e-10, "k={k}: {got} vs {want}");
        }
    }

    #[test]
    fn truncation_doubles_for_slow_decay() {
        // total variance 1e-4: the integrand decays only like e^{-b²w/2}/b²
        let cf = LognormalCharFn { total_variance: 1e-4 };
        let cfg = IntegrationConfig {
            b_max: 50.0,
            n_b: 500,
            ..Default::default()
        };
        let mut grid = FourierGrid::build(&cf, &cfg).unwrap();
        let integral = invert(&cf, &mut grid, 0.0, &cfg).unwrap();
        assert!(grid.b_max() > 50.0);
        let price = price_from_integral(1.0, 0.0, integral);
        assert!((price - bs_call_price(1.0, 0.0, 0.01)).abs() < 1e-9);
    }

    #[test]
    fn truncation_failure_reports_diagnostics() {
        let cf = LognormalCharFn { total_variance: 1e-8 };
        let cfg = IntegrationConfig {
            b_max: 10.0,
            n_b: 100,
            max_doublings: 1,
            ..Default::default()
        };
        let err = lewis_call_price(&cf, 0.0, 1.0, &cfg).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("tail share") && msg.contains("b_max"), "{msg}");
    }

    #[test]
    fn smile_csv_layout() {
        let cf = LognormalCharFn { total_variance: 0.04 };
        let s = smile_from(&cf, 1.0, &[-0.1, 0.0, 0.1], 1.0, &IntegrationConfig::default()).unwrap();
        for p in &s.points {
            assert!((p.iv.unwrap() - 0.2).abs() < 1e-8);
        }
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,price,iv\n-0.1,"));
        assert_eq!(text.lines().count(), 4);
    }
}
