//! Path simulation of the multi-factor model and of the rough Volterra
//! equation, with Monte Carlo call prices.
//!
//! Every path (or antithetic pair) draws from its own ChaCha stream
//! `(seed, index)`, so results do not depend on the thread count.

mod stats;

use std::io::Write;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernel::{phi1, FractionalKernel, MultiFactorKernel, VolKernel};
use crate::params::ModelParams;
use crate::riccati::{g_curve, GVariant};
use crate::special::gamma;

pub use stats::{ks_critical_value, ks_statistic};

/// Largest step count accepted by the `O(steps²)` Volterra scheme.
pub const MAX_VOLTERRA_STEPS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationScheme {
    #[default]
    Multifactor,
    VolterraOracle,
}

impl SimulationScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            SimulationScheme::Multifactor => "multifactor",
            SimulationScheme::VolterraOracle => "volterra_oracle",
        }
    }
}

impl std::str::FromStr for SimulationScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multifactor" => Ok(SimulationScheme::Multifactor),
            "volterra_oracle" | "volterra" => Ok(SimulationScheme::VolterraOracle),
            other => Err(Error::Config(format!("unknown simulation scheme {other:?}"))),
        }
    }
}

/// Where the variance is floored at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// `V⁺` in drift, diffusion and spot.
    #[default]
    Full,
    /// Raw `V` in the mean-reversion drift, `V⁺` elsewhere; keeps `E[V]` on
    /// the deterministic recursion.
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub n_paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub scheme: SimulationScheme,
    pub truncation: Truncation,
    /// Pairs paths `(2p, 2p+1)` on opposite normal draws.
    pub antithetic: bool,
    /// Number of leading paths whose states are recorded.
    pub snapshot_paths: usize,
    /// Record every `snapshot_stride`-th grid node (and the last one).
    pub snapshot_stride: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            steps: 200,
            seed: 42,
            scheme: SimulationScheme::Multifactor,
            truncation: Truncation::Full,
            antithetic: false,
            snapshot_paths: 0,
            snapshot_stride: 10,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1 {
            return Err(Error::Config("n_paths must be >= 1".into()));
        }
        if self.steps < 1 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if self.snapshot_stride < 1 {
            return Err(Error::Config("snapshot_stride must be >= 1".into()));
        }
        if self.scheme == SimulationScheme::VolterraOracle && self.steps > MAX_VOLTERRA_STEPS {
            return Err(Error::Config(format!(
                "the Volterra scheme costs O(steps²) per path; steps must be <= {MAX_VOLTERRA_STEPS}, got {}",
                self.steps
            )));
        }
        Ok(())
    }
}

/// State of one recorded path at one grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub path: usize,
    pub t: f64,
    pub spot: f64,
    pub variance: f64,
    /// Factor states `V^{n,i}`; empty for the Volterra scheme.
    pub factors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub terminal_spots: Vec<f64>,
    /// Trapezoidal `∫₀ᵀ V_t dt` per path.
    pub realized_variance: Vec<f64>,
    pub terminal_variance: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    /// Share of path steps that started from a negative variance.
    pub negative_fraction: f64,
    pub antithetic: bool,
}

impl SimulationResult {
    /// Writes `path,terminal_spot,realized_variance` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["path", "terminal_spot", "realized_variance"])?;
        for (i, (s, rv)) in self.terminal_spots.iter().zip(&self.realized_variance).enumerate() {
            w.write_record([i.to_string(), s.to_string(), rv.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `path,t,spot,variance,factor_0,…` rows for the recorded paths.
    pub fn write_snapshots_csv<W: Write>(&self, out: W) -> Result<()> {
        let width = self.snapshots.iter().map(|s| s.factors.len()).max().unwrap_or(0);
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["path".to_string(), "t".into(), "spot".into(), "variance".into()];
        header.extend((0..width).map(|i| format!("factor_{i}")));
        w.write_record(&header)?;
        for s in &self.snapshots {
            let mut row = vec![
                s.path.to_string(),
                s.t.to_string(),
                s.spot.to_string(),
                s.variance.to_string(),
            ];
            row.extend(s.factors.iter().map(|f| f.to_string()));
            row.resize(header.len(), String::new());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Sample mean and standard error of a per-path statistic; antithetic
    /// pairs are averaged first.
    pub fn mean_and_error(&self, values: &[f64]) -> Result<(f64, f64)> {
        if values.is_empty() {
            return domain("no simulated paths");
        }
        let samples: Vec<f64> = if self.antithetic {
            values
                .chunks(2)
                .map(|c| c.iter().sum::<f64>() / c.len() as f64)
                .collect()
        } else {
            values.to_vec()
        };
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        if samples.len() < 2 {
            return Ok((mean, 0.0));
        }
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok((mean, (var / n).sqrt()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McPrice {
    pub price: f64,
    pub std_error: f64,
}

/// Sample mean and standard error of `(S_T - S₀e^k)⁺`.
pub fn mc_call_price(result: &SimulationResult, k: f64, s0: f64) -> Result<McPrice> {
    if result.terminal_spots.is_empty() {
        return domain("mc_call_price needs at least one simulated path");
    }
    let strike = s0 * k.exp();
    let payoffs: Vec<f64> = result.terminal_spots.iter().map(|s| (s - strike).max(0.0)).collect();
    let (price, std_error) = result.mean_and_error(&payoffs)?;
    Ok(McPrice { price, std_error })
}

/// Coefficients shared by all paths.
struct Grid {
    dt: f64,
    sqrt_dt: f64,
    times: Vec<f64>,
    g: Vec<f64>,
    rho: f64,
    rho_bar: f64,
    lambda: f64,
    nu: f64,
    log_s0: f64,
    truncation: Truncation,
}

impl Grid {
    fn new(params: &ModelParams, kernel: &VolKernel, steps: usize, truncation: Truncation) -> Result<Self> {
        let dt = params.horizon / steps as f64;
        let times: Vec<f64> = (0..=steps)
            .map(|j| if j == steps { params.horizon } else { j as f64 * dt })
            .collect();
        let g = times
            .iter()
            .map(|t| g_curve(params, kernel, GVariant::Standard, *t))
            .collect::<Result<_>>()?;
        Ok(Self {
            dt,
            sqrt_dt: dt.sqrt(),
            times,
            g,
            rho: params.rho,
            rho_bar: (1.0 - params.rho * params.rho).sqrt(),
            lambda: params.lambda,
            nu: params.nu,
            log_s0: params.s0.ln(),
            truncation,
        })
    }

    fn steps(&self) -> usize {
        self.times.len() - 1
    }

    fn drift_variance(&self, v: f64) -> f64 {
        match self.truncation {
            Truncation::Full => v.max(0.0),
            Truncation::Partial => v,
        }
    }
}

/// Normal pairs `(ξ_W, ξ_⊥)` for one path; the antithetic partner flips signs.
struct Draws {
    rng: ChaCha8Rng,
    sign: f64,
}

impl Draws {
    fn new(seed: u64, stream: u64, sign: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, sign }
    }

    fn next(&mut self) -> (f64, f64) {
        let w: f64 = self.rng.sample(StandardNormal);
        let p: f64 = self.rng.sample(StandardNormal);
        (self.sign * w, self.sign * p)
    }
}

struct PathOutcome {
    spot: f64,
    realized: f64,
    variance: f64,
    negative_steps: usize,
    snapshots: Vec<Snapshot>,
}

struct Recorder {
    path: usize,
    stride: usize,
    active: bool,
    out: Vec<Snapshot>,
}

impl Recorder {
    fn record(&mut self, j: usize, last: usize, t: f64, log_s: f64, v: f64, factors: &[f64]) {
        if self.active && (j.is_multiple_of(self.stride) || j == last) {
            self.out.push(Snapshot {
                path: self.path,
                t,
                spot: log_s.exp(),
                variance: v,
                factors: factors.to_vec(),
            });
        }
    }
}

fn run_paths<F>(config: &SimulationConfig, path: F) -> SimulationResult
where
    F: Fn(&mut Draws, &mut Recorder) -> PathOutcome + Sync,
{
    let n = config.n_paths;
    let one = |index: usize, stream: usize, sign: f64| {
        let mut draws = Draws::new(config.seed, stream as u64, sign);
        let mut rec = Recorder {
            path: index,
            stride: config.snapshot_stride,
            active: index < config.snapshot_paths,
            out: Vec::new(),
        };
        path(&mut draws, &mut rec)
    };
    let outcomes: Vec<PathOutcome> = (0..n)
        .into_par_iter()
        .map(|i| {
            if config.antithetic {
                one(i, i / 2, if i % 2 == 0 { 1.0 } else { -1.0 })
            } else {
                one(i, i, 1.0)
            }
        })
        .collect();
    let steps = config.steps;
    let negative: usize = outcomes.iter().map(|o| o.negative_steps).sum();
    let mut result = SimulationResult {
        terminal_spots: Vec::with_capacity(n),
        realized_variance: Vec::with_capacity(n),
        terminal_variance: Vec::with_capacity(n),
        snapshots: Vec::new(),
        negative_fraction: negative as f64 / (n * steps) as f64,
        antithetic: config.antithetic,
    };
    for o in outcomes {
        result.terminal_spots.push(o.spot);
        result.realized_variance.push(o.realized);
        result.terminal_variance.push(o.variance);
        result.snapshots.extend(o.snapshots);
    }
    result
}

/// Simulates the multi-factor model.
///
/// Per step: `V^{n,i} ← e^{-γᵢΔ}V^{n,i} - λV⁺(1 - e^{-γᵢΔ})/γᵢ + ν√(V⁺Δ) ξ_B`,
/// `V = gⁿ + Σ cᵢV^{n,i}` and `log S ← log S - ½V⁺Δ + √(V⁺Δ) ξ_W`, with
/// `ξ_B = ρξ_W + √(1-ρ²)ξ_⊥` and `V⁺ = max(V, 0)` (the drift uses the raw
/// `V` under [`Truncation::Partial`]).
pub fn simulate_multifactor(
    params: &ModelParams,
    kernel: &MultiFactorKernel,
    config: &SimulationConfig,
) -> Result<SimulationResult> {
    params.validate()?;
    config.validate()?;
    if config.scheme != SimulationScheme::Multifactor {
        return Err(Error::Config(
            "simulate_multifactor requires scheme = multifactor".into(),
        ));
    }
    let vol_kernel = VolKernel::MultiFactor(kernel.clone());
    let grid = Grid::new(params, &vol_kernel, config.steps, config.truncation)?;
    let c = kernel.weights();
    let decay: Vec<f64> = kernel.rates().iter().map(|g| (-g * grid.dt).exp()).collect();
    let drift_weight: Vec<f64> = kernel.rates().iter().map(|g| grid.dt * phi1(g * grid.dt)).collect();
    let steps = grid.steps();

    Ok(run_paths(config, |draws, rec| {
        let mut factors = vec![0.0; c.len()];
        let mut log_s = grid.log_s0;
        let mut v = grid.g[0];
        let mut realized = 0.0;
        let mut negative_steps = 0;
        rec.record(0, steps, 0.0, log_s, v, &factors);
        for j in 0..steps {
            if v < 0.0 {
                negative_steps += 1;
            }
            let vp = v.max(0.0);
            let (zw, zp) = draws.next();
            let zb = grid.rho * zw + grid.rho_bar * zp;
            log_s += -0.5 * vp * grid.dt + (vp * grid.dt).sqrt() * zw;
            let noise = grid.nu * vp.sqrt() * grid.sqrt_dt * zb;
            let drift = -grid.lambda * grid.drift_variance(v);
            let mut next = grid.g[j + 1];
            for i in 0..factors.len() {
                factors[i] = decay[i] * factors[i] + drift_weight[i] * drift + noise;
                next += c[i] * factors[i];
            }
            realized += 0.5 * (v + next) * grid.dt;
            v = next;
            rec.record(j + 1, steps, grid.times[j + 1], log_s, v, &factors);
        }
        PathOutcome {
            spot: log_s.exp(),
            realized,
            variance: v,
            negative_steps,
            snapshots: std::mem::take(&mut rec.out),
        }
    }))
}

/// Simulates the rough Volterra equation by a left-point Euler scheme:
/// `V(t_{k+1}) = g(t_{k+1}) + Σ_{j≤k} wₖ₋ⱼ (-λV⁺(t_j)Δ + ν√V⁺(t_j) ΔB_j)`
/// where `w_m` is the average of `K` over the cell at lag `[mΔ, (m+1)Δ]`.
///
/// With `params.classical` the kernel is `K ≡ 1` and the scheme is the usual
/// Euler scheme of the Heston model.
pub fn simulate_volterra_oracle(params: &ModelParams, config: &SimulationConfig) -> Result<SimulationResult> {
    params.validate()?;
    config.validate()?;
    if config.scheme != SimulationScheme::VolterraOracle {
        return Err(Error::Config(
            "simulate_volterra_oracle requires scheme = volterra_oracle".into(),
        ));
    }
    let kernel = if params.classical {
        FractionalKernel::classical()
    } else {
        FractionalKernel::new(params.hurst)?
    };
    let grid = Grid::new(params, &VolKernel::Fractional(kernel), config.steps, config.truncation)?;
    let steps = grid.steps();
    let alpha = params.alpha();
    let scale = grid.dt.powf(alpha - 1.0) / gamma(alpha + 1.0);
    let weights: Vec<f64> = (0..steps)
        .map(|m| {
            let m = m as f64;
            scale * ((m + 1.0).powf(alpha) - m.powf(alpha))
        })
        .collect();

    Ok(run_paths(config, |draws, rec| {
        let mut increments = Vec::with_capacity(steps);
        let mut log_s = grid.log_s0;
        let mut v = grid.g[0];
        let mut realized = 0.0;
        let mut negative_steps = 0;
        rec.record(0, steps, 0.0, log_s, v, &[]);
        for k in 0..steps {
            if v < 0.0 {
                negative_steps += 1;
            }
            let vp = v.max(0.0);
            let (zw, zp) = draws.next();
            let zb = grid.rho * zw + grid.rho_bar * zp;
            log_s += -0.5 * vp * grid.dt + (vp * grid.dt).sqrt() * zw;
            increments.push(-grid.lambda * grid.drift_variance(v) * grid.dt + grid.nu * vp.sqrt() * grid.sqrt_dt * zb);
            let mut next = grid.g[k + 1];
            for (j, dz) in increments.iter().enumerate() {
                next += weights[k - j] * dz;
            }
            realized += 0.5 * (v + next) * grid.dt;
            v = next;
            rec.record(k + 1, steps, grid.times[k + 1], log_s, v, &[]);
        }
        PathOutcome {
            spot: log_s.exp(),
            realized,
            variance: v,
            negative_steps,
            snapshots: std::mem::take(&mut rec.out),
        }
    }))
}
