//! Wall-clock scaling of the two Riccati solvers in the step count and the
//! number of factors.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernel::{build_kernel, FactorChoice};
use crate::params::ModelParams;
use crate::riccati::{solve_multifactor_riccati, AdamsSolver};

/// Accepted runtime ratios.
pub const ADAMS_STEP_BAND: (f64, f64) = (3.0, 5.5);
pub const MULTIFACTOR_STEP_BAND: (f64, f64) = (1.6, 2.6);
pub const MULTIFACTOR_FACTOR_BAND: (f64, f64) = (3.5, 7.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub steps: Vec<usize>,
    pub factors: Vec<usize>,
    /// Imaginary part of `z = ½ + ib`.
    pub b: f64,
    /// Each timing is the fastest of this many batches.
    pub batches: usize,
    /// Minimum duration of one batch in seconds.
    pub min_batch_seconds: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            steps: vec![100, 200, 400, 800],
            factors: vec![20, 100, 500],
            b: 10.0,
            batches: 7,
            min_batch_seconds: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub solver: String,
    /// Factor count; `None` for the fractional solver.
    pub n: Option<usize>,
    pub steps: usize,
    /// Seconds per solve.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRatio {
    pub name: String,
    pub value: f64,
    pub band: (f64, f64),
    pub in_band: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub ratios: Vec<BenchRatio>,
}

impl BenchReport {
    pub fn all_in_band(&self) -> bool {
        !self.ratios.is_empty() && self.ratios.iter().all(|r| r.in_band)
    }

    fn seconds(&self, solver: &str, n: Option<usize>, steps: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.solver == solver && r.n == n && r.steps == steps)
            .map(|r| r.seconds)
    }

    /// Writes `solver,n,steps,seconds` rows.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["solver", "n", "steps", "seconds"])?;
        for r in &self.rows {
            let n = r.n.map(|n| n.to_string()).unwrap_or_default();
            w.write_record([r.solver.clone(), n, r.steps.to_string(), r.seconds.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Repetitions of `f` needed to fill `min_batch`.
fn calibrate(f: &mut dyn FnMut(), min_batch: Duration) -> usize {
    f();
    let mut reps = 1usize;
    loop {
        let start = Instant::now();
        for _ in 0..reps {
            f();
        }
        if start.elapsed() >= min_batch {
            return reps;
        }
        reps *= 2;
    }
}

/// Seconds per call of each job, as the fastest of `batches` batches. Each
/// round runs one batch of every job in shuffled order, so periodic background
/// load does not keep landing on the same job.
fn time_jobs(jobs: &mut [Box<dyn FnMut() + '_>], batches: usize, min_batch: Duration) -> Vec<f64> {
    let reps: Vec<usize> = jobs.iter_mut().map(|f| calibrate(f, min_batch)).collect();
    let mut best = vec![f64::INFINITY; jobs.len()];
    let mut order: Vec<usize> = (0..jobs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..batches.max(1) {
        order.shuffle(&mut rng);
        for &j in &order {
            let start = Instant::now();
            for _ in 0..reps[j] {
                jobs[j]();
            }
            best[j] = best[j].min(start.elapsed().as_secs_f64() / reps[j] as f64);
        }
    }
    best
}

/// Times both solvers on every configured step count (and factor count for
/// the multi-factor solver) on the calling thread.
pub fn run_bench(params: &ModelParams, config: &BenchConfig) -> Result<BenchReport> {
    if config.steps.is_empty() || config.factors.is_empty() {
        return invalid("bench needs non-empty steps and factors");
    }
    params.validate()?;
    let z = Complex64::new(0.5, config.b);
    let min_batch = Duration::from_secs_f64(config.min_batch_seconds.max(1e-3));
    let mut adams = Vec::new();
    for &steps in &config.steps {
        adams.push((steps, AdamsSolver::new(params.alpha(), params.horizon, steps)?));
    }
    let mut kernels = Vec::new();
    for &n in &config.factors {
        kernels.push((
            n,
            build_kernel(FactorChoice::UniformOptimal, n, params.hurst, params.horizon)?.kernel,
        ));
    }
    let mut rows = Vec::new();
    let mut jobs: Vec<Box<dyn FnMut() + '_>> = Vec::new();
    for (steps, solver) in &adams {
        rows.push(BenchRow {
            solver: "adams".into(),
            n: None,
            steps: *steps,
            seconds: 0.0,
        });
        jobs.push(Box::new(move || {
            std::hint::black_box(solver.solve(params, z).map(|s| s.terminal()).ok());
        }));
    }
    for (n, kernel) in &kernels {
        for &steps in &config.steps {
            rows.push(BenchRow {
                solver: "multifactor".into(),
                n: Some(*n),
                steps,
                seconds: 0.0,
            });
            jobs.push(Box::new(move || {
                std::hint::black_box(
                    solve_multifactor_riccati(kernel, params, z, steps)
                        .map(|s| s.terminal())
                        .ok(),
                );
            }));
        }
    }
    let seconds = time_jobs(&mut jobs, config.batches, min_batch);
    drop(jobs);
    for (row, s) in rows.iter_mut().zip(seconds) {
        row.seconds = s;
    }
    let mut report = BenchReport {
        rows,
        ratios: Vec::new(),
    };
    let n_max = config.factors.iter().copied().max();
    let candidates = [
        (
            "adams steps 400/200",
            report.seconds("adams", None, 400),
            report.seconds("adams", None, 200),
            ADAMS_STEP_BAND,
        ),
        (
            "multifactor steps 400/200",
            report.seconds("multifactor", n_max, 400),
            report.seconds("multifactor", n_max, 200),
            MULTIFACTOR_STEP_BAND,
        ),
        (
            "multifactor n 500/100",
            report.seconds("multifactor", Some(500), 200),
            report.seconds("multifactor", Some(100), 200),
            MULTIFACTOR_FACTOR_BAND,
        ),
    ];
    for (name, num, den, band) in candidates {
        if let (Some(a), Some(b)) = (num, den) {
            let value = a / b;
            report.ratios.push(BenchRatio {
                name: name.into(),
                value,
                band,
                in_band: value >= band.0 && value <= band.1,
            });
        }
    }
    Ok(report)
}
