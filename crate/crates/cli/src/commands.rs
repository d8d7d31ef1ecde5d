use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use roughmf::kernel::{
    build_kernel, f1_bound, f2_bound, l1_error, l2_error, multifactor_forward_variance,
    multifactor_integrated_forward_variance, weights_from_partition, Partition, PartitionRecord,
};
use roughmf::montecarlo::{mc_call_price, simulate_multifactor, simulate_volterra_oracle, SimulationScheme};
use roughmf::pricing::{lewis_call_prices, riccati_error_report, smile, Smile};
use roughmf::riccati::CharFnEngine;
use roughmf::special::{forward_variance, integrated_forward_variance};
use roughmf::timing::run_bench;
use roughmf::{CharFnForm, FractionalKernel, ModelParams, MultiFactorKernel, VolKernel};

use crate::config::{KernelChoice, RunConfig};

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        serde_json::to_writer_pretty(self.create(name)?, value)?;
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.create(name)?);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `<command>.json` with the resolved config, the written files and the results.
    fn finish(mut self, command: &str, config: &RunConfig, results: Value) -> Result<()> {
        let name = format!("{command}.json");
        self.files.push(name.clone());
        let summary = json!({
            "command": command,
            "config": serde_json::to_value(config)?,
            "files": self.files,
            "results": results,
        });
        let path = self.dir.join(&name);
        serde_json::to_writer_pretty(BufWriter::new(File::create(&path)?), &summary)?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

fn fmt(x: f64) -> String {
    x.to_string()
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

fn fractional_kernel(params: &ModelParams) -> Result<VolKernel> {
    Ok(VolKernel::Fractional(if params.classical {
        FractionalKernel::classical()
    } else {
        FractionalKernel::new(params.hurst)?
    }))
}

fn read_partition(cfg: &RunConfig) -> Result<Partition> {
    let path = cfg
        .kernel
        .partition_file
        .as_ref()
        .ok_or_else(|| anyhow!("missing kernel.partition_file"))?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let record: PartitionRecord = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let (hurst, partition) = record.into_partition()?;
    if hurst != cfg.model.hurst {
        bail!(
            "partition file is for hurst = {hurst} but model.hurst = {}",
            cfg.model.hurst
        );
    }
    Ok(partition)
}

/// The partition and kernel for `n` factors on `[0, horizon]`.
fn multifactor(cfg: &RunConfig, n: usize, horizon: f64) -> Result<(Partition, MultiFactorKernel)> {
    match cfg.kernel.choice.factor_choice() {
        Some(choice) => {
            let built = build_kernel(choice, n, cfg.model.hurst, horizon)?;
            Ok((built.partition, built.kernel))
        }
        None => {
            let partition = read_partition(cfg)?;
            let kernel = weights_from_partition(cfg.model.hurst, &partition)?;
            Ok((partition, kernel))
        }
    }
}

#[derive(Serialize)]
struct KernelFile<'a> {
    choice: KernelChoice,
    n: usize,
    hurst: f64,
    horizon: f64,
    etas: &'a [f64],
    weights: &'a [f64],
    rates: &'a [f64],
    l1_error: f64,
    l2_error: f64,
    f1_bound: f64,
    f2_bound: f64,
}

pub fn kernel(cfg: &RunConfig) -> Result<()> {
    let mut out = Output::new(&cfg.output_dir)?;
    let counts = match (cfg.kernel.choice, cfg.kernel.sweep.is_empty()) {
        (KernelChoice::Explicit, _) => vec![read_partition(cfg)?.len()],
        (_, true) => vec![cfg.kernel.n],
        (_, false) => cfg.kernel.sweep.clone(),
    };
    let (hurst, horizon) = (cfg.model.hurst, cfg.model.horizon);
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for n in counts {
        let (partition, k) = multifactor(cfg, n, horizon)?;
        let file = KernelFile {
            choice: cfg.kernel.choice,
            n: k.len(),
            hurst,
            horizon,
            etas: partition.etas(),
            weights: k.weights(),
            rates: k.rates(),
            l1_error: l1_error(&k, hurst, horizon)?,
            l2_error: l2_error(&k, hurst, horizon)?,
            f1_bound: f1_bound(hurst, horizon, &partition)?,
            f2_bound: f2_bound(hurst, horizon, &partition)?,
        };
        out.json(&format!("kernel_n{}.json", file.n), &file)?;
        rows.push(vec![
            file.n.to_string(),
            fmt(file.l1_error),
            fmt(file.l2_error),
            fmt(file.f1_bound),
            fmt(file.f2_bound),
        ]);
        results.push(json!({
            "n": file.n,
            "l1_error": file.l1_error,
            "l2_error": file.l2_error,
            "f1_bound": file.f1_bound,
            "f2_bound": file.f2_bound,
        }));
    }
    out.csv(
        "kernel_errors.csv",
        &["n", "l1_error", "l2_error", "f1_bound", "f2_bound"],
        &rows,
    )?;
    out.finish("kernel", cfg, Value::Array(results))
}

pub fn riccati(cfg: &RunConfig) -> Result<()> {
    let choice =
        cfg.kernel.choice.factor_choice().ok_or_else(|| {
            anyhow!("riccati sweeps factor counts and needs a constructed kernel choice, not explicit")
        })?;
    let mut out = Output::new(&cfg.output_dir)?;
    let r = riccati_error_report(
        &cfg.model,
        &cfg.riccati.factor_counts,
        &cfg.riccati.b_grid,
        cfg.model.horizon,
        choice,
        cfg.riccati.steps,
    )?;
    r.write_csv(out.create("riccati_errors.csv")?)?;
    let max: Vec<Value> = cfg
        .riccati
        .factor_counts
        .iter()
        .map(|&n| json!({"n": n, "max_rel_err": r.max_rel_err(n)}))
        .collect();
    let flagged: Vec<f64> = r
        .rows
        .iter()
        .filter(|row| row.rel_err.is_none())
        .map(|row| row.b)
        .collect();
    out.finish(
        "riccati",
        cfg,
        json!({"max_rel_err": max, "undefined_rel_err_at_b": flagged}),
    )
}

/// Fractional and multi-factor smiles at the pricing maturity.
fn smiles(cfg: &RunConfig) -> Result<(Smile, Smile, usize)> {
    let p = &cfg.pricing;
    let (_, k) = multifactor(cfg, p.n, p.maturity)?;
    let n = k.len();
    let rough = smile(
        &cfg.model,
        &fractional_kernel(&cfg.model)?,
        &p.k_grid,
        p.maturity,
        p.steps,
        &p.integration,
    )?;
    let approx = smile(
        &cfg.model,
        &VolKernel::MultiFactor(k),
        &p.k_grid,
        p.maturity,
        p.steps,
        &p.integration,
    )?;
    Ok((rough, approx, n))
}

fn atm_gap(rough: &Smile, approx: &Smile) -> Option<f64> {
    Some(approx.iv_at(0.0)? - rough.iv_at(0.0)?)
}

pub fn price(cfg: &RunConfig) -> Result<()> {
    let mut out = Output::new(&cfg.output_dir)?;
    let (rough, approx, n) = smiles(cfg)?;
    let s0 = cfg.model.s0;
    let rows: Vec<Vec<String>> = rough
        .points
        .iter()
        .zip(&approx.points)
        .map(|(a, b)| {
            vec![
                fmt(a.k),
                fmt(s0 * a.k.exp()),
                fmt(a.price),
                fmt(b.price),
                fmt(b.price - a.price),
            ]
        })
        .collect();
    out.csv(
        "prices.csv",
        &["k", "strike", "price_fractional", "price_multifactor", "price_diff"],
        &rows,
    )?;
    let max_diff = rough
        .points
        .iter()
        .zip(&approx.points)
        .map(|(a, b)| (b.price - a.price).abs())
        .fold(0.0, f64::max);
    out.finish("price", cfg, json!({"n": n, "max_abs_price_diff": max_diff}))
}

pub fn smile_cmd(cfg: &RunConfig) -> Result<()> {
    let mut out = Output::new(&cfg.output_dir)?;
    let (rough, approx, n) = smiles(cfg)?;
    let rows: Vec<Vec<String>> = rough
        .points
        .iter()
        .zip(&approx.points)
        .map(|(a, b)| {
            let diff = a.iv.zip(b.iv).map(|(x, y)| y - x);
            vec![fmt(a.k), fmt_opt(a.iv), fmt_opt(b.iv), fmt_opt(diff)]
        })
        .collect();
    out.csv("smile.csv", &["k", "iv_fractional", "iv_multifactor", "iv_diff"], &rows)?;
    let missing: Vec<f64> = rough
        .points
        .iter()
        .chain(&approx.points)
        .filter(|pt| pt.iv.is_none())
        .map(|pt| pt.k)
        .collect();
    out.finish(
        "smile",
        cfg,
        json!({"n": n, "atm_iv_gap": atm_gap(&rough, &approx), "k_without_iv": missing}),
    )
}

/// `None` when the standard error is rounding noise.
fn z_score(mean: f64, se: f64, exact: f64) -> Option<f64> {
    (se > 1e-12 * mean.abs().max(exact.abs())).then(|| (mean - exact) / se)
}

fn moment(mean: f64, se: f64, exact: f64) -> Value {
    json!({"mean": mean, "std_error": se, "exact": exact, "z_score": z_score(mean, se, exact)})
}

pub fn simulate(cfg: &RunConfig) -> Result<()> {
    let mut out = Output::new(&cfg.output_dir)?;
    let p = &cfg.model;
    let sc = &cfg.simulation.config;
    let t = p.horizon;
    let (result, kernel, ev, erv) = match sc.scheme {
        SimulationScheme::Multifactor => {
            let (_, k) = multifactor(cfg, cfg.simulation.n, t)?;
            let r = simulate_multifactor(p, &k, sc)?;
            let ev = multifactor_forward_variance(p, &k, t)?;
            let erv = multifactor_integrated_forward_variance(p, &k, t)?;
            (r, VolKernel::MultiFactor(k), ev, erv)
        }
        SimulationScheme::VolterraOracle => {
            let r = simulate_volterra_oracle(p, sc)?;
            (
                r,
                fractional_kernel(p)?,
                forward_variance(p, t)?,
                integrated_forward_variance(p, t)?,
            )
        }
    };
    if cfg.simulation.write_paths {
        result.write_csv(out.create("paths.csv")?)?;
    }
    if !result.snapshots.is_empty() {
        result.write_snapshots_csv(out.create("snapshots.csv")?)?;
    }
    let engine = CharFnEngine::new(p, &kernel, cfg.pricing.steps, CharFnForm::FForm)?;
    let lewis = lewis_call_prices(&engine, &cfg.simulation.strikes, p.s0, &cfg.pricing.integration)?;
    let mut rows = Vec::new();
    let mut prices = Vec::new();
    for (&k, &fourier) in cfg.simulation.strikes.iter().zip(&lewis) {
        let mc = mc_call_price(&result, k, p.s0)?;
        let z = z_score(mc.price, mc.std_error, fourier);
        rows.push(vec![fmt(k), fmt(mc.price), fmt(mc.std_error), fmt(fourier), fmt_opt(z)]);
        prices.push(
            json!({"k": k, "mc_price": mc.price, "std_error": mc.std_error, "lewis_price": fourier, "z_score": z}),
        );
    }
    out.csv(
        "mc_prices.csv",
        &["k", "mc_price", "std_error", "lewis_price", "z_score"],
        &rows,
    )?;
    let (m_s, se_s) = result.mean_and_error(&result.terminal_spots)?;
    let (m_v, se_v) = result.mean_and_error(&result.terminal_variance)?;
    let (m_rv, se_rv) = result.mean_and_error(&result.realized_variance)?;
    out.finish(
        "simulate",
        cfg,
        json!({
            "kernel": kernel.label(),
            "terminal_spot": moment(m_s, se_s, p.s0),
            "terminal_variance": moment(m_v, se_v, ev),
            "realized_variance": moment(m_rv, se_rv, erv),
            "negative_variance_fraction": result.negative_fraction,
            "prices": prices,
        }),
    )
}

pub fn bench(cfg: &RunConfig) -> Result<()> {
    let mut out = Output::new(&cfg.output_dir)?;
    let report = run_bench(&cfg.model, &cfg.bench)?;
    report.write_csv(out.create("bench.csv")?)?;
    for r in &report.ratios {
        println!(
            "{}: {:.2} (band [{}, {}]) {}",
            r.name,
            r.value,
            r.band.0,
            r.band.1,
            if r.in_band { "ok" } else { "outside band" }
        );
    }
    out.finish(
        "bench",
        cfg,
        json!({"ratios": report.ratios, "all_in_band": report.all_in_band()}),
    )
}
