//! Minimization of the L¹/L² error bounds over partitions.
//!
//! Decision variables are `xᵢ = log(ηᵢ - ηᵢ₋₁)`, so every point of `ℝⁿ` is a
//! feasible partition. Each seed is descended with L-BFGS on the analytic
//! gradient and then polished with Nelder-Mead.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

use super::measure::{bound_coefficients, bound_with_gradient, total_spread};
use super::{check_hurst, optimal_step, uniform_partition, Partition};

/// Bound to minimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// The L¹ bound `f⁽¹⁾`.
    F1,
    /// The L² bound `f⁽²⁾`.
    F2,
}

/// Result of [`optimize_partition`].
#[derive(Debug, Clone)]
pub struct OptimizedPartition {
    pub partition: Partition,
    /// Objective at `partition`.
    pub value: f64,
    /// Objective at the uniform optimal-step partition.
    pub seed_value: f64,
    /// `false` when no seed could be improved; `partition` is then the uniform seed.
    pub improved: bool,
    /// Total optimizer iterations over all seeds.
    pub iterations: usize,
}

const MAX_ETA: f64 = 1e6;
const LBFGS_MEMORY: usize = 10;
const LBFGS_MAX_ITER: usize = 5000;
const NM_MAX_ITER: usize = 2000;
const NM_DIAMETER: f64 = 1e-8;

struct Problem {
    objective: Objective,
    hurst: f64,
    horizon: f64,
}

impl Problem {
    fn etas(x: &[f64]) -> Option<Vec<f64>> {
        let mut etas = Vec::with_capacity(x.len() + 1);
        etas.push(0.0);
        let mut acc = 0.0;
        for &xi in x {
            acc += xi.exp();
            if !(acc.is_finite() && acc < 1e200) {
                return None;
            }
            etas.push(acc);
        }
        // consecutive points must stay distinct in floating point
        if etas.windows(2).any(|w| !(w[1] > w[0])) {
            return None;
        }
        Some(etas)
    }

    fn value(&self, x: &[f64]) -> f64 {
        match Self::etas(x) {
            Some(etas) => {
                let (a, b, p) = bound_coefficients(self.objective, self.hurst, self.horizon);
                a * total_spread(self.hurst, &etas) + b * etas[etas.len() - 1].powf(-p)
            }
            None => f64::INFINITY,
        }
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let Some(etas) = Self::etas(x) else {
            return (f64::INFINITY, vec![0.0; x.len()]);
        };
        let (f, d_eta) = bound_with_gradient(self.objective, self.hurst, self.horizon, &etas);
        // ηᵢ = Σ_{j≤i} e^{xⱼ}  ⇒  ∂f/∂xⱼ = e^{xⱼ} Σ_{i≥j} ∂f/∂ηᵢ
        let mut grad = vec![0.0; x.len()];
        let mut tail = 0.0;
        for j in (0..x.len()).rev() {
            tail += d_eta[j];
            grad[j] = x[j].exp() * tail;
        }
        (f, grad)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn lbfgs(problem: &Problem, mut x: Vec<f64>) -> (Vec<f64>, f64, usize) {
    let (mut f, mut g) = problem.value_and_gradient(&x);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut stall = 0;
    let mut iter = 0;
    while iter < LBFGS_MAX_ITER {
        iter += 1;
        // two-loop recursion
        let mut q = g.clone();
        let k = s_hist.len();
        let mut alphas = vec![0.0; k];
        for i in (0..k).rev() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            alphas[i] = rho * dot(&s_hist[i], &q);
            for (qj, yj) in q.iter_mut().zip(&y_hist[i]) {
                *qj -= alphas[i] * yj;
            }
        }
        let scale = if k > 0 {
            dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1])
        } else {
            1.0 / g.iter().map(|v| v.abs()).fold(1e-300, f64::max)
        };
        for qj in q.iter_mut() {
            *qj *= scale;
        }
        for i in 0..k {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let beta = rho * dot(&y_hist[i], &q);
            for (qj, sj) in q.iter_mut().zip(&s_hist[i]) {
                *qj += (alphas[i] - beta) * sj;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
            s_hist.clear();
            y_hist.clear();
        }
        if slope == 0.0 {
            break;
        }

        // backtracking Armijo search
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = problem.value_and_gradient(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-300 {
            if s_hist.len() == LBFGS_MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }
        let decrease = f - fnew;
        x = xn;
        g = gn;
        f = fnew;
        if decrease <= 1e-15 * f.abs() {
            stall += 1;
            if stall >= 5 {
                break;
            }
        } else {
            stall = 0;
        }
    }
    (x, f, iter)
}

fn nelder_mead(problem: &Problem, x0: Vec<f64>, f0: f64) -> (Vec<f64>, f64, usize) {
    let n = x0.len();
    let mut simplex = vec![(x0.clone(), f0)];
    for i in 0..n {
        let mut v = x0.clone();
        v[i] += 0.05;
        let fv = problem.value(&v);
        simplex.push((v, fv));
    }
    let mut iter = 0;
    while iter < NM_MAX_ITER {
        iter += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = &simplex[0].0;
        let diameter = simplex[1..]
            .iter()
            .map(|(v, _)| v.iter().zip(best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let size = best.iter().map(|v| v.abs()).fold(1.0, f64::max);
        if diameter < NM_DIAMETER * size {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for (c, vi) in centroid.iter_mut().zip(v) {
                *c += vi / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };
        let xr = along(1.0);
        let fr = problem.value(&xr);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = problem.value(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = along(0.5);
                let fc = problem.value(&xc);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = problem.value(&xc);
                (xc, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let v: Vec<f64> = best.iter().zip(&entry.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    let fv = problem.value(&v);
                    *entry = (v, fv);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    (x, f, iter)
}

fn log_increments(etas: &[f64]) -> Vec<f64> {
    etas.windows(2).map(|w| (w[1] - w[0]).ln()).collect()
}

/// Geometric seed with first increment `step` and growth `ratio`, the ratio
/// lowered as needed to keep `ηₙ ≤ 1e6`.
fn geometric_seed(n: usize, step: f64, ratio: f64) -> Vec<f64> {
    let last = |r: f64| step * (r.powi(n as i32) - 1.0) / (r - 1.0);
    let mut r = ratio;
    if n > 1 && last(r) > MAX_ETA {
        let (mut lo, mut hi) = (1.0 + 1e-12, ratio);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if last(mid) > MAX_ETA {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        r = lo;
    }
    let mut etas = vec![0.0];
    let mut inc = step;
    for _ in 0..n {
        let prev = *etas.last().unwrap();
        etas.push(prev + inc);
        inc *= r;
    }
    etas
}

/// Local minimizer of the chosen error bound over partitions with `n` cells.
///
/// Starts from the uniform optimal-step partition and two geometric
/// partitions (ratios 3 and 10) and keeps the best local minimum. The result
/// is never worse than the uniform seed.
pub fn optimize_partition(n: usize, hurst: f64, horizon: f64, objective: Objective) -> Result<OptimizedPartition> {
    check_hurst(hurst)?;
    if n < 1 {
        return invalid("optimize_partition requires n >= 1");
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return invalid(format!("horizon must be > 0, got {horizon}"));
    }
    let problem = Problem {
        objective,
        hurst,
        horizon,
    };
    let step = optimal_step(n, horizon, hurst)?;
    let uniform = uniform_partition(n, step)?;
    let seed_x = log_increments(uniform.etas());
    let seed_value = problem.value(&seed_x);

    let seeds = [
        seed_x.clone(),
        log_increments(&geometric_seed(n, step, 3.0)),
        log_increments(&geometric_seed(n, step, 10.0)),
    ];
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut iterations = 0;
    for x0 in seeds {
        let (x, f, it) = lbfgs(&problem, x0);
        let (x, f, it2) = nelder_mead(&problem, x, f);
        iterations += it + it2;
        if f.is_finite() && best.as_ref().is_none_or(|(_, bf)| f < *bf) {
            best = Some((x, f));
        }
    }

    match best {
        Some((x, value)) if value < seed_value => {
            let etas = Problem::etas(&x).expect("finite objective implies a valid partition");
            Ok(OptimizedPartition {
                partition: Partition::new(etas)?,
                value,
                seed_value,
                improved: true,
                iterations,
            })
        }
        _ => Ok(OptimizedPartition {
            partition: uniform,
            value: seed_value,
            seed_value,
            improved: false,
            iterations,
        }),
    }
}
