//! Fractional kernel and its exponential-sum approximations.
//!
//! `K(t) = t^{H-1/2}/Γ(H+1/2) = ∫₀^∞ e^{-γt} μ(dγ)` with
//! `μ(dγ) = γ^{-H-1/2} dγ / (Γ(H+1/2)Γ(1/2-H))`. A partition of the γ
//! half-line yields one exponential per cell: the cell mass is the weight and
//! the cell barycenter is the mean-reversion rate.

mod measure;
mod norms;
mod optimize;
mod resolvent;

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};
use crate::special::gamma;

pub use measure::{
    cell_moments, f1_bound, f2_bound, mu_density, optimal_step, uniform_partition, weights_from_partition, CellMoments,
};
pub use norms::{l1_error, l2_error};
pub use optimize::{optimize_partition, Objective, OptimizedPartition};
pub use resolvent::{multifactor_forward_variance, multifactor_integrated_forward_variance, MultiFactorResolvent};

pub(crate) fn check_hurst(hurst: f64) -> Result<()> {
    if !(hurst > 0.0 && hurst < 0.5) {
        return invalid(format!("hurst must lie in (0, 1/2), got {hurst}"));
    }
    Ok(())
}

/// `(1 - e^{-x}) / x`, continuous at 0.
pub(crate) fn phi1(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}

/// `(x - 1 + e^{-x}) / x²`, continuous at 0.
pub(crate) fn phi2(x: f64) -> f64 {
    if x < 1e-4 {
        0.5 - x / 6.0 + x * x / 24.0
    } else {
        (x + (-x).exp_m1()) / (x * x)
    }
}

/// The fractional kernel `t^{H-1/2}/Γ(H+1/2)`.
///
/// `H = 1/2` (where `K ≡ 1`) is only reachable through [`FractionalKernel::classical`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionalKernel {
    hurst: f64,
}

impl FractionalKernel {
    pub fn new(hurst: f64) -> Result<Self> {
        check_hurst(hurst)?;
        Ok(Self { hurst })
    }

    /// Classical limit `H = 1/2`, `K ≡ 1`.
    pub fn classical() -> Self {
        Self { hurst: 0.5 }
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn is_classical(&self) -> bool {
        self.hurst == 0.5
    }

    /// `α = H + 1/2`.
    pub fn alpha(&self) -> f64 {
        self.hurst + 0.5
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return domain(format!("fractional kernel is singular at t = {t}; need t > 0"));
        }
        Ok(t.powf(self.hurst - 0.5) / gamma(self.alpha()))
    }

    /// `∫₀ᵗ K = t^α / Γ(α+1)`.
    pub fn primitive(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        t.powf(self.alpha()) / gamma(self.alpha() + 1.0)
    }
}

/// `K(t)` for the fractional kernel.
pub fn frac_kernel_eval(kernel: &FractionalKernel, t: f64) -> Result<f64> {
    kernel.eval(t)
}

/// Auxiliary mean reversions `0 = η₀ < η₁ < … < ηₙ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    etas: Vec<f64>,
}

impl Partition {
    pub fn new(etas: Vec<f64>) -> Result<Self> {
        if etas.len() < 2 {
            return invalid("a partition needs at least two points (n >= 1 cells)");
        }
        if etas[0] != 0.0 {
            return invalid(format!("partition must start at 0, got {}", etas[0]));
        }
        if let Some(w) = etas.windows(2).find(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return invalid(format!(
                "partition must be strictly increasing and finite; found {} then {}",
                w[0], w[1]
            ));
        }
        Ok(Self { etas })
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.etas.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn last(&self) -> f64 {
        self.etas[self.etas.len() - 1]
    }

    pub fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.etas.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn to_record(&self, hurst: f64) -> PartitionRecord {
        PartitionRecord {
            hurst,
            etas: self.etas.clone(),
        }
    }
}

/// JSON form `{"hurst": …, "etas": […]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionRecord {
    pub hurst: f64,
    pub etas: Vec<f64>,
}

impl PartitionRecord {
    pub fn into_partition(self) -> Result<(f64, Partition)> {
        check_hurst(self.hurst)?;
        Ok((self.hurst, Partition::new(self.etas)?))
    }
}

/// `Kⁿ(t) = Σ cᵢ e^{-γᵢ t}`. Serialized as `{"weights": […], "rates": […]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiFactorKernel {
    weights: Vec<f64>,
    rates: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hurst: Option<f64>,
}

impl MultiFactorKernel {
    pub fn new(weights: Vec<f64>, rates: Vec<f64>, hurst: Option<f64>) -> Result<Self> {
        if weights.len() != rates.len() {
            return invalid(format!(
                "kernel has {} weights but {} rates",
                weights.len(),
                rates.len()
            ));
        }
        if weights.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return invalid("kernel weights must be finite and positive");
        }
        if rates.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return invalid("kernel rates must be finite and positive");
        }
        if rates.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("kernel rates must be strictly increasing");
        }
        if let Some(h) = hurst {
            check_hurst(h)?;
        }
        Ok(Self { weights, rates, hurst })
    }

    /// The kernel with no factors, `Kⁿ ≡ 0`.
    pub fn empty(hurst: Option<f64>) -> Self {
        Self {
            weights: Vec::new(),
            rates: Vec::new(),
            hurst,
        }
    }

    /// Re-validates a deserialized kernel.
    pub fn validated(self) -> Result<Self> {
        Self::new(self.weights, self.rates, self.hurst)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn hurst(&self) -> Option<f64> {
        self.hurst
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.rates)
            .map(|(c, g)| c * (-g * t).exp())
            .sum()
    }

    /// `∫₀ᵗ Kⁿ = Σ cᵢ (1 - e^{-γᵢ t}) / γᵢ`.
    pub fn primitive(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        self.weights
            .iter()
            .zip(&self.rates)
            .map(|(c, g)| c * t * phi1(g * t))
            .sum()
    }
}

/// `Kⁿ(t)`; equals `Σ cᵢ` at `t = 0`.
pub fn kernel_eval(kernel: &MultiFactorKernel, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return domain(format!("kernel_eval requires t >= 0, got {t}"));
    }
    Ok(kernel.eval(t))
}

/// Either kernel; selects the matching Riccati solver downstream.
#[derive(Debug, Clone, PartialEq)]
pub enum VolKernel {
    Fractional(FractionalKernel),
    MultiFactor(MultiFactorKernel),
}

impl VolKernel {
    pub fn primitive(&self, t: f64) -> f64 {
        match self {
            VolKernel::Fractional(k) => k.primitive(t),
            VolKernel::MultiFactor(k) => k.primitive(t),
        }
    }

    pub fn label(&self) -> String {
        match self {
            VolKernel::Fractional(_) => "fractional".to_string(),
            VolKernel::MultiFactor(k) => format!("multifactor_n{}", k.len()),
        }
    }
}

impl From<FractionalKernel> for VolKernel {
    fn from(k: FractionalKernel) -> Self {
        VolKernel::Fractional(k)
    }
}

impl From<MultiFactorKernel> for VolKernel {
    fn from(k: MultiFactorKernel) -> Self {
        VolKernel::MultiFactor(k)
    }
}

/// How the auxiliary mean reversions are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorChoice {
    /// `ηᵢ = i πₙ` with the step minimizing the L² bound.
    UniformOptimal,
    /// Minimizer of the L² error bound.
    F2Opt,
    /// Minimizer of the L¹ error bound.
    F1Opt,
}

impl FactorChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            FactorChoice::UniformOptimal => "uniform_optimal",
            FactorChoice::F2Opt => "f2_opt",
            FactorChoice::F1Opt => "f1_opt",
        }
    }
}

impl std::str::FromStr for FactorChoice {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform_optimal" | "uniform" => Ok(FactorChoice::UniformOptimal),
            "f2_opt" | "f2" => Ok(FactorChoice::F2Opt),
            "f1_opt" | "f1" => Ok(FactorChoice::F1Opt),
            other => invalid(format!("unknown factor choice {other:?}")),
        }
    }
}

/// A partition together with the kernel built from it.
#[derive(Debug, Clone)]
pub struct BuiltKernel {
    pub partition: Partition,
    pub kernel: MultiFactorKernel,
    pub optimization: Option<OptimizedPartition>,
}

/// Builds the `n`-factor kernel for a factor choice.
pub fn build_kernel(choice: FactorChoice, n: usize, hurst: f64, horizon: f64) -> Result<BuiltKernel> {
    let (partition, optimization) = match choice {
        FactorChoice::UniformOptimal => {
            let step = optimal_step(n, horizon, hurst)?;
            (uniform_partition(n, step)?, None)
        }
        FactorChoice::F2Opt | FactorChoice::F1Opt => {
            let objective = if choice == FactorChoice::F2Opt {
                Objective::F2
            } else {
                Objective::F1
            };
            let opt = optimize_partition(n, hurst, horizon, objective)?;
            (opt.partition.clone(), Some(opt))
        }
    };
    let kernel = weights_from_partition(hurst, &partition)?;
    Ok(BuiltKernel {
        partition,
        kernel,
        optimization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractional_kernel_examples() {
        let k = FractionalKernel::new(0.1).unwrap();
        assert!((k.eval(1.0).unwrap() - 1.0 / gamma(0.6)).abs() < 1e-15);
        // direct power/Γ evaluation: 4^{-0.4}/Γ(0.6)
        assert!((k.eval(4.0).unwrap() - 0.385_678_328_608_269_5).abs() < 1e-14);
        assert!(k.eval(0.0).is_err());
        assert!(FractionalKernel::new(0.5).is_err());
        assert!(FractionalKernel::new(0.0).is_err());
        assert_eq!(FractionalKernel::classical().eval(3.0).unwrap(), 1.0);
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(Partition::new(vec![0.1, 1.0]).is_err());
        assert!(Partition::new(vec![0.0]).is_err());
        assert!(Partition::new(vec![0.0, 2.0, 1.0]).is_err());
        let p = Partition::new(vec![0.0, 0.5, 2.0]).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.last(), 2.0);
    }

    #[test]
    fn multifactor_kernel_eval() {
        let k = MultiFactorKernel::new(vec![2.0], vec![1.0], None).unwrap();
        assert!((kernel_eval(&k, 1.0).unwrap() - 2.0 / std::f64::consts::E).abs() < 1e-15);
        let k = MultiFactorKernel::new(vec![1.0, 2.0, 0.5], vec![0.3, 1.0, 9.0], None).unwrap();
        assert!((k.eval(0.0) - 3.5).abs() < 1e-15);
        let mut prev = k.eval(0.0);
        for i in 1..200 {
            let v = k.eval(i as f64 * 0.1);
            assert!(v < prev && v > 0.0);
            prev = v;
        }
        assert!(k.eval(1e3) < 1e-100);
        assert!(kernel_eval(&k, -1.0).is_err());
    }

    #[test]
    fn multifactor_kernel_validation() {
        assert!(MultiFactorKernel::new(vec![1.0], vec![1.0, 2.0], None).is_err());
        assert!(MultiFactorKernel::new(vec![-1.0], vec![1.0], None).is_err());
        assert!(MultiFactorKernel::new(vec![1.0, 1.0], vec![2.0, 1.0], None).is_err());
    }

    #[test]
    fn primitive_matches_quadrature() {
        let k = MultiFactorKernel::new(vec![1.0, 2.0], vec![1e-9, 40.0], None).unwrap();
        let t = 0.7;
        let q = crate::quad::gauss_legendre_16(|s| k.eval(s), 0.0, t);
        assert!((k.primitive(t) - q).abs() < 1e-12);
    }

    #[test]
    fn kernel_json_roundtrip() {
        let k = MultiFactorKernel::new(vec![0.5, 0.25], vec![1.0, 3.0], Some(0.1)).unwrap();
        let s = serde_json::to_string(&k).unwrap();
        assert!(s.contains("\"weights\"") && s.contains("\"rates\""));
        let back: MultiFactorKernel = serde_json::from_str(&s).unwrap();
        assert_eq!(back.validated().unwrap(), k);
        let rec: PartitionRecord = serde_json::from_str(r#"{"hurst":0.1,"etas":[0,1,2]}"#).unwrap();
        let (h, p) = rec.into_partition().unwrap();
        assert_eq!(h, 0.1);
        assert_eq!(p.etas(), &[0.0, 1.0, 2.0]);
    }
}
