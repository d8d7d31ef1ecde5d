//! Input curves `g`, `gⁿ` and the characteristic function of the log-price.

use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::kernel::VolKernel;
use crate::params::ModelParams;
use crate::quad::gauss_legendre_16;
use crate::special::{mittag_leffler, rgamma};

use super::{
    solve_multifactor_riccati_with, AdamsSolver, MultiFactorOptions, MultiFactorScheme, RhsCoefficients,
    RiccatiSolution,
};

/// Which input curve feeds the variance equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GVariant {
    /// `g(t) = V₀ + ∫₀ᵗ K(t-s)θ(s)ds`.
    #[default]
    Standard,
    /// `g(t) = ∫₀ᵗ K(t-s)(V₀ s^{-H-1/2}/Γ(1/2-H) + θ(s))ds`.
    Shifted,
}

/// How the characteristic function exponent is assembled from `ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharFnForm {
    /// `exp ∫₀ᵀ F(z, ψ(T-s)) g(s) ds` with the standard `g`.
    #[default]
    FForm,
    /// `exp ∫₀ᵀ ψ(T-s)(V₀ s^{-H-1/2}/Γ(1/2-H) + θ(s)) ds`.
    PsiForm,
}

impl CharFnForm {
    pub fn as_str(&self) -> &'static str {
        match self {
            CharFnForm::FForm => "f_form",
            CharFnForm::PsiForm => "psi_form",
        }
    }
}

impl std::str::FromStr for CharFnForm {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f_form" | "F_form" | "f" => Ok(CharFnForm::FForm),
            "psi_form" | "psi" => Ok(CharFnForm::PsiForm),
            other => invalid(format!("unknown characteristic function form {other:?}")),
        }
    }
}

/// `∫₀ᵗ K(t-s) s^{-H-1/2}/Γ(1/2-H) ds`: 1 for the fractional kernel,
/// `Σ cᵢ t^{1/2-H} E_{1,3/2-H}(-γᵢt)` for an exponential sum.
fn shift_factor(params: &ModelParams, kernel: &VolKernel, t: f64) -> Result<f64> {
    match kernel {
        VolKernel::Fractional(_) => Ok(1.0),
        VolKernel::MultiFactor(k) => {
            let p = 0.5 - params.hurst;
            let mut s = 0.0;
            for (c, g) in k.weights().iter().zip(k.rates()) {
                s += c * t.powf(p) * mittag_leffler(1.0, 1.0 + p, -g * t)?;
            }
            Ok(s)
        }
    }
}

fn check_kernel(params: &ModelParams, kernel: &VolKernel) -> Result<()> {
    params.validate()?;
    if let VolKernel::Fractional(k) = kernel {
        if k.hurst() != params.hurst {
            return invalid(format!(
                "fractional kernel hurst {} differs from model hurst {}",
                k.hurst(),
                params.hurst
            ));
        }
    }
    Ok(())
}

/// Input curve of the variance equation at `t ∈ [0, T]`.
pub fn g_curve(params: &ModelParams, kernel: &VolKernel, variant: GVariant, t: f64) -> Result<f64> {
    check_kernel(params, kernel)?;
    if !(t >= 0.0 && t <= params.horizon * (1.0 + 1e-12)) {
        return domain(format!("g is defined on [0, {}], got t = {t}", params.horizon));
    }
    let drift = params.theta.convolve_with(|u| kernel.primitive(u), t);
    match variant {
        GVariant::Standard => Ok(params.v0 + drift),
        GVariant::Shifted => Ok(params.v0 * shift_factor(params, kernel, t)? + drift),
    }
}

/// Default number of grid doublings tried when the explicit fractional scheme
/// overflows at large `|Im z|`.
pub const DEFAULT_MAX_REFINEMENTS: usize = 4;

#[derive(Debug, Clone)]
enum Solver {
    Adams(AdamsSolver),
    MultiFactor(crate::kernel::MultiFactorKernel, MultiFactorScheme),
}

/// Finer fractional solver and its exponent weights, built on first use.
#[derive(Debug, Clone)]
struct Refinement {
    solver: AdamsSolver,
    weights: Vec<f64>,
}

/// Characteristic function evaluator for one model, kernel, grid and form.
///
/// The exponent is a fixed linear functional of the nodal values of `F(z, ψ)`
/// (or `ψ`) interpolated linearly between nodes, so its weights are computed
/// once and shared across `z`.
#[derive(Debug, Clone)]
pub struct CharFnEngine {
    params: ModelParams,
    solver: Solver,
    form: CharFnForm,
    weights: Vec<f64>,
    kernel: VolKernel,
    refinements: Vec<OnceLock<Refinement>>,
}

impl CharFnEngine {
    pub fn new(params: &ModelParams, kernel: &VolKernel, steps: usize, form: CharFnForm) -> Result<Self> {
        Self::with_scheme(params, kernel, steps, form, MultiFactorScheme::default())
    }

    pub fn with_scheme(
        params: &ModelParams,
        kernel: &VolKernel,
        steps: usize,
        form: CharFnForm,
        scheme: MultiFactorScheme,
    ) -> Result<Self> {
        check_kernel(params, kernel)?;
        let solver = match kernel {
            VolKernel::Fractional(_) => Solver::Adams(AdamsSolver::new(params.alpha(), params.horizon, steps)?),
            VolKernel::MultiFactor(k) => {
                super::check_steps(steps)?;
                Solver::MultiFactor(k.clone(), scheme)
            }
        };
        let weights = exponent_weights(params, kernel, steps, form)?;
        let refinements = match solver {
            Solver::Adams(_) => (0..DEFAULT_MAX_REFINEMENTS).map(|_| OnceLock::new()).collect(),
            Solver::MultiFactor(..) => Vec::new(),
        };
        Ok(Self {
            params: params.clone(),
            solver,
            form,
            weights,
            kernel: kernel.clone(),
            refinements,
        })
    }

    /// Replaces the fractional solver's corrector pass count.
    pub fn with_corrector_passes(mut self, passes: usize) -> Self {
        if let Solver::Adams(s) = self.solver {
            self.solver = Solver::Adams(s.with_corrector_passes(passes));
            self.refinements.iter_mut().for_each(|r| *r = OnceLock::new());
        }
        self
    }

    /// Caps how many times `eval` doubles the fractional grid when the
    /// solution overflows (0 disables refinement).
    pub fn with_max_refinements(mut self, levels: usize) -> Self {
        if let Solver::Adams(_) = self.solver {
            self.refinements = (0..levels).map(|_| OnceLock::new()).collect();
        }
        self
    }

    pub fn steps(&self) -> usize {
        self.weights.len() - 1
    }

    fn refinement(&self, level: usize) -> Result<&Refinement> {
        let Solver::Adams(base) = &self.solver else {
            unreachable!("only the fractional solver is refined")
        };
        if let Some(r) = self.refinements[level].get() {
            return Ok(r);
        }
        let steps = self.steps() << (level + 1);
        let solver = AdamsSolver::new(base.alpha(), base.horizon(), steps)?.with_corrector_passes(base.passes());
        let weights = exponent_weights(&self.params, &self.kernel, steps, self.form)?;
        Ok(self.refinements[level].get_or_init(|| Refinement { solver, weights }))
    }

    pub fn form(&self) -> CharFnForm {
        self.form
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn solve(&self, z: Complex64) -> Result<RiccatiSolution> {
        match &self.solver {
            Solver::Adams(s) => s.solve(&self.params, z),
            Solver::MultiFactor(k, scheme) => solve_multifactor_riccati_with(
                k,
                &self.params,
                z,
                self.weights.len() - 1,
                MultiFactorOptions {
                    scheme: *scheme,
                    keep_factors: false,
                },
            ),
        }
    }

    /// Exponent `log E[e^{z log(S_T/S₀)}]` from a solution on this engine's grid.
    pub fn exponent_from(&self, sol: &RiccatiSolution) -> Complex64 {
        self.exponent_with(&self.weights, sol)
    }

    fn exponent_with(&self, weights: &[f64], sol: &RiccatiSolution) -> Complex64 {
        let rhs = RhsCoefficients::new(sol.z, &self.params);
        let mut acc = Complex64::new(0.0, 0.0);
        for (w, p) in weights.iter().zip(&sol.psi) {
            let x = match self.form {
                CharFnForm::FForm => rhs.eval(*p),
                CharFnForm::PsiForm => *p,
            };
            acc += w * x;
        }
        acc
    }

    /// Log of the characteristic function. If the explicit fractional scheme
    /// overflows, the grid is doubled until the solution stays finite.
    pub fn log_eval(&self, z: Complex64) -> Result<Complex64> {
        let sol = self.solve(z)?;
        if is_finite(&sol) {
            return Ok(self.exponent_from(&sol));
        }
        for level in 0..self.refinements.len() {
            let r = self.refinement(level)?;
            let sol = r.solver.solve(&self.params, z)?;
            if is_finite(&sol) {
                return Ok(self.exponent_with(&r.weights, &sol));
            }
        }
        Err(Error::Numerical {
            what: "Riccati solver",
            detail: format!(
                "solution overflowed at z = {z} with {} steps and {} grid doublings",
                self.steps(),
                self.refinements.len()
            ),
        })
    }

    /// `E[exp(z log(S_T/S₀))]`.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.log_eval(z)?.exp())
    }

    /// Evaluates many `z` in parallel.
    pub fn eval_batch(&self, zs: &[Complex64]) -> Result<Vec<Complex64>> {
        zs.par_iter().map(|z| self.eval(*z)).collect()
    }
}

fn is_finite(sol: &RiccatiSolution) -> bool {
    sol.psi.iter().all(|p| p.re.is_finite() && p.im.is_finite())
}

/// Characteristic function at a single `z`.
pub fn char_fn(
    params: &ModelParams,
    kernel: &VolKernel,
    z: Complex64,
    steps: usize,
    form: CharFnForm,
) -> Result<Complex64> {
    CharFnEngine::new(params, kernel, steps, form)?.eval(z)
}

/// `Wⱼ = ∫₀ᵀ hatⱼ(t) w(T-t) dt` for the hat functions of the uniform grid, with
/// `w` the standard `g` (F form) or `V₀s^{-H-1/2}/Γ(1/2-H) + θ(s)` (ψ form).
///
/// In the ψ form with the fractional kernel, `ψ(t) ∝ t^α` near 0, so the
/// first cell interpolates in `t^α` instead of `t`.
fn exponent_weights(params: &ModelParams, kernel: &VolKernel, steps: usize, form: CharFnForm) -> Result<Vec<f64>> {
    let horizon = params.horizon;
    let dt = horizon / steps as f64;
    let mut weights = vec![0.0; steps + 1];
    let power_start =
        form == CharFnForm::PsiForm && matches!(kernel, VolKernel::Fractional(_)) && !params.classical && steps > 1;
    let alpha = params.alpha();

    // θ breakpoints in t = T - s, to keep quadrature panels smooth
    let breaks: Vec<f64> = params
        .theta
        .pieces()
        .iter()
        .map(|p| horizon - p.0)
        .filter(|t| *t > 0.0 && *t < horizon)
        .collect();

    let singular = form == CharFnForm::PsiForm && params.v0 != 0.0 && !params.classical;
    let beta = params.hurst + 0.5;
    let singular_scale = if singular {
        params.v0 * rgamma(0.5 - params.hurst)
    } else {
        0.0
    };
    let input = |s: f64| -> f64 {
        match form {
            CharFnForm::FForm => params.v0 + params.theta.convolve_with(|u| kernel.primitive(u), s),
            CharFnForm::PsiForm => params.theta.value(s),
        }
    };

    for k in 0..steps {
        let t0 = k as f64 * dt;
        let t1 = if k + 1 == steps { horizon } else { (k + 1) as f64 * dt };
        let last = k + 1 == steps;
        let right = |t: f64| {
            if k == 0 && power_start {
                (t / t1).powf(alpha)
            } else {
                (t - t0) / (t1 - t0)
            }
        };
        let mut panels = vec![t0];
        panels.extend(breaks.iter().copied().filter(|b| *b > t0 && *b < t1));
        if last {
            // g behaves like s^α near s = 0
            panels.extend((1..=24).map(|e| t1 - (t1 - t0) * 0.25f64.powi(e)));
        }
        if k == 0 && power_start {
            panels.extend((1..=24).map(|e| t1 * 0.25f64.powi(e)));
        }
        panels.sort_by(f64::total_cmp);
        panels.push(t1);
        // the singular part of the ψ-form input has closed-form moments on the last cell
        let w = |t: f64| {
            let s = horizon - t;
            let mut v = input(s);
            if singular && !last {
                v += singular_scale * s.powf(-beta);
            }
            v
        };
        for p in panels.windows(2) {
            weights[k] += gauss_legendre_16(|t| (1.0 - right(t)) * w(t), p[0], p[1]);
            weights[k + 1] += gauss_legendre_16(|t| right(t) * w(t), p[0], p[1]);
        }
        if singular && last {
            // s ∈ [0, h]: ∫ s^{-β}(h-s)/h and ∫ s^{-β} s/h
            let h = t1 - t0;
            let hp = h.powf(1.0 - beta);
            weights[k] += singular_scale * hp / (2.0 - beta);
            weights[k + 1] += singular_scale * hp / ((1.0 - beta) * (2.0 - beta));
        }
    }

    if form == CharFnForm::PsiForm && params.v0 != 0.0 && params.classical {
        // the shifted input collapses to V₀ at s = 0, i.e. t = T
        weights[steps] += params.v0;
    }
    Ok(weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{optimal_step, uniform_partition, weights_from_partition, FractionalKernel};
    use crate::params::ThetaCurve;
    use crate::quad::{integrate, Tolerance};
    use crate::special::gamma;

    fn frac(p: &ModelParams) -> VolKernel {
        VolKernel::Fractional(FractionalKernel::new(p.hurst).unwrap())
    }

    fn multi(n: usize) -> VolKernel {
        let part = uniform_partition(n, optimal_step(n, 1.0, 0.1).unwrap()).unwrap();
        VolKernel::MultiFactor(weights_from_partition(0.1, &part).unwrap())
    }

    #[test]
    fn g_curve_examples() {
        let p0 = ModelParams {
            theta: ThetaCurve::Constant(0.0),
            ..ModelParams::default()
        };
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(g_curve(&p0, &frac(&p0), GVariant::Standard, t).unwrap(), 0.02);
        }
        let p = ModelParams::default();
        let got = g_curve(&p, &frac(&p), GVariant::Standard, 1.0).unwrap();
        assert!((got - (0.02 + 0.02 / gamma(1.6))).abs() < 1e-15);
        assert!(g_curve(&p, &frac(&p), GVariant::Standard, 1.5).is_err());
    }

    #[test]
    fn shifted_fractional_input_is_flat() {
        // Beta identity by quadrature: ∫₀ᵗ K(t-s) s^{-H-1/2} ds / Γ(1/2-H) = 1
        let h = 0.1f64;
        let t = 0.7f64;
        // split at t/2 and remove both endpoint singularities with power substitutions
        let f = |s: f64| (t - s).powf(h - 0.5) * s.powf(-h - 0.5);
        let tol = Tolerance {
            abs: 0.0,
            rel: 1e-12,
            max_segments: 4000,
        };
        let left = integrate(
            |u: f64| {
                let s = u.powf(1.0 / (0.5 - h));
                f(s) * s.powf(h + 0.5) / (0.5 - h)
            },
            0.0,
            (t / 2.0).powf(0.5 - h),
            tol,
        )
        .unwrap()
        .value;
        let right = integrate(
            |u: f64| {
                let s = t - u.powf(1.0 / (h + 0.5));
                f(s) * (t - s).powf(0.5 - h) / (h + 0.5)
            },
            0.0,
            (t / 2.0).powf(h + 0.5),
            tol,
        )
        .unwrap()
        .value;
        let identity = (left + right) / (gamma(h + 0.5) * gamma(0.5 - h));
        assert!((identity - 1.0).abs() < 1e-10);

        let p0 = ModelParams {
            theta: ThetaCurve::Constant(0.0),
            ..ModelParams::default()
        };
        assert_eq!(g_curve(&p0, &frac(&p0), GVariant::Shifted, t).unwrap(), 0.02);
    }

    #[test]
    fn shifted_multifactor_input_matches_quadrature() {
        let p = ModelParams {
            theta: ThetaCurve::Constant(0.0),
            ..ModelParams::default()
        };
        let k = multi(5);
        let VolKernel::MultiFactor(mk) = &k else { unreachable!() };
        let t = 0.8f64;
        let pw = 0.5 - p.hurst;
        let tol = Tolerance {
            abs: 0.0,
            rel: 1e-12,
            max_segments: 4000,
        };
        // s = u^{1/(1/2-H)} removes the singularity at 0
        let q = integrate(
            |u: f64| {
                let s = u.powf(1.0 / pw);
                mk.eval(t - s) / pw
            },
            0.0,
            t.powf(pw),
            tol,
        )
        .unwrap()
        .value
            / gamma(pw);
        let got = g_curve(&p, &k, GVariant::Shifted, t).unwrap();
        assert!((got - p.v0 * q).abs() < 1e-12, "{got} vs {}", p.v0 * q);
    }

    #[test]
    fn identities_at_zero_and_one() {
        let p = ModelParams::default();
        for kernel in [frac(&p), multi(20)] {
            for form in [CharFnForm::FForm, CharFnForm::PsiForm] {
                for z in [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)] {
                    let v = char_fn(&p, &kernel, z, 100, form).unwrap();
                    assert!((v - 1.0).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn exponent_weights_integrate_input_curves() {
        let p = ModelParams::default();
        let kernel = frac(&p);
        let steps = 50;
        // Σ W_j · 1 = ∫₀ᵀ g; standard g = V₀ + θ s^α/Γ(α+1)
        let w = exponent_weights(&p, &kernel, steps, CharFnForm::FForm).unwrap();
        let total: f64 = w.iter().sum();
        let want = 0.02 + 0.02 / gamma(2.6);
        assert!((total - want).abs() < 1e-12, "{}", total - want);
        // ψ form: ∫₀ᵀ V₀ s^{-β}/Γ(1/2-H) + θ = V₀ T^{1/2-H}/Γ(3/2-H) + θ T
        let w = exponent_weights(&p, &kernel, steps, CharFnForm::PsiForm).unwrap();
        let total: f64 = w.iter().sum();
        let want = 0.02 / gamma(1.4) + 0.02;
        assert!((total - want).abs() < 1e-12);
        // ψ(t) = t^α is reproduced on the first cell: ∫₀¹ t^α w(1-t) dt = V₀Γ(α+1)/Γ(2) + θ/(α+1)
        let grid = super::super::uniform_grid(1.0, steps);
        let want = 0.02 * gamma(1.6) + 0.02 / 1.6;
        let err_power = (w.iter().zip(&grid).map(|(wi, t)| wi * t.powf(0.6)).sum::<f64>() - want).abs();
        let linear = exponent_weights(&p, &multi(5), steps, CharFnForm::PsiForm).unwrap();
        let err_linear = (linear.iter().zip(&grid).map(|(wi, t)| wi * t.powf(0.6)).sum::<f64>() - want).abs();
        assert!(err_power < 0.5 * err_linear, "{err_power} vs {err_linear}");
        // linear hats integrate t exactly: ∫₀¹ t (V₀(1-t)^{-β}/Γ(1/2-H) + θ) dt
        let m1: f64 = linear.iter().zip(&grid).map(|(wi, t)| wi * t).sum();
        let want = 0.02 / gamma(2.4) + 0.01;
        assert!((m1 - want).abs() < 1e-12);
    }

    #[test]
    fn piecewise_theta_weights() {
        let p = ModelParams {
            theta: ThetaCurve::Piecewise {
                breaks: vec![0.0, 0.33],
                values: vec![0.01, 0.05],
            },
            v0: 0.0,
            ..ModelParams::default()
        };
        let w = exponent_weights(&p, &frac(&p), 10, CharFnForm::PsiForm).unwrap();
        let total: f64 = w.iter().sum();
        assert!((total - (0.33 * 0.01 + 0.67 * 0.05)).abs() < 1e-14);
    }

    #[test]
    fn overflow_triggers_grid_refinement() {
        let p = ModelParams::default();
        let z = Complex64::new(0.5, 200.0);
        let coarse = CharFnEngine::new(&p, &frac(&p), 200, CharFnForm::FForm).unwrap();
        assert!(!is_finite(&coarse.solve(z).unwrap()));
        // same value as the first doubled grid that stays finite
        let fine = [400, 800, 1600, 3200]
            .into_iter()
            .map(|steps| CharFnEngine::new(&p, &frac(&p), steps, CharFnForm::FForm).unwrap())
            .find(|e| is_finite(&e.solve(z).unwrap()))
            .unwrap();
        let got = coarse.eval(z).unwrap();
        let want = fine.eval(z).unwrap();
        assert!((got - want).norm() <= 1e-15 * want.norm(), "{got} vs {want}");
        assert!(got.norm() < 1e-6);
        let capped = coarse.with_max_refinements(0);
        assert!(matches!(capped.eval(z), Err(Error::Numerical { .. })));
    }

    #[test]
    fn conjugate_symmetry() {
        let p = ModelParams::default();
        for kernel in [frac(&p), multi(20)] {
            let e = CharFnEngine::new(&p, &kernel, 100, CharFnForm::FForm).unwrap();
            let z = Complex64::new(0.3, 4.0);
            let a = e.eval(z).unwrap();
            let b = e.eval(z.conj()).unwrap();
            assert!((a - b.conj()).norm() < 1e-14);
        }
    }
}
