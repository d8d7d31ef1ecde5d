//! Fixtures shared by the solver benchmarks.

use roughmf::kernel::build_kernel;
use roughmf::{Complex64, FactorChoice, ModelParams, MultiFactorKernel};

/// The reference parameter set.
pub fn params() -> ModelParams {
    ModelParams::default()
}

/// `z = ½ + ib`.
pub fn lewis_point(b: f64) -> Complex64 {
    Complex64::new(0.5, b)
}

pub fn uniform_kernel(n: usize) -> MultiFactorKernel {
    build_kernel(FactorChoice::UniformOptimal, n, 0.1, 1.0)
        .expect("reference kernel")
        .kernel
}
