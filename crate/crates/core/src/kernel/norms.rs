//! L¹ and L² distances between an exponential-sum kernel and the fractional kernel.

use crate::error::Result;
use crate::quad::{integrate, Tolerance};
use crate::special::{gamma, lower_incomplete_gamma};

use super::{check_hurst, phi1, MultiFactorKernel};
use crate::error::invalid;

fn check(hurst: f64, horizon: f64) -> Result<()> {
    check_hurst(hurst)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return invalid(format!("horizon must be > 0, got {horizon}"));
    }
    Ok(())
}

/// `‖Kⁿ - K‖_{L²[0,T]}` from `∫(Kⁿ)² + ∫K² - 2∫KⁿK`, all in closed form.
///
/// When the three terms cancel to below `1e-8` of their size, the square is
/// recomputed by adaptive quadrature in `u = t^{2H}`.
pub fn l2_error(kernel: &MultiFactorKernel, hurst: f64, horizon: f64) -> Result<f64> {
    check(hurst, horizon)?;
    let t = horizon;
    let alpha = hurst + 0.5;
    let ga = gamma(alpha);
    let (c, g) = (kernel.weights(), kernel.rates());

    let mut kn2 = 0.0;
    for i in 0..c.len() {
        for j in 0..c.len() {
            kn2 += c[i] * c[j] * t * phi1((g[i] + g[j]) * t);
        }
    }
    let k2 = t.powf(2.0 * hurst) / (2.0 * hurst * ga * ga);
    let cross: f64 = c
        .iter()
        .zip(g)
        .map(|(ci, gi)| ci * lower_incomplete_gamma(alpha, gi * t) / gi.powf(alpha))
        .sum::<f64>()
        / ga;
    let sq = kn2 + k2 - 2.0 * cross;
    if sq > 1e-8 * (kn2 + k2) {
        return Ok(sq.sqrt());
    }
    l2_by_quadrature(kernel, hurst, horizon)
}

fn l2_by_quadrature(kernel: &MultiFactorKernel, hurst: f64, t: f64) -> Result<f64> {
    let ga = gamma(hurst + 0.5);
    // t = u^{1/(2H)} turns (Kⁿ-K)² dt into (t^{1/2-H}Kⁿ - 1/Γ(α))² du / (2H).
    let p = 2.0 * hurst;
    let tol = Tolerance {
        abs: 1e-30,
        rel: 1e-10,
        max_segments: 4000,
    };
    let q = integrate(
        |u: f64| {
            if u == 0.0 {
                return 1.0 / (ga * ga * p);
            }
            let s = u.powf(1.0 / p);
            let d = kernel.eval(s) * s.powf(0.5 - hurst) - 1.0 / ga;
            d * d / p
        },
        0.0,
        t.powf(p),
        tol,
    )?;
    Ok(q.value.max(0.0).sqrt())
}

/// `∫₀ᵀ |Kⁿ - K|`.
///
/// With `u = t^α` the fractional part becomes the constant `1/Γ(α+1)` and the
/// integrand is bounded. Sign changes of the difference are bracketed on a
/// mixed logarithmic/linear grid, refined by bisection, and each piece is
/// integrated adaptively.
pub fn l1_error(kernel: &MultiFactorKernel, hurst: f64, horizon: f64) -> Result<f64> {
    check(hurst, horizon)?;
    let alpha = hurst + 0.5;
    let level = 1.0 / gamma(alpha + 1.0);
    let upper = horizon.powf(alpha);
    if kernel.is_empty() {
        return Ok(upper * level);
    }
    let inv = 1.0 / alpha;
    let diff = |u: f64| {
        if u == 0.0 {
            return -level;
        }
        let t = u.powf(inv);
        kernel.eval(t) * u.powf(inv - 1.0) * inv - level
    };

    let mut grid: Vec<f64> = Vec::with_capacity(1202);
    grid.push(0.0);
    for i in 0..=600 {
        grid.push(upper * 10f64.powf(-14.0 + 14.0 * i as f64 / 600.0));
        grid.push(upper * i as f64 / 600.0);
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut breaks = vec![0.0];
    let mut prev_u = grid[0];
    let mut prev_d = diff(prev_u);
    for &u in &grid[1..] {
        let d = diff(u);
        if (d > 0.0) != (prev_d > 0.0) && d != 0.0 && prev_d != 0.0 {
            let (mut lo, mut hi) = (prev_u, u);
            let lo_sign = prev_d > 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if (diff(mid) > 0.0) == lo_sign {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            breaks.push(0.5 * (lo + hi));
        }
        prev_u = u;
        prev_d = d;
    }
    breaks.push(upper);

    let tol = Tolerance {
        abs: 1e-15,
        rel: 1e-12,
        max_segments: 4000,
    };
    let mut total = 0.0;
    for w in breaks.windows(2) {
        total += integrate(diff, w[0], w[1], tol)?.value.abs();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{optimal_step, uniform_partition, weights_from_partition, Partition};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn frac(h: f64, t: f64) -> f64 {
        t.powf(h - 0.5) / gamma(h + 0.5)
    }

    // Composite midpoint rule in t on [0, T] split at δ; on [0, δ] the
    // substitution t = δ v^m, m = 1/(2H), makes the integrand bounded.
    fn dense_oracle(k: &MultiFactorKernel, h: f64, t: f64, p: u32) -> f64 {
        let delta = 1e-3 * t;
        let n = 500_000;
        let m = 0.5 / h;
        let mut near = 0.0;
        for i in 0..n {
            let v = (i as f64 + 0.5) / n as f64;
            let s = delta * v.powf(m);
            let d = (k.eval(s) - frac(h, s)).abs().powi(p as i32);
            near += d * delta * m * v.powf(m - 1.0) / n as f64;
        }
        let mut far = 0.0;
        let step = (t - delta) / n as f64;
        for i in 0..n {
            let s = delta + (i as f64 + 0.5) * step;
            far += (k.eval(s) - frac(h, s)).abs().powi(p as i32) * step;
        }
        near + far
    }

    #[test]
    fn empty_kernel_norms() {
        let k = MultiFactorKernel::empty(Some(0.1));
        let l2 = l2_error(&k, 0.1, 2.0).unwrap();
        assert!(rel(l2, 2f64.powf(0.1) / ((0.2f64).sqrt() * gamma(0.6))) < 1e-14);
        let l1 = l1_error(&k, 0.1, 2.0).unwrap();
        assert!(rel(l1, 2f64.powf(0.6) / gamma(1.6)) < 1e-14);
    }

    #[test]
    fn norms_match_dense_oracle() {
        for (h, etas) in [
            (0.1, vec![0.0, 1.0, 5.0, 30.0]),
            (0.3, vec![0.0, 0.5, 2.0]),
            (0.45, vec![0.0, 10.0]),
        ] {
            let p = Partition::new(etas).unwrap();
            let k = weights_from_partition(h, &p).unwrap();
            let l2 = l2_error(&k, h, 1.0).unwrap();
            let want2 = dense_oracle(&k, h, 1.0, 2).sqrt();
            assert!(rel(l2, want2) < 1e-6, "h={h}: {l2} vs {want2}");
            let l1 = l1_error(&k, h, 1.0).unwrap();
            let want1 = dense_oracle(&k, h, 1.0, 1);
            assert!(rel(l1, want1) < 1e-6, "h={h}: {l1} vs {want1}");
        }
    }

    #[test]
    fn bounds_dominate_errors() {
        for h in [0.05, 0.1, 0.3] {
            for n in [1, 5, 20, 80] {
                let step = optimal_step(n, 1.0, h).unwrap();
                let p = uniform_partition(n, step).unwrap();
                let k = weights_from_partition(h, &p).unwrap();
                let l2 = l2_error(&k, h, 1.0).unwrap();
                let l1 = l1_error(&k, h, 1.0).unwrap();
                assert!(l2 <= crate::kernel::f2_bound(h, 1.0, &p).unwrap());
                assert!(l1 <= crate::kernel::f1_bound(h, 1.0, &p).unwrap());
            }
        }
    }

    #[test]
    fn quadrature_path_agrees_with_closed_form() {
        for (h, n) in [(0.1, 20), (0.3, 50), (0.45, 200)] {
            let step = optimal_step(n, 1.0, h).unwrap();
            let p = uniform_partition(n, step).unwrap();
            let k = weights_from_partition(h, &p).unwrap();
            let closed = l2_error(&k, h, 1.0).unwrap();
            let quad = l2_by_quadrature(&k, h, 1.0).unwrap();
            assert!(rel(quad, closed) < 1e-7, "h={h} n={n}: {quad} vs {closed}");
        }
    }
}
