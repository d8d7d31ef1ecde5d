//! Two-sample Kolmogorov-Smirnov statistic.

/// `sup_x |F_a(x) - F_b(x)|` for the empirical distributions of two samples.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic critical value `c(α)√((n+m)/(nm))` with `c(α) = √(-ln(α/2)/2)`.
pub fn ks_critical_value(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n * m) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples() {
        let a = [3.0, 1.0, 2.0];
        assert_eq!(ks_statistic(&a, &a), 0.0);
    }

    #[test]
    fn disjoint_samples() {
        assert_eq!(ks_statistic(&[1.0, 2.0], &[3.0, 4.0, 5.0]), 1.0);
    }

    #[test]
    fn hand_computed() {
        // F_a jumps at 1, 3; F_b at 2, 4: largest gap 1/2
        assert_eq!(ks_statistic(&[1.0, 3.0], &[2.0, 4.0]), 0.5);
        // ties count on both sides
        assert_eq!(ks_statistic(&[1.0, 2.0], &[1.0, 3.0]), 0.5);
    }

    #[test]
    fn critical_value_at_one_percent() {
        let c = ks_critical_value(10_000, 10_000, 0.01);
        assert!((c - 1.627_574 * (2e-4f64).sqrt()).abs() < 1e-6);
    }
}
