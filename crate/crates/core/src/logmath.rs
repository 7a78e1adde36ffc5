//! Log-space arithmetic.

/// `log(sum(exp(x)))`, stable for large magnitudes. Empty or all `-inf`
/// input yields `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// Cumulative table of `ln(k!)` for `k = 0..=n`.
#[derive(Debug, Clone)]
pub struct LogFactorials(Vec<f64>);

impl LogFactorials {
    pub fn up_to(n: usize) -> Self {
        let mut t = Vec::with_capacity(n + 1);
        t.push(0.0);
        let mut acc = 0.0;
        for k in 1..=n {
            acc += (k as f64).ln();
            t.push(acc);
        }
        LogFactorials(t)
    }

    #[inline]
    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }
}

/// Two log-probabilities tie when they differ by at most
/// `1e-9 * max(1, |a|, |b|)`.
#[inline]
pub fn log_ties(a: f64, b: f64) -> bool {
    if a == b {
        return true;
    }
    let scale = 1f64.max(a.abs()).max(b.abs());
    (a - b).abs() <= 1e-9 * scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_basic() {
        let v = log_sum_exp(&[0.5f64.ln(), 0.25f64.ln(), 0.25f64.ln()]);
        assert!(v.abs() < 1e-15);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        let big = log_sum_exp(&[1000.0, 1000.0]);
        assert!((big - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn log_factorial_table() {
        let t = LogFactorials::up_to(200);
        assert_eq!(t.get(0), 0.0);
        assert!((t.get(5) - 120f64.ln()).abs() < 1e-12);
        // 170! is the largest factorial representable in f64.
        assert!(t.get(171).is_finite());
    }

    #[test]
    fn tie_tolerance() {
        assert!(log_ties(-2.0, -2.0 - 1e-12));
        assert!(!log_ties(-2.0, -2.0 - 1e-6));
        assert!(log_ties(-1e6, -1e6 - 1e-4));
    }
}
