//! Small statistical helpers shared by the estimators and checks.

use serde::Serialize;

use crate::seed::Seed;

/// Normal quantile used for reported intervals.
pub const Z_99: f64 = 2.5758293035489004;

/// `sqrt(p (1 - p) / n)`.
pub fn binomial_se(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Half-width of the Dvoretzky-Kiefer-Wolfowitz band at level `1 - alpha`.
pub fn dkw_epsilon(n: u64, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// A binomial proportion with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub point: f64,
    pub stderr: f64,
    pub n: u64,
    pub successes: u64,
    /// Interval at `z` standard errors, clamped to `[0, 1]`.
    pub ci: (f64, f64),
    pub z: f64,
    pub seed: Seed,
}

impl Estimate {
    pub fn from_counts(successes: u64, n: u64, seed: Seed) -> Self {
        let point = if n == 0 { 0.0 } else { successes as f64 / n as f64 };
        let stderr = binomial_se(point, n);
        let z = Z_99;
        Estimate { point, stderr, n, successes, ci: ((point - z * stderr).max(0.0), (point + z * stderr).min(1.0)), z, seed }
    }

    /// Whether `value` lies within `k` standard errors, with a floor on the
    /// error for estimates at 0 or 1.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.point - value).abs() <= k * self.stderr.max(1.0 / self.n.max(1) as f64) + 1e-12
    }
}

/// Standard error of a difference of two independent estimates.
pub fn pooled_se(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

/// Total-variation distance between an empirical histogram and a reference
/// pmf, both indexed by value.
pub fn tv_distance(counts: &std::collections::BTreeMap<u128, u64>, reference: &[(u128, f64)]) -> f64 {
    let n: u64 = counts.values().sum();
    let mut keys: Vec<u128> = counts.keys().copied().chain(reference.iter().map(|a| a.0)).collect();
    keys.sort_unstable();
    keys.dedup();
    let p = |k: u128| reference.binary_search_by_key(&k, |a| a.0).map_or(0.0, |i| reference[i].1);
    0.5 * keys.iter().map(|&k| (counts.get(&k).copied().unwrap_or(0) as f64 / n as f64 - p(k)).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dkw_value() {
        assert!((dkw_epsilon(100_000, 0.01) - 0.005146).abs() < 1e-5);
    }

    #[test]
    fn estimate_basics() {
        let e = Estimate::from_counts(25, 100, Seed(0));
        assert_eq!(e.point, 0.25);
        assert!((e.stderr - (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-15);
        assert!(e.ci.0 >= 0.0 && e.ci.1 <= 1.0 && e.ci.0 <= e.point && e.point <= e.ci.1);
        assert!(e.agrees_with(0.3, 3.0));
        assert!(!e.agrees_with(0.5, 3.0));
    }
}
