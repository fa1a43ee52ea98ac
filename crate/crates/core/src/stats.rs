//! Sample moments, confidence intervals, and chunked deterministic reduction.

use serde::Serialize;

/// Two-sided 99% standard-normal critical value, Φ⁻¹(0.995).
pub const Z_99: f64 = 2.575_829_303_548_900_4;

/// A Monte Carlo or quadrature estimate with its uncertainty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EstimateWithCI {
    pub mean: f64,
    pub std_error: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl EstimateWithCI {
    pub fn new(mean: f64, std_error: f64, n_samples: u64, seed: u64) -> Self {
        let std_error = std_error.max(0.0);
        Self {
            mean,
            std_error,
            ci_lo: mean - Z_99 * std_error,
            ci_hi: mean + Z_99 * std_error,
            n_samples,
            seed,
        }
    }

    /// A deterministic value (quadrature or closed form) carrying its
    /// numerical error bound in place of a standard error.
    pub fn exact(mean: f64, abs_error: f64) -> Self {
        Self::new(mean, abs_error, 0, 0)
    }

    /// Whether `target` lies within `k` standard errors of the mean.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }
}

/// Running first and second moments of a pair of variables `(a, b)`.
///
/// Merging uses Chan's parallel update, so reducing chunks in a fixed order
/// gives results that do not depend on how the chunks were scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PairMoments {
    pub count: u64,
    pub mean_a: f64,
    pub mean_b: f64,
    m2_a: f64,
    m2_b: f64,
    co_ab: f64,
}

impl PairMoments {
    #[inline]
    pub fn push(&mut self, a: f64, b: f64) {
        self.count += 1;
        let n = self.count as f64;
        let da = a - self.mean_a;
        let db = b - self.mean_b;
        self.mean_a += da / n;
        self.mean_b += db / n;
        let da2 = a - self.mean_a;
        let db2 = b - self.mean_b;
        self.m2_a += da * da2;
        self.m2_b += db * db2;
        self.co_ab += da * db2;
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n1 = self.count as f64;
        let n2 = other.count as f64;
        let n = n1 + n2;
        let da = other.mean_a - self.mean_a;
        let db = other.mean_b - self.mean_b;
        self.mean_a += da * n2 / n;
        self.mean_b += db * n2 / n;
        self.m2_a += other.m2_a + da * da * n1 * n2 / n;
        self.m2_b += other.m2_b + db * db * n1 * n2 / n;
        self.co_ab += other.co_ab + da * db * n1 * n2 / n;
        self.count += other.count;
    }

    fn denom(&self) -> f64 {
        (self.count.max(2) - 1) as f64
    }

    pub fn var_a(&self) -> f64 {
        self.m2_a / self.denom()
    }

    pub fn var_b(&self) -> f64 {
        self.m2_b / self.denom()
    }

    pub fn cov_ab(&self) -> f64 {
        self.co_ab / self.denom()
    }

    pub fn se_a(&self) -> f64 {
        (self.var_a() / self.count as f64).sqrt()
    }

    pub fn se_b(&self) -> f64 {
        (self.var_b() / self.count as f64).sqrt()
    }

    /// Standard error of the paired difference `a - k·b`.
    pub fn se_diff(&self, k: f64) -> f64 {
        let var = self.var_a() + k * k * self.var_b() - 2.0 * k * self.cov_ab();
        (var.max(0.0) / self.count as f64).sqrt()
    }

    /// Ratio of means `E[a] / E[b]` and its delta-method standard error.
    pub fn ratio(&self) -> (f64, f64) {
        let r = self.mean_a / self.mean_b;
        let var = (self.var_a() + r * r * self.var_b() - 2.0 * r * self.cov_ab()) / (self.mean_b * self.mean_b);
        (r, (var.max(0.0) / self.count as f64).sqrt())
    }

    pub fn estimate_a(&self, seed: u64) -> EstimateWithCI {
        EstimateWithCI::new(self.mean_a, self.se_a(), self.count, seed)
    }

    pub fn estimate_b(&self, seed: u64) -> EstimateWithCI {
        EstimateWithCI::new(self.mean_b, self.se_b(), self.count, seed)
    }
}

/// Number of samples per deterministic work unit.
pub const CHUNK: u64 = 4096;

/// Evaluates `per_chunk(start, len)` over `0..n_samples` in parallel and
/// folds the per-chunk accumulators in chunk order.
pub fn chunked_reduce<A, F>(n_samples: u64, per_chunk: F) -> A
where
    A: Default + Send + Merge,
    F: Fn(u64, u64) -> A + Sync + Send,
{
    use rayon::prelude::*;
    let chunks = n_samples.div_ceil(CHUNK);
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            per_chunk(start, CHUNK.min(n_samples - start))
        })
        .collect();
    let mut acc = A::default();
    for part in &parts {
        acc.merge_from(part);
    }
    acc
}

pub trait Merge {
    fn merge_from(&mut self, other: &Self);
}

impl Merge for PairMoments {
    fn merge_from(&mut self, other: &Self) {
        self.merge(other)
    }
}

impl<T: Merge + Clone> Merge for Vec<T> {
    fn merge_from(&mut self, other: &Self) {
        if self.is_empty() {
            self.clone_from(other);
            return;
        }
        for (a, b) in self.iter_mut().zip(other) {
            a.merge_from(b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_single_pass() {
        let data: Vec<(f64, f64)> = (0..1000).map(|i| ((i as f64).sin(), (i as f64 * 0.3).cos() + 2.0)).collect();
        let mut whole = PairMoments::default();
        for &(a, b) in &data {
            whole.push(a, b);
        }
        let mut merged = PairMoments::default();
        for chunk in data.chunks(37) {
            let mut part = PairMoments::default();
            for &(a, b) in chunk {
                part.push(a, b);
            }
            merged.merge(&part);
        }
        assert_eq!(whole.count, merged.count);
        assert!((whole.mean_a - merged.mean_a).abs() < 1e-14);
        assert!((whole.var_b() - merged.var_b()).abs() < 1e-12);
        assert!((whole.cov_ab() - merged.cov_ab()).abs() < 1e-12);
    }

    #[test]
    fn ci_brackets_mean() {
        let e = EstimateWithCI::new(1.0, 0.1, 100, 3);
        assert!(e.ci_lo <= e.mean && e.mean <= e.ci_hi);
        assert!((e.ci_hi - e.ci_lo - 2.0 * Z_99 * 0.1).abs() < 1e-15);
    }
}
