//! Order-independent accumulation and interval estimation for Monte Carlo
//! runs: normal-approximation intervals for means, Clopper-Pearson for
//! small-count event probabilities, and small least-squares fits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF, Normal};

use crate::field::FieldSpec;

/// Commutative-monoid accumulator: merge order never changes the result.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct Accum {
    pub n: u64,
    pub sum: f64,
    pub sumsq: f64,
    pub censored: u64,
}

impl Accum {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sumsq += x * x;
    }

    pub fn push_censored(&mut self) {
        self.censored += 1;
    }

    pub fn merge(&self, other: &Accum) -> Accum {
        Accum {
            n: self.n + other.n,
            sum: self.sum + other.sum,
            sumsq: self.sumsq + other.sumsq,
            censored: self.censored + other.censored,
        }
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.sum / self.n as f64
        }
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        let n = self.n as f64;
        ((self.sumsq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Two-sided normal quantile for a confidence level in (0, 1).
pub fn z_quantile(level: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).unwrap();
    normal.inverse_cdf(0.5 + level / 2.0)
}

/// A mean estimate with provenance: what was estimated, from which field
/// stream, and how sure we are.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub estimate: f64,
    pub stderr: f64,
    pub replicates: u64,
    pub censored: u64,
    pub ci_level: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Set when censored replicates exceed 1% of the batch.
    pub biased: bool,
    pub field: FieldSpec,
    pub params: BTreeMap<String, String>,
}

impl EstimateRecord {
    pub fn from_accum(
        acc: &Accum,
        level: f64,
        field: FieldSpec,
        params: BTreeMap<String, String>,
    ) -> EstimateRecord {
        let z = z_quantile(level);
        let m = acc.mean();
        let se = acc.stderr();
        let total = acc.n + acc.censored;
        EstimateRecord {
            estimate: m,
            stderr: se,
            replicates: acc.n,
            censored: acc.censored,
            ci_level: level,
            ci_low: m - z * se,
            ci_high: m + z * se,
            biased: total > 0 && (acc.censored as f64) > 0.01 * total as f64,
            field,
            params,
        }
    }
}

/// Exact (Clopper-Pearson) binomial confidence interval for `k` successes in
/// `n` trials.
pub fn clopper_pearson(k: u64, n: u64, level: f64) -> (f64, f64) {
    assert!(n > 0 && k <= n);
    let alpha = 1.0 - level;
    let (kf, nf) = (k as f64, n as f64);
    let low = if k == 0 {
        0.0
    } else {
        Beta::new(kf, nf - kf + 1.0).unwrap().inverse_cdf(alpha / 2.0)
    };
    let high = if k == n {
        1.0
    } else {
        Beta::new(kf + 1.0, nf - kf)
            .unwrap()
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    (low, high)
}

/// Weighted least squares line fit `y = a + b x`. Returns
/// (intercept, slope, slope standard error, R²).
pub fn weighted_line_fit(points: &[(f64, f64, f64)]) -> Option<(f64, f64, f64, f64)> {
    if points.len() < 3 {
        return None;
    }
    let sw: f64 = points.iter().map(|p| p.2).sum();
    let sx: f64 = points.iter().map(|p| p.2 * p.0).sum();
    let sy: f64 = points.iter().map(|p| p.2 * p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.2 * p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.2 * p.0 * p.1).sum();
    let det = sw * sxx - sx * sx;
    if det <= 0.0 {
        return None;
    }
    let b = (sw * sxy - sx * sy) / det;
    let a = (sy - b * sx) / sw;
    let se_b = (sw / det).sqrt();
    let ybar = sy / sw;
    let ss_tot: f64 = points.iter().map(|p| p.2 * (p.1 - ybar).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| p.2 * (p.1 - a - b * p.0).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Some((a, b, se_b, r2))
}

/// Fit `p(t) = c * exp(-c' t^alpha)` to empirical tail points by grid search
/// over `alpha` with a log-scale line fit at each candidate. Returns
/// (c, c_prime, alpha, residual sum of squares in log space).
pub fn stretched_exp_fit(points: &[(f64, f64)]) -> Option<(f64, f64, f64, f64)> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, p)| *t > 0.0 && *p > 0.0)
        .cloned()
        .collect();
    if usable.len() < 3 {
        return None;
    }
    let mut best: Option<(f64, f64, f64, f64)> = None;
    let mut alpha = 0.1;
    while alpha <= 2.0 + 1e-9 {
        let pts: Vec<(f64, f64, f64)> = usable
            .iter()
            .map(|(t, p)| (t.powf(alpha), p.ln(), 1.0))
            .collect();
        if let Some((a, b, _, _)) = weighted_line_fit(&pts) {
            let rss: f64 = pts.iter().map(|p| (p.1 - a - b * p.0).powi(2)).sum();
            if best.map_or(true, |(_, _, _, r)| rss < r) {
                best = Some((a.exp(), -b, alpha, rss));
            }
        }
        alpha += 0.05;
    }
    best
}
