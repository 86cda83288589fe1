//! Two-sample comparisons and resampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::AnalysisError;

/// Combined sample size up to which Mann–Whitney p-values are exact.
pub const EXACT_CUTOFF: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    pub p_value: f64,
    /// 1 - 2U / (n1 n2).
    pub rank_biserial: f64,
    pub exact: bool,
}

/// Midranks (1-based) of the pooled values, and the tie-group sizes.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Number of size-`k` subsets of {1..n} for each rank sum, via dynamic programming.
fn rank_sum_counts(n: usize, k: usize) -> Vec<f64> {
    let max_sum = n * (n + 1) / 2;
    // counts[j][s]: subsets of size j with sum s among the ranks seen so far
    let mut counts = vec![vec![0.0f64; max_sum + 1]; k + 1];
    counts[0][0] = 1.0;
    for r in 1..=n {
        for j in (1..=k.min(r)).rev() {
            for s in (r..=max_sum).rev() {
                counts[j][s] += counts[j - 1][s - r];
            }
        }
    }
    counts.swap_remove(k)
}

pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<MannWhitney, AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::EmptySample { needed: 1, got: a.len().min(b.len()) });
    }
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let r1: f64 = ranks[..n1].iter().sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    let nn = (n1 * n2) as f64;
    let rank_biserial = 1.0 - 2.0 * u / nn;
    let n = n1 + n2;
    let has_ties = ties.iter().any(|&t| t > 1);

    if n <= EXACT_CUTOFF && !has_ties {
        let counts = rank_sum_counts(n, n1);
        let total: f64 = counts.iter().sum();
        let offset = n1 * (n1 + 1) / 2;
        let u_obs = u.round() as usize;
        let (mut le, mut ge) = (0.0, 0.0);
        for (s, &c) in counts.iter().enumerate().skip(offset) {
            let us = s - offset;
            if us <= u_obs {
                le += c;
            }
            if us >= u_obs {
                ge += c;
            }
        }
        let p = (2.0 * le.min(ge) / total).min(1.0);
        return Ok(MannWhitney { u, p_value: p, rank_biserial, exact: true });
    }

    let mean = nn / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1)) as f64;
    let var = nn / 12.0 * ((n + 1) as f64 - tie_term);
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
        erfc(z / std::f64::consts::SQRT_2).min(1.0)
    };
    Ok(MannWhitney { u, p_value: p, rank_biserial, exact: false })
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// (mean(a) - mean(b)) / pooled standard deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, AnalysisError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(AnalysisError::EmptySample { needed: 2, got: a.len().min(b.len()) });
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let pooled = ((n1 - 1.0) * sample_variance(a) + (n2 - 1.0) * sample_variance(b)) / (n1 + n2 - 2.0);
    if pooled <= 0.0 {
        return Err(AnalysisError::ZeroVariance);
    }
    Ok((mean(a) - mean(b)) / pooled.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInterval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Linear-interpolated quantile of sorted data, q in [0, 1].
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap interval for the mean.
pub fn bootstrap_mean_ci(values: &[f64], resamples: usize, level: f64, seed: u64) -> Result<BootstrapInterval, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::EmptySample { needed: 1, got: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples.max(1))
        .map(|_| (0..values.len()).map(|_| values[rng.gen_range(0..values.len())]).sum::<f64>() / values.len() as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok(BootstrapInterval {
        estimate: mean(values),
        lower: quantile(&means, alpha),
        upper: quantile(&means, 1.0 - alpha),
    })
}
