//! Two-sided Wilcoxon rank-sum and signed-rank tests.
//!
//! Small untied samples get exact null distributions by dynamic
//! programming over rank subsets (rank-sum) or sign patterns (signed-rank).
//! Everything else falls back to the normal approximation with continuity
//! and tie corrections.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::AnalysisError;

/// Largest pooled (rank-sum) or paired (signed-rank) size tested exactly.
pub const EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// Rank sum of the first sample, or the positive-rank sum.
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
    pub ties: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroMethod {
    /// Discard zero differences before ranking.
    #[default]
    Drop,
    /// Rank zeros with the rest, then discard them.
    Pratt,
}

/// Midranks (1-based) of `v`, and whether any ties occurred.
pub fn midranks(v: &[f64]) -> (Vec<f64>, bool) {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut ties = false;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && v[idx[j]] == v[idx[i]] {
            j += 1;
        }
        ties |= j - i > 1;
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    (ranks, ties)
}

fn two_sided(lower: f64, upper: f64) -> f64 {
    (2.0 * lower.min(upper)).min(1.0)
}

fn normal_p(stat: f64, mean: f64, var: f64) -> f64 {
    if !(var > 0.0) {
        return 1.0;
    }
    let diff = stat - mean;
    let corrected = (diff.abs() - 0.5).max(0.0);
    let z = corrected / var.sqrt();
    let tail = Normal::standard().sf(z);
    (2.0 * tail).min(1.0)
}

/// Counts of k-subsets of {1..n} by sum.
fn subset_sum_counts(n: usize, k: usize) -> Vec<f64> {
    let max = n * (n + 1) / 2;
    // dp[j][s]: j-subsets of the ranks seen so far summing to s.
    let mut dp = vec![vec![0.0f64; max + 1]; k + 1];
    dp[0][0] = 1.0;
    for r in 1..=n {
        for j in (1..=k.min(r)).rev() {
            for s in (r..=max).rev() {
                let add = dp[j - 1][s - r];
                if add != 0.0 {
                    dp[j][s] += add;
                }
            }
        }
    }
    dp.swap_remove(k)
}

pub fn rank_sum(x: &[f64], y: &[f64]) -> Result<TestResult, AnalysisError> {
    if x.is_empty() || y.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let (m, n) = (x.len(), y.len());
    let big_n = m + n;
    let w: f64 = ranks[..m].iter().sum();

    if !ties && big_n <= EXACT_LIMIT {
        let counts = subset_sum_counts(big_n, m);
        let total: f64 = counts.iter().sum();
        let w_int = w as usize;
        let lower: f64 = counts[..=w_int].iter().sum::<f64>() / total;
        let upper: f64 = counts[w_int..].iter().sum::<f64>() / total;
        return Ok(TestResult {
            statistic: w,
            p_value: two_sided(lower, upper),
            method: Method::Exact,
            ties,
        });
    }

    let nf = big_n as f64;
    let (mf, yf) = (m as f64, n as f64);
    let tie_term: f64 = tie_sizes(&pooled).map(|t| t * t * t - t).sum();
    let var = mf * yf / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    Ok(TestResult {
        statistic: w,
        p_value: normal_p(w, mf * (nf + 1.0) / 2.0, var),
        method: Method::Normal,
        ties,
    })
}

fn tie_sizes(v: &[f64]) -> impl Iterator<Item = f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let mut j = i + 1;
        while j < s.len() && s[j] == s[i] {
            j += 1;
        }
        if j - i > 1 {
            out.push((j - i) as f64);
        }
        i = j;
    }
    out.into_iter()
}

pub fn signed_rank(x: &[f64], y: &[f64], zeros: ZeroMethod) -> Result<TestResult, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::UnequalLength(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    if diffs.iter().all(|&d| d == 0.0) {
        return Err(AnalysisError::AllZeroDifferences);
    }
    let (kept, ranks, ties) = match zeros {
        ZeroMethod::Drop => {
            let kept: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
            let (r, t) = midranks(&kept.iter().map(|d| d.abs()).collect::<Vec<_>>());
            (kept, r, t)
        }
        ZeroMethod::Pratt => {
            let (r, t) = midranks(&diffs.iter().map(|d| d.abs()).collect::<Vec<_>>());
            let (k, r): (Vec<f64>, Vec<f64>) = diffs
                .iter()
                .zip(r)
                .filter(|(d, _)| **d != 0.0)
                .map(|(d, r)| (*d, r))
                .unzip();
            (k, r, t)
        }
    };
    let t_plus: f64 = kept
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let n = kept.len();

    if n <= EXACT_LIMIT {
        // Midranks are multiples of 1/2, so doubled ranks are integers.
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let max: usize = doubled.iter().sum();
        let mut counts = vec![0.0f64; max + 1];
        counts[0] = 1.0;
        let mut reach = 0;
        for &r in &doubled {
            for s in (0..=reach).rev() {
                let c = counts[s];
                if c != 0.0 {
                    counts[s + r] += c;
                }
            }
            reach += r;
        }
        let total = 2f64.powi(n as i32);
        let t2 = (2.0 * t_plus).round() as usize;
        let lower = counts[..=t2].iter().sum::<f64>() / total;
        let upper = counts[t2..].iter().sum::<f64>() / total;
        return Ok(TestResult {
            statistic: t_plus,
            p_value: two_sided(lower, upper),
            method: Method::Exact,
            ties,
        });
    }

    let mean = ranks.iter().sum::<f64>() / 2.0;
    let var = ranks.iter().map(|r| r * r).sum::<f64>() / 4.0;
    Ok(TestResult {
        statistic: t_plus,
        p_value: normal_p(t_plus, mean, var),
        method: Method::Normal,
        ties,
    })
}
