//! Classification scoring and the Mann-Whitney U rank test.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Mean per-class recall over the classes present in `y_true`.
pub fn balanced_accuracy(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    let classes = y_true.iter().copied().max().map_or(0, |m| m + 1);
    recall_mean(y_true, y_pred, classes, false)
}

/// Mean per-class recall over classes `0..class_count`; every one of them
/// must occur in `y_true`.
pub fn balanced_accuracy_with_classes(y_true: &[usize], y_pred: &[usize], class_count: usize) -> Result<f64> {
    recall_mean(y_true, y_pred, class_count, true)
}

fn recall_mean(y_true: &[usize], y_pred: &[usize], classes: usize, require_all: bool) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(invalid(format!("{} labels but {} predictions", y_true.len(), y_pred.len())));
    }
    if y_true.is_empty() {
        return Err(invalid("no labels to score"));
    }
    let mut support = vec![0usize; classes];
    let mut hits = vec![0usize; classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= classes {
            return Err(invalid(format!("label {t} outside {classes} classes")));
        }
        support[t] += 1;
        hits[t] += usize::from(t == p);
    }
    if require_all {
        if let Some(c) = support.iter().position(|&s| s == 0) {
            return Err(invalid(format!("class {c} has no true samples")));
        }
    }
    let recalls: Vec<f64> = support
        .iter()
        .zip(&hits)
        .filter(|(&s, _)| s > 0)
        .map(|(&s, &h)| h as f64 / s as f64)
        .collect();
    Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// `U` of the first sample: pairs `(a_i, b_j)` with `a_i > b_j`, ties counting ½.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
}

/// Average ranks (1-based) of the pooled samples plus the tie term
/// `Σ (t³ − t)` over tie groups.
fn pooled_ranks(a: &[f64], b: &[f64]) -> (Vec<f64>, f64) {
    let mut pooled: Vec<(f64, usize)> = a.iter().chain(b).copied().zip(0..).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = 0.0;
    let mut start = 0;
    for group in pooled.chunk_by(|x, y| x.0 == y.0) {
        let t = group.len();
        let avg = start as f64 + (t as f64 + 1.0) / 2.0;
        for &(_, i) in group {
            ranks[i] = avg;
        }
        ties += (t * t * t - t) as f64;
        start += t;
    }
    (ranks, ties)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Two-sided Mann-Whitney U test.
///
/// The p-value uses the normal approximation with tie-corrected variance
/// and continuity correction, plus the Edgeworth kurtosis term of the U
/// distribution, which keeps small-sample p-values close to the exact
/// permutation values.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("both samples must be non-empty"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(invalid("samples must be finite"));
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let n = n1 + n2;
    let (ranks, ties) = pooled_ranks(a, b);
    let rank_sum: f64 = ranks[..a.len()].iter().sum();
    let u = rank_sum - n1 * (n1 + 1.0) / 2.0;

    let mean = n1 * n2 / 2.0;
    let var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if var <= 0.0 {
        return Ok(MannWhitney { u, p: 1.0 });
    }
    let sigma = var.sqrt();
    let z = -((u - mean).abs() - 0.5).max(0.0) / sigma;
    let kurtosis = -1.2 * (n1 * n1 + n2 * n2 + n1 * n2 + n1 + n2) / (n1 * n2 * (n + 1.0));
    let tail = normal_cdf(z) - normal_pdf(z) * kurtosis / 24.0 * (z * z * z - 3.0 * z);
    Ok(MannWhitney {
        u,
        p: (2.0 * tail).clamp(0.0, 1.0),
    })
}

/// Table-style significance marker: `***`, `**`, `*` for p below 0.01,
/// 0.05 and 0.1.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (divisor `n − 1`); 0 for fewer than two values.
pub fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}
