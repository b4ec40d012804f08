//! AUC, CC and KL between a ground-truth and a predicted element vector.

use crate::error::{shape_err, Error, Result};

/// Smoothing added to both sides of the KL ratio.
pub const KL_EPSILON: f64 = 1e-12;
const SUM_TOLERANCE: f64 = 1e-6;

fn check_pair(gt: &[f64], pred: &[f64]) -> Result<()> {
    if gt.len() != pred.len() {
        return Err(shape_err(format!(
            "gt has {} elements, prediction {}",
            gt.len(),
            pred.len()
        )));
    }
    if gt.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} element(s); metrics need at least 2",
            gt.len()
        )));
    }
    if gt.iter().chain(pred).any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite saliency value".into()));
    }
    Ok(())
}

/// Number of positives for `k` elements: `ceil(k / 5)`, the top 20 percent.
pub fn positive_count(k: usize) -> usize {
    k.div_ceil(5)
}

/// Positive mask: the `ceil(0.2·k)` largest ground-truth values, ties going
/// to the smaller id.
pub fn positive_mask(gt: &[f64], ids: &[u32]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..gt.len()).collect();
    order.sort_by(|&a, &b| gt[b].total_cmp(&gt[a]).then(ids[a].cmp(&ids[b])));
    let mut mask = vec![false; gt.len()];
    for &i in &order[..positive_count(gt.len())] {
        mask[i] = true;
    }
    mask
}

/// ROC area with positives from [`positive_mask`], using element positions
/// as ids.
pub fn auc(gt: &[f64], pred: &[f64]) -> Result<f64> {
    let ids: Vec<u32> = (0..gt.len() as u32).collect();
    auc_with_ids(gt, pred, &ids)
}

/// ROC area from a sweep over every distinct prediction value (plus the two
/// infinite thresholds), TPR against FPR, integrated by trapezoids. Tied
/// predictions move together, so a tie between a positive and a negative
/// contributes half a pair.
pub fn auc_with_ids(gt: &[f64], pred: &[f64], ids: &[u32]) -> Result<f64> {
    check_pair(gt, pred)?;
    if ids.len() != gt.len() {
        return Err(shape_err("one id per element"));
    }
    let positive = positive_mask(gt, ids);
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = gt.len() - n_pos;
    if n_neg == 0 {
        return Err(Error::InsufficientData("every element is positive".into()));
    }
    let mut order: Vec<usize> = (0..pred.len()).collect();
    order.sort_by(|&a, &b| pred[b].total_cmp(&pred[a]));

    // twice the trapezoid area in units of one (positive, negative) pair,
    // kept integral so the only rounding is the final division
    let (mut tp, mut fp) = (0u64, 0u64);
    let (mut prev_tp, mut prev_fp) = (0u64, 0u64);
    let mut area2 = 0u64;
    let mut i = 0;
    while i < order.len() {
        let threshold = pred[order[i]];
        while i < order.len() && pred[order[i]] == threshold {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += (fp - prev_fp) * (tp + prev_tp);
        prev_tp = tp;
        prev_fp = fp;
    }
    Ok(area2 as f64 / (2 * n_pos * n_neg) as f64)
}

/// Pearson correlation; `degenerate` marks a constant input, scored 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub value: f64,
    pub degenerate: bool,
}

pub fn cc(gt: &[f64], pred: &[f64]) -> Result<Correlation> {
    check_pair(gt, pred)?;
    let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
    if constant(gt) || constant(pred) {
        return Ok(Correlation {
            value: 0.0,
            degenerate: true,
        });
    }
    let n = gt.len() as f64;
    let mg = gt.iter().sum::<f64>() / n;
    let mp = pred.iter().sum::<f64>() / n;
    let (mut sgp, mut sgg, mut spp) = (0.0, 0.0, 0.0);
    for (g, p) in gt.iter().zip(pred) {
        let (dg, dp) = (g - mg, p - mp);
        sgp += dg * dp;
        sgg += dg * dg;
        spp += dp * dp;
    }
    Ok(Correlation {
        value: (sgp / (sgg.sqrt() * spp.sqrt())).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

fn check_distribution(name: &str, v: &[f64]) -> Result<()> {
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE || v.iter().any(|&x| x < 0.0) {
        return Err(Error::Invalid(format!(
            "{name} is not a probability vector (sum {total})"
        )));
    }
    Ok(())
}

/// `Σ gtⱼ · ln((gtⱼ + ε) / (predⱼ + ε))`.
pub fn kl(gt: &[f64], pred: &[f64]) -> Result<f64> {
    check_pair(gt, pred)?;
    check_distribution("ground truth", gt)?;
    check_distribution("prediction", pred)?;
    Ok(gt
        .iter()
        .zip(pred)
        .map(|(g, p)| g * ((g + KL_EPSILON) / (p + KL_EPSILON)).ln())
        .sum())
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(cc(&average_ranks(a), &average_ranks(b))?.value)
}
