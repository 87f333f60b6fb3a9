//! Forecasting and classification metrics: normalized RMSE, ROC/AUC,
//! precision-recall curves, and fixed-threshold accuracy.

use std::fmt::Write as _;

use crate::error::CoreError;
use crate::fmt_real;

/// RMSE divided by the range of the actual values. Returns 0 when the
/// prediction matches exactly; a constant actual vector with differing
/// predictions has no defined normalization and is an error.
pub fn normalized_rmse(predicted: &[f64], actual: &[f64]) -> Result<f64, CoreError> {
    if predicted.len() != actual.len() || actual.is_empty() {
        return Err(CoreError::BadMetricInput(format!(
            "length mismatch: {} predicted vs {} actual",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted == actual {
        return Ok(0.0);
    }
    let mse = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum::<f64>()
        / actual.len() as f64;
    let rmse = mse.sqrt();
    let min = actual.iter().copied().fold(f64::INFINITY, f64::min);
    let max = actual.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if range == 0.0 {
        return Err(CoreError::ConstantActual);
    }
    Ok(rmse / range)
}

/// AUC as the Mann-Whitney statistic, P(score_pos > score_neg) plus half
/// credit for ties, computed by sorting; the ROC points come from a
/// threshold sweep over distinct scores (tie groups emitted atomically),
/// starting at (0,0) and ending at (1,1).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<(f64, Vec<(f64, f64)>), CoreError> {
    check_two_classes(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;

    // Rank-sum with midranks for tie groups.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; a tie group [i, j) shares the average rank.
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let auc = (rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);

    // Threshold sweep from the highest score down.
    let mut points = vec![(0.0, 0.0)];
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut i = order.len();
    while i > 0 {
        let mut j = i;
        while j > 0 && scores[order[j - 1]] == scores[order[i - 1]] {
            j -= 1;
        }
        for &idx in &order[j..i] {
            if labels[idx] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
        }
        points.push((fp / n_neg, tp / n_pos));
        i = j;
    }
    Ok((auc, points))
}

/// Precision-recall points, one per distinct threshold (descending); the
/// final point reaches recall 1 at the lowest threshold.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>, CoreError> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(CoreError::BadMetricInput("empty or mismatched input".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    if n_pos == 0.0 {
        return Err(CoreError::BadMetricInput("no positive labels".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let mut points = Vec::new();
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        for &idx in &order[i..j] {
            if labels[idx] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
        }
        points.push((tp / n_pos, tp / (tp + fp)));
        i = j;
    }
    Ok(points)
}

/// Fraction of labels matching `score >= threshold`.
pub fn accuracy_at(scores: &[f64], labels: &[bool], threshold: f64) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(s, &l)| (**s >= threshold) == l)
        .count();
    correct as f64 / scores.len() as f64
}

fn check_two_classes(scores: &[f64], labels: &[bool]) -> Result<(), CoreError> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(CoreError::BadMetricInput("empty or mismatched input".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 || pos == labels.len() {
        return Err(CoreError::SingleClass);
    }
    Ok(())
}

/// Classification + forecasting report for one feature set.
#[derive(Debug, Clone)]
pub struct EvalReport {
    /// Per-feature normalized RMSE of the forecasts; `None` marks an
    /// undefined normalization (constant actual with differing predictions).
    pub nrmse: Vec<(String, Option<f64>)>,
    pub accuracy: f64,
    pub auc: f64,
    pub roc_points: Vec<(f64, f64)>,
    pub pr_points: Vec<(f64, f64)>,
    pub threshold: f64,
}

impl EvalReport {
    /// Flat key-value rendering used for the on-disk report.
    pub fn to_key_value_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "auc = {}", fmt_real(self.auc));
        let _ = writeln!(s, "accuracy = {}", fmt_real(self.accuracy));
        let _ = writeln!(s, "threshold = {}", fmt_real(self.threshold));
        for (name, v) in &self.nrmse {
            match v {
                Some(v) => {
                    let _ = writeln!(s, "nrmse_{name} = {}", fmt_real(*v));
                }
                None => {
                    let _ = writeln!(s, "nrmse_{name} = undefined");
                }
            }
        }
        s
    }

    pub fn roc_csv(&self) -> String {
        let mut s = String::from("fpr,tpr\n");
        for (fpr, tpr) in &self.roc_points {
            let _ = writeln!(s, "{},{}", fmt_real(*fpr), fmt_real(*tpr));
        }
        s
    }

    pub fn pr_csv(&self) -> String {
        let mut s = String::from("recall,precision\n");
        for (recall, precision) in &self.pr_points {
            let _ = writeln!(s, "{},{}", fmt_real(*recall), fmt_real(*precision));
        }
        s
    }
}
