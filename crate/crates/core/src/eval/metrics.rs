use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

fn check_inputs(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::numeric("metrics", "NaN score"));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::Contract("labels must be 0 or 1".into()));
    }
    Ok(())
}

/// Area under the ROC curve in its Mann–Whitney form: the share of
/// (positive, negative) pairs ranked correctly, ties counting one half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l == 1).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Walk tied groups in ascending score order; every positive beats all
    // negatives seen in earlier groups and ties with negatives in its own.
    let mut neg_below = 0u64;
    let mut twice_numerator = 0u64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut p, mut n) = (0u64, 0u64);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] == 1 {
                p += 1;
            } else {
                n += 1;
            }
            j += 1;
        }
        twice_numerator += 2 * p * neg_below + p * n;
        neg_below += n;
        i = j;
    }
    Ok(twice_numerator as f64 / (2 * pos * neg) as f64)
}

/// ROC points `(fpr, tpr)` from (0,0) to (1,1), one per distinct score.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<(f64, f64)>> {
    check_inputs(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("ROC curve needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision_weighted: f64,
    pub recall_weighted: f64,
    pub f1_weighted: f64,
    pub confusion: Confusion,
    pub threshold: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Thresholded metrics (`score > threshold` is positive) with per-class
/// precision, recall and F1 averaged by class support.
pub fn classification_metrics(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ClassificationMetrics> {
    check_inputs(scores, labels)?;
    if labels.is_empty() {
        return Err(Error::InsufficientData("no samples to score".into()));
    }
    let mut c = Confusion { tp: 0, fp: 0, fn_: 0, tn: 0 };
    for (&s, &y) in scores.iter().zip(labels) {
        match (s > threshold, y == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    let n = labels.len() as f64;
    // (precision, recall, support) for the positive then the negative class
    let classes = [
        (ratio(c.tp, c.tp + c.fp), ratio(c.tp, c.tp + c.fn_), c.tp + c.fn_),
        (ratio(c.tn, c.tn + c.fn_), ratio(c.tn, c.tn + c.fp), c.tn + c.fp),
    ];
    let mut pw = 0.0;
    let mut rw = 0.0;
    let mut fw = 0.0;
    for (p, r, support) in classes {
        let w = support as f64 / n;
        let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        pw += w * p;
        rw += w * r;
        fw += w * f1;
    }
    Ok(ClassificationMetrics {
        accuracy: (c.tp + c.tn) as f64 / n,
        precision_weighted: pw,
        recall_weighted: rw,
        f1_weighted: fw,
        confusion: c,
        threshold,
    })
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}
