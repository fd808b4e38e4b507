//! Expanding-window cross-validation, hold-out evaluation and the baseline.

use std::thread;

use serde::{Deserialize, Serialize};

use super::logreg::{baseline_features, fit_logreg, LogRegConfig};
use super::metrics::{classification_metrics, mean_std, roc_auc, roc_curve, ClassificationMetrics};
use super::split::{holdout_split, time_series_split, Fold, FoldPlan, DEFAULT_FOLDS};
use crate::error::{Error, Result};
use crate::model::{fit_window_pca, predict, train, ModelConfig, TrainConfig, Variant, WindowedSample};
use crate::reduce::PcaBasis;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub n_folds: usize,
    pub threshold: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            n_folds: DEFAULT_FOLDS,
            threshold: super::metrics::DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub logreg: LogRegConfig,
    /// Reduce embeddings with a per-fold PCA of this width; `None` keeps them raw.
    pub d_prime: Option<usize>,
    pub n_folds: usize,
    pub threshold: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            logreg: LogRegConfig::default(),
            d_prime: Some(crate::reduce::DEFAULT_D_PRIME),
            n_folds: DEFAULT_FOLDS,
            threshold: super::metrics::DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_range: (usize, usize),
    pub test_range: (usize, usize),
    pub train_anchors: (i32, i32),
    pub test_anchors: (i32, i32),
    /// `None` when the test block holds a single class.
    pub auc: Option<f64>,
    pub metrics: ClassificationMetrics,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
    pub pca: Option<PcaBasis>,
    pub best_epoch: Option<usize>,
    pub stopped_epoch: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn of(values: &[f64]) -> Option<Self> {
        mean_std(values).map(|(mean, std)| Self { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    /// Variant id or `logreg` for the baseline.
    pub label: String,
    pub folds: Vec<FoldResult>,
    pub auc: Option<MeanStd>,
    pub auc_undefined_folds: usize,
    pub accuracy: MeanStd,
    pub precision_weighted: MeanStd,
    pub recall_weighted: MeanStd,
    pub f1_weighted: MeanStd,
}

impl CvReport {
    fn assemble(label: &str, folds: Vec<FoldResult>) -> Result<Self> {
        let aucs: Vec<f64> = folds.iter().filter_map(|f| f.auc).collect();
        let undefined = folds.len() - aucs.len();
        if undefined > 0 {
            log::warn!("{label}: {undefined} fold(s) have a single-class test block; AUC excluded from the mean");
        }
        let stat = |f: fn(&ClassificationMetrics) -> f64| {
            let v: Vec<f64> = folds.iter().map(|r| f(&r.metrics)).collect();
            MeanStd::of(&v).ok_or_else(|| Error::InsufficientData("no folds".into()))
        };
        Ok(Self {
            label: label.to_string(),
            auc: MeanStd::of(&aucs),
            auc_undefined_folds: undefined,
            accuracy: stat(|m| m.accuracy)?,
            precision_weighted: stat(|m| m.precision_weighted)?,
            recall_weighted: stat(|m| m.recall_weighted)?,
            f1_weighted: stat(|m| m.f1_weighted)?,
            folds,
        })
    }

    pub fn mean_auc(&self) -> Option<f64> {
        self.auc.map(|a| a.mean)
    }
}

fn anchors(samples: &[WindowedSample]) -> (i32, i32) {
    (samples[0].anchor_year, samples[samples.len() - 1].anchor_year)
}

fn check_chronological(samples: &[WindowedSample]) -> Result<()> {
    if samples.windows(2).any(|w| w[0].anchor_year >= w[1].anchor_year) {
        return Err(Error::Precondition("samples must be in chronological order".into()));
    }
    Ok(())
}

fn score_fold(
    fold_idx: usize,
    fold: &Fold,
    samples: &[WindowedSample],
    scores: Vec<f64>,
    threshold: f64,
) -> Result<FoldResult> {
    let train_set = &samples[fold.train.clone()];
    let test_set = &samples[fold.test.clone()];
    let train_anchors = anchors(train_set);
    let test_anchors = anchors(test_set);
    if train_anchors.1 >= test_anchors.0 {
        return Err(Error::Precondition(format!(
            "fold {fold_idx} leaks: train ends at {} but test starts at {}",
            train_anchors.1, test_anchors.0
        )));
    }
    let labels: Vec<u8> = test_set.iter().map(|s| s.target).collect();
    let auc = match roc_auc(&scores, &labels) {
        Ok(a) => Some(a),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(FoldResult {
        fold: fold_idx,
        train_range: (fold.train.start, fold.train.end),
        test_range: (fold.test.start, fold.test.end),
        train_anchors,
        test_anchors,
        auc,
        metrics: classification_metrics(&scores, &labels, threshold)?,
        scores,
        labels,
        pca: None,
        best_epoch: None,
        stopped_epoch: None,
    })
}

/// Runs `job` for every fold on its own thread and returns results in fold order.
fn run_folds<F>(plan: &FoldPlan, job: F) -> Result<Vec<FoldResult>>
where
    F: Fn(usize, &Fold) -> Result<FoldResult> + Sync,
{
    thread::scope(|s| {
        let handles: Vec<_> = plan
            .folds
            .iter()
            .enumerate()
            .map(|(i, fold)| {
                let job = &job;
                s.spawn(move || job(i, fold))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Contract("fold worker panicked".into()))))
            .collect()
    })
}

/// Cross-validates one model variant. Each fold trains from scratch with seed
/// `train.seed + fold`, fitting its PCA basis on the fold's training windows.
pub fn run_cv(samples: &[WindowedSample], variant: Variant, config: &CvConfig) -> Result<CvReport> {
    check_chronological(samples)?;
    let plan = time_series_split(samples.len(), config.n_folds)?;
    let model = ModelConfig { variant, ..config.model };
    let folds = run_folds(&plan, |i, fold| {
        let train_cfg = TrainConfig { seed: config.train.seed.wrapping_add(i as u64), ..config.train };
        let outcome = train(&samples[fold.train.clone()], &model, &train_cfg)?;
        let scores = predict(&outcome.params, &samples[fold.test.clone()])?;
        let mut r = score_fold(i, fold, samples, scores, config.threshold)?;
        r.pca = outcome.params.pca;
        r.best_epoch = Some(outcome.best_epoch);
        r.stopped_epoch = Some(outcome.stopped_epoch);
        Ok(r)
    })?;
    CvReport::assemble(variant.as_str(), folds)
}

/// Logistic-regression baseline on the same fold plan.
pub fn run_baseline_cv(samples: &[WindowedSample], config: &BaselineConfig) -> Result<CvReport> {
    check_chronological(samples)?;
    let plan = time_series_split(samples.len(), config.n_folds)?;
    let folds = run_folds(&plan, |i, fold| {
        let train_set = &samples[fold.train.clone()];
        let pca = config.d_prime.map(|d| fit_window_pca(train_set, d)).transpose()?;
        let features = |set: &[WindowedSample]| {
            set.iter()
                .map(|s| baseline_features(s, pca.as_ref()))
                .collect::<Result<Vec<_>>>()
        };
        let labels: Vec<u8> = train_set.iter().map(|s| s.target).collect();
        let model = fit_logreg(&features(train_set)?, &labels, &config.logreg)?;
        let scores = features(&samples[fold.test.clone()])?
            .iter()
            .map(|x| model.predict(x))
            .collect();
        let mut r = score_fold(i, fold, samples, scores, config.threshold)?;
        r.pca = pca;
        Ok(r)
    })?;
    CvReport::assemble("logreg", folds)
}

/// Checks that every stored fold basis equals, bit for bit, a basis refitted
/// on that fold's training samples alone.
pub fn verify_fold_pca(samples: &[WindowedSample], report: &CvReport, d_prime: usize) -> Result<()> {
    for f in &report.folds {
        let train_set = &samples[f.train_range.0..f.train_range.1];
        if f.train_anchors.1 >= f.test_anchors.0 {
            return Err(Error::Precondition(format!("fold {} train/test anchors overlap", f.fold)));
        }
        if let Some(stored) = &f.pca {
            let refit = fit_window_pca(train_set, d_prime)?;
            let same = refit.mean.iter().zip(&stored.mean).all(|(a, b)| a.to_bits() == b.to_bits())
                && refit.components.shape() == stored.components.shape()
                && refit
                    .components
                    .as_slice()
                    .iter()
                    .zip(stored.components.as_slice())
                    .all(|(a, b)| a.to_bits() == b.to_bits());
            if !same {
                return Err(Error::Integrity(format!("fold {} PCA basis was not fitted on its training rows", f.fold)));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub label: String,
    pub train_count: usize,
    pub test_count: usize,
    pub auc: Option<f64>,
    pub metrics: ClassificationMetrics,
    pub roc: Vec<(f64, f64)>,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

/// Trains on the chronological head and scores the last `fraction` of samples.
pub fn holdout_eval(
    samples: &[WindowedSample],
    variant: Variant,
    config: &CvConfig,
    fraction: f64,
) -> Result<(HoldoutReport, crate::model::TrainOutcome)> {
    check_chronological(samples)?;
    let (train_set, test_set) = holdout_split(samples, fraction)?;
    let model = ModelConfig { variant, ..config.model };
    let outcome = train(train_set, &model, &config.train)?;
    let scores = predict(&outcome.params, test_set)?;
    let report = score_holdout(variant.as_str(), train_set.len(), test_set, scores, config.threshold)?;
    Ok((report, outcome))
}

/// Scores a fitted model's predictions on a test block.
pub fn score_holdout(
    label: &str,
    train_count: usize,
    test_set: &[WindowedSample],
    scores: Vec<f64>,
    threshold: f64,
) -> Result<HoldoutReport> {
    let labels: Vec<u8> = test_set.iter().map(|s| s.target).collect();
    let (auc, roc) = match roc_auc(&scores, &labels) {
        Ok(a) => (Some(a), roc_curve(&scores, &labels)?),
        Err(Error::UndefinedMetric(m)) => {
            log::warn!("hold-out AUC undefined: {m}");
            (None, Vec::new())
        }
        Err(e) => return Err(e),
    };
    Ok(HoldoutReport {
        label: label.to_string(),
        train_count,
        test_count: test_set.len(),
        auc,
        metrics: classification_metrics(&scores, &labels, threshold)?,
        roc,
        scores,
        labels,
    })
}
