//! Plot-ready report files.

use serde::Serialize;

use super::cv::{CvReport, MeanStd};
use crate::error::Result;

pub const CV_HEADER: &str = "variant,fold,auc,accuracy,precision_w,recall_w,f1_w";

/// One row per fold and variant; an undefined AUC is left empty.
pub fn cv_csv(reports: &[CvReport]) -> String {
    let mut s = format!("{CV_HEADER}\n");
    for r in reports {
        for f in &r.folds {
            let auc = f.auc.map(|a| a.to_string()).unwrap_or_default();
            let m = &f.metrics;
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.label, f.fold, auc, m.accuracy, m.precision_weighted, m.recall_weighted, m.f1_weighted
            ));
        }
    }
    s
}

#[derive(Serialize)]
struct VariantSummary<'a> {
    variant: &'a str,
    folds: usize,
    auc: Option<MeanStd>,
    auc_undefined_folds: usize,
    accuracy: MeanStd,
    precision_w: MeanStd,
    recall_w: MeanStd,
    f1_w: MeanStd,
}

/// JSON summary with mean ± std per variant.
pub fn summary_json(reports: &[CvReport]) -> Result<String> {
    let rows: Vec<VariantSummary> = reports
        .iter()
        .map(|r| VariantSummary {
            variant: &r.label,
            folds: r.folds.len(),
            auc: r.auc,
            auc_undefined_folds: r.auc_undefined_folds,
            accuracy: r.accuracy,
            precision_w: r.precision_weighted,
            recall_w: r.recall_weighted,
            f1_w: r.f1_weighted,
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&rows)?;
    s.push('\n');
    Ok(s)
}

pub fn roc_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("fpr,tpr\n");
    for (f, t) in points {
        s.push_str(&format!("{f},{t}\n"));
    }
    s
}

/// Parses a CV CSV back into `(variant, fold, auc)` rows.
pub fn read_cv_csv(text: &str) -> Result<Vec<(String, usize, Option<f64>)>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse_err = |m: String| crate::Error::Parse { line: rec.position().map_or(0, |p| p.line() as usize), message: m };
        let fold = rec[1].parse().map_err(|e| parse_err(format!("fold: {e}")))?;
        let auc = if rec[2].is_empty() {
            None
        } else {
            Some(rec[2].parse().map_err(|e| parse_err(format!("auc: {e}")))?)
        };
        out.push((rec[0].to_string(), fold, auc));
    }
    Ok(out)
}
