//! Regression and classification metrics for clickbait scores.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{ClassLabel, Judgment};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("need at least 2 examples, got {0}")]
    TooFew(usize),
    #[error("{preds} predictions for {truth} truth records")]
    LengthMismatch { preds: usize, truth: usize },
    #[error("threshold {0} must lie strictly between 0 and 1")]
    Threshold(f64),
}

/// How true binary labels are obtained for the classification metrics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TruthLabels {
    /// The truth file's class, which follows the median judgment.
    #[default]
    Class,
    /// `truthMean >= threshold`.
    MeanThreshold,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
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

    /// Zero when nothing is predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// Zero when no example is actually positive.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Confusion counts with clickbait as the positive class.
pub fn confusion(pred: &[ClassLabel], truth: &[ClassLabel]) -> Confusion {
    let mut c = Confusion::default();
    for (p, t) in pred.iter().zip(truth) {
        match (p.is_clickbait(), t.is_clickbait()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mse: f64,
    pub median_absolute_error: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub r2: f64,
    pub runtime_seconds: f64,
    /// Set when every truth mean is identical and R² is undefined (reported as 0).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub r2_undefined: bool,
}

/// Lower median: the smaller central value for even counts.
fn lower_median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

/// Scores predictions against truth means and labels.
///
/// A prediction counts as clickbait when `pred >= threshold`. `runtime_seconds`
/// is left at zero; callers that time the run fill it in.
pub fn evaluate(
    preds: &[f64],
    truth: &[Judgment],
    threshold: f64,
    labels: TruthLabels,
) -> Result<EvalReport, MetricsError> {
    if preds.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            preds: preds.len(),
            truth: truth.len(),
        });
    }
    if preds.len() < 2 {
        return Err(MetricsError::TooFew(preds.len()));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(MetricsError::Threshold(threshold));
    }
    let n = preds.len() as f64;
    let means: Vec<f64> = truth.iter().map(|j| j.mean).collect();
    let sq: Vec<f64> = preds
        .iter()
        .zip(&means)
        .map(|(p, m)| (p - m) * (p - m))
        .collect();
    let ss_res = sorted_sum(sq);
    let mse = ss_res / n;
    let medae = lower_median(
        preds
            .iter()
            .zip(&means)
            .map(|(p, m)| (p - m).abs())
            .collect(),
    );
    let avg = sorted_sum(means.clone()) / n;
    let ss_tot = sorted_sum(means.iter().map(|m| (m - avg) * (m - avg)).collect());
    let (r2, r2_undefined) = if ss_tot == 0.0 {
        (0.0, true)
    } else {
        (1.0 - ss_res / ss_tot, false)
    };

    let to_label = |b: bool| {
        if b {
            ClassLabel::Clickbait
        } else {
            ClassLabel::NoClickbait
        }
    };
    let pred_labels: Vec<ClassLabel> = preds.iter().map(|p| to_label(*p >= threshold)).collect();
    let true_labels: Vec<ClassLabel> = truth
        .iter()
        .map(|j| match labels {
            TruthLabels::Class => j.class_label,
            TruthLabels::MeanThreshold => to_label(j.mean >= threshold),
        })
        .collect();
    let c = confusion(&pred_labels, &true_labels);
    Ok(EvalReport {
        mse,
        median_absolute_error: medae,
        f1: c.f1(),
        precision: c.precision(),
        recall: c.recall(),
        accuracy: c.accuracy(),
        r2,
        runtime_seconds: 0.0,
        r2_undefined,
    })
}
