//! Evaluation: relationship-sequence collapse, edit distance, per-state and
//! change-detection precision/recall/F, cross-validation and synthetic data.

mod cv;
pub mod synth;

pub use cv::{cross_validate, CvConfig, FoldResult, MetricsReport, RestartResult, Summary};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot collapse an empty state sequence")]
    EmptyInput,
    #[error("gold has {gold} entries but prediction has {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("state {0} out of range")]
    InvalidState(usize),
    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Merges runs of equal adjacent states.
pub fn collapse<T: PartialEq + Clone>(states: &[T]) -> Result<Vec<T>> {
    if states.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut out: Vec<T> = Vec::with_capacity(states.len());
    for s in states {
        if out.last() != Some(s) {
            out.push(s.clone());
        }
    }
    Ok(out)
}

/// Levenshtein distance with unit insertion, deletion and substitution costs.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn quotient(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Prf {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Prf {
        let precision = quotient(tp, tp + fp);
        let recall = quotient(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }

    /// Component-wise arithmetic mean.
    pub fn mean(items: &[Prf]) -> Prf {
        let n = items.len().max(1) as f64;
        Prf {
            precision: items.iter().map(|p| p.precision).sum::<f64>() / n,
            recall: items.iter().map(|p| p.recall).sum::<f64>() / n,
            f1: items.iter().map(|p| p.f1).sum::<f64>() / n,
        }
    }
}

/// Per-class true positive, false positive and false negative counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub fn_: Vec<u64>,
}

impl ConfusionCounts {
    pub fn new(num_classes: usize) -> Self {
        ConfusionCounts {
            tp: vec![0; num_classes],
            fp: vec![0; num_classes],
            fn_: vec![0; num_classes],
        }
    }

    pub fn add(&mut self, gold: usize, pred: usize) -> Result<()> {
        let k = self.tp.len();
        if gold >= k || pred >= k {
            return Err(EvalError::InvalidState(gold.max(pred)));
        }
        if gold == pred {
            self.tp[gold] += 1;
        } else {
            self.fp[pred] += 1;
            self.fn_[gold] += 1;
        }
        Ok(())
    }

    pub fn extend(&mut self, gold: &[usize], pred: &[usize]) -> Result<()> {
        if gold.len() != pred.len() {
            return Err(EvalError::LengthMismatch {
                gold: gold.len(),
                pred: pred.len(),
            });
        }
        for (&g, &p) in gold.iter().zip(pred) {
            self.add(g, p)?;
        }
        Ok(())
    }

    pub fn class(&self, c: usize) -> Prf {
        Prf::from_counts(self.tp[c], self.fp[c], self.fn_[c])
    }

    /// Per-class P/R/F averaged over all classes.
    pub fn macro_average(&self) -> Prf {
        let per: Vec<Prf> = (0..self.tp.len()).map(|c| self.class(c)).collect();
        Prf::mean(&per)
    }
}

/// Averaged P/R/F of the two relationship states over pooled sentences.
pub fn state_prf(gold: &[usize], pred: &[usize]) -> Result<Prf> {
    let mut counts = ConfusionCounts::new(2);
    counts.extend(gold, pred)?;
    Ok(counts.macro_average())
}

/// A predicted state sequence signals a change when it collapses to two or
/// more segments.
pub fn change_detection(states: &[usize]) -> bool {
    states.windows(2).any(|w| w[0] != w[1])
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChangeEval {
    pub changed: Prf,
    pub unchanged: Prf,
    pub averaged: Prf,
}

/// Binary change-detection P/R/F per class and macro-averaged.
pub fn change_eval(gold: &[bool], pred: &[bool]) -> Result<ChangeEval> {
    let as_class = |b: &bool| usize::from(!*b);
    let mut counts = ConfusionCounts::new(2);
    counts.extend(
        &gold.iter().map(as_class).collect::<Vec<_>>(),
        &pred.iter().map(as_class).collect::<Vec<_>>(),
    )?;
    Ok(ChangeEval {
        changed: counts.class(0),
        unchanged: counts.class(1),
        averaged: counts.macro_average(),
    })
}

/// Sentence- and sequence-level scores of one model on one test set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub averaged_p: f64,
    pub averaged_r: f64,
    pub averaged_f: f64,
    /// Mean edit distance between collapsed gold and predicted sequences.
    pub mean_edit_distance: f64,
    /// Same, on the uncollapsed per-sentence state strings.
    pub mean_edit_distance_raw: f64,
    pub change: Prf,
}

impl ModelMetrics {
    pub fn mean(items: &[ModelMetrics]) -> ModelMetrics {
        let n = items.len().max(1) as f64;
        let avg = |f: fn(&ModelMetrics) -> f64| items.iter().map(f).sum::<f64>() / n;
        ModelMetrics {
            averaged_p: avg(|m| m.averaged_p),
            averaged_r: avg(|m| m.averaged_r),
            averaged_f: avg(|m| m.averaged_f),
            mean_edit_distance: avg(|m| m.mean_edit_distance),
            mean_edit_distance_raw: avg(|m| m.mean_edit_distance_raw),
            change: Prf::mean(&items.iter().map(|m| m.change).collect::<Vec<_>>()),
        }
    }
}

/// Scores predicted state sequences against gold sequences.
pub fn evaluate_sequences(golds: &[Vec<usize>], preds: &[Vec<usize>]) -> Result<ModelMetrics> {
    if golds.len() != preds.len() {
        return Err(EvalError::LengthMismatch {
            gold: golds.len(),
            pred: preds.len(),
        });
    }
    let mut counts = ConfusionCounts::new(2);
    let mut ed = 0usize;
    let mut ed_raw = 0usize;
    let mut gold_change = Vec::with_capacity(golds.len());
    let mut pred_change = Vec::with_capacity(golds.len());
    for (g, p) in golds.iter().zip(preds) {
        counts.extend(g, p)?;
        ed += edit_distance(&collapse(g)?, &collapse(p)?);
        ed_raw += edit_distance(g, p);
        gold_change.push(change_detection(g));
        pred_change.push(change_detection(p));
    }
    let n = golds.len().max(1) as f64;
    let prf = counts.macro_average();
    Ok(ModelMetrics {
        averaged_p: prf.precision,
        averaged_r: prf.recall,
        averaged_f: prf.f1,
        mean_edit_distance: ed as f64 / n,
        mean_edit_distance_raw: ed_raw as f64 / n,
        change: change_eval(&gold_change, &pred_change)?.averaged,
    })
}
