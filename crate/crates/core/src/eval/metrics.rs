use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::{Error, Result};

/// How the summary numbers are defined; copied into every report.
pub const METRIC_DEFINITION: &str = "macro-averaged multi-class precision, recall and F1 over \
answer labels present in gold; abstain is a separate predicted class that is never gold; \
precision of a label never predicted is 0; F1 is the harmonic mean of P and R (0 when both are 0)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics<S> {
    pub label: String,
    pub precision: S,
    pub recall: S,
    pub f1: S,
    /// Gold occurrences of the label.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics<S> {
    pub per_label: Vec<LabelMetrics<S>>,
    pub macro_precision: S,
    pub macro_recall: S,
    pub macro_f1: S,
    pub accuracy: S,
    pub abstain_count: usize,
    pub n: usize,
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f1<S: Scalar>(precision: S, recall: S) -> S {
    let sum = precision + recall;
    if sum.is_zero() {
        S::zero()
    } else {
        S::from_count(2) * precision * recall / sum
    }
}

/// Metrics over `(gold, predicted)` pairs, `None` meaning abstain.
pub fn compute_metrics<S: Scalar>(pairs: &[(&str, Option<&str>)]) -> Result<Metrics<S>> {
    if pairs.is_empty() {
        return Err(Error::validation(
            "cannot compute metrics over zero records",
        ));
    }
    let labels: BTreeSet<&str> = pairs.iter().map(|(g, _)| *g).collect();
    let mut per_label = Vec::with_capacity(labels.len());
    for label in &labels {
        let support = pairs.iter().filter(|(g, _)| g == label).count();
        let predicted = pairs.iter().filter(|(_, p)| *p == Some(*label)).count();
        let tp = pairs
            .iter()
            .filter(|(g, p)| g == label && *p == Some(*label))
            .count();
        let precision = if predicted == 0 {
            S::zero()
        } else {
            S::ratio(tp, predicted)
        };
        let recall = S::ratio(tp, support);
        per_label.push(LabelMetrics {
            label: label.to_string(),
            precision,
            recall,
            f1: f1(precision, recall),
            support,
        });
    }
    let count = S::from_count(per_label.len());
    let mean = |f: fn(&LabelMetrics<S>) -> S| {
        per_label.iter().fold(S::zero(), |acc, m| acc + f(m)) / count
    };
    let correct = pairs.iter().filter(|(g, p)| *p == Some(*g)).count();
    Ok(Metrics {
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        accuracy: S::ratio(correct, pairs.len()),
        abstain_count: pairs.iter().filter(|(_, p)| p.is_none()).count(),
        n: pairs.len(),
        per_label,
    })
}

impl<S: Scalar> Metrics<S> {
    pub fn to_f64(&self) -> Metrics<f64> {
        Metrics {
            per_label: self
                .per_label
                .iter()
                .map(|m| LabelMetrics {
                    label: m.label.clone(),
                    precision: m.precision.to_f64(),
                    recall: m.recall.to_f64(),
                    f1: m.f1.to_f64(),
                    support: m.support,
                })
                .collect(),
            macro_precision: self.macro_precision.to_f64(),
            macro_recall: self.macro_recall.to_f64(),
            macro_f1: self.macro_f1.to_f64(),
            accuracy: self.accuracy.to_f64(),
            abstain_count: self.abstain_count,
            n: self.n,
        }
    }
}
