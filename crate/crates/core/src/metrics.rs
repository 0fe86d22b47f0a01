// SPDX-License-Identifier: Apache-2.0

//! Inference metrics, fidelity, characterization, λ and β.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::ExplanationMask;
use crate::gnn::{argmax_label, GcnModel};
use crate::graphdata::{Label, Level, SampleGraph};

/// Malicious is the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Some denominator was zero and the affected value was reported as 0.
    pub zero_division: bool,
}

fn ratio(num: usize, den: usize, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn class_metrics(tp: usize, fp: usize, fn_: usize) -> ClassMetrics {
    let mut zero_division = false;
    let precision = ratio(tp, tp + fp, &mut zero_division);
    let recall = ratio(tp, tp + fn_, &mut zero_division);
    let f1 = if precision + recall == 0.0 {
        zero_division = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics {
        precision,
        recall,
        f1,
        zero_division,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct InferenceMetrics {
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    pub benign: ClassMetrics,
    pub malicious: ClassMetrics,
}

impl InferenceMetrics {
    pub fn from_counts(c: ConfusionCounts) -> Self {
        let mut flag = false;
        Self {
            counts: c,
            accuracy: ratio(c.tp + c.tn, c.total(), &mut flag),
            benign: class_metrics(c.tn, c.fn_, c.fp),
            malicious: class_metrics(c.tp, c.fp, c.fn_),
        }
    }
}

pub fn inference_metrics(preds: &[Label], labels: &[Label]) -> Result<InferenceMetrics> {
    if preds.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (p, y) in preds.iter().zip(labels) {
        match (y, p) {
            (Label::Malicious, Label::Malicious) => c.tp += 1,
            (Label::Benign, Label::Benign) => c.tn += 1,
            (Label::Benign, Label::Malicious) => c.fp += 1,
            (Label::Malicious, Label::Benign) => c.fn_ += 1,
        }
    }
    Ok(InferenceMetrics::from_counts(c))
}

/// Predictions for one correctly classified sample: on the full graph, on
/// the graph with the explanation removed, and on the explanation alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FidelityRecord {
    pub sample_id: String,
    pub label: Label,
    pub pred_full: Label,
    pub pred_without: Label,
    pub pred_only: Label,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FidelityScores {
    pub fid_plus: f64,
    pub fid_minus: f64,
    pub n_samples: usize,
}

/// Indicator form: `fid+ = 1 - mean 1[pred(G \ S) = ŷ]`,
/// `fid- = 1 - mean 1[pred(S) = ŷ]`.
pub fn fidelity_from_records(records: &[FidelityRecord]) -> Result<FidelityScores> {
    if records.is_empty() {
        return Err(Error::InvalidArgument(
            "fidelity over an empty sample set".into(),
        ));
    }
    if let Some(r) = records.iter().find(|r| r.pred_full != r.label) {
        return Err(Error::InvalidArgument(format!(
            "sample {} is not correctly predicted",
            r.sample_id
        )));
    }
    let n = records.len() as f64;
    let kept_without = records
        .iter()
        .filter(|r| r.pred_without == r.pred_full)
        .count() as f64;
    let kept_only = records
        .iter()
        .filter(|r| r.pred_only == r.pred_full)
        .count() as f64;
    Ok(FidelityScores {
        fid_plus: 1.0 - kept_without / n,
        fid_minus: 1.0 - kept_only / n,
        n_samples: records.len(),
    })
}

/// Predict each sample on its full graph, on the unimportant edges only
/// and on the selected edges only. Every node keeps its features in all
/// three. Samples must be correctly predicted.
pub fn fidelity(
    model: &GcnModel,
    samples: &[SampleGraph],
    masks: &[ExplanationMask],
) -> Result<(FidelityScores, Vec<FidelityRecord>)> {
    if samples.len() != masks.len() {
        return Err(Error::Dimension(format!(
            "{} samples for {} masks",
            samples.len(),
            masks.len()
        )));
    }
    let mut records = Vec::with_capacity(samples.len());
    for (g, m) in samples.iter().zip(masks) {
        if g.id() != m.sample_id || g.num_edges() != m.edges.len() {
            return Err(Error::Mapping(format!(
                "explanation for `{}` does not belong to sample `{}`",
                m.sample_id,
                g.id()
            )));
        }
        let (pred_full, _) = model.predict(g)?;
        let pred_without = argmax_label(&model.logits_with_mask(g, &m.unimportant_mask())?);
        let pred_only = argmax_label(&model.logits_with_mask(g, &m.selected_mask())?);
        records.push(FidelityRecord {
            sample_id: g.id().to_string(),
            label: g.label(),
            pred_full,
            pred_without,
            pred_only,
        });
    }
    Ok((fidelity_from_records(&records)?, records))
}

pub const W_PLUS: f64 = 0.5;
pub const W_MINUS: f64 = 0.5;

/// Weighted harmonic mean of `fid+` and `1 - fid-`; 0 when either term is 0.
pub fn characterization(fid: &FidelityScores, w_plus: f64, w_minus: f64) -> f64 {
    charact_value(fid.fid_plus, fid.fid_minus, w_plus, w_minus)
}

fn charact_value(fid_plus: f64, fid_minus: f64, w_plus: f64, w_minus: f64) -> f64 {
    if fid_plus <= 0.0 || fid_minus >= 1.0 {
        return 0.0;
    }
    (w_plus + w_minus) / (w_plus / fid_plus + w_minus / (1.0 - fid_minus))
}

/// Mean over samples of the per-sample characterization (each sample's
/// fidelities are 0 or 1).
pub fn characterization_per_sample(
    records: &[FidelityRecord],
    w_plus: f64,
    w_minus: f64,
) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::InvalidArgument(
            "characterization over an empty sample set".into(),
        ));
    }
    let total: f64 = records
        .iter()
        .map(|r| {
            let fp = if r.pred_without == r.pred_full {
                0.0
            } else {
                1.0
            };
            let fm = if r.pred_only == r.pred_full { 0.0 } else { 1.0 };
            charact_value(fp, fm, w_plus, w_minus)
        })
        .sum();
    Ok(total / records.len() as f64)
}

/// Upper-level minus lower-level characterization; never clamped.
pub fn lambda_score(charact_upper: f64, charact_lower: f64) -> f64 {
    charact_upper - charact_lower
}

pub const BINARY_TOL: f64 = 1e-12;

/// Share of samples whose vector holds an entry outside `{0, 1}`.
pub fn beta_score<V: AsRef<[f64]>>(vectors: &[V]) -> Result<f64> {
    if vectors.is_empty() {
        return Err(Error::InvalidArgument(
            "beta over an empty sample set".into(),
        ));
    }
    let non_binary = vectors
        .iter()
        .filter(|v| {
            v.as_ref()
                .iter()
                .map(|x| (x * (1.0 - x)).abs())
                .sum::<f64>()
                > BINARY_TOL
        })
        .count();
    Ok(non_binary as f64 / vectors.len() as f64)
}

/// Values over all samples and per true class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Classwise<T> {
    pub all: T,
    pub benign: T,
    pub malicious: T,
}

impl<T> Classwise<T> {
    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Classwise<U> {
        Classwise {
            all: f(&self.all),
            benign: f(&self.benign),
            malicious: f(&self.malicious),
        }
    }
}

/// Everything measured at one level of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: Level,
    pub inference: InferenceMetrics,
    /// `None` where a class has no correctly predicted samples.
    pub fidelity: Classwise<Option<FidelityScores>>,
    pub charact: Classwise<Option<f64>>,
    pub charact_per_sample: Classwise<Option<f64>>,
    pub beta: f64,
}

impl LevelReport {
    pub fn new(
        level: Level,
        inference: InferenceMetrics,
        records: &[FidelityRecord],
        beta: f64,
    ) -> Result<Self> {
        if let Some(r) = records.iter().find(|r| r.pred_full != r.label) {
            return Err(Error::InvalidArgument(format!(
                "sample {} is not correctly predicted",
                r.sample_id
            )));
        }
        let subset = |label: Option<Label>| -> Vec<FidelityRecord> {
            records
                .iter()
                .filter(|r| label.map_or(true, |l| r.label == l))
                .cloned()
                .collect()
        };
        let groups = Classwise {
            all: subset(None),
            benign: subset(Some(Label::Benign)),
            malicious: subset(Some(Label::Malicious)),
        };
        let fidelity = groups.map(|g| {
            if g.is_empty() {
                None
            } else {
                fidelity_from_records(g).ok()
            }
        });
        let charact = fidelity.map(|f| f.as_ref().map(|f| characterization(f, W_PLUS, W_MINUS)));
        let charact_per_sample = groups.map(|g| {
            if g.is_empty() {
                None
            } else {
                characterization_per_sample(g, W_PLUS, W_MINUS).ok()
            }
        });
        Ok(Self {
            level,
            inference,
            fidelity,
            charact,
            charact_per_sample,
            beta,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub upper: LevelReport,
    pub lower: LevelReport,
    pub average_accuracy: f64,
    pub lambda: Classwise<Option<f64>>,
}

fn lambda_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(lambda_score(a?, b?))
}

/// Combine the (C-)CFG level and the B-AFG level of one run.
pub fn aggregate_report(
    upper: Option<LevelReport>,
    lower: Option<LevelReport>,
) -> Result<MetricsReport> {
    let upper =
        upper.ok_or_else(|| Error::InvalidArgument("missing (C-)CFG level results".into()))?;
    let lower =
        lower.ok_or_else(|| Error::InvalidArgument("missing B-AFG level results".into()))?;
    let lambda = Classwise {
        all: lambda_opt(upper.charact.all, lower.charact.all),
        benign: lambda_opt(upper.charact.benign, lower.charact.benign),
        malicious: lambda_opt(upper.charact.malicious, lower.charact.malicious),
    };
    Ok(MetricsReport {
        average_accuracy: 0.5 * (upper.inference.accuracy + lower.inference.accuracy),
        lambda,
        upper,
        lower,
    })
}
