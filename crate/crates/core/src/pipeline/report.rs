// SPDX-License-Identifier: Apache-2.0

//! Result tables, sweeps over coarsening settings and ε curves.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{run_pipeline, MetricsFile, RunConfig};
use crate::coarsen::CoarsenMethod;
use crate::encode::{embed_bafg_nodes, embed_cfg_nodes, VocabularyMap};
use crate::error::{Error, Result};
use crate::explain::{characterization_curve, integrated_gradients, CurveRow};
use crate::gnn::Checkpoint;
use crate::graphdata::{read_samples, DatasetSplit, Level, SampleGraph};
use crate::metrics::{Classwise, InferenceMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelScores {
    pub accuracy: f64,
    pub f1_benign: f64,
    pub f1_malicious: f64,
}

impl From<&InferenceMetrics> for LevelScores {
    fn from(m: &InferenceMetrics) -> Self {
        Self {
            accuracy: m.accuracy,
            f1_benign: m.benign.f1,
            f1_malicious: m.malicious.f1,
        }
    }
}

/// Detection quality of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub method: String,
    pub r: f64,
    pub upper_level: Level,
    pub upper: LevelScores,
    pub lower: LevelScores,
    pub average_accuracy: f64,
}

/// Explanation quality of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table3Row {
    pub method: String,
    pub r: f64,
    pub charact_upper: Classwise<Option<f64>>,
    pub charact_lower: Classwise<Option<f64>>,
    pub charact_per_sample_upper: Option<f64>,
    pub charact_per_sample_lower: Option<f64>,
    pub lambda: Classwise<Option<f64>>,
}

pub fn table_rows(m: &MetricsFile) -> (Vec<Table2Row>, Vec<Table3Row>) {
    let rep = &m.report;
    let method = m.method.display_name().to_string();
    let t2 = Table2Row {
        method: method.clone(),
        r: m.r,
        upper_level: rep.upper.level,
        upper: (&rep.upper.inference).into(),
        lower: (&rep.lower.inference).into(),
        average_accuracy: rep.average_accuracy,
    };
    let t3 = Table3Row {
        method,
        r: m.r,
        charact_upper: rep.upper.charact,
        charact_lower: rep.lower.charact,
        charact_per_sample_upper: rep.upper.charact_per_sample.all,
        charact_per_sample_lower: rep.lower.charact_per_sample.all,
        lambda: rep.lambda,
    };
    (vec![t2], vec![t3])
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

pub fn render_table2(rows: &[Table2Row]) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "{:<16} {:>5} {:>6} | {:>6} {:>7} {:>7} | {:>6} {:>7} {:>7} | {:>7}",
        "method", "r", "level", "acc", "F1 ben", "F1 mal", "B acc", "B F1 b", "B F1 m", "avg acc"
    )
    .unwrap();
    for r in rows {
        writeln!(
            s,
            "{:<16} {:>5} {:>6} | {:>6.3} {:>7.3} {:>7.3} | {:>6.3} {:>7.3} {:>7.3} | {:>7.4}",
            r.method,
            r.r,
            r.upper_level.tag(),
            r.upper.accuracy,
            r.upper.f1_benign,
            r.upper.f1_malicious,
            r.lower.accuracy,
            r.lower.f1_benign,
            r.lower.f1_malicious,
            r.average_accuracy
        )
        .unwrap();
    }
    s
}

pub fn render_table3(rows: &[Table3Row]) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "{:<16} {:>5} | {:>6} {:>6} {:>6} {:>6} | {:>6} {:>6} {:>6} {:>6} | {:>6} {:>6} {:>6}",
        "method",
        "r",
        "ch",
        "ch ben",
        "ch mal",
        "ch ps",
        "B ch",
        "B ben",
        "B mal",
        "B ps",
        "lambda",
        "l ben",
        "l mal"
    )
    .unwrap();
    for r in rows {
        writeln!(
            s,
            "{:<16} {:>5} | {:>6} {:>6} {:>6} {:>6} | {:>6} {:>6} {:>6} {:>6} | {:>6} {:>6} {:>6}",
            r.method,
            r.r,
            opt(r.charact_upper.all),
            opt(r.charact_upper.benign),
            opt(r.charact_upper.malicious),
            opt(r.charact_per_sample_upper),
            opt(r.charact_lower.all),
            opt(r.charact_lower.benign),
            opt(r.charact_lower.malicious),
            opt(r.charact_per_sample_lower),
            opt(r.lambda.all),
            opt(r.lambda.benign),
            opt(r.lambda.malicious)
        )
        .unwrap();
    }
    s
}

pub fn read_metrics_file(path: impl AsRef<Path>) -> Result<MetricsFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub runs: Vec<MetricsFile>,
    pub table2: Vec<Table2Row>,
    pub table3: Vec<Table3Row>,
    pub models_trained: usize,
}

pub const SWEEP_RATIOS: [f64; 4] = [0.25, 0.5, 0.75, 0.999];
pub const SWEEP_METHODS: [CoarsenMethod; 2] = [CoarsenMethod::Kron, CoarsenMethod::VariationEdges];

/// The baseline followed by every method × ratio setting, each writing to
/// its own directory under `out_root`.
pub fn sweep_configs(
    base: &RunConfig,
    methods: &[CoarsenMethod],
    ratios: &[f64],
    out_root: &Path,
) -> Result<Vec<RunConfig>> {
    let mut configs = vec![RunConfig {
        coarsener: CoarsenMethod::Identity,
        r: 0.0,
        output_dir: out_root.join("baseline"),
        ..base.clone()
    }];
    for &m in methods {
        if m == CoarsenMethod::Identity {
            return Err(Error::Config(
                "the baseline is always included; list only coarsening methods".into(),
            ));
        }
        for &r in ratios {
            configs.push(RunConfig {
                coarsener: m,
                r,
                output_dir: out_root.join(format!("{}_r{r}", m.name())),
                ..base.clone()
            });
        }
    }
    Ok(configs)
}

/// Run every configuration. All of them must share the input and the seed.
pub fn sweep(configs: &[RunConfig]) -> Result<SweepReport> {
    let first = configs
        .first()
        .ok_or_else(|| Error::Config("empty sweep".into()))?;
    for c in configs {
        if c.input != first.input || c.seed != first.seed {
            return Err(Error::Config(format!(
                "sweep runs must share input and seed ({} / {:?} vs {} / {:?})",
                c.input.display(),
                c.seed,
                first.input.display(),
                first.seed
            )));
        }
        c.validate()?;
    }
    let mut report = SweepReport {
        runs: Vec::new(),
        table2: Vec::new(),
        table3: Vec::new(),
        models_trained: 0,
    };
    for c in configs {
        log::info!("sweep: {} r = {}", c.coarsener.name(), c.r);
        let run = run_pipeline(c)?;
        let (t2, t3) = table_rows(&run.metrics);
        report.table2.extend(t2);
        report.table3.extend(t3);
        report.models_trained += run.models_trained;
        report.runs.push(run.metrics);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveTable {
    pub level: Level,
    pub n_samples: usize,
    pub rows: Vec<CurveRow>,
}

fn level_curve(
    run_dir: &Path,
    sub: &str,
    test_ids: &[String],
    embed: impl Fn(SampleGraph) -> Result<SampleGraph>,
    ig_steps: usize,
    grid: &[f64],
) -> Result<CurveTable> {
    let ck = Checkpoint::load(run_dir.join(sub).join("checkpoint.json"))?;
    let model = ck.model()?;
    let samples = read_samples(run_dir.join(sub).join("samples.jsonl"))?;
    let level = samples
        .first()
        .map(SampleGraph::level)
        .ok_or_else(|| Error::InvalidArgument(format!("no samples under {sub}")))?;
    let mut correct = Vec::new();
    for g in samples
        .into_iter()
        .filter(|g| test_ids.iter().any(|t| t == g.id()))
    {
        let g = embed(g)?;
        if model.predict(&g)?.0 == g.label() {
            correct.push(g);
        }
    }
    let attrs = correct
        .iter()
        .map(|g| integrated_gradients(&model, g, ig_steps))
        .collect::<Result<Vec<_>>>()?;
    let rows = characterization_curve(&model, &correct, &attrs, grid)?;
    Ok(CurveTable {
        level,
        n_samples: correct.len(),
        rows,
    })
}

/// Fidelity and characterization over an ε grid for both levels of a
/// finished run, on its correctly predicted test samples.
pub fn characterization_curves(run_dir: impl AsRef<Path>, grid: &[f64]) -> Result<Vec<CurveTable>> {
    let run_dir = run_dir.as_ref();
    let config = RunConfig::load(run_dir.join("config.toml"))?;
    let vocab = VocabularyMap::load(run_dir.join("vocab.json"))?;
    let split_path = run_dir.join("split.json");
    let text = fs::read_to_string(&split_path).map_err(|e| Error::io(&split_path, e))?;
    let doc: serde_json::Value = serde_json::from_str(&text)?;
    let split: DatasetSplit = serde_json::from_value(doc["split"].clone())?;
    Ok(vec![
        level_curve(
            run_dir,
            "ccfg",
            &split.test_ids,
            |g| embed_cfg_nodes(g, &vocab),
            config.ig_steps,
            grid,
        )?,
        level_curve(
            run_dir,
            "bafg",
            &split.test_ids,
            |g| embed_bafg_nodes(g, &vocab),
            config.ig_steps,
            grid,
        )?,
    ])
}
