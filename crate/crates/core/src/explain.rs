// SPDX-License-Identifier: Apache-2.0

//! Edge attribution with Integrated Gradients and top-edge selection.

use std::collections::BTreeSet;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{GcnModel, GraphBatch, Target};
use crate::graphdata::{Label, Level, NodeId, SampleGraph};
use crate::metrics::{characterization, fidelity, FidelityScores, W_MINUS, W_PLUS};

pub const DEFAULT_IG_STEPS: usize = 50;
pub const DEFAULT_EPSILON: f64 = 0.10;
/// Interpolation points evaluated per batched forward pass.
const IG_CHUNK: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeAttribution {
    /// Class whose logit was attributed.
    pub target: Label,
    /// One signed value per edge, in the graph's edge order.
    pub values: Vec<f64>,
}

/// Anything that scores edges for one graph under a trained model.
pub trait EdgeAttributor: Sync {
    fn name(&self) -> &'static str;
    fn attribute(&self, model: &GcnModel, g: &SampleGraph) -> Result<EdgeAttribution>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegratedGradients {
    pub steps: usize,
}

impl Default for IntegratedGradients {
    fn default() -> Self {
        Self {
            steps: DEFAULT_IG_STEPS,
        }
    }
}

impl EdgeAttributor for IntegratedGradients {
    fn name(&self) -> &'static str {
        "integrated_gradients"
    }

    fn attribute(&self, model: &GcnModel, g: &SampleGraph) -> Result<EdgeAttribution> {
        integrated_gradients(model, g, self.steps)
    }
}

/// Midpoint-rule Integrated Gradients of the predicted-class logit along
/// the straight path from the all-zero edge mask to the all-ones mask.
pub fn integrated_gradients(
    model: &GcnModel,
    g: &SampleGraph,
    steps: usize,
) -> Result<EdgeAttribution> {
    if steps < 1 {
        return Err(Error::InvalidArgument(
            "integrated gradients needs at least one step".into(),
        ));
    }
    let (target, _) = model.predict(g)?;
    let m = g.num_edges();
    let mut values = vec![0.0; m];
    if m == 0 {
        return Ok(EdgeAttribution { target, values });
    }
    let alphas: Vec<f64> = (1..=steps)
        .map(|t| (t as f64 - 0.5) / steps as f64)
        .collect();
    for chunk in alphas.chunks(IG_CHUNK) {
        let masks: Vec<Vec<f64>> = chunk.iter().map(|&a| vec![a; m]).collect();
        let batch = GraphBatch::replicate(g, &masks)?;
        let fwd = model.forward(&batch, None)?;
        let classes = vec![target.index(); chunk.len()];
        let grads = model.backward(&batch, &fwd, Target::Logit(&classes), true)?;
        for copy in 0..chunk.len() {
            for (v, gr) in values.iter_mut().zip(&grads.mask[batch.edge_range(copy)]) {
                *v += gr;
            }
        }
    }
    for v in &mut values {
        *v /= steps as f64;
    }
    Ok(EdgeAttribution { target, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tau {
    Tes,
}

impl FromStr for Tau {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tes" => Ok(Tau::Tes),
            other => Err(Error::Config(format!("unknown selection method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionPolicy {
    pub tau: Tau,
    pub epsilon: f64,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        Self {
            tau: Tau::Tes,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl SelectionPolicy {
    pub fn with_epsilon(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon {epsilon} outside (0,1]"
            )));
        }
        Ok(Self {
            tau: Tau::Tes,
            epsilon,
        })
    }
}

/// Nodes to cover: `max(ceil(ε n), ceil(log2 n), nodes of one edge)`.
pub fn node_budget(num_nodes: usize, epsilon: f64, first_edge_nodes: usize) -> usize {
    let share = (epsilon * num_nodes as f64 - 1e-9).ceil().max(0.0) as usize;
    let log = if num_nodes > 1 {
        (num_nodes as f64).log2().ceil() as usize
    } else {
        0
    };
    share.max(log).max(first_edge_nodes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationMask {
    pub sample_id: String,
    pub level: Level,
    pub target: Label,
    pub epsilon: f64,
    pub budget: usize,
    pub edges: Vec<(NodeId, NodeId)>,
    pub attribution: Vec<f64>,
    /// Edge indices, highest attribution first.
    pub ranked: Vec<usize>,
    /// Ascending edge indices.
    pub selected_edges: Vec<usize>,
    pub unimportant_edges: Vec<usize>,
    pub selected_nodes: Vec<NodeId>,
}

impl ExplanationMask {
    /// Edge mask keeping only the selected edges.
    pub fn selected_mask(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.edges.len()];
        for &e in &self.selected_edges {
            m[e] = 1.0;
        }
        m
    }

    /// Edge mask keeping only the unimportant edges.
    pub fn unimportant_mask(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.edges.len()];
        for &e in &self.unimportant_edges {
            m[e] = 1.0;
        }
        m
    }

    pub fn selected_node_set(&self) -> BTreeSet<NodeId> {
        self.selected_nodes.iter().copied().collect()
    }
}

/// Top-edge selection: walk edges by descending attribution (ties to the
/// smaller `(src, dst)`) until the touched nodes reach the budget. A graph
/// without edges selects all of its nodes.
pub fn select_tes(
    g: &SampleGraph,
    attribution: &EdgeAttribution,
    policy: &SelectionPolicy,
) -> Result<ExplanationMask> {
    let values = &attribution.values;
    if values.len() != g.num_edges() {
        return Err(Error::Dimension(format!(
            "sample {}: {} attributions for {} edges",
            g.id(),
            values.len(),
            g.num_edges()
        )));
    }
    let edges = g.edges();
    let mut ranked: Vec<usize> = (0..edges.len()).collect();
    ranked.sort_by(|&a, &b| {
        values[b]
            .total_cmp(&values[a])
            .then(edges[a].cmp(&edges[b]))
    });

    let first = ranked
        .first()
        .map_or(0, |&e| if edges[e].0 == edges[e].1 { 1 } else { 2 });
    let budget = node_budget(g.num_nodes(), policy.epsilon, first);
    let mut selected = Vec::new();
    let mut touched = BTreeSet::new();
    if edges.is_empty() {
        touched.extend(g.nodes().iter().copied());
    }
    for &e in &ranked {
        if touched.len() >= budget {
            break;
        }
        selected.push(e);
        touched.insert(edges[e].0);
        touched.insert(edges[e].1);
    }
    selected.sort_unstable();
    let unimportant: Vec<usize> = (0..edges.len())
        .filter(|e| selected.binary_search(e).is_err())
        .collect();
    Ok(ExplanationMask {
        sample_id: g.id().to_string(),
        level: g.level(),
        target: attribution.target,
        epsilon: policy.epsilon,
        budget,
        edges: edges.to_vec(),
        attribution: values.clone(),
        ranked,
        selected_edges: selected,
        unimportant_edges: unimportant,
        selected_nodes: touched.into_iter().collect(),
    })
}

/// Attribute and select for every sample, in parallel, keeping input order.
pub fn explain_samples(
    model: &GcnModel,
    samples: &[SampleGraph],
    attributor: &dyn EdgeAttributor,
    policy: &SelectionPolicy,
) -> Result<Vec<ExplanationMask>> {
    samples
        .par_iter()
        .map(|g| {
            let attr = attributor
                .attribute(model, g)
                .map_err(|e| e.in_phase("explain", g.id()))?;
            select_tes(g, &attr, policy)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub epsilon: f64,
    pub fidelity: FidelityScores,
    pub charact: f64,
}

/// Characterization as a function of ε, reusing one attribution per sample.
/// `samples` must all be correctly predicted.
pub fn characterization_curve(
    model: &GcnModel,
    samples: &[SampleGraph],
    attributions: &[EdgeAttribution],
    epsilon_grid: &[f64],
) -> Result<Vec<CurveRow>> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "characterization curve over no samples".into(),
        ));
    }
    if samples.len() != attributions.len() {
        return Err(Error::Dimension("one attribution per sample".into()));
    }
    let mut grid = epsilon_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid.iter()
        .map(|&eps| {
            let policy = SelectionPolicy::with_epsilon(eps)?;
            let masks = samples
                .iter()
                .zip(attributions)
                .map(|(g, a)| select_tes(g, a, &policy))
                .collect::<Result<Vec<_>>>()?;
            let (fid, _) = fidelity(model, samples, &masks)?;
            Ok(CurveRow {
                epsilon: eps,
                fidelity: fid,
                charact: characterization(&fid, W_PLUS, W_MINUS),
            })
        })
        .collect()
}
