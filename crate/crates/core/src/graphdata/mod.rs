// SPDX-License-Identifier: Apache-2.0

//! Sample graphs, their interchange format, dataset assembly and a synthetic
//! generator.

mod dedup;
mod io;
mod split;
mod synth;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub use dedup::{dedup_nonisomorphic, wl_signature, WlSignature};
pub use io::{
    format_sample, load_samples, parse_sample_line, read_samples, write_samples, ParsedLine,
};
pub use split::{split_dataset, ClassCounts, DatasetSplit};
pub use synth::{generate_synthetic, ClassMotifSpec, MotifShape, MotifSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    #[serde(rename = "CFG")]
    Cfg,
    #[serde(rename = "C_CFG")]
    CCfg,
    #[serde(rename = "AFG")]
    Afg,
    #[serde(rename = "B_AFG")]
    BAfg,
}

impl Level {
    pub fn tag(self) -> &'static str {
        match self {
            Level::Cfg => "CFG",
            Level::CCfg => "C_CFG",
            Level::Afg => "AFG",
            Level::BAfg => "B_AFG",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "CFG" => Some(Level::Cfg),
            "C_CFG" => Some(Level::CCfg),
            "AFG" => Some(Level::Afg),
            "B_AFG" => Some(Level::BAfg),
            _ => None,
        }
    }

    /// AFG-family levels hold exactly one instruction per node.
    pub fn is_instruction_level(self) -> bool {
        matches!(self, Level::Afg | Level::BAfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Benign = 0,
    Malicious = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Label::Benign),
            1 => Some(Label::Malicious),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Benign => "benign",
            Label::Malicious => "malicious",
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l as u8
    }
}

impl TryFrom<u8> for Label {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        Label::from_index(v as usize).ok_or_else(|| format!("label must be 0 or 1, got {v}"))
    }
}

pub const NUM_FEATURES: usize = 25;

/// One categorical instruction feature and its full category count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureSpec {
    pub name: &'static str,
    pub width: u32,
}

const fn feat(name: &'static str, width: u32) -> FeatureSpec {
    FeatureSpec { name, width }
}

/// Instruction features in interchange order with their full widths.
pub const INSTRUCTION_FEATURES: [FeatureSpec; NUM_FEATURES] = [
    feat("prefix_0", 2),
    feat("prefix_1", 4),
    feat("prefix_2", 7),
    feat("prefix_3", 2),
    feat("opcode_0", 200),
    feat("opcode_1", 191),
    feat("opcode_2", 37),
    feat("opcode_3", 1),
    feat("rex", 17),
    feat("addr_size", 3),
    feat("modrm", 256),
    feat("sib", 255),
    feat("sib_scale", 21),
    feat("xop_cc", 5),
    feat("sse_cc", 21),
    feat("avx_cc", 1),
    feat("avx_sae", 1),
    feat("avx_rm", 5),
    feat("eflags", 1),
    feat("fpu_flags", 1),
    feat("modrm_offset", 10),
    feat("disp_offset", 12),
    feat("disp_size", 5),
    feat("imm_offset", 10),
    feat("imm_size", 5),
];

pub const OPCODE_0: usize = 4;

/// A decoded instruction as 25 raw categorical codes. Code 0 means the
/// feature is absent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct InstructionRecord {
    pub codes: [u32; NUM_FEATURES],
    pub mnemonic: Option<String>,
}

impl InstructionRecord {
    pub fn new(codes: [u32; NUM_FEATURES]) -> Self {
        Self {
            codes,
            mnemonic: None,
        }
    }

    /// Every feature absent.
    pub fn absent() -> Self {
        Self::default()
    }

    pub fn opcode0(&self) -> u32 {
        self.codes[OPCODE_0]
    }
}

/// A directed attributed graph at one of the four pipeline levels.
///
/// Nodes are kept sorted by id and edges sorted lexicographically, so
/// node and edge positions are canonical.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGraph {
    id: String,
    level: Level,
    label: Label,
    nodes: Vec<NodeId>,
    edges: Vec<(NodeId, NodeId)>,
    payload: Vec<Vec<InstructionRecord>>,
    features: Option<Matrix>,
}

impl SampleGraph {
    pub fn new(
        id: impl Into<String>,
        level: Level,
        label: Label,
        mut nodes: Vec<(NodeId, Vec<InstructionRecord>)>,
        mut edges: Vec<(NodeId, NodeId)>,
    ) -> Result<Self> {
        let id = id.into();
        let invalid = |reason: String| Error::InvalidGraph {
            sample: id.clone(),
            reason,
        };
        nodes.sort_by_key(|(n, _)| *n);
        if let Some(w) = nodes.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(invalid(format!("duplicate node {}", w[0].0)));
        }
        if level.is_instruction_level() {
            if let Some((n, p)) = nodes.iter().find(|(_, p)| p.len() != 1) {
                return Err(invalid(format!(
                    "{} node {n} carries {} instructions, expected 1",
                    level.tag(),
                    p.len()
                )));
            }
        }
        let (node_ids, payload): (Vec<_>, Vec<_>) = nodes.into_iter().unzip();
        for &(s, d) in &edges {
            for end in [s, d] {
                if node_ids.binary_search(&end).is_err() {
                    return Err(invalid(format!(
                        "edge ({s},{d}) references missing node {end}"
                    )));
                }
            }
        }
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(invalid(format!("duplicate edge ({},{})", w[0].0, w[0].1)));
        }
        Ok(Self {
            id,
            level,
            label,
            nodes: node_ids,
            edges,
            payload,
            features: None,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn payload(&self) -> &[Vec<InstructionRecord>] {
        &self.payload
    }

    pub fn instructions(&self, node: NodeId) -> Option<&[InstructionRecord]> {
        self.index_of(node).map(|i| self.payload[i].as_slice())
    }

    pub fn features(&self) -> Option<&Matrix> {
        self.features.as_ref()
    }

    pub fn index_of(&self, node: NodeId) -> Option<usize> {
        self.nodes.binary_search(&node).ok()
    }

    /// Edges as (src, dst) positions into [`Self::nodes`].
    pub fn edge_index(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .map(|&(s, d)| {
                (
                    self.index_of(s).expect("validated endpoint"),
                    self.index_of(d).expect("validated endpoint"),
                )
            })
            .collect()
    }

    pub fn instruction_count(&self) -> usize {
        self.payload.iter().map(Vec::len).sum()
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for (s, _) in self.edge_index() {
            deg[s] += 1;
        }
        deg
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for (_, d) in self.edge_index() {
            deg[d] += 1;
        }
        deg
    }

    /// Attach a node feature matrix (one row per node).
    pub fn with_features(mut self, features: Matrix) -> Result<Self> {
        if features.rows() != self.nodes.len() {
            return Err(Error::Dimension(format!(
                "sample {}: {} feature rows for {} nodes",
                self.id,
                features.rows(),
                self.nodes.len()
            )));
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn without_features(mut self) -> Self {
        self.features = None;
        self
    }

    /// Weakly connected components as sorted node positions, ordered by their
    /// smallest member.
    pub fn weak_components(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (s, d) in self.edge_index() {
            let (a, b) = (find(&mut parent, s), find(&mut parent, d));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for v in 0..n {
            let r = find(&mut parent, v);
            groups.entry(r).or_default().push(v);
        }
        groups.into_values().collect()
    }
}
