// SPDX-License-Identifier: Apache-2.0

//! Graph coarsening with a backtrackable node map.
//!
//! Both reducers work on the combinatorial Laplacian of the symmetrised
//! graph. Edge directions are restored on the coarse graph from the
//! original edges running between blocks.

mod kron;
mod spectral;
mod variation;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphdata::{Level, NodeId, SampleGraph};
use crate::tensor::Matrix;

pub use kron::{coarsen_kron, kron_kept_set, kron_reduce};
pub use spectral::{laplacian, symmetric_adjacency};
pub use variation::{coarsen_variation_edges, DEFAULT_K_SUBSPACE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoarsenMethod {
    Identity,
    Kron,
    VariationEdges,
}

impl CoarsenMethod {
    pub fn name(self) -> &'static str {
        match self {
            CoarsenMethod::Identity => "identity",
            CoarsenMethod::Kron => "kron",
            CoarsenMethod::VariationEdges => "variation_edges",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            CoarsenMethod::Identity => "Baseline",
            CoarsenMethod::Kron => "Kron",
            CoarsenMethod::VariationEdges => "Variation Edges",
        }
    }
}

impl std::str::FromStr for CoarsenMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "baseline" => Ok(CoarsenMethod::Identity),
            "kron" => Ok(CoarsenMethod::Kron),
            "variation_edges" | "variation-edges" => Ok(CoarsenMethod::VariationEdges),
            other => Err(Error::Config(format!("unknown coarsener `{other}`"))),
        }
    }
}

/// Surjective original-node → supernode map. Supernode ids are original
/// node ids (the block minimum for contraction methods, the kept node for
/// Kron).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMap", into = "RawMap")]
pub struct CoarseningMap {
    pub sample_id: String,
    pub method: CoarsenMethod,
    pub r: f64,
    partition: BTreeMap<NodeId, Vec<NodeId>>,
    assignment: BTreeMap<NodeId, NodeId>,
    /// Number of reduction levels applied.
    pub levels: usize,
    /// Coarse edge weights (unordered pairs, smaller id first).
    pub edge_weights: Vec<(NodeId, NodeId, f64)>,
    /// Provenance notes, e.g. eigensolver fallbacks.
    pub notes: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawMap {
    id: String,
    method: CoarsenMethod,
    r: f64,
    levels: usize,
    partition: BTreeMap<NodeId, Vec<NodeId>>,
    edge_weights: Vec<(NodeId, NodeId, f64)>,
    notes: Vec<String>,
}

impl From<CoarseningMap> for RawMap {
    fn from(m: CoarseningMap) -> Self {
        RawMap {
            id: m.sample_id,
            method: m.method,
            r: m.r,
            levels: m.levels,
            partition: m.partition,
            edge_weights: m.edge_weights,
            notes: m.notes,
        }
    }
}

impl TryFrom<RawMap> for CoarseningMap {
    type Error = Error;
    fn try_from(raw: RawMap) -> Result<Self> {
        let mut map = CoarseningMap::from_partition(raw.id, raw.method, raw.r, raw.partition)?;
        map.levels = raw.levels;
        map.edge_weights = raw.edge_weights;
        map.notes = raw.notes;
        Ok(map)
    }
}

impl CoarseningMap {
    pub fn from_partition(
        sample_id: String,
        method: CoarsenMethod,
        r: f64,
        mut partition: BTreeMap<NodeId, Vec<NodeId>>,
    ) -> Result<Self> {
        let mut assignment = BTreeMap::new();
        for (&sn, block) in partition.iter_mut() {
            block.sort_unstable();
            if block.is_empty() {
                return Err(Error::Mapping(format!("supernode {sn} has an empty block")));
            }
            for &v in block.iter() {
                if assignment.insert(v, sn).is_some() {
                    return Err(Error::Mapping(format!(
                        "node {v} assigned to two supernodes"
                    )));
                }
            }
        }
        Ok(Self {
            sample_id,
            method,
            r,
            partition,
            assignment,
            levels: 0,
            edge_weights: Vec::new(),
            notes: Vec::new(),
        })
    }

    pub fn identity(g: &SampleGraph) -> Self {
        let partition = g.nodes().iter().map(|&v| (v, vec![v])).collect();
        Self::from_partition(g.id().to_string(), CoarsenMethod::Identity, 0.0, partition)
            .expect("singleton blocks are a partition")
    }

    pub fn partition(&self) -> &BTreeMap<NodeId, Vec<NodeId>> {
        &self.partition
    }

    pub fn assignment(&self) -> &BTreeMap<NodeId, NodeId> {
        &self.assignment
    }

    pub fn supernodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.partition.keys().copied()
    }

    pub fn num_supernodes(&self) -> usize {
        self.partition.len()
    }

    pub fn block(&self, supernode: NodeId) -> Option<&[NodeId]> {
        self.partition.get(&supernode).map(Vec::as_slice)
    }

    /// Check the map is a partition of exactly `nodes`.
    pub fn covers(&self, nodes: &[NodeId]) -> bool {
        self.assignment.len() == nodes.len()
            && nodes.iter().all(|v| self.assignment.contains_key(v))
    }
}

/// `ceil((1 - r) n)`, at least 1. A small slack absorbs rounding in `1 - r`.
pub fn target_size(n: usize, r: f64) -> usize {
    (((1.0 - r) * n as f64) - 1e-9).ceil().max(1.0) as usize
}

fn check_ratio(r: f64) -> Result<()> {
    if (0.0..1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "coarsening ratio {r} outside [0,1)"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoarsenConfig {
    pub method: CoarsenMethod,
    pub r: f64,
    pub k_subspace: Option<usize>,
}

/// Coarsen a CFG with the configured method.
pub fn coarsen(g: &SampleGraph, cfg: &CoarsenConfig) -> Result<(SampleGraph, CoarseningMap)> {
    check_ratio(cfg.r)?;
    match cfg.method {
        CoarsenMethod::Identity => {
            let map = CoarseningMap::identity(g);
            Ok((build_coarse_graph(g, &map, &BTreeMap::new())?, map))
        }
        CoarsenMethod::Kron => coarsen_kron(g, cfg.r),
        CoarsenMethod::VariationEdges => {
            coarsen_variation_edges(g, cfg.r, cfg.k_subspace.unwrap_or(DEFAULT_K_SUBSPACE))
        }
    }
}

/// Assemble the C-CFG for a partition. Supernode payload is the
/// concatenation of its members' instruction lists. Coarse edges are the
/// original edges between distinct blocks (direction kept, self-edges
/// dropped, duplicates merged) plus any `extra` undirected pairs that have
/// no original edge between their blocks, oriented smaller id first.
fn build_coarse_graph(
    g: &SampleGraph,
    map: &CoarseningMap,
    extra: &BTreeMap<(NodeId, NodeId), f64>,
) -> Result<SampleGraph> {
    let mut nodes = Vec::with_capacity(map.num_supernodes());
    for (&sn, block) in map.partition() {
        let mut payload = Vec::new();
        for &v in block {
            let instrs = g.instructions(v).ok_or_else(|| {
                Error::Mapping(format!("block of {sn} references unknown node {v}"))
            })?;
            payload.extend_from_slice(instrs);
        }
        nodes.push((sn, payload));
    }
    let mut edges = BTreeSet::new();
    let mut linked = BTreeSet::new();
    for &(s, d) in g.edges() {
        let (a, b) = (map.assignment[&s], map.assignment[&d]);
        if a != b {
            edges.insert((a, b));
            linked.insert((a.min(b), a.max(b)));
        }
    }
    for &pair in extra.keys() {
        if !linked.contains(&pair) {
            edges.insert(pair);
        }
    }
    let coarse = SampleGraph::new(
        g.id(),
        Level::CCfg,
        g.label(),
        nodes,
        edges.into_iter().collect(),
    )?;
    Ok(coarse)
}

/// Supernode features: the sum of member node features.
pub fn embed_supernodes(
    c_cfg: SampleGraph,
    map: &CoarseningMap,
    embedded_cfg: &SampleGraph,
) -> Result<SampleGraph> {
    let x = embedded_cfg.features().ok_or_else(|| {
        Error::InvalidArgument(format!("sample {} has no CFG features", embedded_cfg.id()))
    })?;
    let mut out = Matrix::zeros(c_cfg.num_nodes(), x.cols());
    for (i, sn) in c_cfg.nodes().iter().enumerate() {
        let block = map
            .block(*sn)
            .ok_or_else(|| Error::Mapping(format!("supernode {sn} missing from coarsening map")))?;
        let row = out.row_mut(i);
        for v in block {
            let j = embedded_cfg.index_of(*v).ok_or_else(|| {
                Error::Mapping(format!("block of {sn} references unknown node {v}"))
            })?;
            for (o, e) in row.iter_mut().zip(x.row(j)) {
                *o += e;
            }
        }
    }
    c_cfg.with_features(out)
}

/// Union of the blocks of `supernodes`.
pub fn backtrack_nodes(
    map: &CoarseningMap,
    supernodes: &BTreeSet<NodeId>,
) -> Result<BTreeSet<NodeId>> {
    let mut out = BTreeSet::new();
    for sn in supernodes {
        let block = map.block(*sn).ok_or_else(|| {
            Error::Mapping(format!(
                "unknown supernode {sn} in sample {}",
                map.sample_id
            ))
        })?;
        out.extend(block.iter().copied());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphdata::{InstructionRecord, Label};

    pub(crate) fn graph(n: u32, edges: &[(u32, u32)]) -> SampleGraph {
        SampleGraph::new(
            "g",
            Level::Cfg,
            Label::Benign,
            (0..n)
                .map(|i| {
                    (
                        NodeId(i),
                        vec![InstructionRecord::absent(); (i % 3 + 1) as usize],
                    )
                })
                .collect(),
            edges.iter().map(|&(a, b)| (NodeId(a), NodeId(b))).collect(),
        )
        .unwrap()
    }

    fn ids(v: &[u32]) -> BTreeSet<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    #[test]
    fn target_size_rounding() {
        assert_eq!(target_size(8, 0.75), 2);
        assert_eq!(target_size(8, 0.5), 4);
        assert_eq!(target_size(3, 0.999), 1);
        assert_eq!(target_size(10, 0.25), 8);
        assert_eq!(target_size(7, 0.0), 7);
    }

    #[test]
    fn identity_coarsening_keeps_graph() {
        let g = graph(4, &[(0, 1), (1, 2), (3, 2)]);
        let cfg = CoarsenConfig {
            method: CoarsenMethod::Identity,
            r: 0.0,
            k_subspace: None,
        };
        let (c, map) = coarsen(&g, &cfg).unwrap();
        assert_eq!(c.edges(), g.edges());
        assert_eq!(c.payload(), g.payload());
        assert_eq!(c.level(), Level::CCfg);
        assert!(map.covers(g.nodes()));
    }

    #[test]
    fn backtrack_rules() {
        let mut part = BTreeMap::new();
        part.insert(NodeId(0), vec![NodeId(0), NodeId(1)]);
        part.insert(NodeId(2), vec![NodeId(2), NodeId(3)]);
        let map =
            CoarseningMap::from_partition("g".into(), CoarsenMethod::VariationEdges, 0.5, part)
                .unwrap();
        assert_eq!(
            backtrack_nodes(&map, &ids(&[0, 2])).unwrap(),
            ids(&[0, 1, 2, 3])
        );
        assert!(backtrack_nodes(&map, &BTreeSet::new()).unwrap().is_empty());
        assert_eq!(backtrack_nodes(&map, &ids(&[2])).unwrap(), ids(&[2, 3]));
        assert!(matches!(
            backtrack_nodes(&map, &ids(&[1])),
            Err(Error::Mapping(_))
        ));
    }

    #[test]
    fn overlapping_partition_rejected() {
        let mut part = BTreeMap::new();
        part.insert(NodeId(0), vec![NodeId(0), NodeId(1)]);
        part.insert(NodeId(1), vec![NodeId(1)]);
        assert!(CoarseningMap::from_partition("g".into(), CoarsenMethod::Kron, 0.5, part).is_err());
    }

    #[test]
    fn embed_supernodes_sums_and_conserves() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        let x = Matrix::from_rows(&[
            vec![1.0, 0.0],
            vec![0.0, 2.0],
            vec![3.0, 1.0],
            vec![1.0, 1.0],
        ]);
        let g = g.with_features(x.clone()).unwrap();
        let mut part = BTreeMap::new();
        part.insert(NodeId(0), vec![NodeId(0), NodeId(1)]);
        part.insert(NodeId(2), vec![NodeId(2)]);
        part.insert(NodeId(3), vec![NodeId(3)]);
        let map =
            CoarseningMap::from_partition("g".into(), CoarsenMethod::VariationEdges, 0.25, part)
                .unwrap();
        let coarse = build_coarse_graph(&g, &map, &BTreeMap::new()).unwrap();
        let e = embed_supernodes(coarse, &map, &g).unwrap();
        let f = e.features().unwrap();
        assert_eq!(f.row(0), &[1.0, 2.0]);
        assert_eq!(f.row(1), &[3.0, 1.0]);
        assert_eq!(f.column_sums(), x.column_sums());

        let ident = CoarseningMap::identity(&g);
        let same = embed_supernodes(
            build_coarse_graph(&g, &ident, &BTreeMap::new()).unwrap(),
            &ident,
            &g,
        )
        .unwrap();
        assert_eq!(same.features(), Some(&x));
    }

    #[test]
    fn payload_embedding_equals_supernode_sum() {
        use crate::encode::{build_default_vocabulary, embed_cfg_nodes};
        use crate::graphdata::{generate_synthetic, ClassMotifSpec};
        let samples = generate_synthetic(3, &ClassMotifSpec::default(), 6).unwrap();
        let vocab = build_default_vocabulary(&samples).unwrap();
        for g in samples {
            let cfg = CoarsenConfig {
                method: CoarsenMethod::Kron,
                r: 0.5,
                k_subspace: None,
            };
            let (c, map) = coarsen(&g, &cfg).unwrap();
            let embedded = embed_cfg_nodes(g, &vocab).unwrap();
            let a = embed_supernodes(c.clone(), &map, &embedded).unwrap();
            let b = embed_cfg_nodes(c, &vocab).unwrap();
            assert_eq!(a.features(), b.features());
        }
    }

    #[test]
    fn map_serialises_with_sorted_blocks() {
        let mut part = BTreeMap::new();
        part.insert(NodeId(3), vec![NodeId(7), NodeId(3)]);
        let map =
            CoarseningMap::from_partition("s".into(), CoarsenMethod::Kron, 0.5, part).unwrap();
        let json = serde_json::to_string(&map).unwrap();
        assert!(json.contains("\"partition\":{\"3\":[3,7]}"), "{json}");
        let back: CoarseningMap = serde_json::from_str(&json).unwrap();
        assert_eq!(back, map);
        assert_eq!(back.assignment()[&NodeId(7)], NodeId(3));
    }
}
