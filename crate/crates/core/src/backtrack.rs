// SPDX-License-Identifier: Apache-2.0

//! Resolve a coarse explanation down to instruction nodes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::afg::AfgCorrespondence;
use crate::coarsen::{backtrack_nodes, CoarseningMap};
use crate::encode::{embed_bafg_nodes, VocabularyMap};
use crate::error::{Error, Result};
use crate::explain::ExplanationMask;
use crate::graphdata::{DatasetSplit, Level, NodeId, SampleGraph};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BacktrackRecord {
    pub sample_id: String,
    pub selected_supernodes: Vec<NodeId>,
    pub resolved_cfg_nodes: Vec<NodeId>,
    pub resolved_afg_nodes: Vec<NodeId>,
    pub bafg_id: String,
}

/// Edgewise-induced subgraph of the AFG on the instruction nodes of the
/// selected supernodes' blocks, relabelled as a B-AFG.
pub fn build_bafg(
    selection: &ExplanationMask,
    cmap: &CoarseningMap,
    corr: &AfgCorrespondence,
    afg: &SampleGraph,
) -> Result<(SampleGraph, BacktrackRecord)> {
    if selection.sample_id != cmap.sample_id || afg.id() != cmap.sample_id {
        return Err(Error::Mapping(format!(
            "selection `{}`, coarsening map `{}` and AFG `{}` are not the same sample",
            selection.sample_id,
            cmap.sample_id,
            afg.id()
        )));
    }
    if afg.level() != Level::Afg {
        return Err(Error::InvalidArgument(format!(
            "sample {} is not an AFG",
            afg.id()
        )));
    }
    let supernodes = selection.selected_node_set();
    let cfg_nodes = backtrack_nodes(cmap, &supernodes)?;
    let afg_nodes = corr
        .resolve(&cfg_nodes)
        .map_err(|e| Error::Mapping(format!("sample {}: {e}", afg.id())))?;
    let mut nodes = Vec::with_capacity(afg_nodes.len());
    for &v in &afg_nodes {
        let instrs = afg.instructions(v).ok_or_else(|| {
            Error::Mapping(format!(
                "sample {}: AFG node {v} from the correspondence is missing",
                afg.id()
            ))
        })?;
        nodes.push((v, instrs.to_vec()));
    }
    let edges = afg
        .edges()
        .iter()
        .copied()
        .filter(|(s, d)| afg_nodes.contains(s) && afg_nodes.contains(d))
        .collect();
    let bafg = SampleGraph::new(afg.id(), Level::BAfg, afg.label(), nodes, edges)?;
    let record = BacktrackRecord {
        sample_id: afg.id().to_string(),
        selected_supernodes: supernodes.into_iter().collect(),
        resolved_cfg_nodes: cfg_nodes.into_iter().collect(),
        resolved_afg_nodes: afg_nodes.into_iter().collect(),
        bafg_id: bafg.id().to_string(),
    };
    Ok((bafg, record))
}

#[derive(Debug, Clone)]
pub struct BafgDataset {
    pub train: Vec<SampleGraph>,
    pub val: Vec<SampleGraph>,
    pub test: Vec<SampleGraph>,
}

/// Featured B-AFG train/val/test sets mirroring the CFG-level split.
pub fn assemble_bafg_dataset(
    split: &DatasetSplit,
    bafgs: BTreeMap<String, SampleGraph>,
    vocab: &VocabularyMap,
) -> Result<BafgDataset> {
    let mut bafgs = bafgs;
    let mut take = |ids: &[String]| -> Result<Vec<SampleGraph>> {
        ids.iter()
            .map(|id| {
                let g = bafgs
                    .remove(id)
                    .ok_or_else(|| Error::Mapping(format!("no B-AFG for split sample {id}")))?;
                embed_bafg_nodes(g, vocab)
            })
            .collect()
    };
    let train = take(&split.train_ids)?;
    let val = take(&split.val_ids)?;
    let test = take(&split.test_ids)?;
    if !bafgs.is_empty() {
        log::warn!(
            "{} B-AFGs are not part of the split and were dropped",
            bafgs.len()
        );
    }
    Ok(BafgDataset { train, val, test })
}

/// Structural check that `sub` uses only nodes, edges and payloads of `afg`.
pub fn is_subgraph_of(sub: &SampleGraph, afg: &SampleGraph) -> bool {
    let edges: BTreeSet<_> = afg.edges().iter().collect();
    sub.nodes()
        .iter()
        .zip(sub.payload())
        .all(|(v, p)| afg.instructions(*v) == Some(p.as_slice()))
        && sub.edges().iter().all(|e| edges.contains(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::afg::build_afg;
    use crate::coarsen::{coarsen, CoarsenConfig, CoarsenMethod};
    use crate::encode::build_default_vocabulary;
    use crate::explain::{select_tes, EdgeAttribution, SelectionPolicy};
    use crate::graphdata::{
        generate_synthetic, split_dataset, ClassMotifSpec, InstructionRecord, Label, NodeId,
    };

    fn cfg(counts: &[usize], edges: &[(u32, u32)]) -> SampleGraph {
        SampleGraph::new(
            "s",
            Level::Cfg,
            Label::Malicious,
            counts
                .iter()
                .enumerate()
                .map(|(i, &k)| (NodeId(i as u32), vec![InstructionRecord::absent(); k]))
                .collect(),
            edges.iter().map(|&(a, b)| (NodeId(a), NodeId(b))).collect(),
        )
        .unwrap()
    }

    fn mask_selecting(g: &SampleGraph, nodes: &[u32]) -> ExplanationMask {
        let mut m = select_tes(
            g,
            &EdgeAttribution {
                target: Label::Malicious,
                values: vec![0.0; g.num_edges()],
            },
            &SelectionPolicy::default(),
        )
        .unwrap();
        m.selected_nodes = nodes.iter().map(|&n| NodeId(n)).collect();
        m
    }

    #[test]
    fn selecting_everything_gives_the_afg() {
        let g = cfg(&[2, 3, 1], &[(0, 1), (1, 2), (2, 0)]);
        let (afg, corr) = build_afg(&g).unwrap();
        let map = CoarseningMap::identity(&g);
        let sel = mask_selecting(&g, &[0, 1, 2]);
        let (b, rec) = build_bafg(&sel, &map, &corr, &afg).unwrap();
        assert_eq!(b.nodes(), afg.nodes());
        assert_eq!(b.edges(), afg.edges());
        assert_eq!(b.level(), Level::BAfg);
        assert_eq!(rec.resolved_afg_nodes.len(), 6);
    }

    #[test]
    fn one_block_of_three_is_a_path() {
        let g = cfg(&[1, 3, 1], &[(0, 1), (1, 2)]);
        let (afg, corr) = build_afg(&g).unwrap();
        let map = CoarseningMap::identity(&g);
        let (b, rec) = build_bafg(&mask_selecting(&g, &[1]), &map, &corr, &afg).unwrap();
        assert_eq!(b.nodes(), &[NodeId(1), NodeId(2), NodeId(3)]);
        assert_eq!(b.edges(), &[(NodeId(1), NodeId(2)), (NodeId(2), NodeId(3))]);
        assert_eq!(rec.resolved_cfg_nodes, vec![NodeId(1)]);
    }

    #[test]
    fn connected_blocks_keep_the_cross_edge() {
        // blocks 0 (2 instrs) -> 1 (2 instrs): AFG 0-1 | 2-3, cross edge 1->2
        let g = cfg(&[2, 2, 1], &[(0, 1), (1, 2)]);
        let (afg, corr) = build_afg(&g).unwrap();
        let map = CoarseningMap::identity(&g);
        let (b, _) = build_bafg(&mask_selecting(&g, &[0, 1]), &map, &corr, &afg).unwrap();
        assert_eq!(
            b.edges(),
            &[
                (NodeId(0), NodeId(1)),
                (NodeId(1), NodeId(2)),
                (NodeId(2), NodeId(3))
            ]
        );
        assert!(is_subgraph_of(&b, &afg));
    }

    #[test]
    fn supernode_resolves_through_both_maps() {
        let g = cfg(&[2, 1, 3, 1], &[(0, 1), (1, 2), (2, 3)]);
        let (c, map) = coarsen(
            &g,
            &CoarsenConfig {
                method: CoarsenMethod::VariationEdges,
                r: 0.5,
                k_subspace: None,
            },
        )
        .unwrap();
        let (afg, corr) = build_afg(&g).unwrap();
        let first = c.nodes()[0];
        let sel = mask_selecting(&c, &[first.0]);
        let (b, rec) = build_bafg(&sel, &map, &corr, &afg).unwrap();
        let block = map.block(first).unwrap();
        let expected: usize = block
            .iter()
            .map(|v| g.instructions(*v).unwrap().len())
            .sum();
        assert_eq!(b.num_nodes(), expected);
        assert_eq!(rec.resolved_cfg_nodes, block.to_vec());
    }

    #[test]
    fn mismatched_maps_are_rejected() {
        let g = cfg(&[1, 1], &[(0, 1)]);
        let (afg, corr) = build_afg(&g).unwrap();
        let mut map = CoarseningMap::identity(&g);
        map.sample_id = "other".into();
        assert!(matches!(
            build_bafg(&mask_selecting(&g, &[0]), &map, &corr, &afg),
            Err(Error::Mapping(_))
        ));
        let map = CoarseningMap::identity(&g);
        let err = build_bafg(&mask_selecting(&g, &[7]), &map, &corr, &afg).unwrap_err();
        assert!(
            err.to_string().contains("n7") || err.to_string().contains('7'),
            "{err}"
        );
    }

    #[test]
    fn dataset_mirrors_split_and_uses_opcode_width() {
        let samples = generate_synthetic(8, &ClassMotifSpec::default(), 4).unwrap();
        let split = split_dataset(&samples, 0.75, 0.2, 1).unwrap();
        let vocab = build_default_vocabulary(&samples).unwrap();
        let mut bafgs = BTreeMap::new();
        for g in &samples {
            let (afg, corr) = build_afg(g).unwrap();
            let map = CoarseningMap::identity(g);
            let all: Vec<u32> = g.nodes().iter().map(|n| n.0).collect();
            let (b, _) = build_bafg(&mask_selecting(g, &all), &map, &corr, &afg).unwrap();
            bafgs.insert(g.id().to_string(), b);
        }
        let ds = assemble_bafg_dataset(&split, bafgs, &vocab).unwrap();
        let ids = |v: &[SampleGraph]| v.iter().map(|g| g.id().to_string()).collect::<Vec<_>>();
        assert_eq!(ids(&ds.train), split.train_ids);
        assert_eq!(ids(&ds.val), split.val_ids);
        assert_eq!(ids(&ds.test), split.test_ids);
        assert_eq!(ds.train.len() + ds.val.len() + ds.test.len(), 8);
        let observed: BTreeSet<u32> = samples
            .iter()
            .flat_map(|g| g.payload().iter().flatten().map(|i| i.opcode0()))
            .collect();
        assert_eq!(ds.train[0].features().unwrap().cols(), observed.len() + 1);
        assert!(assemble_bafg_dataset(&split, BTreeMap::new(), &vocab).is_err());
    }
}
