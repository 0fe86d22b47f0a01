// SPDX-License-Identifier: Apache-2.0

//! Assembly flow graphs: every basic block is expanded into a path of its
//! instructions. Block in-edges land on the head instruction and block
//! out-edges leave from the tail instruction.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphdata::{InstructionRecord, Level, NodeId, SampleGraph};

/// Block ↔ instruction-node correspondence for one sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AfgCorrespondence {
    cfg_nodes: Vec<NodeId>,
    /// Instruction list (head to tail) of each CFG node, aligned with `cfg_nodes`.
    lists: Vec<Vec<NodeId>>,
    /// AFG node id `i` ↦ (CFG node, position in its list). AFG ids are dense.
    origin: Vec<(NodeId, usize)>,
}

impl AfgCorrespondence {
    pub fn cfg_nodes(&self) -> &[NodeId] {
        &self.cfg_nodes
    }

    pub fn instruction_list(&self, cfg_node: NodeId) -> Option<&[NodeId]> {
        self.cfg_nodes
            .binary_search(&cfg_node)
            .ok()
            .map(|i| self.lists[i].as_slice())
    }

    pub fn head(&self, cfg_node: NodeId) -> Option<NodeId> {
        self.instruction_list(cfg_node)
            .and_then(|l| l.first().copied())
    }

    pub fn tail(&self, cfg_node: NodeId) -> Option<NodeId> {
        self.instruction_list(cfg_node)
            .and_then(|l| l.last().copied())
    }

    pub fn origin(&self, afg_node: NodeId) -> Option<(NodeId, usize)> {
        self.origin.get(afg_node.0 as usize).copied()
    }

    pub fn num_afg_nodes(&self) -> usize {
        self.origin.len()
    }

    /// Union of the instruction lists of `cfg_nodes`, sorted.
    pub fn resolve(&self, cfg_nodes: &BTreeSet<NodeId>) -> Result<BTreeSet<NodeId>> {
        let mut out = BTreeSet::new();
        for &c in cfg_nodes {
            let list = self
                .instruction_list(c)
                .ok_or_else(|| Error::Mapping(format!("CFG node {c} has no instruction list")))?;
            out.extend(list.iter().copied());
        }
        Ok(out)
    }
}

/// Expand a CFG into its AFG. Empty blocks become a single all-absent
/// placeholder instruction so edge rewiring stays total.
pub fn build_afg(g: &SampleGraph) -> Result<(SampleGraph, AfgCorrespondence)> {
    if g.level() != Level::Cfg {
        return Err(Error::InvalidArgument(format!(
            "build_afg needs a CFG sample, `{}` is {}",
            g.id(),
            g.level().tag()
        )));
    }
    let mut nodes = Vec::with_capacity(g.instruction_count());
    let mut lists = Vec::with_capacity(g.num_nodes());
    let mut origin = Vec::new();
    let mut edges = BTreeSet::new();
    for (&cfg_node, instrs) in g.nodes().iter().zip(g.payload()) {
        let placeholder = [InstructionRecord::absent()];
        let instrs: &[InstructionRecord] = if instrs.is_empty() {
            &placeholder
        } else {
            instrs
        };
        let mut list = Vec::with_capacity(instrs.len());
        for (pos, ins) in instrs.iter().enumerate() {
            let id = NodeId(origin.len() as u32);
            origin.push((cfg_node, pos));
            nodes.push((id, vec![ins.clone()]));
            if let Some(&prev) = list.last() {
                edges.insert((prev, id));
            }
            list.push(id);
        }
        lists.push(list);
    }
    let corr = AfgCorrespondence {
        cfg_nodes: g.nodes().to_vec(),
        lists,
        origin,
    };
    for &(u, v) in g.edges() {
        let tail = corr.tail(u).expect("every block has a list");
        let head = corr.head(v).expect("every block has a list");
        edges.insert((tail, head));
    }
    let afg = SampleGraph::new(
        g.id(),
        Level::Afg,
        g.label(),
        nodes,
        edges.into_iter().collect(),
    )?;
    Ok((afg, corr))
}

/// Per-block outcome of the degree check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeCheck {
    pub cfg_node: NodeId,
    pub in_ok: bool,
    pub out_ok: bool,
}

impl DegreeCheck {
    pub fn passed(&self) -> bool {
        self.in_ok && self.out_ok
    }
}

/// Check that every block's CFG in-degree reappears as the external
/// in-degree of its head instruction, and likewise out-degree at the tail.
/// External means not an intra-list path edge.
pub fn check_degree_preservation(
    cfg: &SampleGraph,
    afg: &SampleGraph,
    corr: &AfgCorrespondence,
) -> Vec<DegreeCheck> {
    let cfg_in = cfg.in_degrees();
    let cfg_out = cfg.out_degrees();
    let is_path_edge = |s: NodeId, d: NodeId| match (corr.origin(s), corr.origin(d)) {
        (Some((bs, ps)), Some((bd, pd))) => bs == bd && pd == ps + 1,
        _ => false,
    };
    let mut ext_in = vec![0usize; afg.num_nodes()];
    let mut ext_out = vec![0usize; afg.num_nodes()];
    for (&(s, d), &(si, di)) in afg.edges().iter().zip(afg.edge_index().iter()) {
        if !is_path_edge(s, d) {
            ext_out[si] += 1;
            ext_in[di] += 1;
        }
    }
    cfg.nodes()
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let head = corr.head(u).and_then(|h| afg.index_of(h));
            let tail = corr.tail(u).and_then(|t| afg.index_of(t));
            DegreeCheck {
                cfg_node: u,
                in_ok: head.is_some_and(|h| ext_in[h] == cfg_in[i]),
                out_ok: tail.is_some_and(|t| ext_out[t] == cfg_out[i]),
            }
        })
        .collect()
}
