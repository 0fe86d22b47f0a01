// SPDX-License-Identifier: Apache-2.0

//! Weisfeiler-Lehman colour refinement used to approximate isomorphism
//! classes when deduplicating samples.

use std::collections::BTreeMap;

use super::SampleGraph;

pub const WL_ROUNDS: usize = 3;

/// Order-independent summary of a graph after colour refinement: node and
/// edge counts plus the colour histogram of every round.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WlSignature {
    pub nodes: usize,
    pub edges: usize,
    pub histograms: Vec<Vec<(u64, usize)>>,
}

/// Shared colour dictionary so colours are comparable across graphs.
#[derive(Default)]
struct Palette {
    colours: BTreeMap<Vec<u64>, u64>,
}

impl Palette {
    fn colour(&mut self, key: Vec<u64>) -> u64 {
        let next = self.colours.len() as u64;
        *self.colours.entry(key).or_insert(next)
    }
}

fn histogram(colours: &[u64]) -> Vec<(u64, usize)> {
    let mut h: BTreeMap<u64, usize> = BTreeMap::new();
    for &c in colours {
        *h.entry(c).or_default() += 1;
    }
    h.into_iter().collect()
}

fn signature_with(g: &SampleGraph, palette: &mut Palette) -> WlSignature {
    let n = g.num_nodes();
    let edges = g.edge_index();
    let out_deg = g.out_degrees();
    let in_deg = g.in_degrees();
    let mut preds = vec![Vec::new(); n];
    let mut succs = vec![Vec::new(); n];
    for &(s, d) in &edges {
        succs[s].push(d);
        preds[d].push(s);
    }
    let mut colours: Vec<u64> = (0..n)
        .map(|v| {
            palette.colour(vec![
                0,
                out_deg[v] as u64,
                in_deg[v] as u64,
                g.payload()[v].len() as u64,
            ])
        })
        .collect();
    let mut histograms = vec![histogram(&colours)];
    for round in 1..=WL_ROUNDS {
        let next: Vec<u64> = (0..n)
            .map(|v| {
                let mut ins: Vec<u64> = preds[v].iter().map(|&u| colours[u]).collect();
                let mut outs: Vec<u64> = succs[v].iter().map(|&u| colours[u]).collect();
                ins.sort_unstable();
                outs.sort_unstable();
                let mut key = Vec::with_capacity(4 + ins.len() + outs.len());
                key.extend([round as u64, colours[v], ins.len() as u64]);
                key.extend(ins);
                key.push(u64::MAX);
                key.extend(outs);
                palette.colour(key)
            })
            .collect();
        colours = next;
        histograms.push(histogram(&colours));
    }
    WlSignature {
        nodes: n,
        edges: edges.len(),
        histograms,
    }
}

/// Signatures for a batch of graphs computed against one shared palette.
pub fn wl_signature(graphs: &[SampleGraph]) -> Vec<WlSignature> {
    let mut palette = Palette::default();
    graphs
        .iter()
        .map(|g| signature_with(g, &mut palette))
        .collect()
}

/// Keep one sample per WL class (initial colours: out-degree, in-degree,
/// instruction count; three refinement rounds). The representative is the
/// lexicographically smallest sample id; output is sorted by id.
pub fn dedup_nonisomorphic(samples: Vec<SampleGraph>) -> Vec<SampleGraph> {
    let sigs = wl_signature(&samples);
    let mut best: BTreeMap<WlSignature, usize> = BTreeMap::new();
    for (i, sig) in sigs.into_iter().enumerate() {
        best.entry(sig)
            .and_modify(|j| {
                if samples[i].id() < samples[*j].id() {
                    *j = i;
                }
            })
            .or_insert(i);
    }
    let keep: std::collections::BTreeSet<usize> = best.into_values().collect();
    let dropped = samples.len() - keep.len();
    if dropped > 0 {
        log::info!("dedup removed {dropped} isomorphic duplicates");
    }
    let mut out: Vec<SampleGraph> = samples
        .into_iter()
        .enumerate()
        .filter(|(i, _)| keep.contains(i))
        .map(|(_, g)| g)
        .collect();
    out.sort_by(|a, b| a.id().cmp(b.id()));
    out
}
