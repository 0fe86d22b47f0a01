// SPDX-License-Identifier: Apache-2.0

//! Local-variation coarsening, edge variant.
//!
//! At each level the candidate families are the edges of the current
//! (weighted) graph. An edge `{i, j}` costs
//! `(d_i + d_j) / 2 · ‖a_i − a_j‖²`, where `a_v` is row `v` of
//! `U_K Λ_K^{-1/2}` built from the `K` smallest Laplacian eigenpairs
//! (null directions zeroed). That is the spectral norm of `Bᵀ L_C B` for
//! the 2-node family with `B = Π_C A_C`. Edges are contracted greedily in
//! ascending cost as a matching until the target size is met; levels repeat
//! on the contracted graph.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::spectral::{laplacian_of, sorted_eigen, symmetric_adjacency};
use super::{build_coarse_graph, check_ratio, target_size, CoarsenMethod, CoarseningMap};
use crate::error::Result;
use crate::graphdata::{NodeId, SampleGraph};

pub const DEFAULT_K_SUBSPACE: usize = 10;
const EIGEN_MAX_ITER: usize = 10_000;
const NULL_EIGENVALUE: f64 = 1e-10;

/// Spectral embedding `U_K Λ_K^{-1/2}` with null eigenvalues zeroed.
fn variation_basis(l: &DMatrix<f64>, k: usize, max_iter: usize) -> Option<DMatrix<f64>> {
    let (vals, vecs) = sorted_eigen(l, max_iter)?;
    let k = k.min(vals.len());
    let mut a = vecs.columns(0, k).into_owned();
    for (c, &lam) in vals.iter().take(k).enumerate() {
        let scale = if lam < NULL_EIGENVALUE {
            0.0
        } else {
            lam.powf(-0.5)
        };
        a.column_mut(c).scale_mut(scale);
    }
    Some(a)
}

/// Contraction costs of every edge `(i, j, w)` with `i < j`.
pub(crate) fn edge_costs(
    w: &DMatrix<f64>,
    basis: Option<&DMatrix<f64>>,
) -> Vec<(f64, usize, usize)> {
    let n = w.nrows();
    let deg: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let wij = w[(i, j)];
            if wij <= 0.0 {
                continue;
            }
            let cost = match basis {
                Some(a) => {
                    let diff = a.row(i) - a.row(j);
                    0.5 * (deg[i] + deg[j]) * diff.norm_squared()
                }
                // heavy-edge ranking: strongest relative coupling first
                None => -wij / deg[i].max(deg[j]),
            };
            out.push((cost, i, j));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    out
}

pub fn coarsen_variation_edges(
    g: &SampleGraph,
    r: f64,
    k_subspace: usize,
) -> Result<(SampleGraph, CoarseningMap)> {
    coarsen_variation_edges_with(g, r, k_subspace, EIGEN_MAX_ITER)
}

pub(crate) fn coarsen_variation_edges_with(
    g: &SampleGraph,
    r: f64,
    k_subspace: usize,
    eigen_max_iter: usize,
) -> Result<(SampleGraph, CoarseningMap)> {
    check_ratio(r)?;
    let n = g.num_nodes();
    let target = target_size(n, r);
    let mut w = symmetric_adjacency(g);
    // blocks of original positions, one per current node
    let mut blocks: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    let mut levels = 0;
    let mut notes = Vec::new();

    while blocks.len() > target {
        let m = blocks.len();
        let k = k_subspace.min(m.saturating_sub(1)).max(1);
        let basis = variation_basis(&laplacian_of(&w), k, eigen_max_iter);
        if basis.is_none() {
            notes.push(format!(
                "eigensolver failed at level {}; heavy-edge ranking used",
                levels + 1
            ));
            log::warn!(
                "sample {}: eigensolver failed, falling back to heavy-edge",
                g.id()
            );
        }
        let costs = edge_costs(&w, basis.as_ref());
        let mut partner: Vec<Option<usize>> = vec![None; m];
        let mut remaining = m;
        for &(_, i, j) in &costs {
            if remaining <= target {
                break;
            }
            if partner[i].is_none() && partner[j].is_none() {
                partner[i] = Some(j);
                partner[j] = Some(i);
                remaining -= 1;
            }
        }
        if remaining == m {
            break;
        }
        // new index per current node: matched pairs share the smaller one's slot
        let mut new_index = vec![usize::MAX; m];
        let mut next = 0;
        for v in 0..m {
            if new_index[v] != usize::MAX {
                continue;
            }
            new_index[v] = next;
            if let Some(p) = partner[v] {
                new_index[p] = next;
            }
            next += 1;
        }
        let mut new_blocks: Vec<Vec<usize>> = vec![Vec::new(); next];
        for v in 0..m {
            new_blocks[new_index[v]].extend_from_slice(&blocks[v]);
        }
        let mut new_w = DMatrix::zeros(next, next);
        for i in 0..m {
            for j in 0..m {
                let (a, b) = (new_index[i], new_index[j]);
                if a != b {
                    new_w[(a, b)] += w[(i, j)];
                }
            }
        }
        blocks = new_blocks;
        w = new_w;
        levels += 1;
    }

    let nodes = g.nodes();
    let mut partition: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    let mut rep = Vec::with_capacity(blocks.len());
    for b in &blocks {
        let members: Vec<NodeId> = b.iter().map(|&v| nodes[v]).collect();
        let sn = *members.iter().min().expect("nonempty block");
        rep.push(sn);
        partition.insert(sn, members);
    }
    let mut map = CoarseningMap::from_partition(
        g.id().to_string(),
        CoarsenMethod::VariationEdges,
        r,
        partition,
    )?;
    map.levels = levels;
    map.notes = notes;
    let mut weights = Vec::new();
    for i in 0..blocks.len() {
        for j in i + 1..blocks.len() {
            if w[(i, j)] > 0.0 {
                let (a, b) = (rep[i], rep[j]);
                weights.push((a.min(b), a.max(b), w[(i, j)]));
            }
        }
    }
    weights.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    map.edge_weights = weights;
    let coarse = build_coarse_graph(g, &map, &BTreeMap::new())?;
    Ok((coarse, map))
}
