// SPDX-License-Identifier: Apache-2.0

//! Kron reduction by repeated halving.
//!
//! Each level keeps the nodes where the top Laplacian eigenvector is
//! non-negative (per connected component) and replaces the Laplacian by its
//! Schur complement onto them. Eliminated nodes join the kept node with the
//! largest harmonic-interpolation weight `-L_EE⁻¹ L_EK` at that level.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::spectral::{laplacian, sorted_eigen};
use super::{build_coarse_graph, check_ratio, target_size, CoarsenMethod, CoarseningMap};
use crate::error::{Error, Result};
use crate::graphdata::{NodeId, SampleGraph};

const EIGEN_MAX_ITER: usize = 10_000;
const COUPLING_TOL: f64 = 1e-12;

/// Connected components of a Laplacian's off-diagonal pattern.
fn components(l: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = l.nrows();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for u in 0..n {
                if !seen[u] && u != v && l[(v, u)] < -COUPLING_TOL {
                    seen[u] = true;
                    comp.push(u);
                    stack.push(u);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Kept positions for one Kron level: per component of size ≥ 2, the nodes
/// whose entry of the largest-eigenvalue eigenvector is ≥ 0, with the
/// eigenvector's sign fixed so its largest-magnitude entry is positive.
/// Singleton components are kept. Returns `None` on eigensolver failure.
pub fn kron_kept_set(l: &DMatrix<f64>) -> Option<Vec<usize>> {
    let mut kept = Vec::new();
    for comp in components(l) {
        if comp.len() < 2 {
            kept.extend(comp);
            continue;
        }
        let sub = l.select_rows(&comp).select_columns(&comp);
        let (_, vecs) = sorted_eigen(&sub, EIGEN_MAX_ITER)?;
        let top = vecs.column(comp.len() - 1);
        let mut pivot = 0;
        for i in 1..top.len() {
            if top[i].abs() > top[pivot].abs() + 1e-12 {
                pivot = i;
            }
        }
        let sign = if top[pivot] < 0.0 { -1.0 } else { 1.0 };
        kept.extend(
            comp.iter()
                .zip(top.iter())
                .filter(|(_, &x)| sign * x >= -1e-12)
                .map(|(&v, _)| v),
        );
    }
    kept.sort_unstable();
    Some(kept)
}

/// Schur complement of `l` onto `kept` plus the harmonic interpolation
/// weights `-L_EE⁻¹ L_EK` (rows: eliminated positions in ascending order).
pub fn kron_reduce(l: &DMatrix<f64>, kept: &[usize]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = l.nrows();
    let mut is_kept = vec![false; n];
    for &k in kept {
        is_kept[k] = true;
    }
    let elim: Vec<usize> = (0..n).filter(|&i| !is_kept[i]).collect();
    let l_kk = l.select_rows(kept).select_columns(kept);
    if elim.is_empty() {
        return Ok((l_kk, DMatrix::zeros(0, kept.len())));
    }
    let l_ee = l.select_rows(&elim).select_columns(&elim);
    let l_ek = l.select_rows(&elim).select_columns(kept);
    let solved = match l_ee.clone().cholesky() {
        Some(ch) => ch.solve(&l_ek),
        None => l_ee
            .lu()
            .solve(&l_ek)
            .ok_or_else(|| Error::InvalidArgument("eliminated block is singular".into()))?,
    };
    let reduced = &l_kk - l_ek.transpose() * &solved;
    // symmetrise away round-off
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    Ok((reduced, -solved))
}

/// Coarsen by Kron halving until at most `ceil((1 - r) n)` nodes remain
/// (or every component is a single node).
pub fn coarsen_kron(g: &SampleGraph, r: f64) -> Result<(SampleGraph, CoarseningMap)> {
    check_ratio(r)?;
    let n = g.num_nodes();
    let target = target_size(n, r);
    let mut lap = laplacian(g);
    // current position -> original position
    let mut alive: Vec<usize> = (0..n).collect();
    // original position -> representative original position
    let mut owner: Vec<usize> = (0..n).collect();
    let mut levels = 0;
    let mut notes = Vec::new();

    while alive.len() > target {
        let Some(kept) = kron_kept_set(&lap) else {
            notes.push(format!(
                "eigensolver failed at level {}; stopped early",
                levels + 1
            ));
            log::warn!(
                "sample {}: Kron eigensolver failed at level {}",
                g.id(),
                levels + 1
            );
            break;
        };
        if kept.len() == alive.len() {
            break;
        }
        let (reduced, interp) = kron_reduce(&lap, &kept)?;
        let elim: Vec<usize> = (0..alive.len())
            .filter(|i| kept.binary_search(i).is_err())
            .collect();
        let mut rep_of_elim = Vec::with_capacity(elim.len());
        for (row, &e) in elim.iter().enumerate() {
            let mut best: Option<(f64, usize)> = None;
            for (col, &k) in kept.iter().enumerate() {
                let w = interp[(row, col)];
                // kept original positions ascend with col, so ties keep the smaller id
                match best {
                    Some((bw, _)) if w <= bw + COUPLING_TOL => {}
                    _ => best = Some((w, k)),
                }
            }
            let (_, k) = best.expect("at least one kept node");
            rep_of_elim.push((alive[e], alive[k]));
        }
        for (e_orig, k_orig) in rep_of_elim {
            for o in owner.iter_mut() {
                if *o == e_orig {
                    *o = k_orig;
                }
            }
        }
        alive = kept.iter().map(|&i| alive[i]).collect();
        lap = reduced;
        levels += 1;
    }

    let nodes = g.nodes();
    let mut partition: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for (v, &o) in owner.iter().enumerate() {
        partition.entry(nodes[o]).or_default().push(nodes[v]);
    }
    let mut map =
        CoarseningMap::from_partition(g.id().to_string(), CoarsenMethod::Kron, r, partition)?;
    map.levels = levels;
    map.notes = notes;

    let scale = (0..lap.nrows())
        .map(|i| lap[(i, i)].abs())
        .fold(0.0, f64::max)
        .max(1.0);
    let mut weights = BTreeMap::new();
    for i in 0..alive.len() {
        for j in i + 1..alive.len() {
            let w = -lap[(i, j)];
            if w > COUPLING_TOL * scale {
                let (a, b) = (nodes[alive[i]], nodes[alive[j]]);
                weights.insert((a.min(b), a.max(b)), w);
            }
        }
    }
    map.edge_weights = weights.iter().map(|(&(a, b), &w)| (a, b, w)).collect();
    let coarse = build_kron_graph(g, &map, &weights)?;
    Ok((coarse, map))
}

/// Coarse edges follow the reduced Laplacian's pattern; original edges
/// between the two blocks supply direction when present.
fn build_kron_graph(
    g: &SampleGraph,
    map: &CoarseningMap,
    weights: &BTreeMap<(NodeId, NodeId), f64>,
) -> Result<SampleGraph> {
    let full = build_coarse_graph(g, map, weights)?;
    // Drop contracted edges whose pair vanished from the reduced Laplacian.
    let edges: Vec<_> = full
        .edges()
        .iter()
        .copied()
        .filter(|&(a, b)| weights.contains_key(&(a.min(b), a.max(b))))
        .collect();
    SampleGraph::new(
        full.id(),
        full.level(),
        full.label(),
        full.nodes()
            .iter()
            .copied()
            .zip(full.payload().iter().cloned())
            .collect(),
        edges,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarsen::tests::graph;

    #[test]
    fn r_zero_is_identity() {
        let g = graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        let (c, map) = coarsen_kron(&g, 0.0).unwrap();
        assert_eq!(map.num_supernodes(), 5);
        assert_eq!(c.edges(), g.edges());
        assert_eq!(map.levels, 0);
    }

    #[test]
    fn path8_halves_once() {
        let edges: Vec<(u32, u32)> = (0..7).map(|i| (i, i + 1)).collect();
        let g = graph(8, &edges);
        let (c, map) = coarsen_kron(&g, 0.5).unwrap();
        assert_eq!(c.num_nodes(), 4);
        assert_eq!(map.levels, 1);
        assert!(map.covers(g.nodes()));
        // the top eigenvector of a path alternates sign: every other node kept
        let kept: Vec<u32> = c.nodes().iter().map(|n| n.0).collect();
        assert!(
            kept == vec![0, 2, 4, 6] || kept == vec![1, 3, 5, 7],
            "{kept:?}"
        );
        // reduced path stays a path
        assert_eq!(c.num_edges(), 3);
    }

    #[test]
    fn singleton_components_pass_through() {
        let g = graph(5, &[(0, 1), (1, 2)]);
        let (c, map) = coarsen_kron(&g, 0.999).unwrap();
        // components {0,1,2}, {3}, {4}
        assert_eq!(c.num_nodes(), 3);
        assert!(map.covers(g.nodes()));
        assert_eq!(map.block(NodeId(3)), Some(&[NodeId(3)][..]));
    }

    #[test]
    fn star_keeps_the_hub() {
        // top eigenvector of P3 is (1, -2, 1): the centre alone is kept
        let g = graph(3, &[(0, 1), (2, 1)]);
        let (c, map) = coarsen_kron(&g, 0.34).unwrap();
        assert_eq!(c.nodes(), &[NodeId(1)]);
        assert_eq!(map.block(NodeId(1)).unwrap().len(), 3);
        assert_eq!(c.num_edges(), 0);
    }

    #[test]
    fn coarse_edges_take_original_direction() {
        let edges: Vec<(u32, u32)> = (0..7).map(|i| (i + 1, i)).collect();
        let g = graph(8, &edges);
        let (c, map) = coarsen_kron(&g, 0.5).unwrap();
        for &(a, b) in c.edges() {
            // every coarse edge runs from a later block to an earlier one
            assert!(
                map.block(a).unwrap()[0] > map.block(b).unwrap()[0],
                "{a}->{b}"
            );
        }
    }
    /// Eliminate one node at a time: `L ← L - L[:,e] L[e,:] / L[e,e]`.
    fn sequential_schur(l: &DMatrix<f64>, kept: &[usize]) -> DMatrix<f64> {
        let mut l = l.clone();
        let n = l.nrows();
        for e in (0..n).filter(|i| !kept.contains(i)) {
            let pivot = l[(e, e)];
            let col = l.column(e).into_owned();
            let row = l.row(e).into_owned();
            l -= col * row / pivot;
        }
        l.select_rows(kept).select_columns(kept)
    }

    fn effective_resistance(l: &DMatrix<f64>, i: usize, j: usize) -> f64 {
        // connected graphs only: L⁺ = (L + J/n)⁻¹ − J/n
        let n = l.nrows();
        let avg = DMatrix::from_element(n, n, 1.0 / n as f64);
        let pinv = (l + &avg).try_inverse().unwrap() - avg;
        pinv[(i, i)] + pinv[(j, j)] - 2.0 * pinv[(i, j)]
    }

    #[test]
    fn schur_matches_sequential_elimination() {
        let edges = [
            (0, 1),
            (1, 2),
            (2, 3),
            (3, 0),
            (0, 2),
            (3, 4),
            (4, 5),
            (5, 1),
        ];
        let g = graph(6, &edges);
        let l = laplacian(&g);
        let kept = kron_kept_set(&l).unwrap();
        assert!(!kept.is_empty() && kept.len() < 6, "{kept:?}");
        let (reduced, interp) = kron_reduce(&l, &kept).unwrap();
        let oracle = sequential_schur(&l, &kept);
        assert!((&reduced - &oracle).abs().max() < 1e-9);
        // harmonic weights of each eliminated node sum to one
        for r in 0..interp.nrows() {
            assert!((interp.row(r).sum() - 1.0).abs() < 1e-9);
        }
        // reduced matrix is again a Laplacian
        for r in 0..reduced.nrows() {
            assert!(reduced.row(r).sum().abs() < 1e-9);
        }
    }

    #[test]
    fn effective_resistance_is_preserved() {
        let k4 = graph(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        let cycle: Vec<(u32, u32)> = (0..7).map(|i| (i, (i + 1) % 7)).chain([(0, 3)]).collect();
        for g in [k4, graph(7, &cycle)] {
            let l = laplacian(&g);
            let kept = kron_kept_set(&l).unwrap();
            let (reduced, _) = kron_reduce(&l, &kept).unwrap();
            for a in 0..kept.len() {
                for b in a + 1..kept.len() {
                    let before = effective_resistance(&l, kept[a], kept[b]);
                    let after = effective_resistance(&reduced, a, b);
                    assert!((before - after).abs() < 1e-9, "{before} vs {after}");
                }
            }
        }
    }
}
