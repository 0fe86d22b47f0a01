// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::collections::BTreeSet;

use metacoarse::graphdata::{InstructionRecord, Label, Level, NodeId, SampleGraph};
use metacoarse::tensor::Matrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Weakly connected random CFG: random spanning tree with random
/// orientations plus `extra` random edges. Each block gets 1..=max_instr
/// placeholder instructions.
pub fn random_cfg(rng: &mut ChaCha8Rng, n: usize, extra: usize, max_instr: usize) -> SampleGraph {
    let mut edges = BTreeSet::new();
    for v in 1..n as u32 {
        let u = rng.gen_range(0..v);
        if rng.gen_bool(0.5) {
            edges.insert((u, v));
        } else {
            edges.insert((v, u));
        }
    }
    for _ in 0..extra {
        let a = rng.gen_range(0..n as u32);
        let b = rng.gen_range(0..n as u32);
        if a != b {
            edges.insert((a, b));
        }
    }
    let nodes = (0..n as u32)
        .map(|i| {
            let k = rng.gen_range(1..=max_instr);
            (NodeId(i), vec![InstructionRecord::absent(); k])
        })
        .collect();
    SampleGraph::new(
        format!("rand-{n}-{}", rng.gen::<u32>()),
        Level::Cfg,
        if rng.gen_bool(0.5) {
            Label::Benign
        } else {
            Label::Malicious
        },
        nodes,
        edges
            .into_iter()
            .map(|(a, b)| (NodeId(a), NodeId(b)))
            .collect(),
    )
    .unwrap()
}

pub fn with_random_features(rng: &mut ChaCha8Rng, g: SampleGraph, d: usize) -> SampleGraph {
    let n = g.num_nodes();
    let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.gen_range(0.0..2.0)).collect());
    g.with_features(x).unwrap()
}
