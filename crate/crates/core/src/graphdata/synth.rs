// SPDX-License-Identifier: Apache-2.0

//! Random CFG-like samples with a class-specific planted motif. Used as a
//! desk-scale stand-in for real disassembled binaries.

use std::collections::BTreeSet;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    InstructionRecord, Label, Level, NodeId, SampleGraph, INSTRUCTION_FEATURES, NUM_FEATURES,
    OPCODE_0,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotifShape {
    Cycle,
    Path,
}

/// A motif planted on `size` backbone nodes whose instructions all carry
/// `opcode0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotifSpec {
    pub shape: MotifShape,
    pub size: usize,
    pub opcode0: u32,
    pub instructions_per_node: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMotifSpec {
    pub malicious: MotifSpec,
    pub benign: Option<MotifSpec>,
    pub malicious_fraction: f64,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub max_instructions: usize,
    /// Extra random edges per backbone node on top of the spanning tree.
    pub extra_edge_factor: f64,
    /// opcode_0 codes used by background instructions.
    pub background_opcodes: Vec<u32>,
    /// Other features draw codes from `0..min(width, palette_size)`.
    pub palette_size: u32,
}

impl Default for ClassMotifSpec {
    fn default() -> Self {
        Self {
            malicious: MotifSpec {
                shape: MotifShape::Cycle,
                size: 4,
                opcode0: 199,
                instructions_per_node: 8,
            },
            benign: Some(MotifSpec {
                shape: MotifShape::Path,
                size: 4,
                opcode0: 198,
                instructions_per_node: 8,
            }),
            malicious_fraction: 0.5,
            min_nodes: 10,
            max_nodes: 60,
            max_instructions: 8,
            extra_edge_factor: 0.5,
            background_opcodes: (1..=12).collect(),
            palette_size: 3,
        }
    }
}

impl ClassMotifSpec {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.min_nodes == 0 || self.min_nodes > self.max_nodes {
            return bad(format!(
                "node range {}..={} is empty",
                self.min_nodes, self.max_nodes
            ));
        }
        if self.max_instructions == 0 || self.background_opcodes.is_empty() {
            return bad("need at least one instruction and one background opcode".into());
        }
        if !(0.0..=1.0).contains(&self.malicious_fraction) {
            return bad(format!(
                "malicious_fraction {} outside [0,1]",
                self.malicious_fraction
            ));
        }
        let width = INSTRUCTION_FEATURES[OPCODE_0].width;
        for m in std::iter::once(&self.malicious).chain(self.benign.as_ref()) {
            if m.size > self.min_nodes {
                return bad(format!(
                    "motif of {} nodes does not fit a backbone of {} nodes",
                    m.size, self.min_nodes
                ));
            }
            if m.size < 2 || m.instructions_per_node == 0 || m.opcode0 >= width {
                return bad(format!("invalid motif {m:?}"));
            }
            if self.background_opcodes.contains(&m.opcode0) {
                return bad(format!(
                    "motif opcode {} also used by background",
                    m.opcode0
                ));
            }
        }
        if self.background_opcodes.iter().any(|&c| c >= width) {
            return bad("background opcode exceeds opcode_0 width".into());
        }
        Ok(())
    }

    pub fn motif(&self, label: Label) -> Option<&MotifSpec> {
        match label {
            Label::Malicious => Some(&self.malicious),
            Label::Benign => self.benign.as_ref(),
        }
    }
}

fn random_instruction(
    rng: &mut ChaCha8Rng,
    spec: &ClassMotifSpec,
    opcode0: Option<u32>,
) -> InstructionRecord {
    let mut codes = [0u32; NUM_FEATURES];
    for (k, f) in INSTRUCTION_FEATURES.iter().enumerate() {
        codes[k] = if k == OPCODE_0 {
            opcode0.unwrap_or_else(|| *spec.background_opcodes.choose(rng).expect("nonempty"))
        } else {
            rng.gen_range(0..f.width.min(spec.palette_size).max(1))
        };
    }
    InstructionRecord::new(codes)
}

fn one_sample(
    rng: &mut ChaCha8Rng,
    spec: &ClassMotifSpec,
    id: String,
    label: Label,
) -> Result<SampleGraph> {
    let n = rng.gen_range(spec.min_nodes..=spec.max_nodes);
    let mut payload: Vec<Vec<InstructionRecord>> = (0..n)
        .map(|_| {
            let k = rng.gen_range(1..=spec.max_instructions);
            (0..k)
                .map(|_| random_instruction(rng, spec, None))
                .collect()
        })
        .collect();
    // Guarantees at least one multi-instruction block even without a motif.
    if payload[0].len() < 2 {
        payload[0].push(random_instruction(rng, spec, None));
    }

    let mut edges = BTreeSet::new();
    for v in 1..n {
        let u = rng.gen_range(0..v);
        edges.insert((u, v));
    }
    let extra = (spec.extra_edge_factor * n as f64).round() as usize;
    for _ in 0..extra {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b {
            edges.insert((a, b));
        }
    }

    if let Some(motif) = spec.motif(label) {
        let members = index::sample(rng, n, motif.size).into_vec();
        for &v in &members {
            payload[v] = (0..motif.instructions_per_node)
                .map(|_| random_instruction(rng, spec, Some(motif.opcode0)))
                .collect();
        }
        for w in members.windows(2) {
            edges.insert((w[0], w[1]));
        }
        if motif.shape == MotifShape::Cycle {
            edges.insert((members[motif.size - 1], members[0]));
        }
    }

    SampleGraph::new(
        id,
        Level::Cfg,
        label,
        payload
            .into_iter()
            .enumerate()
            .map(|(i, p)| (NodeId(i as u32), p))
            .collect(),
        edges
            .into_iter()
            .map(|(a, b)| (NodeId(a as u32), NodeId(b as u32)))
            .collect(),
    )
}

/// Generate `n_samples` CFG samples: a random spanning tree plus extra random
/// edges on 10-60 nodes, 1-8 instructions per node, and each class's motif
/// planted on randomly chosen nodes.
pub fn generate_synthetic(
    n_samples: usize,
    spec: &ClassMotifSpec,
    seed: u64,
) -> Result<Vec<SampleGraph>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_mal = (spec.malicious_fraction * n_samples as f64).round() as usize;
    let mut labels: Vec<Label> = (0..n_samples)
        .map(|i| {
            if i < n_mal {
                Label::Malicious
            } else {
                Label::Benign
            }
        })
        .collect();
    labels.shuffle(&mut rng);
    labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| one_sample(&mut rng, spec, format!("syn{seed}-{i:05}"), label))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphdata::format_sample;

    /// Does `g` contain a directed 4-cycle on nodes whose instructions all
    /// carry `code`? Brute force over ordered 4-tuples.
    fn has_planted_cycle(g: &SampleGraph, code: u32) -> bool {
        let marked: Vec<usize> = (0..g.num_nodes())
            .filter(|&v| g.payload()[v].iter().all(|i| i.opcode0() == code))
            .collect();
        let edges: BTreeSet<(usize, usize)> = g.edge_index().into_iter().collect();
        for &a in &marked {
            for &b in &marked {
                for &c in &marked {
                    for &d in &marked {
                        let distinct = BTreeSet::from([a, b, c, d]).len() == 4;
                        if distinct
                            && [(a, b), (b, c), (c, d), (d, a)]
                                .iter()
                                .all(|e| edges.contains(e))
                        {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    #[test]
    fn four_samples_balanced_with_motif() {
        let spec = ClassMotifSpec::default();
        let s = generate_synthetic(4, &spec, 1).unwrap();
        assert_eq!(s.len(), 4);
        let mal: Vec<_> = s.iter().filter(|g| g.label() == Label::Malicious).collect();
        assert_eq!(mal.len(), 2);
        for g in mal {
            assert!(has_planted_cycle(g, spec.malicious.opcode0));
        }
        for g in s.iter().filter(|g| g.label() == Label::Benign) {
            assert!(!has_planted_cycle(g, spec.malicious.opcode0));
        }
    }

    #[test]
    fn zero_samples_and_determinism() {
        let spec = ClassMotifSpec::default();
        assert!(generate_synthetic(0, &spec, 5).unwrap().is_empty());
        let a: Vec<String> = generate_synthetic(6, &spec, 9)
            .unwrap()
            .iter()
            .map(format_sample)
            .collect();
        let b: Vec<String> = generate_synthetic(6, &spec, 9)
            .unwrap()
            .iter()
            .map(format_sample)
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn backbone_is_weakly_connected_and_sized() {
        let spec = ClassMotifSpec::default();
        for g in generate_synthetic(20, &spec, 2).unwrap() {
            assert!((10..=60).contains(&g.num_nodes()));
            assert_eq!(g.weak_components().len(), 1);
            assert!(g.payload().iter().all(|p| (1..=8).contains(&p.len())));
        }
    }

    #[test]
    fn oversized_motif_is_an_error() {
        let mut spec = ClassMotifSpec::default();
        spec.malicious.size = 11;
        assert!(generate_synthetic(2, &spec, 0).is_err());
    }
}
