// SPDX-License-Identifier: Apache-2.0

//! Reduced one-hot instruction vocabulary and node feature computation.
//!
//! Each of the 25 instruction features keeps only the raw codes observed in
//! training, in first-observation order, plus one trailing out-of-vocabulary
//! slot. Blocks are concatenated in feature order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphdata::{
    FeatureSpec, InstructionRecord, Level, SampleGraph, INSTRUCTION_FEATURES, NUM_FEATURES,
    OPCODE_0,
};
use crate::tensor::Matrix;

pub const VOCAB_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct VocabBlock {
    name: String,
    full_width: u32,
    codes: Vec<u32>,
    #[serde(skip)]
    index: BTreeMap<u32, usize>,
}

impl VocabBlock {
    fn new(spec: &FeatureSpec) -> Self {
        Self {
            name: spec.name.to_string(),
            full_width: spec.width,
            codes: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    fn observe(&mut self, code: u32) {
        if !self.index.contains_key(&code) {
            self.index.insert(code, self.codes.len());
            self.codes.push(code);
        }
    }

    fn reindex(&mut self) {
        self.index = self
            .codes
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i))
            .collect();
    }

    /// Observed categories plus the OOV slot.
    fn width(&self) -> usize {
        self.codes.len() + 1
    }

    fn slot(&self, code: u32) -> usize {
        self.index.get(&code).copied().unwrap_or(self.codes.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VocabularyMap {
    blocks: Vec<VocabBlock>,
    offsets: Vec<usize>,
    total_width: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    version: u32,
    features: Vec<VocabBlock>,
}

impl VocabularyMap {
    fn from_blocks(mut blocks: Vec<VocabBlock>) -> Self {
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut total = 0;
        for b in &mut blocks {
            b.reindex();
            offsets.push(total);
            total += b.width();
        }
        Self {
            blocks,
            offsets,
            total_width: total,
        }
    }

    pub fn total_width(&self) -> usize {
        self.total_width
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn block_width(&self, feature: usize) -> usize {
        self.blocks[feature].width()
    }

    pub fn block_name(&self, feature: usize) -> &str {
        &self.blocks[feature].name
    }

    /// Observed raw codes of one feature in index order.
    pub fn observed_codes(&self, feature: usize) -> &[u32] {
        &self.blocks[feature].codes
    }

    /// Width of the B-AFG encoding (opcode_0 block only).
    pub fn opcode0_width(&self) -> usize {
        self.blocks[OPCODE_0].width()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = VocabFile {
            version: VOCAB_FORMAT_VERSION,
            features: self.blocks.clone(),
        };
        let text = serde_json::to_string_pretty(&file)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: VocabFile = serde_json::from_str(&text)?;
        if file.version != VOCAB_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "vocabulary version {} unsupported (expected {VOCAB_FORMAT_VERSION})",
                file.version
            )));
        }
        if file.features.len() != NUM_FEATURES {
            return Err(Error::Config(format!(
                "vocabulary lists {} features, expected {NUM_FEATURES}",
                file.features.len()
            )));
        }
        Ok(Self::from_blocks(file.features))
    }
}

/// Build the reduced vocabulary from training samples, visiting samples,
/// nodes and instructions in their stored order.
pub fn build_vocabulary(
    train: &[SampleGraph],
    features: &[FeatureSpec; NUM_FEATURES],
) -> Result<VocabularyMap> {
    let mut blocks: Vec<VocabBlock> = features.iter().map(VocabBlock::new).collect();
    for g in train {
        for instr in g.payload().iter().flatten() {
            for (k, (&code, spec)) in instr.codes.iter().zip(features).enumerate() {
                if code >= spec.width {
                    return Err(Error::CodeOutOfRange {
                        feature: spec.name,
                        code,
                        width: spec.width,
                    });
                }
                blocks[k].observe(code);
            }
        }
    }
    Ok(VocabularyMap::from_blocks(blocks))
}

/// Vocabulary over the standard instruction feature table.
pub fn build_default_vocabulary(train: &[SampleGraph]) -> Result<VocabularyMap> {
    build_vocabulary(train, &INSTRUCTION_FEATURES)
}

/// Sparse one-hot encoding: the set position in each feature block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OneHot([usize; NUM_FEATURES]);

impl OneHot {
    pub fn positions(&self) -> &[usize; NUM_FEATURES] {
        &self.0
    }

    pub fn to_dense(&self, width: usize) -> Vec<f64> {
        let mut v = vec![0.0; width];
        for &p in &self.0 {
            v[p] = 1.0;
        }
        v
    }
}

pub fn encode_instruction(instr: &InstructionRecord, vocab: &VocabularyMap) -> OneHot {
    let mut pos = [0; NUM_FEATURES];
    for (k, &code) in instr.codes.iter().enumerate() {
        pos[k] = vocab.offsets[k] + vocab.blocks[k].slot(code);
    }
    OneHot(pos)
}

/// CFG node features: the sum of the node's instruction encodings. A C-CFG
/// payload is the concatenation of its block's instructions, so the same
/// rule yields the sum of the member features.
pub fn embed_cfg_nodes(g: SampleGraph, vocab: &VocabularyMap) -> Result<SampleGraph> {
    if !matches!(g.level(), Level::Cfg | Level::CCfg) {
        return Err(Error::InvalidArgument(format!(
            "embed_cfg_nodes needs a CFG or C_CFG sample, `{}` is {}",
            g.id(),
            g.level().tag()
        )));
    }
    let mut x = Matrix::zeros(g.num_nodes(), vocab.total_width());
    for (v, instrs) in g.payload().iter().enumerate() {
        if instrs.is_empty() {
            log::debug!(
                "sample {}: node {} has no instructions",
                g.id(),
                g.nodes()[v]
            );
        }
        let row = x.row_mut(v);
        for instr in instrs {
            for &p in encode_instruction(instr, vocab).positions() {
                row[p] += 1.0;
            }
        }
    }
    g.with_features(x)
}

/// B-AFG node features: one-hot over the reduced opcode_0 block only.
pub fn embed_bafg_nodes(g: SampleGraph, vocab: &VocabularyMap) -> Result<SampleGraph> {
    if g.level() != Level::BAfg {
        return Err(Error::InvalidArgument(format!(
            "embed_bafg_nodes needs a B_AFG sample, `{}` is {}",
            g.id(),
            g.level().tag()
        )));
    }
    let block = &vocab.blocks[OPCODE_0];
    let mut x = Matrix::zeros(g.num_nodes(), block.width());
    for (v, instrs) in g.payload().iter().enumerate() {
        x.set(v, block.slot(instrs[0].opcode0()), 1.0);
    }
    g.with_features(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphdata::{generate_synthetic, ClassMotifSpec, Label, NodeId};

    fn cfg(instrs: Vec<Vec<InstructionRecord>>) -> SampleGraph {
        SampleGraph::new(
            "t",
            Level::Cfg,
            Label::Benign,
            instrs
                .into_iter()
                .enumerate()
                .map(|(i, p)| (NodeId(i as u32), p))
                .collect(),
            vec![],
        )
        .unwrap()
    }

    fn with_op(op: u32) -> InstructionRecord {
        let mut c = [0; NUM_FEATURES];
        c[OPCODE_0] = op;
        InstructionRecord::new(c)
    }

    /// One instruction per category index `c` (clipped to each width).
    fn exhaustive_training_set() -> Vec<SampleGraph> {
        let max_w = INSTRUCTION_FEATURES.iter().map(|f| f.width).max().unwrap();
        let instrs = (0..max_w)
            .map(|c| {
                let mut codes = [0; NUM_FEATURES];
                for (k, f) in INSTRUCTION_FEATURES.iter().enumerate() {
                    codes[k] = c.min(f.width - 1);
                }
                InstructionRecord::new(codes)
            })
            .collect();
        vec![cfg(vec![instrs])]
    }

    #[test]
    fn full_coverage_gives_1098() {
        let v = build_default_vocabulary(&exhaustive_training_set()).unwrap();
        assert_eq!(v.total_width(), 1073 + 25);
        assert_eq!(v.opcode0_width(), 201);
    }

    #[test]
    fn observed_subset_widths() {
        let v = build_default_vocabulary(&[cfg(vec![vec![with_op(3), with_op(17), with_op(3)]])])
            .unwrap();
        assert_eq!(v.block_width(OPCODE_0), 3);
        assert_eq!(v.observed_codes(OPCODE_0), &[3, 17]);
        // every other feature saw only code 0
        assert_eq!(v.total_width(), 3 + 24 * 2);
        let offs = v.offsets();
        assert!(offs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn empty_training_set_is_oov_only() {
        let v = build_default_vocabulary(&[]).unwrap();
        assert_eq!(v.total_width(), 25);
        let oh = encode_instruction(&with_op(5), &v);
        assert_eq!(oh.to_dense(25), vec![1.0; 25]);
    }

    #[test]
    fn out_of_range_code_is_error() {
        let mut bad = with_op(0);
        bad.codes[0] = 2; // prefix_0 has width 2
        let err = build_default_vocabulary(&[cfg(vec![vec![bad]])]).unwrap_err();
        assert!(matches!(
            err,
            Error::CodeOutOfRange {
                feature: "prefix_0",
                ..
            }
        ));
    }

    #[test]
    fn oov_bit_for_unseen_code() {
        let mut seen = with_op(3);
        seen.codes[14] = 1; // sse_cc
        let v = build_default_vocabulary(&[cfg(vec![vec![seen.clone()]])]).unwrap();
        let normal = encode_instruction(&seen, &v);
        let mut unseen = seen.clone();
        unseen.codes[14] = 9;
        let odd = encode_instruction(&unseen, &v);
        for k in 0..NUM_FEATURES {
            let oov = v.offsets()[k] + v.block_width(k) - 1;
            assert_ne!(normal.positions()[k], oov);
            if k == 14 {
                assert_eq!(odd.positions()[k], oov);
            } else {
                assert_eq!(odd.positions()[k], normal.positions()[k]);
            }
        }
        assert_eq!(normal.to_dense(v.total_width()).iter().sum::<f64>(), 25.0);
    }

    #[test]
    fn cfg_node_sum_rule() {
        let a = with_op(3);
        let g = cfg(vec![
            vec![a.clone()],
            vec![a.clone(), a.clone(), a.clone()],
            vec![],
        ]);
        let v = build_default_vocabulary(std::slice::from_ref(&g)).unwrap();
        let one = encode_instruction(&a, &v).to_dense(v.total_width());
        let x = embed_cfg_nodes(g, &v).unwrap();
        let x = x.features().unwrap();
        assert_eq!(x.row(0), one.as_slice());
        let three: Vec<f64> = one.iter().map(|e| 3.0 * e).collect();
        assert_eq!(x.row(1), three.as_slice());
        assert!(x.row(2).iter().all(|&e| e == 0.0));
    }

    #[test]
    fn corpus_block_sums_equal_instruction_count() {
        let samples = generate_synthetic(12, &ClassMotifSpec::default(), 4).unwrap();
        let v = build_default_vocabulary(&samples[..6]).unwrap();
        for g in samples {
            let count = g.instruction_count() as f64;
            // brute force: sum every instruction's dense encoding
            let mut direct = vec![0.0; v.total_width()];
            for ins in g.payload().iter().flatten() {
                for (d, e) in direct
                    .iter_mut()
                    .zip(encode_instruction(ins, &v).to_dense(v.total_width()))
                {
                    *d += e;
                }
            }
            let embedded = embed_cfg_nodes(g, &v).unwrap();
            let col = embedded.features().unwrap().column_sums();
            assert_eq!(col, direct);
            for k in 0..NUM_FEATURES {
                let lo = v.offsets()[k];
                let s: f64 = col[lo..lo + v.block_width(k)].iter().sum();
                assert_eq!(s, count);
            }
        }
    }

    #[test]
    fn instruction_order_does_not_matter() {
        let mut other = with_op(9);
        other.codes[1] = 2;
        let g1 = cfg(vec![vec![with_op(3), other.clone(), with_op(4)]]);
        let g2 = cfg(vec![vec![with_op(4), with_op(3), other]]);
        let v = build_default_vocabulary(std::slice::from_ref(&g1)).unwrap();
        assert_eq!(
            embed_cfg_nodes(g1, &v).unwrap().features(),
            embed_cfg_nodes(g2, &v).unwrap().features()
        );
    }

    #[test]
    fn bafg_encoding_uses_opcode_block() {
        let v = build_default_vocabulary(&[cfg(vec![vec![with_op(3), with_op(17)]])]).unwrap();
        let g = SampleGraph::new(
            "b",
            Level::BAfg,
            Label::Malicious,
            vec![
                (NodeId(0), vec![with_op(17)]),
                (NodeId(1), vec![with_op(88)]),
            ],
            vec![(NodeId(0), NodeId(1))],
        )
        .unwrap();
        let x = embed_bafg_nodes(g, &v).unwrap();
        let x = x.features().unwrap();
        assert_eq!(x.cols(), 3);
        assert_eq!(x.row(0), &[0.0, 1.0, 0.0]);
        assert_eq!(x.row(1), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn sidecar_round_trip() {
        let samples = generate_synthetic(4, &ClassMotifSpec::default(), 1).unwrap();
        let v = build_default_vocabulary(&samples).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.json");
        v.save(&p).unwrap();
        assert_eq!(VocabularyMap::load(&p).unwrap(), v);
    }
}
