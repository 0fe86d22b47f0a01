// SPDX-License-Identifier: Apache-2.0

//! Three-layer GCN graph classifier with hand-written reverse mode.
//!
//! Layer rule: `H_l = ReLU(Â H_{l-1} W_l + b_l)` with
//! `Â = D̃^{-1/2} Ã D̃^{-1/2}`, `Ã` the symmetrised edge-mask adjacency plus
//! unit self-loops. Node states are mean-pooled per graph and fed to a
//! linear head. Gradients are available for every parameter and for every
//! edge-mask entry; the latter flow through both `Ã` and `D̃`.

mod train;

pub use train::{
    train, Adam, Checkpoint, EpochRecord, TrainConfig, TrainOutcome, CHECKPOINT_VERSION,
};

use std::ops::Range;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphdata::{Label, SampleGraph};
use crate::tensor::{matmul, matmul_nt, matmul_tn, Matrix};

pub const LAYERS: usize = 3;
pub const HIDDEN: usize = 128;
pub const CLASSES: usize = 2;
pub const DROPOUT: f64 = 0.5;

/// Parameter tensor order: `W1 b1 W2 b2 W3 b3 W_head b_head`.
pub const NUM_PARAMS: usize = 2 * LAYERS + 2;
const HEAD: usize = 2 * LAYERS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnModel {
    input_dim: usize,
    hidden: usize,
    dropout: f64,
    params: Vec<Matrix>,
}

/// Parameter shapes for a model of the given widths.
pub fn param_shapes(input_dim: usize, hidden: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(NUM_PARAMS);
    for l in 0..LAYERS {
        let fan_in = if l == 0 { input_dim } else { hidden };
        out.push((fan_in, hidden));
        out.push((1, hidden));
    }
    out.push((hidden, CLASSES));
    out.push((1, CLASSES));
    out
}

impl GcnModel {
    /// Glorot-uniform weights, zero biases.
    pub fn new(input_dim: usize, hidden: usize, dropout: f64, seed: u64) -> Result<Self> {
        if hidden == 0 || !(0.0..1.0).contains(&dropout) {
            return Err(Error::InvalidArgument(format!(
                "hidden={hidden}, dropout={dropout} not usable"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = param_shapes(input_dim, hidden)
            .into_iter()
            .enumerate()
            .map(|(i, (r, c))| {
                if i % 2 == 1 {
                    return Matrix::zeros(r, c);
                }
                let limit = (6.0 / (r + c) as f64).sqrt();
                Matrix::from_vec(
                    r,
                    c,
                    (0..r * c).map(|_| rng.gen_range(-limit..=limit)).collect(),
                )
            })
            .collect();
        Ok(Self {
            input_dim,
            hidden,
            dropout,
            params,
        })
    }

    pub fn from_params(
        input_dim: usize,
        hidden: usize,
        dropout: f64,
        params: Vec<Matrix>,
    ) -> Result<Self> {
        let shapes = param_shapes(input_dim, hidden);
        if params.len() != shapes.len()
            || params
                .iter()
                .zip(&shapes)
                .any(|(p, &(r, c))| (p.rows(), p.cols()) != (r, c))
        {
            return Err(Error::Dimension(format!(
                "parameter shapes do not match a {input_dim}->{hidden} model"
            )));
        }
        Ok(Self {
            input_dim,
            hidden,
            dropout,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn params(&self) -> &[Matrix] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Matrix] {
        &mut self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(Matrix::is_finite)
    }

    /// Forward pass. Dropout is applied after layers 1 and 2 only when an
    /// rng is supplied.
    pub fn forward(
        &self,
        batch: &GraphBatch,
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Forward> {
        if batch.x.cols() != self.input_dim {
            return Err(Error::Dimension(format!(
                "features have width {}, model expects {}",
                batch.x.cols(),
                self.input_dim
            )));
        }
        let mut rng = dropout_rng;
        let mut inputs = Vec::with_capacity(LAYERS);
        let mut us = Vec::with_capacity(LAYERS);
        let mut zs = Vec::with_capacity(LAYERS);
        let mut drops = Vec::with_capacity(LAYERS);
        let mut h = batch.x.clone();
        for l in 0..LAYERS {
            let u = matmul(&h, &self.params[2 * l]);
            let mut z = batch.propagate(&u);
            let b = self.params[2 * l + 1].row(0);
            for r in 0..z.rows() {
                for (v, bias) in z.row_mut(r).iter_mut().zip(b) {
                    *v += bias;
                }
            }
            let mut next = z.clone();
            next.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
            let drop = match rng.as_deref_mut() {
                Some(rng) if l + 1 < LAYERS && self.dropout > 0.0 => {
                    let keep = 1.0 - self.dropout;
                    let mut d = Matrix::zeros(next.rows(), next.cols());
                    for v in d.data_mut() {
                        *v = if rng.gen::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        };
                    }
                    for (a, s) in next.data_mut().iter_mut().zip(d.data()) {
                        *a *= s;
                    }
                    Some(d)
                }
                _ => None,
            };
            inputs.push(h);
            us.push(u);
            zs.push(z);
            drops.push(drop);
            h = next;
        }
        let mut readout = Matrix::zeros(batch.num_graphs(), self.hidden);
        for (g, seg) in batch.segments.iter().enumerate() {
            let inv = 1.0 / seg.len().max(1) as f64;
            let row = readout.row_mut(g);
            for v in seg.clone() {
                for (o, x) in row.iter_mut().zip(h.row(v)) {
                    *o += x * inv;
                }
            }
        }
        let mut logits = matmul(&readout, &self.params[HEAD]);
        let hb = self.params[HEAD + 1].row(0);
        for g in 0..logits.rows() {
            for (v, b) in logits.row_mut(g).iter_mut().zip(hb) {
                *v += b;
            }
        }
        Ok(Forward {
            logits,
            readout,
            inputs,
            us,
            zs,
            drops,
        })
    }

    /// Reverse pass for the scalar chosen by `target`. Mask gradients are
    /// computed only when `with_mask` is set.
    pub fn backward(
        &self,
        batch: &GraphBatch,
        fwd: &Forward,
        target: Target<'_>,
        with_mask: bool,
    ) -> Result<Gradients> {
        let (value, dlogits) = target.seed(&fwd.logits)?;
        let mut grads: Vec<Matrix> = self
            .params
            .iter()
            .map(|p| Matrix::zeros(p.rows(), p.cols()))
            .collect();
        grads[HEAD] = matmul_tn(&fwd.readout, &dlogits);
        grads[HEAD + 1] = Matrix::from_vec(1, CLASSES, dlogits.column_sums());
        let dread = matmul_nt(&dlogits, &self.params[HEAD]);

        let n = batch.num_nodes();
        let mut dh = Matrix::zeros(n, self.hidden);
        for (g, seg) in batch.segments.iter().enumerate() {
            let inv = 1.0 / seg.len().max(1) as f64;
            for v in seg.clone() {
                for (o, x) in dh.row_mut(v).iter_mut().zip(dread.row(g)) {
                    *o = x * inv;
                }
            }
        }

        let mut ds = vec![0.0; n];
        let mut dmask = if with_mask {
            vec![0.0; batch.edges.len()]
        } else {
            Vec::new()
        };
        for l in (0..LAYERS).rev() {
            if let Some(d) = &fwd.drops[l] {
                for (a, s) in dh.data_mut().iter_mut().zip(d.data()) {
                    *a *= s;
                }
            }
            let mut dz = dh;
            for (g, z) in dz.data_mut().iter_mut().zip(fwd.zs[l].data()) {
                if *z <= 0.0 {
                    *g = 0.0;
                }
            }
            grads[2 * l + 1] = Matrix::from_vec(1, self.hidden, dz.column_sums());
            let du = batch.propagate(&dz);
            grads[2 * l] = matmul_tn(&fwd.inputs[l], &du);
            if with_mask {
                batch.accumulate_mask_grad(&dz, &fwd.us[l], &mut dmask, &mut ds);
            }
            dh = if l > 0 {
                matmul_nt(&du, &self.params[2 * l])
            } else {
                Matrix::zeros(0, 0)
            };
        }
        if with_mask {
            batch.finish_mask_grad(&ds, &mut dmask);
        }
        Ok(Gradients {
            value,
            params: grads,
            mask: dmask,
        })
    }

    /// Inference on one graph with an all-ones mask.
    pub fn predict(&self, g: &SampleGraph) -> Result<(Label, [f64; CLASSES])> {
        let batch = GraphBatch::single(g, None)?;
        let fwd = self.forward(&batch, None)?;
        let logits = [fwd.logits.get(0, 0), fwd.logits.get(0, 1)];
        Ok((argmax_label(&logits), logits))
    }

    /// Inference on many graphs; chunks keep batches small.
    pub fn predict_many(&self, graphs: &[SampleGraph]) -> Result<Vec<(Label, [f64; CLASSES])>> {
        let mut out = Vec::with_capacity(graphs.len());
        for chunk in graphs.chunks(32) {
            let refs: Vec<&SampleGraph> = chunk.iter().collect();
            let batch = GraphBatch::new(&refs)?;
            let fwd = self.forward(&batch, None)?;
            for g in 0..chunk.len() {
                let logits = [fwd.logits.get(g, 0), fwd.logits.get(g, 1)];
                out.push((argmax_label(&logits), logits));
            }
        }
        Ok(out)
    }

    /// Logits of one graph under an explicit edge mask (no dropout).
    pub fn logits_with_mask(&self, g: &SampleGraph, mask: &[f64]) -> Result<[f64; CLASSES]> {
        let batch = GraphBatch::single(g, Some(mask))?;
        let fwd = self.forward(&batch, None)?;
        Ok([fwd.logits.get(0, 0), fwd.logits.get(0, 1)])
    }
}

/// Larger logit wins; ties go to class 0.
pub fn argmax_label(logits: &[f64; CLASSES]) -> Label {
    if logits[1] > logits[0] {
        Label::Malicious
    } else {
        Label::Benign
    }
}

/// Mean softmax cross-entropy over the batch and its logit gradient.
pub fn cross_entropy(logits: &Matrix, labels: &[Label]) -> Result<(f64, Matrix)> {
    if logits.rows() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} logit rows for {} labels",
            logits.rows(),
            labels.len()
        )));
    }
    let b = labels.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    for (g, label) in labels.iter().enumerate() {
        let row = logits.row(g);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|v| (v - m).exp()).sum();
        let lse = m + z.ln();
        loss += lse - row[label.index()];
        for (c, v) in row.iter().enumerate() {
            let p = (v - lse).exp();
            let y = if c == label.index() { 1.0 } else { 0.0 };
            grad.set(g, c, (p - y) / b);
        }
    }
    Ok((loss / b, grad))
}

/// Scalar differentiated by [`GcnModel::backward`].
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    /// Mean cross-entropy against these labels.
    Loss(&'a [Label]),
    /// Sum over graphs of the logit of the given class per graph.
    Logit(&'a [usize]),
    Constant,
}

impl Target<'_> {
    fn seed(&self, logits: &Matrix) -> Result<(f64, Matrix)> {
        match *self {
            Target::Loss(labels) => cross_entropy(logits, labels),
            Target::Logit(classes) => {
                if classes.len() != logits.rows() || classes.iter().any(|&c| c >= CLASSES) {
                    return Err(Error::Dimension("logit target per graph".into()));
                }
                let mut d = Matrix::zeros(logits.rows(), logits.cols());
                let mut value = 0.0;
                for (g, &c) in classes.iter().enumerate() {
                    d.set(g, c, 1.0);
                    value += logits.get(g, c);
                }
                Ok((value, d))
            }
            Target::Constant => Ok((0.0, Matrix::zeros(logits.rows(), logits.cols()))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Forward {
    pub logits: Matrix,
    readout: Matrix,
    inputs: Vec<Matrix>,
    us: Vec<Matrix>,
    zs: Vec<Matrix>,
    drops: Vec<Option<Matrix>>,
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub value: f64,
    pub params: Vec<Matrix>,
    /// Per batch edge, in batch edge order; empty unless requested.
    pub mask: Vec<f64>,
}

/// Block-diagonal union of graphs with per-graph node and edge ranges.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    x: Matrix,
    segments: Vec<Range<usize>>,
    edge_segments: Vec<Range<usize>>,
    edges: Vec<(usize, usize)>,
    /// Rows of `Ã` (diagonal included): `(col, weight, normalised weight)`.
    rows: Vec<Vec<(usize, f64, f64)>>,
    deg: Vec<f64>,
    inv_sqrt_deg: Vec<f64>,
}

impl GraphBatch {
    /// All-ones masks.
    pub fn new(graphs: &[&SampleGraph]) -> Result<Self> {
        let parts: Vec<(&SampleGraph, Option<&[f64]>)> =
            graphs.iter().map(|g| (*g, None)).collect();
        Self::from_parts(&parts)
    }

    pub fn single(g: &SampleGraph, mask: Option<&[f64]>) -> Result<Self> {
        Self::from_parts(&[(g, mask)])
    }

    /// One copy of `g` per mask.
    pub fn replicate(g: &SampleGraph, masks: &[Vec<f64>]) -> Result<Self> {
        let parts: Vec<(&SampleGraph, Option<&[f64]>)> =
            masks.iter().map(|m| (g, Some(m.as_slice()))).collect();
        Self::from_parts(&parts)
    }

    pub fn from_parts(parts: &[(&SampleGraph, Option<&[f64]>)]) -> Result<Self> {
        let mut feats = Vec::with_capacity(parts.len());
        let mut segments = Vec::with_capacity(parts.len());
        let mut edge_segments = Vec::with_capacity(parts.len());
        let mut edges = Vec::new();
        let mut mask = Vec::new();
        let mut offset = 0;
        for &(g, m) in parts {
            let x = g.features().ok_or_else(|| {
                Error::InvalidArgument(format!("sample {} has no features", g.id()))
            })?;
            if let Some(m) = m {
                if m.len() != g.num_edges() {
                    return Err(Error::Dimension(format!(
                        "sample {}: edge mask has {} entries for {} edges",
                        g.id(),
                        m.len(),
                        g.num_edges()
                    )));
                }
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "sample {}: non-finite edge mask",
                        g.id()
                    )));
                }
            }
            feats.push(x);
            segments.push(offset..offset + g.num_nodes());
            let e0 = edges.len();
            edges.extend(
                g.edge_index()
                    .into_iter()
                    .map(|(s, d)| (s + offset, d + offset)),
            );
            edge_segments.push(e0..edges.len());
            match m {
                Some(m) => mask.extend_from_slice(m),
                None => mask.extend(std::iter::repeat(1.0).take(g.num_edges())),
            }
            offset += g.num_nodes();
        }
        if let Some(w) = feats.first().map(|x| x.cols()) {
            if let Some(bad) = feats.iter().find(|x| x.cols() != w) {
                return Err(Error::Dimension(format!(
                    "feature widths {} and {} in one batch",
                    w,
                    bad.cols()
                )));
            }
        }
        let x = Matrix::vstack(&feats);
        let n = offset;
        let mut entries: Vec<Vec<(usize, f64)>> = (0..n).map(|i| vec![(i, 1.0)]).collect();
        for (&(s, d), &m) in edges.iter().zip(&mask) {
            entries[s].push((d, m));
            if s != d {
                entries[d].push((s, m));
            }
        }
        let mut rows = Vec::with_capacity(n);
        let mut deg = vec![0.0; n];
        for (i, mut row) in entries.into_iter().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, f64, f64)> = Vec::with_capacity(row.len());
            for (j, w) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += w,
                    _ => merged.push((j, w, 0.0)),
                }
            }
            deg[i] = merged.iter().map(|e| e.1).sum();
            rows.push(merged);
        }
        if let Some(i) = deg.iter().position(|&d| d <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "non-positive degree at batch node {i}"
            )));
        }
        let inv_sqrt_deg: Vec<f64> = deg.iter().map(|d| d.powf(-0.5)).collect();
        for (i, row) in rows.iter_mut().enumerate() {
            for e in row.iter_mut() {
                e.2 = inv_sqrt_deg[i] * e.1 * inv_sqrt_deg[e.0];
            }
        }
        Ok(Self {
            x,
            segments,
            edge_segments,
            edges,
            rows,
            deg,
            inv_sqrt_deg,
        })
    }

    pub fn num_graphs(&self) -> usize {
        self.segments.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.x.rows()
    }

    /// Batch edge range of graph `g`.
    pub fn edge_range(&self, g: usize) -> Range<usize> {
        self.edge_segments[g].clone()
    }

    /// `Â · m`
    fn propagate(&self, m: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(m.rows(), m.cols());
        for (i, row) in self.rows.iter().enumerate() {
            let o = out.row_mut(i);
            for &(j, _, c) in row {
                for (a, b) in o.iter_mut().zip(m.row(j)) {
                    *a += c * b;
                }
            }
        }
        out
    }

    /// `Ã S m` without the left normalisation.
    fn half_propagate(&self, m: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(m.rows(), m.cols());
        for (i, row) in self.rows.iter().enumerate() {
            let o = out.row_mut(i);
            for &(j, w, _) in row {
                let c = w * self.inv_sqrt_deg[j];
                for (a, b) in o.iter_mut().zip(m.row(j)) {
                    *a += c * b;
                }
            }
        }
        out
    }

    /// One layer's contribution, given `G = ∂/∂Z` and `U = H W`, where the
    /// layer computes `Z = S Ã S U + b`. Direct `Ã` terms go to `dmask`,
    /// terms through `s = deg^{-1/2}` accumulate in `ds`.
    fn accumulate_mask_grad(&self, g: &Matrix, u: &Matrix, dmask: &mut [f64], ds: &mut [f64]) {
        let s = &self.inv_sqrt_deg;
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            let direct = if a == b {
                s[a] * s[a] * dot(g.row(a), u.row(a))
            } else {
                s[a] * s[b] * (dot(g.row(a), u.row(b)) + dot(g.row(b), u.row(a)))
            };
            dmask[e] += direct;
        }
        let q = self.half_propagate(u);
        let r = self.half_propagate(g);
        for k in 0..ds.len() {
            ds[k] += dot(g.row(k), q.row(k)) + dot(u.row(k), r.row(k));
        }
    }

    fn finish_mask_grad(&self, ds: &[f64], dmask: &mut [f64]) {
        let ddeg: Vec<f64> = ds
            .iter()
            .zip(&self.deg)
            .map(|(g, d)| -0.5 * g * d.powf(-1.5))
            .collect();
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            dmask[e] += if a == b { ddeg[a] } else { ddeg[a] + ddeg[b] };
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphdata::{InstructionRecord, Level, NodeId};
    use rand::seq::SliceRandom;

    fn featured(n: usize, edges: &[(u32, u32)], d: usize, seed: u64) -> SampleGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = SampleGraph::new(
            "t",
            Level::Cfg,
            Label::Benign,
            (0..n as u32)
                .map(|i| (NodeId(i), vec![InstructionRecord::absent()]))
                .collect(),
            edges.iter().map(|&(a, b)| (NodeId(a), NodeId(b))).collect(),
        )
        .unwrap();
        let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.gen_range(0.0..2.0)).collect());
        g.with_features(x).unwrap()
    }

    fn six_node() -> SampleGraph {
        featured(
            6,
            &[
                (0, 1),
                (1, 2),
                (2, 0),
                (2, 3),
                (3, 4),
                (4, 5),
                (5, 3),
                (4, 4),
                (1, 0),
            ],
            5,
            1,
        )
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn mask_gradient_matches_central_differences() {
        let g = six_node();
        let model = GcnModel::new(5, 16, DROPOUT, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mask: Vec<f64> = (0..g.num_edges())
            .map(|_| rng.gen_range(0.1..0.9))
            .collect();
        let batch = GraphBatch::single(&g, Some(&mask)).unwrap();
        let fwd = model.forward(&batch, None).unwrap();
        let labels = [Label::Malicious];
        let grads = model
            .backward(&batch, &fwd, Target::Loss(&labels), true)
            .unwrap();
        let h = 1e-5;
        for e in 0..mask.len() {
            let f = |delta: f64| {
                let mut m = mask.clone();
                m[e] += delta;
                let b = GraphBatch::single(&g, Some(&m)).unwrap();
                cross_entropy(&model.forward(&b, None).unwrap().logits, &labels)
                    .unwrap()
                    .0
            };
            let numeric = (f(h) - f(-h)) / (2.0 * h);
            assert!(
                rel_err(grads.mask[e], numeric) < 1e-4,
                "edge {e}: {} vs {numeric}",
                grads.mask[e]
            );
        }
    }

    #[test]
    fn weight_gradient_matches_central_differences() {
        let g = six_node();
        let mut model = GcnModel::new(5, 8, DROPOUT, 4).unwrap();
        let batch = GraphBatch::single(&g, None).unwrap();
        let target = [1usize];
        let fwd = model.forward(&batch, None).unwrap();
        let grads = model
            .backward(&batch, &fwd, Target::Logit(&target), false)
            .unwrap();
        let h = 1e-5;
        for p in 0..NUM_PARAMS {
            for i in 0..model.params[p].data().len() {
                let orig = model.params[p].data()[i];
                model.params[p].data_mut()[i] = orig + h;
                let up = model.forward(&batch, None).unwrap().logits.get(0, 1);
                model.params[p].data_mut()[i] = orig - h;
                let down = model.forward(&batch, None).unwrap().logits.get(0, 1);
                model.params[p].data_mut()[i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.params[p].data()[i];
                assert!(
                    rel_err(analytic, numeric) < 1e-4,
                    "param {p}[{i}]: {analytic} vs {numeric}"
                );
            }
        }
    }

    #[test]
    fn constant_target_has_zero_gradient() {
        let g = six_node();
        let model = GcnModel::new(5, 8, DROPOUT, 4).unwrap();
        let batch = GraphBatch::single(&g, None).unwrap();
        let fwd = model.forward(&batch, None).unwrap();
        let grads = model
            .backward(&batch, &fwd, Target::Constant, true)
            .unwrap();
        assert!(grads
            .params
            .iter()
            .all(|p| p.data().iter().all(|&v| v == 0.0)));
        assert!(grads.mask.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn relabelling_nodes_keeps_logits() {
        let edges = [(0, 1), (1, 2), (2, 3), (3, 0), (1, 3), (4, 2)];
        let g = featured(5, &edges, 4, 7);
        let mut perm: Vec<u32> = (0..5).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
        let x = g.features().unwrap();
        let mut rows = vec![vec![]; 5];
        for (old, &new) in perm.iter().enumerate() {
            rows[new as usize] = x.row(old).to_vec();
        }
        let h = SampleGraph::new(
            "t",
            Level::Cfg,
            Label::Benign,
            (0..5)
                .map(|i| (NodeId(i), vec![InstructionRecord::absent()]))
                .collect(),
            edges
                .iter()
                .map(|&(a, b)| (NodeId(perm[a as usize]), NodeId(perm[b as usize])))
                .collect(),
        )
        .unwrap()
        .with_features(Matrix::from_rows(&rows))
        .unwrap();
        let model = GcnModel::new(4, HIDDEN, DROPOUT, 2).unwrap();
        let (_, a) = model.predict(&g).unwrap();
        let (_, b) = model.predict(&h).unwrap();
        for c in 0..CLASSES {
            assert!((a[c] - b[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_mask_equals_edgeless_graph() {
        let g = featured(4, &[(0, 1), (1, 2), (2, 3)], 3, 5);
        let bare = featured(4, &[], 3, 5);
        let model = GcnModel::new(3, 16, DROPOUT, 1).unwrap();
        let a = model.logits_with_mask(&g, &[0.0; 3]).unwrap();
        let (_, b) = model.predict(&bare).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn duplicated_copy_keeps_mean_readout() {
        let g = featured(3, &[(0, 1), (1, 2)], 3, 2);
        let x = g.features().unwrap();
        let doubled = SampleGraph::new(
            "t",
            Level::Cfg,
            Label::Benign,
            (0..6)
                .map(|i| (NodeId(i), vec![InstructionRecord::absent()]))
                .collect(),
            vec![
                (NodeId(0), NodeId(1)),
                (NodeId(1), NodeId(2)),
                (NodeId(3), NodeId(4)),
                (NodeId(4), NodeId(5)),
            ],
        )
        .unwrap()
        .with_features(Matrix::vstack(&[x, x]))
        .unwrap();
        let model = GcnModel::new(3, 16, DROPOUT, 8).unwrap();
        let (_, a) = model.predict(&g).unwrap();
        let (_, b) = model.predict(&doubled).unwrap();
        for c in 0..CLASSES {
            assert!((a[c] - b[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn single_zero_node_gives_bias_path() {
        let g = featured(1, &[], 3, 0)
            .with_features(Matrix::zeros(1, 3))
            .unwrap();
        let mut model = GcnModel::new(3, 4, DROPOUT, 0).unwrap();
        model.params[HEAD + 1] = Matrix::from_vec(1, 2, vec![0.25, -0.5]);
        // all layer biases are zero, so every hidden state is zero
        let (label, logits) = model.predict(&g).unwrap();
        assert_eq!(logits, [0.25, -0.5]);
        assert_eq!(label, Label::Benign);
    }

    #[test]
    fn argmax_tie_goes_to_benign() {
        assert_eq!(argmax_label(&[2.0, -1.0]), Label::Benign);
        assert_eq!(argmax_label(&[0.3, 0.3]), Label::Benign);
        assert_eq!(argmax_label(&[0.3, 0.4]), Label::Malicious);
    }

    #[test]
    fn batch_matches_individual_graphs() {
        let a = six_node();
        let b = featured(3, &[(0, 1), (2, 1)], 5, 4);
        let model = GcnModel::new(5, 16, DROPOUT, 6).unwrap();
        let batch = GraphBatch::new(&[&a, &b]).unwrap();
        let fwd = model.forward(&batch, None).unwrap();
        for (i, g) in [&a, &b].into_iter().enumerate() {
            let (_, l) = model.predict(g).unwrap();
            for c in 0..CLASSES {
                assert!((fwd.logits.get(i, c) - l[c]).abs() < 1e-12);
            }
        }
        assert_eq!(batch.edge_range(1), a.num_edges()..a.num_edges() + 2);
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let g = six_node();
        let model = GcnModel::new(4, 8, DROPOUT, 0).unwrap();
        assert!(matches!(model.predict(&g), Err(Error::Dimension(_))));
    }
}
