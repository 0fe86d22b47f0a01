// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{cross_entropy, GcnModel, GraphBatch, Target, DROPOUT, HIDDEN};
use crate::error::{Error, Result};
use crate::graphdata::{Label, SampleGraph};
use crate::tensor::Matrix;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            epochs: 150,
            batch_size: 8,
            hidden: HIDDEN,
            dropout: DROPOUT,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite())
            || self.epochs == 0
            || self.batch_size == 0
            || self.hidden == 0
        {
            return Err(Error::Config(format!("unusable training config {self:?}")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0,1)",
                self.dropout
            )));
        }
        Ok(())
    }

    /// Hash of the config together with the model input width.
    pub fn hash(&self, input_dim: usize) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("config serialises"));
        h.update((input_dim as u64).to_le_bytes());
        hex(&h.finalize())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 over parameter shapes and little-endian values.
pub fn params_hash(params: &[Matrix]) -> String {
    let mut h = Sha256::new();
    for p in params {
        h.update((p.rows() as u64).to_le_bytes());
        h.update((p.cols() as u64).to_le_bytes());
        for v in p.data() {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    hex(&h.finalize())
}

pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(lr: f64, params: &[Matrix]) -> Self {
        let zeros = || {
            params
                .iter()
                .map(|p| Matrix::zeros(p.rows(), p.cols()))
                .collect()
        };
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn step(&mut self, params: &mut [Matrix], grads: &[Matrix]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for (((p, g), m), v) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut())
                .zip(v.data_mut().iter_mut())
            {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Parameters at the epoch with the lowest validation loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub input_dim: usize,
    pub config: TrainConfig,
    pub config_hash: String,
    pub epoch: usize,
    pub val_loss: f64,
    pub param_hash: String,
    pub params: Vec<Matrix>,
}

impl Checkpoint {
    pub fn from_model(model: &GcnModel, config: &TrainConfig, epoch: usize, val_loss: f64) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            input_dim: model.input_dim(),
            config: config.clone(),
            config_hash: config.hash(model.input_dim()),
            epoch,
            val_loss,
            param_hash: params_hash(model.params()),
            params: model.params().to_vec(),
        }
    }

    pub fn model(&self) -> Result<GcnModel> {
        GcnModel::from_params(
            self.input_dim,
            self.config.hidden,
            self.config.dropout,
            self.params.clone(),
        )
    }

    pub fn predict(&self, g: &SampleGraph) -> Result<(Label, [f64; 2])> {
        self.model()?.predict(g)
    }

    pub fn verify(&self) -> Result<()> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {}",
                self.version
            )));
        }
        if self.config_hash != self.config.hash(self.input_dim) {
            return Err(Error::Checkpoint("config hash mismatch".into()));
        }
        if self.param_hash != params_hash(&self.params) {
            return Err(Error::Checkpoint("parameter hash mismatch".into()));
        }
        self.model().map(|_| ())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        ck.verify()?;
        Ok(ck)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochRecord>,
}

fn mean_loss(model: &GcnModel, graphs: &[&SampleGraph]) -> Result<f64> {
    let mut total = 0.0;
    for chunk in graphs.chunks(32) {
        let batch = GraphBatch::new(chunk)?;
        let labels: Vec<Label> = chunk.iter().map(|g| g.label()).collect();
        let fwd = model.forward(&batch, None)?;
        total += cross_entropy(&fwd.logits, &labels)?.0 * chunk.len() as f64;
    }
    Ok(total / graphs.len() as f64)
}

/// Mini-batch Adam on mean cross-entropy. Sample order is reshuffled every
/// epoch; the checkpoint keeps the first epoch reaching the lowest
/// validation loss.
pub fn train(
    mut model: GcnModel,
    train_set: &[SampleGraph],
    val_set: &[SampleGraph],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "training needs non-empty sets (train {}, val {})",
            train_set.len(),
            val_set.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut adam = Adam::new(config.lr, model.params());
    let val: Vec<&SampleGraph> = val_set.iter().collect();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<Checkpoint> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(config.batch_size) {
            let graphs: Vec<&SampleGraph> = idx.iter().map(|&i| &train_set[i]).collect();
            let labels: Vec<Label> = graphs.iter().map(|g| g.label()).collect();
            let batch = GraphBatch::new(&graphs)?;
            let fwd = model.forward(&batch, Some(&mut rng))?;
            let grads = model.backward(&batch, &fwd, Target::Loss(&labels), false)?;
            total += grads.value * idx.len() as f64;
            adam.step(model.params_mut(), &grads.params);
            if !model.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite parameters after an update in epoch {epoch}"
                )));
            }
        }
        let train_loss = total / train_set.len() as f64;
        let val_loss = mean_loss(&model, &val)?;
        log::debug!("epoch {epoch}: train {train_loss:.5} val {val_loss:.5}");
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        if best.as_ref().map_or(true, |b| val_loss < b.val_loss) {
            best = Some(Checkpoint::from_model(&model, config, epoch, val_loss));
        }
    }
    Ok(TrainOutcome {
        checkpoint: best.expect("at least one epoch"),
        history,
    })
}
