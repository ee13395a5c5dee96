//! Mini-batch training with Adam.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{EncodedExample, LabeledExample};
use crate::emotion::{Target, NUM_EMOTIONS};
use crate::error::{Error, Result};
use crate::layers;
use crate::model::{self, ModelBundle, ModelConfig, ModelParams, ParamId};
use crate::rng::{derive_seed, SplitMix64};
use crate::text::TokenSequence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 64,
            epochs: 10,
            seed: 1,
            val_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::invalid(format!("{name} must be in [0, 1), got {b}")));
            }
        }
        if !(self.adam_epsilon > 0.0 && self.adam_epsilon.is_finite()) {
            return Err(Error::invalid("adam_epsilon must be positive"));
        }
        if self.batch_size < 1 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if self.epochs < 1 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::invalid("val_fraction must be in (0, 1)"));
        }
        Ok(())
    }
}

/// First and second moments per parameter, plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub t: u64,
}

impl AdamState {
    pub fn new(config: &ModelConfig) -> Self {
        Self {
            m: ModelParams::zeros(config),
            v: ModelParams::zeros(config),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update. Rejects the whole step, leaving params
/// and state untouched, if any gradient is non-finite.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<()> {
    for ((id, g), p) in grads.iter().zip(params.tensors()) {
        g.expect_shape(p.shape())?;
        if !g.all_finite() {
            return Err(Error::NonFiniteGradient(id.name()));
        }
    }
    state.t += 1;
    let t = state.t as f64;
    let (b1, b2) = (config.beta1, config.beta2);
    let m_correction = 1.0 - b1.powf(t);
    let v_correction = 1.0 - b2.powf(t);
    let (lr, eps) = (config.learning_rate, config.adam_epsilon);

    let tensors = params
        .tensors_mut()
        .iter_mut()
        .zip(grads.tensors())
        .zip(state.m.tensors_mut().iter_mut().zip(state.v.tensors_mut()));
    for ((p, g), (m, v)) in tensors {
        let lanes = p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut().zip(v.data_mut()));
        for ((theta, &g), (m, v)) in lanes {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / m_correction;
            let v_hat = *v / v_correction;
            *theta -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    /// `epoch,train_loss,val_loss,seconds`; empty `val_loss` when there is no validation set.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,seconds\n");
        for r in &self.records {
            let val = r.val_loss.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{:.3}", r.epoch, r.train_loss, val, r.seconds);
        }
        out
    }
}

const SHUFFLE_STREAM: u64 = 0x5348_5546;
const DROPOUT_STREAM: u64 = 0x4452_4F50;

fn split_batch(examples: &[&EncodedExample]) -> (Vec<TokenSequence>, Vec<Target>) {
    examples.iter().map(|e| (e.ids.clone(), e.target)).unzip()
}

/// Inference-mode mean BCE over `examples`, evaluated in chunks.
pub fn mean_loss(bundle: &ModelBundle, examples: &[EncodedExample], batch_size: usize) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::invalid("no examples to evaluate"));
    }
    let mut total = 0.0;
    for chunk in examples.chunks(batch_size.max(1)) {
        let refs: Vec<&EncodedExample> = chunk.iter().collect();
        let (seqs, targets) = split_batch(&refs);
        let loss = model::batch_loss(&bundle.params, &bundle.config, &seqs, &targets, false, 0)?;
        total += loss * chunk.len() as f64;
    }
    Ok(total / examples.len() as f64)
}

/// Train for `config.epochs` epochs. Each epoch reshuffles with a seeded
/// Fisher–Yates pass and trains every batch, including a final partial one.
/// `on_epoch` sees each record as soon as it is appended.
pub fn train(
    train_set: &[EncodedExample],
    val_set: &[EncodedExample],
    mut bundle: ModelBundle,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(ModelBundle, TrainHistory)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let mut state = AdamState::new(&bundle.config);
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        SplitMix64::new(derive_seed(config.seed, &[SHUFFLE_STREAM, epoch as u64])).shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (batch_idx, idx) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&EncodedExample> = idx.iter().map(|&i| &train_set[i]).collect();
            let (seqs, targets) = split_batch(&batch);
            let seed = derive_seed(config.seed, &[DROPOUT_STREAM, epoch as u64, batch_idx as u64]);
            let trace = model::forward(&bundle.params, &bundle.config, &seqs, true, seed)?;
            let loss = layers::bce_loss(trace.probs(), &model::targets_tensor(&targets)?)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx + 1,
                });
            }
            loss_sum += loss * batch.len() as f64;
            let grads = model::backward(trace, &bundle.params, &bundle.config, &targets)?;
            adam_step(&mut bundle.params, &grads, &mut state, config)?;
        }
        let val_loss = if val_set.is_empty() {
            None
        } else {
            Some(mean_loss(&bundle, val_set, config.batch_size)?)
        };
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            val_loss,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        history.records.push(record);
    }
    Ok((bundle, history))
}

/// Sequence length used with [`overfit_dataset`]; its texts are short.
pub const OVERFIT_SEQ_LEN: usize = 16;

/// 32 short texts where "fury" marks anger and "tears" marks sadness.
/// Every example carries at least one of the two keywords.
pub fn overfit_dataset() -> Vec<LabeledExample> {
    const FILLER: [&str; 12] = [
        "the", "night", "road", "we", "walk", "again", "under", "city", "lights", "slow", "river", "home",
    ];
    let mut rng = SplitMix64::new(0x0F0F_2024);
    (0..32)
        .map(|i| {
            let n_filler = 4 + rng.below(5) as usize;
            let mut words: Vec<&str> = (0..n_filler)
                .map(|_| FILLER[rng.below(FILLER.len() as u64) as usize])
                .collect();
            let (fury, tears) = match i % 3 {
                0 => (true, false),
                1 => (false, true),
                _ => (true, true),
            };
            let mut target = [0u8; NUM_EMOTIONS];
            for (present, word, emotion) in [(fury, "fury", 0usize), (tears, "tears", 7usize)] {
                if present {
                    let at = rng.below(words.len() as u64 + 1) as usize;
                    words.insert(at, word);
                    target[emotion] = 1;
                }
            }
            LabeledExample {
                text: words.join(" "),
                target,
            }
        })
        .collect()
}

/// Name of the parameter tensor holding flat coordinate `index`.
pub fn param_name_at(config: &ModelConfig, mut index: usize) -> Option<&'static str> {
    for (id, shape) in ParamId::ALL.into_iter().zip(config.param_shapes()) {
        let n: usize = shape.iter().product();
        if index < n {
            return Some(id.name());
        }
        index -= n;
    }
    None
}
