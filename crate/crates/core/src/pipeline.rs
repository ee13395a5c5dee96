//! Prepared examples to trained model: split, vocabulary, encoding,
//! initialization, training. All randomness derives from `train.seed`.

use serde::{Deserialize, Serialize};

use crate::dataset::{self, EncodedExample, LabeledExample};
use crate::error::{Error, Result};
use crate::model::{ModelBundle, ModelConfig};
use crate::rng::derive_seed;
use crate::text::{self, build_vocab, tokenize};
use crate::train::{self, EpochRecord, TrainConfig, TrainHistory};

const SPLIT_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seq_len: usize,
    pub embed_size: usize,
    pub conv_filters: usize,
    pub kernel_size: usize,
    pub pool_size: usize,
    pub dropout: f64,
    pub min_freq: usize,
    pub max_vocab: usize,
    pub train: TrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seq_len: text::DEFAULT_SEQ_LEN,
            embed_size: ModelConfig::DEFAULT_EMBED_SIZE,
            conv_filters: ModelConfig::DEFAULT_CONV_FILTERS,
            kernel_size: ModelConfig::DEFAULT_KERNEL_SIZE,
            pool_size: ModelConfig::DEFAULT_POOL_SIZE,
            dropout: ModelConfig::DEFAULT_DROPOUT,
            min_freq: text::DEFAULT_MIN_FREQ,
            max_vocab: text::DEFAULT_MAX_VOCAB,
            train: TrainConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            seq_len: self.seq_len,
            embed_size: self.embed_size,
            conv_filters: self.conv_filters,
            kernel_size: self.kernel_size,
            pool_size: self.pool_size,
            dropout_p: self.dropout,
            ..ModelConfig::new(vocab_size)
        }
    }
}

/// A split with an untrained model built from its training half.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub bundle: ModelBundle,
    pub train_raw: Vec<LabeledExample>,
    pub val_raw: Vec<LabeledExample>,
    pub train: Vec<EncodedExample>,
    pub val: Vec<EncodedExample>,
}

/// Split, build the vocabulary on the training part only, encode, and initialize.
pub fn prepare_run(examples: &[LabeledExample], config: &PipelineConfig) -> Result<PreparedRun> {
    config.train.validate()?;
    let seed = config.train.seed;
    let (train_raw, val_raw) =
        dataset::split_dataset(examples, config.train.val_fraction, derive_seed(seed, &[SPLIT_STREAM]))?;
    if train_raw.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    let corpus: Vec<Vec<String>> = train_raw.iter().map(|e| tokenize(&e.text)).collect();
    let vocab = build_vocab(&corpus, config.min_freq, config.max_vocab)?;
    let model_config = config.model_config(vocab.len());
    model_config.validate()?;
    let train = dataset::encode_examples(&train_raw, &vocab, model_config.seq_len);
    let val = dataset::encode_examples(&val_raw, &vocab, model_config.seq_len);
    let bundle = ModelBundle::initialize(model_config, vocab, derive_seed(seed, &[INIT_STREAM]))?;
    Ok(PreparedRun {
        bundle,
        train_raw,
        val_raw,
        train,
        val,
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub bundle: ModelBundle,
    pub history: TrainHistory,
    pub run: PreparedRun,
}

pub fn run_training(
    examples: &[LabeledExample],
    config: &PipelineConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    let run = prepare_run(examples, config)?;
    let (bundle, history) = train::train(&run.train, &run.val, run.bundle.clone(), &config.train, on_epoch)?;
    Ok(TrainOutcome { bundle, history, run })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_comes_from_training_split_only() {
        let examples: Vec<LabeledExample> = (0..20)
            .map(|i| LabeledExample {
                text: format!("shared shared word{i} word{i}"),
                target: [1, 0, 0, 0, 0, 0, 0, 0],
            })
            .collect();
        let cfg = PipelineConfig {
            seq_len: 8,
            train: TrainConfig {
                val_fraction: 0.25,
                ..TrainConfig::default()
            },
            ..PipelineConfig::default()
        };
        let run = prepare_run(&examples, &cfg).unwrap();
        assert_eq!(run.train.len() + run.val.len(), 20);
        for ex in &run.val_raw {
            let unique = ex.text.split(' ').nth(2).unwrap();
            assert!(
                run.bundle.vocab.id(unique).is_none(),
                "{unique} leaked into the vocabulary"
            );
        }
        assert!(run.bundle.vocab.id("shared").is_some());
    }
}
