//! The convolutional emotion classifier.
//!
//! Layer order per example:
//! embedding → dropout → conv1+ReLU → conv2+ReLU → max-pool → global
//! max-pool → dense1+softplus → dense2+softplus → dropout → output+sigmoid.
//!
//! Examples in a batch are processed independently (in parallel), and
//! per-example gradients are summed in ascending example order so results
//! do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emotion::{Target, NUM_EMOTIONS};
use crate::error::{Error, Result};
use crate::layers::{self, Activation, DropoutMask, PoolCache};
use crate::rng::{derive_seed, SplitMix64};
use crate::tensor::Tensor;
use crate::text::{self, TokenSequence, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_size: usize,
    pub seq_len: usize,
    pub conv_filters: usize,
    pub kernel_size: usize,
    pub pool_size: usize,
    pub dense1_units: usize,
    pub dense2_units: usize,
    pub output_units: usize,
    pub dropout_p: f64,
}

impl ModelConfig {
    pub const DEFAULT_EMBED_SIZE: usize = 64;
    pub const DEFAULT_CONV_FILTERS: usize = 100;
    pub const DEFAULT_KERNEL_SIZE: usize = 4;
    pub const DEFAULT_POOL_SIZE: usize = 2;
    pub const DEFAULT_DROPOUT: f64 = 0.2;

    /// Default architecture for a vocabulary of the given size.
    pub fn new(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            embed_size: Self::DEFAULT_EMBED_SIZE,
            seq_len: text::DEFAULT_SEQ_LEN,
            conv_filters: Self::DEFAULT_CONV_FILTERS,
            kernel_size: Self::DEFAULT_KERNEL_SIZE,
            pool_size: Self::DEFAULT_POOL_SIZE,
            dense1_units: 64,
            dense2_units: 32,
            output_units: NUM_EMOTIONS,
            dropout_p: Self::DEFAULT_DROPOUT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("vocab_size", self.vocab_size),
            ("embed_size", self.embed_size),
            ("seq_len", self.seq_len),
            ("conv_filters", self.conv_filters),
            ("kernel_size", self.kernel_size),
            ("pool_size", self.pool_size),
            ("dense1_units", self.dense1_units),
            ("dense2_units", self.dense2_units),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format!("{name} must be at least 1")));
        }
        if self.output_units != NUM_EMOTIONS {
            return Err(Error::invalid(format!(
                "output_units must be {NUM_EMOTIONS}, got {}",
                self.output_units
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::invalid(format!(
                "dropout_p must be in [0, 1), got {}",
                self.dropout_p
            )));
        }
        let after_convs = self.seq_len as i64 - 2 * (self.kernel_size as i64 - 1);
        if after_convs < self.pool_size as i64 {
            return Err(Error::invalid(format!(
                "seq_len {} too short: two convolutions of kernel {} leave {} positions, pool needs {}",
                self.seq_len, self.kernel_size, after_convs, self.pool_size
            )));
        }
        Ok(())
    }

    /// Shapes of every parameter tensor in canonical order.
    pub fn param_shapes(&self) -> [Vec<usize>; ParamId::COUNT] {
        let (v, e, f, k) = (self.vocab_size, self.embed_size, self.conv_filters, self.kernel_size);
        let (d1, d2, o) = (self.dense1_units, self.dense2_units, self.output_units);
        [
            vec![v, e],
            vec![f, k, e],
            vec![f],
            vec![f, k, f],
            vec![f],
            vec![d1, f],
            vec![d1],
            vec![d2, d1],
            vec![d2],
            vec![o, d2],
            vec![o],
        ]
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes().iter().map(|s| s.iter().product::<usize>()).sum()
    }
}

/// Parameter tensors in canonical (serialization and optimizer) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamId {
    Embedding,
    Conv1Kernels,
    Conv1Bias,
    Conv2Kernels,
    Conv2Bias,
    Dense1Weights,
    Dense1Bias,
    Dense2Weights,
    Dense2Bias,
    OutputWeights,
    OutputBias,
}

impl ParamId {
    pub const COUNT: usize = 11;

    pub const ALL: [ParamId; Self::COUNT] = [
        ParamId::Embedding,
        ParamId::Conv1Kernels,
        ParamId::Conv1Bias,
        ParamId::Conv2Kernels,
        ParamId::Conv2Bias,
        ParamId::Dense1Weights,
        ParamId::Dense1Bias,
        ParamId::Dense2Weights,
        ParamId::Dense2Bias,
        ParamId::OutputWeights,
        ParamId::OutputBias,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamId::Embedding => "embedding",
            ParamId::Conv1Kernels => "conv1.kernels",
            ParamId::Conv1Bias => "conv1.bias",
            ParamId::Conv2Kernels => "conv2.kernels",
            ParamId::Conv2Bias => "conv2.bias",
            ParamId::Dense1Weights => "dense1.weights",
            ParamId::Dense1Bias => "dense1.bias",
            ParamId::Dense2Weights => "dense2.weights",
            ParamId::Dense2Bias => "dense2.bias",
            ParamId::OutputWeights => "output.weights",
            ParamId::OutputBias => "output.bias",
        }
    }

    fn is_bias(self) -> bool {
        matches!(
            self,
            ParamId::Conv1Bias | ParamId::Conv2Bias | ParamId::Dense1Bias | ParamId::Dense2Bias | ParamId::OutputBias
        )
    }
}

/// All learnable tensors. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    tensors: Vec<Tensor>,
}

impl ModelParams {
    pub fn zeros(config: &ModelConfig) -> Self {
        Self {
            tensors: config.param_shapes().iter().map(|s| Tensor::zeros(s)).collect(),
        }
    }

    /// Wrap tensors given in canonical order, checking shapes against `config`.
    pub fn from_tensors(config: &ModelConfig, tensors: Vec<Tensor>) -> Result<Self> {
        let shapes = config.param_shapes();
        if tensors.len() != shapes.len() {
            return Err(Error::shape(format!(
                "expected {} parameter tensors, got {}",
                shapes.len(),
                tensors.len()
            )));
        }
        for ((t, s), id) in tensors.iter().zip(&shapes).zip(ParamId::ALL) {
            t.expect_shape(s)
                .map_err(|e| Error::shape(format!("{}: {e}", id.name())))?;
        }
        Ok(Self { tensors })
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id as usize]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id as usize]
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        ParamId::ALL.into_iter().zip(&self.tensors)
    }

    pub fn len(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Round every value through `f32`, as a save/load cycle does.
    pub fn quantized(&self) -> Self {
        Self {
            tensors: self.tensors.iter().map(|t| t.map(|v| v as f32 as f64)).collect(),
        }
    }

    /// Flat coordinate `index` across all tensors in canonical order.
    pub fn coordinate_mut(&mut self, mut index: usize) -> Option<&mut f64> {
        for t in &mut self.tensors {
            if index < t.len() {
                return Some(&mut t.data_mut()[index]);
            }
            index -= t.len();
        }
        None
    }

    pub fn coordinate(&self, mut index: usize) -> Option<f64> {
        for t in &self.tensors {
            if index < t.len() {
                return Some(t.data()[index]);
            }
            index -= t.len();
        }
        None
    }
}

/// Embedding ~ U(−0.05, 0.05); conv and dense weights Glorot-uniform with
/// limit √(6/(fan_in+fan_out)); biases zero. One splitmix64 stream, drawn in
/// canonical order.
pub fn init_params(config: &ModelConfig, seed: u64) -> Result<ModelParams> {
    config.validate()?;
    let mut rng = SplitMix64::new(seed);
    let (e, f, k) = (config.embed_size, config.conv_filters, config.kernel_size);
    let mut params = ModelParams::zeros(config);
    for id in ParamId::ALL {
        if id.is_bias() {
            continue;
        }
        let limit = match id {
            ParamId::Embedding => 0.05,
            ParamId::Conv1Kernels => glorot_limit(k * e, f),
            ParamId::Conv2Kernels => glorot_limit(k * f, f),
            ParamId::Dense1Weights => glorot_limit(f, config.dense1_units),
            ParamId::Dense2Weights => glorot_limit(config.dense1_units, config.dense2_units),
            ParamId::OutputWeights => glorot_limit(config.dense2_units, config.output_units),
            _ => unreachable!("biases skipped above"),
        };
        for w in params.get_mut(id).data_mut() {
            *w = rng.uniform(-limit, limit);
        }
    }
    Ok(params)
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Everything one example's backward pass needs.
#[derive(Debug, Clone)]
struct ExampleTrace {
    ids: Vec<u32>,
    embed_mask: DropoutMask,
    conv1_in: Tensor,
    conv1_pre: Tensor,
    conv1_out: Tensor,
    conv2_pre: Tensor,
    conv2_out: Tensor,
    pool: PoolCache,
    global_pool: PoolCache,
    pooled: Tensor,
    dense1_pre: Tensor,
    dense1_out: Tensor,
    dense2_pre: Tensor,
    dense2_out: Tensor,
    head_mask: DropoutMask,
    head_in: Tensor,
    probs: Tensor,
}

/// Saved activations for one batch plus its `B×8` output probabilities.
/// [`backward`] takes it by value, so a trace is consumed at most once.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    examples: Vec<ExampleTrace>,
    probs: Tensor,
}

impl ForwardTrace {
    pub fn probs(&self) -> &Tensor {
        &self.probs
    }

    pub fn batch_size(&self) -> usize {
        self.examples.len()
    }

    pub fn into_probs(self) -> Tensor {
        self.probs
    }

    /// True when both traces took the same piecewise-linear branch: every
    /// ReLU has the same sign and every pool picked the same winner.
    pub fn same_branch(&self, other: &ForwardTrace) -> bool {
        fn signs(t: &Tensor) -> impl Iterator<Item = bool> + '_ {
            t.data().iter().map(|&v| v > 0.0)
        }
        self.examples.len() == other.examples.len()
            && self.examples.iter().zip(&other.examples).all(|(a, b)| {
                a.pool == b.pool
                    && a.global_pool == b.global_pool
                    && signs(&a.conv1_pre).eq(signs(&b.conv1_pre))
                    && signs(&a.conv2_pre).eq(signs(&b.conv2_pre))
            })
    }
}

const EMBED_DROPOUT_STREAM: u64 = 0;
const HEAD_DROPOUT_STREAM: u64 = 1;

fn forward_example(
    params: &ModelParams,
    config: &ModelConfig,
    seq: &TokenSequence,
    training: bool,
    seed: u64,
    index: usize,
) -> Result<ExampleTrace> {
    use ParamId::*;
    if seq.len() != config.seq_len {
        return Err(Error::shape(format!(
            "sequence length {} does not match model seq_len {}",
            seq.len(),
            config.seq_len
        )));
    }
    let p = config.dropout_p;
    let embedded = layers::embedding_forward(seq.ids(), params.get(Embedding))?;
    let (conv1_in, embed_mask) = layers::dropout(
        &embedded,
        p,
        training,
        derive_seed(seed, &[index as u64, EMBED_DROPOUT_STREAM]),
    )?;
    let conv1_pre = layers::conv1d_forward(&conv1_in, params.get(Conv1Kernels), params.get(Conv1Bias))?;
    let conv1_out = Activation::Relu.forward(&conv1_pre);
    let conv2_pre = layers::conv1d_forward(&conv1_out, params.get(Conv2Kernels), params.get(Conv2Bias))?;
    let conv2_out = Activation::Relu.forward(&conv2_pre);
    let (pooled_seq, pool) = layers::maxpool1d(&conv2_out, config.pool_size)?;
    let (pooled, global_pool) = layers::global_maxpool(&pooled_seq)?;
    let dense1_pre = layers::dense_forward(&pooled, params.get(Dense1Weights), params.get(Dense1Bias))?;
    let dense1_out = Activation::Softplus.forward(&dense1_pre);
    let dense2_pre = layers::dense_forward(&dense1_out, params.get(Dense2Weights), params.get(Dense2Bias))?;
    let dense2_out = Activation::Softplus.forward(&dense2_pre);
    let (head_in, head_mask) = layers::dropout(
        &dense2_out,
        p,
        training,
        derive_seed(seed, &[index as u64, HEAD_DROPOUT_STREAM]),
    )?;
    let logits = layers::dense_forward(&head_in, params.get(OutputWeights), params.get(OutputBias))?;
    let probs = Activation::Sigmoid.forward(&logits);
    Ok(ExampleTrace {
        ids: seq.ids().to_vec(),
        embed_mask,
        conv1_in,
        conv1_pre,
        conv1_out,
        conv2_pre,
        conv2_out,
        pool,
        global_pool,
        pooled,
        dense1_pre,
        dense1_out,
        dense2_pre,
        dense2_out,
        head_mask,
        head_in,
        probs,
    })
}

/// Run a batch. Dropout is active only when `training`; its masks are
/// derived from `seed` and each example's position in the batch.
pub fn forward(
    params: &ModelParams,
    config: &ModelConfig,
    batch: &[TokenSequence],
    training: bool,
    seed: u64,
) -> Result<ForwardTrace> {
    if batch.is_empty() {
        return Err(Error::shape("empty batch"));
    }
    config.validate()?;
    let examples: Vec<ExampleTrace> = batch
        .par_iter()
        .enumerate()
        .map(|(i, seq)| forward_example(params, config, seq, training, seed, i))
        .collect::<Result<_>>()?;
    let probs: Vec<f64> = examples.iter().flat_map(|e| e.probs.data().iter().copied()).collect();
    let probs = Tensor::matrix(examples.len(), config.output_units, probs)?;
    Ok(ForwardTrace { examples, probs })
}

/// Gradient contributions of one example. The embedding part is kept as
/// per-position rows and scattered during reduction.
struct ExampleGrads {
    embed_rows: Tensor,
    dense: Vec<Tensor>,
}

fn backward_example(trace: &ExampleTrace, params: &ModelParams, dlogits: Tensor) -> Result<ExampleGrads> {
    use ParamId::*;
    let out = layers::dense_backward(&trace.head_in, params.get(OutputWeights), &dlogits)?;
    let d_dense2_out = layers::dropout_backward(&trace.head_mask, &out.input)?;
    let d_dense2_pre = Activation::Softplus.backward(&trace.dense2_pre, &trace.dense2_out, &d_dense2_out)?;
    let dense2 = layers::dense_backward(&trace.dense1_out, params.get(Dense2Weights), &d_dense2_pre)?;
    let d_dense1_pre = Activation::Softplus.backward(&trace.dense1_pre, &trace.dense1_out, &dense2.input)?;
    let dense1 = layers::dense_backward(&trace.pooled, params.get(Dense1Weights), &d_dense1_pre)?;
    let d_pooled_seq = layers::pool_backward(&trace.global_pool, &dense1.input)?;
    let d_conv2_out = layers::pool_backward(&trace.pool, &d_pooled_seq)?;
    let d_conv2_pre = Activation::Relu.backward(&trace.conv2_pre, &trace.conv2_out, &d_conv2_out)?;
    let conv2 = layers::conv1d_backward(&trace.conv1_out, params.get(Conv2Kernels), &d_conv2_pre)?;
    let d_conv1_pre = Activation::Relu.backward(&trace.conv1_pre, &trace.conv1_out, &conv2.input)?;
    let conv1 = layers::conv1d_backward(&trace.conv1_in, params.get(Conv1Kernels), &d_conv1_pre)?;
    let embed_rows = layers::dropout_backward(&trace.embed_mask, &conv1.input)?;
    Ok(ExampleGrads {
        embed_rows,
        dense: vec![
            conv1.kernels,
            conv1.bias,
            conv2.kernels,
            conv2.bias,
            dense1.weights,
            dense1.bias,
            dense2.weights,
            dense2.bias,
            out.weights,
            out.bias,
        ],
    })
}

/// Gradients of the mean BCE over the batch w.r.t. every parameter.
pub fn backward(
    trace: ForwardTrace,
    params: &ModelParams,
    config: &ModelConfig,
    targets: &[Target],
) -> Result<ModelParams> {
    let batch = trace.examples.len();
    if targets.len() != batch {
        return Err(Error::shape(format!(
            "{} targets for a batch of {batch}",
            targets.len()
        )));
    }
    let y = targets_tensor(targets)?;
    let dlogits = layers::bce_sigmoid_grad(&trace.probs, &y)?;
    let per_example: Vec<ExampleGrads> = trace
        .examples
        .par_iter()
        .enumerate()
        .map(|(i, ex)| {
            let d = Tensor::vector(dlogits.row(i).to_vec())?;
            backward_example(ex, params, d)
        })
        .collect::<Result<_>>()?;

    let mut grads = ModelParams::zeros(config);
    for (ex, g) in trace.examples.iter().zip(&per_example) {
        layers::embedding_backward(&ex.ids, &g.embed_rows, grads.get_mut(ParamId::Embedding))?;
        for (dst, src) in grads.tensors_mut()[1..].iter_mut().zip(&g.dense) {
            dst.add_assign(src)?;
        }
    }
    Ok(grads)
}

pub fn targets_tensor(targets: &[Target]) -> Result<Tensor> {
    if targets.is_empty() {
        return Err(Error::shape("no targets"));
    }
    let data = targets.iter().flat_map(|t| t.iter().map(|&v| v as f64)).collect();
    Tensor::matrix(targets.len(), NUM_EMOTIONS, data)
}

/// Mean BCE of one batch under the given dropout mode and seed.
pub fn batch_loss(
    params: &ModelParams,
    config: &ModelConfig,
    batch: &[TokenSequence],
    targets: &[Target],
    training: bool,
    seed: u64,
) -> Result<f64> {
    let trace = forward(params, config, batch, training, seed)?;
    layers::bce_loss(trace.probs(), &targets_tensor(targets)?)
}

/// A trained (or freshly initialized) model with its vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub params: ModelParams,
}

impl ModelBundle {
    pub fn new(config: ModelConfig, vocab: Vocabulary, params: ModelParams) -> Result<Self> {
        config.validate()?;
        if vocab.len() != config.vocab_size {
            return Err(Error::invalid(format!(
                "vocabulary has {} entries but config says {}",
                vocab.len(),
                config.vocab_size
            )));
        }
        let params = ModelParams::from_tensors(&config, params.tensors)?;
        Ok(Self { config, vocab, params })
    }

    /// Initialize parameters for `vocab` with the given architecture.
    pub fn initialize(config: ModelConfig, vocab: Vocabulary, seed: u64) -> Result<Self> {
        let params = init_params(&config, seed)?;
        Self::new(config, vocab, params)
    }

    pub fn encode(&self, text: &str) -> TokenSequence {
        text::encode(&text::tokenize(text), &self.vocab, self.config.seq_len)
    }

    /// Inference-mode probabilities, one row per sequence.
    pub fn predict_sequences(&self, batch: &[TokenSequence]) -> Result<Vec<[f64; NUM_EMOTIONS]>> {
        let probs = forward(&self.params, &self.config, batch, false, 0)?.into_probs();
        Ok((0..batch.len())
            .map(|i| {
                let mut row = [0.0; NUM_EMOTIONS];
                row.copy_from_slice(probs.row(i));
                row
            })
            .collect())
    }

    /// Mean of per-window probabilities over consecutive `seq_len`-token
    /// windows. Fails when the text has no tokens.
    pub fn predict_text(&self, text: &str) -> Result<[f64; NUM_EMOTIONS]> {
        let tokens = text::tokenize(text);
        let windows = text::encode_windows(&tokens, &self.vocab, self.config.seq_len);
        if windows.is_empty() {
            return Err(Error::invalid("text contains no tokens"));
        }
        let rows = self.predict_sequences(&windows)?;
        let mut mean = [0.0; NUM_EMOTIONS];
        for row in &rows {
            for (m, p) in mean.iter_mut().zip(row) {
                *m += p;
            }
        }
        for m in &mut mean {
            *m /= rows.len() as f64;
        }
        Ok(mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            vocab_size: 20,
            embed_size: 4,
            seq_len: 12,
            conv_filters: 8,
            ..ModelConfig::new(20)
        }
    }

    fn seqs(config: &ModelConfig, n: usize, seed: u64) -> Vec<TokenSequence> {
        let mut rng = SplitMix64::new(seed);
        (0..n)
            .map(|_| {
                let ids = (0..config.seq_len)
                    .map(|_| 1 + rng.below(config.vocab_size as u64 - 1) as u32)
                    .collect();
                TokenSequence::from_ids(ids).unwrap()
            })
            .collect()
    }

    #[test]
    fn param_count_formula() {
        let c = ModelConfig::new(1000);
        let (v, e, f, k) = (1000, 64, 100, 4);
        let expected = v * e + f * k * e + f + f * k * f + f + 64 * f + 64 + 32 * 64 + 32 + 8 * 32 + 8;
        assert_eq!(c.param_count(), expected);
        assert_eq!(ModelParams::zeros(&c).len(), expected);
    }

    #[test]
    fn config_validation() {
        let mut c = tiny_config();
        assert!(c.validate().is_ok());
        c.seq_len = 7; // 7 - 6 = 1 < pool 2
        assert!(c.validate().is_err());
        c.seq_len = 8;
        assert!(c.validate().is_ok());
        c.output_units = 7;
        assert!(c.validate().is_err());
        let mut c = tiny_config();
        c.dropout_p = 1.0;
        assert!(c.validate().is_err());
        c.dropout_p = 0.2;
        c.conv_filters = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let c = tiny_config();
        let a = init_params(&c, 42).unwrap();
        let b = init_params(&c, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_params(&c, 43).unwrap());
        for (id, t) in a.iter() {
            if id.is_bias() {
                assert!(t.data().iter().all(|&v| v == 0.0), "{}", id.name());
            }
        }
        let limit = (6.0 / (c.kernel_size * c.embed_size + c.conv_filters) as f64).sqrt();
        assert!(a.get(ParamId::Conv1Kernels).data().iter().all(|w| w.abs() <= limit));
        assert!(a.get(ParamId::Embedding).data().iter().all(|w| w.abs() <= 0.05));
    }

    #[test]
    fn forward_outputs_are_probabilities() {
        let c = tiny_config();
        let params = init_params(&c, 1).unwrap();
        let batch = seqs(&c, 5, 9);
        let trace = forward(&params, &c, &batch, true, 3).unwrap();
        assert_eq!(trace.probs().shape(), &[5, 8]);
        assert!(trace.probs().data().iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn inference_ignores_dropout_seed_and_duplicates_agree() {
        let c = tiny_config();
        let params = init_params(&c, 1).unwrap();
        let mut batch = seqs(&c, 3, 2);
        batch.push(batch[0].clone());
        let a = forward(&params, &c, &batch, false, 1).unwrap().into_probs();
        let b = forward(&params, &c, &batch, false, 999).unwrap().into_probs();
        assert_eq!(a, b);
        assert_eq!(a.row(0), a.row(3));
    }

    #[test]
    fn forward_rejects_bad_inputs() {
        let c = tiny_config();
        let params = init_params(&c, 1).unwrap();
        let bad = TokenSequence::from_ids(vec![25; 12]).unwrap();
        assert!(matches!(
            forward(&params, &c, &[bad], false, 0),
            Err(Error::TokenOutOfRange { .. })
        ));
        let short = TokenSequence::from_ids(vec![2; 10]).unwrap();
        assert!(forward(&params, &c, &[short], false, 0).is_err());
        assert!(forward(&params, &c, &[], false, 0).is_err());
    }

    #[test]
    fn gradient_has_one_tensor_per_parameter() {
        let c = tiny_config();
        let params = init_params(&c, 4).unwrap();
        let batch = seqs(&c, 2, 5);
        let trace = forward(&params, &c, &batch, true, 0).unwrap();
        let grads = backward(trace, &params, &c, &[[1, 0, 0, 0, 0, 0, 0, 1]; 2]).unwrap();
        assert_eq!(grads.tensors().len(), params.tensors().len());
        for (g, p) in grads.tensors().iter().zip(params.tensors()) {
            assert_eq!(g.shape(), p.shape());
        }
        let trace = forward(&params, &c, &batch, true, 0).unwrap();
        assert!(backward(trace, &params, &c, &[[0; 8]; 3]).is_err());
    }

    #[test]
    fn predict_text_averages_windows() {
        let c = tiny_config();
        let tokens: Vec<String> = (0..18).map(|i| format!("w{i}")).collect();
        let mut vocab_tokens = vec!["<pad>".to_string(), "<unk>".to_string()];
        vocab_tokens.extend(tokens.clone());
        let vocab = Vocabulary::from_tokens(vocab_tokens).unwrap();
        let bundle = ModelBundle::initialize(c, vocab, 7).unwrap();

        let short = tokens[..5].join(" ");
        let single = bundle.predict_sequences(&[bundle.encode(&short)]).unwrap()[0];
        assert_eq!(bundle.predict_text(&short).unwrap(), single);

        let long = tokens.join(" ");
        let w1 = text::encode(&tokens[..12], &bundle.vocab, 12);
        let w2 = text::encode(&tokens[12..], &bundle.vocab, 12);
        let rows = bundle.predict_sequences(&[w1, w2]).unwrap();
        let got = bundle.predict_text(&long).unwrap();
        for j in 0..8 {
            assert_eq!(got[j], (rows[0][j] + rows[1][j]) / 2.0);
        }
        assert!(bundle.predict_text(" ,,, ").is_err());
    }
}
