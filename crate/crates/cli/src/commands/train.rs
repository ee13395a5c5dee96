use std::path::PathBuf;

use clap::Args;
use emolyric::dataset;
use emolyric::io::{read_to_string, write_atomic};
use emolyric::model_file;
use emolyric::pipeline::{self, PipelineConfig};
use emolyric::train::TrainConfig;
use serde::Serialize;

use crate::config::{pick, FileConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::{sidecar, RunManifest};

/// Train a model on prepared JSON Lines data.
#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Output of `prepare`.
    #[arg(long)]
    pub data: PathBuf,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// History CSV [default: <out>.history.csv].
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Default, Args)]
pub struct HyperArgs {
    /// Tokens per sequence [default: 128].
    #[arg(long)]
    pub seq_len: Option<usize>,
    /// Embedding width [default: 64].
    #[arg(long)]
    pub embed_size: Option<usize>,
    /// Filters per convolution [default: 100].
    #[arg(long)]
    pub conv_filters: Option<usize>,
    /// Convolution kernel size [default: 4].
    #[arg(long)]
    pub kernel_size: Option<usize>,
    /// Max-pool window [default: 2].
    #[arg(long)]
    pub pool_size: Option<usize>,
    /// Dropout rate [default: 0.2].
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Minimum token count for the vocabulary [default: 2].
    #[arg(long)]
    pub min_freq: Option<usize>,
    /// Vocabulary size cap including PAD and UNK [default: 20000].
    #[arg(long)]
    pub max_vocab: Option<usize>,
    /// [default: 10]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// [default: 64]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Adam step size [default: 0.001].
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// [default: 0.9]
    #[arg(long)]
    pub beta1: Option<f64>,
    /// [default: 0.999]
    #[arg(long)]
    pub beta2: Option<f64>,
    /// [default: 1e-8]
    #[arg(long)]
    pub adam_epsilon: Option<f64>,
    /// Fraction held out for validation [default: 0.1].
    #[arg(long)]
    pub val_fraction: Option<f64>,
    /// Seed for split, initialization, shuffling and dropout [default: 1].
    #[arg(long)]
    pub seed: Option<u64>,
}

impl HyperArgs {
    pub fn resolve(&self, file: &FileConfig) -> PipelineConfig {
        let d = PipelineConfig::default();
        let t = TrainConfig::default();
        PipelineConfig {
            seq_len: pick(self.seq_len, file.seq_len, d.seq_len),
            embed_size: pick(self.embed_size, file.embed_size, d.embed_size),
            conv_filters: pick(self.conv_filters, file.conv_filters, d.conv_filters),
            kernel_size: pick(self.kernel_size, file.kernel_size, d.kernel_size),
            pool_size: pick(self.pool_size, file.pool_size, d.pool_size),
            dropout: pick(self.dropout, file.dropout, d.dropout),
            min_freq: pick(self.min_freq, file.min_freq, d.min_freq),
            max_vocab: pick(self.max_vocab, file.max_vocab, d.max_vocab),
            train: TrainConfig {
                learning_rate: pick(self.learning_rate, file.learning_rate, t.learning_rate),
                beta1: pick(self.beta1, file.beta1, t.beta1),
                beta2: pick(self.beta2, file.beta2, t.beta2),
                adam_epsilon: pick(self.adam_epsilon, file.adam_epsilon, t.adam_epsilon),
                batch_size: pick(self.batch_size, file.batch_size, t.batch_size),
                epochs: pick(self.epochs, file.epochs, t.epochs),
                seed: pick(self.seed, file.seed, t.seed),
                val_fraction: pick(self.val_fraction, file.val_fraction, t.val_fraction),
            },
        }
    }
}

#[derive(Serialize)]
struct Resolved<'a> {
    #[serde(flatten)]
    pipeline: &'a PipelineConfig,
    vocab_size: usize,
    train_examples: usize,
    val_examples: usize,
}

pub fn run(args: TrainArgs) -> CliResult<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let cfg = args.hyper.resolve(&file);
    let examples = dataset::parse_prepared(&read_to_string(&args.data)?).map_err(|e| e.in_file(&args.data))?;
    if examples.is_empty() {
        return Err(CliError::usage(format!("{}: no examples", args.data.display())));
    }

    let outcome = pipeline::run_training(&examples, &cfg, |r| {
        let val = r.val_loss.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into());
        eprintln!(
            "epoch {:>3}/{}  train_loss {:.6}  val_loss {}  {:.1}s",
            r.epoch, cfg.train.epochs, r.train_loss, val, r.seconds
        );
    })?;

    model_file::save_model(&outcome.bundle, &args.out)?;
    let history_path = args
        .history
        .clone()
        .unwrap_or_else(|| sidecar(&args.out, "history.csv"));
    write_atomic(&history_path, outcome.history.to_csv().as_bytes())?;

    let mut manifest = RunManifest::new(
        "train",
        Resolved {
            pipeline: &cfg,
            vocab_size: outcome.bundle.config.vocab_size,
            train_examples: outcome.run.train.len(),
            val_examples: outcome.run.val.len(),
        },
    );
    manifest.seed = Some(cfg.train.seed);
    manifest.inputs = vec![args.data.clone()];
    manifest.outputs = vec![args.out.clone(), history_path];
    manifest.write_next_to(&args.out)?;
    println!(
        "trained on {} examples ({} validation), vocabulary {}, model {}",
        outcome.run.train.len(),
        outcome.run.val.len(),
        outcome.bundle.config.vocab_size,
        args.out.display()
    );
    Ok(())
}
