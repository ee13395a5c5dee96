use clap::{Args, ValueEnum};
use emolyric::dataset::EncodedExample;
use emolyric::gradcheck::{self, Fault};
use emolyric::model::ModelConfig;
use emolyric::rng::{derive_seed, SplitMix64};
use emolyric::text::{TokenSequence, Vocabulary, PAD_TOKEN, UNK_TOKEN};
use emolyric::{ModelBundle, Target};

use crate::error::{CliError, CliResult};

pub const THRESHOLD: f64 = 1e-4;

/// Check analytic gradients against central differences on a random model.
#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 20)]
    pub vocab_size: usize,
    #[arg(long, default_value_t = 4)]
    pub embed_size: usize,
    #[arg(long, default_value_t = 12)]
    pub seq_len: usize,
    #[arg(long, default_value_t = 8)]
    pub conv_filters: usize,
    #[arg(long, default_value_t = 4)]
    pub kernel_size: usize,
    #[arg(long, default_value_t = 2)]
    pub pool_size: usize,
    /// Examples in the random batch.
    #[arg(long, default_value_t = 4)]
    pub batch: usize,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-4)]
    pub step: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Corrupt the analytic gradient (test hook).
    #[arg(long, value_enum, hide = true)]
    pub inject_fault: Option<FaultArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FaultArg {
    SignFlip,
}

pub fn run(args: GradcheckArgs) -> CliResult<()> {
    if args.vocab_size < 3 || args.batch == 0 {
        return Err(CliError::usage("vocab-size must be at least 3 and batch at least 1"));
    }
    let config = ModelConfig {
        embed_size: args.embed_size,
        seq_len: args.seq_len,
        conv_filters: args.conv_filters,
        kernel_size: args.kernel_size,
        pool_size: args.pool_size,
        ..ModelConfig::new(args.vocab_size)
    };
    let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
    tokens.extend((2..args.vocab_size).map(|i| format!("tok{i}")));
    let bundle = ModelBundle::initialize(config, Vocabulary::from_tokens(tokens)?, derive_seed(args.seed, &[0]))?;

    let mut rng = SplitMix64::new(derive_seed(args.seed, &[1]));
    let batch: Vec<EncodedExample> = (0..args.batch)
        .map(|_| {
            let len = 1 + rng.below(config.seq_len as u64) as usize;
            let mut ids: Vec<u32> = (0..len)
                .map(|_| 1 + rng.below(config.vocab_size as u64 - 1) as u32)
                .collect();
            ids.resize(config.seq_len, 0);
            let target: Target = std::array::from_fn(|_| rng.below(2) as u8);
            TokenSequence::from_ids(ids).map(|ids| EncodedExample { ids, target })
        })
        .collect::<emolyric::Result<_>>()?;

    let fault = match args.inject_fault {
        Some(FaultArg::SignFlip) => Fault::SignFlip,
        None => Fault::None,
    };
    let report = gradcheck::gradient_check_with(&bundle, &batch, args.step, args.seed, fault)?;
    println!("max_relative_error {:e}", report.max_rel_error);
    println!("coordinates_checked {}", report.coordinates_checked);
    println!("kink_crossings {}", report.kink_crossings);
    if report.max_rel_error < THRESHOLD {
        println!("PASS (< {THRESHOLD:e})");
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "gradient check failed: max relative error {:e} >= {THRESHOLD:e}",
            report.max_rel_error
        )))
    }
}
