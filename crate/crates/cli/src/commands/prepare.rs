use std::path::PathBuf;

use clap::Args;
use emolyric::dataset::{self, ProjectionStats};
use emolyric::io::{read_to_string, write_atomic};
use serde::Serialize;

use crate::config::{pick, FileConfig};
use crate::error::CliResult;
use crate::manifest::{sidecar, RunManifest};

/// Project GoEmotions TSV files onto the eight target emotions.
#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// GoEmotions TSV file(s): text, comma-separated label ids, record id.
    #[arg(long = "input", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Emotion names, one per line, in label-id order.
    #[arg(long)]
    pub taxonomy: PathBuf,
    /// Prepared JSON Lines output.
    #[arg(long)]
    pub out: PathBuf,
    /// Keep comments with none of the eight emotions as all-zero targets.
    #[arg(long)]
    pub keep_negatives: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Serialize)]
struct Resolved {
    keep_negatives: bool,
}

pub fn run(args: PrepareArgs) -> CliResult<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let keep_negatives = args.keep_negatives || pick(None, file.keep_negatives, false);

    let taxonomy =
        dataset::parse_source_taxonomy(&read_to_string(&args.taxonomy)?).map_err(|e| e.in_file(&args.taxonomy))?;
    let mut comments = Vec::new();
    for input in &args.inputs {
        let rows = dataset::parse_goemotions_tsv(&read_to_string(input)?, &taxonomy).map_err(|e| e.in_file(input))?;
        comments.extend(rows);
    }
    let (examples, stats) = dataset::project_corpus(&comments, &taxonomy, keep_negatives);

    write_atomic(&args.out, dataset::write_prepared(&examples)?.as_bytes())?;
    let stats_path = sidecar(&args.out, "stats.json");
    let mut stats_json =
        serde_json::to_vec_pretty(&StatsFile::from(&stats, examples.len())).map_err(emolyric::Error::from)?;
    stats_json.push(b'\n');
    write_atomic(&stats_path, &stats_json)?;

    let mut manifest = RunManifest::new("prepare", Resolved { keep_negatives });
    manifest.inputs = std::iter::once(args.taxonomy.clone())
        .chain(args.inputs.iter().cloned())
        .collect();
    manifest.outputs = vec![args.out.clone(), stats_path];
    manifest.write_next_to(&args.out)?;

    println!("total rows: {}", stats.total_rows);
    println!("kept: {}", stats.kept);
    println!("filtered: {}", stats.filtered);
    println!("written: {}", examples.len());
    for (emotion, count) in &stats.per_emotion {
        println!("  {emotion}: {count}");
    }
    Ok(())
}

#[derive(Serialize)]
struct StatsFile {
    total_rows: usize,
    kept: usize,
    filtered: usize,
    examples_written: usize,
    per_emotion: serde_json::Map<String, serde_json::Value>,
}

impl StatsFile {
    fn from(stats: &ProjectionStats, written: usize) -> Self {
        Self {
            total_rows: stats.total_rows,
            kept: stats.kept,
            filtered: stats.filtered,
            examples_written: written,
            per_emotion: stats
                .per_emotion
                .iter()
                .map(|(e, c)| (e.name().to_string(), (*c).into()))
                .collect(),
        }
    }
}
