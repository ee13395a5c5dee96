use std::path::PathBuf;

use clap::Args;
use emolyric::dataset;
use emolyric::eval::{self, PriorBaseline};
use emolyric::io::read_to_string;
use emolyric::model_file;

use crate::config::{pick, FileConfig};
use crate::error::CliResult;
use crate::manifest::{sidecar, RunManifest};

/// Score songs and measure overlap with their human labels.
#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// JSON Lines: id, title, artist, lyrics, human_labels (exactly 3).
    #[arg(long)]
    pub songs: PathBuf,
    /// Top-k emotions compared with the human labels, 1..=8 [default: 3].
    #[arg(long)]
    pub k: Option<usize>,
    /// Per-song CSV report; the JSON summary goes to <out>.summary.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Prepared training data for the label-frequency baseline.
    #[arg(long)]
    pub baseline_data: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: EvaluateArgs) -> CliResult<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let k = pick(args.k, file.k, eval::DEFAULT_K);
    eval::check_k(k)?;
    let songs = dataset::parse_eval_songs(&read_to_string(&args.songs)?).map_err(|e| e.in_file(&args.songs))?;
    if songs.is_empty() {
        return Err(crate::error::CliError::usage(format!(
            "{}: no songs",
            args.songs.display()
        )));
    }
    let bundle = model_file::load_model(&args.model)?;
    let predictions = songs
        .iter()
        .map(|s| eval::predict_song(&bundle, s))
        .collect::<emolyric::Result<Vec<_>>>()?;
    let mut report = eval::overlap_at_k(&predictions, &songs, k)?;

    if let Some(path) = &args.baseline_data {
        let train = dataset::parse_prepared(&read_to_string(path)?).map_err(|e| e.in_file(path))?;
        let baseline = PriorBaseline::fit(&train)?;
        let base_report = eval::overlap_at_k(&baseline.predict_songs(&songs), &songs, k)?;
        report = report.with_baseline(&base_report);
    }

    let summary_path = sidecar(&args.out, "summary.json");
    eval::emit_report(&report, &args.out, &summary_path)?;
    let mut manifest = RunManifest::new("evaluate", serde_json::json!({ "k": k }));
    manifest.inputs = [
        Some(args.model.clone()),
        Some(args.songs.clone()),
        args.baseline_data.clone(),
    ]
    .into_iter()
    .flatten()
    .collect();
    manifest.outputs = vec![args.out.clone(), summary_path];
    manifest.write_next_to(&args.out)?;

    println!("songs: {}", report.n);
    println!("overlap@{k}: {:.4}", report.overlap_at_k);
    if let Some(b) = report.baseline_overlap_at_k {
        println!("baseline overlap@{k}: {b:.4}");
    }
    Ok(())
}
