use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use emolyric::eval::{self, Prediction};
use emolyric::io::{read_to_string, write_atomic};
use emolyric::model_file;
use serde::{Deserialize, Serialize};

use crate::config::{pick, FileConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

/// Rank emotions for a text or for every song in a JSON Lines file.
#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["text", "songs"]))]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// A single lyric or comment.
    #[arg(long)]
    pub text: Option<String>,
    /// JSON Lines with at least `id` and `lyrics` per line.
    #[arg(long)]
    pub songs: Option<PathBuf>,
    /// Emotions to report per input, 1..=8 [default: 3].
    #[arg(long)]
    pub k: Option<usize>,
    /// Write JSON Lines here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Deserialize)]
struct SongInput {
    id: String,
    lyrics: String,
}

#[derive(Serialize)]
struct Scored<'a> {
    emotion: &'a str,
    probability: f64,
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    id: &'a str,
    top_k: Vec<Scored<'a>>,
    probabilities: serde_json::Map<String, serde_json::Value>,
}

fn to_line(pred: &Prediction, k: usize) -> PredictionLine<'_> {
    PredictionLine {
        id: &pred.song_id,
        top_k: pred
            .top_k(k)
            .iter()
            .map(|e| Scored {
                emotion: e.name(),
                probability: pred.probability(*e),
            })
            .collect(),
        probabilities: emolyric::EmotionLabel::ALL
            .iter()
            .map(|e| (e.name().to_string(), pred.probability(*e).into()))
            .collect(),
    }
}

pub fn run(args: PredictArgs) -> CliResult<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let k = pick(args.k, file.k, eval::DEFAULT_K);
    eval::check_k(k)?;
    let bundle = model_file::load_model(&args.model)?;

    let predictions = if let Some(text) = &args.text {
        vec![Prediction::new("text", bundle.predict_text(text)?)]
    } else {
        let path = args.songs.as_ref().expect("clap enforces one input");
        let contents = read_to_string(path)?;
        let mut preds = Vec::new();
        for (lineno, line) in contents.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let song: SongInput = serde_json::from_str(line).map_err(|e| {
                emolyric::Error::Parse {
                    line: lineno + 1,
                    message: e.to_string(),
                }
                .in_file(path)
            })?;
            let probs = bundle
                .predict_text(&song.lyrics)
                .map_err(|e| CliError::usage(format!("{}: line {}: {e}", path.display(), lineno + 1)))?;
            preds.push(Prediction::new(song.id, probs));
        }
        if preds.is_empty() {
            return Err(CliError::usage(format!("{}: no songs", path.display())));
        }
        preds
    };

    let mut out = Vec::new();
    for pred in &predictions {
        serde_json::to_writer(&mut out, &to_line(pred, k)).map_err(emolyric::Error::from)?;
        out.push(b'\n');
    }
    match &args.out {
        Some(path) => {
            write_atomic(path, &out)?;
            let mut manifest = RunManifest::new("predict", serde_json::json!({ "k": k }));
            manifest.inputs = std::iter::once(args.model.clone()).chain(args.songs.clone()).collect();
            manifest.outputs = vec![path.clone()];
            manifest.write_next_to(path)?;
        }
        None if args.text.is_some() => {
            let pred = &predictions[0];
            for e in pred.top_k(k) {
                println!("{}\t{:.4}", e.name(), pred.probability(*e));
            }
        }
        None => std::io::stdout()
            .write_all(&out)
            .map_err(|e| emolyric::Error::io("<stdout>", e))?,
    }
    Ok(())
}
