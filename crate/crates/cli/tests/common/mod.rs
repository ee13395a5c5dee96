//! Fixtures shared by the CLI tests and the acceptance harness.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use emolyric::rng::SplitMix64;

/// The full 28-name source taxonomy in GoEmotions id order.
pub const SOURCE_NAMES: [&str; 28] = [
    "admiration",
    "amusement",
    "anger",
    "annoyance",
    "approval",
    "caring",
    "confusion",
    "curiosity",
    "desire",
    "disappointment",
    "disapproval",
    "disgust",
    "embarrassment",
    "excitement",
    "fear",
    "gratitude",
    "grief",
    "joy",
    "love",
    "nervousness",
    "optimism",
    "pride",
    "realization",
    "relief",
    "remorse",
    "sadness",
    "surprise",
    "neutral",
];

/// Cue words per target emotion, in canonical order.
const CUES: [(&str, [&str; 4]); 8] = [
    ("anger", ["furious", "rage", "hate", "livid"]),
    ("confusion", ["confused", "puzzled", "huh", "unclear"]),
    ("desire", ["want", "wish", "crave", "longing"]),
    ("fear", ["scared", "afraid", "terrified", "dread"]),
    ("grief", ["mourn", "funeral", "passed", "gone"]),
    ("excitement", ["wow", "hyped", "thrilled", "pumped"]),
    ("love", ["love", "adore", "darling", "heart"]),
    ("sadness", ["sad", "tears", "cry", "lonely"]),
];

const FILLER: [&str; 24] = [
    "the", "a", "and", "it", "is", "was", "so", "very", "really", "day", "night", "time", "this", "that", "thread",
    "post", "reddit", "people", "just", "one", "with", "about", "again", "now",
];

fn source_id(name: &str) -> usize {
    SOURCE_NAMES.iter().position(|&n| n == name).unwrap()
}

/// GoEmotions-format TSV rows: each comment gets one or two target
/// emotions, whose cue words appear among filler; a cue is dropped with
/// some probability so the task is not trivially separable. Roughly one
/// row in eight is `neutral` only and is filtered by `prepare`.
pub fn synthetic_goemotions(rows: usize, seed: u64) -> String {
    let mut rng = SplitMix64::new(seed);
    let mut out = String::new();
    for i in 0..rows {
        let mut words: Vec<&str> = (0..6 + rng.below(10) as usize)
            .map(|_| FILLER[rng.below(FILLER.len() as u64) as usize])
            .collect();
        let ids: Vec<usize> = if rng.below(8) == 0 {
            vec![source_id("neutral")]
        } else {
            let first = rng.below(8) as usize;
            let mut picked = vec![first];
            if rng.below(4) == 0 {
                let second = rng.below(8) as usize;
                if second != first {
                    picked.push(second);
                }
            }
            for &e in &picked {
                if rng.next_f64() < 0.85 {
                    let cue = CUES[e].1[rng.below(4) as usize];
                    let at = rng.below(words.len() as u64 + 1) as usize;
                    words.insert(at, cue);
                }
            }
            picked.iter().map(|&e| source_id(CUES[e].0)).collect()
        };
        let ids: Vec<String> = ids.iter().map(usize::to_string).collect();
        out.push_str(&format!("{}\t{}\tc{i:05}\n", words.join(" "), ids.join(",")));
    }
    out
}

pub fn taxonomy_file() -> String {
    SOURCE_NAMES.join("\n") + "\n"
}

/// Four songs whose human labels are fixed; the model output is irrelevant
/// for fixtures scored with a constant predictor.
pub fn songs_jsonl() -> String {
    [
        (r#"{"id":"s1","title":"One","artist":"A","lyrics":"i love you darling my heart","human_labels":["love","sadness","desire"]}"#),
        (r#"{"id":"s2","title":"Two","artist":"B","lyrics":"furious rage and tears tonight","human_labels":["anger","sadness","fear"]}"#),
        (r#"{"id":"s3","title":"Three","artist":"C","lyrics":"wow we are so hyped","human_labels":["excitement","love","desire"]}"#),
        (r#"{"id":"s4","title":"Four","artist":"D","lyrics":"gone too soon we mourn","human_labels":["grief","sadness","love"]}"#),
    ]
    .join("\n")
        + "\n"
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_emolyric")
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn emolyric")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes the taxonomy and a synthetic TSV into `dir`.
pub fn write_corpus(dir: &Path, rows: usize, seed: u64) -> (PathBuf, PathBuf) {
    let tax = dir.join("emotions.txt");
    let tsv = dir.join("train.tsv");
    std::fs::write(&tax, taxonomy_file()).unwrap();
    std::fs::write(&tsv, synthetic_goemotions(rows, seed)).unwrap();
    (tax, tsv)
}

/// Small architecture flags that keep CLI training runs well under a second.
pub const SMALL_MODEL: [&str; 10] = [
    "--seq-len",
    "16",
    "--embed-size",
    "8",
    "--conv-filters",
    "8",
    "--epochs",
    "2",
    "--batch-size",
    "16",
];
