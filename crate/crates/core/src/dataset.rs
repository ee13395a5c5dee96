//! GoEmotions-format ingestion, projection onto the eight target emotions,
//! lyric evaluation records, and seeded train/validation splits.

use std::collections::HashMap;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::emotion::{EmotionLabel, Target, NUM_EMOTIONS};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::text::{self, TokenSequence, Vocabulary};

/// Source emotion names, indexed by their 0-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceTaxonomy {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl SourceTaxonomy {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// One emotion name per non-empty line.
pub fn parse_source_taxonomy(contents: &str) -> Result<SourceTaxonomy> {
    let mut names = Vec::new();
    let mut index = HashMap::new();
    for (lineno, line) in contents.lines().enumerate() {
        let name = line.trim();
        if name.is_empty() {
            continue;
        }
        if index.insert(name.to_string(), names.len()).is_some() {
            return Err(Error::parse(lineno + 1, format!("duplicate emotion name {name:?}")));
        }
        names.push(name.to_string());
    }
    if names.is_empty() {
        return Err(Error::invalid("taxonomy file is empty"));
    }
    Ok(SourceTaxonomy { names, index })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawComment {
    pub text: String,
    pub label_ids: Vec<usize>,
    pub record_id: String,
}

/// Parse GoEmotions TSV rows: `text \t ids \t record_id`, no header.
///
/// Blank lines are skipped; a CR before the LF is tolerated.
pub fn parse_goemotions_tsv(contents: &str, taxonomy: &SourceTaxonomy) -> Result<Vec<RawComment>> {
    let mut out = Vec::new();
    for (lineno, line) in contents.split('\n').enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let lineno = lineno + 1;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::parse(
                lineno,
                format!("expected 3 tab-separated columns, found {}", cols.len()),
            ));
        }
        let mut label_ids = Vec::new();
        for raw in cols[1].split(',') {
            let raw = raw.trim();
            let id: usize = raw
                .parse()
                .map_err(|_| Error::parse(lineno, format!("label id {raw:?} is not an integer")))?;
            if id >= taxonomy.len() {
                return Err(Error::parse(
                    lineno,
                    format!("label id {id} out of range (taxonomy has {})", taxonomy.len()),
                ));
            }
            label_ids.push(id);
        }
        out.push(RawComment {
            text: cols[0].to_string(),
            label_ids,
            record_id: cols[2].to_string(),
        });
    }
    Ok(out)
}

/// A text with its projected 8-emotion target vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub text: String,
    pub target: Target,
}

impl LabeledExample {
    pub fn labels(&self) -> impl Iterator<Item = EmotionLabel> + '_ {
        EmotionLabel::ALL.into_iter().filter(|e| self.target[e.index()] == 1)
    }
}

/// Target vector for a comment, matched by exact source-name equality.
pub fn project_target(comment: &RawComment, taxonomy: &SourceTaxonomy) -> Target {
    let mut target = [0u8; NUM_EMOTIONS];
    for &id in &comment.label_ids {
        if let Some(e) = taxonomy.name(id).and_then(EmotionLabel::from_canonical_name) {
            target[e.index()] = 1;
        }
    }
    target
}

/// Project onto the eight emotions; `None` when no label is one of them.
pub fn map_labels(comment: &RawComment, taxonomy: &SourceTaxonomy) -> Option<LabeledExample> {
    let target = project_target(comment, taxonomy);
    target.contains(&1).then(|| LabeledExample {
        text: comment.text.clone(),
        target,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionStats {
    pub total_rows: usize,
    pub kept: usize,
    pub filtered: usize,
    /// Examples emitted with an all-zero target (only with `keep_negatives`).
    pub negatives_emitted: usize,
    pub per_emotion: Vec<(EmotionLabel, usize)>,
}

/// Project a whole corpus. With `keep_negatives`, filtered comments are
/// emitted as all-zero targets instead of being dropped.
pub fn project_corpus(
    comments: &[RawComment],
    taxonomy: &SourceTaxonomy,
    keep_negatives: bool,
) -> (Vec<LabeledExample>, ProjectionStats) {
    let mut examples = Vec::with_capacity(comments.len());
    let mut counts = [0usize; NUM_EMOTIONS];
    let mut kept = 0;
    let mut filtered = 0;
    for comment in comments {
        match map_labels(comment, taxonomy) {
            Some(ex) => {
                kept += 1;
                for (c, &t) in counts.iter_mut().zip(&ex.target) {
                    *c += t as usize;
                }
                examples.push(ex);
            }
            None => {
                filtered += 1;
                if keep_negatives {
                    examples.push(LabeledExample {
                        text: comment.text.clone(),
                        target: [0; NUM_EMOTIONS],
                    });
                }
            }
        }
    }
    let stats = ProjectionStats {
        total_rows: comments.len(),
        kept,
        filtered,
        negatives_emitted: if keep_negatives { filtered } else { 0 },
        per_emotion: EmotionLabel::ALL.into_iter().zip(counts).collect(),
    };
    (examples, stats)
}

/// A fixed-length token sequence with its target vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedExample {
    pub ids: TokenSequence,
    pub target: Target,
}

pub fn encode_examples(examples: &[LabeledExample], vocab: &Vocabulary, seq_len: usize) -> Vec<EncodedExample> {
    examples
        .iter()
        .map(|ex| EncodedExample {
            ids: text::encode(&text::tokenize(&ex.text), vocab, seq_len),
            target: ex.target,
        })
        .collect()
}

/// A song with exactly three distinct human-assigned emotions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvalSong {
    pub id: String,
    pub title: String,
    pub artist: String,
    pub lyrics: String,
    pub human_labels: [EmotionLabel; 3],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalSongRecord {
    id: String,
    title: String,
    artist: String,
    lyrics: String,
    human_labels: Vec<String>,
}

/// One JSON object per non-blank line.
pub fn parse_eval_songs(contents: &str) -> Result<Vec<EvalSong>> {
    let mut songs = Vec::new();
    for (lineno, line) in contents.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EvalSongRecord = serde_json::from_str(line).map_err(|e| Error::parse(lineno, e.to_string()))?;
        if rec.human_labels.len() != 3 {
            return Err(Error::parse(
                lineno,
                format!("expected exactly 3 human labels, found {}", rec.human_labels.len()),
            ));
        }
        let mut labels = [EmotionLabel::Anger; 3];
        let mut seen = HashSet::new();
        for (slot, raw) in labels.iter_mut().zip(&rec.human_labels) {
            let label: EmotionLabel = raw
                .parse()
                .map_err(|_| Error::parse(lineno, format!("unknown label {raw:?}")))?;
            if !seen.insert(label) {
                return Err(Error::parse(lineno, format!("duplicate label {label}")));
            }
            *slot = label;
        }
        songs.push(EvalSong {
            id: rec.id,
            title: rec.title,
            artist: rec.artist,
            lyrics: rec.lyrics,
            human_labels: labels,
        });
    }
    Ok(songs)
}

/// Seeded shuffle, then the first `N - floor(f·N)` items train and the rest validate.
pub fn split_dataset<T: Clone>(examples: &[T], val_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if examples.is_empty() {
        return Err(Error::invalid("cannot split an empty dataset"));
    }
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "val_fraction must be in (0, 1), got {val_fraction}"
        )));
    }
    let n = examples.len();
    let n_val = (val_fraction * n as f64).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut order);
    let (train_idx, val_idx) = order.split_at(n - n_val);
    Ok((
        train_idx.iter().map(|&i| examples[i].clone()).collect(),
        val_idx.iter().map(|&i| examples[i].clone()).collect(),
    ))
}

/// Serialize prepared examples as JSON Lines.
pub fn write_prepared(examples: &[LabeledExample]) -> Result<String> {
    let mut out = String::new();
    for ex in examples {
        out.push_str(&serde_json::to_string(ex)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_prepared(contents: &str) -> Result<Vec<LabeledExample>> {
    let mut out = Vec::new();
    for (lineno, line) in contents.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ex: LabeledExample = serde_json::from_str(line).map_err(|e| Error::parse(lineno + 1, e.to_string()))?;
        if ex.target.iter().any(|&t| t > 1) {
            return Err(Error::parse(lineno + 1, "target entries must be 0 or 1"));
        }
        out.push(ex);
    }
    Ok(out)
}
