//! Song scoring, emotion ranking, and the overlap@k metric against human labels.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{EvalSong, LabeledExample};
use crate::emotion::{EmotionLabel, Target, NUM_EMOTIONS};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::layers::BCE_EPSILON;
use crate::model::ModelBundle;

pub const DEFAULT_K: usize = 3;
const HUMAN_LABELS: usize = 3;

/// Descending probability; ties go to the lower canonical index.
pub fn rank_emotions(probabilities: &[f64; NUM_EMOTIONS]) -> [EmotionLabel; NUM_EMOTIONS] {
    let mut ranked = EmotionLabel::ALL;
    // Stable sort keeps canonical order among equal probabilities.
    ranked.sort_by(|a, b| probabilities[b.index()].total_cmp(&probabilities[a.index()]));
    ranked
}

/// Independent per-emotion scores for one song; they need not sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub song_id: String,
    pub probabilities: [f64; NUM_EMOTIONS],
    pub ranked: [EmotionLabel; NUM_EMOTIONS],
}

impl Prediction {
    pub fn new(song_id: impl Into<String>, probabilities: [f64; NUM_EMOTIONS]) -> Self {
        Self {
            song_id: song_id.into(),
            ranked: rank_emotions(&probabilities),
            probabilities,
        }
    }

    pub fn top_k(&self, k: usize) -> &[EmotionLabel] {
        &self.ranked[..k.min(NUM_EMOTIONS)]
    }

    pub fn probability(&self, emotion: EmotionLabel) -> f64 {
        self.probabilities[emotion.index()]
    }
}

pub fn predict_song(bundle: &ModelBundle, song: &EvalSong) -> Result<Prediction> {
    let probs = bundle
        .predict_text(&song.lyrics)
        .map_err(|e| Error::invalid(format!("song {}: {e}", song.id)))?;
    Ok(Prediction::new(song.id.clone(), probs))
}

pub fn check_k(k: usize) -> Result<()> {
    if !(1..=NUM_EMOTIONS).contains(&k) {
        return Err(Error::invalid(format!("k must be in 1..={NUM_EMOTIONS}, got {k}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SongOverlap {
    pub song_id: String,
    pub human_labels: [EmotionLabel; HUMAN_LABELS],
    pub predicted_top_k: Vec<EmotionLabel>,
    pub hits: usize,
    pub overlap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub songs: Vec<SongOverlap>,
    pub overlap_at_k: f64,
    pub baseline_overlap_at_k: Option<f64>,
    pub n: usize,
    pub k: usize,
}

/// JSON summary of an [`EvalReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub n: usize,
    pub k: usize,
    pub overlap_at_k: f64,
    pub baseline_overlap_at_k: Option<f64>,
}

/// Per song `|top-k ∩ human| / min(k, 3)`, averaged over songs.
/// `predictions[i]` must belong to `songs[i]`.
pub fn overlap_at_k(predictions: &[Prediction], songs: &[EvalSong], k: usize) -> Result<EvalReport> {
    check_k(k)?;
    if predictions.is_empty() {
        return Err(Error::invalid("no predictions to evaluate"));
    }
    if predictions.len() != songs.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} songs",
            predictions.len(),
            songs.len()
        )));
    }
    let denom = k.min(HUMAN_LABELS);
    let mut rows = Vec::with_capacity(songs.len());
    let mut total_hits = 0;
    for (pred, song) in predictions.iter().zip(songs) {
        if pred.song_id != song.id {
            return Err(Error::invalid(format!(
                "prediction for {:?} paired with song {:?}",
                pred.song_id, song.id
            )));
        }
        let top = pred.top_k(k).to_vec();
        let hits = top.iter().filter(|e| song.human_labels.contains(e)).count();
        total_hits += hits;
        rows.push(SongOverlap {
            song_id: song.id.clone(),
            human_labels: song.human_labels,
            predicted_top_k: top,
            hits,
            overlap: hits as f64 / denom as f64,
        });
    }
    // Every song has the same denominator, so this equals the mean of per-song
    // ratios while staying an exact single division.
    let overlap = total_hits as f64 / (songs.len() * denom) as f64;
    Ok(EvalReport {
        n: rows.len(),
        songs: rows,
        overlap_at_k: overlap,
        baseline_overlap_at_k: None,
        k,
    })
}

impl EvalReport {
    pub fn with_baseline(mut self, baseline: &EvalReport) -> Self {
        self.baseline_overlap_at_k = Some(baseline.overlap_at_k);
        self
    }

    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            n: self.n,
            k: self.k,
            overlap_at_k: self.overlap_at_k,
            baseline_overlap_at_k: self.baseline_overlap_at_k,
        }
    }

    /// Header `song_id,human_labels,predicted_topk,overlap`, one row per
    /// song, then a `summary` row. Label lists are `;`-separated.
    pub fn to_csv(&self) -> Result<String> {
        let join = |labels: &[EmotionLabel]| labels.iter().map(|e| e.name()).collect::<Vec<_>>().join(";");
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["song_id", "human_labels", "predicted_topk", "overlap"])?;
        for row in &self.songs {
            w.write_record([
                row.song_id.as_str(),
                &join(&row.human_labels),
                &join(&row.predicted_top_k),
                &row.overlap.to_string(),
            ])?;
        }
        w.write_record(["summary", "", "", &self.overlap_at_k.to_string()])?;
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub fn emit_report(report: &EvalReport, csv_path: &Path, json_path: &Path) -> Result<()> {
    write_atomic(csv_path, report.to_csv()?.as_bytes())?;
    let mut json = serde_json::to_vec_pretty(&report.summary())?;
    json.push(b'\n');
    write_atomic(json_path, &json)
}

/// Predicts the training-set label frequency of each emotion for every input.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorBaseline {
    frequencies: [f64; NUM_EMOTIONS],
}

impl PriorBaseline {
    pub fn fit(examples: &[LabeledExample]) -> Result<Self> {
        Self::from_targets(examples.iter().map(|e| &e.target))
    }

    pub fn from_targets<'a>(targets: impl IntoIterator<Item = &'a Target>) -> Result<Self> {
        let mut counts = [0usize; NUM_EMOTIONS];
        let mut n = 0usize;
        for t in targets {
            n += 1;
            for (c, &v) in counts.iter_mut().zip(t) {
                *c += v as usize;
            }
        }
        if n == 0 {
            return Err(Error::invalid("baseline needs a non-empty training set"));
        }
        Ok(Self {
            frequencies: counts.map(|c| c as f64 / n as f64),
        })
    }

    /// Empirical frequencies, unclipped.
    pub fn frequencies(&self) -> &[f64; NUM_EMOTIONS] {
        &self.frequencies
    }

    /// Frequencies clipped to `[ε, 1−ε]` so they are valid probabilities.
    pub fn probabilities(&self) -> [f64; NUM_EMOTIONS] {
        self.frequencies.map(|f| f.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON))
    }

    pub fn predict(&self, song_id: impl Into<String>) -> Prediction {
        Prediction::new(song_id, self.probabilities())
    }

    pub fn predict_songs(&self, songs: &[EvalSong]) -> Vec<Prediction> {
        songs.iter().map(|s| self.predict(s.id.clone())).collect()
    }
}

/// `Σ |top-k ∩ labels| / Σ |labels|` over examples.
pub fn micro_recall_at_k(probabilities: &[[f64; NUM_EMOTIONS]], targets: &[Target], k: usize) -> Result<f64> {
    check_k(k)?;
    if probabilities.len() != targets.len() {
        return Err(Error::shape("one probability row per target required"));
    }
    let mut hits = 0usize;
    let mut labels = 0usize;
    for (p, t) in probabilities.iter().zip(targets) {
        labels += t.iter().map(|&v| v as usize).sum::<usize>();
        hits += rank_emotions(p)[..k].iter().filter(|e| t[e.index()] == 1).count();
    }
    if labels == 0 {
        return Err(Error::invalid("no positive labels to recall"));
    }
    Ok(hits as f64 / labels as f64)
}
