//! Multi-label emotion classification of short texts and song lyrics.
//!
//! The pipeline projects GoEmotions-style annotations onto eight target
//! emotions, encodes text as fixed-length token sequences, trains a small
//! 1-D convolutional network with hand-written backpropagation and Adam,
//! and scores songs against human-assigned labels with an overlap@k metric.
//!
//! Everything numeric runs in `f64`; model files store `f32`.

pub mod dataset;
pub mod emotion;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod io;
pub mod layers;
pub mod model;
pub mod model_file;
pub mod pipeline;
pub mod rng;
pub mod tensor;
pub mod text;
pub mod train;

pub use emotion::{EmotionLabel, Target, NUM_EMOTIONS};
pub use error::{Error, Result};
pub use model::{ModelBundle, ModelConfig, ModelParams};
pub use tensor::Tensor;
pub use text::{TokenSequence, Vocabulary};
