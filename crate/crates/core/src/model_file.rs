//! Binary model file.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "LYC1" | u32 version (=1) | u64 header_len | header JSON
//!        | f32 parameters in canonical order | u32 CRC32 of all preceding bytes
//! ```
//!
//! The JSON header carries the config fields, the emotion names in
//! canonical order, and the vocabulary as an id-ordered token array.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::emotion::EmotionLabel;
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::model::{ModelBundle, ModelConfig, ModelParams};
use crate::tensor::Tensor;
use crate::text::Vocabulary;

pub const MAGIC: &[u8; 4] = b"LYC1";
pub const FORMAT_VERSION: u32 = 1;
const PREAMBLE_LEN: usize = 4 + 4 + 8;

#[derive(Serialize, Deserialize)]
struct Header {
    #[serde(flatten)]
    config: ModelConfig,
    emotions: Vec<String>,
    vocabulary: Vec<String>,
}

pub fn to_bytes(bundle: &ModelBundle) -> Result<Vec<u8>> {
    let header = Header {
        config: bundle.config,
        emotions: EmotionLabel::names().iter().map(|s| s.to_string()).collect(),
        vocabulary: bundle.vocab.tokens().to_vec(),
    };
    let header = serde_json::to_vec(&header)?;
    let n_params = bundle.config.param_count();
    let mut out = Vec::with_capacity(PREAMBLE_LEN + header.len() + 4 * n_params + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for t in bundle.params.tensors() {
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

fn check_crc(bytes: &[u8]) -> Result<()> {
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }
    Ok(())
}

pub fn from_bytes(bytes: &[u8]) -> Result<ModelBundle> {
    if bytes.len() < 4 {
        return Err(Error::Truncated("shorter than the magic bytes".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < PREAMBLE_LEN {
        return Err(Error::Truncated("incomplete preamble".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let header_end = usize::try_from(header_len)
        .ok()
        .and_then(|n| n.checked_add(PREAMBLE_LEN))
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| Error::Truncated(format!("header of {header_len} bytes runs past end of file")))?;

    let header: Header = match serde_json::from_slice(&bytes[PREAMBLE_LEN..header_end]) {
        Ok(h) => h,
        Err(e) => {
            // A corrupted header usually means a corrupted file; prefer that diagnosis.
            if bytes.len() >= header_end + 4 {
                check_crc(bytes)?;
            }
            return Err(Error::MalformedModel(format!("header: {e}")));
        }
    };
    let config = header.config;
    config
        .validate()
        .map_err(|e| Error::MalformedModel(format!("config: {e}")))?;
    let expected = header_end + 4 * config.param_count() + 4;
    if bytes.len() < expected {
        return Err(Error::Truncated(format!(
            "expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    if bytes.len() > expected {
        return Err(Error::MalformedModel(format!(
            "{} trailing bytes after checksum",
            bytes.len() - expected
        )));
    }
    check_crc(bytes)?;

    let canonical = EmotionLabel::names();
    if header.emotions.len() != canonical.len() || header.emotions.iter().zip(canonical).any(|(a, b)| a != b) {
        return Err(Error::MalformedModel(format!(
            "emotion order {:?} differs from {canonical:?}",
            header.emotions
        )));
    }
    let vocab = Vocabulary::from_tokens(header.vocabulary).map_err(|e| Error::MalformedModel(e.to_string()))?;

    let mut floats = bytes[header_end..expected - 4]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64);
    let tensors = config
        .param_shapes()
        .into_iter()
        .map(|shape| {
            let n = shape.iter().product();
            Tensor::new(shape, floats.by_ref().take(n).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let params = ModelParams::from_tensors(&config, tensors)?;
    ModelBundle::new(config, vocab, params).map_err(|e| Error::MalformedModel(e.to_string()))
}

/// Atomic: the file at `path` is either the previous one or the complete new one.
pub fn save_model(bundle: &ModelBundle, path: &Path) -> Result<()> {
    write_atomic(path, &to_bytes(bundle)?)
}

pub fn load_model(path: &Path) -> Result<ModelBundle> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes).map_err(|e| e.in_file(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle() -> ModelBundle {
        let config = ModelConfig {
            embed_size: 3,
            seq_len: 10,
            conv_filters: 5,
            ..ModelConfig::new(6)
        };
        let tokens = ["<pad>", "<unk>", "a", "b", "c", "d"].map(String::from).to_vec();
        ModelBundle::initialize(config, Vocabulary::from_tokens(tokens).unwrap(), 9).unwrap()
    }

    #[test]
    fn round_trip_quantizes_to_f32() {
        let b = bundle();
        let loaded = from_bytes(&to_bytes(&b).unwrap()).unwrap();
        assert_eq!(loaded.config, b.config);
        assert_eq!(loaded.vocab, b.vocab);
        assert_eq!(loaded.params, b.params.quantized());
        assert_eq!(to_bytes(&loaded).unwrap(), to_bytes(&b).unwrap());
    }

    #[test]
    fn corruption_is_diagnosed() {
        let bytes = to_bytes(&bundle()).unwrap();

        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert!(matches!(from_bytes(&bad), Err(Error::BadMagic)));

        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(from_bytes(&bad), Err(Error::UnsupportedVersion(2))));

        let cut = bytes.len() - 4 - 40;
        assert!(matches!(from_bytes(&bytes[..cut]), Err(Error::Truncated(_))));
        assert!(matches!(from_bytes(&bytes[..10]), Err(Error::Truncated(_))));
        assert!(matches!(from_bytes(&bytes[..2]), Err(Error::Truncated(_))));

        let mut bad = bytes.clone();
        let n = bad.len();
        bad[n - 20] ^= 0x01;
        assert!(matches!(from_bytes(&bad), Err(Error::ChecksumMismatch { .. })));

        let mut bad = bytes.clone();
        bad[PREAMBLE_LEN] = b'[';
        assert!(matches!(from_bytes(&bad), Err(Error::ChecksumMismatch { .. })));

        let mut bad = bytes;
        bad.push(0);
        assert!(matches!(from_bytes(&bad), Err(Error::MalformedModel(_))));
    }

    #[test]
    fn header_is_json_with_canonical_emotions() {
        let bytes = to_bytes(&bundle()).unwrap();
        let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let header: serde_json::Value = serde_json::from_slice(&bytes[16..16 + len]).unwrap();
        assert_eq!(header["kernel_size"], 4);
        assert_eq!(header["emotions"][6], "love");
        assert_eq!(header["vocabulary"][2], "a");
    }
}
