//! Tokenization, vocabulary construction, and fixed-length encoding.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

pub const DEFAULT_SEQ_LEN: usize = 128;
pub const DEFAULT_MIN_FREQ: usize = 2;
pub const DEFAULT_MAX_VOCAB: usize = 20_000;

/// Lowercase, split on whitespace, trim non-alphanumerics from both ends of
/// each token. Interior punctuation such as apostrophes is kept.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let lower = raw.to_lowercase();
            let trimmed = lower.trim_matches(|c: char| !c.is_alphanumeric());
            (!trimmed.is_empty()).then(|| trimmed.to_string())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    /// Build from an id-ordered token list whose first two entries are the
    /// reserved PAD and UNK tokens.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[0] != PAD_TOKEN || tokens[1] != UNK_TOKEN {
            return Err(Error::invalid("vocabulary must start with <pad>, <unk>"));
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if ids.insert(t.clone(), i as u32).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Self { tokens, ids })
    }

    /// Size including the two reserved ids.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Id for a real token; reserved tokens are never looked up by text.
    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied().filter(|&id| id > UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// `{token: id}` map for export.
    pub fn to_json(&self) -> serde_json::Value {
        let map: BTreeMap<&str, u32> = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i as u32))
            .collect();
        serde_json::to_value(map).expect("string keys serialize")
    }
}

/// Tokens with count ≥ `min_freq`, most frequent first, ties broken
/// lexicographically, capped so the total size is at most `max_size`.
pub fn build_vocab(corpus: &[Vec<String>], min_freq: usize, max_size: usize) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::invalid("cannot build a vocabulary from an empty corpus"));
    }
    if min_freq < 1 {
        return Err(Error::invalid("min_freq must be at least 1"));
    }
    if max_size < 3 {
        return Err(Error::invalid("max_size must be at least 3"));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for doc in corpus {
        for tok in doc {
            *counts.entry(tok.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(t, c)| c >= min_freq && t != PAD_TOKEN && t != UNK_TOKEN)
        .collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_size - 2);

    let tokens = [PAD_TOKEN, UNK_TOKEN]
        .into_iter()
        .chain(ranked.into_iter().map(|(t, _)| t))
        .map(str::to_string)
        .collect();
    Vocabulary::from_tokens(tokens)
}

/// Exactly `len` token ids; PAD only as a suffix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence(Vec<u32>);

impl TokenSequence {
    /// Wrap raw ids, checking the PAD-suffix invariant.
    pub fn from_ids(ids: Vec<u32>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::invalid("token sequence must be non-empty"));
        }
        if let Some(first_pad) = ids.iter().position(|&id| id == PAD_ID) {
            if ids[first_pad..].iter().any(|&id| id != PAD_ID) {
                return Err(Error::invalid("padding must be a contiguous suffix"));
            }
        }
        Ok(Self(ids))
    }

    pub fn ids(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Map to ids (UNK for unknown), truncate to `len`, right-pad with PAD.
pub fn encode(tokens: &[String], vocab: &Vocabulary, len: usize) -> TokenSequence {
    assert!(len >= 1, "sequence length must be at least 1");
    let mut ids: Vec<u32> = tokens.iter().take(len).map(|t| vocab.id(t).unwrap_or(UNK_ID)).collect();
    ids.resize(len, PAD_ID);
    TokenSequence(ids)
}

/// Consecutive non-overlapping `len`-token windows covering every token;
/// the last window is padded. Empty input yields no windows.
pub fn encode_windows(tokens: &[String], vocab: &Vocabulary, len: usize) -> Vec<TokenSequence> {
    assert!(len >= 1, "sequence length must be at least 1");
    tokens.chunks(len).map(|chunk| encode(chunk, vocab, len)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Hello, world!"), toks(&["hello", "world"]));
        assert_eq!(tokenize("Don't stop"), toks(&["don't", "stop"]));
        assert!(tokenize("").is_empty());
        assert!(tokenize("  ... !! ").is_empty());
        assert_eq!(tokenize("'quoted' (yes)"), toks(&["quoted", "yes"]));
    }

    #[test]
    fn vocab_ordering() {
        let corpus = vec![toks(&["a", "b"]), toks(&["b", "c"])];
        let v = build_vocab(&corpus, 1, 100).unwrap();
        assert_eq!(v.tokens(), &toks(&["<pad>", "<unk>", "b", "a", "c"])[..]);
        let v = build_vocab(&corpus, 2, 100).unwrap();
        assert_eq!(v.tokens(), &toks(&["<pad>", "<unk>", "b"])[..]);
        let v = build_vocab(&corpus, 1, 4).unwrap();
        assert_eq!(v.tokens(), &toks(&["<pad>", "<unk>", "b", "a"])[..]);
    }

    #[test]
    fn vocab_errors() {
        assert!(build_vocab(&[], 1, 10).is_err());
        assert!(build_vocab(&[toks(&["a"])], 0, 10).is_err());
        assert!(build_vocab(&[toks(&["a"])], 1, 2).is_err());
    }

    #[test]
    fn reserved_tokens_in_text_are_unknown() {
        let v = build_vocab(&[toks(&["<pad>", "<pad>", "x"])], 1, 10).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(encode(&toks(&["<pad>", "x"]), &v, 3).ids(), &[1, 2, 0]);
    }

    #[test]
    fn encode_examples() {
        let v = Vocabulary::from_tokens(toks(&["<pad>", "<unk>", "i", "miss"])).unwrap();
        assert_eq!(encode(&toks(&["i", "miss", "u"]), &v, 5).ids(), &[2, 3, 1, 0, 0]);
        assert_eq!(encode(&[], &v, 3).ids(), &[0, 0, 0]);
        let long: Vec<String> = (0..200)
            .map(|i| if i % 2 == 0 { "i" } else { "miss" }.to_string())
            .collect();
        let enc = encode(&long, &v, 128);
        assert_eq!(enc.len(), 128);
        assert!(enc.ids().iter().all(|&id| id != PAD_ID));
        assert_eq!(enc.ids()[..4], [2, 3, 2, 3]);
    }

    #[test]
    fn windows_cover_all_tokens() {
        let v = Vocabulary::from_tokens(toks(&["<pad>", "<unk>", "a"])).unwrap();
        let tokens = toks(&["a"; 7]);
        let w = encode_windows(&tokens, &v, 3);
        assert_eq!(w.len(), 3);
        assert_eq!(w[2].ids(), &[2, 0, 0]);
        assert!(encode_windows(&[], &v, 3).is_empty());
    }

    #[test]
    fn json_export() {
        let v = Vocabulary::from_tokens(toks(&["<pad>", "<unk>", "b"])).unwrap();
        assert_eq!(v.to_json(), serde_json::json!({"<pad>": 0, "<unk>": 1, "b": 2}));
    }

    #[test]
    fn token_sequence_rejects_interior_padding() {
        assert!(TokenSequence::from_ids(vec![2, 0, 3]).is_err());
        assert!(TokenSequence::from_ids(vec![2, 3, 0]).is_ok());
        assert!(TokenSequence::from_ids(vec![]).is_err());
    }
}
