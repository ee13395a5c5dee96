use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const NUM_EMOTIONS: usize = 8;

/// Binary label vector indexed by [`EmotionLabel::index`].
pub type Target = [u8; NUM_EMOTIONS];

/// The eight target emotions, in their fixed canonical index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EmotionLabel {
    Anger = 0,
    Confusion = 1,
    Desire = 2,
    Fear = 3,
    Grief = 4,
    Excitement = 5,
    Love = 6,
    Sadness = 7,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; NUM_EMOTIONS] = [
        EmotionLabel::Anger,
        EmotionLabel::Confusion,
        EmotionLabel::Desire,
        EmotionLabel::Fear,
        EmotionLabel::Grief,
        EmotionLabel::Excitement,
        EmotionLabel::Love,
        EmotionLabel::Sadness,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EmotionLabel::Anger => "anger",
            EmotionLabel::Confusion => "confusion",
            EmotionLabel::Desire => "desire",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Grief => "grief",
            EmotionLabel::Excitement => "excitement",
            EmotionLabel::Love => "love",
            EmotionLabel::Sadness => "sadness",
        }
    }

    /// Exact match on the canonical lowercase name.
    pub fn from_canonical_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    pub fn names() -> [&'static str; NUM_EMOTIONS] {
        Self::ALL.map(EmotionLabel::name)
    }
}

impl FromStr for EmotionLabel {
    type Err = Error;

    /// Case-insensitive.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_lowercase();
        Self::from_canonical_name(&lower).ok_or_else(|| Error::UnknownEmotion(s.to_string()))
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for EmotionLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for EmotionLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_order_is_fixed() {
        let names = EmotionLabel::names();
        assert_eq!(
            names,
            [
                "anger",
                "confusion",
                "desire",
                "fear",
                "grief",
                "excitement",
                "love",
                "sadness"
            ]
        );
        for (i, e) in EmotionLabel::ALL.iter().enumerate() {
            assert_eq!(e.index(), i);
            assert_eq!(EmotionLabel::from_index(i), Some(*e));
        }
        assert_eq!(EmotionLabel::from_index(8), None);
    }

    #[test]
    fn parsing_is_case_insensitive_and_strict() {
        assert_eq!("LOVE".parse::<EmotionLabel>().unwrap(), EmotionLabel::Love);
        assert_eq!("Sadness".parse::<EmotionLabel>().unwrap().to_string(), "sadness");
        assert!("joy".parse::<EmotionLabel>().is_err());
        assert!("surprise".parse::<EmotionLabel>().is_err());
        assert!("".parse::<EmotionLabel>().is_err());
    }
}
