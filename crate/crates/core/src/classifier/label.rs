use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The five emotion classes, in the fixed order used for reports and ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionLabel {
    Anger,
    Surprise,
    Happiness,
    Sadness,
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown emotion label {0:?}")]
pub struct UnknownLabel(pub String);

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 5] = [
        EmotionLabel::Anger,
        EmotionLabel::Surprise,
        EmotionLabel::Happiness,
        EmotionLabel::Sadness,
        EmotionLabel::Neutral,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EmotionLabel::Anger => "anger",
            EmotionLabel::Surprise => "surprise",
            EmotionLabel::Happiness => "happiness",
            EmotionLabel::Sadness => "sadness",
            EmotionLabel::Neutral => "neutral",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmotionLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EmotionLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| UnknownLabel(s.to_owned()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_set() {
        for (i, l) in EmotionLabel::ALL.into_iter().enumerate() {
            assert_eq!(l.index(), i);
            assert_eq!(l.to_string().parse::<EmotionLabel>().unwrap(), l);
        }
        assert!("fear".parse::<EmotionLabel>().is_err());
        assert!("Anger".parse::<EmotionLabel>().is_err());
    }
}
