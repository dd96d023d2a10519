use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Number of output classes of every classifier in this crate.
pub const NUM_CLASSES: usize = 3;

/// Three-point political lean of an article.
///
/// Class index order is fixed: index 0 is `Liberal` (-1), 1 is `Neutral` (0),
/// 2 is `Conservative` (+1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Liberal,
    Neutral,
    Conservative,
}

impl Label {
    pub const ALL: [Label; NUM_CLASSES] = [Label::Liberal, Label::Neutral, Label::Conservative];

    pub fn from_index(index: usize) -> Option<Label> {
        Self::ALL.get(index).copied()
    }

    pub fn index(self) -> usize {
        match self {
            Label::Liberal => 0,
            Label::Neutral => 1,
            Label::Conservative => 2,
        }
    }

    pub fn from_value(value: i64) -> Result<Label> {
        match value {
            -1 => Ok(Label::Liberal),
            0 => Ok(Label::Neutral),
            1 => Ok(Label::Conservative),
            other => Err(Error::InvalidInput(format!(
                "unknown label {other}, expected -1, 0 or 1"
            ))),
        }
    }

    pub fn value(self) -> i8 {
        self.index() as i8 - 1
    }

    /// Argmax over class scores; ties go to the lowest index.
    pub fn argmax(scores: &[f64]) -> Label {
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate().take(NUM_CLASSES) {
            if s > scores[best] {
                best = i;
            }
        }
        Label::ALL[best]
    }

    pub fn one_hot(self) -> [f64; NUM_CLASSES] {
        let mut out = [0.0; NUM_CLASSES];
        out[self.index()] = 1.0;
        out
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_i8(self.value())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = i64::deserialize(deserializer)?;
        Label::from_value(v).map_err(serde::de::Error::custom)
    }
}
