use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Behavior class assigned to a user by annotators.
///
/// Variants are declared in severity order; `Ord` follows it, so the smallest
/// value is the most severe. Tie-breaks everywhere resolve toward the smaller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Bully,
    Aggressor,
    Spammer,
    Normal,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::Bully, Label::Aggressor, Label::Spammer, Label::Normal];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Bully => "bully",
            Label::Aggressor => "aggressor",
            Label::Spammer => "spammer",
            Label::Normal => "normal",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown label '{0}'")]
pub struct UnknownLabel(pub String);

impl FromStr for Label {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bully" | "bullying" => Ok(Label::Bully),
            "aggressor" | "aggressive" | "aggression" => Ok(Label::Aggressor),
            "spammer" | "spam" => Ok(Label::Spammer),
            "normal" => Ok(Label::Normal),
            other => Err(UnknownLabel(other.to_string())),
        }
    }
}
