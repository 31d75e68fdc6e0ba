use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Class of a document. `Ransom` is the positive class for metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    Ransom,
}

impl Label {
    /// Class order used for every per-class table.
    pub const ALL: [Label; 2] = [Label::Benign, Label::Ransom];

    pub fn index(self) -> usize {
        match self {
            Label::Benign => 0,
            Label::Ransom => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Benign => "benign",
            Label::Ransom => "ransom",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "benign" => Ok(Label::Benign),
            "ransom" => Ok(Label::Ransom),
            other => Err(format!("unknown class label {other:?}")),
        }
    }
}
