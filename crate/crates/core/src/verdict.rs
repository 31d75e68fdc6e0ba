use std::fmt;

use serde::{Deserialize, Serialize};

use crate::hashset::Sha256Digest;

/// Classification outcome for a process or a candidate file.
///
/// `log_posterior_margin` is `ln P(ransom | x) - ln P(benign | x)` from the
/// note classifier; positive values lean towards a ransom note.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Benign { log_posterior_margin: Option<f64> },
    KnownMalware { digest: Sha256Digest },
    RansomNote { log_posterior_margin: f64 },
    Indeterminate { reason: String },
}

impl Verdict {
    /// True for verdicts that warrant a response.
    pub fn is_positive(&self) -> bool {
        matches!(self, Verdict::KnownMalware { .. } | Verdict::RansomNote { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Benign { .. } => "benign",
            Verdict::KnownMalware { .. } => "known-malware",
            Verdict::RansomNote { .. } => "ransom-note",
            Verdict::Indeterminate { .. } => "indeterminate",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Benign { log_posterior_margin: Some(m) } => write!(f, "benign (margin {m:.4})"),
            Verdict::Benign { log_posterior_margin: None } => f.write_str("benign"),
            Verdict::KnownMalware { digest } => write!(f, "known-malware {digest}"),
            Verdict::RansomNote { log_posterior_margin } => {
                write!(f, "ransom-note (margin {log_posterior_margin:.4})")
            }
            Verdict::Indeterminate { reason } => write!(f, "indeterminate ({reason})"),
        }
    }
}
