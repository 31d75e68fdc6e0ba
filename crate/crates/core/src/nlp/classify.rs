use std::fs::File;
use std::io::{self, Read};
use std::path::Path;

use super::label::Label;
use super::preprocess::preprocess;
use crate::model_store::ModelBundle;
use crate::verdict::Verdict;

pub const DEFAULT_MAX_SCAN_BYTES: usize = 16 * 1024;
pub const MIN_TOKENS: usize = 5;
/// Share of bytes that may fail UTF-8 decoding before content counts as binary.
pub const MAX_INVALID_UTF8_SHARE: f64 = 0.10;

/// Text heuristic: no NUL bytes and under 10% of bytes invalid as UTF-8.
pub fn looks_like_text(bytes: &[u8]) -> bool {
    if bytes.contains(&0) {
        return false;
    }
    let invalid: usize = bytes.utf8_chunks().map(|c| c.invalid().len()).sum();
    (invalid as f64) < MAX_INVALID_UTF8_SHARE * bytes.len() as f64 || invalid == 0
}

/// Classifies a content prefix already read from a candidate file.
pub fn classify_bytes(bundle: &ModelBundle, bytes: &[u8]) -> Verdict {
    if !looks_like_text(bytes) {
        return Verdict::Indeterminate {
            reason: "not text".into(),
        };
    }
    let tokens = preprocess(&String::from_utf8_lossy(bytes));
    if tokens.len() < MIN_TOKENS {
        return Verdict::Indeterminate {
            reason: format!("too few tokens ({})", tokens.len()),
        };
    }
    let prediction = bundle.predict_tokens(&tokens);
    let log_posterior_margin = prediction.margin();
    match prediction.label {
        Label::Ransom => Verdict::RansomNote { log_posterior_margin },
        Label::Benign => Verdict::Benign {
            log_posterior_margin: Some(log_posterior_margin),
        },
    }
}

fn read_prefix(path: &Path, max_bytes: usize) -> io::Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(max_bytes.min(64 * 1024));
    File::open(path)?.take(max_bytes as u64).read_to_end(&mut buf)?;
    Ok(buf)
}

/// Reads at most `max_scan_bytes` of a candidate file and classifies it.
pub fn classify_file(bundle: &ModelBundle, path: impl AsRef<Path>, max_scan_bytes: usize) -> Verdict {
    match read_prefix(path.as_ref(), max_scan_bytes) {
        Ok(bytes) => classify_bytes(bundle, &bytes),
        Err(e) => {
            log::debug!("{}: {e}", path.as_ref().display());
            Verdict::Indeterminate {
                reason: "unreadable".into(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_heuristic() {
        assert!(looks_like_text(b"plain ascii"));
        assert!(looks_like_text("caf\u{e9} na\u{ef}ve".as_bytes()));
        assert!(looks_like_text(b""));
        assert!(!looks_like_text(b"\x7fELF\x02\x01\x01\0\0\0"));
        // 1 invalid byte in 20 is tolerated, 2 in 10 is not
        assert!(looks_like_text(b"abcdefghijklmnopqrs\xff"));
        assert!(!looks_like_text(b"abcdefgh\xff\xfe"));
    }
}
