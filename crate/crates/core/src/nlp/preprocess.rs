//! Text normalization ahead of vectorization.
//!
//! Whitespace-separated chunks that look like onion addresses, URLs, email
//! addresses or bitcoin addresses collapse to a placeholder token (checked in
//! that order). Everything else is lowercased, split on non-alphanumeric
//! characters, filtered for length and stopwords, and alphabetic tokens are
//! Porter-stemmed.

use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;

use super::stem::porter_stem;

/// Identifies the exact tokenizer, stopword list and stemmer. Stored in model
/// bundles; a bundle with a different tag is refused.
pub const PREPROCESSING_TAG: &str = "rg-pre-v1:split-alnum/stop179/porter1980/special4";

pub const ONION_TOKEN: &str = "__onion__";
pub const URL_TOKEN: &str = "__url__";
pub const EMAIL_TOKEN: &str = "__email__";
pub const BTCADDR_TOKEN: &str = "__btcaddr__";

/// Frozen English stopword list (179 entries).
pub const STOPWORDS: &[&str] = &[
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're", "you've",
    "you'll", "you'd", "your", "yours", "yourself", "yourselves", "he", "him", "his", "himself",
    "she", "she's", "her", "hers", "herself", "it", "it's", "its", "itself", "they", "them",
    "their", "theirs", "themselves", "what", "which", "who", "whom", "this", "that", "that'll",
    "these", "those", "am", "is", "are", "was", "were", "be", "been", "being", "have", "has",
    "had", "having", "do", "does", "did", "doing", "a", "an", "the", "and", "but", "if", "or",
    "because", "as", "until", "while", "of", "at", "by", "for", "with", "about", "against",
    "between", "into", "through", "during", "before", "after", "above", "below", "to", "from",
    "up", "down", "in", "out", "on", "off", "over", "under", "again", "further", "then", "once",
    "here", "there", "when", "where", "why", "how", "all", "any", "both", "each", "few", "more",
    "most", "other", "some", "such", "no", "nor", "not", "only", "own", "same", "so", "than",
    "too", "very", "s", "t", "can", "will", "just", "don", "don't", "should", "should've", "now",
    "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren", "aren't", "couldn", "couldn't", "didn",
    "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn", "hasn't", "haven", "haven't", "isn",
    "isn't", "ma", "mightn", "mightn't", "mustn", "mustn't", "needn", "needn't", "shan", "shan't",
    "shouldn", "shouldn't", "wasn", "wasn't", "weren", "weren't", "won", "won't", "wouldn",
    "wouldn't",
];

static STOPWORD_SET: LazyLock<HashSet<&'static str>> = LazyLock::new(|| STOPWORDS.iter().copied().collect());

static ONION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^(?:[a-z][a-z0-9+.-]*://)?(?:[a-z0-9-]+\.)+onion(?:[:/?#].*)?$").unwrap()
});
static URL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?ix)^(?:
            (?:https?|ftp)://\S+
          | www\.[a-z0-9-]+(?:\.[a-z0-9-]+)+\S*
          | (?:[a-z0-9-]+\.)+(?:com|net|org|io|info|biz|ru|cn|su|to|cc|me|co|top|xyz|uk|de)(?:[:/?\#]\S*)?
        )$",
    )
    .unwrap()
});
static EMAIL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^[a-z0-9._%+-]+@[a-z0-9-]+(?:\.[a-z0-9-]+)*\.[a-z]{2,}$").unwrap()
});
static BTCADDR: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:bc1[ac-hj-np-z02-9]{11,71}|[13][a-km-zA-HJ-NP-Z1-9]{25,34})$").unwrap()
});

fn special_token(chunk: &str) -> Option<&'static str> {
    if ONION.is_match(chunk) {
        Some(ONION_TOKEN)
    } else if URL.is_match(chunk) {
        Some(URL_TOKEN)
    } else if EMAIL.is_match(chunk) {
        Some(EMAIL_TOKEN)
    } else if BTCADDR.is_match(chunk) {
        Some(BTCADDR_TOKEN)
    } else {
        None
    }
}

pub fn is_stopword(token: &str) -> bool {
    STOPWORD_SET.contains(token)
}

fn is_edge_punct(c: char) -> bool {
    !(c.is_alphanumeric() || c == '/' || c == '_')
}

/// Normalizes text into a token list. Empty output is valid.
pub fn preprocess(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let trimmed = chunk.trim_matches(is_edge_punct);
        if let Some(tok) = special_token(trimmed) {
            tokens.push(tok.to_owned());
            continue;
        }
        let lower = chunk.to_lowercase();
        for word in lower.split(|c: char| !c.is_alphanumeric()) {
            if word.chars().count() < 2 || is_stopword(word) {
                continue;
            }
            tokens.push(porter_stem(word));
        }
    }
    tokens
}
