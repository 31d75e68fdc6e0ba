//! Phase one: SHA-256 digests of executed binaries checked against a blocklist
//! of known-malware hashes.
//!
//! Blocklist files are newline-delimited hex digests. Case is ignored,
//! blank lines and `#` comments are skipped, and malformed lines are counted
//! and skipped rather than failing the load.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::event::{EventKind, SyscallEvent};
use crate::verdict::Verdict;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sha256Digest(pub [u8; 32]);

impl Sha256Digest {
    pub fn of_bytes(bytes: &[u8]) -> Self {
        Sha256Digest(Sha256::digest(bytes).into())
    }
}

impl fmt::Display for Sha256Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Sha256Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sha256Digest({self})")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("not a SHA-256 hex digest")]
pub struct ParseDigestError;

impl FromStr for Sha256Digest {
    type Err = ParseDigestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.as_bytes();
        if s.len() != 64 {
            return Err(ParseDigestError);
        }
        let nibble = |c: u8| match c {
            b'0'..=b'9' => Ok(c - b'0'),
            b'a'..=b'f' => Ok(c - b'a' + 10),
            b'A'..=b'F' => Ok(c - b'A' + 10),
            _ => Err(ParseDigestError),
        };
        let mut out = [0u8; 32];
        for (i, pair) in s.chunks_exact(2).enumerate() {
            out[i] = nibble(pair[0])? << 4 | nibble(pair[1])?;
        }
        Ok(Sha256Digest(out))
    }
}

impl Serialize for Sha256Digest {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Sha256Digest {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error)]
pub enum BlocklistError {
    #[error("cannot read blocklist {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
}

#[derive(Debug, Error)]
pub enum HashError {
    #[error("target disappeared")]
    TargetDisappeared,
    #[error("cannot read target: {0}")]
    Io(#[from] io::Error),
}

/// Immutable set of known-malware digests. Stored as a sorted vector, so the
/// resident cost is 32 bytes per entry.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HashBlocklist {
    digests: Vec<Sha256Digest>,
    source_path: Option<PathBuf>,
    skipped: usize,
}

impl HashBlocklist {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_digests(digests: impl IntoIterator<Item = Sha256Digest>) -> Self {
        let mut digests: Vec<_> = digests.into_iter().collect();
        digests.sort_unstable();
        digests.dedup();
        digests.shrink_to_fit();
        HashBlocklist {
            digests,
            source_path: None,
            skipped: 0,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BlocklistError> {
        let path = path.as_ref();
        let read_err = |source| BlocklistError::Read {
            path: path.to_owned(),
            source,
        };
        let file = File::open(path).map_err(read_err)?;
        let mut digests = Vec::new();
        let mut skipped = 0;
        for line in BufReader::new(file).lines() {
            let line = line.map_err(read_err)?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line.parse::<Sha256Digest>() {
                Ok(d) => digests.push(d),
                Err(_) => skipped += 1,
            }
        }
        if skipped > 0 {
            log::warn!("{}: skipped {skipped} malformed blocklist lines", path.display());
        }
        let mut list = Self::from_digests(digests);
        list.source_path = Some(path.to_owned());
        list.skipped = skipped;
        Ok(list)
    }

    pub fn contains(&self, digest: &Sha256Digest) -> bool {
        self.digests.binary_search(digest).is_ok()
    }

    pub fn entry_count(&self) -> usize {
        self.digests.len()
    }

    pub fn skipped_count(&self) -> usize {
        self.skipped
    }

    pub fn source_path(&self) -> Option<&Path> {
        self.source_path.as_deref()
    }

    /// Heap bytes held by the digest table.
    pub fn heap_bytes(&self) -> usize {
        self.digests.capacity() * std::mem::size_of::<Sha256Digest>()
    }
}

/// Loads a blocklist file. See [`HashBlocklist::load`].
pub fn load_blocklist(path: impl AsRef<Path>) -> Result<HashBlocklist, BlocklistError> {
    HashBlocklist::load(path)
}

/// Streams a file through SHA-256 in 64 KiB chunks.
pub fn hash_file(path: impl AsRef<Path>) -> Result<Sha256Digest, HashError> {
    let vanished = |e: io::Error| match e.kind() {
        io::ErrorKind::NotFound => HashError::TargetDisappeared,
        _ => HashError::Io(e),
    };
    let mut file = File::open(path.as_ref()).map_err(vanished)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 64 * 1024];
    loop {
        match file.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => hasher.update(&buf[..n]),
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(vanished(e)),
        }
    }
    Ok(Sha256Digest(hasher.finalize().into()))
}

/// Static check for an exec event. `resolve` maps the event's executable
/// path onto the filesystem that holds it (identity for live hosts, a sidecar
/// directory for replays). Non-exec events are `Indeterminate`.
pub fn check_exec_with(
    event: &SyscallEvent,
    blocklist: &HashBlocklist,
    resolve: impl Fn(&Path) -> PathBuf,
) -> Verdict {
    let EventKind::Exec { exe_path } = &event.kind else {
        return Verdict::Indeterminate {
            reason: "not an exec event".into(),
        };
    };
    match hash_file(resolve(exe_path)) {
        Ok(digest) if blocklist.contains(&digest) => Verdict::KnownMalware { digest },
        Ok(_) => Verdict::Benign { log_posterior_margin: None },
        Err(e) => {
            log::info!("pid {}: cannot hash {}: {e}", event.pid, exe_path.display());
            Verdict::Indeterminate { reason: e.to_string() }
        }
    }
}

pub fn check_exec(event: &SyscallEvent, blocklist: &HashBlocklist) -> Verdict {
    check_exec_with(event, blocklist, Path::to_path_buf)
}
