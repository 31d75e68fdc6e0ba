//! Syscall event model shared by every event source, and the line-oriented
//! trace codec used for replays.
//!
//! A trace is UTF-8 text with one flat JSON object per line. Field order is
//! fixed (`ts_ns`, `pid`, `uid`, `comm`, `kind`, then `exe_path` for exec or
//! `path` + `flags` for open) and unknown fields are rejected, so a trace is
//! byte-stable for a given event sequence.

use std::ffi::OsString;
use std::fmt;
use std::os::unix::ffi::{OsStrExt, OsStringExt};
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};
use thiserror::Error;

/// Maximum length of a process name in bytes.
pub const COMM_MAX_BYTES: usize = 16;
/// Maximum length of a file-open path in bytes; longer paths are truncated.
pub const OPEN_PATH_MAX_BYTES: usize = 128;

pub const O_ACCMODE: u32 = 0o3;
pub const O_WRONLY: u32 = 0o1;
pub const O_RDWR: u32 = 0o2;
pub const O_CREAT: u32 = 0o100;
pub const O_TRUNC: u32 = 0o1000;
pub const O_APPEND: u32 = 0o2000;

/// Flags argument of `openat`, decoded against the generic `fcntl.h` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct OpenFlags {
    raw: u32,
}

impl OpenFlags {
    pub const fn from_raw(raw: u32) -> Self {
        Self { raw }
    }

    pub const fn raw(self) -> u32 {
        self.raw
    }

    pub const fn creat(self) -> bool {
        self.raw & O_CREAT != 0
    }

    pub const fn rdonly(self) -> bool {
        self.raw & O_ACCMODE == 0
    }

    pub const fn wronly(self) -> bool {
        self.raw & O_ACCMODE == O_WRONLY
    }

    pub const fn rdwr(self) -> bool {
        self.raw & O_ACCMODE == O_RDWR
    }

    pub const fn trunc(self) -> bool {
        self.raw & O_TRUNC != 0
    }

    pub const fn append(self) -> bool {
        self.raw & O_APPEND != 0
    }
}

/// Decodes a raw `openat` flags bitmask. Every integer decodes.
pub fn parse_open_flags(raw: u32) -> OpenFlags {
    OpenFlags::from_raw(raw)
}

impl fmt::Display for OpenFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = if self.wronly() {
            "O_WRONLY"
        } else if self.rdwr() {
            "O_RDWR"
        } else {
            "O_RDONLY"
        };
        f.write_str(mode)?;
        for (set, name) in [
            (self.creat(), "O_CREAT"),
            (self.trunc(), "O_TRUNC"),
            (self.append(), "O_APPEND"),
        ] {
            if set {
                write!(f, "|{name}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EventKind {
    Exec { exe_path: PathBuf },
    FileOpen { path: PathBuf, flags: OpenFlags },
    Exit,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Exec { .. } => "exec",
            EventKind::FileOpen { .. } => "open",
            EventKind::Exit => "exit",
        }
    }

    /// A file-open kind with the path truncated to [`OPEN_PATH_MAX_BYTES`].
    pub fn open(path: impl Into<PathBuf>, flags: OpenFlags) -> Self {
        EventKind::FileOpen {
            path: truncate_path(path.into()),
            flags,
        }
    }

    pub fn exec(exe_path: impl Into<PathBuf>) -> Self {
        EventKind::Exec {
            exe_path: exe_path.into(),
        }
    }
}

/// One observed kernel event.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SyscallEvent {
    /// Monotonic nanoseconds since the start of the trace.
    pub timestamp_ns: u64,
    pub pid: u32,
    pub uid: u32,
    pub comm: String,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EventError {
    #[error("invariant violation: pid > 0")]
    ZeroPid,
    #[error("invariant violation: comm is empty")]
    EmptyComm,
    #[error("invariant violation: open path exceeds {OPEN_PATH_MAX_BYTES} bytes")]
    PathTooLong,
}

impl SyscallEvent {
    /// Builds a validated event. `comm` is truncated to 16 bytes on a char
    /// boundary and open paths to 128 bytes.
    pub fn new(
        timestamp_ns: u64,
        pid: u32,
        uid: u32,
        comm: &str,
        kind: EventKind,
    ) -> Result<Self, EventError> {
        let kind = match kind {
            EventKind::FileOpen { path, flags } => EventKind::open(path, flags),
            other => other,
        };
        let event = SyscallEvent {
            timestamp_ns,
            pid,
            uid,
            comm: truncate_comm(comm).to_owned(),
            kind,
        };
        event.validate()?;
        Ok(event)
    }

    pub fn validate(&self) -> Result<(), EventError> {
        if self.pid == 0 {
            return Err(EventError::ZeroPid);
        }
        if self.comm.is_empty() {
            return Err(EventError::EmptyComm);
        }
        if let EventKind::FileOpen { path, .. } = &self.kind {
            if path.as_os_str().len() > OPEN_PATH_MAX_BYTES {
                return Err(EventError::PathTooLong);
            }
        }
        Ok(())
    }

    /// True for a file open carrying `O_CREAT`.
    pub fn is_creat_open(&self) -> bool {
        matches!(&self.kind, EventKind::FileOpen { flags, .. } if flags.creat())
    }
}

pub fn truncate_comm(comm: &str) -> &str {
    if comm.len() <= COMM_MAX_BYTES {
        return comm;
    }
    let mut end = COMM_MAX_BYTES;
    while !comm.is_char_boundary(end) {
        end -= 1;
    }
    &comm[..end]
}

fn truncate_path(path: PathBuf) -> PathBuf {
    let mut bytes = path.into_os_string().into_vec();
    bytes.truncate(OPEN_PATH_MAX_BYTES);
    PathBuf::from(OsString::from_vec(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct TraceError {
    pub line: usize,
    pub kind: TraceErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceErrorKind {
    #[error("malformed record: {0}")]
    Syntax(String),
    #[error("missing field {0}")]
    MissingField(&'static str),
    #[error("unknown field {0}")]
    UnknownField(String),
    #[error("field {0} out of order")]
    FieldOrder(String),
    #[error("invalid value for field {field}: {reason}")]
    InvalidValue { field: &'static str, reason: String },
    #[error("{0}")]
    Invariant(EventError),
}

/// Escapes raw path bytes into text: valid UTF-8 passes through, a literal
/// backslash becomes `\\` and every other byte becomes `\xNN`.
fn escape_path(path: &Path) -> String {
    let mut out = String::new();
    for chunk in path.as_os_str().as_bytes().utf8_chunks() {
        for c in chunk.valid().chars() {
            if c == '\\' {
                out.push_str("\\\\");
            } else {
                out.push(c);
            }
        }
        for b in chunk.invalid() {
            out.push_str(&format!("\\x{b:02x}"));
        }
    }
    out
}

fn unescape_path(text: &str) -> Result<PathBuf, String> {
    let mut bytes = Vec::with_capacity(text.len());
    let mut rest = text.as_bytes();
    while let Some((&b, tail)) = rest.split_first() {
        if b != b'\\' {
            bytes.push(b);
            rest = tail;
            continue;
        }
        match tail {
            [b'\\', tail @ ..] => {
                bytes.push(b'\\');
                rest = tail;
            }
            [b'x', h, l, tail @ ..] => {
                let hex = [*h, *l];
                let hex = std::str::from_utf8(&hex).map_err(|_| "bad escape".to_string())?;
                let byte = u8::from_str_radix(hex, 16).map_err(|_| format!("bad escape \\x{hex}"))?;
                bytes.push(byte);
                rest = tail;
            }
            _ => return Err("dangling backslash escape".into()),
        }
    }
    Ok(PathBuf::from(OsString::from_vec(bytes)))
}

/// Encodes an event as one trace line (no trailing newline).
pub fn encode_trace_line(event: &SyscallEvent) -> String {
    let mut map = Map::new();
    map.insert("ts_ns".into(), event.timestamp_ns.into());
    map.insert("pid".into(), event.pid.into());
    map.insert("uid".into(), event.uid.into());
    map.insert("comm".into(), truncate_comm(&event.comm).into());
    map.insert("kind".into(), event.kind.name().into());
    match &event.kind {
        EventKind::Exec { exe_path } => {
            map.insert("exe_path".into(), escape_path(exe_path).into());
        }
        EventKind::FileOpen { path, flags } => {
            let path = truncate_path(path.clone());
            map.insert("path".into(), escape_path(&path).into());
            map.insert("flags".into(), flags.raw().into());
        }
        EventKind::Exit => {}
    }
    Value::Object(map).to_string()
}

const COMMON_FIELDS: [&str; 5] = ["ts_ns", "pid", "uid", "comm", "kind"];

/// Decodes one trace line. `line_no` is 1-based and only used for errors.
pub fn decode_trace_line(line: &str, line_no: usize) -> Result<SyscallEvent, TraceError> {
    let err = |kind| TraceError { line: line_no, kind };
    let value: Value =
        serde_json::from_str(line).map_err(|e| err(TraceErrorKind::Syntax(e.to_string())))?;
    let Value::Object(map) = value else {
        return Err(err(TraceErrorKind::Syntax("record is not an object".into())));
    };

    let int = |field: &'static str| -> Result<u64, TraceError> {
        match map.get(field) {
            None => Err(err(TraceErrorKind::MissingField(field))),
            Some(v) => v.as_u64().ok_or_else(|| {
                err(TraceErrorKind::InvalidValue {
                    field,
                    reason: "expected a non-negative integer".into(),
                })
            }),
        }
    };
    let text = |field: &'static str| -> Result<&str, TraceError> {
        match map.get(field) {
            None => Err(err(TraceErrorKind::MissingField(field))),
            Some(v) => v.as_str().ok_or_else(|| {
                err(TraceErrorKind::InvalidValue {
                    field,
                    reason: "expected a string".into(),
                })
            }),
        }
    };
    let narrow = |field: &'static str, v: u64| -> Result<u32, TraceError> {
        u32::try_from(v).map_err(|_| {
            err(TraceErrorKind::InvalidValue {
                field,
                reason: format!("{v} does not fit in 32 bits"),
            })
        })
    };
    let path_field = |field: &'static str| -> Result<PathBuf, TraceError> {
        unescape_path(text(field)?).map_err(|reason| err(TraceErrorKind::InvalidValue { field, reason }))
    };

    let timestamp_ns = int("ts_ns")?;
    let pid = narrow("pid", int("pid")?)?;
    let uid = narrow("uid", int("uid")?)?;
    let comm = text("comm")?;
    if comm.len() > COMM_MAX_BYTES {
        return Err(err(TraceErrorKind::InvalidValue {
            field: "comm",
            reason: format!("longer than {COMM_MAX_BYTES} bytes"),
        }));
    }
    let (kind, extra): (EventKind, &[&str]) = match text("kind")? {
        "exec" => (EventKind::exec(path_field("exe_path")?), &["exe_path"]),
        "open" => {
            let path = path_field("path")?;
            if path.as_os_str().len() > OPEN_PATH_MAX_BYTES {
                return Err(err(TraceErrorKind::Invariant(EventError::PathTooLong)));
            }
            let flags = OpenFlags::from_raw(narrow("flags", int("flags")?)?);
            (EventKind::FileOpen { path, flags }, &["path", "flags"])
        }
        "exit" => (EventKind::Exit, &[]),
        other => {
            return Err(err(TraceErrorKind::InvalidValue {
                field: "kind",
                reason: format!("unknown kind {other:?}"),
            }))
        }
    };

    let expected = COMMON_FIELDS.iter().chain(extra.iter());
    for (key, want) in map.keys().zip(expected) {
        if key != want {
            if COMMON_FIELDS.contains(&key.as_str()) || extra.contains(&key.as_str()) {
                return Err(err(TraceErrorKind::FieldOrder(key.clone())));
            }
            return Err(err(TraceErrorKind::UnknownField(key.clone())));
        }
    }
    if let Some(key) = map.keys().nth(COMMON_FIELDS.len() + extra.len()) {
        return Err(err(TraceErrorKind::UnknownField(key.clone())));
    }

    let event = SyscallEvent {
        timestamp_ns,
        pid,
        uid,
        comm: comm.to_owned(),
        kind,
    };
    event
        .validate()
        .map_err(|e| err(TraceErrorKind::Invariant(e)))?;
    Ok(event)
}
