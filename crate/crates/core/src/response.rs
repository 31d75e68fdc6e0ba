//! Mitigation: terminate or stop an offending process, or just record what
//! would have happened. Every action is appended to the audit log.
//!
//! Before signalling, the target's `/proc/<pid>/stat` identity (name and
//! start time) is compared with what the detector saw, so a recycled PID is
//! reported as gone rather than killed.

use std::collections::HashSet;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::verdict::Verdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponseMode {
    DryRun,
    #[serde(rename = "log")]
    LogOnly,
    Kill,
    Suspend,
}

impl ResponseMode {
    /// Modes that send a signal.
    pub fn is_enforcing(self) -> bool {
        matches!(self, ResponseMode::Kill | ResponseMode::Suspend)
    }
}

impl fmt::Display for ResponseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResponseMode::DryRun => "dry-run",
            ResponseMode::LogOnly => "log",
            ResponseMode::Kill => "kill",
            ResponseMode::Suspend => "suspend",
        })
    }
}

impl FromStr for ResponseMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dry-run" => Ok(ResponseMode::DryRun),
            "log" | "log-only" => Ok(ResponseMode::LogOnly),
            "kill" => Ok(ResponseMode::Kill),
            "suspend" => Ok(ResponseMode::Suspend),
            other => Err(format!("unknown response mode {other:?}")),
        }
    }
}

/// Identity of a process as read from `/proc/<pid>/stat`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessIdentity {
    pub comm: String,
    /// Start time in clock ticks since boot (field 22 of `stat`).
    pub start_time: u64,
}

impl ProcessIdentity {
    pub fn read(pid: u32) -> io::Result<Self> {
        let stat = fs::read_to_string(format!("/proc/{pid}/stat"))?;
        parse_stat(&stat).ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "unparsable stat"))
    }
}

fn parse_stat(stat: &str) -> Option<ProcessIdentity> {
    // comm is parenthesised and may itself contain ") "
    let open = stat.find('(')?;
    let close = stat.rfind(')')?;
    let comm = stat.get(open + 1..close)?.to_owned();
    // fields after comm start at field 3 (state); start time is field 22
    let start_time = stat.get(close + 2..)?.split_whitespace().nth(19)?.parse().ok()?;
    Some(ProcessIdentity { comm, start_time })
}

/// The kernel keeps 15 bytes of a task name; compare on that prefix.
fn same_comm(a: &str, b: &str) -> bool {
    let cut = |s: &str| {
        let mut end = s.len().min(15);
        while !s.is_char_boundary(end) {
            end -= 1;
        }
        s[..end].to_owned()
    };
    cut(a) == cut(b)
}

#[derive(Debug, Clone)]
pub struct ResponseAction {
    pub mode: ResponseMode,
    pub target_pid: u32,
    /// Name the detector saw. Checked against `/proc` before signalling.
    pub expected_comm: Option<String>,
    /// Full identity when the caller captured one earlier.
    pub expected_identity: Option<ProcessIdentity>,
    pub reason: Verdict,
    /// Trace timestamp of the triggering event.
    pub issued_at_ns: u64,
    /// When the triggering event reached the agent; latency is measured from here.
    pub received_at: Instant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Applied,
    TargetAlreadyGone,
    PermissionDenied,
    /// Nothing was signalled because the mode is dry-run or log-only.
    Skipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionResult {
    pub outcome: Outcome,
    pub latency_ns: u64,
}

#[derive(Debug, Error)]
pub enum ResponseError {
    #[error("refusing to target pid {0}: it is the agent itself")]
    SelfTarget(u32),
    #[error("refusing to target allowlisted pid {0}")]
    Allowlisted(u32),
    #[error("invalid target pid {0}")]
    InvalidPid(u32),
    #[error("signal delivery to pid {pid} failed: {source}")]
    Signal { pid: u32, source: io::Error },
    #[error("audit log write failed: {0}")]
    Audit(#[from] io::Error),
}

#[derive(Serialize)]
struct AuditRecord<'a> {
    ts_ns: u64,
    pid: u32,
    comm: &'a str,
    verdict: &'a Verdict,
    mode: ResponseMode,
    outcome: Outcome,
    latency_ns: u64,
}

/// Append-only JSON-lines audit log.
#[derive(Debug)]
pub struct AuditLog {
    file: Mutex<File>,
}

impl AuditLog {
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(AuditLog { file: Mutex::new(file) })
    }

    fn append(&self, record: &AuditRecord<'_>) -> io::Result<()> {
        let mut line = serde_json::to_string(record).map_err(io::Error::other)?;
        line.push('\n');
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        file.write_all(line.as_bytes())?;
        file.flush()
    }
}

#[derive(Debug)]
pub struct Responder {
    own_pid: u32,
    allowlist: HashSet<u32>,
    audit: Option<AuditLog>,
}

impl Responder {
    pub fn new(allowlist: impl IntoIterator<Item = u32>, audit: Option<AuditLog>) -> Self {
        Responder {
            own_pid: std::process::id(),
            allowlist: allowlist.into_iter().collect(),
            audit,
        }
    }

    pub fn own_pid(&self) -> u32 {
        self.own_pid
    }

    /// Carries out `action`. Protected targets are rejected with an error
    /// before anything is signalled or logged.
    pub fn act(&self, action: &ResponseAction) -> Result<ActionResult, ResponseError> {
        let pid = action.target_pid;
        if pid == 0 || i32::try_from(pid).is_err() {
            return Err(ResponseError::InvalidPid(pid));
        }
        if pid == self.own_pid {
            return Err(ResponseError::SelfTarget(pid));
        }
        if self.allowlist.contains(&pid) {
            return Err(ResponseError::Allowlisted(pid));
        }

        let outcome = match action.mode {
            ResponseMode::DryRun | ResponseMode::LogOnly => Outcome::Skipped,
            ResponseMode::Kill => self.signal(action, libc::SIGKILL)?,
            ResponseMode::Suspend => self.signal(action, libc::SIGSTOP)?,
        };
        let latency_ns = u64::try_from(action.received_at.elapsed().as_nanos()).unwrap_or(u64::MAX);
        if let Some(audit) = &self.audit {
            audit.append(&AuditRecord {
                ts_ns: action.issued_at_ns,
                pid,
                comm: action.expected_comm.as_deref().unwrap_or(""),
                verdict: &action.reason,
                mode: action.mode,
                outcome,
                latency_ns,
            })?;
        }
        Ok(ActionResult { outcome, latency_ns })
    }

    fn signal(&self, action: &ResponseAction, signal: libc::c_int) -> Result<Outcome, ResponseError> {
        let pid = action.target_pid;
        let current = match ProcessIdentity::read(pid) {
            Ok(id) => id,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Outcome::TargetAlreadyGone),
            Err(e) if e.kind() == io::ErrorKind::PermissionDenied => return Ok(Outcome::PermissionDenied),
            Err(e) => return Err(ResponseError::Signal { pid, source: e }),
        };
        let comm_matches = action
            .expected_comm
            .as_deref()
            .is_none_or(|c| same_comm(c, &current.comm));
        let identity_matches = action.expected_identity.as_ref().is_none_or(|id| *id == current);
        if !comm_matches || !identity_matches {
            log::warn!("pid {pid} now belongs to {:?}; not signalling", current.comm);
            return Ok(Outcome::TargetAlreadyGone);
        }
        // SAFETY: plain syscall; pid was checked to be a positive i32, so it
        // never addresses a process group.
        let rc = unsafe { libc::kill(pid as libc::pid_t, signal) };
        if rc == 0 {
            return Ok(Outcome::Applied);
        }
        let err = io::Error::last_os_error();
        match err.raw_os_error() {
            Some(libc::ESRCH) => Ok(Outcome::TargetAlreadyGone),
            Some(libc::EPERM) => {
                log::warn!("no permission to signal pid {pid}");
                Ok(Outcome::PermissionDenied)
            }
            _ => Err(ResponseError::Signal { pid, source: err }),
        }
    }
}
