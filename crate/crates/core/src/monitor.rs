//! Per-process file-creation counting.
//!
//! Every `O_CREAT` open increments the opening process's counter. Once the
//! counter reaches the threshold the created file becomes a candidate for
//! note classification. Counters are cumulative for the life of the process
//! and are dropped when it exits.

use std::collections::HashMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{EventKind, SyscallEvent};

pub const DEFAULT_THRESHOLD: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub threshold_t: u32,
    /// When false only the creation that reaches the threshold is emitted.
    pub emit_every_candidate_after_threshold: bool,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            threshold_t: DEFAULT_THRESHOLD,
            emit_every_candidate_after_threshold: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("threshold_t must be at least 1")]
pub struct InvalidThreshold;

impl MonitorConfig {
    pub fn with_threshold(threshold_t: u32) -> Result<Self, InvalidThreshold> {
        let cfg = Self {
            threshold_t,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), InvalidThreshold> {
        if self.threshold_t == 0 {
            Err(InvalidThreshold)
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessState {
    pub pid: u32,
    pub file_creation_count: u64,
    pub first_seen_ns: u64,
    pub last_event_ns: u64,
}

/// A newly created file from a process at or past the threshold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateFile {
    pub pid: u32,
    pub comm: String,
    pub path: PathBuf,
    pub creation_count_at_emit: u64,
    pub timestamp_ns: u64,
}

/// Owns the per-PID counter table. Single-consumer; not shared across threads.
#[derive(Debug, Clone)]
pub struct BehaviorMonitor {
    config: MonitorConfig,
    table: HashMap<u32, ProcessState>,
}

impl BehaviorMonitor {
    pub fn new(config: MonitorConfig) -> Result<Self, InvalidThreshold> {
        config.validate()?;
        Ok(Self {
            config,
            table: HashMap::new(),
        })
    }

    pub fn config(&self) -> MonitorConfig {
        self.config
    }

    pub fn observe(&mut self, event: &SyscallEvent) -> Option<CandidateFile> {
        let path = match &event.kind {
            EventKind::Exit => {
                self.reset(event.pid);
                return None;
            }
            EventKind::Exec { .. } => return None,
            EventKind::FileOpen { flags, .. } if !flags.creat() => return None,
            EventKind::FileOpen { path, .. } => path,
        };

        let state = self.table.entry(event.pid).or_insert(ProcessState {
            pid: event.pid,
            file_creation_count: 0,
            first_seen_ns: event.timestamp_ns,
            last_event_ns: event.timestamp_ns,
        });
        state.file_creation_count += 1;
        state.last_event_ns = event.timestamp_ns;

        let threshold = u64::from(self.config.threshold_t);
        let count = state.file_creation_count;
        let emit = if self.config.emit_every_candidate_after_threshold {
            count >= threshold
        } else {
            count == threshold
        };
        emit.then(|| CandidateFile {
            pid: event.pid,
            comm: event.comm.clone(),
            path: path.clone(),
            creation_count_at_emit: count,
            timestamp_ns: event.timestamp_ns,
        })
    }

    /// Forgets a process. Unknown pids are a no-op.
    pub fn reset(&mut self, pid: u32) {
        self.table.remove(&pid);
    }

    pub fn file_creation_count(&self, pid: u32) -> u64 {
        self.table.get(&pid).map_or(0, |s| s.file_creation_count)
    }

    pub fn state(&self, pid: u32) -> Option<&ProcessState> {
        self.table.get(&pid)
    }

    pub fn tracked_pids(&self) -> usize {
        self.table.len()
    }
}
