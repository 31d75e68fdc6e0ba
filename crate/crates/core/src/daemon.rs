//! The detection loop: event sources, the two-phase detector and run reports.
//!
//! Events are consumed by a single thread in arrival order. Exec events are
//! hashed against the blocklist; file creations feed the behavior monitor,
//! whose candidates are classified as ransom notes. Positive verdicts are
//! handed to the responder.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, DaemonConfig};
use crate::event::{decode_trace_line, EventKind, SyscallEvent, TraceError};
use crate::hashset::{check_exec_with, BlocklistError, HashBlocklist};
use crate::kernel_record::{KernelRecord, RecordError, RecordReader};
use crate::model_store::{load_bundle, BundleError, ModelBundle};
use crate::monitor::{BehaviorMonitor, CandidateFile};
use crate::nlp::classify::classify_file;
use crate::response::{AuditLog, Outcome, Responder, ResponseAction, ResponseMode};
use crate::verdict::Verdict;

/// File name of the event trace inside a replay directory.
pub const TRACE_FILE: &str = "events.trace";
/// Directory holding file contents referenced by a replay trace.
pub const SIDECAR_DIR: &str = "fs";
/// Created paths remembered per process for the affected-files count.
pub const HISTORY_CAP: usize = 4096;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("line {line}: timestamp {ts_ns} is earlier than the previous event ({prev_ns})")]
    OutOfOrder { line: usize, ts_ns: u64, prev_ns: u64 },
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("cannot read events: {0}")]
    Io(#[from] io::Error),
}

/// A stream of events in delivery order.
pub trait EventSource {
    fn next_event(&mut self) -> Option<Result<SyscallEvent, SourceError>>;

    /// Records lost upstream since the last call.
    fn take_dropped(&mut self) -> u64 {
        0
    }
}

/// In-memory source, mostly for tests.
pub struct VecSource(std::vec::IntoIter<SyscallEvent>);

impl VecSource {
    pub fn new(events: Vec<SyscallEvent>) -> Self {
        VecSource(events.into_iter())
    }
}

impl EventSource for VecSource {
    fn next_event(&mut self) -> Option<Result<SyscallEvent, SourceError>> {
        self.0.next().map(Ok)
    }
}

/// JSON-lines trace reader. Blank lines are skipped; timestamps must not
/// decrease.
pub struct TraceSource<R> {
    lines: io::Lines<R>,
    line_no: usize,
    last_ts: u64,
}

impl<R: BufRead> TraceSource<R> {
    pub fn new(reader: R) -> Self {
        TraceSource {
            lines: reader.lines(),
            line_no: 0,
            last_ts: 0,
        }
    }
}

impl TraceSource<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        Ok(Self::new(BufReader::new(File::open(path)?)))
    }
}

impl<R: BufRead> EventSource for TraceSource<R> {
    fn next_event(&mut self) -> Option<Result<SyscallEvent, SourceError>> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let event = match decode_trace_line(&line, self.line_no) {
                Ok(ev) => ev,
                Err(e) => return Some(Err(e.into())),
            };
            if event.timestamp_ns < self.last_ts {
                return Some(Err(SourceError::OutOfOrder {
                    line: self.line_no,
                    ts_ns: event.timestamp_ns,
                    prev_ns: self.last_ts,
                }));
            }
            self.last_ts = event.timestamp_ns;
            return Some(Ok(event));
        }
    }
}

/// Reads fixed-size kernel records from a byte stream. Records that fail to
/// decode are logged and counted as dropped; I/O errors end the stream.
pub struct RecordSource<R> {
    reader: RecordReader<R>,
    dropped: u64,
}

impl<R: Read> RecordSource<R> {
    pub fn new(inner: R) -> Self {
        RecordSource {
            reader: RecordReader::new(inner),
            dropped: 0,
        }
    }
}

impl<R: Read> EventSource for RecordSource<R> {
    fn next_event(&mut self) -> Option<Result<SyscallEvent, SourceError>> {
        loop {
            match self.reader.read_record() {
                Ok(None) => return None,
                Ok(Some(KernelRecord::Event(ev))) => return Some(Ok(ev)),
                Ok(Some(KernelRecord::Lost(n))) => self.dropped += u64::from(n),
                Err(e @ (RecordError::Io(_) | RecordError::Truncated(_))) => return Some(Err(e.into())),
                Err(e) => {
                    log::warn!("skipping malformed record: {e}");
                    self.dropped += 1;
                }
            }
        }
    }

    fn take_dropped(&mut self) -> u64 {
        std::mem::take(&mut self.dropped)
    }
}

enum Feed {
    Event(SyscallEvent),
    Lost(u64),
    Failed(SourceError),
}

/// Record feed read on a background thread so the consumer can stop on
/// `shutdown` even while the producer is blocked on a pipe.
pub struct ChannelSource {
    rx: Receiver<Feed>,
    shutdown: Arc<AtomicBool>,
    dropped: u64,
}

impl ChannelSource {
    pub fn spawn<R: Read + Send + 'static>(inner: R, shutdown: Arc<AtomicBool>) -> Self {
        let (tx, rx) = mpsc::sync_channel(4096);
        thread::spawn(move || {
            let mut source = RecordSource::new(inner);
            while let Some(item) = source.next_event() {
                let lost = source.take_dropped();
                if lost > 0 && tx.send(Feed::Lost(lost)).is_err() {
                    return;
                }
                let msg = match item {
                    Ok(ev) => Feed::Event(ev),
                    Err(e) => Feed::Failed(e),
                };
                if tx.send(msg).is_err() {
                    return;
                }
            }
            let lost = source.take_dropped();
            if lost > 0 {
                let _ = tx.send(Feed::Lost(lost));
            }
        });
        ChannelSource {
            rx,
            shutdown,
            dropped: 0,
        }
    }
}

impl EventSource for ChannelSource {
    fn next_event(&mut self) -> Option<Result<SyscallEvent, SourceError>> {
        loop {
            if self.shutdown.load(Ordering::Relaxed) {
                return None;
            }
            match self.rx.recv_timeout(Duration::from_millis(100)) {
                Ok(Feed::Event(ev)) => return Some(Ok(ev)),
                Ok(Feed::Lost(n)) => self.dropped += n,
                Ok(Feed::Failed(e)) => return Some(Err(e)),
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => return None,
            }
        }
    }

    fn take_dropped(&mut self) -> u64 {
        std::mem::take(&mut self.dropped)
    }
}

/// Where file contents named by events are read from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContentRoot {
    /// Paths are read as-is from the host.
    Host,
    /// Paths are rebased under a directory, as in a replay's `fs/` tree.
    Sidecar(PathBuf),
}

impl ContentRoot {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        match self {
            ContentRoot::Host => path.to_path_buf(),
            ContentRoot::Sidecar(root) => {
                let mut out = root.clone();
                for c in path.components() {
                    if let Component::Normal(part) = c {
                        out.push(part);
                    }
                }
                out
            }
        }
    }
}

/// How decision timestamps are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockMode {
    /// Decisions are stamped with the triggering event's timestamp.
    Trace,
    /// Wall-clock processing time is added to the event timestamp.
    Wall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum Trigger {
    ExecHash { exe_path: PathBuf },
    RansomNote { path: PathBuf, log_posterior_margin: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub pid: u32,
    pub comm: String,
    pub verdict: Verdict,
    pub trigger: Trigger,
    pub event_timestamp_ns: u64,
    pub decision_timestamp_ns: u64,
    /// Files the process had created when the decision was made.
    pub creation_count: u64,
    /// Those creations, excluding files that themselves classify as notes.
    pub affected_files: u64,
    /// `None` when the responder refused the target.
    pub response: Option<Outcome>,
}

/// Deterministic counters for one run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub events: u64,
    pub exec_events: u64,
    pub open_events: u64,
    pub creat_opens: u64,
    pub exit_events: u64,
    pub hashes_checked: u64,
    pub hashes_indeterminate: u64,
    pub candidates_emitted: u64,
    pub candidates_out_of_scope: u64,
    pub candidates_suppressed: u64,
    pub candidates_scanned: u64,
    pub candidates_benign: u64,
    pub candidates_indeterminate: u64,
    pub detections: u64,
    pub known_malware_detections: u64,
    pub ransom_note_detections: u64,
    pub actions_applied: u64,
    pub actions_skipped: u64,
    pub actions_target_gone: u64,
    pub actions_permission_denied: u64,
    pub actions_rejected: u64,
    pub affected_files: u64,
    pub dropped_events: u64,
    pub flags: Vec<String>,
}

pub const FLAG_SCANNED_NONE_POSITIVE: &str = "candidates scanned, none classified as ransom notes";
pub const FLAG_EVENTS_DROPPED: &str = "events were dropped before reaching the agent";

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: u64,
    pub total_ns: u64,
    pub max_ns: u64,
}

impl LatencyStats {
    fn record(&mut self, elapsed: Duration) {
        let ns = u64::try_from(elapsed.as_nanos()).unwrap_or(u64::MAX);
        self.count += 1;
        self.total_ns = self.total_ns.saturating_add(ns);
        self.max_ns = self.max_ns.max(ns);
    }

    pub fn mean_ns(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.total_ns as f64 / self.count as f64
        }
    }
}

/// Wall-clock measurements. These vary between runs and are kept apart from
/// [`RunReport`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub hash: LatencyStats,
    pub classify: LatencyStats,
    pub respond: LatencyStats,
    /// Event receipt to response completion, for detections only.
    pub end_to_end: LatencyStats,
    pub wall_ns: u64,
    pub events_per_sec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub detections: Vec<Detection>,
    pub report: RunReport,
    pub timings: StageTimings,
}

#[derive(Debug, Error)]
pub enum DaemonError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot load model: {0}")]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Blocklist(#[from] BlocklistError),
    #[error("cannot open audit log {path}: {source}")]
    Audit { path: PathBuf, source: io::Error },
    #[error("cannot open trace {path}: {source}")]
    TraceOpen { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Source(#[from] SourceError),
}

#[derive(Debug, Default)]
struct ProcTrack {
    created: Vec<PathBuf>,
    created_overflow: u64,
    hash_detected: bool,
    note_detected: bool,
}

/// Loaded artifacts plus per-process state.
pub struct Detector {
    config: DaemonConfig,
    blocklist: HashBlocklist,
    bundle: ModelBundle,
    monitor: BehaviorMonitor,
    responder: Responder,
    root: ContentRoot,
    clock: ClockMode,
    procs: HashMap<u32, ProcTrack>,
    report: RunReport,
    timings: StageTimings,
}

impl Detector {
    pub fn new(
        config: DaemonConfig,
        blocklist: HashBlocklist,
        bundle: ModelBundle,
        responder: Responder,
        root: ContentRoot,
        clock: ClockMode,
    ) -> Result<Self, DaemonError> {
        config.validate()?;
        let monitor =
            BehaviorMonitor::new(config.monitor).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(Detector {
            config,
            blocklist,
            bundle,
            monitor,
            responder,
            root,
            clock,
            procs: HashMap::new(),
            report: RunReport::default(),
            timings: StageTimings::default(),
        })
    }

    /// Loads the model, blocklist and audit log named by `config`. Any
    /// failure aborts startup.
    pub fn from_config(config: DaemonConfig, root: ContentRoot, clock: ClockMode) -> Result<Self, DaemonError> {
        config.validate()?;
        let bundle = load_bundle(&config.model_path)?;
        let blocklist = match &config.blocklist_path {
            Some(path) => {
                let set = HashBlocklist::load(path)?;
                if set.skipped_count() > 0 {
                    log::warn!("{}: skipped {} malformed lines", path.display(), set.skipped_count());
                }
                set
            }
            None => HashBlocklist::empty(),
        };
        log::info!("blocklist: {} digests", blocklist.entry_count());
        let audit = match &config.audit_log {
            Some(path) => Some(AuditLog::open(path).map_err(|source| DaemonError::Audit {
                path: path.clone(),
                source,
            })?),
            None => None,
        };
        let responder = Responder::new(config.allow_pids.iter().copied(), audit);
        Self::new(config, blocklist, bundle, responder, root, clock)
    }

    pub fn report(&self) -> &RunReport {
        &self.report
    }

    pub fn timings(&self) -> &StageTimings {
        &self.timings
    }

    pub fn monitor(&self) -> &BehaviorMonitor {
        &self.monitor
    }

    pub fn note_dropped(&mut self, count: u64) {
        self.report.dropped_events += count;
    }

    /// Processes one event and returns a detection if it triggered one.
    pub fn handle(&mut self, event: &SyscallEvent) -> Option<Detection> {
        let received = Instant::now();
        self.report.events += 1;
        match &event.kind {
            EventKind::Exec { exe_path } => {
                self.report.exec_events += 1;
                self.on_exec(event, exe_path, received)
            }
            EventKind::FileOpen { path, flags } => {
                self.report.open_events += 1;
                if flags.creat() {
                    self.report.creat_opens += 1;
                    let track = self.procs.entry(event.pid).or_default();
                    if track.created.len() < HISTORY_CAP {
                        track.created.push(path.clone());
                    } else {
                        track.created_overflow += 1;
                    }
                }
                let candidate = self.monitor.observe(event)?;
                self.on_candidate(event, candidate, received)
            }
            EventKind::Exit => {
                self.report.exit_events += 1;
                self.monitor.observe(event);
                self.procs.remove(&event.pid);
                None
            }
        }
    }

    fn on_exec(&mut self, event: &SyscallEvent, exe_path: &Path, received: Instant) -> Option<Detection> {
        if self.procs.get(&event.pid).is_some_and(|t| t.hash_detected) {
            return None;
        }
        self.report.hashes_checked += 1;
        let started = Instant::now();
        let root = &self.root;
        let verdict = check_exec_with(event, &self.blocklist, |p| root.resolve(p));
        self.timings.hash.record(started.elapsed());
        match verdict {
            Verdict::KnownMalware { .. } => {
                self.procs.entry(event.pid).or_default().hash_detected = true;
                self.report.known_malware_detections += 1;
                let trigger = Trigger::ExecHash {
                    exe_path: exe_path.to_path_buf(),
                };
                Some(self.detect(event, verdict, trigger, received, None))
            }
            Verdict::Indeterminate { .. } => {
                self.report.hashes_indeterminate += 1;
                None
            }
            _ => None,
        }
    }

    fn on_candidate(&mut self, event: &SyscallEvent, candidate: CandidateFile, received: Instant) -> Option<Detection> {
        self.report.candidates_emitted += 1;
        if !self.config.in_scope(&candidate.path) {
            self.report.candidates_out_of_scope += 1;
            return None;
        }
        if self.procs.get(&event.pid).is_some_and(|t| t.note_detected) {
            self.report.candidates_suppressed += 1;
            return None;
        }
        self.report.candidates_scanned += 1;
        let started = Instant::now();
        let verdict = classify_file(
            &self.bundle,
            self.root.resolve(&candidate.path),
            self.config.max_scan_bytes,
        );
        self.timings.classify.record(started.elapsed());
        match verdict {
            Verdict::RansomNote { log_posterior_margin } => {
                self.procs.entry(event.pid).or_default().note_detected = true;
                self.report.ransom_note_detections += 1;
                let trigger = Trigger::RansomNote {
                    path: candidate.path.clone(),
                    log_posterior_margin,
                };
                Some(self.detect(event, verdict, trigger, received, Some(&candidate.path)))
            }
            Verdict::Indeterminate { .. } => {
                self.report.candidates_indeterminate += 1;
                None
            }
            _ => {
                self.report.candidates_benign += 1;
                None
            }
        }
    }

    fn detect(
        &mut self,
        event: &SyscallEvent,
        verdict: Verdict,
        trigger: Trigger,
        received: Instant,
        triggering_path: Option<&Path>,
    ) -> Detection {
        self.report.detections += 1;
        let decision_timestamp_ns = match self.clock {
            ClockMode::Trace => event.timestamp_ns,
            ClockMode::Wall => event
                .timestamp_ns
                .saturating_add(u64::try_from(received.elapsed().as_nanos()).unwrap_or(u64::MAX)),
        };

        let action = ResponseAction {
            mode: self.config.response,
            target_pid: event.pid,
            expected_comm: Some(event.comm.clone()),
            expected_identity: None,
            reason: verdict.clone(),
            issued_at_ns: event.timestamp_ns,
            received_at: received,
        };
        let started = Instant::now();
        let response = match self.responder.act(&action) {
            Ok(result) => {
                match result.outcome {
                    Outcome::Applied => self.report.actions_applied += 1,
                    Outcome::Skipped => self.report.actions_skipped += 1,
                    Outcome::TargetAlreadyGone => self.report.actions_target_gone += 1,
                    Outcome::PermissionDenied => self.report.actions_permission_denied += 1,
                }
                Some(result.outcome)
            }
            Err(e) => {
                log::warn!("pid {}: response not carried out: {e}", event.pid);
                self.report.actions_rejected += 1;
                None
            }
        };
        self.timings.respond.record(started.elapsed());
        self.timings.end_to_end.record(received.elapsed());

        let (creation_count, affected_files) = self.affected(event.pid, triggering_path);
        self.report.affected_files += affected_files;
        let detection = Detection {
            pid: event.pid,
            comm: event.comm.clone(),
            verdict,
            trigger,
            event_timestamp_ns: event.timestamp_ns,
            decision_timestamp_ns,
            creation_count,
            affected_files,
            response,
        };
        match self.config.response {
            ResponseMode::DryRun => log::info!("would respond: {}", describe(&detection)),
            _ => log::warn!("detected: {}", describe(&detection)),
        }
        detection
    }

    /// Counts the process's earlier creations that are not themselves notes.
    /// Runs after the response so it never delays it.
    fn affected(&self, pid: u32, triggering_path: Option<&Path>) -> (u64, u64) {
        let creation_count = self.monitor.file_creation_count(pid);
        let Some(track) = self.procs.get(&pid) else {
            return (creation_count, 0);
        };
        let mut history = track.created.as_slice();
        if let (Some(trigger), Some((last, rest))) = (triggering_path, history.split_last()) {
            if last == trigger && track.created_overflow == 0 {
                history = rest;
            }
        }
        let notes = history
            .iter()
            .filter(|p| {
                matches!(
                    classify_file(&self.bundle, self.root.resolve(p), self.config.max_scan_bytes),
                    Verdict::RansomNote { .. }
                )
            })
            .count() as u64;
        (creation_count, history.len() as u64 - notes + track.created_overflow)
    }

    /// Drains `source`, calling `on_detection` for each detection.
    pub fn run<S: EventSource>(
        &mut self,
        source: &mut S,
        mut on_detection: impl FnMut(&Detection),
    ) -> Result<Vec<Detection>, DaemonError> {
        let started = Instant::now();
        let mut detections = Vec::new();
        let result = loop {
            let Some(item) = source.next_event() else {
                break Ok(());
            };
            self.note_dropped(source.take_dropped());
            match item {
                Ok(event) => {
                    if let Some(d) = self.handle(&event) {
                        on_detection(&d);
                        detections.push(d);
                    }
                }
                Err(e) => break Err(e),
            }
        };
        self.note_dropped(source.take_dropped());
        self.finish(started.elapsed());
        result?;
        Ok(detections)
    }

    fn finish(&mut self, wall: Duration) {
        let report = &mut self.report;
        report.flags.clear();
        if report.candidates_scanned > 0 && report.ransom_note_detections == 0 {
            report.flags.push(FLAG_SCANNED_NONE_POSITIVE.to_owned());
        }
        if report.dropped_events > 0 {
            report.flags.push(FLAG_EVENTS_DROPPED.to_owned());
        }
        self.timings.wall_ns = u64::try_from(wall.as_nanos()).unwrap_or(u64::MAX);
        let secs = wall.as_secs_f64();
        self.timings.events_per_sec = if secs > 0.0 { report.events as f64 / secs } else { 0.0 };
    }

    pub fn into_outcome(self, detections: Vec<Detection>) -> RunOutcome {
        RunOutcome {
            detections,
            report: self.report,
            timings: self.timings,
        }
    }
}

fn describe(d: &Detection) -> String {
    format!("pid {} ({}) {}", d.pid, d.comm, d.verdict)
}

/// Replays `<dir>/events.trace` with file contents taken from `<dir>/fs/`.
pub fn replay(config: DaemonConfig, dir: impl AsRef<Path>) -> Result<RunOutcome, DaemonError> {
    let dir = dir.as_ref();
    let trace = dir.join(TRACE_FILE);
    let mut source = TraceSource::open(&trace).map_err(|source| DaemonError::TraceOpen {
        path: trace.clone(),
        source,
    })?;
    let mut detector = Detector::from_config(config, ContentRoot::Sidecar(dir.join(SIDECAR_DIR)), ClockMode::Trace)?;
    let detections = detector.run(&mut source, |_| {})?;
    Ok(detector.into_outcome(detections))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::OpenFlags;
    use crate::kernel_record::{encode_lost, encode_record};

    fn open(ts: u64, pid: u32, path: &str) -> SyscallEvent {
        SyscallEvent::new(ts, pid, 0, "t", EventKind::open(path, OpenFlags::from_raw(0o101))).unwrap()
    }

    #[test]
    fn sidecar_resolution_strips_root() {
        let root = ContentRoot::Sidecar(PathBuf::from("/r/fs"));
        assert_eq!(root.resolve(Path::new("/home/u/a.txt")), PathBuf::from("/r/fs/home/u/a.txt"));
        assert_eq!(root.resolve(Path::new("/../etc/x")), PathBuf::from("/r/fs/etc/x"));
        assert_eq!(ContentRoot::Host.resolve(Path::new("/a")), PathBuf::from("/a"));
    }

    #[test]
    fn trace_source_rejects_backwards_time() {
        let text = format!(
            "{}\n\n{}\n",
            crate::event::encode_trace_line(&open(5, 1, "/a")),
            crate::event::encode_trace_line(&open(4, 1, "/b"))
        );
        let mut src = TraceSource::new(text.as_bytes());
        assert!(src.next_event().unwrap().is_ok());
        match src.next_event().unwrap() {
            Err(SourceError::OutOfOrder { line: 3, ts_ns: 4, prev_ns: 5 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn trace_source_names_bad_line() {
        let mut src = TraceSource::new(&b"{\"ts_ns\":1}\n"[..]);
        let err = src.next_event().unwrap().unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn record_source_counts_lost() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&encode_lost(7));
        bytes.extend_from_slice(&encode_record(&open(1, 2, "/x")));
        bytes.extend_from_slice(&[0u8; 168]); // kind 0 is not a valid tag
        let mut src = RecordSource::new(&bytes[..]);
        assert_eq!(src.next_event().unwrap().unwrap().pid, 2);
        assert!(src.next_event().is_none());
        assert_eq!(src.take_dropped(), 8);
        assert_eq!(src.take_dropped(), 0);
    }

    #[test]
    fn channel_source_stops_on_shutdown() {
        let (reader, mut writer) = std::io::pipe().unwrap();
        let flag = Arc::new(AtomicBool::new(false));
        let mut src = ChannelSource::spawn(reader, flag.clone());
        use std::io::Write;
        writer.write_all(&encode_record(&open(1, 3, "/y"))).unwrap();
        assert_eq!(src.next_event().unwrap().unwrap().pid, 3);
        flag.store(true, Ordering::Relaxed);
        assert!(src.next_event().is_none());
    }
}
