//! Ransomware detection agent.
//!
//! Two phases run over a stream of syscall events. Executed binaries are
//! hashed and looked up in a SHA-256 blocklist. Processes that keep creating
//! files have their new files classified by a ransom-note text model
//! (TF-IDF, chi-squared selection, multinomial naive Bayes). Positive
//! verdicts go to a response engine that can log, suspend or kill.
//!
//! ```
//! use ransomguard::event::{EventKind, OpenFlags, SyscallEvent};
//! use ransomguard::monitor::{BehaviorMonitor, MonitorConfig};
//!
//! let mut monitor = BehaviorMonitor::new(MonitorConfig::with_threshold(2).unwrap()).unwrap();
//! let create = |ts, path: &str| {
//!     SyscallEvent::new(ts, 7, 1000, "writer", EventKind::open(path, OpenFlags::from_raw(0o101))).unwrap()
//! };
//! assert!(monitor.observe(&create(1, "/tmp/a")).is_none());
//! let candidate = monitor.observe(&create(2, "/tmp/b")).unwrap();
//! assert_eq!(candidate.creation_count_at_emit, 2);
//! ```

pub mod config;
pub mod daemon;
pub mod event;
pub mod hashset;
pub mod kernel_record;
pub mod model_store;
pub mod monitor;
pub mod nlp;
pub mod response;
pub mod scenario;
pub mod verdict;

pub use config::DaemonConfig;
pub use daemon::{replay, Detection, Detector, EventSource, RunOutcome, RunReport, StageTimings, Trigger};
pub use event::{EventKind, OpenFlags, SyscallEvent};
pub use hashset::{HashBlocklist, Sha256Digest};
pub use model_store::{load_bundle, save_bundle, ModelBundle};
pub use monitor::{BehaviorMonitor, CandidateFile, MonitorConfig};
pub use response::{Outcome, Responder, ResponseMode};
pub use scenario::{gen_scenario, Scenario, ScenarioKind, ScenarioParams};
pub use verdict::Verdict;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/quickstart.md")]
    struct Quickstart;
    #[doc = include_str!("../../../book/src/training.md")]
    struct Training;
    #[doc = include_str!("../../../book/src/events.md")]
    struct Events;
    #[doc = include_str!("../../../book/src/replay.md")]
    struct Replay;
    #[doc = include_str!("../../../book/src/response.md")]
    struct Response;
    #[doc = include_str!("../../../book/src/live.md")]
    struct Live;
    #[doc = include_str!("../../../book/src/configuration.md")]
    struct Configuration;
}
