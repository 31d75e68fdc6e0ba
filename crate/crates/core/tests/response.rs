use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use ransomguard::daemon::{ClockMode, ContentRoot, VecSource};
use ransomguard::response::{AuditLog, ResponseAction, ResponseError};
use ransomguard::{
    DaemonConfig, Detector, EventKind, HashBlocklist, OpenFlags, Outcome, Responder, ResponseMode, SyscallEvent,
    Verdict,
};

mod common;

const KILL_DEADLINE: Duration = Duration::from_millis(100);

const NOTE: &str = "All your files have been encrypted. Send 0.3 BTC to \
    1BoatSLRHtKNngkdXEeobR76b53LETtpyT and write to us with your personal ID \
    to receive the decryption key. Do not rename the encrypted files.";

fn sleeper() -> Child {
    Command::new("sleep").arg("30").stdout(Stdio::null()).spawn().unwrap()
}

fn action(mode: ResponseMode, pid: u32, comm: &str) -> ResponseAction {
    ResponseAction {
        mode,
        target_pid: pid,
        expected_comm: Some(comm.to_owned()),
        expected_identity: None,
        reason: Verdict::RansomNote { log_posterior_margin: 2.0 },
        issued_at_ns: 42,
        received_at: Instant::now(),
    }
}

fn wait_gone(child: &mut Child, deadline: Duration) -> Option<Duration> {
    let started = Instant::now();
    while started.elapsed() < deadline {
        if child.try_wait().unwrap().is_some() {
            return Some(started.elapsed());
        }
        std::thread::sleep(Duration::from_millis(1));
    }
    None
}

#[test]
fn dry_run_signals_nothing_and_audits_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let audit_path = dir.path().join("audit.jsonl");
    let responder = Responder::new([], Some(AuditLog::open(&audit_path).unwrap()));
    let mut child = sleeper();
    let result = responder.act(&action(ResponseMode::DryRun, child.id(), "sleep")).unwrap();
    assert_eq!(result.outcome, Outcome::Skipped);
    std::thread::sleep(Duration::from_millis(150));
    assert!(child.try_wait().unwrap().is_none(), "dry-run must leave the process alive");
    child.kill().unwrap();
    child.wait().unwrap();

    let log = std::fs::read_to_string(&audit_path).unwrap();
    let record: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(record["outcome"], "skipped");
    assert_eq!(record["mode"], "dry-run");
    assert_eq!(record["pid"], child.id());
}

#[test]
fn kill_terminates_sleeper_quickly() {
    let responder = Responder::new([], None);
    let mut child = sleeper();
    let started = Instant::now();
    let result = responder.act(&action(ResponseMode::Kill, child.id(), "sleep")).unwrap();
    assert_eq!(result.outcome, Outcome::Applied);
    let gone = wait_gone(&mut child, KILL_DEADLINE);
    assert!(gone.is_some(), "still running after {:?}", started.elapsed());
}

#[test]
fn refuses_own_pid_and_allowlist() {
    let me = std::process::id();
    let responder = Responder::new([1], None);
    assert!(matches!(
        responder.act(&action(ResponseMode::Kill, me, "x")),
        Err(ResponseError::SelfTarget(p)) if p == me
    ));
    assert!(matches!(
        responder.act(&action(ResponseMode::Kill, 1, "init")),
        Err(ResponseError::Allowlisted(1))
    ));
}

#[test]
fn reused_pid_is_not_signalled() {
    let responder = Responder::new([], None);
    let mut child = sleeper();
    let result = responder
        .act(&action(ResponseMode::Kill, child.id(), "not-sleep"))
        .unwrap();
    assert_eq!(result.outcome, Outcome::TargetAlreadyGone);
    assert!(child.try_wait().unwrap().is_none());
    child.kill().unwrap();
    child.wait().unwrap();
}

#[test]
fn detector_kills_process_that_drops_a_note() {
    let trained = common::trained();
    let dir = tempfile::tempdir().unwrap();
    let fs_root = dir.path().join("fs");
    std::fs::create_dir_all(fs_root.join("victim")).unwrap();
    std::fs::write(fs_root.join("victim/HOW_TO_DECRYPT.txt"), NOTE).unwrap();

    let mut child = sleeper();
    let pid = child.id();
    let create = |ts: u64, path: &str| {
        SyscallEvent::new(ts, pid, 1000, "sleep", EventKind::open(path, OpenFlags::from_raw(0o1101))).unwrap()
    };
    let mut events: Vec<SyscallEvent> = (0..9).map(|i| create(i + 1, &format!("/victim/f{i}.lck"))).collect();
    events.push(create(10, "/victim/HOW_TO_DECRYPT.txt"));

    let mut config = DaemonConfig::new(&trained.model_path);
    config.response = ResponseMode::Kill;
    let mut detector = Detector::new(
        config,
        HashBlocklist::empty(),
        trained.bundle.clone(),
        Responder::new([], None),
        ContentRoot::Sidecar(fs_root),
        ClockMode::Trace,
    )
    .unwrap();
    let started = Instant::now();
    let detections = detector.run(&mut VecSource::new(events), |_| {}).unwrap();
    assert_eq!(detections.len(), 1);
    assert_eq!(detections[0].response, Some(Outcome::Applied));
    assert!(wait_gone(&mut child, KILL_DEADLINE).is_some(), "{:?}", started.elapsed());
    assert_eq!(detector.report().actions_applied, 1);
}
