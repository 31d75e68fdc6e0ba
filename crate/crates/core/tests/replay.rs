use std::path::Path;
use std::time::{Duration, Instant};

use ransomguard::event::encode_trace_line;
use ransomguard::{
    gen_scenario, replay, DaemonConfig, Detection, EventKind, OpenFlags, RunOutcome, Scenario, ScenarioKind,
    ScenarioParams, Sha256Digest, SyscallEvent, Trigger,
};

mod common;

const REPLAY_BUDGET: Duration = Duration::from_secs(5);

fn scenario(kind: ScenarioKind, seed: u64, ood: bool) -> Scenario {
    let mut params = ScenarioParams::defaults_for(kind);
    params.seed = seed;
    params.out_of_distribution_note = ood;
    gen_scenario(kind, params).expect("scenario generates")
}

fn run(sc: &Scenario, dir: &Path, config: DaemonConfig) -> RunOutcome {
    sc.write_to(dir).unwrap();
    let started = Instant::now();
    let outcome = replay(config, dir).expect("replay succeeds");
    assert!(started.elapsed() < REPLAY_BUDGET, "replay took {:?}", started.elapsed());
    outcome
}

fn default_config() -> DaemonConfig {
    DaemonConfig::new(&common::trained().model_path)
}

fn note_detections(out: &RunOutcome) -> Vec<&Detection> {
    out.detections
        .iter()
        .filter(|d| matches!(d.trigger, Trigger::RansomNote { .. }))
        .collect()
}

#[test]
fn note_first_is_caught_before_any_file_is_touched() {
    for seed in 1..=5 {
        let sc = scenario(ScenarioKind::NoteFirst, seed, false);
        let dir = tempfile::tempdir().unwrap();
        let out = run(&sc, dir.path(), default_config());
        let notes = note_detections(&out);
        assert_eq!(notes.len(), 1, "seed {seed}");
        assert_eq!(notes[0].affected_files, 0, "seed {seed}");
        assert_eq!(Some(notes[0].pid), sc.truth.attacker_pid);
    }
}

#[test]
fn note_per_directory_detected_at_first_note() {
    let threshold = u64::from(default_config().monitor.threshold_t);
    for seed in 1..=5 {
        let sc = scenario(ScenarioKind::NotePerDirectory, seed, false);
        let dir = tempfile::tempdir().unwrap();
        let out = run(&sc, dir.path(), default_config());
        let notes = note_detections(&out);
        assert_eq!(notes.len(), 1, "seed {seed}");
        let first_note = sc.truth.note_creation_indices[0];
        assert!(notes[0].creation_count >= first_note);
        assert!(notes[0].creation_count - first_note <= threshold + 1, "seed {seed}");
        assert!(notes[0].affected_files <= sc.truth.first_dir_files, "seed {seed}");
    }
}

#[test]
fn stealth_slow_is_detected_despite_idle_gaps() {
    let sc = scenario(ScenarioKind::StealthSlow, 3, false);
    let dir = tempfile::tempdir().unwrap();
    let out = run(&sc, dir.path(), default_config());
    assert_eq!(note_detections(&out).len(), 1);
}

#[test]
fn benign_build_raises_nothing() {
    for seed in 1..=3 {
        let sc = scenario(ScenarioKind::BenignBuild, seed, false);
        let dir = tempfile::tempdir().unwrap();
        let out = run(&sc, dir.path(), default_config());
        assert!(out.detections.is_empty(), "seed {seed}: {:?}", out.detections);
        assert!(out.report.candidates_scanned > 0);
    }
}

#[test]
fn out_of_distribution_note_is_missed() {
    let sc = scenario(ScenarioKind::NoteFirst, 1, true);
    let dir = tempfile::tempdir().unwrap();
    let out = run(&sc, dir.path(), default_config());
    assert!(out.detections.is_empty());
    assert!(out.report.candidates_scanned > 0);
    assert!(out
        .report
        .flags
        .iter()
        .any(|f| f == ransomguard::daemon::FLAG_SCANNED_NONE_POSITIVE));
}

#[test]
fn blocklist_adds_static_detection_without_changing_dynamic_phase() {
    let sc = scenario(ScenarioKind::NoteFirst, 2, false);
    let exe = sc.truth.attacker_exe.clone().unwrap();
    let digest = Sha256Digest::of_bytes(&sc.files[&exe]);

    let dir = tempfile::tempdir().unwrap();
    let list = dir.path().join("blocklist.txt");
    std::fs::write(&list, format!("{digest}\n")).unwrap();
    let mut with_list = default_config();
    with_list.blocklist_path = Some(list);
    let hit = run(&sc, &dir.path().join("a"), with_list);

    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "").unwrap();
    let mut without = default_config();
    without.blocklist_path = Some(empty);
    let miss = run(&sc, &dir.path().join("b"), without);

    let statics: Vec<_> = hit
        .detections
        .iter()
        .filter(|d| matches!(d.trigger, Trigger::ExecHash { .. }))
        .collect();
    assert_eq!(statics.len(), 1);
    assert!(matches!(statics[0].verdict, ransomguard::Verdict::KnownMalware { .. }));
    assert_eq!(hit.report.known_malware_detections, 1);

    assert_eq!(miss.report.known_malware_detections, 0);
    assert_eq!(note_detections(&hit), note_detections(&miss));
}

#[test]
fn malformed_line_is_reported_by_number() {
    let sc = scenario(ScenarioKind::BenignBuild, 1, false);
    let dir = tempfile::tempdir().unwrap();
    sc.write_to(dir.path()).unwrap();
    let trace = dir.path().join("events.trace");
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[6] = r#"{"ts_ns": 5, "pid": "seven"}"#.to_owned();
    std::fs::write(&trace, lines.join("\n")).unwrap();

    let err = replay(default_config(), dir.path()).unwrap_err().to_string();
    assert!(err.contains("line 7"), "{err}");
}

#[test]
fn identical_inputs_give_identical_reports() {
    let sc = scenario(ScenarioKind::NotePerDirectory, 4, false);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run(&sc, a.path(), default_config());
    let second = run(&sc, b.path(), default_config());
    assert_eq!(first.report, second.report);
    assert_eq!(
        serde_json::to_string(&first.detections).unwrap(),
        serde_json::to_string(&second.detections).unwrap()
    );
}

#[test]
fn replay_throughput_without_scans() {
    const EVENTS: u64 = 200_000;
    let mut trace = String::new();
    let mut ts = 0u64;
    let mut emitted = 0u64;
    let mut pid = 10_000u32;
    while emitted < EVENTS {
        pid += 1;
        let mut push = |kind: EventKind| {
            ts += 1_000;
            let ev = SyscallEvent::new(ts, pid, 1000, "worker", kind).unwrap();
            trace.push_str(&encode_trace_line(&ev));
            trace.push('\n');
        };
        for i in 0..48 {
            let flags = if i % 3 == 0 { 0o1101 } else { 0o0 };
            push(EventKind::open(format!("/srv/data/{pid}/f{i}"), OpenFlags::from_raw(flags)));
        }
        push(EventKind::Exit);
        emitted += 49;
    }
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("events.trace"), &trace).unwrap();

    // every candidate lands outside the watch scope, so nothing is scanned
    let mut config = default_config();
    config.watch_scope = vec!["/nonexistent-scope".into()];
    let started = Instant::now();
    let out = replay(config, dir.path()).unwrap();
    let rate = out.report.events as f64 / started.elapsed().as_secs_f64();
    let summary = format!("{} events at {rate:.0} events/s", out.report.events);
    eprintln!("{summary}");
    assert_eq!(out.report.candidates_scanned, 0);
    assert!(out.report.candidates_out_of_scope > 0);
    assert!(rate >= 10_000.0, "{summary}");
}
