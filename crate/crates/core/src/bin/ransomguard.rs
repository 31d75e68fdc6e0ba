use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use ransomguard::config::DaemonConfig;
use ransomguard::daemon::{ChannelSource, ClockMode, ContentRoot, Detection, Detector, RunOutcome};
use ransomguard::hashset::{hash_file, HashBlocklist};
use ransomguard::model_store::{load_bundle, save_bundle};
use ransomguard::nlp::classify::{classify_file, DEFAULT_MAX_SCAN_BYTES};
use ransomguard::nlp::pipeline::{cross_validate, load_corpus, train_pipeline, TrainConfig, DEFAULT_FOLDS};
use ransomguard::response::ResponseMode;
use ransomguard::scenario::{gen_scenario, ScenarioKind, ScenarioParams};
use ransomguard::Verdict;

#[derive(Parser)]
#[command(name = "ransomguard", version, about = "Ransomware detection agent", arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the note classifier and write a model bundle.
    Train {
        corpus: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
        /// Cross-validation folds to report alongside the hold-out metrics (0 skips).
        #[arg(long, default_value_t = DEFAULT_FOLDS)]
        folds: usize,
        /// Also write metrics as JSON.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Stratified k-fold cross-validation.
    Cv {
        corpus: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FOLDS)]
        folds: usize,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Classify one file with a model bundle. Exits 1 on a ransom note.
    Classify {
        file: PathBuf,
        #[arg(short, long)]
        model: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_SCAN_BYTES)]
        max_scan_bytes: usize,
    },
    /// Consume kernel records (from the probe loader) and respond to detections.
    Run {
        #[arg(long, required = true)]
        live: bool,
        /// Record stream to read; defaults to standard input.
        #[arg(long)]
        records: Option<PathBuf>,
        #[command(flatten)]
        daemon: DaemonArgs,
    },
    /// Replay a recorded trace directory (events.trace plus fs/).
    Replay {
        trace: PathBuf,
        #[command(flatten)]
        daemon: DaemonArgs,
    },
    /// Write a synthetic scenario to a directory.
    GenScenario {
        kind: ScenarioKind,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        files: Option<usize>,
        #[arg(long)]
        dirs: Option<usize>,
        #[arg(long)]
        files_per_dir: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Use a note far from the training distribution.
        #[arg(long)]
        ood_note: bool,
    },
    /// Blocklist utilities.
    Hashset {
        #[command(subcommand)]
        command: HashsetCommand,
    },
}

#[derive(Subcommand)]
enum HashsetCommand {
    /// Hash a file and look it up. Exits 1 on a match.
    Check {
        file: PathBuf,
        #[arg(short, long)]
        blocklist: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.7)]
    train_ratio: f64,
    #[arg(short, long, default_value_t = 400)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            train_ratio: self.train_ratio,
            seed: self.seed,
            k: self.k,
            alpha: self.alpha,
        }
    }
}

#[derive(Args)]
struct DaemonArgs {
    /// TOML config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    model: Option<PathBuf>,
    #[arg(short, long)]
    blocklist: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<u32>,
    #[arg(long)]
    response: Option<ResponseMode>,
    /// Required for kill and suspend.
    #[arg(long)]
    enforce: bool,
    #[arg(long = "allow-pid")]
    allow_pids: Vec<u32>,
    #[arg(long)]
    audit_log: Option<PathBuf>,
    #[arg(long)]
    max_scan_bytes: Option<usize>,
    /// Only classify new files under this prefix (repeatable).
    #[arg(long = "watch")]
    watch_scope: Vec<PathBuf>,
    /// Write the final report and detections as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

impl DaemonArgs {
    fn resolve(&self) -> Result<DaemonConfig> {
        let mut cfg = match (&self.config, &self.model) {
            (Some(path), _) => DaemonConfig::load(path)?,
            (None, Some(model)) => DaemonConfig::new(model),
            (None, None) => return Err(anyhow!("a model is required (--model or --config)")),
        };
        if let Some(model) = &self.model {
            cfg.model_path = model.clone();
        }
        if let Some(b) = &self.blocklist {
            cfg.blocklist_path = Some(b.clone());
        }
        if let Some(t) = self.threshold {
            cfg.monitor.threshold_t = t;
        }
        if let Some(mode) = self.response {
            cfg.response = mode;
        }
        cfg.allow_pids.extend(&self.allow_pids);
        if let Some(a) = &self.audit_log {
            cfg.audit_log = Some(a.clone());
        }
        if let Some(n) = self.max_scan_bytes {
            cfg.max_scan_bytes = n;
        }
        if !self.watch_scope.is_empty() {
            cfg.watch_scope = self.watch_scope.clone();
        }
        cfg.validate()?;
        if cfg.response.is_enforcing() && !self.enforce {
            return Err(anyhow!("response mode {} requires --enforce", cfg.response));
        }
        Ok(cfg)
    }
}

fn print_detection(d: &Detection) {
    let line = serde_json::json!({ "detection": d });
    let mut out = io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn finish_run(outcome: &RunOutcome, report_path: Option<&Path>) -> Result<ExitCode> {
    println!("{}", serde_json::json!({ "report": outcome.report, "timings": outcome.timings }));
    if let Some(path) = report_path {
        let mut text = serde_json::to_string_pretty(outcome)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("writing report {}", path.display()))?;
    }
    Ok(if outcome.detections.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run_daemon(
    args: &DaemonArgs,
    root: ContentRoot,
    clock: ClockMode,
    source: &mut impl ransomguard::EventSource,
) -> Result<ExitCode> {
    let cfg = args.resolve()?;
    let mut detector = Detector::from_config(cfg, root, clock)?;
    let result = detector.run(source, print_detection);
    let detections = match result {
        Ok(d) => d,
        Err(e) => {
            // Flush what was gathered before the source failed.
            let report = detector.report().clone();
            eprintln!("event source failed: {e}");
            println!("{}", serde_json::json!({ "report": report, "timings": detector.timings() }));
            return Err(e.into());
        }
    };
    let outcome = detector.into_outcome(detections);
    finish_run(&outcome, args.report.as_deref())
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train {
            corpus,
            output,
            train,
            folds,
            metrics,
        } => {
            let docs = load_corpus(&corpus)?;
            let config = train.config();
            let (bundle, mut m) = train_pipeline(&docs, &config)?;
            if folds > 0 {
                let cv = cross_validate(&docs, folds, &config)?;
                m.cv_mean = Some(cv.mean);
                m.cv_scores = cv.fold_accuracies;
            }
            save_bundle(&bundle, &output)?;
            println!("{} documents, {} features selected", docs.len(), bundle.selector.selected.len());
            println!("{m}");
            println!("model written to {}", output.display());
            if let Some(path) = metrics {
                fs::write(&path, serde_json::to_string_pretty(&m)? + "\n")?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Cv { corpus, folds, train } => {
            let docs = load_corpus(&corpus)?;
            let cv = cross_validate(&docs, folds, &train.config())?;
            for (i, acc) in cv.fold_accuracies.iter().enumerate() {
                println!("fold {:>2}: {acc:.4}", i + 1);
            }
            println!("mean: {:.4} (k={folds}, seed {})", cv.mean, cv.seed);
            Ok(ExitCode::SUCCESS)
        }
        Command::Classify {
            file,
            model,
            max_scan_bytes,
        } => {
            let bundle = load_bundle(&model).with_context(|| format!("loading {}", model.display()))?;
            let verdict = classify_file(&bundle, &file, max_scan_bytes);
            match &verdict {
                Verdict::RansomNote { log_posterior_margin } => println!("ransom {log_posterior_margin:.6}"),
                Verdict::Benign {
                    log_posterior_margin: Some(m),
                } => println!("benign {m:.6}"),
                other => println!("{other}"),
            }
            Ok(if verdict.is_positive() { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Command::Run { live: _, records, daemon } => {
            let shutdown = Arc::new(AtomicBool::new(false));
            for sig in [signal_hook::consts::SIGINT, signal_hook::consts::SIGTERM] {
                signal_hook::flag::register(sig, Arc::clone(&shutdown))?;
            }
            let mut source = match &records {
                Some(path) => {
                    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
                    ChannelSource::spawn(f, shutdown)
                }
                None => ChannelSource::spawn(io::stdin(), shutdown),
            };
            run_daemon(&daemon, ContentRoot::Host, ClockMode::Wall, &mut source)
        }
        Command::Replay { trace, daemon } => {
            let (mut source, root) = open_trace(&trace)?;
            run_daemon(&daemon, root, ClockMode::Trace, &mut source)
        }
        Command::GenScenario {
            kind,
            output,
            files,
            dirs,
            files_per_dir,
            seed,
            ood_note,
        } => {
            let d = ScenarioParams::defaults_for(kind);
            let params = ScenarioParams {
                files: files.unwrap_or(d.files),
                dirs: dirs.unwrap_or(d.dirs),
                files_per_dir: files_per_dir.unwrap_or(d.files_per_dir),
                seed,
                out_of_distribution_note: ood_note,
            };
            let scenario = gen_scenario(kind, params)?;
            scenario.write_to(&output)?;
            println!("{} events written to {}", scenario.events.len(), output.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Hashset {
            command: HashsetCommand::Check { file, blocklist },
        } => {
            let set = HashBlocklist::load(&blocklist)?;
            let digest = hash_file(&file).with_context(|| format!("hashing {}", file.display()))?;
            if set.contains(&digest) {
                println!("MATCH {digest}");
                Ok(ExitCode::from(1))
            } else {
                println!("CLEAN {digest}");
                Ok(ExitCode::SUCCESS)
            }
        }
    }
}

/// Accepts a trace directory or the `events.trace` file inside one.
fn open_trace(
    path: &Path,
) -> Result<(ransomguard::daemon::TraceSource<io::BufReader<fs::File>>, ContentRoot)> {
    use ransomguard::daemon::{TraceSource, SIDECAR_DIR, TRACE_FILE};
    let (trace, dir) = if path.is_dir() {
        (path.join(TRACE_FILE), path.to_path_buf())
    } else {
        (path.to_path_buf(), path.parent().map(Path::to_path_buf).unwrap_or_default())
    };
    let source = TraceSource::open(&trace).with_context(|| format!("opening {}", trace.display()))?;
    Ok((source, ContentRoot::Sidecar(dir.join(SIDECAR_DIR))))
}

/// Exit codes: 0 no detection, 1 detection, 2 usage or configuration error.
fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
