//! Synthetic replay scenarios: an event trace plus the file contents it
//! refers to, laid out as `<dir>/events.trace`, `<dir>/fs/...` and a
//! `<dir>/scenario.json` ground-truth record.
//!
//! All randomness comes from a ChaCha8 stream seeded by the caller, so the
//! same kind and parameters always produce byte-identical output.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::daemon::{ContentRoot, SIDECAR_DIR, TRACE_FILE};
use crate::event::{encode_trace_line, EventKind, OpenFlags, SyscallEvent};

pub const GROUND_TRUTH_FILE: &str = "scenario.json";
pub const ATTACKER_PID: u32 = 4242;
pub const ATTACKER_UID: u32 = 1000;

const O_RDONLY: u32 = 0;
const O_CREAT_WRITE: u32 = 0o1101; // O_WRONLY|O_CREAT|O_TRUNC

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Notes in every directory first, then encryption.
    NoteFirst,
    /// Each directory is encrypted, then a note is dropped in it.
    NotePerDirectory,
    /// A compiler/packaging workload: many new files, none of them notes.
    BenignBuild,
    /// Small encryption batches separated by long idle periods.
    StealthSlow,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::NoteFirst,
        ScenarioKind::NotePerDirectory,
        ScenarioKind::BenignBuild,
        ScenarioKind::StealthSlow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::NoteFirst => "note-first",
            ScenarioKind::NotePerDirectory => "note-per-directory",
            ScenarioKind::BenignBuild => "benign-build",
            ScenarioKind::StealthSlow => "stealth-slow",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown scenario kind {0:?} (expected note-first, note-per-directory, benign-build or stealth-slow)")]
pub struct UnknownKind(pub String);

impl FromStr for ScenarioKind {
    type Err = UnknownKind;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| UnknownKind(s.to_owned()))
    }
}

/// Generator parameters. `files` is the total number of victim (or build
/// output) files for NoteFirst and BenignBuild; `files_per_dir` applies to
/// NotePerDirectory and StealthSlow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub files: usize,
    pub dirs: usize,
    pub files_per_dir: usize,
    pub seed: u64,
    /// Write the note in a style far from typical ransom notes.
    pub out_of_distribution_note: bool,
}

impl ScenarioParams {
    pub fn defaults_for(kind: ScenarioKind) -> Self {
        let (files, dirs, files_per_dir) = match kind {
            ScenarioKind::NoteFirst => (100, 12, 0),
            ScenarioKind::NotePerDirectory => (0, 5, 20),
            ScenarioKind::BenignBuild => (200, 8, 0),
            ScenarioKind::StealthSlow => (0, 6, 3),
        };
        ScenarioParams {
            files,
            dirs,
            files_per_dir,
            seed: 1,
            out_of_distribution_note: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario parameters: {0}")]
    InvalidParams(&'static str),
    #[error("cannot write scenario: {0}")]
    Io(#[from] io::Error),
    #[error("cannot write ground truth: {0}")]
    Json(#[from] serde_json::Error),
}

/// What the generator did, for tests and evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub kind: ScenarioKind,
    pub params: ScenarioParams,
    /// `None` for benign scenarios.
    pub attacker_pid: Option<u32>,
    pub attacker_comm: Option<String>,
    pub attacker_exe: Option<PathBuf>,
    /// Note paths in creation order.
    pub notes: Vec<PathBuf>,
    /// 1-based positions of the notes among the attacker's creat-opens.
    pub note_creation_indices: Vec<u64>,
    pub attacker_creat_opens: u64,
    /// Encrypted files written in the first directory the attacker touched.
    pub first_dir_files: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub events: Vec<SyscallEvent>,
    /// Sidecar contents keyed by the absolute path used in the trace.
    pub files: BTreeMap<PathBuf, Vec<u8>>,
    pub truth: GroundTruth,
}

impl Scenario {
    pub fn trace_text(&self) -> String {
        let mut out = String::new();
        for ev in &self.events {
            out.push_str(&encode_trace_line(ev));
            out.push('\n');
        }
        out
    }

    /// Writes the trace, sidecar tree and ground truth under `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<(), ScenarioError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join(TRACE_FILE), self.trace_text())?;
        let root = ContentRoot::Sidecar(dir.join(SIDECAR_DIR));
        fs::create_dir_all(dir.join(SIDECAR_DIR))?;
        for (path, bytes) in &self.files {
            let target = root.resolve(path);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(target, bytes)?;
        }
        let mut truth = serde_json::to_string_pretty(&self.truth)?;
        truth.push('\n');
        fs::write(dir.join(GROUND_TRUTH_FILE), truth)?;
        Ok(())
    }
}

const DIR_NAMES: &[&str] = &[
    "Documents", "Pictures", "Projects", "Finance", "Photos", "Music", "Taxes", "Contracts", "Invoices", "Thesis",
    "Backups", "Recipes", "Travel", "Reports", "Designs", "Archive",
];
const FILE_STEMS: &[&str] = &[
    "budget", "notes", "holiday", "scan", "invoice", "draft", "letter", "summary", "chapter", "plan", "report",
    "photo", "contract", "minutes", "slides", "inventory",
];
const FILE_EXTS: &[&str] = &["docx", "xlsx", "pdf", "jpg", "png", "odt", "csv", "pptx", "txt", "zip"];
const NOTE_NAMES: &[&str] = &[
    "README_TO_RESTORE.txt",
    "HOW_TO_DECRYPT_FILES.txt",
    "RECOVER-FILES.txt",
    "!!!READ_ME!!!.txt",
    "DECRYPT_INSTRUCTIONS.txt",
];
const ATTACKER_COMMS: &[&str] = &["svchost", "update-helper", "kworker-sync", "dbus-cache", "x11-session"];
const LOCK_EXT: &str = "lck";

const NOTE_TEMPLATES: &[&str] = &[
    "ATTENTION!\n\nAll your files have been encrypted with strong military grade encryption (RSA-2048 and AES-256).\n\
Your documents, photos, databases and other important files are no longer accessible.\n\n\
The only way to recover your files is to purchase a unique private decryption key from us.\n\
Send {amount} BTC to the following bitcoin address:\n\n{btc}\n\n\
After payment contact us through our support portal {onion} and include your personal ID: {id}\n\n\
Do not rename encrypted files. Do not try to decrypt your data using third party software, it may cause permanent data loss.\n\
If you do not pay within 72 hours the price will double and your private key will be deleted forever.\n",
    "Hello!\n\nYour network has been breached and all data on this computer was encrypted.\n\
We also downloaded your confidential files. If you refuse to cooperate, your data will be published on our leak blog.\n\n\
To get the decryptor:\n1. Download Tor Browser\n2. Open {onion}\n3. Enter your key: {id}\n\n\
You can decrypt two files for free as a guarantee. Payment is accepted in bitcoin only: {btc}\n\
Any attempt to restore files yourself or contacting police will result in losing the key.\n",
    "!!! YOUR FILES ARE ENCRYPTED !!!\n\n\
What happened? Your files are locked with a unique key. Nobody can recover them without our decryption tool.\n\
How to recover? Pay the ransom of ${usd} in Bitcoin to wallet {btc}.\n\
Then write to our decryption service at {onion} with your ID {id}.\n\
Warning: deleting this note or the encrypted files will make recovery impossible. Time left to pay: 3 days.\n",
];

/// Out-of-distribution note: written in Spanish, no payment address, no
/// onion link. The English-trained model has almost no vocabulary for it.
const OOD_NOTE_TEMPLATE: &str = "Hola.\n\nSus archivos han sido cifrados. Para recuperarlos necesita una herramienta \
especial que solo nosotros tenemos. Escriba a nuestro contacto de Tox indicando el identificador {id}.\n\
Puede enviar dos archivos pequeños para una prueba gratuita. No modifique los archivos ni apague el equipo.\n\
Si no recibimos respuesta en cinco días, la herramienta será destruida.\n";

const BASE58: &[u8] = b"123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz";
const BASE32_LOWER: &[u8] = b"abcdefghijklmnopqrstuvwxyz234567";
const HEX: &[u8] = b"0123456789abcdef";

fn random_str(rng: &mut ChaCha8Rng, alphabet: &[u8], len: usize) -> String {
    (0..len).map(|_| *alphabet.choose(rng).unwrap() as char).collect()
}

fn render_note(rng: &mut ChaCha8Rng, ood: bool) -> String {
    let id = random_str(rng, HEX, 32);
    if ood {
        return OOD_NOTE_TEMPLATE.replace("{id}", &id);
    }
    let template = NOTE_TEMPLATES.choose(rng).unwrap();
    let btc = format!("1{}", random_str(rng, BASE58, 33));
    let onion = format!("http://{}.onion/pay", random_str(rng, BASE32_LOWER, 56));
    let amount = format!("0.{:02}", rng.random_range(5..60));
    let usd = format!("{}", rng.random_range(5..50) * 100);
    template
        .replace("{id}", &id)
        .replace("{btc}", &btc)
        .replace("{onion}", &onion)
        .replace("{amount}", &amount)
        .replace("{usd}", &usd)
}

struct Builder {
    rng: ChaCha8Rng,
    ts: u64,
    events: Vec<SyscallEvent>,
    files: BTreeMap<PathBuf, Vec<u8>>,
}

impl Builder {
    fn new(seed: u64) -> Self {
        Builder {
            rng: ChaCha8Rng::seed_from_u64(seed),
            ts: 1_000_000_000,
            events: Vec::new(),
            files: BTreeMap::new(),
        }
    }

    fn tick(&mut self) {
        self.ts += self.rng.random_range(20_000..2_000_000);
    }

    fn idle(&mut self, min_s: u64, max_s: u64) {
        self.ts += self.rng.random_range(min_s..max_s) * 1_000_000_000;
    }

    fn push(&mut self, pid: u32, uid: u32, comm: &str, kind: EventKind) {
        self.tick();
        let ev = SyscallEvent::new(self.ts, pid, uid, comm, kind).expect("generator emits valid events");
        self.events.push(ev);
    }

    fn exec(&mut self, pid: u32, uid: u32, comm: &str, exe: &str, contents: Vec<u8>) {
        self.files.insert(PathBuf::from(exe), contents);
        self.push(pid, uid, comm, EventKind::exec(exe));
    }

    fn read(&mut self, pid: u32, uid: u32, comm: &str, path: &str) {
        self.push(pid, uid, comm, EventKind::open(path, OpenFlags::from_raw(O_RDONLY)));
    }

    fn create(&mut self, pid: u32, uid: u32, comm: &str, path: &str, contents: Vec<u8>) {
        self.files.insert(PathBuf::from(path), contents);
        self.push(pid, uid, comm, EventKind::open(path, OpenFlags::from_raw(O_CREAT_WRITE)));
    }

    fn exit(&mut self, pid: u32, uid: u32, comm: &str) {
        self.push(pid, uid, comm, EventKind::Exit);
    }

    fn random_bytes(&mut self, min: usize, max: usize) -> Vec<u8> {
        let mut buf = vec![0u8; self.rng.random_range(min..max)];
        self.rng.fill_bytes(&mut buf);
        buf
    }

    fn fake_elf(&mut self) -> Vec<u8> {
        let mut bytes = b"\x7fELF\x02\x01\x01\0\0\0\0\0\0\0\0\0".to_vec();
        bytes.extend(self.random_bytes(4096, 8192));
        bytes
    }

    /// Unrelated desktop activity: shells, an editor saving a couple of files.
    fn background_noise(&mut self, rounds: usize) {
        for i in 0..rounds {
            let pid = 2000 + i as u32;
            self.exec(pid, 1000, "bash", "/usr/bin/bash", b"\x7fELF shell".to_vec());
            self.read(pid, 1000, "bash", "/home/alice/.bashrc");
            let note = format!("/home/alice/.cache/session-{i}.json");
            self.create(pid, 1000, "bash", &note, b"{\"last\":\"cd Projects\"}".to_vec());
            self.exit(pid, 1000, "bash");
        }
    }
}

struct Attack {
    pid: u32,
    comm: String,
    exe: String,
    note_name: &'static str,
    creations: u64,
    notes: Vec<PathBuf>,
    note_indices: Vec<u64>,
}

impl Attack {
    fn start(b: &mut Builder) -> Self {
        let comm = ATTACKER_COMMS.choose(&mut b.rng).unwrap().to_string();
        let note_name = *NOTE_NAMES.choose(&mut b.rng).unwrap();
        let exe = format!("/tmp/.cache-{}/{comm}", random_str(&mut b.rng, HEX, 8));
        let binary = b.fake_elf();
        b.exec(ATTACKER_PID, ATTACKER_UID, &comm, &exe, binary);
        Attack {
            pid: ATTACKER_PID,
            comm,
            exe,
            note_name,
            creations: 0,
            notes: Vec::new(),
            note_indices: Vec::new(),
        }
    }

    fn drop_note(&mut self, b: &mut Builder, dir: &str, ood: bool) {
        let path = format!("{dir}/{}", self.note_name);
        let note = render_note(&mut b.rng, ood).into_bytes();
        b.create(self.pid, ATTACKER_UID, &self.comm.clone(), &path, note);
        self.creations += 1;
        self.notes.push(PathBuf::from(path));
        self.note_indices.push(self.creations);
    }

    /// Reads a victim file and writes its encrypted replacement as `<name>.lck`.
    fn encrypt(&mut self, b: &mut Builder, dir: &str, index: usize) {
        let stem = FILE_STEMS.choose(&mut b.rng).unwrap();
        let ext = FILE_EXTS.choose(&mut b.rng).unwrap();
        let victim = format!("{dir}/{stem}_{index:03}.{ext}");
        let comm = self.comm.clone();
        b.read(self.pid, ATTACKER_UID, &comm, &victim);
        let ciphertext = b.random_bytes(512, 4096);
        b.create(self.pid, ATTACKER_UID, &comm, &format!("{victim}.{LOCK_EXT}"), ciphertext);
        self.creations += 1;
    }

    fn finish(self, b: &mut Builder, kind: ScenarioKind, params: ScenarioParams, first_dir_files: u64) -> GroundTruth {
        b.exit(self.pid, ATTACKER_UID, &self.comm);
        GroundTruth {
            kind,
            params,
            attacker_pid: Some(self.pid),
            attacker_comm: Some(self.comm),
            attacker_exe: Some(PathBuf::from(self.exe)),
            notes: self.notes,
            note_creation_indices: self.note_indices,
            attacker_creat_opens: self.creations,
            first_dir_files,
        }
    }
}

fn victim_dirs(b: &mut Builder, count: usize) -> Vec<String> {
    (0..count)
        .map(|i| {
            let name = DIR_NAMES.choose(&mut b.rng).unwrap();
            format!("/home/alice/{name}_{i:02}")
        })
        .collect()
}

fn validate(kind: ScenarioKind, p: &ScenarioParams) -> Result<(), ScenarioError> {
    if p.dirs == 0 {
        return Err(ScenarioError::InvalidParams("dirs must be positive"));
    }
    match kind {
        ScenarioKind::NoteFirst | ScenarioKind::BenignBuild if p.files == 0 => {
            Err(ScenarioError::InvalidParams("files must be positive"))
        }
        ScenarioKind::NotePerDirectory | ScenarioKind::StealthSlow if p.files_per_dir == 0 => {
            Err(ScenarioError::InvalidParams("files_per_dir must be positive"))
        }
        _ => Ok(()),
    }
}

pub fn gen_scenario(kind: ScenarioKind, params: ScenarioParams) -> Result<Scenario, ScenarioError> {
    validate(kind, &params)?;
    let mut b = Builder::new(params.seed);
    b.background_noise(3);
    let ood = params.out_of_distribution_note;

    let truth = match kind {
        ScenarioKind::NoteFirst => {
            let mut attack = Attack::start(&mut b);
            let dirs = victim_dirs(&mut b, params.dirs);
            for dir in &dirs {
                attack.drop_note(&mut b, dir, ood);
            }
            let mut first_dir_files = 0;
            for i in 0..params.files {
                let d = i % dirs.len();
                attack.encrypt(&mut b, &dirs[d], i);
                first_dir_files += u64::from(d == 0);
            }
            attack.finish(&mut b, kind, params, first_dir_files)
        }
        ScenarioKind::NotePerDirectory => {
            let mut attack = Attack::start(&mut b);
            let dirs = victim_dirs(&mut b, params.dirs);
            for dir in &dirs {
                for i in 0..params.files_per_dir {
                    attack.encrypt(&mut b, dir, i);
                }
                attack.drop_note(&mut b, dir, ood);
            }
            attack.finish(&mut b, kind, params, params.files_per_dir as u64)
        }
        ScenarioKind::StealthSlow => {
            let mut attack = Attack::start(&mut b);
            let dirs = victim_dirs(&mut b, params.dirs);
            for dir in &dirs {
                b.idle(600, 3600);
                for i in 0..params.files_per_dir {
                    attack.encrypt(&mut b, dir, i);
                }
                attack.drop_note(&mut b, dir, ood);
            }
            attack.finish(&mut b, kind, params, params.files_per_dir as u64)
        }
        ScenarioKind::BenignBuild => {
            benign_build(&mut b, &params);
            GroundTruth {
                kind,
                params,
                attacker_pid: None,
                attacker_comm: None,
                attacker_exe: None,
                notes: Vec::new(),
                note_creation_indices: Vec::new(),
                attacker_creat_opens: 0,
                first_dir_files: 0,
            }
        }
    };
    b.background_noise(2);
    Ok(Scenario {
        events: b.events,
        files: b.files,
        truth,
    })
}

const MODULES: &[&str] = &[
    "parser", "lexer", "codegen", "runtime", "alloc", "buffer", "config", "logging", "net", "storage", "index",
    "cache", "scheduler", "metrics", "crypto_util", "compress",
];

fn source_text(rng: &mut ChaCha8Rng, module: &str) -> String {
    let n = rng.random_range(2..6);
    let mut out = format!("/* {module}.c: {module} support routines. */\n#include \"{module}.h\"\n#include <stdlib.h>\n\n");
    for i in 0..n {
        out.push_str(&format!(
            "static int {module}_step_{i}(struct {module}_state *s, size_t len)\n{{\n\
             \tif (!s || len == 0)\n\t\treturn -1;\n\ts->offset += len;\n\treturn s->offset > s->limit ? 1 : 0;\n}}\n\n"
        ));
    }
    out
}

/// `make` runs one compiler process per module (each below any sensible
/// threshold), then a single packaging process writes many files: object
/// archives, generated headers, docs and a build log.
fn benign_build(b: &mut Builder, params: &ScenarioParams) {
    let (make_pid, uid) = (3000, 1000);
    b.exec(make_pid, uid, "make", "/usr/bin/make", b"\x7fELF make".to_vec());
    b.read(make_pid, uid, "make", "/home/alice/src/app/Makefile");

    for (i, module) in MODULES.iter().enumerate() {
        let pid = 3100 + i as u32;
        b.exec(pid, uid, "cc1", "/usr/lib/gcc/x86_64-linux-gnu/13/cc1", b"\x7fELF cc1".to_vec());
        let src = format!("/home/alice/src/app/src/{module}.c");
        let text = source_text(&mut b.rng, module);
        b.files.insert(PathBuf::from(&src), text.into_bytes());
        b.read(pid, uid, "cc1", &src);
        let obj = b.fake_elf();
        b.create(pid, uid, "cc1", &format!("/home/alice/src/app/build/{module}.o"), obj);
        let dep = format!(
            "build/{module}.o: src/{module}.c src/{module}.h include/common.h include/platform.h\n"
        );
        b.create(pid, uid, "cc1", &format!("/home/alice/src/app/build/{module}.d"), dep.into_bytes());
        b.exit(pid, uid, "cc1");
    }

    let pkg_pid = 3500;
    b.exec(pkg_pid, uid, "pkgtool", "/usr/bin/pkgtool", b"\x7fELF pkgtool".to_vec());
    let dirs: Vec<String> = (0..params.dirs)
        .map(|i| format!("/home/alice/src/app/dist/part{i:02}"))
        .collect();
    let mut log = String::from("packaging started\n");
    for i in 0..params.files {
        let dir = &dirs[i % dirs.len()];
        let module = MODULES.choose(&mut b.rng).unwrap();
        let (path, contents) = match i % 4 {
            0 => (format!("{dir}/lib{module}_{i:03}.a"), b.fake_elf()),
            1 => (format!("{dir}/{module}_{i:03}.c"), source_text(&mut b.rng, module).into_bytes()),
            2 => (
                format!("{dir}/{module}_{i:03}.h"),
                format!(
                    "#ifndef {up}_H\n#define {up}_H\n\nstruct {module}_state {{\n\tsize_t offset;\n\tsize_t limit;\n}};\n\n\
                     int {module}_init(struct {module}_state *s);\nvoid {module}_reset(struct {module}_state *s);\n\n#endif\n",
                    up = module.to_uppercase()
                )
                .into_bytes(),
            ),
            _ => (
                format!("{dir}/{module}_{i:03}.md"),
                format!(
                    "# {module}\n\nThe {module} component exposes a small C interface. Call {module}_init before use \
                     and {module}_reset when the state is no longer needed. Build with make and run the unit \
                     tests with make check. Configuration options are listed in the manual page.\n"
                )
                .into_bytes(),
            ),
        };
        log.push_str(&format!("wrote {path}\n"));
        b.create(pkg_pid, uid, "pkgtool", &path, contents);
    }
    log.push_str("packaging finished without errors\n");
    b.create(pkg_pid, uid, "pkgtool", "/home/alice/src/app/dist/build.log", log.into_bytes());
    b.exit(pkg_pid, uid, "pkgtool");
    b.exit(make_pid, uid, "make");
}
