// SPDX-License-Identifier: Apache-2.0

//! Command-line flow: obfuscate, sweep, verify, program, report and attack.
//!
//! Exit codes: 0 ok, 2 parse error, 3 config error, 4 internal invariant
//! violation, 5 counterexample found.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use easic::attacks::{
    brute_force_key, composition_attack, corpus_union, fit_trendline, pattern_histogram, search_space_of,
    AttackError, PatternHistogram, Scope, DEFAULT_MAX_KEY_BITS, DEFAULT_THRESHOLD,
};
use easic::bitstream::{program, serialize, Bitstream, ConfigState};
use easic::netlist::{emit_blif, emit_verilog, stats};
use easic::obfuscate::{gen_case_constraints, origin_masks_from_trace, run_obfuscation, sweep, sweep_csv, ObfuscationConfig};
use easic::sim::{check_compiled, EquivalencePolicy, Simulator};
use easic::{corpus, parse_blif, Library, LutMask, Netlist};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const LIB_ENV: &str = "EASIC_LIB";

pub const EASIC_FILES: [&str; 9] = [
    "easic.v",
    "easic.blif",
    "bitstream.ebs",
    "chain.json",
    "timing.json",
    "area.json",
    "constraints.json",
    "trace.json",
    "stats.json",
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("counterexample: {0}")]
    Counterexample(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Config(_) => 3,
            CliError::Internal(_) => 4,
            CliError::Counterexample(_) => 5,
        }
    }
}

impl From<AttackError> for CliError {
    fn from(e: AttackError) -> Self {
        match e {
            AttackError::Format(_) => CliError::Parse(e.to_string()),
            AttackError::Exhausted(_) | AttackError::Sim(_) => CliError::Internal(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Parser)]
#[command(name = "easic", version, about = "Timing-driven LUT obfuscation for hybrid eASIC netlists")]
pub struct Cli {
    /// Worker threads for sweeps and corpus analyses.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert LUTs to static logic and write the eASIC artifacts.
    Obfuscate(ObfuscateArgs),
    /// CSV of timing and area over several obfuscation levels.
    Sweep(SweepArgs),
    /// Program an eASIC directory with its bitstream and check it against the golden design.
    Verify(VerifyArgs),
    /// Shift a bitstream through the chain and read it back.
    Program(ProgramArgs),
    /// Summary of an eASIC directory.
    Report(ReportArgs),
    /// Write the built-in corpus as BLIF plus histogram JSON.
    Corpus(CorpusArgs),
    /// Pattern histogram of a BLIF design, in corpus database format.
    Histogram(HistogramArgs),
    #[command(subcommand)]
    Attack(AttackCommand),
}

#[derive(Debug, Args)]
pub struct LibArg {
    /// Technology library JSON; defaults to $EASIC_LIB, then the built-in library.
    #[arg(long)]
    pub lib: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ObfuscateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Percentage of LUTs that stays reconfigurable.
    #[arg(long)]
    pub obf: f64,
    #[command(flatten)]
    pub lib: LibArg,
    #[arg(long, default_value = "easic_out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated obfuscation levels.
    #[arg(long, value_delimiter = ',', default_value = "100,98,95,92,89,86")]
    pub levels: Vec<f64>,
    #[command(flatten)]
    pub lib: LibArg,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub golden: PathBuf,
    #[arg(long)]
    pub easic: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Report destination; `<easic>/verify.json` when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProgramArgs {
    #[arg(long)]
    pub easic: PathBuf,
    /// Bitstream to shift in; `<easic>/bitstream.ebs` when absent.
    #[arg(long)]
    pub bitstream: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub easic: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HistogramArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScopeArg {
    Whole,
    Static,
    Reconfigurable,
}

impl From<ScopeArg> for Scope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Whole => Scope::Whole,
            ScopeArg::Static => Scope::Static,
            ScopeArg::Reconfigurable => Scope::Reconfigurable,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum AttackCommand {
    /// Pattern histogram, trendline and search-space report.
    Structural {
        /// Plain BLIF design; alternative to --easic.
        #[arg(long, conflicts_with = "easic")]
        input: Option<PathBuf>,
        #[arg(long)]
        easic: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "static")]
        scope: ScopeArg,
        #[arg(long, default_value_t = 3)]
        degree: usize,
        /// Corpus database directory of histogram JSON files.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Corpus design whose patterns narrow the search space.
        #[arg(long, requires = "corpus")]
        matched: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Correlate the static portion against a corpus.
    Composition {
        #[arg(long)]
        easic: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive key search against an oracle design.
    Bruteforce {
        #[arg(long)]
        easic: PathBuf,
        #[arg(long)]
        golden: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_KEY_BITS)]
        max_key_bits: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match cli.command {
        Command::Obfuscate(a) => cmd_obfuscate(&a).map(|_| ()),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Program(a) => cmd_program(&a),
        Command::Report(a) => cmd_report(&a),
        Command::Corpus(a) => cmd_corpus(&a),
        Command::Histogram(a) => cmd_histogram(&a),
        Command::Attack(a) => cmd_attack(a),
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 3 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("easic: {e}");
            e.exit_code()
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read(path)?).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn write(path: &Path, data: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, data).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn to_json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON value");
    s.push('\n');
    s
}

fn load_blif(path: &Path) -> Result<Netlist> {
    parse_blif(&read_text(path)?).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn load_json(path: &Path) -> Result<Value> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// Library from --lib, then $EASIC_LIB, then the built-in default. The
/// second value identifies it in manifests.
pub fn load_library(arg: &LibArg) -> Result<(Library, Value)> {
    let path = arg.lib.clone().or_else(|| std::env::var_os(LIB_ENV).map(PathBuf::from));
    match path {
        None => Ok((Library::default_library(), json!("default"))),
        Some(p) => {
            let text = read_text(&p)?;
            let lib = Library::load(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            Ok((lib, json!({ "sha256": sha256_hex(text.as_bytes()) })))
        }
    }
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

pub fn cmd_obfuscate(a: &ObfuscateArgs) -> Result<Value> {
    let input = read(&a.input)?;
    let netlist = load_blif(&a.input)?;
    if !(0.0..=100.0).contains(&a.obf) {
        return Err(CliError::Config(format!("--obf {} is outside [0, 100]", a.obf)));
    }
    let (lib, lib_id) = load_library(&a.lib)?;
    let config = ObfuscationConfig { obf_percent: a.obf, seed: a.seed };
    let r = run_obfuscation(&netlist, config, &lib).map_err(|e| CliError::Config(e.to_string()))?;

    let bits = serialize(&r.netlist);
    if bits.total_len() != r.l_re.iter().map(|id| 1usize << lut_width(&r.netlist, id)).sum::<usize>() {
        return Err(CliError::Internal("bitstream length disagrees with the reconfigurable set".into()));
    }
    let readback = program(ConfigState::blank(&r.netlist), &bits).map_err(|e| CliError::Internal(e.to_string()))?;
    let expected: BTreeMap<String, Option<LutMask>> =
        r.netlist.reconfigurable_luts().map(|c| (c.id().to_string(), c.lut_mask())).collect();
    if readback.masks() != expected {
        return Err(CliError::Internal("bitstream readback differs from the netlist".into()));
    }
    if r.l_st.len() != r.target {
        return Err(CliError::Internal(format!("converted {} LUTs, target {}", r.l_st.len(), r.target)));
    }

    let internal = |e: easic::NetlistError| CliError::Internal(e.to_string());
    let files: Vec<(&str, Vec<u8>)> = vec![
        ("easic.v", emit_verilog(&r.netlist).map_err(internal)?.into_bytes()),
        ("easic.blif", emit_blif(&r.netlist).map_err(internal)?.into_bytes()),
        ("bitstream.ebs", bits.to_bytes()),
        ("chain.json", to_json_text(&serde_json::to_value(bits.manifest()).expect("manifest")).into_bytes()),
        ("timing.json", to_json_text(&r.timing.to_json()).into_bytes()),
        ("area.json", to_json_text(&r.area.to_json()).into_bytes()),
        (
            "constraints.json",
            to_json_text(&json!({ "case_constraints": gen_case_constraints(&r.netlist) })).into_bytes(),
        ),
        ("trace.json", to_json_text(&r.trace_json()).into_bytes()),
        ("stats.json", to_json_text(&serde_json::to_value(stats(&r.netlist)).expect("stats")).into_bytes()),
    ];
    fs::create_dir_all(&a.out).map_err(|e| CliError::Config(format!("{}: {e}", a.out.display())))?;
    let mut outputs = Vec::new();
    for (name, data) in &files {
        write(&a.out.join(name), data)?;
        outputs.push(json!({ "file": name, "sha256": sha256_hex(data) }));
    }
    let manifest = json!({
        "tool": "easic",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "obfuscate",
        "inputs": [{ "file": file_name(&a.input), "sha256": sha256_hex(&input) }],
        "config": { "obf_percent": a.obf, "seed": a.seed, "library": lib_id },
        "seed": a.seed,
        "outputs": outputs,
    });
    write(&a.out.join("manifest.json"), to_json_text(&manifest))?;
    Ok(manifest)
}

fn lut_width(n: &Netlist, id: &str) -> u8 {
    n.cell(id).and_then(|c| c.lut_mask()).map_or(0, |m| m.width())
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let netlist = load_blif(&a.input)?;
    if let Some(p) = a.levels.iter().find(|p| !(0.0..=100.0).contains(*p)) {
        return Err(CliError::Config(format!("level {p} is outside [0, 100]")));
    }
    let (lib, _) = load_library(&a.lib)?;
    let rows = sweep(&netlist, &a.levels, &lib).map_err(|e| CliError::Config(e.to_string()))?;
    let csv = sweep_csv(&rows);
    match &a.out {
        Some(p) => write(p, csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

/// Obfuscated netlist and its bitstream from an output directory.
pub fn load_easic(dir: &Path, bitstream: Option<&Path>) -> Result<(Netlist, Bitstream)> {
    let netlist = load_blif(&dir.join("easic.blif"))?;
    let ebs = bitstream.map_or_else(|| dir.join("bitstream.ebs"), Path::to_path_buf);
    let bits = Bitstream::from_bytes(&read(&ebs)?).map_err(|e| CliError::Config(format!("{}: {e}", ebs.display())))?;
    Ok((netlist, bits))
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<()> {
    let golden = load_blif(&a.golden)?;
    let (easic, bits) = load_easic(&a.easic, None)?;
    let state = program(ConfigState::blank(&easic), &bits).map_err(|e| CliError::Config(e.to_string()))?;
    let sa = Simulator::new(&golden).map_err(|e| CliError::Config(e.to_string()))?;
    let sb = Simulator::programmed(&easic, &state).map_err(|e| CliError::Config(e.to_string()))?;
    let policy = EquivalencePolicy { seed: a.seed, ..EquivalencePolicy::default() };
    let report = check_compiled(&sa, &sb, policy).map_err(|e| CliError::Config(e.to_string()))?;
    let out = a.out.clone().unwrap_or_else(|| a.easic.join("verify.json"));
    write(&out, to_json_text(&report.to_json()))?;
    match &report.counterexample {
        None => Ok(()),
        Some(cx) => Err(CliError::Counterexample(format!(
            "outputs differ at cycle {} (report in {})",
            cx.cycle,
            out.display()
        ))),
    }
}

pub fn cmd_program(a: &ProgramArgs) -> Result<()> {
    let (easic, bits) = load_easic(&a.easic, a.bitstream.as_deref())?;
    let state = program(ConfigState::blank(&easic), &bits).map_err(|e| CliError::Config(e.to_string()))?;
    let readback: Vec<Value> = state
        .readback()
        .into_iter()
        .map(|(id, m)| json!({ "id": id, "mask": m.map(|m| m.to_hex()) }))
        .collect();
    let matches = bits.masks().map_err(|e| CliError::Config(e.to_string()))?.into_iter().all(|(id, m)| {
        state.masks().get(&id) == Some(&Some(m))
    });
    if !matches {
        return Err(CliError::Internal("readback differs from the shifted bitstream".into()));
    }
    write(&a.easic.join("readback.json"), to_json_text(&json!({ "design": bits.design, "luts": readback })))
}

pub fn cmd_report(a: &ReportArgs) -> Result<()> {
    let mut v = serde_json::Map::new();
    for f in ["stats.json", "timing.json", "area.json"] {
        let doc = load_json(&a.easic.join(f))?;
        v.insert(f.trim_end_matches(".json").to_string(), doc);
    }
    let trace = load_json(&a.easic.join("trace.json"))?;
    for k in ["design", "obf_percent", "target", "fallback_count"] {
        v.insert(k.to_string(), trace[k].clone());
    }
    println!("{}", to_json_text(&Value::Object(v)).trim_end());
    Ok(())
}

pub fn cmd_corpus(a: &CorpusArgs) -> Result<()> {
    fs::create_dir_all(&a.out).map_err(|e| CliError::Config(format!("{}: {e}", a.out.display())))?;
    for n in corpus::corpus() {
        let blif = emit_blif(&n).map_err(|e| CliError::Internal(e.to_string()))?;
        write(&a.out.join(format!("{}.blif", n.name)), blif)?;
        let h = pattern_histogram(&n, Scope::Whole, None)?;
        write(&a.out.join(format!("{}.hist.json", n.name)), to_json_text(&h.to_json()))?;
    }
    Ok(())
}

pub fn cmd_histogram(a: &HistogramArgs) -> Result<()> {
    let n = load_blif(&a.input)?;
    let h = pattern_histogram(&n, Scope::Whole, None)?;
    let text = to_json_text(&h.to_json());
    match &a.out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Histograms in a corpus directory, ordered by file name.
pub fn load_corpus(dir: &Path) -> Result<Vec<PatternHistogram>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Config(format!("corpus {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Config(format!("corpus {} holds no histogram files", dir.display())));
    }
    paths.iter().map(|p| Ok(PatternHistogram::from_json(&load_json(p)?)?)).collect()
}

/// Static-portion histogram and origin masks of an eASIC directory.
fn easic_histogram(dir: &Path, scope: Scope) -> Result<(Netlist, BTreeMap<String, LutMask>, PatternHistogram)> {
    let netlist = load_blif(&dir.join("easic.blif"))?;
    let trace = load_json(&dir.join("trace.json"))?;
    let origin = origin_masks_from_trace(&trace).map_err(CliError::Parse)?;
    let mut h = pattern_histogram(&netlist, scope, Some(&origin))?;
    h.obf_percent = trace["obf_percent"].as_f64();
    Ok((netlist, origin, h))
}

fn emit(out: Option<&Path>, v: &Value) -> Result<()> {
    match out {
        Some(p) => write(p, to_json_text(v)),
        None => {
            println!("{}", to_json_text(v).trim_end());
            Ok(())
        }
    }
}

pub fn cmd_attack(a: AttackCommand) -> Result<()> {
    match a {
        AttackCommand::Structural { input, easic, scope, degree, corpus, matched, out } => {
            let (netlist, origin, h) = match (&input, &easic) {
                (Some(p), None) => {
                    let n = load_blif(p)?;
                    let h = pattern_histogram(&n, scope.into(), None)?;
                    (n, BTreeMap::new(), h)
                }
                (None, Some(d)) => easic_histogram(d, scope.into())?,
                _ => return Err(CliError::Config("give exactly one of --input or --easic".into())),
            };
            fs::create_dir_all(&out).map_err(|e| CliError::Config(format!("{}: {e}", out.display())))?;
            let mut warning = None;
            if h.is_empty() {
                warning = Some(format!("{} histogram is empty", h.scope));
                eprintln!("easic: warning: {} histogram is empty", h.scope);
            }
            write(&out.join("histogram.json"), to_json_text(&h.to_json()))?;
            write(&out.join("histogram.csv"), h.to_csv())?;
            let trend = match fit_trendline::<f64>(&h, degree) {
                Ok(t) => json!({
                    "degree": degree,
                    "coeffs": t.coeffs,
                    "max_abs_residual": t.max_abs_residual,
                    "worst_id": t.worst_id,
                }),
                Err(e) => json!({ "degree": degree, "error": e.to_string() }),
            };
            write(&out.join("trendline.json"), to_json_text(&trend))?;
            let db = corpus.as_deref().map(load_corpus).transpose()?;
            let union = db.as_ref().map(|db| corpus_union(db.iter()));
            if let Some(u) = &union {
                write(&out.join("settling.csv"), u.curve_csv())?;
            }
            let matched_h = match (&matched, &db) {
                (Some(name), Some(db)) => Some(
                    db.iter()
                        .find(|h| &h.design == name)
                        .ok_or_else(|| CliError::Config(format!("design `{name}` is not in the corpus")))?,
                ),
                _ => None,
            };
            let ss = search_space_of(&netlist, &origin, union.as_ref(), matched_h);
            let mut report = json!({
                "design": h.design,
                "scope": h.scope,
                "luts": h.total(),
                "unique_patterns": h.entries.len(),
                "search_space": {
                    "key_bits": ss.key_bits,
                    "l1": ss.l1.to_string(),
                    "l2": ss.l2.map(|v| v.to_string()),
                    "l3": ss.l3.map(|v| v.to_string()),
                    "l4": ss.l4.map(|v| v.to_string()),
                },
                "warning": warning,
            });
            if let Some(u) = &union {
                report["corpus_unique_patterns"] = json!(u.m());
            }
            write(&out.join("structural.json"), to_json_text(&report))
        }
        AttackCommand::Composition { easic, corpus, threshold, out } => {
            let db = load_corpus(&corpus)?;
            let (_, _, victim) = easic_histogram(&easic, Scope::Static)?;
            let rep = composition_attack(&victim, &db, threshold)?;
            if let Some(w) = &rep.warning {
                eprintln!("easic: warning: {w}");
            }
            emit(out.as_deref(), &serde_json::to_value(&rep).expect("report"))
        }
        AttackCommand::Bruteforce { easic, golden, max_key_bits, seed, out } => {
            let oracle = load_blif(&golden)?;
            let netlist = load_blif(&easic.join("easic.blif"))?;
            let policy = EquivalencePolicy { seed, ..EquivalencePolicy::default() };
            let found = brute_force_key(&netlist, &oracle, max_key_bits, policy)?;
            let masks: Vec<Value> = found
                .key
                .masks()
                .map_err(|e| CliError::Internal(e.to_string()))?
                .into_iter()
                .map(|(id, m)| json!({ "id": id, "mask": m.to_hex() }))
                .collect();
            let v = json!({
                "design": found.key.design,
                "key_bits": found.key.total_len(),
                "trials": found.trials,
                "elapsed_ms": found.elapsed.as_secs_f64() * 1e3,
                "key": masks,
            });
            if let Some(p) = &out {
                write(&p.with_extension("ebs"), found.key.to_bytes())?;
            }
            emit(out.as_deref(), &v)
        }
    }
}
