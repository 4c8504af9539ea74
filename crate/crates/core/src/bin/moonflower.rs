//! Command-line front end: family analysis, sparsifier construction and
//! verification, lower-bound code generation, and seeded experiment suites
//! with CSV/JSON reports.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 input error, 3 budget
//! exhausted, 4 build retries exhausted. Every command is deterministic
//! given its inputs and seed; the env var `MOONFLOWER_SEED` overrides the
//! built-in default seed when no `--seed` flag is given.

use clap::{Parser, Subcommand, ValueEnum};
use moonflower::cover::phi_value;
use moonflower::oracle::{
    chernoff_montecarlo, mf_bruteforce, min_sparsifier_bruteforce, nrd_bruteforce, phi_exact,
    OracleBudget,
};
use moonflower::puncture::{one_step_reduce, ReductionConfig, DEFAULT_SEED};
use moonflower::setfam::{
    binomial, gen_lower_bound_family, mf_exact, mf_greedy, parse_family, stats, SetFamError,
    SetFamily,
};
use moonflower::sparsify::{
    audit_error_budget, build_sparsifier, certify_lower_bound, chernoff_bound, estimate,
    gen_chain_code, parse_code, verify_sparsifier, write_code, ChainVerdict, Code, Sparsifier,
    SparsifierConfig, SparsifyError,
};
use num::{BigRational, One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

const EXIT_OK: u8 = 0;
const EXIT_VERIFY_FAIL: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_RETRIES: u8 = 4;

#[derive(Parser)]
#[command(
    name = "moonflower",
    version,
    about = "Moonflower analysis of set families and weight sparsification of Boolean codes"
)]
struct Cli {
    /// Output style: aligned text for humans, one JSON object for machines.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the moonflower number of a set-family file.
    Mf {
        /// Family file: first line `n <int>`, then one member per line.
        family: PathBuf,
        /// Exact branch-and-bound search (the default).
        #[arg(long, conflicts_with = "greedy")]
        exact: bool,
        /// Fast greedy lower bound instead of the exact search.
        #[arg(long)]
        greedy: bool,
        /// Node budget for the exact search.
        #[arg(long, default_value_t = 1u64 << 22)]
        budget: u64,
    },
    /// Build a weight sparsifier for a code file and save it with its log.
    Sparsify {
        /// Code file: first line `n <int>`, then one word per line (dense
        /// 0/1 string or sparse support indices).
        code: PathBuf,
        /// Accuracy target in (0, 1/4].
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// Build attempts before giving up.
        #[arg(long)]
        retries: Option<u32>,
        /// Output path for the sparsifier JSON; the build log and manifest
        /// are written next to it as <out>.log.json / <out>.manifest.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a sparsifier file against a code file.
    Verify {
        code: PathBuf,
        sparsifier: PathBuf,
        /// Relative error allowed per codeword.
        #[arg(long, default_value_t = 0.25)]
        epsilon: f64,
    },
    /// Generate a nested-chain code that forces large sparsifiers.
    Lowerbound {
        /// Block length; must be divisible by --k.
        #[arg(long)]
        n: usize,
        /// Number of blocks.
        #[arg(long)]
        k: usize,
        /// Gap parameter for the chain lengths.
        #[arg(long)]
        epsilon: f64,
        /// Output prefix; writes <out>.code.txt, <out>.spec.json and a
        /// manifest. Defaults to chain_<n>_<k>.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sparsifier JSON to certify against the generated chain code.
        #[arg(long)]
        against: Option<PathBuf>,
    },
    /// Run a named experiment suite and write CSV + JSON reports.
    Suite {
        #[arg(long, value_enum)]
        suite: SuiteName,
        #[arg(long)]
        seed: Option<u64>,
        /// Per-suite repetition count (random-instance or Monte Carlo
        /// suites only).
        #[arg(long)]
        trials: Option<u64>,
        /// Directory for suite_<name>.csv / .json / .manifest.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteName {
    Extremal,
    Duality,
    Puncture,
    Sparsify,
    Lowerbound,
    Chernoff,
}

impl SuiteName {
    fn as_str(self) -> &'static str {
        match self {
            SuiteName::Extremal => "extremal",
            SuiteName::Duality => "duality",
            SuiteName::Puncture => "puncture",
            SuiteName::Sparsify => "sparsify",
            SuiteName::Lowerbound => "lowerbound",
            SuiteName::Chernoff => "chernoff",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = cli.format;
    let code = match cli.command {
        Command::Mf { family, exact, greedy, budget } => {
            cmd_mf(format, &family, exact, greedy, budget)
        }
        Command::Sparsify { code, epsilon, seed, retries, out } => {
            cmd_sparsify(format, &code, epsilon, seed, retries, out)
        }
        Command::Verify { code, sparsifier, epsilon } => {
            cmd_verify(format, &code, &sparsifier, epsilon)
        }
        Command::Lowerbound { n, k, epsilon, out, against } => {
            cmd_lowerbound(format, n, k, epsilon, out, against)
        }
        Command::Suite { suite, seed, trials, out } => cmd_suite(format, suite, seed, trials, &out),
    };
    ExitCode::from(code)
}

// ---------------------------------------------------------------------------
// Shared plumbing

/// `--seed` flag, else MOONFLOWER_SEED, else the built-in default. A set but
/// unparseable env var is an input error, reported by the caller via None.
fn resolve_seed(flag: Option<u64>) -> Result<u64, String> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("MOONFLOWER_SEED") {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .map_err(|_| format!("MOONFLOWER_SEED is set but not a u64: {v:?}")),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Clone, Serialize)]
struct FileDigest {
    path: String,
    fnv1a64: String,
}

fn digest_file(path: &Path) -> Result<FileDigest, String> {
    let bytes =
        std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    Ok(FileDigest { path: path.display().to_string(), fnv1a64: format!("{:016x}", fnv1a64(&bytes)) })
}

/// Reproducibility record written next to outputs and embedded in JSON
/// output: the command, its effective configuration, the seed, and digests
/// of every file read or written.
#[derive(Serialize)]
struct RunManifest {
    command: String,
    config: serde_json::Value,
    seed: u64,
    started_unix: u64,
    finished_unix: u64,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    seed: u64,
    started_unix: u64,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

impl ManifestBuilder {
    fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            config,
            seed,
            started_unix: unix_now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn add_input(&mut self, path: &Path) -> Result<(), String> {
        self.inputs.push(digest_file(path)?);
        Ok(())
    }

    fn write_output(&mut self, path: &Path, contents: &str) -> Result<(), String> {
        std::fs::write(path, contents)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        self.outputs.push(FileDigest {
            path: path.display().to_string(),
            fnv1a64: format!("{:016x}", fnv1a64(contents.as_bytes())),
        });
        Ok(())
    }

    fn finish(self) -> RunManifest {
        RunManifest {
            command: self.command,
            config: self.config,
            seed: self.seed,
            started_unix: self.started_unix,
            finished_unix: unix_now(),
            inputs: self.inputs,
            outputs: self.outputs,
        }
    }
}

/// Serialize the manifest and write it as `<base>.manifest.json`, recording
/// it as its own output is skipped (the digest would depend on itself).
fn write_manifest(manifest: &RunManifest, base: &Path) -> Result<(), String> {
    let path = suffixed(base, ".manifest.json");
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// `base` with `suffix` appended to the file name (not replacing the
/// extension), so out=sp.json yields sp.json.log.json etc.
fn suffixed(base: &Path, suffix: &str) -> PathBuf {
    let mut name = base.as_os_str().to_os_string();
    name.push(suffix);
    PathBuf::from(name)
}

fn fail_input(msg: &str) -> u8 {
    eprintln!("error: {msg}");
    EXIT_INPUT
}

// ---------------------------------------------------------------------------
// mf

fn cmd_mf(format: Format, family: &Path, _exact: bool, greedy: bool, budget: u64) -> u8 {
    let mut mb = ManifestBuilder::new(
        "mf",
        json!({"mode": if greedy { "greedy" } else { "exact" }, "budget": budget}),
        0,
    );
    if let Err(e) = mb.add_input(family) {
        return fail_input(&e);
    }
    let text = std::fs::read_to_string(family).expect("digest already read the file");
    let fam = match parse_family(&text) {
        Ok(f) => f,
        Err(e) => return fail_input(&e.to_string()),
    };
    let (value, witness, partial) = if greedy {
        let (v, w) = mf_greedy(&fam);
        (v, w, false)
    } else {
        match mf_exact(&fam, budget) {
            Ok((v, w)) => (v, w, false),
            Err(SetFamError::NodeBudget { best, witness }) => (best, witness, true),
            Err(e) => return fail_input(&e.to_string()),
        }
    };
    let st = stats(&fam, None);
    let manifest = mb.finish();
    match format {
        Format::Json => {
            let out = json!({
                "command": "mf",
                "value": value,
                "partial": partial,
                "witness": {
                    "petals": witness.petal_indices,
                    "core": witness.core.to_vec(),
                },
                "stats": {
                    "members": st.size,
                    "max_set_size": st.max_set_size,
                    "support_size": st.support_size,
                    "greedy_lower": st.mf_lower,
                },
                "manifest": manifest,
            });
            println!("{}", serde_json::to_string_pretty(&out).unwrap());
        }
        Format::Text => {
            let mode = if greedy { "greedy lower bound" } else { "exact" };
            println!("moonflower number ({mode}): {value}{}", if partial { " (partial)" } else { "" });
            println!("petals: {:?}", witness.petal_indices);
            println!("core:   {:?}", witness.core.to_vec());
            println!(
                "family: {} members, max set size {}, support size {}, greedy lower bound {}",
                st.size, st.max_set_size, st.support_size, st.mf_lower
            );
        }
    }
    if partial {
        eprintln!("warning: node budget {budget} exhausted; value is a lower bound");
        EXIT_BUDGET
    } else {
        EXIT_OK
    }
}

// ---------------------------------------------------------------------------
// sparsify

fn cmd_sparsify(
    format: Format,
    code_path: &Path,
    epsilon: f64,
    seed_flag: Option<u64>,
    retries: Option<u32>,
    out: Option<PathBuf>,
) -> u8 {
    let seed = match resolve_seed(seed_flag) {
        Ok(s) => s,
        Err(e) => return fail_input(&e),
    };
    let out = out.unwrap_or_else(|| suffixed(code_path, ".sparsifier.json"));
    let mut mb = ManifestBuilder::new(
        "sparsify",
        json!({"epsilon": epsilon, "retries": retries, "out": out.display().to_string()}),
        seed,
    );
    if let Err(e) = mb.add_input(code_path) {
        return fail_input(&e);
    }
    let text = std::fs::read_to_string(code_path).expect("digest already read the file");
    let code = match parse_code(&text) {
        Ok(c) => c,
        Err(e) => return fail_input(&e.to_string()),
    };
    let mut cfg = SparsifierConfig::new(epsilon);
    cfg.seed = seed;
    if let Some(r) = retries {
        cfg.max_build_retries = r;
    }
    let (sp, log, exhausted) = match build_sparsifier(&code, &cfg, None) {
        Ok((sp, log)) => (sp, log, false),
        Err(SparsifyError::RetriesExhausted { attempts, best_err, best }) => {
            eprintln!(
                "warning: no attempt passed after {attempts} tries; saving best (max relative error {best_err:.3e})"
            );
            let (sp, log) = *best;
            (sp, log, true)
        }
        Err(e @ SparsifyError::InvalidConfig(_)) => return fail_input(&e.to_string()),
        Err(e) => return fail_input(&e.to_string()),
    };
    let sp_json = serde_json::to_string_pretty(&sp).expect("sparsifier serializes");
    let log_json = serde_json::to_string_pretty(&log).expect("build log serializes");
    if let Err(e) = mb.write_output(&out, &sp_json) {
        return fail_input(&e);
    }
    if let Err(e) = mb.write_output(&suffixed(&out, ".log.json"), &log_json) {
        return fail_input(&e);
    }
    let manifest = mb.finish();
    if let Err(e) = write_manifest(&manifest, &out) {
        return fail_input(&e);
    }
    match format {
        Format::Json => {
            let summary = json!({
                "command": "sparsify",
                "pass": !exhausted,
                "t_size": sp.t_size(),
                "rounds": sp.rounds,
                "attempts": log.attempts,
                "max_rel_err": log.verify.max_rel_err,
                "k": log.k,
                "out": out.display().to_string(),
                "manifest": manifest,
            });
            println!("{}", serde_json::to_string_pretty(&summary).unwrap());
        }
        Format::Text => {
            println!(
                "sparsifier: |T| = {}, rounds = {}, attempts = {}, max relative error = {:.3e}",
                sp.t_size(),
                sp.rounds,
                log.attempts,
                log.verify.max_rel_err
            );
            println!("written to {}", out.display());
        }
    }
    if exhausted {
        EXIT_RETRIES
    } else {
        EXIT_OK
    }
}

// ---------------------------------------------------------------------------
// verify

fn load_sparsifier(path: &Path) -> Result<Sparsifier, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let sp: Sparsifier = serde_json::from_str(&text)
        .map_err(|e| format!("{}: not a sparsifier JSON: {e}", path.display()))?;
    sp.check().map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(sp)
}

fn cmd_verify(format: Format, code_path: &Path, sp_path: &Path, epsilon: f64) -> u8 {
    let mut mb = ManifestBuilder::new("verify", json!({"epsilon": epsilon}), 0);
    if let Err(e) = mb.add_input(code_path) {
        return fail_input(&e);
    }
    if let Err(e) = mb.add_input(sp_path) {
        return fail_input(&e);
    }
    let text = std::fs::read_to_string(code_path).expect("digest already read the file");
    let code = match parse_code(&text) {
        Ok(c) => c,
        Err(e) => return fail_input(&e.to_string()),
    };
    let sp = match load_sparsifier(sp_path) {
        Ok(s) => s,
        Err(e) => return fail_input(&e),
    };
    if sp.n != code.n() {
        return fail_input(&format!(
            "dimension mismatch: code has n = {}, sparsifier has n = {}",
            code.n(),
            sp.n
        ));
    }
    let report = verify_sparsifier(&code, &sp, epsilon);
    let manifest = mb.finish();
    match format {
        Format::Json => {
            let out = json!({
                "command": "verify",
                "report": report,
                "manifest": manifest,
            });
            println!("{}", serde_json::to_string_pretty(&out).unwrap());
        }
        Format::Text => {
            println!(
                "verify: {} ({} words checked, max relative error {:.3e}, epsilon {})",
                if report.pass { "PASS" } else { "FAIL" },
                report.checked,
                report.max_rel_err,
                report.epsilon
            );
            if !report.pass {
                for &idx in report.violations.iter().take(10) {
                    let word = &code.words()[idx];
                    println!(
                        "  word {idx}: weight {} estimated as {}",
                        word.len(),
                        estimate(&sp, word)
                    );
                }
                if report.violations.len() > 10 {
                    println!("  ... and {} more", report.violations.len() - 10);
                }
            }
        }
    }
    if report.pass {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAIL
    }
}

// ---------------------------------------------------------------------------
// lowerbound

fn cmd_lowerbound(
    format: Format,
    n: usize,
    k: usize,
    epsilon: f64,
    out: Option<PathBuf>,
    against: Option<PathBuf>,
) -> u8 {
    let out = out.unwrap_or_else(|| PathBuf::from(format!("chain_{n}_{k}")));
    let mut mb = ManifestBuilder::new(
        "lowerbound",
        json!({"n": n, "k": k, "epsilon": epsilon, "out": out.display().to_string()}),
        0,
    );
    let (code, spec) = match gen_chain_code(n, k, epsilon) {
        Ok(pair) => pair,
        Err(e) => return fail_input(&e.to_string()),
    };
    if let Some(p) = &against {
        if let Err(e) = mb.add_input(p) {
            return fail_input(&e);
        }
    }
    let spec_json = serde_json::to_string_pretty(&spec).expect("chain spec serializes");
    if let Err(e) = mb.write_output(&suffixed(&out, ".code.txt"), &write_code(&code)) {
        return fail_input(&e);
    }
    if let Err(e) = mb.write_output(&suffixed(&out, ".spec.json"), &spec_json) {
        return fail_input(&e);
    }
    let verdict = match &against {
        None => None,
        Some(p) => {
            let sp = match load_sparsifier(p) {
                Ok(s) => s,
                Err(e) => return fail_input(&e),
            };
            if sp.n != n {
                return fail_input(&format!(
                    "dimension mismatch: chain code has n = {n}, sparsifier has n = {}",
                    sp.n
                ));
            }
            Some(certify_lower_bound(&spec, &sp, epsilon))
        }
    };
    let manifest = mb.finish();
    if let Err(e) = write_manifest(&manifest, &out) {
        return fail_input(&e);
    }
    let consistent = !matches!(verdict, Some(ChainVerdict::Invalid { .. }));
    match format {
        Format::Json => {
            let out_json = json!({
                "command": "lowerbound",
                "spec": spec,
                "codewords": code.len(),
                "key_threshold": k * spec.s,
                "verdict": verdict,
                "manifest": manifest,
            });
            println!("{}", serde_json::to_string_pretty(&out_json).unwrap());
        }
        Format::Text => {
            println!(
                "chain code: n = {n}, k = {k} blocks, s = {} chain lengths {:?}, {} codewords",
                spec.s,
                spec.a,
                code.len()
            );
            println!(
                "any sparsifier avoiding a trace collision needs at least k*s = {} coordinates",
                k * spec.s
            );
            println!("written to {}.code.txt / {}.spec.json", out.display(), out.display());
            match &verdict {
                None => {}
                Some(ChainVerdict::Consistent { t_size }) => {
                    println!("certify: consistent (key set size {t_size}, no trace collision)");
                }
                Some(ChainVerdict::Invalid { witness }) => {
                    println!(
                        "certify: INVALID — block {} sets {} and {} share trace {:?}; weights {} and {} get estimates {} and {}",
                        witness.block,
                        witness.lower_index,
                        witness.lower_index + 1,
                        witness.common_trace,
                        witness.weight_low,
                        witness.weight_high,
                        witness.estimate_low,
                        witness.estimate_high
                    );
                }
            }
        }
    }
    if consistent {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAIL
    }
}

// ---------------------------------------------------------------------------
// suites

struct Row {
    case: &'static str,
    pass: bool,
    detail: String,
}

impl Row {
    fn new(case: &'static str, pass: bool, detail: String) -> Row {
        Row { case, pass, detail }
    }
}

fn cmd_suite(
    format: Format,
    name: SuiteName,
    seed_flag: Option<u64>,
    trials: Option<u64>,
    out_dir: &Path,
) -> u8 {
    let seed = match resolve_seed(seed_flag) {
        Ok(s) => s,
        Err(e) => return fail_input(&e),
    };
    if !out_dir.is_dir() {
        if let Err(e) = std::fs::create_dir_all(out_dir) {
            return fail_input(&format!("cannot create {}: {e}", out_dir.display()));
        }
    }
    let mut mb = ManifestBuilder::new(
        "suite",
        json!({"suite": name.as_str(), "trials": trials, "out": out_dir.display().to_string()}),
        seed,
    );
    let rows = match name {
        SuiteName::Extremal => suite_extremal(),
        SuiteName::Duality => suite_duality(seed, trials.unwrap_or(100)),
        SuiteName::Puncture => suite_puncture(seed, trials.unwrap_or(50)),
        SuiteName::Sparsify => suite_sparsify(seed),
        SuiteName::Lowerbound => suite_lowerbound(),
        SuiteName::Chernoff => suite_chernoff(seed, trials.unwrap_or(100_000)),
    };
    let all_pass = rows.iter().all(|r| r.pass);

    let mut csv = String::from("suite,case,pass,detail\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            name.as_str(),
            r.case,
            r.pass,
            csv_quote(&r.detail)
        );
    }
    let json_rows: Vec<_> = rows
        .iter()
        .map(|r| json!({"case": r.case, "pass": r.pass, "detail": r.detail}))
        .collect();
    let summary = json!({
        "suite": name.as_str(),
        "seed": seed,
        "trials": trials,
        "all_pass": all_pass,
        "rows": json_rows,
    });
    let base = out_dir.join(format!("suite_{}", name.as_str()));
    if let Err(e) = mb.write_output(&suffixed(&base, ".csv"), &csv) {
        return fail_input(&e);
    }
    if let Err(e) =
        mb.write_output(&suffixed(&base, ".json"), &serde_json::to_string_pretty(&summary).unwrap())
    {
        return fail_input(&e);
    }
    let manifest = mb.finish();
    if let Err(e) = write_manifest(&manifest, &base) {
        return fail_input(&e);
    }
    match format {
        Format::Json => {
            let out = json!({"command": "suite", "summary": summary, "manifest": manifest});
            println!("{}", serde_json::to_string_pretty(&out).unwrap());
        }
        Format::Text => {
            let width = rows.iter().map(|r| r.case.len()).max().unwrap_or(4).max(4);
            println!("{:<10} {:<width$} {:<5} detail", "suite", "case", "pass");
            for r in &rows {
                println!(
                    "{:<10} {:<width$} {:<5} {}",
                    name.as_str(),
                    r.case,
                    if r.pass { "ok" } else { "FAIL" },
                    r.detail
                );
            }
            println!(
                "result: {} ({}/{} checks)",
                if all_pass { "PASS" } else { "FAIL" },
                rows.iter().filter(|r| r.pass).count(),
                rows.len()
            );
        }
    }
    if all_pass {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAIL
    }
}

fn csv_quote(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Family-size and exhaustive-search checks on the generator that realizes
/// the extremal bound with equality.
fn suite_extremal() -> Vec<Row> {
    let budget = OracleBudget::default();
    let mut rows = Vec::new();
    let mut size_fail = Vec::new();
    let mut mf_fail = Vec::new();
    let mut cases = 0u32;
    for k in 2..=5usize {
        for w in 1..=4usize {
            let expected = binomial(k + w - 2, w);
            if expected.to_u64().is_none_or(|v| v > 70) {
                continue;
            }
            cases += 1;
            let fam = gen_lower_bound_family(k, w, 1000).expect("generator fits budget");
            if expected.to_usize() != Some(fam.len()) {
                size_fail.push((k, w));
            }
            match mf_bruteforce(&fam, &budget) {
                Ok(r) if r.value == k - 1 => {}
                _ => mf_fail.push((k, w)),
            }
        }
    }
    rows.push(Row::new(
        "family_size_matches_binomial",
        size_fail.is_empty(),
        format!("cases={cases} failures={size_fail:?}"),
    ));
    rows.push(Row::new(
        "exhaustive_mf_equals_k_minus_1",
        mf_fail.is_empty(),
        format!("cases={cases} failures={mf_fail:?}"),
    ));
    rows
}

fn random_family(rng: &mut ChaCha8Rng, max_n: usize, max_members: usize) -> SetFamily {
    let n = rng.gen_range(1..=max_n);
    let m = rng.gen_range(1..=max_members);
    let mut sets = Vec::with_capacity(m);
    for _ in 0..m {
        let mut s: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.35)).collect();
        if s.is_empty() {
            s.push(rng.gen_range(0..n));
        }
        sets.push(s);
    }
    SetFamily::from_index_sets(n, &sets)
}

/// Exact equality of both sides of the covering game on random families,
/// plus float-mode agreement and a cross-check against the independent
/// rational simplex.
fn suite_duality(seed: u64, trials: u64) -> Vec<Row> {
    let budget = OracleBudget::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exact_fail = 0u64;
    let mut float_fail = 0u64;
    let mut oracle_fail = 0u64;
    let mut worst_gap = 0.0f64;
    for _ in 0..trials {
        let fam = random_family(&mut rng, 10, 10);
        let exact = phi_value::<BigRational>(&fam);
        let primal = fam
            .members()
            .iter()
            .map(|s| exact.cover.mass_on(s))
            .min()
            .unwrap_or_else(BigRational::one);
        let dual = exact.smooth.max_coordinate_hit(&fam);
        if primal != exact.value || dual != exact.value {
            exact_fail += 1;
        }
        let float = phi_value::<f64>(&fam);
        let gap = (float.value - exact.value.to_f64().unwrap_or(f64::NAN)).abs();
        worst_gap = worst_gap.max(gap);
        if !(gap < 1e-9) {
            float_fail += 1;
        }
        match phi_exact(&fam, &budget) {
            Ok(o) if o.value == exact.value => {}
            _ => oracle_fail += 1,
        }
    }
    vec![
        Row::new(
            "rational_primal_equals_dual",
            exact_fail == 0,
            format!("trials={trials} failures={exact_fail}"),
        ),
        Row::new(
            "float_gap_below_1e-9",
            float_fail == 0,
            format!("trials={trials} failures={float_fail} worst_gap={worst_gap:.3e}"),
        ),
        Row::new(
            "independent_simplex_agrees",
            oracle_fail == 0,
            format!("trials={trials} failures={oracle_fail}"),
        ),
    ]
}

/// Per-step potential decay statistics of the sampling process on the
/// extremal generator family.
fn suite_puncture(seed: u64, trials: u64) -> Vec<Row> {
    let fam = gen_lower_bound_family(4, 3, 1000).expect("fixture fits");
    let p = moonflower::cover::choose_p(0.25).expect("valid level");
    let mut histories = Vec::new();
    let mut monotone = true;
    for trial in 0..trials {
        let cfg = ReductionConfig::new(p, 1.0 / 16.0)
            .with_seed(seed.wrapping_add(trial))
            .with_retries(1);
        let trace = one_step_reduce(&fam, &cfg, 1.0).expect("fixture config valid");
        if trace.potential_history.windows(2).any(|w| w[1] > w[0] + 1e-9) {
            monotone = false;
        }
        histories.push(trace.potential_history);
    }
    // Mean of Φ_{j+1}/Φ_j per step index over trials still alive there.
    let target = 1.0 - p / 2.0;
    let mut step = 0usize;
    let mut bound_ok = true;
    let mut worst_margin = f64::NEG_INFINITY;
    let min_samples = (trials as usize / 4).max(10);
    loop {
        let ratios: Vec<f64> = histories
            .iter()
            .filter(|h| h.len() > step + 1 && h[step] > 0.0)
            .map(|h| h[step + 1] / h[step])
            .collect();
        if ratios.len() < min_samples {
            break;
        }
        let m = ratios.len() as f64;
        let mean = ratios.iter().sum::<f64>() / m;
        let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / m.max(2.0 - 1.0);
        let sigma = (var / m).sqrt();
        let margin = mean - (target + 3.0 * sigma);
        worst_margin = worst_margin.max(margin);
        if margin > 0.0 {
            bound_ok = false;
        }
        step += 1;
    }
    vec![
        Row::new("potential_nonincreasing", monotone, format!("trials={trials}")),
        Row::new(
            "mean_step_ratio_below_target",
            bound_ok,
            format!(
                "steps_checked={step} target=1-p/2={target:.6} worst_margin={worst_margin:.3e}"
            ),
        ),
    ]
}

/// End-to-end builds on canonical fixture codes, with the per-round error
/// budget audit.
fn suite_sparsify(seed: u64) -> Vec<Row> {
    let mut rows = Vec::new();
    let n = 1024;
    let fixtures: Vec<(&'static str, Code)> = vec![
        (
            "unit_vectors",
            Code::from_supports(n, (0..8).map(|i| vec![i * (n / 8)]).collect::<Vec<_>>())
                .expect("valid fixture"),
        ),
        (
            "all_ones",
            Code::from_supports(n, vec![(0..n).collect::<Vec<_>>()]).expect("valid fixture"),
        ),
    ];
    for (tag, code) in fixtures {
        let mut cfg = SparsifierConfig::new(0.25);
        cfg.seed = seed;
        match build_sparsifier(&code, &cfg, None) {
            Ok((sp, log)) => {
                let audit = audit_error_budget(&log);
                rows.push(Row::new(
                    match tag {
                        "unit_vectors" => "unit_vectors_build_verify",
                        _ => "all_ones_build_verify",
                    },
                    log.verify.pass,
                    format!(
                        "t_size={} attempts={} max_rel_err={:.3e}",
                        sp.t_size(),
                        log.attempts,
                        log.verify.max_rel_err
                    ),
                ));
                rows.push(Row::new(
                    match tag {
                        "unit_vectors" => "unit_vectors_audit_budget",
                        _ => "all_ones_audit_budget",
                    },
                    audit.ok,
                    format!("worst_eps_sum={:.3e} cap={:.3e}", audit.worst_eps_sum, 0.25 / 25.0),
                ));
            }
            Err(e) => {
                rows.push(Row::new(
                    match tag {
                        "unit_vectors" => "unit_vectors_build_verify",
                        _ => "all_ones_build_verify",
                    },
                    false,
                    format!("build failed: {e}"),
                ));
            }
        }
    }
    rows
}

/// The nested-chain code: non-redundancy, the enumerated minimum key-set
/// size, and the trace-collision certifier in both directions.
fn suite_lowerbound() -> Vec<Row> {
    let budget = OracleBudget::default();
    let (code, spec) = gen_chain_code(8, 2, 0.5).expect("chain fixture");
    let mut rows = Vec::new();

    let nrd = nrd_bruteforce(&code, &budget);
    rows.push(Row::new(
        "nrd_exhaustive",
        nrd.as_ref().map(|r| r.value).ok() == Some(2),
        format!("{:?}", nrd.map(|r| r.value)),
    ));

    let min_sp = min_sparsifier_bruteforce(&code, 0.5, &budget);
    rows.push(Row::new(
        "min_key_set_enumerated",
        min_sp.as_ref().map(|r| r.size).ok() == Some(2),
        format!("{:?}", min_sp.map(|r| (r.size, r.coords))),
    ));

    let identity = Sparsifier::identity(8);
    let v = certify_lower_bound(&spec, &identity, 0.5);
    rows.push(Row::new(
        "certify_identity_consistent",
        matches!(v, ChainVerdict::Consistent { .. }),
        format!("{v:?}"),
    ));

    let empty = Sparsifier::empty(8);
    let v = certify_lower_bound(&spec, &empty, 0.5);
    let ok = matches!(
        &v,
        ChainVerdict::Invalid { witness } if witness.block == 1 && witness.lower_index <= 1
    );
    rows.push(Row::new("certify_empty_invalid", ok, format!("{v:?}")));

    // Every key set below the k·s threshold must be rejected with a witness.
    let mut support = Vec::new();
    for w in code.words() {
        support.extend(w.iter());
    }
    support.sort_unstable();
    support.dedup();
    let threshold = spec.k * spec.s;
    let mut rejected_all = true;
    let mut tested = 0u32;
    for mask in 0u32..(1u32 << support.len()) {
        if (mask.count_ones() as usize) >= threshold {
            continue;
        }
        let picks: Vec<(usize, u32)> = support
            .iter()
            .enumerate()
            .filter(|(pos, _)| mask >> pos & 1 == 1)
            .map(|(_, &c)| (c, 0))
            .collect();
        let sp = Sparsifier::from_rounds(8, 0, picks).expect("valid key set");
        tested += 1;
        if !matches!(certify_lower_bound(&spec, &sp, 0.5), ChainVerdict::Invalid { .. }) {
            rejected_all = false;
        }
    }
    rows.push(Row::new(
        "certify_rejects_below_threshold",
        rejected_all,
        format!("key_sets_tested={tested} threshold={threshold}"),
    ));
    rows
}

/// Empirical binomial tails against the closed-form bound on a (t, Δ) grid.
fn suite_chernoff(seed: u64, trials: u64) -> Vec<Row> {
    let mut rows = Vec::new();
    for (i, &t) in [4u64, 16, 64, 256].iter().enumerate() {
        for (j, mult) in [1.0f64, 2.0, 4.0].iter().enumerate() {
            let delta = mult * (t as f64).sqrt();
            let bound = chernoff_bound(t as f64, delta);
            if bound >= 1.0 {
                continue;
            }
            let est = chernoff_montecarlo(t, delta, trials, seed ^ ((i as u64) << 8 | j as u64));
            let pass = est.empirical <= bound;
            rows.push(Row::new(
                grid_case_name(t, j),
                pass,
                format!(
                    "delta={delta:.2} empirical={:.5} sigma3={:.1e} bound={bound:.5}",
                    est.empirical, est.sigma3
                ),
            ));
        }
    }
    rows
}

fn grid_case_name(t: u64, j: usize) -> &'static str {
    match (t, j) {
        (4, 0) => "t4_sqrt",
        (4, 1) => "t4_2sqrt",
        (4, 2) => "t4_4sqrt",
        (16, 0) => "t16_sqrt",
        (16, 1) => "t16_2sqrt",
        (16, 2) => "t16_4sqrt",
        (64, 0) => "t64_sqrt",
        (64, 1) => "t64_2sqrt",
        (64, 2) => "t64_4sqrt",
        (256, 0) => "t256_sqrt",
        (256, 1) => "t256_2sqrt",
        (256, 2) => "t256_4sqrt",
        _ => "t_other",
    }
}
