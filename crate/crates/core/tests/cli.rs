//! End-to-end tests of the command-line binary: exit codes, file outputs,
//! JSON shapes, and seed handling.

use moonflower::setfam::{gen_lower_bound_family, write_family};
use moonflower::sparsify::{write_code, Code, Sparsifier};
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_moonflower"));
    c.env_remove("MOONFLOWER_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code_of(o: &Output) -> i32 {
    o.status.code().expect("no signal")
}

fn write(path: &Path, contents: &str) {
    std::fs::write(path, contents).expect("write fixture");
}

#[test]
fn mf_reports_exact_value_and_witness() {
    let dir = tempfile::tempdir().unwrap();
    let fam = dir.path().join("fam.txt");
    write(&fam, "n 6\n0 1\n2 3\n4\n1 5\n");
    let out = run(&["mf", fam.to_str().unwrap()]);
    assert_eq!(code_of(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("moonflower number (exact): 4"), "{text}");
    assert!(text.contains("petals"), "{text}");
}

#[test]
fn mf_on_generator_family_file() {
    let dir = tempfile::tempdir().unwrap();
    let fam_path = dir.path().join("gen33.txt");
    let fam = gen_lower_bound_family(3, 3, 1000).unwrap();
    write(&fam_path, &write_family(&fam));
    let out = run(&["mf", fam_path.to_str().unwrap()]);
    assert_eq!(code_of(&out), 0);
    assert!(stdout(&out).contains("moonflower number (exact): 2"), "{}", stdout(&out));

    let greedy = run(&["mf", fam_path.to_str().unwrap(), "--greedy"]);
    assert_eq!(code_of(&greedy), 0);
    assert!(stdout(&greedy).contains("greedy lower bound"));
}

#[test]
fn mf_malformed_file_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let fam = dir.path().join("bad.txt");
    write(&fam, "n 4\n0 1\nbogus\n");
    let out = run(&["mf", fam.to_str().unwrap()]);
    assert_eq!(code_of(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn mf_budget_exhaustion_exits_3_with_partial() {
    let dir = tempfile::tempdir().unwrap();
    let fam_path = dir.path().join("gen43.txt");
    let fam = gen_lower_bound_family(4, 3, 1000).unwrap();
    write(&fam_path, &write_family(&fam));
    let out = run(&["mf", fam_path.to_str().unwrap(), "--budget", "1"]);
    assert_eq!(code_of(&out), 3);
    assert!(stdout(&out).contains("(partial)"), "{}", stdout(&out));
}

#[test]
fn mf_json_output_has_manifest_digest() {
    let dir = tempfile::tempdir().unwrap();
    let fam = dir.path().join("fam.txt");
    write(&fam, "n 3\n0\n1\n2\n");
    let out = run(&["--format", "json", "mf", fam.to_str().unwrap()]);
    assert_eq!(code_of(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("valid JSON");
    assert_eq!(v["value"], 3);
    assert_eq!(v["manifest"]["command"], "mf");
    let digest = v["manifest"]["inputs"][0]["fnv1a64"].as_str().unwrap();
    assert_eq!(digest.len(), 16);
}

#[test]
fn sparsify_then_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let code_path = dir.path().join("code.txt");
    let words: Vec<Vec<usize>> = (0..6).map(|i| vec![i * 40]).collect();
    write(&code_path, &write_code(&Code::from_supports(256, words).unwrap()));
    let sp_path = dir.path().join("sp.json");

    let build = run(&[
        "sparsify",
        code_path.to_str().unwrap(),
        "--epsilon",
        "0.25",
        "--out",
        sp_path.to_str().unwrap(),
    ]);
    assert_eq!(code_of(&build), 0, "{}", String::from_utf8_lossy(&build.stderr));
    assert!(sp_path.exists());
    assert!(dir.path().join("sp.json.log.json").exists());
    assert!(dir.path().join("sp.json.manifest.json").exists());

    let verify = run(&[
        "verify",
        code_path.to_str().unwrap(),
        sp_path.to_str().unwrap(),
        "--epsilon",
        "0.25",
    ]);
    assert_eq!(code_of(&verify), 0);
    assert!(stdout(&verify).contains("PASS"));
}

#[test]
fn sparsify_rejects_out_of_range_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let code_path = dir.path().join("code.txt");
    write(&code_path, "n 4\n0 1\n");
    let out = run(&["sparsify", code_path.to_str().unwrap(), "--epsilon", "0.5"]);
    assert_eq!(code_of(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));
}

#[test]
fn verify_flags_failing_sparsifier() {
    let dir = tempfile::tempdir().unwrap();
    let code_path = dir.path().join("code.txt");
    write(&code_path, "n 4\n0 1\n2 3\n");
    let empty = dir.path().join("empty.json");
    write(&empty, &serde_json::to_string(&Sparsifier::empty(4)).unwrap());
    let out = run(&["verify", code_path.to_str().unwrap(), empty.to_str().unwrap()]);
    assert_eq!(code_of(&out), 1);
    assert!(stdout(&out).contains("FAIL"));

    let identity = dir.path().join("id.json");
    write(&identity, &serde_json::to_string(&Sparsifier::identity(4)).unwrap());
    let ok = run(&["verify", code_path.to_str().unwrap(), identity.to_str().unwrap()]);
    assert_eq!(code_of(&ok), 0);
}

#[test]
fn verify_dimension_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let code_path = dir.path().join("code.txt");
    write(&code_path, "n 4\n0 1\n");
    let sp = dir.path().join("sp.json");
    write(&sp, &serde_json::to_string(&Sparsifier::identity(5)).unwrap());
    let out = run(&["verify", code_path.to_str().unwrap(), sp.to_str().unwrap()]);
    assert_eq!(code_of(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension mismatch"));
}

#[test]
fn lowerbound_writes_chain_code_and_certifies() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("chain");
    let out = run(&[
        "lowerbound",
        "--n",
        "8",
        "--k",
        "2",
        "--epsilon",
        "0.5",
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert_eq!(code_of(&out), 0);
    let code_text = std::fs::read_to_string(dir.path().join("chain.code.txt")).unwrap();
    assert_eq!(code_text, "n 8\n0\n0 1\n4\n4 5\n");
    let spec: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("chain.spec.json")).unwrap())
            .unwrap();
    assert_eq!(spec["s"], 2);

    let id = dir.path().join("id.json");
    write(&id, &serde_json::to_string(&Sparsifier::identity(8)).unwrap());
    let ok = run(&[
        "lowerbound",
        "--n",
        "8",
        "--k",
        "2",
        "--epsilon",
        "0.5",
        "--out",
        prefix.to_str().unwrap(),
        "--against",
        id.to_str().unwrap(),
    ]);
    assert_eq!(code_of(&ok), 0);
    assert!(stdout(&ok).contains("consistent"));

    let empty = dir.path().join("empty.json");
    write(&empty, &serde_json::to_string(&Sparsifier::empty(8)).unwrap());
    let bad = run(&[
        "lowerbound",
        "--n",
        "8",
        "--k",
        "2",
        "--epsilon",
        "0.5",
        "--out",
        prefix.to_str().unwrap(),
        "--against",
        empty.to_str().unwrap(),
    ]);
    assert_eq!(code_of(&bad), 1);
    assert!(stdout(&bad).contains("INVALID"));
}

#[test]
fn lowerbound_requires_divisible_block_length() {
    let out = run(&["lowerbound", "--n", "9", "--k", "2", "--epsilon", "0.5"]);
    assert_eq!(code_of(&out), 2);
}

#[test]
fn suite_writes_reports_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "suite",
        "--suite",
        "extremal",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code_of(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("result: PASS"));
    let csv = std::fs::read_to_string(dir.path().join("suite_extremal.csv")).unwrap();
    assert!(csv.starts_with("suite,case,pass,detail\n"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("suite_extremal.json")).unwrap())
            .unwrap();
    assert_eq!(summary["all_pass"], true);
    assert!(dir.path().join("suite_extremal.manifest.json").exists());
}

#[test]
fn suite_is_deterministic_under_env_seed() {
    let dir1 = tempfile::tempdir().unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    for dir in [&dir1, &dir2] {
        let out = bin()
            .env("MOONFLOWER_SEED", "12345")
            .args([
                "suite",
                "--suite",
                "duality",
                "--trials",
                "10",
                "--out",
                dir.path().to_str().unwrap(),
            ])
            .output()
            .expect("binary runs");
        assert_eq!(code_of(&out), 0);
    }
    let a = std::fs::read_to_string(dir1.path().join("suite_duality.json")).unwrap();
    let b = std::fs::read_to_string(dir2.path().join("suite_duality.json")).unwrap();
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["seed"], 12345);
}

#[test]
fn invalid_env_seed_exits_2() {
    let out = bin()
        .env("MOONFLOWER_SEED", "not-a-number")
        .args(["suite", "--suite", "extremal"])
        .output()
        .expect("binary runs");
    assert_eq!(code_of(&out), 2);
}

#[test]
fn unknown_suite_name_is_a_usage_error() {
    let out = run(&["suite", "--suite", "nonsense"]);
    assert_eq!(code_of(&out), 2);
}
