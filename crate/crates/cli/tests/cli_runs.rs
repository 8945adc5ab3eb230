//! End-to-end runs of the `mcfod` binary.
//!
//! These tests drive the compiled CLI the way a user would: shelling out
//! with real files in temporary directories and asserting on exit codes,
//! printed text and the artefacts left on disk.  Solving sticks to the
//! built-in exact methods so the suite has no external solver to find.

use std::path::{Path, PathBuf};
use std::process::Command;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

/// Runs the binary with the given arguments and returns (success, stdout,
/// stderr), panicking only when the process cannot be spawned at all.
fn mcfod(args: &[&str]) -> (bool, String, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_mcfod"))
        .args(args)
        .output()
        .expect("failed to spawn the mcfod binary");
    (
        output.status.success(),
        String::from_utf8_lossy(&output.stdout).into_owned(),
        String::from_utf8_lossy(&output.stderr).into_owned(),
    )
}

fn path_str(path: &Path) -> String {
    path.to_str().expect("temporary paths are valid UTF-8").to_string()
}

#[test]
fn generating_with_the_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.json");
    let second = dir.path().join("b.json");
    let other = dir.path().join("c.json");

    for out in [&first, &second] {
        let (ok, stdout, stderr) = mcfod(&[
            "generate",
            "--nodes",
            "12",
            "--seed",
            "7",
            "--carriers",
            "2",
            "--out",
            &path_str(out),
        ]);
        assert!(ok, "generate failed: {stderr}");
        assert!(stdout.contains("12 nodes"), "unexpected report: {stdout}");
    }
    let (ok, _, stderr) = mcfod(&[
        "generate", "--nodes", "12", "--seed", "8", "--carriers", "2", "--out", &path_str(&other),
    ]);
    assert!(ok, "generate failed: {stderr}");

    let bytes_a = std::fs::read(&first).unwrap();
    let bytes_b = std::fs::read(&second).unwrap();
    let bytes_c = std::fs::read(&other).unwrap();
    assert_eq!(bytes_a, bytes_b, "same seed must reproduce the same file");
    assert_ne!(bytes_a, bytes_c, "different seeds should not collide");
}

#[test]
fn generating_from_raw_csv_files_works() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("nodes.csv"),
        "id,x,y\n1,0,0\n2,10,0\n3,5,5\n4,0,10\n",
    )
    .unwrap();
    std::fs::write(dir.path().join("demand.csv"), "o,d,w\n1,2,4\n2,1,4\n1,4,2\n").unwrap();
    let out = dir.path().join("instance.json");

    let (ok, stdout, stderr) = mcfod(&[
        "generate",
        "--raw",
        &path_str(dir.path()),
        "--hubs",
        "3",
        "--seed",
        "1",
        "--out",
        &path_str(&out),
    ]);
    assert!(ok, "generate --raw failed: {stderr}");
    assert!(stdout.contains("4 nodes, 1 hubs"), "unexpected report: {stdout}");

    let instance: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(instance["hubs"], serde_json::json!([3]));
}

#[test]
fn exact_solve_prints_the_published_objective() {
    let (ok, stdout, stderr) = mcfod(&["solve", &path_str(&fixture("example1.json"))]);
    assert!(ok, "solve failed: {stderr}");
    assert!(stdout.contains("status     OPTIMAL"), "missing status: {stdout}");
    assert!(stdout.contains("objective  260"), "missing objective: {stdout}");
    assert!(stdout.contains("served     4 of 4"), "missing service count: {stdout}");
    assert!(stdout.contains("1->1") && stdout.contains("2->2") && stdout.contains("5->2"),
        "unexpected allocation: {stdout}");
}

#[test]
fn solution_files_round_trip_through_verify() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("solution.json");
    let instance = path_str(&fixture("example1.json"));

    let (ok, _, stderr) =
        mcfod(&["solve", &instance, "--method", "bnb", "--out", &path_str(&sol)]);
    assert!(ok, "solve failed: {stderr}");

    let (ok, stdout, stderr) = mcfod(&["verify", &instance, "--solution", &path_str(&sol)]);
    assert!(ok, "verify failed: {stdout}{stderr}");
    assert!(stdout.contains("ok: solution verifies under FREE"), "unexpected: {stdout}");
}

#[test]
fn fixed_fee_games_accept_files_and_derivation_kinds() {
    let instance = path_str(&fixture("example1.json"));
    let fee_file = path_str(&fixture("example1_fixed_fees.json"));

    let (ok, stdout, _) = mcfod(&[
        "solve", &instance, "--variant", "FIXED_OPTIMISTIC", "--fees", &fee_file,
    ]);
    assert!(ok && stdout.contains("objective  150"), "optimistic fee file: {stdout}");

    let (ok, stdout, _) = mcfod(&[
        "solve", &instance, "--variant", "FIXED_RELAXED", "--fees", &fee_file, "--method", "bnb",
    ]);
    assert!(ok && stdout.contains("objective  155"), "relaxed fee file: {stdout}");

    let (ok, stdout, _) =
        mcfod(&["solve", &instance, "--variant", "FIXED_RELAXED", "--fees", "MAX"]);
    assert!(ok && stdout.contains("objective  170"), "relaxed MAX fees: {stdout}");

    // FREE is the fee-setting game: passing a schedule is a usage error.
    let (ok, _, stderr) = mcfod(&["solve", &instance, "--fees", "MAX"]);
    assert!(!ok, "FREE with --fees should fail");
    assert!(stderr.contains("take no --fees"), "unexpected error: {stderr}");

    // And the fixed-fee games cannot run without one.
    let (ok, _, stderr) = mcfod(&["solve", &instance, "--variant", "FIXED_RELAXED"]);
    assert!(!ok, "FIXED_RELAXED without --fees should fail");
    assert!(stderr.contains("needs --fees"), "unexpected error: {stderr}");
}

#[test]
fn preprocess_reports_prunable_commodities() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("prune.csv");
    let out = dir.path().join("processed.json");

    let (ok, stdout, stderr) = mcfod(&[
        "preprocess",
        &path_str(&fixture("example1.json")),
        "--report",
        &path_str(&report),
        "--out",
        &path_str(&out),
    ]);
    assert!(ok, "preprocess failed: {stderr}");
    assert!(stdout.contains("serving pairs remain"), "unexpected report: {stdout}");

    let report_text = std::fs::read_to_string(&report).unwrap();
    assert!(report_text.starts_with("kind,commodity,"), "unexpected CSV header: {report_text}");

    // The processed instance must still be loadable and solvable.
    let (ok, stdout, _) = mcfod(&["solve", &path_str(&out)]);
    assert!(ok && stdout.contains("objective  260"), "processed instance: {stdout}");
}

#[test]
fn build_writes_an_mps_model() {
    let dir = tempfile::tempdir().unwrap();
    let mps = dir.path().join("model.mps");

    let (ok, stdout, stderr) = mcfod(&[
        "build",
        &path_str(&fixture("example1.json")),
        "--formulation",
        "IP",
        "--variant",
        "FREE",
        "--out",
        &path_str(&mps),
    ]);
    assert!(ok, "build failed: {stderr}");
    assert!(stdout.contains("26 variables, 19 rows"), "unexpected size: {stdout}");

    let text = std::fs::read_to_string(&mps).unwrap();
    assert!(text.starts_with("* maximisation model"), "missing header: {text}");
    assert!(text.ends_with("ENDATA\n"), "missing trailer");
}

#[test]
fn fee_derivation_and_synthesis_write_valid_schedules() {
    let dir = tempfile::tempdir().unwrap();
    let instance = path_str(&fixture("example1.json"));
    let derived = dir.path().join("max.json");

    let (ok, _, stderr) =
        mcfod(&["fees", &instance, "--kind", "MAX", "--out", &path_str(&derived)]);
    assert!(ok, "fees --kind failed: {stderr}");

    let schedule: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&derived).unwrap()).unwrap();
    let lookup = |leg: &str, r: u64, i: u64| -> f64 {
        schedule[leg]
            .as_array()
            .unwrap()
            .iter()
            .find(|row| row["r"] == serde_json::json!(r) && row["i"] == serde_json::json!(i))
            .unwrap_or_else(|| panic!("no {leg} entry for r={r}, i={i}"))["v"]
            .as_f64()
            .unwrap()
    };
    // First legs keep per-commodity reservation prices; third legs are
    // the same for every commodity of a shared destination.
    assert_eq!(lookup("first_leg", 1, 3), 30.0);
    assert_eq!(lookup("first_leg", 2, 3), 25.0);
    assert_eq!(lookup("third_leg", 1, 3), 45.0);
    assert_eq!(lookup("third_leg", 4, 4), 40.0);

    // The derived file feeds straight back into a fixed-fee solve.
    let (ok, stdout, _) = mcfod(&[
        "solve", &instance, "--variant", "FIXED_RELAXED", "--fees", &path_str(&derived),
    ]);
    assert!(ok && stdout.contains("objective  170"), "derived fee file: {stdout}");

    // Synthesised fees from a stored free-fee solution.
    let sol = dir.path().join("solution.json");
    let (ok, _, stderr) = mcfod(&["solve", &instance, "--out", &path_str(&sol)]);
    assert!(ok, "solve failed: {stderr}");
    let synth = dir.path().join("synth.json");
    let (ok, _, stderr) = mcfod(&[
        "fees", &instance, "--from-solution", &path_str(&sol), "--out", &path_str(&synth),
    ]);
    assert!(ok, "fees --from-solution failed: {stderr}");
    let schedule: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&synth).unwrap()).unwrap();
    assert!(schedule["first_leg"].as_array().is_some_and(|rows| !rows.is_empty()));
}

#[test]
fn experiments_produce_result_and_summary_tables() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    let rows_csv = dir.path().join("rows.csv");
    let summary_csv = dir.path().join("summary.csv");
    let plot_svg = dir.path().join("rates.svg");

    let instance = path_str(&fixture("example1.json"));
    let fee_file = path_str(&fixture("example1_fixed_fees.json"));
    std::fs::write(
        &spec,
        format!(
            r#"
            instances = ["{instance}"]
            variants = ["FREE", "FIXED_OPTIMISTIC:{fee_file}", "FIXED_RELAXED:MAX"]
            methods = ["EXACT", "BNB"]
            "#
        ),
    )
    .unwrap();

    let (ok, stdout, stderr) = mcfod(&[
        "experiment",
        "--spec",
        &path_str(&spec),
        "--out",
        &path_str(&rows_csv),
        "--summary",
        &path_str(&summary_csv),
        "--plot",
        &path_str(&plot_svg),
        "--jobs",
        "2",
    ]);
    assert!(ok, "experiment failed: {stdout}{stderr}");
    assert!(stdout.contains("6 rows"), "expected 3 variants x 2 methods: {stdout}");

    let mut reader = csv::Reader::from_path(&rows_csv).unwrap();
    let mut seen = Vec::new();
    for record in reader.deserialize::<std::collections::HashMap<String, String>>() {
        let record = record.unwrap();
        assert_eq!(record["status"], "OPTIMAL", "row failed: {record:?}");
        assert_eq!(record["instance"], "example1");
        seen.push((
            record["variant"].clone(),
            record["method"].clone(),
            record["objective"].parse::<f64>().unwrap(),
            record["service_rate"].parse::<f64>().unwrap(),
        ));
    }
    assert_eq!(seen.len(), 6);
    for (variant, _, objective, rate) in &seen {
        let expected = match variant.split(':').next().unwrap() {
            "FREE" => 260.0,
            "FIXED_OPTIMISTIC" => 150.0,
            "FIXED_RELAXED" => 170.0,
            other => panic!("unexpected variant {other}"),
        };
        assert_eq!(*objective, expected, "variant {variant}");
        if variant == "FREE" {
            assert_eq!(*rate, 100.0);
        }
    }

    // Summary rows exist for both metrics and the plot is an SVG.
    let summary = std::fs::read_to_string(&summary_csv).unwrap();
    assert!(summary.contains("profit") && summary.contains("service_rate"), "{summary}");
    let svg = std::fs::read_to_string(&plot_svg).unwrap();
    assert!(svg.starts_with("<svg"), "not an SVG: {svg}");
}
