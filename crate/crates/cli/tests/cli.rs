use std::process::Command;

use bicontact_lab::{examples::EXAMPLES, run_source, Scenario};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bicontact-lab"))
}

#[test]
fn every_shipped_example_reproduces_its_expectations() {
    for (name, src) in EXAMPLES {
        let expected_exit = src
            .parse::<toml::Table>()
            .unwrap()
            .get("expected_exit")
            .and_then(|v| v.as_integer())
            .unwrap_or(0) as i32;
        match run_source(src) {
            Ok(report) => {
                for c in report.checks.iter().filter(|c| c.name.starts_with("expect:")) {
                    assert!(c.passed, "{name}: {} {:?}", c.name, c.detail);
                }
                let code = if report.all_passed { 0 } else { 3 };
                assert_eq!(code, expected_exit, "{name}: failures {:?}", report.failures().map(|c| &c.name).collect::<Vec<_>>());
            }
            Err(e) => assert_eq!(e.exit_code(), expected_exit, "{name}: {e}"),
        }
    }
}

#[test]
fn shipped_examples_match_the_scenarios_directory() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut on_disk: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension()? == "toml").then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    on_disk.sort();
    let embedded: Vec<String> = EXAMPLES.iter().map(|(n, _)| n.to_string()).collect();
    assert_eq!(on_disk, embedded);
}

#[test]
fn coeffs_worked_example_via_binary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let status = bin().args(["run", "coeffs-worked-example", "--out"]).arg(&out).output().unwrap().status;
    assert_eq!(status.code(), Some(0));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["values"]["min_q"], -4);
    assert_eq!(r["values"]["admissible"], "{q in Z : q >= -4}");
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["all_passed"], true);
}

#[test]
fn negative_epsilon_is_a_precondition_error_naming_epsilon() {
    let out = bin().args(["run", "coeffs-negative-epsilon"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));
}

#[test]
fn malformed_files_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown.toml", "kind = \"coeffs\"\nbogus = 1\n[coeffs]\nmonodromy = [[5,9],[1,2]]\nepsilon = 0.5\n"),
        ("nested.toml", "kind = \"coeffs\"\n[coeffs]\nmonodromy = [[5,9],[1,2]]\nepsilon = 0.5\nwidth = 1\n"),
        ("syntax.toml", "kind = \n"),
        ("section.toml", "kind = \"surgery\"\n"),
    ];
    for (file, text) in cases {
        let p = dir.path().join(file);
        std::fs::write(&p, text).unwrap();
        let out = bin().arg("run").arg(&p).output().unwrap();
        assert_eq!(out.status.code(), Some(1), "{file}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = bin().args(["run", "/nonexistent/scenario.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn surgery_violation_exits_3_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let status = bin().args(["run", "surgery-q3-violation", "--out"]).arg(&out).output().unwrap().status;
    assert_eq!(status.code(), Some(3));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let failed: Vec<&Value> = r["checks"].as_array().unwrap().iter().filter(|c| c["passed"] == false).collect();
    assert!(failed.iter().any(|c| c["name"] == "alpha-plus-contact" && c["witness"].as_array().map(Vec::len) == Some(2)));
}

#[test]
fn reports_are_deterministic_apart_from_wall_time() {
    for name in ["flow-twist-margin", "surgery-gluing-q2", "cone-quarter", "torus-unperturbed"] {
        let src = bicontact_lab::examples::find(name).unwrap();
        let strip = |mut v: Value| {
            v.as_object_mut().unwrap().remove("wall_time_seconds");
            serde_json::to_string(&v).unwrap()
        };
        let a = strip(serde_json::to_value(run_source(src).unwrap()).unwrap());
        let b = strip(serde_json::to_value(run_source(src).unwrap()).unwrap());
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn seed_picks_the_orbit_start() {
    let base = bicontact_lab::examples::find("flow-twist-margin").unwrap();
    let start = |seed: u64| {
        let src = base.replace("seed = 7", &format!("seed = {seed}"));
        run_source(&src).unwrap().values["start"].clone()
    };
    assert_eq!(start(7), start(7));
    assert_ne!(start(7), start(8));
}

fn csv_rows(name: &str) -> (Vec<String>, usize) {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    bin().args(["run", name, "--out"]).arg(dir.path().join("r.json")).arg("--csv").arg(&csv).output().unwrap();
    let mut reader = csv::Reader::from_path(&csv).unwrap();
    let header = reader.headers().unwrap().iter().map(String::from).collect();
    (header, reader.records().count())
}

#[test]
fn csv_views() {
    let (header, rows) = csv_rows("cone-sweep");
    assert_eq!(&header[..5], ["name", "passed", "margin", "threshold", "citation"]);
    // 2500 cells plus the two expectations.
    assert_eq!(rows, 2502);
    let (_, rows) = csv_rows("flow-splitting-golden");
    // One row per return, the orbit margin and the expectation.
    assert_eq!(rows, 12);
}

#[test]
fn csv_write_errors_name_the_path() {
    let out = bin()
        .args(["run", "coeffs-golden-mean", "--out", "/dev/null", "--csv", "/nonexistent/dir/r.csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/dir/r.csv"));
}

#[test]
fn threads_flag_and_environment() {
    let a = bin().args(["run", "cone-quarter", "--threads", "2"]).output().unwrap();
    assert_eq!(a.status.code(), Some(0));
    let b = bin().args(["run", "cone-quarter"]).env("BICONTACT_LAB_THREADS", "1").output().unwrap();
    assert_eq!(b.status.code(), Some(0));
    let strip = |o: &[u8]| {
        let mut v: Value = serde_json::from_slice(o).unwrap();
        v.as_object_mut().unwrap().remove("wall_time_seconds");
        v
    };
    assert_eq!(strip(&a.stdout), strip(&b.stdout));
    let z = bin().args(["run", "cone-quarter", "--threads", "0"]).output().unwrap();
    assert_eq!(z.status.code(), Some(2));
}

#[test]
fn list_examples_names_every_example() {
    let out = bin().arg("list-examples").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for (name, _) in EXAMPLES {
        assert!(text.contains(name));
    }
}

#[test]
fn scenario_echo_round_trips() {
    for (_, src) in EXAMPLES {
        let Ok(s) = Scenario::from_toml(src) else { continue };
        let json = serde_json::to_string(&s).unwrap();
        let back: Scenario = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
    }
}
