use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(format!("{name}.json"))
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn ief<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_ief")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn value(v: &Value) -> f64 {
    v["value"].as_f64().unwrap()
}

#[test]
fn ief_check_on_the_interim_fixture_holds() {
    let f = fixture("ief_without_ef");
    let out = ief(["check".as_ref(), "--property".as_ref(), "ief".as_ref(), f.as_os_str(), f.as_os_str()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["holds"], true);
    assert_eq!(v["exact"], true);
}

#[test]
fn failed_properties_exit_with_two() {
    let f = fixture("ief_without_ef");
    let out = ief(["check".as_ref(), "--property".as_ref(), "ex-post-ef".as_ref(), f.as_os_str(), f.as_os_str()]);
    assert_eq!(code(&out), 2);
    let v = json(&out);
    assert_eq!(v["holds"], false);
    assert!(v["witness"].is_object());

    let p = fixture("proportional_without_ief");
    let out = ief(["oracle".as_ref(), "exists".as_ref(), "--property".as_ref(), "ief".as_ref(), p.as_os_str()]);
    assert_eq!(code(&out), 2);
    assert_eq!(json(&out)["exists"], false);
    let out = ief(["solve".as_ref(), p.as_os_str()]);
    assert_eq!(code(&out), 2);
    assert_eq!(json(&out)["status"], "infeasible");
}

#[test]
fn utilitarian_solve_on_the_pareto_fixture() {
    let f = fixture("pareto_failure");
    let out = ief(["solve".as_ref(), "--objective".as_ref(), "util".as_ref(), f.as_os_str()]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let support = v["lottery"]["support"].as_array().unwrap();
    assert_eq!(support.len(), 3);
    for entry in support {
        assert!((entry["prob"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-6);
    }
    assert!((value(&v["value"]) - 11.0 / 9.0).abs() < 1e-6);
}

#[test]
fn mismatched_dimensions_exit_with_one() {
    let inst = scratch("inst3.json", r#"{"agents": 3, "items": 3, "valuations": [["1","0","0"],["0","1","0"],["0","0","1"]]}"#);
    let lot = scratch("lot2.json", r#"{"support": [{"matching": [0, 1], "prob": "1"}]}"#);
    let out = ief(["check".as_ref(), "--property".as_ref(), "ief".as_ref(), inst.as_os_str(), lot.as_os_str()]);
    assert_eq!(code(&out), 1);
    assert!(out.stdout.is_empty());

    let bad = scratch("rows.json", r#"{"agents": 3, "items": 3, "valuations": [["1","0","0"]]}"#);
    let out = ief(["solve".as_ref(), bad.as_os_str()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension mismatch"));
}

#[test]
fn malformed_json_reports_its_position() {
    let bad = scratch("broken.json", "{\"agents\": 2,\n \"items\": 2,\n \"valuations\": [[\"1\", ]]}");
    let out = ief(["solve".as_ref(), bad.as_os_str()]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("column"), "{err}");
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&ief(["frobnicate"])), 1);
    assert_eq!(code(&ief(["solve", "--objective", "median", "x.json"])), 1);
    let f = fixture("ief_without_ef");
    let out = ief([
        "--format".as_ref(),
        "csv".as_ref(),
        "check".as_ref(),
        "--property".as_ref(),
        "ief".as_ref(),
        f.as_os_str(),
        f.as_os_str(),
    ]);
    assert_eq!(code(&out), 1);
    assert_eq!(code(&ief(["--help"])), 0);
}

#[test]
fn solve_output_round_trips_through_check() {
    let inst = scratch(
        "round.json",
        r#"{"agents": 4, "items": 4, "valuations": [
            ["1/2","1/4","1/4","0"], ["1/3","1/3","0","1/3"], ["0","1/2","1/4","1/4"], ["1/4","1/4","1/4","1/4"]]}"#,
    );
    for f in [fixture("pareto_failure"), fixture("ief_without_ef"), inst] {
        for objective in ["util", "egal", "lognash"] {
            let out = ief(["solve".as_ref(), "--objective".as_ref(), objective.as_ref(), f.as_os_str()]);
            if code(&out) == 2 {
                assert_eq!(objective, "lognash");
                continue;
            }
            assert_eq!(code(&out), 0, "{objective}: {}", String::from_utf8_lossy(&out.stderr));
            let solved = scratch(&format!("solved-{objective}.json"), std::str::from_utf8(&out.stdout).unwrap());
            let args = ["check", "--property", "ief", "--epsilon", "1e-6"];
            let check = ief(args.iter().map(|s| s.as_ref()).chain([f.as_os_str(), solved.as_os_str()]));
            assert_eq!(code(&check), 0, "{objective}: {}", String::from_utf8_lossy(&check.stdout));
            assert_eq!(json(&check)["exact"], false);
        }
    }
}

#[test]
fn output_is_deterministic() {
    let f = fixture("rent_b_beats_a");
    let run = || ief(["rent".as_ref(), "--rent".as_ref(), "1".as_ref(), f.as_os_str()]).stdout;
    assert_eq!(run(), run());
    let f = fixture("pareto_failure");
    let run = || ief(["--format".as_ref(), "csv".as_ref(), "solve".as_ref(), f.as_os_str()]).stdout;
    let first = run();
    assert_eq!(first, run());
    let text = String::from_utf8(first).unwrap();
    assert_eq!(text.lines().next(), Some("matching,prob,welfare"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn subsidy_output_passes_paycheck() {
    let f = fixture("subsidy_b_beats_a");
    let out = ief(["subsidy".as_ref(), "--epsilon".as_ref(), "0.001".as_ref(), f.as_os_str()]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["check"]["holds"], true);
    assert!(value(&v["total"]) <= 0.03 + 1e-6);
    let solved = scratch("subsidy.json", std::str::from_utf8(&out.stdout).unwrap());
    let out = ief([
        "paycheck".as_ref(),
        "--kind".as_ref(),
        "C".as_ref(),
        "--epsilon".as_ref(),
        "0.001".as_ref(),
        f.as_os_str(),
        solved.as_os_str(),
        solved.as_os_str(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let out = ief([
        "paycheck".as_ref(),
        "--kind".as_ref(),
        "A".as_ref(),
        f.as_os_str(),
        solved.as_os_str(),
        solved.as_os_str(),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn fixture_payments_check_exactly() {
    for (name, eps) in [("subsidy_b_beats_a", "1/100"), ("subsidy_a_beats_b", "1/100"), ("rent_ef_vs_ief", "0")] {
        let f = fixture(name);
        let out = ief([
            "paycheck".as_ref(),
            "--epsilon".as_ref(),
            eps.as_ref(),
            f.as_os_str(),
            f.as_os_str(),
            f.as_os_str(),
        ]);
        assert_eq!(code(&out), 0, "{name}: {}", String::from_utf8_lossy(&out.stdout));
        assert_eq!(json(&out)["exact"], true);
    }
    let f = fixture("subsidy_b_beats_a");
    let zero = scratch("zero.json", r#"["0", "0", "0"]"#);
    let out = ief(["paycheck".as_ref(), "--kind".as_ref(), "B".as_ref(), f.as_os_str(), f.as_os_str(), zero.as_os_str()]);
    assert_eq!(code(&out), 2);
    assert_eq!(json(&out)["holds"], false);
}

#[test]
fn a_payments_for_a_deterministic_lottery() {
    let f = fixture("subsidy_ef_vs_ief");
    let lot = scratch("abc.json", r#"{"support": [{"matching": [0, 1, 2], "prob": "1"}]}"#);
    let out = ief(["apay".as_ref(), f.as_os_str(), lot.as_os_str()]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let exact: Vec<&str> = v["payments"]["values"].as_array().unwrap().iter().map(|x| x["exact"].as_str().unwrap()).collect();
    assert_eq!(exact, ["1/3", "0", "0"]);
    assert_eq!(v["check"]["holds"], true);

    let out = ief(["graph".as_ref(), f.as_os_str(), f.as_os_str()]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["ief_able_a"], true);
    assert!(v["weights"][0][0].is_null());
}

#[test]
fn rent_meets_its_target() {
    let f = fixture("rent_b_beats_a");
    let out = ief(["rent".as_ref(), "--rent".as_ref(), "1".as_ref(), f.as_os_str()]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert!(value(&v["min_expected_utility"]) >= 1.0 / 12.0 - 1e-3 - 1e-6);
    assert!(value(&v["rent_residual"]).abs() <= 1e-7);
    assert_eq!(v["check"]["holds"], true);
}

#[test]
fn two_ebm_from_json() {
    let w = scratch(
        "psi.json",
        r#"{"n": 3, "psi": [[0, 1, 1, 0, 2], [1, 0, 0, 1, 2], [0, 0, 1, 1, 1]], "forbidden": [[2, 0]]}"#,
    );
    let out = ief(["2ebm".as_ref(), w.as_os_str()]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["matching"], serde_json::json!([1, 0, 2]));
    assert!((value(&v["value"]) - 4.0).abs() < 1e-9);

    let none = scratch("blocked.json", r#"{"n": 2, "forbidden": [[0, 0], [0, 1]]}"#);
    assert_eq!(code(&ief(["2ebm".as_ref(), none.as_os_str()])), 2);
    let shared = scratch("shared.json", r#"{"n": 2, "psi": [[0, 0, 0, 1, 1]]}"#);
    assert_eq!(code(&ief(["2ebm".as_ref(), shared.as_os_str()])), 1);
}

#[test]
fn price_experiment_emits_csv() {
    let out = ief(["experiment", "price", "--family", "egal", "--n", "4,5", "--jobs", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "family,size,n,unconstrained,ief,ratio");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("egal,4,4,"));
    assert!(lines[2].starts_with("egal,5,5,"));
    let cells: Vec<f64> = lines[2].split(',').skip(3).map(|c| c.parse().unwrap()).collect();
    assert!((cells[1] - 0.25).abs() < 1e-6);

    let out = ief(["experiment", "price", "--family", "util", "--n", "3"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn oracle_commands() {
    let out = ief(["oracle", "random", "--seed", "7", "--cases", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(json(&out)["failures"], serde_json::json!([]));

    let f = fixture("eef_without_ief");
    let out = ief(["oracle".as_ref(), "exists".as_ref(), "--property".as_ref(), "eef".as_ref(), f.as_os_str()]);
    assert_eq!(code(&out), 0);
    assert!(json(&out)["allocation"].is_array());

    let f = fixture("pareto_failure");
    let out = ief(["oracle".as_ref(), "full-lp".as_ref(), "--problem".as_ref(), "util".as_ref(), f.as_os_str()]);
    assert_eq!(code(&out), 0);
    assert!((value(&json(&out)["value"]) - 11.0 / 9.0).abs() < 1e-6);
}
