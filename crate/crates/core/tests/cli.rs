use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fairdiv::gmref::cycling_instance;
use fairdiv::io::{InstanceFile, ResultFile};
use serde_json::Value;

fn fairdiv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairdiv")).args(args).output().unwrap()
}

fn fairdiv_env(args: &[&str], key: &str, val: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairdiv"))
        .args(args)
        .env(key, val)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn cycling_file(dir: &Path) -> PathBuf {
    let p = dir.join("cycling.json");
    std::fs::write(&p, InstanceFile::from_instance(&cycling_instance()).to_json()).unwrap();
    p
}

fn statuses(v: &Value) -> Vec<(String, String)> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|r| {
            (
                r["criterion"].as_str().unwrap().into(),
                r["status"].as_str().unwrap().into(),
            )
        })
        .collect()
}

#[test]
fn gen_is_deterministic_and_validates_k() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for p in [&a, &b] {
        let o = fairdiv(&[
            "gen",
            "--agents",
            "2",
            "--goods",
            "5",
            "--k",
            "5",
            "--weights",
            "random",
            "--seed",
            "11",
            "--out",
            s(p),
        ]);
        assert_eq!(code(&o), 0);
    }
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    let file = InstanceFile::from_json(std::str::from_utf8(&text).unwrap()).unwrap();
    assert_eq!(file.meta.k, Some(fairdiv::rational::int(5)));
    assert_eq!((file.agents.len(), file.goods.len()), (2, 5));

    let o = fairdiv(&["gen", "--agents", "2", "--goods", "5", "--k", "1", "--seed", "1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("k = 1"));
    assert_eq!(code(&fairdiv(&["gen", "--agents", "x", "--goods", "1", "--k", "2"])), 2);

    let o = fairdiv(&["gen", "--agents", "1", "--goods", "1", "--k", "2"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("seed: "));
}

#[test]
fn solve_and_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let input = cycling_file(dir.path());
    for mode in ["wefx", "weqx"] {
        let out = dir.path().join(format!("{mode}.json"));
        let o = fairdiv(&[
            "solve",
            "--input",
            s(&input),
            "--mode",
            mode,
            "--trace",
            "--out",
            s(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let saved: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert!(saved["trace"].is_object());
        let certs = statuses(&saved["certificates"]);
        assert!(certs.iter().all(|(_, st)| st == "pass"), "{certs:?}");

        let o = fairdiv(&["verify", "--input", s(&input), "--result", s(&out)]);
        assert_eq!(code(&o), 0);
        assert_eq!(statuses(&json(&o)), certs);
    }
}

#[test]
fn verify_reports_failures_and_not_applicable() {
    let dir = tempfile::tempdir().unwrap();
    let input = cycling_file(dir.path());
    let out = dir.path().join("r.json");
    assert_eq!(code(&fairdiv(&["solve", "--input", s(&input), "--out", s(&out)])), 0);

    let mut res = ResultFile::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    // move every good of the first agent to the second
    let moved: Vec<String> = std::mem::take(&mut res.allocation[0].goods);
    res.allocation[1].goods.extend(moved);
    let tampered = dir.path().join("t.json");
    std::fs::write(&tampered, res.to_json()).unwrap();
    let o = fairdiv(&[
        "verify",
        "--input",
        s(&input),
        "--result",
        s(&tampered),
        "--criteria",
        "wefx,equilibrium",
    ]);
    assert_eq!(code(&o), 1);
    let v = json(&o);
    assert_eq!(v[0]["status"], "fail");
    assert_eq!(v[0]["witness"]["kind"], "pairwise");

    res.allocation[1].goods.pop();
    std::fs::write(&tampered, res.to_json()).unwrap();
    assert_eq!(
        code(&fairdiv(&["verify", "--input", s(&input), "--result", s(&tampered)])),
        2
    );

    let weighted = dir.path().join("w.json");
    let mut file = InstanceFile::from_instance(&cycling_instance());
    file.agents[0].weight = fairdiv::rational::ratio(1, 10);
    file.agents[1].weight = fairdiv::rational::ratio(9, 10);
    std::fs::write(&weighted, file.to_json()).unwrap();
    let wout = dir.path().join("wr.json");
    assert_eq!(
        code(&fairdiv(&["solve", "--input", s(&weighted), "--out", s(&wout)])),
        0
    );
    let o = fairdiv(&[
        "verify",
        "--input",
        s(&weighted),
        "--result",
        s(&wout),
        "--criteria",
        "efx,wefx",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)[0]["status"], "not-applicable");
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"agents\": []}").unwrap();
    assert_eq!(code(&fairdiv(&["solve", "--input", s(&bad)])), 2);
    assert_eq!(
        code(&fairdiv(&["solve", "--input", s(&dir.path().join("missing.json"))])),
        2
    );
    let input = cycling_file(dir.path());
    assert_eq!(code(&fairdiv(&["solve", "--input", s(&input), "--mode", "efx"])), 2);
    assert_eq!(
        code(&fairdiv(&[
            "solve",
            "--input",
            s(&input),
            "--initial-owner",
            "a2,a1,a1,a2,a2"
        ])),
        2
    );
    assert_eq!(
        code(&fairdiv_env(
            &["solve", "--input", s(&input)],
            "FAIRDIV_CHECK_INVARIANTS",
            "yes"
        )),
        2
    );
}

#[test]
fn invariant_checking_follows_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let input = cycling_file(dir.path());
    let checked = |o: &Output| json(o)["config"]["check_invariants"].as_bool().unwrap();
    assert!(checked(&fairdiv(&["solve", "--input", s(&input)])));
    assert!(!checked(&fairdiv_env(
        &["solve", "--input", s(&input)],
        "FAIRDIV_CHECK_INVARIANTS",
        "0"
    )));
    assert!(checked(&fairdiv_env(
        &["solve", "--input", s(&input), "--check-invariants"],
        "FAIRDIV_CHECK_INVARIANTS",
        "0"
    )));

    let big = dir.path().join("big.json");
    let o = fairdiv(&[
        "gen",
        "--agents",
        "10",
        "--goods",
        "25",
        "--k",
        "2",
        "--seed",
        "3",
        "--out",
        s(&big),
    ]);
    assert_eq!(code(&o), 0);
    assert!(!checked(&fairdiv(&["solve", "--input", s(&big)])));
    assert!(checked(&fairdiv_env(
        &["solve", "--input", s(&big)],
        "FAIRDIV_CHECK_INVARIANTS",
        "1"
    )));
}

#[test]
fn empty_goods_solve_to_an_empty_allocation() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("e.json");
    assert_eq!(
        code(&fairdiv(&[
            "gen",
            "--agents",
            "3",
            "--goods",
            "0",
            "--k",
            "2",
            "--seed",
            "0",
            "--out",
            s(&input)
        ])),
        0
    );
    let o = fairdiv(&["solve", "--input", s(&input)]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert!(v["allocation"]
        .as_array()
        .unwrap()
        .iter()
        .all(|b| b["goods"].as_array().unwrap().is_empty()));
}

#[test]
fn oracle_lists_and_checks() {
    let dir = tempfile::tempdir().unwrap();
    let input = cycling_file(dir.path());
    let o = fairdiv(&["oracle", "--input", s(&input), "--list", "wefx"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert!(v["count"].as_u64().unwrap() > 0);

    let out = dir.path().join("r.json");
    assert_eq!(code(&fairdiv(&["solve", "--input", s(&input), "--out", s(&out)])), 0);
    let o = fairdiv(&[
        "oracle",
        "--input",
        s(&input),
        "--check-po",
        s(&out),
        "--check-fpo",
        s(&out),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["fpo"]["status"], "pass");

    assert_eq!(
        code(&fairdiv(&[
            "oracle",
            "--input",
            s(&input),
            "--list",
            "weqx",
            "--budget",
            "10"
        ])),
        4
    );
    assert_eq!(code(&fairdiv(&["oracle", "--input", s(&input)])), 2);
}

#[test]
fn counterexample_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.json");
    let o = fairdiv(&["counterexample", "--max-rounds", "10", "--out", s(&trace)]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["result"]["outcome"], "cycle-detected");
    assert_eq!(v["result"]["scale"], "5");
    let rows: Value = serde_json::from_str(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(rows[1]["prices"], serde_json::json!(["5", "5", "5", "5", "25"]));
    assert_eq!(code(&fairdiv(&["counterexample", "--max-rounds", "1"])), 4);
}

#[test]
fn bench_rows_stay_within_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("bench.csv");
    let o = fairdiv(&["bench", "--trials", "100", "--seed", "1", "--csv", s(&csv_path)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
    let headers: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        headers,
        [
            "seed",
            "n",
            "m",
            "k",
            "mode",
            "init_rounds",
            "realloc_rounds",
            "bound_init",
            "bound_realloc",
            "wallclock"
        ]
    );
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let num = |i: usize| rec[i].parse::<u64>().unwrap();
        assert!(num(5) <= num(7) && num(6) <= num(8));
        rows += 1;
    }
    assert_eq!(rows, 200);
}
