use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gblab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gblab"))
        .args(args)
        .env_remove("GBLAB_SEED")
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

fn json_stderr(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().expect("an error line")).expect("stderr is JSON")
}

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn regular_pmf_on_p11() {
    let out = gblab(&["bohr", "pmf", "--p", "11", "--S", "1", "--rho", "1/5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    let masses = v["masses"].as_object().unwrap();
    assert_eq!(masses["0"], "17/55");
    assert_eq!(masses["1"], "17/55");
    assert_eq!(masses["10"], "17/55");
    assert_eq!(masses["2"], "2/55");
    assert_eq!(masses["9"], "2/55");
    assert_eq!(masses.len(), 5);
}

#[test]
fn word_norm_of_one() {
    let v = json_stdout(&gblab(&[
        "bohr", "norms", "--p", "7", "--S", "2,3", "--a", "1",
    ]));
    assert_eq!(v["word"], 2);
}

#[test]
fn members_respect_shift() {
    let v = json_stdout(&gblab(&[
        "bohr", "members", "--p", "13", "--S", "1", "--rho", "1/6", "--shift", "5",
    ]));
    assert_eq!(v["members"], serde_json::json!([3, 4, 5, 6, 7]));
}

#[test]
fn missing_prime_is_a_usage_error() {
    let out = gblab(&["bohr", "pmf", "--S", "1", "--rho", "1/5"]);
    assert_eq!(out.status.code(), Some(2));
    let e = json_stderr(&out);
    assert_eq!(e["code"], "Usage");
    assert!(e["argument"].as_str().unwrap().contains("--p"));
}

#[test]
fn composite_modulus_rejected() {
    let out = gblab(&["bohr", "members", "--p", "15", "--S", "1", "--rho", "1/5"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json_stderr(&out)["code"], "NotPrime");
}

#[test]
fn malformed_function_file() {
    let dir = scratch("malformed");
    for (name, body) in [
        ("short.csv", "0,0.5\n1,0.5\n"),
        ("dup.csv", "0,1\n0,1\n1,1\n2,1\n3,1\n4,1\n"),
        ("nan.csv", "0,1\n1,nan\n2,1\n3,1\n4,1\n"),
        ("range.csv", "0,1\n1,1\n2,1\n3,1\n4,1\n5,1\n"),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, body).unwrap();
        let out = gblab(&[
            "gowers",
            "cauchy",
            "--p",
            "5",
            "--f",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        assert_eq!(json_stderr(&out)["argument"], "f", "{name}");
    }
}

#[test]
fn function_file_with_header() {
    let dir = scratch("header");
    let path = dir.join("f.csv");
    std::fs::write(&path, "index,value\n# constant\n0,1\n1,1\n2,1\n3,1\n4,1\n").unwrap();
    let v = json_stdout(&gblab(&[
        "gowers",
        "cauchy",
        "--p",
        "5",
        "--f",
        path.to_str().unwrap(),
    ]));
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn small_constant_takes_no_steps() {
    let dir = scratch("constant");
    let out = gblab(&[
        "khintchine",
        "run",
        "--p",
        "101",
        "--gen",
        "constant:value=0.1",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let trace = std::fs::read_to_string(dir.join("trace.jsonl")).unwrap();
    let lines: Vec<Value> = trace
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0]["kind"], "terminal");
    let cert: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("certificate.json")).unwrap())
            .unwrap();
    assert_eq!(cert["steps"], 0);
    assert_eq!(cert["outcome"], "terminal");
}

#[test]
fn zero_budget_exhausts() {
    let out = gblab(&[
        "khintchine",
        "run",
        "--p",
        "101",
        "--gen",
        "constant:value=0.7",
        "--budget",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(json_stderr(&out)["code"], "BudgetExhausted");
}

#[test]
fn r4_greedy_set_is_progression_free() {
    let v = json_stdout(&gblab(&["khintchine", "r4", "--n", "50"]));
    assert_eq!(v["ap_free"], true);
    assert_eq!(v["scans_agree"], true);
    let v = json_stdout(&gblab(&[
        "khintchine",
        "r4",
        "--n",
        "10",
        "--set",
        "1,2,3,4",
    ]));
    assert_eq!(v["ap_free"], false);
}

#[test]
fn verify_cauchy() {
    let out = gblab(&["verify", "cauchy", "--trials", "200", "--p", "101"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_stdout(&out)["pass"], true);
}

#[test]
fn verify_edual_exact() {
    let out = gblab(&["verify", "edual-exact", "--p", "17"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn verify_ati_echoes_constant() {
    let out = gblab(&["verify", "ati", "--grid", "default"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    assert_eq!(v["constants"]["ATI_C"], "2");
}

#[test]
fn verify_writes_report_file() {
    let dir = scratch("verify");
    let out = gblab(&["--out", dir.to_str().unwrap(), "verify", "r4"]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("r4.json")).unwrap()).unwrap();
    assert_eq!(report["suite"], "r4");
}

#[test]
fn unknown_suite() {
    let out = gblab(&["verify", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json_stderr(&out)["argument"], "suite");
}

#[test]
fn config_file_sets_seed_and_rejects_unknown_keys() {
    let dir = scratch("config");
    let good = dir.join("good.toml");
    std::fs::write(&good, "seed = 9\n").unwrap();
    let args = |cfg: &str| {
        vec![
            "--config".to_string(),
            cfg.to_string(),
            "gowers".into(),
            "cauchy".into(),
            "--p".into(),
            "31".into(),
            "--gen".into(),
            "random".into(),
        ]
    };
    let run = |a: Vec<String>| gblab(&a.iter().map(String::as_str).collect::<Vec<_>>());
    let with_cfg = run(args(good.to_str().unwrap()));
    let with_flag = gblab(&[
        "--seed", "9", "gowers", "cauchy", "--p", "31", "--gen", "random",
    ]);
    assert_eq!(with_cfg.stdout, with_flag.stdout);
    let bad = dir.join("bad.toml");
    std::fs::write(&bad, "sede = 9\n").unwrap();
    assert_eq!(run(args(bad.to_str().unwrap())).status.code(), Some(2));
}

#[test]
fn seed_changes_generated_functions() {
    let a = gblab(&[
        "--seed", "1", "gowers", "cauchy", "--p", "31", "--gen", "random",
    ]);
    let b = gblab(&[
        "--seed", "2", "gowers", "cauchy", "--p", "31", "--gen", "random",
    ]);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn output_is_deterministic() {
    let cases: [&[&str]; 3] = [
        &["verify", "cauchy", "--trials", "50", "--p", "101"],
        &[
            "inverse",
            "u2",
            "--p",
            "101",
            "--gen",
            "phase:xi=5,eps=0.2",
            "--S",
            "1",
            "--rho",
            "2/5,3/250",
            "--eta",
            "0.1",
        ],
        &[
            "gowers",
            "u3",
            "--p",
            "101",
            "--gen",
            "planted:alpha=3",
            "--S",
            "1",
            "--rho",
            "2/5,1/10,1/40",
            "--mode",
            "mc",
            "--samples",
            "5000",
        ],
    ];
    for args in cases {
        let (a, b) = (gblab(args), gblab(args));
        assert_eq!(a.status.code(), Some(0), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn spectrum_csv_of_a_character() {
    let out = gblab(&["spectral", "dft", "--p", "7", "--gen", "phase:xi=2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 7);
    for r in rows {
        let expect = if r[0] == 2.0 { 1.0 } else { 0.0 };
        assert!((r[1] - expect).abs() < 1e-12 && r[2].abs() < 1e-12);
    }
}

#[test]
fn help_exits_cleanly() {
    let out = gblab(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("verify"));
}
