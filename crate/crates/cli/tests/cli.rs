use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use drsel::report::{EstimateReport, SelectReport};
use drsel_core::rng::stream;
use rand::Rng;
use rand_distr::StandardNormal;

fn drsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drsel"))
        .args(args)
        .env_remove("DRSEL_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok_stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn emit_s2a(dir: &Path, seed: u64) -> PathBuf {
    let path = dir.join(format!("s2a_{seed}.csv"));
    let seed = seed.to_string();
    let out = drsel(&[
        "dgp",
        "emit",
        "--scenario",
        "2",
        "--setting",
        "a",
        "--n",
        "2000",
        "--p",
        "20",
        "--seed",
        &seed,
        "--out",
        s(&path),
    ]);
    ok_stdout(&out);
    path
}

#[test]
fn schema_errors_exit_4_and_name_the_column() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "d.csv", "y,x1,x2\n1,2,3\n2,3,4\n");
    let out = drsel(&["estimate", "--input", s(&f), "--outcome", "y", "--treatment", "treat"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"treat\""));

    let f = write(dir.path(), "dup.csv", "y,a,x,x\n1,0,2,3\n2,1,3,4\n");
    let out = drsel(&["select", "--input", s(&f), "--outcome", "y", "--treatment", "a"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate"));
}

#[test]
fn parse_io_and_usage_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "bad.csv", "y,a,x\n1,0,2\n2,1,oops\n");
    let out = drsel(&["estimate", "--input", s(&f), "--outcome", "y", "--treatment", "a"]);
    assert_eq!(out.status.code(), Some(3));

    let missing = dir.path().join("nope.csv");
    let out = drsel(&["estimate", "--input", s(&missing), "--outcome", "y", "--treatment", "a"]);
    assert_eq!(out.status.code(), Some(1));

    let out = drsel(&[
        "estimate",
        "--input",
        s(&f),
        "--outcome",
        "y",
        "--treatment",
        "a",
        "--clip",
        "0.9,0.1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = drsel(&["simulate", "--scenario", "7"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn estimate_on_null_effect_data_covers_zero_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let data = emit_s2a(dir.path(), 7);
    let text = ok_stdout(&drsel(&[
        "estimate",
        "--input",
        s(&data),
        "--outcome",
        "Y",
        "--treatment",
        "A",
    ]));
    let rep: EstimateReport = serde_json::from_str(&text).unwrap();
    assert!(rep.estimate.abs() <= 3.0 * rep.se, "{} vs se {}", rep.estimate, rep.se);
    assert_eq!(rep.variance_method, "analytic");
    assert_eq!(rep.n, 2000);
    assert_eq!(rep.n_treated + rep.n_control, 2000);
    assert_eq!(rep.balance.len(), 19);
    assert!(rep.ci_lower < rep.estimate && rep.estimate < rep.ci_upper);
    for name in ["X3", "X4"] {
        assert!(rep.sets.m_beta.iter().any(|c| c == name), "{:?}", rep.sets);
    }
    // floats survive the text form exactly
    assert_eq!(drsel::to_json(&rep), text);
}

#[test]
fn output_ignores_row_order_and_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let data = emit_s2a(dir.path(), 3);
    let text = std::fs::read_to_string(&data).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[1..].reverse();
    let shuffled = write(dir.path(), "rev.csv", &(lines.join("\n") + "\n"));

    let run = |input: &Path, workers: &str| {
        ok_stdout(&drsel(&[
            "--workers",
            workers,
            "estimate",
            "--input",
            s(input),
            "--outcome",
            "Y",
            "--treatment",
            "A",
            "--seed",
            "5",
        ]))
    };
    let base = run(&data, "1");
    assert_eq!(base, run(&shuffled, "1"));
    assert_eq!(base, run(&data, "3"));
}

fn noise_csv(seed: u64, n: usize) -> String {
    let mut rng = stream(seed, 0);
    let mut csv = String::from("y,a,x1,x2,x3,x4,x5\n");
    for _ in 0..n {
        let y: f64 = rng.sample(StandardNormal);
        let a = u8::from(rng.random::<f64>() < 0.5);
        let xs: Vec<String> = (0..5)
            .map(|_| rng.sample::<f64, _>(StandardNormal).to_string())
            .collect();
        csv.push_str(&format!("{y},{a},{}\n", xs.join(",")));
    }
    csv
}

// At n = 10 000 the propensity floor 0.02 sits four null-gradient SDs above
// zero and the outcome floor 0.1 about seven, so noise should never enter.
#[test]
fn pure_noise_selects_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let mut nonempty = Vec::new();
    for seed in 0..20 {
        let f = write(dir.path(), &format!("noise{seed}.csv"), &noise_csv(2024 + seed, 10_000));
        let rep = drsel::run_select(&drsel::RunConfig::new(&f, "y", "a")).unwrap();
        assert!(!rep.cv.propensity.is_empty() && !rep.cv.outcome_treated.is_empty());
        if !rep.sets.u.is_empty() {
            nonempty.push((seed, rep.sets));
        }
    }
    assert!(nonempty.is_empty(), "{nonempty:?}");

    let f = write(dir.path(), "noise.csv", &noise_csv(1, 2000));
    let est: EstimateReport = serde_json::from_str(&ok_stdout(&drsel(&[
        "estimate",
        "--input",
        s(&f),
        "--outcome",
        "y",
        "--treatment",
        "a",
    ])))
    .unwrap();
    assert!(est.adjustment_set.is_empty());
    assert_eq!(est.set_sizes.u, 0);
}

#[test]
fn union_names_all_three_columns_when_the_outcome_model_is_quadratic() {
    let mut rng = stream(77, 0);
    let mut csv = String::from("Y,A,X1,X2,X3\n");
    for _ in 0..5000 {
        let x: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
        let e = 1.0 / (1.0 + (-(1.0 + x[0] + x[2])).exp());
        let a = u8::from(rng.random::<f64>() < e);
        let eps: f64 = rng.sample(StandardNormal);
        let y = 0.1 * x[0] * x[0] + x[1] * x[1] + 2.0 * x[1] + eps;
        csv.push_str(&format!("{y},{a},{},{},{}\n", x[0], x[1], x[2]));
    }
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "quad.csv", &csv);
    let rep: SelectReport = serde_json::from_str(&ok_stdout(&drsel(&[
        "select",
        "--input",
        s(&f),
        "--outcome",
        "Y",
        "--treatment",
        "A",
    ])))
    .unwrap();
    assert_eq!(rep.sets.u, ["X1", "X2", "X3"]);
    assert_eq!(rep.sets.m_beta, ["X2"]);
    assert_eq!(rep.sets.m_alpha, ["X1", "X3"]);
    assert!(rep.sets.i.is_empty());

    let est: EstimateReport = serde_json::from_str(&ok_stdout(&drsel(&[
        "estimate",
        "--input",
        s(&f),
        "--outcome",
        "Y",
        "--treatment",
        "A",
        "--strategy",
        "INTERSECTION",
    ])))
    .unwrap();
    assert_eq!(est.strategy, "INT");
    assert!(est.adjustment_set.is_empty());
}

#[test]
fn separated_treatment_needs_the_bootstrap() {
    let mut rng = stream(9, 0);
    let mut csv = String::from("y,a,x,z\n");
    for i in 0..400 {
        let a = i % 2;
        let x = (2.0 + 3.0 * rng.random::<f64>()) * if a == 1 { 1.0 } else { -1.0 };
        let z: f64 = rng.sample(StandardNormal);
        let e: f64 = rng.sample(StandardNormal);
        csv.push_str(&format!("{},{a},{x},{z}\n", x + e));
    }
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "sep.csv", &csv);
    let args = ["estimate", "--input", s(&f), "--outcome", "y", "--treatment", "a"];

    let out = drsel(&[&args[..], &["--boot-reps", "0"]].concat());
    assert_eq!(out.status.code(), Some(6));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--boot-reps"));

    let rep: EstimateReport =
        serde_json::from_str(&ok_stdout(&drsel(&[&args[..], &["--boot-reps", "40"]].concat()))).unwrap();
    assert!(rep.variance_fallback);
    assert_eq!(rep.variance_method, "bootstrap");
    assert!(rep.separation_warning);
    assert!(rep.se.is_finite() && rep.se > 0.0);
}

#[test]
fn output_location_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let data = emit_s2a(dir.path(), 1);
    let out_dir = dir.path().join("results");
    let out = Command::new(env!("CARGO_BIN_EXE_drsel"))
        .args(["select", "--input", s(&data), "--outcome", "Y", "--treatment", "A"])
        .env("DRSEL_OUT_DIR", &out_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let rep: SelectReport = serde_json::from_slice(&std::fs::read(out_dir.join("select.json")).unwrap()).unwrap();
    assert_eq!(rep.n, 2000);
}

#[test]
fn single_replicate_simulation_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let status = drsel(&[
        "simulate",
        "--scenario",
        "1,2",
        "--setting",
        "a",
        "--reps",
        "1",
        "--n",
        "500",
        "--p",
        "12",
        "--out",
        s(&out),
    ]);
    ok_stdout(&status);
    let mut r = csv::Reader::from_path(out.join("coverage.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2 * 6);
    for row in &rows {
        assert!(row[3] == *"0" || row[3] == *"1", "{row:?}");
    }
    assert!(out.join("selection_metrics.csv").exists());
    assert!(out.join("replicates.csv").exists());
}

#[test]
fn dgp_emit_is_reproducible() {
    let a = ok_stdout(&drsel(&[
        "dgp",
        "emit",
        "--scenario",
        "3",
        "--setting",
        "d",
        "--n",
        "50",
        "--p",
        "8",
        "--seed",
        "4",
    ]));
    let b = ok_stdout(&drsel(&[
        "dgp",
        "emit",
        "--scenario",
        "3",
        "--setting",
        "d",
        "--n",
        "50",
        "--p",
        "8",
        "--seed",
        "4",
    ]));
    assert_eq!(a, b);
    let header = a.lines().next().unwrap();
    assert_eq!(header, "Y,A,X1,X2,X3,X4,X5,X6,X7");
    assert_eq!(a.lines().count(), 51);
}
