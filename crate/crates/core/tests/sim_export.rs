use drsel_core::dgp::{Scenario, Setting};
use drsel_core::sim::{export, fmt_sig6, run_simulation, SelectedModel, SimPlan, SimStrategy};

fn small_plan() -> SimPlan {
    let mut plan = SimPlan::desk(vec![(Scenario::S2, Setting::A), (Scenario::S1, Setting::A)], 11);
    plan.n = 400;
    plan.p = 10;
    plan.reps = 4;
    plan.config.grid_size = 30;
    plan
}

fn read(path: &std::path::Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let mut rows = vec![r.headers().unwrap().iter().map(String::from).collect::<Vec<_>>()];
    rows.extend(r.records().map(|x| x.unwrap().iter().map(String::from).collect()));
    rows
}

#[test]
fn export_writes_three_tables_in_fixed_order() {
    let report = run_simulation(&small_plan()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    export(&report, dir.path()).unwrap();

    let cov = read(&dir.path().join("coverage.csv"));
    assert_eq!(cov[0][..4], ["scenario", "setting", "strategy", "coverage"]);
    assert_eq!(cov.len(), 1 + 2 * SimStrategy::ALL.len());
    // Cells come out sorted whatever the plan order.
    assert_eq!(cov[1][0], "1");
    assert_eq!(cov[cov.len() - 1][0], "2");
    for row in &cov[1..] {
        let c: f64 = row[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&c));
        assert_eq!(row[8], "0");
    }

    let sel = read(&dir.path().join("selection_metrics.csv"));
    assert_eq!(sel.len(), 1 + 2 * 2);
    let reps = read(&dir.path().join("replicates.csv"));
    assert_eq!(reps.len(), 1 + 2 * 4 * SimStrategy::ALL.len());
    for row in &reps[1..] {
        assert!(row[9] == "0" || row[9] == "1" || !row[12].is_empty());
    }
}

#[test]
fn report_does_not_depend_on_pool_size() {
    let plan = small_plan();
    let run = |k| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(k).build().unwrap();
        pool.install(|| run_simulation(&plan).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a.coverage, b.coverage);
    assert_eq!(a.selection, b.selection);

    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    export(&a, da.path()).unwrap();
    export(&b, db.path()).unwrap();
    for f in ["coverage.csv", "selection_metrics.csv", "replicates.csv"] {
        assert_eq!(
            std::fs::read(da.path().join(f)).unwrap(),
            std::fs::read(db.path().join(f)).unwrap()
        );
    }
}

#[test]
fn report_lookups() {
    let report = run_simulation(&small_plan()).unwrap();
    let row = report
        .coverage_row(Scenario::S2, Setting::A, SimStrategy::OracleUni)
        .unwrap();
    assert_eq!(row.successes + row.failures, 4);
    assert!(report
        .selection_row(Scenario::S1, Setting::A, SelectedModel::Outcome)
        .is_some());
    assert!(report
        .coverage_row(Scenario::S3, Setting::A, SimStrategy::Uni)
        .is_none());
}

#[test]
fn six_significant_digits() {
    assert_eq!(fmt_sig6(0.0), "0");
    assert_eq!(fmt_sig6(1.0), "1");
    assert_eq!(fmt_sig6(0.945), "0.945");
    assert_eq!(fmt_sig6(1.60312345), "1.60312");
    assert_eq!(fmt_sig6(-0.000123456789), "-0.000123457");
    assert_eq!(fmt_sig6(1234567.0), "1.23457e+06");
    assert_eq!(fmt_sig6(0.00001), "1e-05");
    assert_eq!(fmt_sig6(f64::NAN), "NaN");
}
