//! Monte Carlo harness: replicate the full pipeline over simulated datasets
//! and summarize selection accuracy and interval coverage.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::aipw::{estimate, AipwConfig, VarianceMethod};
use crate::data::{standardize, IndexSet};
use crate::dgp::{generate, true_ace, Scenario, ScenarioSpec, Setting, TruthSets};
use crate::error::{Error, Result};
use crate::pglm::LambdaGrid;
use crate::refit::ClipBounds;
use crate::rng::derive_seed;
use crate::scad::DEFAULT_CONCAVITY;
use crate::selection::{
    select_variables, strategy_set, SelectionConfig, SelectionResult, Strategy, LAMBDA_MIN_LINEAR_OM,
    LAMBDA_MIN_NONLINEAR_OM, LAMBDA_MIN_PS,
};

/// Draws used for the true effect under a nonlinear outcome model.
pub const TRUE_ACE_DRAWS: usize = 2_000_000;
const TRUE_ACE_SEED: u64 = 0x5eed_ace0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SimStrategy {
    Uni,
    Int,
    Out,
    OracleUni,
    OracleInt,
    OracleOut,
}

impl SimStrategy {
    pub const ALL: [SimStrategy; 6] = [
        SimStrategy::Uni,
        SimStrategy::Int,
        SimStrategy::Out,
        SimStrategy::OracleUni,
        SimStrategy::OracleInt,
        SimStrategy::OracleOut,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SimStrategy::Uni => "UNI",
            SimStrategy::Int => "INT",
            SimStrategy::Out => "OUT",
            SimStrategy::OracleUni => "O-UNI",
            SimStrategy::OracleInt => "O-INT",
            SimStrategy::OracleOut => "O-OUT",
        }
    }

    pub fn is_oracle(self) -> bool {
        matches!(
            self,
            SimStrategy::OracleUni | SimStrategy::OracleInt | SimStrategy::OracleOut
        )
    }

    fn strategy(self) -> Strategy {
        match self {
            SimStrategy::Uni | SimStrategy::OracleUni => Strategy::Union,
            SimStrategy::Int | SimStrategy::OracleInt => Strategy::Intersection,
            SimStrategy::Out | SimStrategy::OracleOut => Strategy::Outcome,
        }
    }

    /// Adjustment set: from the selection, or from the truth for oracle variants.
    pub fn set(self, selection: Option<&SelectionResult>, truth: &TruthSets) -> Option<IndexSet> {
        if self.is_oracle() {
            Some(match self.strategy() {
                Strategy::Union => truth.u.clone(),
                Strategy::Intersection => truth.i.clone(),
                Strategy::Outcome => truth.m_beta.clone(),
            })
        } else {
            selection.map(|s| strategy_set(s, self.strategy()))
        }
    }
}

impl fmt::Display for SimStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SimStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let u = s.trim().to_ascii_uppercase();
        SimStrategy::ALL
            .into_iter()
            .find(|k| k.label() == u)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown simulation strategy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub strategies: Vec<SimStrategy>,
    /// Outcome-model λ floor; `None` picks the linear or nonlinear default
    /// from the setting.
    pub lambda_min_om: Option<f64>,
    pub lambda_min_ps: f64,
    pub grid_size: usize,
    pub folds: usize,
    pub a: f64,
    pub clip: ClipBounds,
    /// Bootstrap draws used only when the analytic variance is unavailable.
    pub fallback_boot_reps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            strategies: SimStrategy::ALL.to_vec(),
            lambda_min_om: None,
            lambda_min_ps: LAMBDA_MIN_PS,
            grid_size: 100,
            folds: 10,
            a: DEFAULT_CONCAVITY,
            clip: ClipBounds::default(),
            fallback_boot_reps: 200,
        }
    }
}

impl SimConfig {
    pub fn selection_config(&self, setting: Setting, seed: u64) -> SelectionConfig {
        let om_floor = self.lambda_min_om.unwrap_or(if setting.nonlinear_om() {
            LAMBDA_MIN_NONLINEAR_OM
        } else {
            LAMBDA_MIN_LINEAR_OM
        });
        let mut c = SelectionConfig::new(om_floor, self.lambda_min_ps, seed);
        c.om_grid = LambdaGrid::new(om_floor)
            .with_count(self.grid_size)
            .with_folds(self.folds);
        c.ps_grid = LambdaGrid::new(self.lambda_min_ps)
            .with_count(self.grid_size)
            .with_folds(self.folds);
        c.a = self.a;
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectedSets {
    pub m_alpha: IndexSet,
    pub m_beta: IndexSet,
    pub u: IndexSet,
    pub i: IndexSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyEstimate {
    pub tau_hat: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub set: IndexSet,
    pub variance_method: VarianceMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyOutcome {
    pub strategy: SimStrategy,
    pub result: std::result::Result<StrategyEstimate, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub scenario: Scenario,
    pub setting: Setting,
    pub replicate: usize,
    pub seed: u64,
    pub n_treated: usize,
    pub n_control: usize,
    pub selection: Option<std::result::Result<SelectedSets, String>>,
    pub outcomes: Vec<StrategyOutcome>,
}

/// Generates one dataset, selects once, and estimates with each strategy.
///
/// Failures are recorded in the returned record rather than propagated.
pub fn run_replicate(spec: &ScenarioSpec, config: &SimConfig, replicate: usize) -> ReplicateRecord {
    let mut record = ReplicateRecord {
        scenario: spec.scenario,
        setting: spec.setting,
        replicate,
        seed: spec.seed,
        n_treated: 0,
        n_control: 0,
        selection: None,
        outcomes: Vec::new(),
    };
    let prepared = generate(spec).and_then(|(d, o)| Ok((standardize(&d)?.0, o)));
    let (data, oracle) = match prepared {
        Ok(v) => v,
        Err(e) => {
            record.selection = Some(Err(e.to_string()));
            record.outcomes = config
                .strategies
                .iter()
                .map(|&s| StrategyOutcome {
                    strategy: s,
                    result: Err(e.to_string()),
                })
                .collect();
            return record;
        }
    };
    record.n_treated = data.n_treated();
    record.n_control = data.n_control();

    let needs_selection = config.strategies.iter().any(|s| !s.is_oracle());
    let selection = needs_selection.then(|| select_variables(&data, &config.selection_config(spec.setting, spec.seed)));
    record.selection = selection.as_ref().map(|r| match r {
        Ok(s) => Ok(SelectedSets {
            m_alpha: s.m_alpha_hat.clone(),
            m_beta: s.m_beta_hat.clone(),
            u: s.u_hat.clone(),
            i: s.i_hat.clone(),
        }),
        Err(e) => Err(e.to_string()),
    });
    let selected = selection.as_ref().and_then(|r| r.as_ref().ok());

    let aipw = AipwConfig {
        clip: config.clip,
        variance: VarianceMethod::Analytic,
        boot_reps: config.fallback_boot_reps,
        seed: spec.seed,
    };
    for &strategy in &config.strategies {
        let result = match strategy.set(selected, &oracle.truth) {
            None => Err(match &selection {
                Some(Err(e)) => format!("selection failed: {e}"),
                _ => "selection unavailable".to_string(),
            }),
            Some(set) => estimate(&data, &set, &aipw)
                .map(|e| StrategyEstimate {
                    tau_hat: e.tau_hat,
                    se: e.se,
                    ci_lower: e.ci_lower,
                    ci_upper: e.ci_upper,
                    set,
                    variance_method: e.variance_method,
                })
                .map_err(|e| e.to_string()),
        };
        record.outcomes.push(StrategyOutcome { strategy, result });
    }
    record
}

/// Seed of replicate `r` in a cell, shared by every setting of a scenario so
/// that settings can be compared on common random numbers where they agree.
pub fn replicate_seed(seed: u64, scenario: Scenario, replicate: usize) -> u64 {
    derive_seed(derive_seed(seed, scenario.number() as u64), replicate as u64)
}

/// Runs `reps` replicates of one cell in parallel; records come back in
/// replicate order.
pub fn run_cell(base: &ScenarioSpec, reps: usize, config: &SimConfig, seed: u64) -> Vec<ReplicateRecord> {
    (0..reps)
        .into_par_iter()
        .map(|r| run_replicate(&base.with_seed(replicate_seed(seed, base.scenario, r)), config, r))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionMetrics {
    /// Share of replicates with at least one false positive.
    pub over: f64,
    /// Share of replicates with at least one false negative.
    pub under: f64,
    pub fn_avg: f64,
    pub fp_avg: f64,
}

pub fn selection_metrics(selected: &[IndexSet], truth: &IndexSet) -> SelectionMetrics {
    let m = selected.len() as f64;
    let (mut over, mut under, mut fn_sum, mut fp_sum) = (0usize, 0usize, 0usize, 0usize);
    for s in selected {
        let fp = s.difference(truth).len();
        let fneg = truth.difference(s).len();
        over += usize::from(fp > 0);
        under += usize::from(fneg > 0);
        fp_sum += fp;
        fn_sum += fneg;
    }
    SelectionMetrics {
        over: over as f64 / m,
        under: under as f64 / m,
        fn_avg: fn_sum as f64 / m,
        fp_avg: fp_sum as f64 / m,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SelectedModel {
    Outcome,
    Propensity,
}

impl SelectedModel {
    pub fn label(self) -> &'static str {
        match self {
            SelectedModel::Outcome => "beta",
            SelectedModel::Propensity => "alpha",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    pub scenario: Scenario,
    pub setting: Setting,
    pub model: SelectedModel,
    pub metrics: SelectionMetrics,
    pub replicates: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub scenario: Scenario,
    pub setting: Setting,
    pub strategy: SimStrategy,
    pub true_ace: f64,
    pub coverage: f64,
    pub bias: f64,
    pub sd: f64,
    pub rmse: f64,
    pub mean_se: f64,
    pub successes: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub selection: Vec<SelectionRow>,
    pub coverage: Vec<CoverageRow>,
    pub records: Vec<ReplicateRecord>,
    pub true_aces: BTreeMap<(Scenario, Setting), f64>,
}

impl SimReport {
    pub fn coverage_row(&self, scenario: Scenario, setting: Setting, strategy: SimStrategy) -> Option<&CoverageRow> {
        self.coverage
            .iter()
            .find(|r| r.scenario == scenario && r.setting == setting && r.strategy == strategy)
    }

    pub fn selection_row(&self, scenario: Scenario, setting: Setting, model: SelectedModel) -> Option<&SelectionRow> {
        self.selection
            .iter()
            .find(|r| r.scenario == scenario && r.setting == setting && r.model == model)
    }
}

/// Bias, spread and coverage of a set of estimates against `truth`.
/// `sd` uses the `m − 1` denominator (0 for a single estimate) and
/// `rmse = sqrt(bias² + sd²)`.
pub fn estimate_summary(estimates: &[StrategyEstimate], truth: f64) -> (f64, f64, f64, f64) {
    let m = estimates.len() as f64;
    let mean = estimates.iter().map(|e| e.tau_hat).sum::<f64>() / m;
    let bias = mean - truth;
    let sd = if estimates.len() > 1 {
        (estimates.iter().map(|e| (e.tau_hat - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    } else {
        0.0
    };
    let coverage = estimates
        .iter()
        .filter(|e| e.ci_lower <= truth && truth <= e.ci_upper)
        .count() as f64
        / m;
    (bias, sd, (bias * bias + sd * sd).sqrt(), coverage)
}

/// True effect for a scenario and setting: exactly 0 under the linear
/// outcome model, Monte Carlo otherwise.
pub fn cell_truth(scenario: Scenario, setting: Setting) -> f64 {
    if setting.nonlinear_om() {
        true_ace(
            &ScenarioSpec::new(scenario, setting, 1, 0),
            TRUE_ACE_DRAWS,
            TRUE_ACE_SEED,
        )
        .value
    } else {
        0.0
    }
}

/// Folds replicate records into per-cell summaries. Output order is fixed
/// by (scenario, setting, model or strategy), whatever the record order.
pub fn aggregate(records: &[ReplicateRecord], true_aces: &BTreeMap<(Scenario, Setting), f64>) -> Result<SimReport> {
    let mut sorted: Vec<ReplicateRecord> = records.to_vec();
    sorted.sort_by_key(|r| (r.scenario, r.setting, r.replicate));

    let mut cells: BTreeMap<(Scenario, Setting), Vec<&ReplicateRecord>> = BTreeMap::new();
    for r in &sorted {
        cells.entry((r.scenario, r.setting)).or_default().push(r);
    }

    let mut selection = Vec::new();
    let mut coverage = Vec::new();
    let mut empty = Vec::new();
    for (&(scenario, setting), recs) in &cells {
        let truth = ScenarioSpec::new(scenario, setting, 1, 0).truth();
        let sets: Vec<&SelectedSets> = recs
            .iter()
            .filter_map(|r| r.selection.as_ref().and_then(|s| s.as_ref().ok()))
            .collect();
        let attempted = recs.iter().filter(|r| r.selection.is_some()).count();
        if attempted > 0 {
            for model in [SelectedModel::Outcome, SelectedModel::Propensity] {
                let chosen: Vec<IndexSet> = sets
                    .iter()
                    .map(|s| match model {
                        SelectedModel::Outcome => s.m_beta.clone(),
                        SelectedModel::Propensity => s.m_alpha.clone(),
                    })
                    .collect();
                let t = match model {
                    SelectedModel::Outcome => &truth.m_beta,
                    SelectedModel::Propensity => &truth.m_alpha,
                };
                if chosen.is_empty() {
                    empty.push(format!("({scenario}, {setting}, {})", model.label()));
                    continue;
                }
                selection.push(SelectionRow {
                    scenario,
                    setting,
                    model,
                    metrics: selection_metrics(&chosen, t),
                    replicates: chosen.len(),
                    failures: attempted - chosen.len(),
                });
            }
        }

        let true_ace = true_aces.get(&(scenario, setting)).copied().unwrap_or(0.0);
        let mut by_strategy: BTreeMap<SimStrategy, (Vec<StrategyEstimate>, usize)> = BTreeMap::new();
        for r in recs {
            for o in &r.outcomes {
                let entry = by_strategy.entry(o.strategy).or_default();
                match &o.result {
                    Ok(e) => entry.0.push(e.clone()),
                    Err(_) => entry.1 += 1,
                }
            }
        }
        for (strategy, (ests, failures)) in by_strategy {
            if ests.is_empty() {
                empty.push(format!("({scenario}, {setting}, {strategy})"));
                continue;
            }
            let (bias, sd, rmse, cov) = estimate_summary(&ests, true_ace);
            coverage.push(CoverageRow {
                scenario,
                setting,
                strategy,
                true_ace,
                coverage: cov,
                bias,
                sd,
                rmse,
                mean_se: ests.iter().map(|e| e.se).sum::<f64>() / ests.len() as f64,
                successes: ests.len(),
                failures,
            });
        }
    }
    if !empty.is_empty() {
        return Err(Error::EmptyCell(empty));
    }
    Ok(SimReport {
        selection,
        coverage,
        records: sorted,
        true_aces: true_aces.clone(),
    })
}

/// A grid of cells to simulate.
#[derive(Debug, Clone, PartialEq)]
pub struct SimPlan {
    pub cells: Vec<(Scenario, Setting)>,
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    pub seed: u64,
    pub config: SimConfig,
}

impl SimPlan {
    /// Desk-scale defaults: `n = 2000`, 200 replicates.
    pub fn desk(cells: Vec<(Scenario, Setting)>, seed: u64) -> Self {
        Self {
            cells,
            n: 2000,
            p: crate::dgp::DEFAULT_P,
            reps: 200,
            seed,
            config: SimConfig::default(),
        }
    }

    /// Full-scale defaults: `n = 5000`, 2000 replicates.
    pub fn paper(cells: Vec<(Scenario, Setting)>, seed: u64) -> Self {
        Self {
            n: 5000,
            reps: 2000,
            ..Self::desk(cells, seed)
        }
    }
}

/// Runs every cell of the plan and aggregates. Replicates run on the current
/// rayon pool; results do not depend on its size.
pub fn run_simulation(plan: &SimPlan) -> Result<SimReport> {
    let mut records = Vec::new();
    let mut truths = BTreeMap::new();
    let mut ace_cache: BTreeMap<(Scenario, bool), f64> = BTreeMap::new();
    for &(scenario, setting) in &plan.cells {
        let base = ScenarioSpec::with_p(scenario, setting, plan.n, plan.p, plan.seed);
        base.validate()?;
        let t = *ace_cache
            .entry((scenario, setting.nonlinear_om()))
            .or_insert_with(|| cell_truth(scenario, setting));
        truths.insert((scenario, setting), t);
        records.extend(run_cell(&base, plan.reps, &plan.config, plan.seed));
    }
    aggregate(&records, &truths)
}

/// Which nuisance model is generated from its working (linear/logistic) form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrectModel {
    Propensity,
    Outcome,
}

/// Runs a scenario with exactly one nuisance model misspecified and reports
/// the bias and coverage of the selected-set strategies.
pub fn double_robustness_check(
    scenario: Scenario,
    correct: CorrectModel,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<CoverageRow>> {
    let setting = match correct {
        CorrectModel::Propensity => Setting::C,
        CorrectModel::Outcome => Setting::B,
    };
    let mut plan = SimPlan::desk(vec![(scenario, setting)], seed);
    plan.n = n;
    plan.reps = reps;
    plan.config.strategies = vec![SimStrategy::Uni, SimStrategy::Int, SimStrategy::Out];
    Ok(run_simulation(&plan)?.coverage)
}

/// `%g`-style formatting with 6 significant digits.
pub fn fmt_sig6(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{x:.*}", (5 - exp) as usize)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn set_field(s: &IndexSet) -> String {
    s.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(";")
}

/// Writes `selection_metrics.csv`, `coverage.csv` and `replicates.csv` into
/// `dir`. Sets are written as `;`-separated column indices.
pub fn export(report: &SimReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));

    let mut w = csv::Writer::from_path(dir.join("selection_metrics.csv")).map_err(csv_err)?;
    w.write_record([
        "scenario",
        "setting",
        "model",
        "over",
        "under",
        "fn",
        "fp",
        "replicates",
        "failures",
    ])
    .map_err(csv_err)?;
    for r in &report.selection {
        w.write_record([
            r.scenario.to_string(),
            r.setting.to_string(),
            r.model.label().to_string(),
            fmt_sig6(r.metrics.over),
            fmt_sig6(r.metrics.under),
            fmt_sig6(r.metrics.fn_avg),
            fmt_sig6(r.metrics.fp_avg),
            r.replicates.to_string(),
            r.failures.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("coverage.csv")).map_err(csv_err)?;
    w.write_record([
        "scenario",
        "setting",
        "strategy",
        "coverage",
        "bias",
        "sd",
        "rmse",
        "mean_se",
        "true_ace",
        "successes",
        "failures",
    ])
    .map_err(csv_err)?;
    for r in &report.coverage {
        w.write_record([
            r.scenario.to_string(),
            r.setting.to_string(),
            r.strategy.to_string(),
            fmt_sig6(r.coverage),
            fmt_sig6(r.bias),
            fmt_sig6(r.sd),
            fmt_sig6(r.rmse),
            fmt_sig6(r.mean_se),
            fmt_sig6(r.true_ace),
            r.successes.to_string(),
            r.failures.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("replicates.csv")).map_err(csv_err)?;
    w.write_record([
        "scenario",
        "setting",
        "replicate",
        "seed",
        "strategy",
        "tau_hat",
        "se",
        "ci_lower",
        "ci_upper",
        "covered",
        "set",
        "variance",
        "error",
    ])
    .map_err(csv_err)?;
    for r in &report.records {
        let truth = report.true_aces.get(&(r.scenario, r.setting)).copied().unwrap_or(0.0);
        for o in &r.outcomes {
            let mut row = vec![
                r.scenario.to_string(),
                r.setting.to_string(),
                r.replicate.to_string(),
                r.seed.to_string(),
                o.strategy.to_string(),
            ];
            match &o.result {
                Ok(e) => row.extend([
                    fmt_sig6(e.tau_hat),
                    fmt_sig6(e.se),
                    fmt_sig6(e.ci_lower),
                    fmt_sig6(e.ci_upper),
                    u8::from(e.ci_lower <= truth && truth <= e.ci_upper).to_string(),
                    set_field(&e.set),
                    e.variance_method.label().to_string(),
                    String::new(),
                ]),
                Err(msg) => {
                    row.extend(std::iter::repeat_n(String::new(), 7));
                    row.push(msg.clone());
                }
            }
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}
