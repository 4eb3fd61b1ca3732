//! Library side of the `drsel` command-line tool: configuration, CSV
//! ingestion, and the `estimate`, `select`, `simulate` and `dgp emit`
//! workflows. `main.rs` only parses flags and maps errors to exit codes.

pub mod error;
pub mod ingest;
pub mod report;

use std::path::{Path, PathBuf};

use drsel_core::aipw::{estimate_from_models, AipwConfig, VarianceMethod};
use drsel_core::dgp::{generate, Scenario, ScenarioSpec, Setting};
use drsel_core::pglm::{LambdaGrid, PenalizedFit};
use drsel_core::refit::{build_refit, ClipBounds};
use drsel_core::selection::{
    select_variables, strategy_set, SelectionConfig, SelectionResult, Strategy, LAMBDA_MIN_LINEAR_OM, LAMBDA_MIN_PS,
};
use drsel_core::sim::{export, run_simulation, SimPlan, SimReport, SimStrategy};
use drsel_core::{standardize, Dataset, IndexSet};

pub use error::{CliError, CliResult};
pub use ingest::{read_csv, read_csv_file, ColumnRoles};
use report::{BalanceRow, CvRow, CvTables, EstimateReport, Lambdas, NamedSets, SelectReport, SetSizes};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DRSEL_OUT_DIR";

/// Everything `estimate` and `select` need.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub roles: ColumnRoles,
    pub strategy: Strategy,
    pub lambda_min_om: f64,
    pub lambda_min_ps: f64,
    pub grid_size: usize,
    pub folds: usize,
    pub clip: ClipBounds,
    pub variance: VarianceMethod,
    pub boot_reps: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, outcome: &str, treatment: &str) -> Self {
        Self {
            input: input.into(),
            roles: ColumnRoles {
                outcome: outcome.into(),
                treatment: treatment.into(),
                covariates: None,
            },
            strategy: Strategy::Union,
            lambda_min_om: LAMBDA_MIN_LINEAR_OM,
            lambda_min_ps: LAMBDA_MIN_PS,
            grid_size: 100,
            folds: 10,
            clip: ClipBounds::default(),
            variance: VarianceMethod::Analytic,
            boot_reps: drsel_core::aipw::DEFAULT_BOOT_REPS,
            seed: 0,
            out: None,
        }
    }

    fn selection_config(&self) -> SelectionConfig {
        let mut c = SelectionConfig::new(self.lambda_min_om, self.lambda_min_ps, self.seed);
        c.om_grid = LambdaGrid::new(self.lambda_min_om)
            .with_count(self.grid_size)
            .with_folds(self.folds);
        c.ps_grid = LambdaGrid::new(self.lambda_min_ps)
            .with_count(self.grid_size)
            .with_folds(self.folds);
        c
    }
}

/// Runs `f` on a rayon pool of `workers` threads, or on the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(CliError::Usage("--workers must be at least 1".into())),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {k} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// `explicit`, else `$DRSEL_OUT_DIR/default_name`, else `None`.
pub fn resolve_output(explicit: Option<&Path>, default_name: &str) -> Option<PathBuf> {
    explicit.map(Path::to_path_buf).or_else(|| {
        std::env::var_os(OUT_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(|dir| PathBuf::from(dir).join(default_name))
    })
}

/// Writes `text` to `path`, creating parent directories, or to stdout.
pub fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(p, text)?;
        }
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

pub fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn named(set: &IndexSet, data: &Dataset) -> Vec<String> {
    set.names(data.column_names())
}

fn named_sets(sel: &SelectionResult, data: &Dataset) -> NamedSets {
    NamedSets {
        m_alpha: named(&sel.m_alpha_hat, data),
        m_beta: named(&sel.m_beta_hat, data),
        u: named(&sel.u_hat, data),
        i: named(&sel.i_hat, data),
    }
}

fn lambdas(sel: &SelectionResult) -> Lambdas {
    Lambdas {
        outcome_treated: sel.treated_fit.lambda_used,
        outcome_control: sel.control_fit.lambda_used,
        propensity: sel.ps_fit.lambda_used,
    }
}

fn cv_rows(fit: &PenalizedFit) -> Vec<CvRow> {
    fit.cv_table
        .iter()
        .map(|c| CvRow {
            lambda: c.lambda,
            mean_loss: c.mean_loss,
            sd_loss: c.sd_loss,
        })
        .collect()
}

fn load_and_select(config: &RunConfig) -> CliResult<(Dataset, SelectionResult)> {
    let raw = read_csv_file(&config.input, &config.roles)?;
    let names = raw.column_names().to_vec();
    let (std, _) = standardize(&raw).map_err(|e| CliError::from_core(e, &names))?;
    let sel = select_variables(&std, &config.selection_config()).map_err(|e| CliError::from_core(e, &names))?;
    Ok((std, sel))
}

/// Selection only: the four sets and the cross-validation tables.
pub fn run_select(config: &RunConfig) -> CliResult<SelectReport> {
    let (data, sel) = load_and_select(config)?;
    let sets = named_sets(&sel, &data);
    Ok(SelectReport {
        n: data.n(),
        n_treated: data.n_treated(),
        n_control: data.n_control(),
        covariates: data.p() - 1,
        seed: config.seed,
        set_sizes: SetSizes::from(&sets),
        sets,
        lambdas: lambdas(&sel),
        separation_warning: sel.ps_fit.separation_warning,
        cv: CvTables {
            outcome_treated: cv_rows(&sel.treated_fit),
            outcome_control: cv_rows(&sel.control_fit),
            propensity: cv_rows(&sel.ps_fit),
        },
    })
}

/// The full pipeline: select, refit on the strategy's set, estimate.
pub fn run_estimate(config: &RunConfig) -> CliResult<EstimateReport> {
    let (data, sel) = load_and_select(config)?;
    let names = data.column_names().to_vec();
    let set = strategy_set(&sel, config.strategy);
    let aipw = AipwConfig {
        clip: config.clip,
        variance: config.variance,
        boot_reps: config.boot_reps,
        seed: config.seed,
    };
    let models = build_refit(&data, &set, config.clip).map_err(|e| CliError::from_core(e, &names))?;
    let est = estimate_from_models(&data, &models, &aipw).map_err(|e| CliError::from_core(e, &names))?;
    let sets = named_sets(&sel, &data);
    Ok(EstimateReport {
        n: data.n(),
        n_treated: data.n_treated(),
        n_control: data.n_control(),
        covariates: data.p() - 1,
        seed: config.seed,
        strategy: config.strategy.label().to_string(),
        estimate: est.tau_hat,
        se: est.se,
        ci_lower: est.ci_lower,
        ci_upper: est.ci_upper,
        variance_method: est.variance_method.label().to_string(),
        variance_fallback: est.fell_back,
        adjustment_set: named(&set, &data),
        set_sizes: SetSizes::from(&sets),
        sets,
        lambdas: lambdas(&sel),
        clip: [config.clip.lo(), config.clip.hi()],
        clipped: est.clipped,
        separation_warning: est.separation_warning || sel.ps_fit.separation_warning,
        balance: balance_table(&data, &models.fitted_ps),
    })
}

/// Standardized mean differences of every covariate, raw and weighted by
/// `A/e` and `(1 − A)/(1 − e)`.
pub fn balance_table(data: &Dataset, ps: &[f64]) -> Vec<BalanceRow> {
    let a = data.treatment();
    (1..data.p())
        .map(|j| {
            let col = data.x().column(j);
            let moments = |treated: bool, weighted: bool| {
                let (mut sw, mut s1, mut s2) = (0.0, 0.0, 0.0);
                for (i, &v) in col.iter().enumerate() {
                    if a[i] != treated {
                        continue;
                    }
                    let w = match (weighted, treated) {
                        (false, _) => 1.0,
                        (true, true) => 1.0 / ps[i],
                        (true, false) => 1.0 / (1.0 - ps[i]),
                    };
                    sw += w;
                    s1 += w * v;
                    s2 += w * v * v;
                }
                let m = s1 / sw;
                (m, (s2 / sw - m * m).max(0.0))
            };
            let (m1, v1) = moments(true, false);
            let (m0, v0) = moments(false, false);
            let (w1, _) = moments(true, true);
            let (w0, _) = moments(false, true);
            let pooled = ((v1 + v0) / 2.0).sqrt();
            let smd = |d: f64| if pooled > 0.0 { d / pooled } else { 0.0 };
            BalanceRow {
                covariate: data.column_name(j).to_string(),
                smd_unweighted: smd(m1 - m0),
                smd_weighted: smd(w1 - w0),
            }
        })
        .collect()
}

/// Simulation scale presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// `n = 2000`, 200 replicates.
    Desk,
    /// `n = 5000`, 2000 replicates.
    Paper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    pub scenarios: Vec<Scenario>,
    pub settings: Vec<Setting>,
    pub profile: Profile,
    pub reps: Option<usize>,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub strategies: Option<Vec<SimStrategy>>,
    pub lambda_min_om: Option<f64>,
    pub lambda_min_ps: Option<f64>,
    pub grid_size: Option<usize>,
    pub clip: Option<ClipBounds>,
    pub seed: u64,
}

impl SimulateConfig {
    pub fn plan(&self) -> CliResult<SimPlan> {
        let cells: Vec<(Scenario, Setting)> = self
            .scenarios
            .iter()
            .flat_map(|&sc| self.settings.iter().map(move |&st| (sc, st)))
            .collect();
        if cells.is_empty() {
            return Err(CliError::Usage("no scenario/setting cells requested".into()));
        }
        let mut plan = match self.profile {
            Profile::Desk => SimPlan::desk(cells, self.seed),
            Profile::Paper => SimPlan::paper(cells, self.seed),
        };
        if let Some(r) = self.reps {
            plan.reps = r;
        }
        if let Some(n) = self.n {
            plan.n = n;
        }
        if let Some(p) = self.p {
            plan.p = p;
        }
        if plan.reps == 0 {
            return Err(CliError::Usage("--reps must be at least 1".into()));
        }
        if let Some(s) = &self.strategies {
            plan.config.strategies = s.clone();
        }
        plan.config.lambda_min_om = self.lambda_min_om.or(plan.config.lambda_min_om);
        if let Some(v) = self.lambda_min_ps {
            plan.config.lambda_min_ps = v;
        }
        if let Some(g) = self.grid_size {
            plan.config.grid_size = g;
        }
        if let Some(c) = self.clip {
            plan.config.clip = c;
        }
        Ok(plan)
    }
}

/// Runs the requested cells and writes the three CSVs into `out_dir`.
pub fn run_simulate(config: &SimulateConfig, out_dir: &Path) -> CliResult<SimReport> {
    let plan = config.plan()?;
    let report = run_simulation(&plan).map_err(|e| CliError::from_core(e, &[]))?;
    export(&report, out_dir).map_err(|e| CliError::from_core(e, &[]))?;
    Ok(report)
}

/// Writes one generated dataset as CSV with columns `Y`, `A`, `X1`, ….
pub fn emit_dgp(spec: &ScenarioSpec) -> CliResult<String> {
    let (data, _) = generate(spec).map_err(|e| CliError::from_core(e, &[]))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(std::io::Error::other(e));
    let mut header = vec!["Y".to_string(), "A".to_string()];
    header.extend(data.column_names()[1..].iter().cloned());
    w.write_record(&header).map_err(io)?;
    let x = data.x();
    for i in 0..data.n() {
        let mut rec = Vec::with_capacity(data.p() + 1);
        rec.push(data.outcome()[i].to_string());
        rec.push(if data.treatment()[i] { "1" } else { "0" }.to_string());
        rec.extend((1..data.p()).map(|j| x[(i, j)].to_string()));
        w.write_record(&rec).map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
