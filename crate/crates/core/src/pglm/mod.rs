//! SCAD-penalized linear and logistic regression by coordinate descent,
//! with cross-validated choice of λ over a floored grid.
//!
//! Both solvers minimize `loss(β) + Σ_{j≥1} P_λ(|β_j|)` where the loss is
//! `(1/2n)‖y − Xβ‖²` (linear, per arm) or the mean negative Bernoulli
//! log-likelihood (logistic). The intercept is never penalized. A
//! converged solution satisfies, for every predictor `j`,
//!
//! ```text
//! ∂loss/∂β_j + sign(β_j) q_λ(|β_j|) = 0     β_j ≠ 0
//! |∂loss/∂β_j| ≤ λ                           β_j = 0
//! ```
//!
//! which are the penalized estimating equations read coordinatewise.

mod cv;
mod linear;
mod logistic;

pub use cv::{cross_validate, fold_assignment, CvOutcome};
pub use linear::{LinearModel, LinearProblem};
pub use logistic::{LogisticModel, LogisticProblem, SEPARATION_ETA};

use crate::data::{ArmData, Dataset, IndexSet};
use crate::error::{Error, Result};
use crate::scad::{scad_rate, ScadParams, DEFAULT_CONCAVITY};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Converged once no coefficient moves more than this in a sweep.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 10_000,
        }
    }
}

/// Upper end of the λ grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaMax {
    /// Smallest λ at which every penalized coefficient is zero.
    NullGradient,
    /// Largest eigenvalue of `XᵀX/n` over the predictor columns.
    DesignEigenvalue,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaGrid {
    pub lambda_min: f64,
    pub lambda_max: LambdaMax,
    pub count: usize,
    pub folds: usize,
}

impl LambdaGrid {
    pub fn new(lambda_min: f64) -> Self {
        Self {
            lambda_min,
            lambda_max: LambdaMax::NullGradient,
            count: 100,
            folds: 10,
        }
    }

    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    pub fn with_folds(mut self, folds: usize) -> Self {
        self.folds = folds;
        self
    }

    pub fn with_max(mut self, lambda_max: LambdaMax) -> Self {
        self.lambda_max = lambda_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::EmptyGrid);
        }
        if !(self.lambda_min > 0.0 && self.lambda_min.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda_min must be positive, got {}",
                self.lambda_min
            )));
        }
        if self.folds < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        Ok(())
    }

    /// Log-uniform values from `lambda_max` down to `lambda_min`.
    ///
    /// When the resolved maximum does not exceed the floor, every λ in the
    /// admissible range already zeroes all predictors and the grid is the
    /// single point `lambda_min`.
    pub fn values<M: PathModel + ?Sized>(&self, model: &M) -> Result<Vec<f64>> {
        self.validate()?;
        let hi = match self.lambda_max {
            LambdaMax::NullGradient => model.null_gradient_bound(),
            LambdaMax::DesignEigenvalue => model.design_eigenvalue_bound(),
            LambdaMax::Fixed(v) => v,
        };
        let lo = self.lambda_min;
        let spread = hi > lo;
        if !spread || self.count == 1 {
            return Ok(vec![if spread { hi } else { lo }]);
        }
        let (lhi, llo) = (hi.ln(), lo.ln());
        let k = self.count;
        Ok((0..k)
            .map(|i| {
                if i == 0 {
                    hi
                } else if i == k - 1 {
                    lo
                } else {
                    (lhi + (llo - lhi) * i as f64 / (k - 1) as f64).exp()
                }
            })
            .collect())
    }
}

/// A penalized model that can be fit along a λ path and scored on held-out rows.
pub trait PathModel: Sync {
    fn n_obs(&self) -> usize;

    fn n_coef(&self) -> usize;

    fn null_gradient_bound(&self) -> f64;

    fn design_eigenvalue_bound(&self) -> f64;

    /// Fits every λ in `lambdas` (descending) with warm starts, on `rows`
    /// or on all rows when `None`.
    fn fit_path(&self, rows: Option<&[usize]>, lambdas: &[f64], a: f64, opts: &SolverOptions) -> Result<PathFit>;

    fn heldout_loss(&self, rows: &[usize], beta: &[f64]) -> f64;
}

#[derive(Debug, Clone)]
pub struct PathFit {
    pub coefficients: Vec<Vec<f64>>,
    pub iterations: Vec<usize>,
    pub separation: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvPoint {
    pub lambda: f64,
    pub mean_loss: f64,
    pub sd_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedFit {
    pub coefficients: Vec<f64>,
    pub active_set: IndexSet,
    pub lambda_used: f64,
    pub converged: bool,
    pub iterations: usize,
    pub cv_table: Vec<CvPoint>,
    /// Some fitted linear predictor exceeded [`SEPARATION_ETA`] in magnitude.
    pub separation_warning: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig {
    pub grid: LambdaGrid,
    pub a: f64,
    pub solver: SolverOptions,
    /// Seeds the fold assignment.
    pub seed: u64,
}

impl PenaltyConfig {
    pub fn new(grid: LambdaGrid, seed: u64) -> Self {
        Self {
            grid,
            a: DEFAULT_CONCAVITY,
            solver: SolverOptions::default(),
            seed,
        }
    }
}

pub(crate) fn active_set(beta: &[f64]) -> IndexSet {
    IndexSet::new((1..beta.len()).filter(|&j| beta[j] != 0.0))
}

/// Cross-validates λ on `model` and refits on all rows at the chosen value.
pub fn fit_penalized<M: PathModel>(model: &M, config: &PenaltyConfig) -> Result<PenalizedFit> {
    ScadParams::new(0.0, config.a)?;
    let lambdas = config.grid.values(model)?;
    if model.n_obs() < config.grid.folds {
        return Err(Error::TooFewRows {
            rows: model.n_obs(),
            folds: config.grid.folds,
        });
    }
    let cv = cross_validate(
        model,
        &lambdas,
        config.grid.folds,
        config.a,
        &config.solver,
        config.seed,
    )?;
    let path = model.fit_path(None, &lambdas[..=cv.best_index], config.a, &config.solver)?;
    let coefficients = path.coefficients.last().cloned().expect("non-empty path");
    Ok(PenalizedFit {
        active_set: active_set(&coefficients),
        coefficients,
        lambda_used: lambdas[cv.best_index],
        converged: true,
        iterations: path.iterations.iter().sum(),
        cv_table: cv.table,
        separation_warning: path.separation.last().copied().unwrap_or(false),
    })
}

/// SCAD-penalized least squares on one treatment arm.
pub fn fit_penalized_linear(arm: &ArmData, config: &PenaltyConfig) -> Result<PenalizedFit> {
    fit_penalized(&LinearModel::new(&arm.x, &arm.outcome), config)
}

/// SCAD-penalized logistic regression of treatment on covariates.
pub fn fit_penalized_logistic(data: &Dataset, config: &PenaltyConfig) -> Result<PenalizedFit> {
    fit_penalized(&LogisticModel::new(data), config)
}

/// Largest violation of the coordinatewise stationarity conditions, given
/// the loss gradient at `beta`. The intercept must have zero gradient.
pub fn stationarity_violation(gradient: &[f64], beta: &[f64], params: &ScadParams) -> f64 {
    let mut worst = gradient[0].abs();
    for j in 1..beta.len() {
        let v = if beta[j] != 0.0 {
            (gradient[j] + beta[j].signum() * scad_rate(beta[j].abs(), params)).abs()
        } else {
            (gradient[j].abs() - params.lambda()).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Stub(f64);

    impl PathModel for Stub {
        fn n_obs(&self) -> usize {
            20
        }
        fn n_coef(&self) -> usize {
            2
        }
        fn null_gradient_bound(&self) -> f64 {
            self.0
        }
        fn design_eigenvalue_bound(&self) -> f64 {
            2.0
        }
        fn fit_path(&self, _: Option<&[usize]>, l: &[f64], _: f64, _: &SolverOptions) -> Result<PathFit> {
            Ok(PathFit {
                coefficients: vec![vec![0.0, 0.0]; l.len()],
                iterations: vec![1; l.len()],
                separation: vec![false; l.len()],
            })
        }
        fn heldout_loss(&self, _: &[usize], _: &[f64]) -> f64 {
            1.0
        }
    }

    #[test]
    fn grid_is_log_uniform_and_bounded() {
        let g = LambdaGrid::new(0.1).with_count(5);
        let v = g.values(&Stub(1.0)).unwrap();
        assert_eq!(v.len(), 5);
        assert_eq!(v[0], 1.0);
        assert_eq!(v[4], 0.1);
        let ratios: Vec<f64> = v.windows(2).map(|w| w[1] / w[0]).collect();
        for r in &ratios {
            assert!((r - ratios[0]).abs() < 1e-12);
        }
        assert!(v.iter().all(|&l| (0.1..=1.0).contains(&l)));
    }

    #[test]
    fn grid_collapses_when_bound_below_floor() {
        let v = LambdaGrid::new(0.1).values(&Stub(0.05)).unwrap();
        assert_eq!(v, vec![0.1]);
    }

    #[test]
    fn eigenvalue_bound_is_selectable() {
        let g = LambdaGrid::new(0.1).with_count(3).with_max(LambdaMax::DesignEigenvalue);
        assert_eq!(g.values(&Stub(0.5)).unwrap()[0], 2.0);
    }

    #[test]
    fn empty_grid_is_an_error() {
        let g = LambdaGrid::new(0.1).with_count(0);
        assert!(matches!(g.values(&Stub(1.0)), Err(Error::EmptyGrid)));
    }

    #[test]
    fn single_lambda_grid_returns_it() {
        let cfg = PenaltyConfig::new(LambdaGrid::new(0.3).with_count(1).with_max(LambdaMax::Fixed(0.3)), 1);
        let fit = fit_penalized(&Stub(1.0), &cfg).unwrap();
        assert_eq!(fit.lambda_used, 0.3);
        assert_eq!(fit.cv_table.len(), 1);
    }

    #[test]
    fn stationarity_measure() {
        let p = ScadParams::with_lambda(1.0).unwrap();
        // inactive within the band, active exactly balanced
        assert_eq!(stationarity_violation(&[0.0, 0.5, -1.0], &[0.2, 0.0, 0.5], &p), 0.0);
        assert!((stationarity_violation(&[0.0, 1.5, 0.0], &[0.0, 0.0, 5.0], &p) - 0.5).abs() < 1e-15);
    }
}
