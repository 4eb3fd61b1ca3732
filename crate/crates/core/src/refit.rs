//! Unpenalized outcome and propensity refits on a fixed adjustment set.

use nalgebra::DMatrix;

use crate::data::{split_by_arm, ArmData, Dataset, IndexSet};
use crate::error::{Error, ModelKind, Result};
use crate::linalg::{mean_cross, mean_gram, Cholesky};
use crate::pglm::SEPARATION_ETA;

/// Pivot tolerance, relative to the diagonal, for declaring a column collinear.
const RANK_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 100;
const MAX_HALVINGS: usize = 30;
const SCORE_TOL: f64 = 1e-8;
/// Coefficient magnitude treated as divergence to infinity.
const SEPARATION_COEF: f64 = 1e3;

/// Bounds applied to fitted propensity scores before weighting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipBounds {
    lo: f64,
    hi: f64,
}

impl ClipBounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "clipping bounds must satisfy 0 < lo < hi < 1, got ({lo}, {hi})"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn apply(&self, e: f64) -> f64 {
        e.clamp(self.lo, self.hi)
    }
}

impl Default for ClipBounds {
    fn default() -> Self {
        Self { lo: 0.01, hi: 0.99 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsRefit {
    /// Full-length coefficients, zero off the set.
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    /// Newton diverged; `coefficients` is the last iterate before divergence.
    pub separated: bool,
}

/// Refit nuisance models and their fitted values on every row.
#[derive(Debug, Clone, PartialEq)]
pub struct RefitModels {
    pub alpha_hat: Vec<f64>,
    pub beta0_hat: Vec<f64>,
    pub beta1_hat: Vec<f64>,
    /// Clipped propensity scores.
    pub fitted_ps: Vec<f64>,
    /// Propensity scores before clipping.
    pub raw_ps: Vec<f64>,
    pub fitted_mu0: Vec<f64>,
    pub fitted_mu1: Vec<f64>,
    pub restriction_set: IndexSet,
    pub clipped: usize,
    pub separation_warning: bool,
}

impl RefitModels {
    pub fn is_clipped(&self, i: usize) -> bool {
        self.fitted_ps[i] != self.raw_ps[i]
    }
}

fn embed(p: usize, cols: &[usize], coef: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p];
    for (&j, &b) in cols.iter().zip(coef) {
        out[j] = b;
    }
    out
}

fn rank_check(xr: &DMatrix<f64>, cols: &[usize]) -> Result<Cholesky> {
    Cholesky::new(&mean_gram(xr), RANK_TOL).map_err(|bad| Error::RankDeficient {
        columns: bad.iter().map(|&k| cols[k]).collect(),
    })
}

pub(crate) fn linear_predictor(x: &DMatrix<f64>, beta: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.nrows()];
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            for (o, &v) in out.iter_mut().zip(x.column(j).iter()) {
                *o += b * v;
            }
        }
    }
    out
}

/// Least squares of the arm's outcome on the intercept and `set`.
pub fn refit_outcome(arm: &ArmData, set: &IndexSet) -> Result<Vec<f64>> {
    let cols = set.with_intercept();
    let xr = arm.x.select_columns(&cols);
    let chol = rank_check(&xr, &cols)?;
    let b = mean_cross(&xr, &arm.outcome);
    let mut beta = chol.solve(&b);
    // one step of iterative refinement on the normal equations
    let g = mean_gram(&xr);
    let k = cols.len();
    let r: Vec<f64> = (0..k)
        .map(|i| b[i] - (0..k).map(|m| g[(i, m)] * beta[m]).sum::<f64>())
        .collect();
    for (bi, d) in beta.iter_mut().zip(chol.solve(&r)) {
        *bi += d;
    }
    Ok(embed(arm.p(), &cols, &beta))
}

fn log_likelihood(eta: &[f64], a: &[f64]) -> f64 {
    eta.iter()
        .zip(a)
        .map(|(&e, &ai)| ai * e - (e.max(0.0) + (-e.abs()).exp().ln_1p()))
        .sum()
}

fn expit(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

/// Logistic maximum likelihood of treatment on the intercept and `set`, by
/// damped Newton iteration.
fn logistic_score(xr: &DMatrix<f64>, eta: &[f64], a: &[f64]) -> Vec<f64> {
    let resid: Vec<f64> = a.iter().zip(eta).map(|(ai, &e)| ai - expit(e)).collect();
    (0..xr.ncols())
        .map(|j| xr.column(j).iter().zip(&resid).map(|(x, r)| x * r).sum())
        .collect()
}

pub fn refit_ps(data: &Dataset, set: &IndexSet) -> Result<PsRefit> {
    let cols = set.with_intercept();
    let xr = data.x().select_columns(&cols);
    rank_check(&xr, &cols)?;
    let a: Vec<f64> = (0..data.n()).map(|i| data.a(i)).collect();
    let n = data.n() as f64;
    let k = cols.len();

    let abar = a.iter().sum::<f64>() / n;
    let mut beta = vec![0.0; k];
    beta[0] = (abar / (1.0 - abar)).ln();
    let mut eta = linear_predictor(&xr, &beta);
    let mut ll = log_likelihood(&eta, &a);

    for iter in 0..=NEWTON_MAX_ITER {
        let p: Vec<f64> = eta.iter().map(|&e| expit(e)).collect();
        let score = logistic_score(&xr, &eta, &a);
        if score.iter().all(|s| s.abs() <= SCORE_TOL) {
            // a zero score can also mean the fitted probabilities saturated
            let max_eta = eta.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            return Ok(PsRefit {
                coefficients: embed(data.p(), &cols, &beta),
                iterations: iter,
                separated: max_eta > SEPARATION_ETA,
            });
        }
        if iter == NEWTON_MAX_ITER {
            break;
        }

        let mut info = DMatrix::<f64>::zeros(k, k);
        for i in 0..xr.nrows() {
            let w = p[i] * (1.0 - p[i]);
            if w == 0.0 {
                continue;
            }
            for r in 0..k {
                let xr_ir = w * xr[(i, r)];
                for c in 0..=r {
                    info[(r, c)] += xr_ir * xr[(i, c)];
                }
            }
        }
        for r in 0..k {
            for c in 0..r {
                info[(c, r)] = info[(r, c)];
            }
        }
        let step = match Cholesky::new(&info, 1e-14) {
            Ok(ch) => ch.solve(&score),
            // information vanished: fitted probabilities are saturated
            Err(_) => {
                return Ok(PsRefit {
                    coefficients: embed(data.p(), &cols, &beta),
                    iterations: iter,
                    separated: true,
                })
            }
        };

        // likelihood changes below rounding error count as ascent
        let slack = 64.0 * f64::EPSILON * ll.abs().max(1.0);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let cand_eta = linear_predictor(&xr, &cand);
            let cand_ll = log_likelihood(&cand_eta, &a);
            if cand_ll >= ll - slack {
                accepted = Some((cand, cand_eta, cand_ll));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, cand_eta, cand_ll)) = accepted else {
            // no ascent possible at working precision
            let tiny = score.iter().all(|s| s.abs() <= 1e-6 * n);
            if tiny {
                return Ok(PsRefit {
                    coefficients: embed(data.p(), &cols, &beta),
                    iterations: iter,
                    separated: false,
                });
            }
            return Err(Error::NotConverged { max_iter: iter });
        };
        if cand.iter().any(|b| b.abs() > SEPARATION_COEF) {
            return Ok(PsRefit {
                coefficients: embed(data.p(), &cols, &beta),
                iterations: iter + 1,
                separated: true,
            });
        }
        let moved = cand.iter().zip(&beta).map(|(c, b)| (c - b).abs()).fold(0.0, f64::max);
        beta = cand;
        eta = cand_eta;
        ll = cand_ll;
        if moved <= 1e-14 * beta.iter().map(|b| b.abs()).fold(1.0, f64::max) {
            // floating-point fixed point; the score is as small as it can get
            return Ok(PsRefit {
                coefficients: embed(data.p(), &cols, &beta),
                iterations: iter + 1,
                separated: false,
            });
        }
    }
    let max_eta = eta.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    if max_eta > SEPARATION_ETA {
        return Ok(PsRefit {
            coefficients: embed(data.p(), &cols, &beta),
            iterations: NEWTON_MAX_ITER,
            separated: true,
        });
    }
    Err(Error::NotConverged {
        max_iter: NEWTON_MAX_ITER,
    })
}

/// Refits both outcome models and the propensity model on `set` and
/// evaluates them on every row.
pub fn build_refit(data: &Dataset, set: &IndexSet, clip: ClipBounds) -> Result<RefitModels> {
    let (treated, control) = split_by_arm(data)?;
    let beta1_hat = refit_outcome(&treated, set).map_err(|e| e.in_model(ModelKind::OutcomeTreated))?;
    let beta0_hat = refit_outcome(&control, set).map_err(|e| e.in_model(ModelKind::OutcomeControl))?;
    let ps = refit_ps(data, set).map_err(|e| e.in_model(ModelKind::Propensity))?;

    let raw_ps: Vec<f64> = linear_predictor(data.x(), &ps.coefficients)
        .into_iter()
        .map(expit)
        .collect();
    let fitted_ps: Vec<f64> = raw_ps.iter().map(|&e| clip.apply(e)).collect();
    let clipped = raw_ps.iter().zip(&fitted_ps).filter(|(r, f)| r != f).count();
    Ok(RefitModels {
        fitted_mu0: linear_predictor(data.x(), &beta0_hat),
        fitted_mu1: linear_predictor(data.x(), &beta1_hat),
        alpha_hat: ps.coefficients,
        beta0_hat,
        beta1_hat,
        fitted_ps,
        raw_ps,
        restriction_set: set.clone(),
        clipped,
        separation_warning: ps.separated,
    })
}
