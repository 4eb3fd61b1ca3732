use nalgebra::DMatrix;

use super::{PathFit, PathModel, SolverOptions};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{dot, max_eigenvalue, mean_gram};
use crate::scad::{scad_penalty, scad_threshold, ScadParams};

/// |linear predictor| above which a fit is flagged as (quasi-)separated.
pub const SEPARATION_ETA: f64 = 30.0;

/// Loss, as a fraction of the intercept-only loss, below which the fit is
/// treated as saturated (separated data where |η| grows only slowly).
pub const SATURATION_RATIO: f64 = 1e-3;

const INNER_MAX_SWEEPS: usize = 200;

#[inline]
pub(crate) fn expit(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

/// `log(1 + e^η)` without overflow.
#[inline]
pub(crate) fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

/// Mean negative log-likelihood of a logistic model on one design.
///
/// Minimization is majorize-minimize: the Hessian of the loss is bounded by
/// `¼ XᵀX/n`, so around the current point `β_k`
///
/// ```text
/// loss(β) ≤ loss(β_k) + ∇loss(β_k)ᵀ(β − β_k) + ⅛ (β − β_k)ᵀ (XᵀX/n) (β − β_k)
/// ```
///
/// and each outer iteration runs coordinate descent with exact SCAD
/// thresholding on this quadratic (curvature `¼ G_jj` per coordinate).
/// Every outer step therefore decreases the penalized objective.
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    x: DMatrix<f64>,
    a: Vec<f64>,
    gram: DMatrix<f64>,
    null_loss: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct LogisticSolve {
    pub iterations: usize,
    pub max_abs_eta: f64,
    /// Stopped on `max_abs_eta > SEPARATION_ETA` or on saturation.
    pub separated: bool,
}

impl LogisticProblem {
    pub fn new(x: DMatrix<f64>, a: Vec<f64>) -> Self {
        let gram = mean_gram(&x);
        let abar = a.iter().sum::<f64>() / a.len() as f64;
        let null_loss = if abar > 0.0 && abar < 1.0 {
            -(abar * abar.ln() + (1.0 - abar) * (1.0 - abar).ln())
        } else {
            0.0
        };
        Self { x, a, gram, null_loss }
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn linear_predictor(&self, beta: &[f64]) -> Vec<f64> {
        let mut eta = vec![0.0; self.n()];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (e, &x) in eta.iter_mut().zip(self.x.column(j).iter()) {
                    *e += b * x;
                }
            }
        }
        eta
    }

    pub fn loss(&self, beta: &[f64]) -> f64 {
        let eta = self.linear_predictor(beta);
        eta.iter().zip(&self.a).map(|(&e, &a)| softplus(e) - a * e).sum::<f64>() / self.n() as f64
    }

    pub fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        let eta = self.linear_predictor(beta);
        let r: Vec<f64> = eta.iter().zip(&self.a).map(|(&e, &a)| expit(e) - a).collect();
        let n = self.n() as f64;
        (0..self.p())
            .map(|j| dot(self.x.column(j).as_slice(), &r) / n)
            .collect()
    }

    pub fn objective(&self, beta: &[f64], params: &ScadParams) -> f64 {
        self.loss(beta) + beta[1..].iter().map(|b| scad_penalty(b.abs(), params)).sum::<f64>()
    }

    /// Minimizes the penalized objective from `beta` (updated in place).
    ///
    /// Outer iterations first cycle over the intercept and the currently
    /// nonzero coefficients; once those settle, a pass over all coordinates
    /// either confirms convergence or admits new ones. `trace` receives the
    /// objective after every outer iteration.
    pub fn solve(
        &self,
        params: &ScadParams,
        beta: &mut [f64],
        opts: &SolverOptions,
        mut trace: Option<&mut Vec<f64>>,
    ) -> Result<LogisticSolve> {
        let n = self.n() as f64;
        let p = self.p();
        let mut eta = self.linear_predictor(beta);
        let working = |beta: &[f64]| -> Vec<usize> { (0..p).filter(|&j| j == 0 || beta[j] != 0.0).collect() };
        let all: Vec<usize> = (0..p).collect();
        let mut coords = working(beta);
        let mut full = false;
        let mut resid = vec![0.0; self.n()];
        let mut grad = vec![0.0; p];
        let mut delta = vec![0.0; p];
        let mut q = vec![0.0; p];

        for iter in 1..=opts.max_iter {
            let set: &[usize] = if full { &all } else { &coords };
            for ((r, &e), &a) in resid.iter_mut().zip(&eta).zip(&self.a) {
                *r = expit(e) - a;
            }
            for &j in set {
                grad[j] = dot(self.x.column(j).as_slice(), &resid) / n;
                delta[j] = 0.0;
                q[j] = 0.0;
            }

            // coordinate descent on the quadratic majorizer
            let inner_tol = 0.1 * opts.tol;
            for _ in 0..INNER_MAX_SWEEPS {
                let mut moved = 0.0f64;
                for &j in set {
                    let c = 0.25 * self.gram[(j, j)];
                    if c <= 0.0 {
                        continue;
                    }
                    let cur = beta[j] + delta[j];
                    let z = c * cur - (grad[j] + 0.25 * q[j]);
                    let new = if j == 0 { z / c } else { scad_threshold(z, c, params) };
                    let d = new - cur;
                    if d != 0.0 {
                        delta[j] += d;
                        for &k in set {
                            q[k] += d * self.gram[(k, j)];
                        }
                        moved = moved.max(d.abs());
                    }
                }
                if moved <= inner_tol {
                    break;
                }
            }

            let mut max_delta = 0.0f64;
            for &j in set {
                let d = delta[j];
                if d != 0.0 {
                    beta[j] += d;
                    for (e, &x) in eta.iter_mut().zip(self.x.column(j).iter()) {
                        *e += d * x;
                    }
                    max_delta = max_delta.max(d.abs());
                }
            }
            if let Some(t) = trace.as_deref_mut() {
                t.push(self.objective(beta, params));
            }

            let max_abs_eta = eta.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            let loss = eta.iter().zip(&self.a).map(|(&e, &a)| softplus(e) - a * e).sum::<f64>() / n;
            // separated data: the minimizer is at infinity, stop and let the caller flag it
            let separated = max_abs_eta > SEPARATION_ETA || loss <= SATURATION_RATIO * self.null_loss;
            if separated || (max_delta <= opts.tol && full) {
                return Ok(LogisticSolve {
                    iterations: iter,
                    max_abs_eta,
                    separated,
                });
            }
            if max_delta <= opts.tol {
                full = true;
            } else if full {
                full = false;
                coords = working(beta);
            }
        }
        Err(Error::NotConverged {
            max_iter: opts.max_iter,
        })
    }
}

/// Logistic path model of treatment on the full design.
pub struct LogisticModel<'a> {
    x: &'a DMatrix<f64>,
    a: Vec<f64>,
}

impl<'a> LogisticModel<'a> {
    pub fn new(data: &'a Dataset) -> Self {
        Self {
            x: data.x(),
            a: (0..data.n()).map(|i| data.a(i)).collect(),
        }
    }

    pub fn from_parts(x: &'a DMatrix<f64>, a: Vec<f64>) -> Self {
        Self { x, a }
    }

    pub fn problem(&self, rows: Option<&[usize]>) -> LogisticProblem {
        match rows {
            None => LogisticProblem::new(self.x.clone(), self.a.clone()),
            Some(r) => LogisticProblem::new(self.x.select_rows(r), r.iter().map(|&i| self.a[i]).collect()),
        }
    }
}

impl PathModel for LogisticModel<'_> {
    fn n_obs(&self) -> usize {
        self.a.len()
    }

    fn n_coef(&self) -> usize {
        self.x.ncols()
    }

    fn null_gradient_bound(&self) -> f64 {
        let n = self.a.len() as f64;
        let abar = self.a.iter().sum::<f64>() / n;
        (1..self.x.ncols())
            .map(|j| {
                let s: f64 = self.x.column(j).iter().zip(&self.a).map(|(x, a)| x * (abar - a)).sum();
                (s / n).abs()
            })
            .fold(0.0, f64::max)
    }

    fn design_eigenvalue_bound(&self) -> f64 {
        let g = mean_gram(self.x);
        let p = g.nrows();
        max_eigenvalue(&g.view((1, 1), (p - 1, p - 1)).into_owned())
    }

    fn fit_path(&self, rows: Option<&[usize]>, lambdas: &[f64], a: f64, opts: &SolverOptions) -> Result<PathFit> {
        let prob = self.problem(rows);
        let mut beta = vec![0.0; prob.p()];
        let abar = prob.a.iter().sum::<f64>() / prob.n() as f64;
        if abar > 0.0 && abar < 1.0 {
            beta[0] = (abar / (1.0 - abar)).ln();
        }
        let mut out = PathFit {
            coefficients: Vec::with_capacity(lambdas.len()),
            iterations: Vec::with_capacity(lambdas.len()),
            separation: Vec::with_capacity(lambdas.len()),
        };
        for &lam in lambdas {
            let params = ScadParams::new(lam, a)?;
            let s = prob.solve(&params, &mut beta, opts, None)?;
            out.coefficients.push(beta.clone());
            out.iterations.push(s.iterations);
            out.separation.push(s.separated);
        }
        Ok(out)
    }

    /// Mean binomial deviance.
    fn heldout_loss(&self, rows: &[usize], beta: &[f64]) -> f64 {
        let active: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
        let dev: f64 = rows
            .iter()
            .map(|&i| {
                let eta: f64 = active.iter().map(|&j| self.x[(i, j)] * beta[j]).sum();
                softplus(eta) - self.a[i] * eta
            })
            .sum();
        2.0 * dev / rows.len() as f64
    }
}
