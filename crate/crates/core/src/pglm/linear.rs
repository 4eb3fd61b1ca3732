use nalgebra::DMatrix;

use super::{PathFit, PathModel, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{max_eigenvalue, mean_cross, mean_gram};
use crate::scad::{scad_penalty, scad_threshold, ScadParams};

/// Sufficient statistics of `(1/2n)‖y − Xβ‖²`: `G = XᵀX/n`, `b = Xᵀy/n`,
/// `yy = yᵀy/n`. Coordinate descent runs entirely on these ("covariance
/// updates"), so a sweep costs O(p²) regardless of n.
#[derive(Debug, Clone)]
pub struct LinearProblem {
    gram: DMatrix<f64>,
    xty: Vec<f64>,
    yy: f64,
}

impl LinearProblem {
    pub fn new(x: &DMatrix<f64>, y: &[f64]) -> Self {
        let n = y.len() as f64;
        Self {
            gram: mean_gram(x),
            xty: mean_cross(x, y),
            yy: y.iter().map(|v| v * v).sum::<f64>() / n,
        }
    }

    pub fn p(&self) -> usize {
        self.xty.len()
    }

    pub fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.p())
            .map(|j| {
                let gb: f64 = (0..self.p()).map(|k| self.gram[(j, k)] * beta[k]).sum();
                gb - self.xty[j]
            })
            .collect()
    }

    pub fn loss(&self, beta: &[f64]) -> f64 {
        let p = self.p();
        let mut quad = 0.0;
        for j in 0..p {
            for k in 0..p {
                quad += beta[j] * self.gram[(j, k)] * beta[k];
            }
        }
        0.5 * self.yy - crate::linalg::dot(&self.xty, beta) + 0.5 * quad
    }

    pub fn objective(&self, beta: &[f64], params: &ScadParams) -> f64 {
        self.loss(beta) + beta[1..].iter().map(|b| scad_penalty(b.abs(), params)).sum::<f64>()
    }

    /// Cyclic coordinate descent from `beta` (updated in place), coordinates
    /// in ascending order. Returns the number of sweeps. If `trace` is
    /// given, the penalized objective after each sweep is appended.
    pub fn solve(
        &self,
        params: &ScadParams,
        beta: &mut [f64],
        opts: &SolverOptions,
        mut trace: Option<&mut Vec<f64>>,
    ) -> Result<usize> {
        let p = self.p();
        let mut gb: Vec<f64> = (0..p)
            .map(|j| (0..p).map(|k| self.gram[(j, k)] * beta[k]).sum())
            .collect();
        for sweep in 1..=opts.max_iter {
            let mut max_delta = 0.0f64;
            for j in 0..p {
                let gjj = self.gram[(j, j)];
                let new = if gjj <= 0.0 {
                    0.0
                } else {
                    let z = self.xty[j] - gb[j] + gjj * beta[j];
                    if j == 0 {
                        z / gjj
                    } else {
                        scad_threshold(z, gjj, params)
                    }
                };
                let d = new - beta[j];
                if d != 0.0 {
                    beta[j] = new;
                    for (k, g) in gb.iter_mut().enumerate() {
                        *g += d * self.gram[(k, j)];
                    }
                    max_delta = max_delta.max(d.abs());
                }
            }
            if let Some(t) = trace.as_deref_mut() {
                t.push(self.objective(beta, params));
            }
            if max_delta <= opts.tol {
                return Ok(sweep);
            }
        }
        Err(Error::NotConverged {
            max_iter: opts.max_iter,
        })
    }
}

/// Least-squares path model over a design and response.
pub struct LinearModel<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [f64],
}

impl<'a> LinearModel<'a> {
    pub fn new(x: &'a DMatrix<f64>, y: &'a [f64]) -> Self {
        Self { x, y }
    }

    fn problem(&self, rows: Option<&[usize]>) -> LinearProblem {
        match rows {
            None => LinearProblem::new(self.x, self.y),
            Some(r) => {
                let x = self.x.select_rows(r);
                let y: Vec<f64> = r.iter().map(|&i| self.y[i]).collect();
                LinearProblem::new(&x, &y)
            }
        }
    }
}

impl PathModel for LinearModel<'_> {
    fn n_obs(&self) -> usize {
        self.y.len()
    }

    fn n_coef(&self) -> usize {
        self.x.ncols()
    }

    fn null_gradient_bound(&self) -> f64 {
        let n = self.y.len() as f64;
        let ybar = self.y.iter().sum::<f64>() / n;
        (1..self.x.ncols())
            .map(|j| {
                let col = self.x.column(j);
                let s: f64 = col.iter().zip(self.y).map(|(x, y)| x * (y - ybar)).sum();
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
        let mut out = PathFit {
            coefficients: Vec::with_capacity(lambdas.len()),
            iterations: Vec::with_capacity(lambdas.len()),
            separation: vec![false; lambdas.len()],
        };
        for &lam in lambdas {
            let params = ScadParams::new(lam, a)?;
            let it = prob.solve(&params, &mut beta, opts, None)?;
            out.coefficients.push(beta.clone());
            out.iterations.push(it);
        }
        Ok(out)
    }

    fn heldout_loss(&self, rows: &[usize], beta: &[f64]) -> f64 {
        let active: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
        let sse: f64 = rows
            .iter()
            .map(|&i| {
                let fit: f64 = active.iter().map(|&j| self.x[(i, j)] * beta[j]).sum();
                let r = self.y[i] - fit;
                r * r
            })
            .sum();
        sse / rows.len() as f64
    }
}
