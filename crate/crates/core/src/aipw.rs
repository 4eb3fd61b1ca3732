//! AIPW estimate of the average causal effect, its plug-in influence
//! function, and analytic or bootstrap standard errors.
//!
//! With clipped propensity `ê` and arm outcome fits `μ̂₁`, `μ̂₀`, unit `i`
//! contributes
//!
//! ```text
//! A Y/ê + (1 − A/ê) μ̂₁ − (1 − A) Y/(1 − ê) − (1 − (1 − A)/(1 − ê)) μ̂₀
//! ```
//!
//! and `τ̂` is the mean of these terms. The influence value adds to the
//! centered term one correction per estimated nuisance parameter:
//!
//! ```text
//! ψᵢ = termᵢ − τ̂ − H_αᵀ Σ_α⁻¹ Sᵢ + K₁ᵀ M₁⁻¹ S₁ᵢ − K₀ᵀ M₀⁻¹ S₀ᵢ
//! ```
//!
//! where, on the restricted design `x`,
//!
//! * `Sᵢ = (A − e) x` and `Σ_α = mean(e(1 − e) x xᵀ)` are the propensity
//!   score and information,
//! * `H_α = mean([A(Y − μ̂₁)/ê² + (1 − A)(Y − μ̂₀)/(1 − ê)²] ė)` with
//!   `ė = e(1 − e) x` (zero where `ê` was clipped, since the clipped value
//!   does not move with `α`),
//! * `S₁ᵢ = A x (Y − μ̂₁)`, `M₁ = mean(A x xᵀ)`, `K₁ = mean((1 − A/ê) x)`,
//! * `S₀ᵢ = (1 − A) x (Y − μ̂₀)`, `M₀ = mean((1 − A) x xᵀ)`,
//!   `K₀ = mean((1 − (1 − A)/(1 − ê)) x)`.
//!
//! All means run over the full sample.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::data::{Dataset, IndexSet};
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, Cholesky};
use crate::refit::{build_refit, ClipBounds, RefitModels};
use crate::rng::{self, purpose};

pub const Z_975: f64 = 1.959964;
/// Smallest eigenvalue of the propensity information accepted as nonsingular.
pub const MIN_INFORMATION_EIGENVALUE: f64 = 1e-10;
pub const DEFAULT_BOOT_REPS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarianceMethod {
    Analytic,
    Bootstrap,
}

impl VarianceMethod {
    pub fn label(self) -> &'static str {
        match self {
            VarianceMethod::Analytic => "analytic",
            VarianceMethod::Bootstrap => "bootstrap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AipwConfig {
    pub clip: ClipBounds,
    pub variance: VarianceMethod,
    /// Bootstrap draws. With analytic variance, a positive count also
    /// enables the bootstrap fallback for a singular information matrix.
    pub boot_reps: usize,
    pub seed: u64,
}

impl Default for AipwConfig {
    fn default() -> Self {
        Self {
            clip: ClipBounds::default(),
            variance: VarianceMethod::Analytic,
            boot_reps: DEFAULT_BOOT_REPS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AipwEstimate {
    pub tau_hat: f64,
    pub psi_hat: Vec<f64>,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub variance_method: VarianceMethod,
    pub adjustment_set: IndexSet,
    pub label: Option<String>,
    /// Units whose propensity score was clipped.
    pub clipped: usize,
    pub separation_warning: bool,
    /// The analytic variance was requested but the information matrix was
    /// singular, so the bootstrap was used instead.
    pub fell_back: bool,
}

impl AipwEstimate {
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn covers(&self, truth: f64) -> bool {
        self.ci_lower <= truth && truth <= self.ci_upper
    }
}

/// Per-unit AIPW terms.
pub fn aipw_terms(y: &[f64], a: &[bool], e: &[f64], mu1: &[f64], mu0: &[f64]) -> Result<Vec<f64>> {
    let terms: Vec<f64> = (0..y.len())
        .map(|i| {
            let (ai, ei) = (if a[i] { 1.0 } else { 0.0 }, e[i]);
            ai * y[i] / ei + (1.0 - ai / ei) * mu1[i]
                - (1.0 - ai) * y[i] / (1.0 - ei)
                - (1.0 - (1.0 - ai) / (1.0 - ei)) * mu0[i]
        })
        .collect();
    if terms.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("AIPW terms (check propensity clipping)".into()));
    }
    Ok(terms)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn aipw_point(data: &Dataset, models: &RefitModels) -> Result<f64> {
    let t = aipw_terms(
        data.outcome(),
        data.treatment(),
        &models.fitted_ps,
        &models.fitted_mu1,
        &models.fitted_mu0,
    )?;
    Ok(mean(&t))
}

/// Sample estimates of the nuisance-correction ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceComponents {
    pub sigma_alpha: DMatrix<f64>,
    pub h_alpha: Vec<f64>,
    pub m1: DMatrix<f64>,
    pub k1: Vec<f64>,
    pub m0: DMatrix<f64>,
    pub k0: Vec<f64>,
    /// Rows are the propensity scores `Sᵢ`.
    pub scores: DMatrix<f64>,
    /// Rows are `S₁ᵢ`.
    pub scores1: DMatrix<f64>,
    /// Rows are `S₀ᵢ`.
    pub scores0: DMatrix<f64>,
}

pub fn influence_components(data: &Dataset, models: &RefitModels) -> Result<InfluenceComponents> {
    let xr = data.x().select_columns(&models.restriction_set.with_intercept());
    let (n, k) = (xr.nrows(), xr.ncols());
    let nf = n as f64;
    let y = data.outcome();

    let mut sigma = DMatrix::zeros(k, k);
    let mut m1 = DMatrix::zeros(k, k);
    let mut m0 = DMatrix::zeros(k, k);
    let mut h = vec![0.0; k];
    let mut k1 = vec![0.0; k];
    let mut k0 = vec![0.0; k];
    let mut scores = DMatrix::zeros(n, k);
    let mut scores1 = DMatrix::zeros(n, k);
    let mut scores0 = DMatrix::zeros(n, k);

    for i in 0..n {
        let a = data.a(i);
        let e = models.raw_ps[i];
        let ec = models.fitted_ps[i];
        let w = e * (1.0 - e);
        let r1 = y[i] - models.fitted_mu1[i];
        let r0 = y[i] - models.fitted_mu0[i];
        let hw = if models.is_clipped(i) {
            0.0
        } else {
            (a * r1 / (ec * ec) + (1.0 - a) * r0 / ((1.0 - ec) * (1.0 - ec))) * w
        };
        let w1 = 1.0 - a / ec;
        let w0 = 1.0 - (1.0 - a) / (1.0 - ec);
        for r in 0..k {
            let xir = xr[(i, r)];
            h[r] += hw * xir;
            k1[r] += w1 * xir;
            k0[r] += w0 * xir;
            scores[(i, r)] = (a - e) * xir;
            scores1[(i, r)] = a * xir * r1;
            scores0[(i, r)] = (1.0 - a) * xir * r0;
            for c in 0..=r {
                let xx = xir * xr[(i, c)];
                sigma[(r, c)] += w * xx;
                if a == 1.0 {
                    m1[(r, c)] += xx;
                } else {
                    m0[(r, c)] += xx;
                }
            }
        }
    }
    for mat in [&mut sigma, &mut m1, &mut m0] {
        *mat /= nf;
        for r in 0..k {
            for c in 0..r {
                mat[(c, r)] = mat[(r, c)];
            }
        }
    }
    for v in [&mut h, &mut k1, &mut k0] {
        v.iter_mut().for_each(|x| *x /= nf);
    }
    Ok(InfluenceComponents {
        sigma_alpha: sigma,
        h_alpha: h,
        m1,
        k1,
        m0,
        k0,
        scores,
        scores1,
        scores0,
    })
}

fn solve_spd(m: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    Cholesky::new(m, 1e-12)
        .map(|c| c.solve(b))
        .map_err(|_| Error::SingularInformation)
}

fn row_dot(m: &DMatrix<f64>, i: usize, v: &[f64]) -> f64 {
    v.iter().enumerate().map(|(c, &x)| m[(i, c)] * x).sum()
}

/// Plug-in influence values `ψ̂ᵢ`.
pub fn influence_values(data: &Dataset, models: &RefitModels, tau_hat: f64) -> Result<Vec<f64>> {
    let terms = aipw_terms(
        data.outcome(),
        data.treatment(),
        &models.fitted_ps,
        &models.fitted_mu1,
        &models.fitted_mu0,
    )?;
    let comp = influence_components(data, models)?;
    if min_eigenvalue(&comp.sigma_alpha) <= MIN_INFORMATION_EIGENVALUE {
        return Err(Error::SingularInformation);
    }
    let va = solve_spd(&comp.sigma_alpha, &comp.h_alpha)?;
    let v1 = solve_spd(&comp.m1, &comp.k1)?;
    let v0 = solve_spd(&comp.m0, &comp.k0)?;
    Ok((0..data.n())
        .map(|i| {
            terms[i] - tau_hat - row_dot(&comp.scores, i, &va) + row_dot(&comp.scores1, i, &v1)
                - row_dot(&comp.scores0, i, &v0)
        })
        .collect())
}

/// `sqrt(Σ ψ²) / n`.
pub fn analytic_se(psi: &[f64]) -> f64 {
    psi.iter().map(|p| p * p).sum::<f64>().sqrt() / psi.len() as f64
}

pub fn wald_ci(tau_hat: f64, se: f64) -> (f64, f64) {
    (tau_hat - Z_975 * se, tau_hat + Z_975 * se)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSummary {
    pub se: f64,
    pub estimates: Vec<f64>,
    /// Draws whose refit failed (e.g. an empty arm); they are skipped.
    pub failures: usize,
}

/// Nonparametric bootstrap of the refit-plus-AIPW estimate on a fixed set.
/// Draw `b` resamples rows from its own stream, so the result does not
/// depend on the number of worker threads.
pub fn bootstrap_se(
    data: &Dataset,
    set: &IndexSet,
    clip: ClipBounds,
    reps: usize,
    seed: u64,
) -> Result<BootstrapSummary> {
    let n = data.n();
    let draws: Vec<Option<f64>> = (0..reps)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, purpose::BOOTSTRAP_BASE + b as u64);
            let rows: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
            let d = data.select_rows(&rows).ok()?;
            let m = build_refit(&d, set, clip).ok()?;
            aipw_point(&d, &m).ok()
        })
        .collect();
    let estimates: Vec<f64> = draws.iter().flatten().copied().collect();
    let failures = reps - estimates.len();
    if estimates.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "bootstrap produced {} usable draws out of {reps}",
            estimates.len()
        )));
    }
    let m = mean(&estimates);
    let var = estimates.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / (estimates.len() - 1) as f64;
    Ok(BootstrapSummary {
        se: var.sqrt(),
        estimates,
        failures,
    })
}

/// Refits on `set` and estimates the effect with the configured variance.
pub fn estimate(data: &Dataset, set: &IndexSet, config: &AipwConfig) -> Result<AipwEstimate> {
    let models = build_refit(data, set, config.clip)?;
    estimate_from_models(data, &models, config)
}

pub fn estimate_from_models(data: &Dataset, models: &RefitModels, config: &AipwConfig) -> Result<AipwEstimate> {
    let tau_hat = aipw_point(data, models)?;
    let set = &models.restriction_set;
    let (psi_hat, se, method, fell_back) = match config.variance {
        VarianceMethod::Analytic => match influence_values(data, models, tau_hat) {
            Ok(psi) => {
                let se = analytic_se(&psi);
                (psi, se, VarianceMethod::Analytic, false)
            }
            Err(Error::SingularInformation) if config.boot_reps > 0 => {
                let b = bootstrap_se(data, set, config.clip, config.boot_reps, config.seed)?;
                (Vec::new(), b.se, VarianceMethod::Bootstrap, true)
            }
            Err(e) => return Err(e),
        },
        VarianceMethod::Bootstrap => {
            let psi = influence_values(data, models, tau_hat).unwrap_or_default();
            let b = bootstrap_se(data, set, config.clip, config.boot_reps, config.seed)?;
            (psi, b.se, VarianceMethod::Bootstrap, false)
        }
    };
    let (ci_lower, ci_upper) = wald_ci(tau_hat, se);
    Ok(AipwEstimate {
        tau_hat,
        psi_hat,
        se,
        ci_lower,
        ci_upper,
        variance_method: method,
        adjustment_set: set.clone(),
        label: None,
        clipped: models.clipped,
        separation_warning: models.separation_warning,
        fell_back,
    })
}
