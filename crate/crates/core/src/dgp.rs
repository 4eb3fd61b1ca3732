//! Simulation designs: four coefficient scenarios crossed with linear or
//! nonlinear propensity (PSM I/II) and outcome (OM I/II) models.
//!
//! Covariates `X₁..X_{p−1}` are iid standard normal and column 0 is the
//! intercept. Coefficient vectors have length `p` and are indexed like
//! design columns, so `β[3]` multiplies `X₃`.
//!
//! ```text
//! PSM I   logit e = α₁ᵀX
//! PSM II  logit e = 3.5 + α₂ᵀ log(X²) − cos(X₃ + X₄)
//! OM I    Y(a) = β_aᵀX + ε
//! OM II   Y(0) = 1 + exp(sin(β₀ᵀX)) − 2 cos(β₀[3]X₃ + β₀[4]X₄) + β₀[5]X₅ − β₀[6]X₆ + ε
//!         Y(1) = 1 + exp(2 sin(β₁ᵀX)) − cos(β₁[3]X₃ + β₁[4]X₄) + β₁[5]X₅ − β₁[6]X₆ + ε
//! ```
//!
//! In `log(X²)` the square is floored at `1e−12`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::{Dataset, IndexSet};
use crate::error::{Error, Result};
use crate::rng::{self, purpose};

pub const DEFAULT_N: usize = 5000;
/// Design width including the intercept.
pub const DEFAULT_P: usize = 50;
const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    S1 = 1,
    S2 = 2,
    S3 = 3,
    S4 = 4,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::S1, Scenario::S2, Scenario::S3, Scenario::S4];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn from_number(k: u8) -> Result<Self> {
        match k {
            1 => Ok(Scenario::S1),
            2 => Ok(Scenario::S2),
            3 => Ok(Scenario::S3),
            4 => Ok(Scenario::S4),
            _ => Err(Error::InvalidParameter(format!("scenario must be 1..4, got {k}"))),
        }
    }

    fn ps_support(self) -> &'static [usize] {
        match self {
            Scenario::S1 | Scenario::S4 => &[1, 2, 3, 4],
            Scenario::S2 | Scenario::S3 => &[3, 4],
        }
    }

    fn om_support(self) -> &'static [usize] {
        match self {
            Scenario::S1 | Scenario::S3 => &[3, 4, 5, 6],
            Scenario::S2 | Scenario::S4 => &[3, 4],
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let k: u8 = s
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("scenario must be 1..4, got {s:?}")))?;
        Scenario::from_number(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Setting {
    /// PSM I with OM I.
    A,
    /// PSM II with OM I.
    B,
    /// PSM I with OM II.
    C,
    /// PSM II with OM II.
    D,
}

impl Setting {
    pub const ALL: [Setting; 4] = [Setting::A, Setting::B, Setting::C, Setting::D];

    pub fn nonlinear_ps(self) -> bool {
        matches!(self, Setting::B | Setting::D)
    }

    pub fn nonlinear_om(self) -> bool {
        matches!(self, Setting::C | Setting::D)
    }

    pub fn letter(self) -> char {
        match self {
            Setting::A => 'a',
            Setting::B => 'b',
            Setting::C => 'c',
            Setting::D => 'd',
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(Setting::A),
            "b" => Ok(Setting::B),
            "c" => Ok(Setting::C),
            "d" => Ok(Setting::D),
            _ => Err(Error::InvalidParameter(format!("setting must be a..d, got {s:?}"))),
        }
    }
}

/// True variable sets of a scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthSets {
    pub m_alpha: IndexSet,
    pub m_beta: IndexSet,
    pub u: IndexSet,
    pub i: IndexSet,
}

impl TruthSets {
    /// Confounders: in both models.
    pub fn confounders(&self) -> IndexSet {
        self.i.clone()
    }

    /// Instruments: treatment model only.
    pub fn instruments(&self) -> IndexSet {
        self.m_alpha.difference(&self.m_beta)
    }

    /// Precision variables: outcome model only.
    pub fn precision(&self) -> IndexSet {
        self.m_beta.difference(&self.m_alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub setting: Setting,
    pub n: usize,
    /// Design width including the intercept.
    pub p: usize,
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    pub beta0: Vec<f64>,
    pub beta1: Vec<f64>,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario, setting: Setting, n: usize, seed: u64) -> Self {
        Self::with_p(scenario, setting, n, DEFAULT_P, seed)
    }

    /// `p` is clamped to at least 7 so that `X₁..X₆` exist.
    pub fn with_p(scenario: Scenario, setting: Setting, n: usize, p: usize, seed: u64) -> Self {
        let p = p.max(7);
        let fill = |support: &[usize], v: f64, intercept: f64| {
            let mut out = vec![0.0; p];
            out[0] = intercept;
            for &j in support {
                out[j] = v;
            }
            out
        };
        Self {
            scenario,
            setting,
            n,
            p,
            alpha1: fill(scenario.ps_support(), 1.0, 0.0),
            alpha2: fill(scenario.ps_support(), 3.0, 0.0),
            beta0: fill(scenario.om_support(), 1.0, 1.0),
            beta1: fill(scenario.om_support(), 2.0, 1.0),
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("n must be at least 2, got {}", self.n)));
        }
        for (name, v) in [
            ("alpha1", &self.alpha1),
            ("alpha2", &self.alpha2),
            ("beta0", &self.beta0),
            ("beta1", &self.beta1),
        ] {
            if v.len() != self.p {
                return Err(Error::InvalidParameter(format!(
                    "{name} has length {}, expected {}",
                    v.len(),
                    self.p
                )));
            }
        }
        if self.p < 7 {
            return Err(Error::InvalidParameter(format!("p must be at least 7, got {}", self.p)));
        }
        Ok(())
    }

    /// True sets read off the nonzero coefficients of the generating models.
    pub fn truth(&self) -> TruthSets {
        let support = |v: &[f64]| IndexSet::new((1..v.len()).filter(|&j| v[j] != 0.0));
        let mut m_alpha = if self.setting.nonlinear_ps() {
            support(&self.alpha2)
        } else {
            support(&self.alpha1)
        };
        if self.setting.nonlinear_ps() {
            m_alpha = m_alpha.union(&IndexSet::new([3, 4]));
        }
        let m_beta = support(&self.beta0).union(&support(&self.beta1));
        TruthSets {
            u: m_alpha.union(&m_beta),
            i: m_alpha.intersection(&m_beta),
            m_alpha,
            m_beta,
        }
    }

    pub fn propensity(&self, x: &[f64]) -> f64 {
        let eta = if self.setting.nonlinear_ps() {
            3.5 + (1..self.p)
                .filter(|&j| self.alpha2[j] != 0.0)
                .map(|j| self.alpha2[j] * (x[j] * x[j]).max(LOG_FLOOR).ln())
                .sum::<f64>()
                - (x[3] + x[4]).cos()
        } else {
            sparse_dot(&self.alpha1, x)
        };
        1.0 / (1.0 + (-eta).exp())
    }

    /// Noise-free `(μ₀(x), μ₁(x))`.
    pub fn outcome_means(&self, x: &[f64]) -> (f64, f64) {
        let (b0, b1) = (&self.beta0, &self.beta1);
        if self.setting.nonlinear_om() {
            let m0 = 1.0 + sparse_dot(b0, x).sin().exp() - 2.0 * (b0[3] * x[3] + b0[4] * x[4]).cos() + b0[5] * x[5]
                - b0[6] * x[6];
            let m1 = 1.0 + (2.0 * sparse_dot(b1, x).sin()).exp() - (b1[3] * x[3] + b1[4] * x[4]).cos() + b1[5] * x[5]
                - b1[6] * x[6];
            (m0, m1)
        } else {
            (sparse_dot(b0, x), sparse_dot(b1, x))
        }
    }
}

fn sparse_dot(coef: &[f64], x: &[f64]) -> f64 {
    coef.iter().zip(x).filter(|(c, _)| **c != 0.0).map(|(c, v)| c * v).sum()
}

/// What the generator knows and the analyst does not.
#[derive(Debug, Clone, PartialEq)]
pub struct Oracle {
    pub propensity: Vec<f64>,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub truth: TruthSets,
}

impl Oracle {
    /// Sample mean of `Y(1) − Y(0)`.
    pub fn sample_ace(&self) -> f64 {
        self.y1.iter().zip(&self.y0).map(|(a, b)| a - b).sum::<f64>() / self.y0.len() as f64
    }
}

pub fn covariate_names(p: usize) -> Vec<String> {
    (1..p).map(|j| format!("X{j}")).collect()
}

/// Draws one dataset. Covariates are drawn row by row, then treatment,
/// then the two outcome noises, all from the scenario seed's data stream.
pub fn generate(spec: &ScenarioSpec) -> Result<(Dataset, Oracle)> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let mut r = rng::stream(spec.seed, purpose::DATA);
    let mut x = DMatrix::<f64>::zeros(n, p);
    let mut row = vec![1.0; p];
    let mut propensity = Vec::with_capacity(n);
    let mut mu = Vec::with_capacity(n);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for j in 1..p {
            let v: f64 = r.sample(StandardNormal);
            row[j] = v;
            x[(i, j)] = v;
        }
        propensity.push(spec.propensity(&row));
        mu.push(spec.outcome_means(&row));
    }
    let treatment: Vec<bool> = propensity.iter().map(|&e| r.random::<f64>() < e).collect();
    let mut y0 = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    for &(m0, m1) in &mu {
        let e0: f64 = r.sample(StandardNormal);
        let e1: f64 = r.sample(StandardNormal);
        y0.push(m0 + e0);
        y1.push(m1 + e1);
    }
    let outcome: Vec<f64> = (0..n).map(|i| if treatment[i] { y1[i] } else { y0[i] }).collect();
    let mut names = vec![crate::data::INTERCEPT_NAME.to_string()];
    names.extend(covariate_names(p));
    let data = Dataset::new(outcome, treatment, x, names)?;
    Ok((
        data,
        Oracle {
            propensity,
            y0,
            y1,
            truth: spec.truth(),
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AceEstimate {
    pub value: f64,
    pub se: f64,
}

const ACE_CHUNKS: usize = 64;

/// Monte Carlo value of `E[μ₁(X) − μ₀(X)]` from `mc_draws` covariate draws.
///
/// Draws come in antithetic pairs `(x, −x)`; the outcome noise has mean zero
/// and is left out. The standard error is computed from the pair averages.
pub fn true_ace(spec: &ScenarioSpec, mc_draws: usize, seed: u64) -> AceEstimate {
    let pairs = mc_draws.div_ceil(2).max(2);
    let per_chunk = pairs.div_ceil(ACE_CHUNKS);
    let sums: Vec<(f64, f64, usize)> = (0..ACE_CHUNKS)
        .into_par_iter()
        .map(|c| {
            let start = c * per_chunk;
            let end = ((c + 1) * per_chunk).min(pairs);
            let mut r = rng::stream(seed, c as u64);
            let mut x = vec![1.0; spec.p];
            let mut neg = vec![1.0; spec.p];
            let (mut s, mut ss) = (0.0, 0.0);
            for _ in start..end {
                for j in 1..spec.p {
                    let v: f64 = r.sample(StandardNormal);
                    x[j] = v;
                    neg[j] = -v;
                }
                let (a0, a1) = spec.outcome_means(&x);
                let (b0, b1) = spec.outcome_means(&neg);
                let d = 0.5 * ((a1 - a0) + (b1 - b0));
                s += d;
                ss += d * d;
            }
            (s, ss, end.saturating_sub(start))
        })
        .collect();
    let (s, ss, m) = sums
        .iter()
        .fold((0.0, 0.0, 0usize), |acc, v| (acc.0 + v.0, acc.1 + v.1, acc.2 + v.2));
    let mf = m as f64;
    let mean = s / mf;
    let var = (ss - mf * mean * mean) / (mf - 1.0);
    AceEstimate {
        value: mean,
        se: (var.max(0.0) / mf).sqrt(),
    }
}
