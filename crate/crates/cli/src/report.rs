//! Serializable result artifacts.
//!
//! Floats are written in shortest round-trip form, so every number re-parses
//! to exactly the value that was computed.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedSets {
    pub m_alpha: Vec<String>,
    pub m_beta: Vec<String>,
    pub u: Vec<String>,
    pub i: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSizes {
    pub m_alpha: usize,
    pub m_beta: usize,
    pub u: usize,
    pub i: usize,
}

impl From<&NamedSets> for SetSizes {
    fn from(s: &NamedSets) -> Self {
        Self {
            m_alpha: s.m_alpha.len(),
            m_beta: s.m_beta.len(),
            u: s.u.len(),
            i: s.i.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lambdas {
    pub outcome_treated: f64,
    pub outcome_control: f64,
    pub propensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub lambda: f64,
    pub mean_loss: f64,
    pub sd_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvTables {
    pub outcome_treated: Vec<CvRow>,
    pub outcome_control: Vec<CvRow>,
    pub propensity: Vec<CvRow>,
}

/// Standardized mean difference of one covariate between arms, before and
/// after inverse-propensity weighting. Both use the unweighted pooled SD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceRow {
    pub covariate: String,
    pub smd_unweighted: f64,
    pub smd_weighted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectReport {
    pub n: usize,
    pub n_treated: usize,
    pub n_control: usize,
    pub covariates: usize,
    pub seed: u64,
    pub sets: NamedSets,
    pub set_sizes: SetSizes,
    pub lambdas: Lambdas,
    pub separation_warning: bool,
    pub cv: CvTables,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub n: usize,
    pub n_treated: usize,
    pub n_control: usize,
    pub covariates: usize,
    pub seed: u64,
    pub strategy: String,
    pub estimate: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub variance_method: String,
    /// Analytic variance was requested but the bootstrap had to be used.
    pub variance_fallback: bool,
    pub adjustment_set: Vec<String>,
    pub sets: NamedSets,
    pub set_sizes: SetSizes,
    pub lambdas: Lambdas,
    pub clip: [f64; 2],
    pub clipped: usize,
    pub separation_warning: bool,
    pub balance: Vec<BalanceRow>,
}
