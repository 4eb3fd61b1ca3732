//! Penalized selection of the outcome and propensity variable sets, and the
//! adjustment sets built from them.

use std::fmt;
use std::str::FromStr;

use crate::data::{split_by_arm, Dataset, IndexSet};
use crate::error::{Error, ModelKind, Result};
use crate::pglm::{
    fit_penalized_linear, fit_penalized_logistic, LambdaGrid, PenalizedFit, PenaltyConfig, SolverOptions,
};
use crate::rng::{derive_seed, purpose};
use crate::scad::DEFAULT_CONCAVITY;

/// λ floor for a linear outcome model.
pub const LAMBDA_MIN_LINEAR_OM: f64 = 0.1;
/// λ floor for the outcome model when it is expected to be nonlinear.
pub const LAMBDA_MIN_NONLINEAR_OM: f64 = 0.3;
pub const LAMBDA_MIN_PS: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    /// Grid shared by both arm-level outcome fits.
    pub om_grid: LambdaGrid,
    pub ps_grid: LambdaGrid,
    pub a: f64,
    pub solver: SolverOptions,
    pub seed: u64,
}

impl SelectionConfig {
    pub fn new(lambda_min_om: f64, lambda_min_ps: f64, seed: u64) -> Self {
        Self {
            om_grid: LambdaGrid::new(lambda_min_om),
            ps_grid: LambdaGrid::new(lambda_min_ps),
            a: DEFAULT_CONCAVITY,
            solver: SolverOptions::default(),
            seed,
        }
    }

    fn penalty(&self, grid: LambdaGrid, stream: u64) -> PenaltyConfig {
        PenaltyConfig {
            grid,
            a: self.a,
            solver: self.solver,
            seed: derive_seed(self.seed, stream),
        }
    }
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self::new(LAMBDA_MIN_LINEAR_OM, LAMBDA_MIN_PS, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub m_alpha_hat: IndexSet,
    /// Union of the treated-arm and control-arm outcome active sets.
    pub m_beta_hat: IndexSet,
    pub u_hat: IndexSet,
    pub i_hat: IndexSet,
    pub treated_fit: PenalizedFit,
    pub control_fit: PenalizedFit,
    pub ps_fit: PenalizedFit,
}

impl SelectionResult {
    pub fn from_fits(treated_fit: PenalizedFit, control_fit: PenalizedFit, ps_fit: PenalizedFit) -> Self {
        let m_beta_hat = treated_fit.active_set.union(&control_fit.active_set);
        let m_alpha_hat = ps_fit.active_set.clone();
        Self {
            u_hat: m_alpha_hat.union(&m_beta_hat),
            i_hat: m_alpha_hat.intersection(&m_beta_hat),
            m_alpha_hat,
            m_beta_hat,
            treated_fit,
            control_fit,
            ps_fit,
        }
    }
}

/// Runs the three penalized fits on a standardized dataset.
///
/// Errors carry the [`ModelKind`] of the fit that failed.
pub fn select_variables(data: &Dataset, config: &SelectionConfig) -> Result<SelectionResult> {
    let (treated, control) = split_by_arm(data)?;
    let om_t = config.penalty(config.om_grid, purpose::CV_TREATED);
    let om_c = config.penalty(config.om_grid, purpose::CV_CONTROL);
    let ps = config.penalty(config.ps_grid, purpose::CV_PROPENSITY);

    let ((t, c), e) = rayon::join(
        || {
            rayon::join(
                || fit_penalized_linear(&treated, &om_t).map_err(|e| e.in_model(ModelKind::OutcomeTreated)),
                || fit_penalized_linear(&control, &om_c).map_err(|e| e.in_model(ModelKind::OutcomeControl)),
            )
        },
        || fit_penalized_logistic(data, &ps).map_err(|e| e.in_model(ModelKind::Propensity)),
    );
    Ok(SelectionResult::from_fits(t?, c?, e?))
}

/// Which selected set the refit models adjust for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Union,
    Intersection,
    Outcome,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Union, Strategy::Intersection, Strategy::Outcome];

    pub fn label(self) -> &'static str {
        match self {
            Strategy::Union => "UNI",
            Strategy::Intersection => "INT",
            Strategy::Outcome => "OUT",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "union" | "uni" => Ok(Strategy::Union),
            "intersection" | "int" => Ok(Strategy::Intersection),
            "outcome" | "out" => Ok(Strategy::Outcome),
            _ => Err(Error::InvalidParameter(format!("unknown strategy {s:?}"))),
        }
    }
}

pub fn strategy_set(result: &SelectionResult, strategy: Strategy) -> IndexSet {
    match strategy {
        Strategy::Union => result.u_hat.clone(),
        Strategy::Intersection => result.i_hat.clone(),
        Strategy::Outcome => result.m_beta_hat.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest};

    fn fit_with(active: IndexSet) -> PenalizedFit {
        PenalizedFit {
            coefficients: Vec::new(),
            active_set: active,
            lambda_used: 0.1,
            converged: true,
            iterations: 1,
            cv_table: Vec::new(),
            separation_warning: false,
        }
    }

    fn result(t: &[usize], c: &[usize], e: &[usize]) -> SelectionResult {
        SelectionResult::from_fits(
            fit_with(IndexSet::new(t.iter().copied())),
            fit_with(IndexSet::new(c.iter().copied())),
            fit_with(IndexSet::new(e.iter().copied())),
        )
    }

    #[test]
    fn union_projection() {
        let r = result(&[2], &[], &[1, 3]);
        assert_eq!(strategy_set(&r, Strategy::Union), IndexSet::new([1, 2, 3]));
        assert_eq!(strategy_set(&r, Strategy::Outcome), IndexSet::new([2]));
        assert!(strategy_set(&r, Strategy::Intersection).is_empty());
    }

    #[test]
    fn equal_sets_make_strategies_coincide() {
        let r = result(&[4, 7], &[7], &[4, 7]);
        let u = strategy_set(&r, Strategy::Union);
        for s in Strategy::ALL {
            assert_eq!(strategy_set(&r, s), u);
        }
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("union".parse::<Strategy>().unwrap(), Strategy::Union);
        assert_eq!("INT".parse::<Strategy>().unwrap(), Strategy::Intersection);
        assert!("both".parse::<Strategy>().is_err());
    }

    fn arb_idx() -> impl proptest::strategy::Strategy<Value = Vec<usize>> {
        prop::collection::vec(1usize..20, 0..8)
    }

    proptest! {
        #[test]
        fn selection_sets_form_a_lattice(t in arb_idx(), c in arb_idx(), e in arb_idx()) {
            let r = result(&t, &c, &e);
            prop_assert_eq!(&r.u_hat, &r.m_alpha_hat.union(&r.m_beta_hat));
            prop_assert_eq!(&r.i_hat, &r.m_alpha_hat.intersection(&r.m_beta_hat));
            prop_assert!(r.i_hat.is_subset(&r.m_alpha_hat) && r.m_alpha_hat.is_subset(&r.u_hat));
            let int = strategy_set(&r, Strategy::Intersection);
            let out = strategy_set(&r, Strategy::Outcome);
            let uni = strategy_set(&r, Strategy::Union);
            prop_assert!(int.is_subset(&out) && out.is_subset(&uni));
        }
    }
}
