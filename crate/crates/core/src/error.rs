use std::fmt;

use thiserror::Error;

/// Which nuisance model a failure came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    OutcomeTreated,
    OutcomeControl,
    Propensity,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelKind::OutcomeTreated => "outcome model (treated arm)",
            ModelKind::OutcomeControl => "outcome model (control arm)",
            ModelKind::Propensity => "propensity score model",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("covariate column {0} has zero variance")]
    ConstantColumn(usize),

    #[error("treatment arm is empty (n_treated = {treated}, n_control = {control})")]
    EmptyArm { treated: usize, control: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coordinate descent did not converge within {max_iter} sweeps")]
    NotConverged { max_iter: usize },

    #[error("lambda grid is empty")]
    EmptyGrid,

    #[error("{rows} rows cannot be split into {folds} folds")]
    TooFewRows { rows: usize, folds: usize },

    #[error("restricted design is rank deficient; collinear columns {columns:?}")]
    RankDeficient { columns: Vec<usize> },

    #[error("propensity score information matrix is singular on the restricted set")]
    SingularInformation,

    #[error("{model}: {source}")]
    Model {
        model: ModelKind,
        #[source]
        source: Box<Error>,
    },

    #[error("no successful replicates in cells: {}", .0.join(", "))]
    EmptyCell(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn in_model(self, model: ModelKind) -> Error {
        Error::Model {
            model,
            source: Box::new(self),
        }
    }

    /// The innermost error, with model provenance stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Model { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
