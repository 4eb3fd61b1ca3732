use thiserror::Error;

/// Command failures, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("singular information: {0}")]
    SingularInformation(String),

    #[error("invalid argument: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Schema(_) => 4,
            CliError::Solver(_) => 5,
            CliError::SingularInformation(_) => 6,
        }
    }

    /// Classifies a library error. `names` are the design column names, used
    /// to report offending columns by name.
    pub fn from_core(err: drsel_core::Error, names: &[String]) -> Self {
        use drsel_core::Error as E;
        let name = |j: usize| names.get(j).cloned().unwrap_or_else(|| format!("#{j}"));
        let context = match &err {
            E::Model { model, .. } => format!("{model}: "),
            _ => String::new(),
        };
        match err.root() {
            E::SingularInformation => CliError::SingularInformation(format!(
                "{context}propensity information matrix is singular on the adjustment set; \
                 rerun with --boot-reps > 0 to fall back to the bootstrap"
            )),
            E::RankDeficient { columns } => CliError::Solver(format!(
                "{context}restricted design is rank deficient; collinear columns [{}]",
                columns.iter().map(|&j| name(j)).collect::<Vec<_>>().join(", ")
            )),
            E::ConstantColumn(j) => CliError::Schema(format!("covariate column {} has zero variance", name(*j))),
            E::NonFinite(_) | E::EmptyArm { .. } | E::InvalidDataset(_) => CliError::Schema(err.to_string()),
            E::InvalidParameter(_) => CliError::Usage(err.to_string()),
            E::Io(e) => CliError::Io(std::io::Error::new(e.kind(), e.to_string())),
            _ => CliError::Solver(err.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
