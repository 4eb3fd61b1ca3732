//! CSV ingestion into a [`Dataset`].
//!
//! Rows are put in a canonical order (lexicographic on the selected fields)
//! so that every result depends on the set of rows and not on file order.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use drsel_core::Dataset;

use crate::error::{CliError, CliResult};

/// Which columns play which role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnRoles {
    pub outcome: String,
    pub treatment: String,
    /// `None` means every other column.
    pub covariates: Option<Vec<String>>,
}

pub fn read_csv_file(path: &Path, roles: &ColumnRoles) -> CliResult<Dataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    read_csv(file, roles)
}

pub fn read_csv<R: Read>(reader: R, roles: &ColumnRoles) -> CliResult<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Parse(format!("header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let mut seen = HashSet::new();
    for h in &header {
        if h.is_empty() {
            return Err(CliError::Schema("empty column name in header".into()));
        }
        if !seen.insert(h.as_str()) {
            return Err(CliError::Schema(format!("duplicate column name {h:?}")));
        }
    }
    let find = |name: &str, role: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Schema(format!("{role} column {name:?} not found in header")))
    };
    let yi = find(&roles.outcome, "outcome")?;
    let ai = find(&roles.treatment, "treatment")?;
    if yi == ai {
        return Err(CliError::Schema(format!(
            "column {:?} cannot be both outcome and treatment",
            roles.outcome
        )));
    }
    let cov_idx: Vec<usize> = match &roles.covariates {
        Some(names) => {
            let mut picked = HashSet::new();
            let mut idx = Vec::with_capacity(names.len());
            for name in names {
                let j = find(name, "covariate")?;
                if j == yi || j == ai {
                    return Err(CliError::Schema(format!(
                        "column {name:?} is listed as a covariate and as the outcome or treatment"
                    )));
                }
                if !picked.insert(j) {
                    return Err(CliError::Schema(format!("covariate {name:?} listed twice")));
                }
                idx.push(j);
            }
            idx
        }
        None => (0..header.len()).filter(|&j| j != yi && j != ai).collect(),
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let line = r + 2;
        let rec = rec.map_err(|e| CliError::Parse(format!("line {line}: {e}")))?;
        let field = |j: usize| -> CliResult<f64> {
            let raw = rec.get(j).unwrap_or("").trim();
            if raw.is_empty() {
                return Err(CliError::Parse(format!(
                    "line {line}: missing value in column {:?}",
                    header[j]
                )));
            }
            let v: f64 = raw.parse().map_err(|_| {
                CliError::Parse(format!("line {line}: column {:?}: {raw:?} is not a number", header[j]))
            })?;
            if !v.is_finite() {
                return Err(CliError::Parse(format!(
                    "line {line}: column {:?}: non-finite value",
                    header[j]
                )));
            }
            Ok(v)
        };
        let mut row = Vec::with_capacity(cov_idx.len() + 2);
        row.push(field(yi)?);
        let a = field(ai)?;
        if a != 0.0 && a != 1.0 {
            return Err(CliError::Schema(format!(
                "treatment column {:?} must be 0 or 1; line {line} has {a}",
                roles.treatment
            )));
        }
        row.push(a);
        for &j in &cov_idx {
            row.push(field(j)?);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Schema("no data rows".into()));
    }

    rows.sort_by(|x, y| {
        x.iter()
            .zip(y)
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let outcome = rows.iter().map(|r| r[0]).collect();
    let treatment = rows.iter().map(|r| r[1] == 1.0).collect();
    let covariates: Vec<Vec<f64>> = rows.iter().map(|r| r[2..].to_vec()).collect();
    let names: Vec<String> = cov_idx.iter().map(|&j| header[j].clone()).collect();
    Dataset::from_rows(outcome, treatment, &covariates, &names).map_err(|e| match e {
        drsel_core::Error::EmptyArm { treated, control } => CliError::Schema(format!(
            "treatment column {:?} must contain both arms (treated {treated}, control {control})",
            roles.treatment
        )),
        other => CliError::from_core(other, &[]),
    })
}
