//! Dataset container, covariate standardization and index sets.
//!
//! The design matrix always carries the intercept as column 0. Columns
//! `1..p` are predictors; they are the only columns that get standardized,
//! penalized, or appear in an [`IndexSet`].

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const INTERCEPT_NAME: &str = "(Intercept)";

/// Observed data `(Y, A, X)` for `n` units.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    outcome: Vec<f64>,
    treatment: Vec<bool>,
    x: DMatrix<f64>,
    column_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from a full design matrix whose column 0 is the intercept.
    pub fn new(outcome: Vec<f64>, treatment: Vec<bool>, x: DMatrix<f64>, column_names: Vec<String>) -> Result<Self> {
        let n = outcome.len();
        if n < 2 {
            return Err(Error::InvalidDataset(format!("need at least 2 rows, got {n}")));
        }
        if treatment.len() != n || x.nrows() != n {
            return Err(Error::InvalidDataset(format!(
                "length mismatch: outcome {n}, treatment {}, covariate rows {}",
                treatment.len(),
                x.nrows()
            )));
        }
        if x.ncols() == 0 || column_names.len() != x.ncols() {
            return Err(Error::InvalidDataset(format!(
                "{} column names for {} design columns",
                column_names.len(),
                x.ncols()
            )));
        }
        if x.column(0).iter().any(|&v| v != 1.0) {
            return Err(Error::InvalidDataset("column 0 must be the constant intercept".into()));
        }
        if outcome.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("outcome".into()));
        }
        if let Some(j) = (0..x.ncols()).find(|&j| x.column(j).iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite(format!("covariate column {}", column_names[j])));
        }
        let treated = treatment.iter().filter(|&&t| t).count();
        if treated == 0 || treated == n {
            return Err(Error::EmptyArm {
                treated,
                control: n - treated,
            });
        }
        Ok(Self {
            outcome,
            treatment,
            x,
            column_names,
        })
    }

    /// Builds a dataset from covariate rows without the intercept; the
    /// intercept column is prepended.
    pub fn from_rows(
        outcome: Vec<f64>,
        treatment: Vec<bool>,
        covariates: &[Vec<f64>],
        covariate_names: &[String],
    ) -> Result<Self> {
        let n = covariates.len();
        let q = covariate_names.len();
        if let Some((i, row)) = covariates.iter().enumerate().find(|(_, r)| r.len() != q) {
            return Err(Error::InvalidDataset(format!(
                "row {i} has {} covariates, expected {q}",
                row.len()
            )));
        }
        let x = DMatrix::from_fn(n, q + 1, |i, j| if j == 0 { 1.0 } else { covariates[i][j - 1] });
        let mut names = Vec::with_capacity(q + 1);
        names.push(INTERCEPT_NAME.to_string());
        names.extend(covariate_names.iter().cloned());
        Self::new(outcome, treatment, x, names)
    }

    pub fn n(&self) -> usize {
        self.outcome.len()
    }

    /// Number of design columns including the intercept.
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_treated(&self) -> usize {
        self.treatment.iter().filter(|&&t| t).count()
    }

    pub fn n_control(&self) -> usize {
        self.n() - self.n_treated()
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn treatment(&self) -> &[bool] {
        &self.treatment
    }

    /// Treatment indicator as 0.0 / 1.0.
    pub fn a(&self, i: usize) -> f64 {
        if self.treatment[i] {
            1.0
        } else {
            0.0
        }
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn column_name(&self, j: usize) -> &str {
        &self.column_names[j]
    }

    /// Same rows with `outcome` replaced.
    pub fn with_outcome(&self, outcome: Vec<f64>) -> Result<Self> {
        Self::new(
            outcome,
            self.treatment.clone(),
            self.x.clone(),
            self.column_names.clone(),
        )
    }

    /// Rows `rows` (with repetition allowed), in that order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let y = rows.iter().map(|&i| self.outcome[i]).collect();
        let a = rows.iter().map(|&i| self.treatment[i]).collect();
        let x = self.x.select_rows(rows);
        Self::new(y, a, x, self.column_names.clone())
    }

    /// Keeps the intercept plus the columns in `set`, in ascending order.
    pub fn restrict_columns(&self, set: &IndexSet) -> Result<Self> {
        let cols = set.with_intercept();
        let x = self.x.select_columns(&cols);
        let names = cols.iter().map(|&j| self.column_names[j].clone()).collect();
        Self::new(self.outcome.clone(), self.treatment.clone(), x, names)
    }
}

/// Rows of a single treatment arm, with their positions in the parent dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmData {
    pub treated: bool,
    pub rows: Vec<usize>,
    pub outcome: Vec<f64>,
    pub x: DMatrix<f64>,
}

impl ArmData {
    pub fn n(&self) -> usize {
        self.outcome.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

/// Splits the dataset into its treated and control rows.
pub fn split_by_arm(data: &Dataset) -> Result<(ArmData, ArmData)> {
    let (treated_rows, control_rows): (Vec<usize>, Vec<usize>) = (0..data.n()).partition(|&i| data.treatment[i]);
    if treated_rows.is_empty() || control_rows.is_empty() {
        return Err(Error::EmptyArm {
            treated: treated_rows.len(),
            control: control_rows.len(),
        });
    }
    let arm = |treated: bool, rows: Vec<usize>| ArmData {
        treated,
        outcome: rows.iter().map(|&i| data.outcome[i]).collect(),
        x: data.x.select_rows(&rows),
        rows,
    };
    Ok((arm(true, treated_rows), arm(false, control_rows)))
}

/// Per-column centering and scaling applied to the predictors.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    /// Mean of predictor column `j + 1`.
    pub mean: Vec<f64>,
    /// Sample standard deviation (n - 1 denominator) of predictor column `j + 1`.
    pub scale: Vec<f64>,
}

impl Standardization {
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        self.check_width(data)?;
        let mut x = data.x.clone();
        for (k, (&m, &s)) in self.mean.iter().zip(&self.scale).enumerate() {
            x.column_mut(k + 1).apply(|v| *v = (*v - m) / s);
        }
        Dataset::new(
            data.outcome.clone(),
            data.treatment.clone(),
            x,
            data.column_names.clone(),
        )
    }

    pub fn invert(&self, data: &Dataset) -> Result<Dataset> {
        self.check_width(data)?;
        let mut x = data.x.clone();
        for (k, (&m, &s)) in self.mean.iter().zip(&self.scale).enumerate() {
            x.column_mut(k + 1).apply(|v| *v = *v * s + m);
        }
        Dataset::new(
            data.outcome.clone(),
            data.treatment.clone(),
            x,
            data.column_names.clone(),
        )
    }

    fn check_width(&self, data: &Dataset) -> Result<()> {
        if self.mean.len() + 1 != data.p() || self.scale.len() + 1 != data.p() {
            return Err(Error::InvalidParameter(format!(
                "standardization covers {} predictors, dataset has {}",
                self.mean.len(),
                data.p() - 1
            )));
        }
        Ok(())
    }
}

/// Centers every predictor to mean 0 and scales it to sample SD 1.
pub fn standardize(data: &Dataset) -> Result<(Dataset, Standardization)> {
    let n = data.n() as f64;
    let mut mean = Vec::with_capacity(data.p() - 1);
    let mut scale = Vec::with_capacity(data.p() - 1);
    for j in 1..data.p() {
        let col = data.x.column(j);
        let m = col.iter().sum::<f64>() / n;
        let ss: f64 = col.iter().map(|v| (v - m) * (v - m)).sum();
        let sd = (ss / (n - 1.0)).sqrt();
        if !sd.is_finite() {
            return Err(Error::NonFinite(format!("covariate column {}", data.column_names[j])));
        }
        // Relative test so that a constant column of large magnitude is still caught.
        if sd <= 1e-12 * m.abs().max(1.0) {
            return Err(Error::ConstantColumn(j));
        }
        mean.push(m);
        scale.push(sd);
    }
    let transform = Standardization { mean, scale };
    let out = transform.apply(data)?;
    Ok((out, transform))
}

/// Sorted set of predictor column indices (never the intercept).
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Sorts and deduplicates. Panics if 0 (the intercept) is present.
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = indices.into_iter().collect();
        assert!(!v.contains(&0), "intercept column cannot be part of an IndexSet");
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    /// Like [`IndexSet::new`] but validates against a design with `p` columns.
    pub fn try_new(indices: impl IntoIterator<Item = usize>, p: usize) -> Result<Self> {
        let v: Vec<usize> = indices.into_iter().collect();
        if let Some(&bad) = v.iter().find(|&&j| j == 0 || j >= p) {
            return Err(Error::InvalidParameter(format!(
                "index {bad} is not a predictor column in 1..{}",
                p.saturating_sub(1)
            )));
        }
        Ok(Self::new(v))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.0.iter().all(|&j| other.contains(j))
    }

    /// Column list `[0, set...]` for building a restricted design.
    pub fn with_intercept(&self) -> Vec<usize> {
        std::iter::once(0).chain(self.iter()).collect()
    }

    pub fn names(&self, column_names: &[String]) -> Vec<String> {
        self.iter().map(|j| column_names[j].clone()).collect()
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut k) = (0, 0);
        while i < a.len() && k < b.len() {
            match a[i].cmp(&b[k]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[k]);
                    k += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    k += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[k..]);
        IndexSet(out)
    }

    pub fn intersection(&self, other: &IndexSet) -> IndexSet {
        IndexSet(self.0.iter().copied().filter(|&j| other.contains(j)).collect())
    }

    /// Elements of `self` not in `other`.
    pub fn difference(&self, other: &IndexSet) -> IndexSet {
        IndexSet(self.0.iter().copied().filter(|&j| !other.contains(j)).collect())
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, j) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, "}}")
    }
}

pub fn set_union(a: &IndexSet, b: &IndexSet) -> IndexSet {
    a.union(b)
}

pub fn set_intersection(a: &IndexSet, b: &IndexSet) -> IndexSet {
    a.intersection(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy(y: Vec<f64>, a: Vec<bool>, cols: &[&[f64]]) -> Dataset {
        let n = y.len();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        let names: Vec<String> = (1..=cols.len()).map(|j| format!("X{j}")).collect();
        Dataset::from_rows(y, a, &rows, &names).unwrap()
    }

    #[test]
    fn two_point_column_is_symmetric_with_unit_sample_sd() {
        // sample SD of (1, 3) is √2, so the standardized values are ±1/√2
        let d = toy(vec![0.0, 1.0], vec![true, false], &[&[1.0, 3.0]]);
        let (s, t) = standardize(&d).unwrap();
        let c = s.x().column(1);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((c[0] + h).abs() < 1e-15 && (c[1] - h).abs() < 1e-15);
        assert!(((c[0] * c[0] + c[1] * c[1]) - 1.0).abs() < 1e-15);
        assert_eq!(t.mean, vec![2.0]);
        assert!((t.scale[0] - 2f64.sqrt()).abs() < 1e-15);
        // intercept untouched
        assert!(s.x().column(0).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn standardized_column_is_a_fixed_point() {
        let raw = [-1.3, 0.2, 0.5, 2.0, -0.4, 1.1];
        let d = toy(vec![0.0; 6], vec![true, false, true, false, true, false], &[&raw]);
        let (s1, _) = standardize(&d).unwrap();
        let (s2, t2) = standardize(&s1).unwrap();
        for i in 0..6 {
            assert!((s1.x()[(i, 1)] - s2.x()[(i, 1)]).abs() < 1e-12);
        }
        assert!(t2.mean[0].abs() < 1e-12);
        assert!((t2.scale[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_column_is_rejected() {
        let d = toy(
            vec![1.0, 2.0, 3.0],
            vec![true, false, true],
            &[&[1.0, 2.0, 3.0], &[4.0, 4.0, 4.0]],
        );
        assert!(matches!(standardize(&d), Err(Error::ConstantColumn(2))));
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let rows = vec![vec![1.0], vec![f64::NAN]];
        let err = Dataset::from_rows(vec![0.0, 1.0], vec![true, false], &rows, &["X1".into()]);
        assert!(matches!(err, Err(Error::NonFinite(_))));
        let err = Dataset::from_rows(
            vec![0.0, f64::INFINITY],
            vec![true, false],
            &[vec![1.0], vec![2.0]],
            &["X1".into()],
        );
        assert!(matches!(err, Err(Error::NonFinite(_))));
    }

    #[test]
    fn split_partitions_rows() {
        let d = toy(vec![1.0, 2.0, 3.0], vec![true, false, true], &[&[0.1, 0.2, 0.3]]);
        let (t, c) = split_by_arm(&d).unwrap();
        assert_eq!(t.rows, vec![0, 2]);
        assert_eq!(c.rows, vec![1]);
        assert_eq!(t.outcome, vec![1.0, 3.0]);
        assert_eq!(c.x[(0, 1)], 0.2);
    }

    #[test]
    fn all_treated_is_empty_arm() {
        let x = DMatrix::from_element(3, 1, 1.0);
        let err = Dataset::new(vec![1.0, 2.0, 3.0], vec![true; 3], x, vec![INTERCEPT_NAME.into()]);
        assert!(matches!(err, Err(Error::EmptyArm { treated: 3, control: 0 })));
    }

    #[test]
    fn worked_union_and_intersection() {
        let m_alpha = IndexSet::new([1, 3]);
        let m_beta = IndexSet::new([2]);
        assert_eq!(set_union(&m_alpha, &m_beta), IndexSet::new([1, 2, 3]));
        assert!(set_intersection(&m_alpha, &m_beta).is_empty());

        let a = IndexSet::new([4, 9]);
        assert_eq!(a.union(&a), a);
        assert_eq!(a.intersection(&a), a);

        let e = IndexSet::empty();
        let b = IndexSet::new([5, 7]);
        assert_eq!(e.union(&b), b);
        assert!(e.intersection(&b).is_empty());
    }

    #[test]
    fn try_new_rejects_intercept_and_out_of_range() {
        assert!(IndexSet::try_new([0, 1], 5).is_err());
        assert!(IndexSet::try_new([5], 5).is_err());
        assert_eq!(IndexSet::try_new([3, 1, 3], 5).unwrap().as_slice(), &[1, 3]);
    }

    fn arb_set() -> impl Strategy<Value = IndexSet> {
        prop::collection::vec(1usize..30, 0..12).prop_map(IndexSet::new)
    }

    proptest! {
        #[test]
        fn set_algebra_laws(a in arb_set(), b in arb_set(), c in arb_set()) {
            let u = a.union(&b);
            let i = a.intersection(&b);
            prop_assert_eq!(&u, &b.union(&a));
            prop_assert_eq!(&i, &b.intersection(&a));
            prop_assert_eq!(a.union(&b).union(&c), a.union(&b.union(&c)));
            prop_assert_eq!(a.intersection(&b).intersection(&c), a.intersection(&b.intersection(&c)));
            prop_assert!(i.is_subset(&a) && a.is_subset(&u));
            prop_assert!(i.is_subset(&b) && b.is_subset(&u));
            prop_assert!(u.as_slice().windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn standardize_then_invert_is_identity(
            cols in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 8), 1..4),
            shift in -1e3f64..1e3,
        ) {
            let n = 8;
            let rows: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().enumerate().map(|(k, c)| c[i] + shift * k as f64 + i as f64 * 0.01).collect()).collect();
            let names: Vec<String> = (1..=cols.len()).map(|j| format!("X{j}")).collect();
            let a = (0..n).map(|i| i % 2 == 0).collect();
            let d = Dataset::from_rows(vec![0.5; n], a, &rows, &names).unwrap();
            let (s, t) = standardize(&d).unwrap();
            for j in 1..s.p() {
                let col = s.x().column(j);
                let m = col.iter().sum::<f64>() / n as f64;
                let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
                prop_assert!(m.abs() < 1e-10);
                prop_assert!((sd - 1.0).abs() < 1e-10);
            }
            let back = t.invert(&s).unwrap();
            for j in 0..d.p() {
                for i in 0..n {
                    let (u, v) = (d.x()[(i, j)], back.x()[(i, j)]);
                    prop_assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
                }
            }
        }

        #[test]
        fn split_preserves_rows(flags in prop::collection::vec(any::<bool>(), 2..40)) {
            prop_assume!(flags.iter().any(|&f| f) && flags.iter().any(|&f| !f));
            let n = flags.len();
            let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 * 0.5]).collect();
            let y: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let d = Dataset::from_rows(y, flags.clone(), &rows, &["X1".into()]).unwrap();
            let (t, c) = split_by_arm(&d).unwrap();
            prop_assert_eq!(t.n() + c.n(), n);
            let mut all: Vec<usize> = t.rows.iter().chain(&c.rows).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            for (k, &i) in t.rows.iter().enumerate() {
                prop_assert!(flags[i]);
                prop_assert_eq!(t.outcome[k], d.outcome()[i]);
                prop_assert_eq!(t.x[(k, 1)], d.x()[(i, 1)]);
            }
        }
    }
}
