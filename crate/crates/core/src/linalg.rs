//! Small dense helpers: a rank-revealing Cholesky and row-subset Gram matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub(crate) struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    /// Factors `g`. A pivot that falls below `rel_tol` times its diagonal
    /// entry marks that position as linearly dependent on the earlier ones;
    /// all such positions are returned on failure.
    pub(crate) fn new(g: &DMatrix<f64>, rel_tol: f64) -> Result<Self, Vec<usize>> {
        let k = g.nrows();
        let mut l = DMatrix::<f64>::zeros(k, k);
        let mut dependent = Vec::new();
        for j in 0..k {
            let mut d = g[(j, j)];
            for m in 0..j {
                d -= l[(j, m)] * l[(j, m)];
            }
            let pivot_ok = d > rel_tol * g[(j, j)].abs() && g[(j, j)] > 0.0;
            if !pivot_ok {
                dependent.push(j);
                continue;
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..k {
                let mut s = g[(i, j)];
                for m in 0..j {
                    s -= l[(i, m)] * l[(j, m)];
                }
                l[(i, j)] = s / djj;
            }
        }
        if dependent.is_empty() {
            Ok(Self { l })
        } else {
            Err(dependent)
        }
    }

    #[allow(clippy::needless_range_loop)]
    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let k = self.l.nrows();
        let mut y = b.to_vec();
        for i in 0..k {
            let mut s = y[i];
            for m in 0..i {
                s -= self.l[(i, m)] * y[m];
            }
            y[i] = s / self.l[(i, i)];
        }
        for i in (0..k).rev() {
            let mut s = y[i];
            for m in (i + 1)..k {
                s -= self.l[(m, i)] * y[m];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub(crate) fn min_eigenvalue(g: &DMatrix<f64>) -> f64 {
    if g.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(g.clone()).eigenvalues.min()
}

pub(crate) fn max_eigenvalue(g: &DMatrix<f64>) -> f64 {
    if g.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(g.clone()).eigenvalues.max()
}

/// `Xᵀ X / n`.
pub(crate) fn mean_gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mut g = x.tr_mul(x);
    g /= n;
    g
}

/// `Xᵀ v / n`.
pub(crate) fn mean_cross(x: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let n = x.nrows() as f64;
    let v = DVector::from_column_slice(v);
    (x.tr_mul(&v) / n).iter().copied().collect()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd_system() {
        let g = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let b = [1.0, 2.0, 3.0];
        let x = Cholesky::new(&g, 1e-12).unwrap().solve(&b);
        let back = &g * DVector::from_column_slice(&x);
        for i in 0..3 {
            assert!((back[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_reports_dependent_positions() {
        // third column = first + second
        let x = DMatrix::from_row_slice(4, 3, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 2.0, 3.0, 1.0, 5.0, 6.0]);
        let g = x.tr_mul(&x);
        assert_eq!(Cholesky::new(&g, 1e-10).unwrap_err(), vec![2]);
    }
}
