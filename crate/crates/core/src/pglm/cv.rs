use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{CvPoint, PathModel, SolverOptions};
use crate::error::Result;
use crate::rng;

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub best_index: usize,
    pub table: Vec<CvPoint>,
}

/// Shuffles `0..n` with a stream derived from `seed` and cuts it into
/// `folds` contiguous blocks whose sizes differ by at most one. Each block
/// is returned sorted.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, 0));
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for k in 0..folds {
        let len = base + usize::from(k < extra);
        let mut block = idx[start..start + len].to_vec();
        block.sort_unstable();
        out.push(block);
        start += len;
    }
    out
}

/// K-fold cross-validation over a descending λ grid.
///
/// The chosen index minimizes the mean held-out loss; among ties the
/// larger λ (smaller index) wins.
pub fn cross_validate<M: PathModel + ?Sized>(
    model: &M,
    lambdas: &[f64],
    folds: usize,
    a: f64,
    opts: &SolverOptions,
    seed: u64,
) -> Result<CvOutcome> {
    let n = model.n_obs();
    let blocks = fold_assignment(n, folds, seed);
    let losses: Vec<Vec<f64>> = blocks
        .par_iter()
        .map(|test| {
            let mut in_test = vec![false; n];
            for &i in test {
                in_test[i] = true;
            }
            let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
            let path = model.fit_path(Some(&train), lambdas, a, opts)?;
            Ok(path
                .coefficients
                .iter()
                .map(|beta| model.heldout_loss(test, beta))
                .collect())
        })
        .collect::<Result<_>>()?;

    let k = folds as f64;
    let table: Vec<CvPoint> = lambdas
        .iter()
        .enumerate()
        .map(|(l, &lambda)| {
            let mean = losses.iter().map(|f| f[l]).sum::<f64>() / k;
            let var = losses.iter().map(|f| (f[l] - mean).powi(2)).sum::<f64>() / (k - 1.0);
            CvPoint {
                lambda,
                mean_loss: mean,
                sd_loss: var.sqrt(),
            }
        })
        .collect();

    let mut best_index = 0;
    for (l, pt) in table.iter().enumerate() {
        if pt.mean_loss < table[best_index].mean_loss {
            best_index = l;
        }
    }
    Ok(CvOutcome { best_index, table })
}
