use drsel_core::rng::stream;
use drsel_core::selection::{select_variables, strategy_set, SelectionConfig, Strategy};
use drsel_core::{standardize, Dataset, IndexSet};
use rand::Rng;
use rand_distr::StandardNormal;

/// Quadratic outcome in X1 and X2, logistic treatment in X1 and X3.
fn quadratic_outcome_data(n: usize, seed: u64) -> Dataset {
    let mut rng = stream(seed, 0);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
        let e = 1.0 / (1.0 + (-(1.0 + x[0] + x[2])).exp());
        a.push(rng.random::<f64>() < e);
        let eps: f64 = rng.sample(StandardNormal);
        y.push(0.1 * x[0] * x[0] + x[1] * x[1] + 2.0 * x[1] + eps);
        rows.push(x);
    }
    let names: Vec<String> = (1..=3).map(|j| format!("X{j}")).collect();
    let d = Dataset::from_rows(y, a, &rows, &names).unwrap();
    standardize(&d).unwrap().0
}

#[test]
fn union_keeps_the_instrument_the_outcome_fit_misses() {
    let reps = 20;
    let mut hits = 0;
    for r in 0..reps {
        let data = quadratic_outcome_data(5000, 300 + r);
        let sel = select_variables(&data, &SelectionConfig::new(0.1, 0.02, r)).unwrap();
        let expected = sel.m_beta_hat == IndexSet::new([2])
            && sel.m_alpha_hat == IndexSet::new([1, 3])
            && sel.u_hat == IndexSet::new([1, 2, 3])
            && sel.i_hat.is_empty();
        if expected {
            assert_eq!(strategy_set(&sel, Strategy::Outcome), IndexSet::new([2]));
            assert!(strategy_set(&sel, Strategy::Intersection).is_empty());
            assert_eq!(strategy_set(&sel, Strategy::Union), IndexSet::new([1, 2, 3]));
            hits += 1;
        }
    }
    assert!(2 * hits > reps, "expected pattern in {hits}/{reps} replicates");
}

#[test]
fn union_and_intersection_are_consistent() {
    let data = quadratic_outcome_data(1500, 4);
    let sel = select_variables(&data, &SelectionConfig::new(0.1, 0.02, 4)).unwrap();
    assert_eq!(sel.u_hat, sel.m_alpha_hat.union(&sel.m_beta_hat));
    assert_eq!(sel.i_hat, sel.m_alpha_hat.intersection(&sel.m_beta_hat));
    assert!(sel.i_hat.is_subset(&sel.u_hat));
    assert_eq!(
        sel.m_beta_hat,
        sel.treated_fit.active_set.union(&sel.control_fit.active_set)
    );
}
