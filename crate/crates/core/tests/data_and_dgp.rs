use drsel_core::dgp::{generate, true_ace, Scenario, ScenarioSpec, Setting};
use drsel_core::{split_by_arm, standardize, Dataset, IndexSet};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[test]
fn standardize_recovers_normal_moments() {
    let n = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let dist = Normal::new(5.0, 2.0).unwrap();
    let col: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
    let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { col[i] });
    let a = (0..n).map(|i| i % 3 == 0).collect();
    let data = Dataset::new(vec![0.0; n], a, x, vec!["(Intercept)".into(), "z".into()]).unwrap();
    let (std, t) = standardize(&data).unwrap();

    let se_mean = 2.0 / (n as f64).sqrt();
    let se_sd = 2.0 / (2.0 * n as f64).sqrt();
    assert!((t.mean[0] - 5.0).abs() < 3.0 * se_mean, "mean {}", t.mean[0]);
    assert!((t.scale[0] - 2.0).abs() < 3.0 * se_sd, "scale {}", t.scale[0]);

    let z = std.x().column(1);
    let m = z.iter().sum::<f64>() / n as f64;
    let sd = (z.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    assert!(m.abs() < 1e-10 && (sd - 1.0).abs() < 1e-10);

    let back = t.invert(&std).unwrap();
    for (i, &c) in col.iter().enumerate() {
        assert!((back.x()[(i, 1)] - c).abs() <= 1e-12 * c.abs().max(1.0));
    }
}

#[test]
fn scenario_one_draw_splits_cleanly() {
    let (data, _) = generate(&ScenarioSpec::new(Scenario::S1, Setting::A, 5000, 17)).unwrap();
    let (treated, control) = split_by_arm(&data).unwrap();
    assert_eq!(treated.n() + control.n(), 5000);
    assert_eq!(treated.n(), data.n_treated());
    let mut rows: Vec<Vec<u64>> = Vec::new();
    for arm in [&treated, &control] {
        for i in 0..arm.n() {
            let mut r: Vec<u64> = arm.x.row(i).iter().map(|v| v.to_bits()).collect();
            r.push(arm.outcome[i].to_bits());
            rows.push(r);
        }
    }
    let mut orig: Vec<Vec<u64>> = (0..data.n())
        .map(|i| {
            let mut r: Vec<u64> = data.x().row(i).iter().map(|v| v.to_bits()).collect();
            r.push(data.outcome()[i].to_bits());
            r
        })
        .collect();
    rows.sort();
    orig.sort();
    assert_eq!(rows, orig);
}

#[test]
fn generated_covariates_pass_moment_checks() {
    let n = 4000;
    let (data, _) = generate(&ScenarioSpec::new(Scenario::S3, Setting::D, n, 3)).unwrap();
    let nf = n as f64;
    for j in 1..data.p() {
        let c = data.x().column(j);
        let m = c.iter().sum::<f64>() / nf;
        let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
        assert!(m.abs() <= 4.0 / nf.sqrt(), "column {j} mean {m}");
        assert!((sd - 1.0).abs() <= 4.0 / (2.0 * nf).sqrt(), "column {j} sd {sd}");
    }
}

#[test]
fn generation_is_reproducible_and_oracle_is_consistent() {
    let spec = ScenarioSpec::new(Scenario::S1, Setting::A, 700, 5);
    let (d1, o1) = generate(&spec).unwrap();
    let (d2, o2) = generate(&spec).unwrap();
    assert_eq!(d1, d2);
    assert_eq!(o1, o2);
    for i in 0..d1.n() {
        let row = d1.x().row(i);
        let eta: f64 = (1..=4).map(|j| row[j]).sum();
        assert_eq!(o1.propensity[i], 1.0 / (1.0 + (-eta).exp()));
        let y = if d1.treatment()[i] { o1.y1[i] } else { o1.y0[i] };
        assert_eq!(d1.outcome()[i], y);
    }
}

#[test]
fn symmetric_propensity_has_half_mean() {
    let n = 5000;
    let (_, oracle) = generate(&ScenarioSpec::new(Scenario::S2, Setting::A, n, 12)).unwrap();
    let m = oracle.propensity.iter().sum::<f64>() / n as f64;
    let sd = (oracle.propensity.iter().map(|e| (e - m).powi(2)).sum::<f64>() / n as f64).sqrt();
    assert!((m - 0.5).abs() < 3.0 * sd / (n as f64).sqrt());
}

#[test]
fn linear_outcome_models_have_zero_effect() {
    for sc in [Scenario::S1, Scenario::S2] {
        let (_, oracle) = generate(&ScenarioSpec::new(sc, Setting::A, 20_000, 9)).unwrap();
        let d: Vec<f64> = oracle.y1.iter().zip(&oracle.y0).map(|(a, b)| a - b).collect();
        let m = oracle.sample_ace();
        let sd = (d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / d.len() as f64).sqrt();
        assert!(m.abs() < 3.0 * sd / (d.len() as f64).sqrt(), "{sc:?}: {m}");
        let ace = true_ace(&ScenarioSpec::new(sc, Setting::B, 10, 0), 100_000, 1);
        assert!(ace.value.abs() <= 3.0 * ace.se.max(1e-12));
    }
}

#[test]
fn nonlinear_true_effects_match_published_values() {
    let cases = [
        (Scenario::S1, 1.6031),
        (Scenario::S2, 1.4280),
        (Scenario::S3, 1.6031),
        (Scenario::S4, 1.4280),
    ];
    for (sc, expect) in cases {
        let ace = true_ace(&ScenarioSpec::new(sc, Setting::C, 10, 0), 400_000, 3);
        assert!((ace.value - expect).abs() < 0.01, "{sc:?}: {} vs {expect}", ace.value);
    }
}

#[test]
fn truth_sets_follow_scenario_roles() {
    let roles = [
        (Scenario::S1, vec![3, 4], vec![1, 2], vec![5, 6]),
        (Scenario::S2, vec![3, 4], vec![], vec![]),
        (Scenario::S3, vec![3, 4], vec![], vec![5, 6]),
        (Scenario::S4, vec![3, 4], vec![1, 2], vec![]),
    ];
    for (sc, xc, xi, xp) in roles {
        let t = ScenarioSpec::new(sc, Setting::A, 10, 0).truth();
        assert_eq!(t.confounders(), IndexSet::new(xc), "{sc:?}");
        assert_eq!(t.instruments(), IndexSet::new(xi), "{sc:?}");
        assert_eq!(t.precision(), IndexSet::new(xp), "{sc:?}");
    }
}
