//! Monte Carlo checks of the simulated subordinator and the replication
//! harness against closed-form expectations.

use regcomp::regvar::SlowlyVarying;
use regcomp::rng::{domain, stream};
use regcomp::stats::config::{Allocation, ExperimentConfig, ModelConfig};
use regcomp::stats::replicate::run_replications;
use regcomp::subordinator::{exp_functional, frequencies, rho, simulate_path, SubordinatorSpec};

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0);
    (m, v.sqrt())
}

#[test]
fn mean_exponential_functional_of_stable_path() {
    // E I_α = 1/Φ(α) = α^{-α} for the stable preset
    let spec = SubordinatorSpec::stable(0.5).unwrap();
    let mut samples = Vec::with_capacity(10_000);
    let mut bias = 0.0f64;
    for i in 0..10_000 {
        let mut rng = stream(101, domain::PATH, i);
        let path = simulate_path(&spec, 1e-6, 1e-8, &mut rng).unwrap();
        let s = exp_functional(&path, 0.5).unwrap();
        bias = bias.max(s.total_bias());
        samples.push(s.exp_functional);
    }
    let (m, sd) = mean_sd(&samples);
    let se = sd / (samples.len() as f64).sqrt();
    let target = 2f64.sqrt();
    assert!(
        (m - target).abs() <= 3.0 * se + bias,
        "mean {m}, se {se}, bias {bias}"
    );
}

#[test]
fn coarse_and_fine_truncation_agree_within_reported_bias() {
    let spec = SubordinatorSpec::stable(0.5).unwrap();
    for i in 0..20 {
        let mut rng = stream(202, domain::PATH, i);
        let fine = simulate_path(&spec, 1e-7, 1e-8, &mut rng).unwrap();
        let coarse = fine.coarsen(1e-4, 1e-8).unwrap();
        let f = exp_functional(&fine, 0.5).unwrap();
        let c = exp_functional(&coarse, 0.5).unwrap();
        let budget = c.total_bias() + f.total_bias();
        let diff = c.exp_functional - f.exp_functional;
        assert!(
            diff.abs() <= budget,
            "path {i}: diff {diff}, budget {budget}"
        );
    }
}

#[test]
fn pathwise_counting_function_settles() {
    let spec = SubordinatorSpec::stable(0.5).unwrap();
    let ell = SlowlyVarying::Constant(1.0 / std::f64::consts::PI.sqrt());
    let mut rng = stream(303, domain::PATH, 0);
    let path = simulate_path(&spec, 1e-8, 1e-10, &mut rng).unwrap();
    let freqs = frequencies(&path).unwrap();
    let i_alpha = exp_functional(&path, 0.5).unwrap().exp_functional;
    let normalized: Vec<f64> = [1e-3, 1e-4, 1e-5]
        .iter()
        .map(|&x: &f64| rho(&freqs, x).unwrap() as f64 * x.sqrt() / ell.eval(1.0 / x))
        .collect();
    let spread = (normalized[2] - normalized[1]).abs() / normalized[2];
    assert!(spread < 0.10, "{normalized:?}");
    assert!(
        (normalized[2] / i_alpha - 1.0).abs() < 0.10,
        "{normalized:?} vs {i_alpha}"
    );
}

#[test]
fn mean_counting_function_has_index_alpha() {
    let spec = SubordinatorSpec::stable(0.5).unwrap();
    let xs: Vec<f64> = (0..=8).map(|k| 10f64.powf(-3.0 - k as f64 / 4.0)).collect();
    let mut sums = vec![0.0; xs.len()];
    for i in 0..1000 {
        let mut rng = stream(404, domain::PATH, i);
        let path = simulate_path(&spec, 1e-7, 1e-7, &mut rng).unwrap();
        let freqs = frequencies(&path).unwrap();
        for (s, &x) in sums.iter_mut().zip(&xs) {
            *s += rho(&freqs, x).unwrap() as f64;
        }
    }
    // least-squares slope of ln E ρ(x) against ln(1/x)
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(&sums)
        .map(|(x, s)| (-x.ln(), (s / 1000.0).ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope - 0.5).abs() < 0.02, "slope {slope}");
}

#[test]
fn replicated_exponential_functional_matches_its_mean() {
    let mut cfg = ExperimentConfig::new(ModelConfig::stable(0.5), Allocation::FixedN(100_000));
    cfg.replications = 100;
    cfg.master_seed = 505;
    let table = run_replications(&cfg).unwrap();
    let col = table.column("i_alpha").unwrap();
    assert_eq!(col.len(), 100);
    let (m, sd) = mean_sd(&col);
    let se = sd / 10.0;
    assert!((m - 2f64.sqrt()).abs() <= 4.0 * se, "mean {m}, se {se}");
}

#[test]
fn power_law_table_records_threshold_counts() {
    let mut cfg = ExperimentConfig::new(
        ModelConfig::PowerLaw {
            beta: 2.0,
            tail_tol: None,
        },
        Allocation::Poissonized(1e5),
    );
    cfg.statistics = vec!["r-star".parse().unwrap()];
    cfg.replications = 200;
    let table = run_replications(&cfg).unwrap();
    assert_eq!(table.rows.len(), 200);
    assert!(table.rows.iter().all(|r| r.i_alpha.is_none()));
    let total: u64 = table.counts(0).iter().sum();
    // E K ≈ 1 per replication
    assert!(total > 100 && total < 350, "{total}");
}
