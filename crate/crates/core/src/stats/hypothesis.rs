//! Reference samplers and the two tests used by the harness: a binned
//! two-sample chi-square and the Poisson index-of-dispersion test.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Default significance level for `passed`.
pub const DEFAULT_LEVEL: f64 = 0.01;
const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: String,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub level: f64,
    pub passed: bool,
    pub sample_sizes: Vec<usize>,
    pub bins: Option<usize>,
    pub degrees_of_freedom: Option<usize>,
    pub diagnostics: Vec<String>,
}

impl TestReport {
    fn new(
        test: &str,
        statistic: Option<f64>,
        p_value: Option<f64>,
        sample_sizes: Vec<usize>,
    ) -> Self {
        let passed = p_value.is_some_and(|p| p > DEFAULT_LEVEL);
        Self {
            test: test.into(),
            statistic,
            p_value,
            level: DEFAULT_LEVEL,
            passed,
            sample_sizes,
            bins: None,
            degrees_of_freedom: None,
            diagnostics: Vec::new(),
        }
    }

    pub fn passes(&self, level: f64) -> bool {
        self.p_value.is_some_and(|p| p > level)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn chi_square_sf(stat: f64, df: usize) -> f64 {
    ChiSquared::new(df as f64)
        .expect("df > 0")
        .sf(stat)
        .clamp(0.0, 1.0)
}

/// One `Poisson(u^{-α-1} I)` draw per `I`.
pub fn mixed_poisson_reference<R: Rng + ?Sized>(
    alpha: f64,
    u: f64,
    i_alpha_samples: &[f64],
    rng: &mut R,
) -> Result<Vec<u64>> {
    if !(u > 0.0) {
        return Err(Error::Domain(format!("u must be positive, got {u}")));
    }
    if i_alpha_samples.is_empty() {
        return Err(Error::Domain("no I_alpha samples".into()));
    }
    let scale = u.powf(-alpha - 1.0);
    i_alpha_samples
        .iter()
        .map(|&i| {
            if !(i > 0.0) {
                return Err(Error::Domain(format!("I_alpha sample {i} is not positive")));
            }
            let mean = scale * i;
            Ok(Poisson::new(mean)
                .map(|d| d.sample(rng) as u64)
                .unwrap_or(0))
        })
        .collect()
}

/// Two-sample chi-square on the pooled integer values, merging adjacent
/// values until both expected cell counts reach 5.
pub fn two_sample_test(a: &[u64], b: &[u64]) -> Result<TestReport> {
    if a.len() < 200 || b.len() < 200 {
        return Err(Error::Domain(format!(
            "two-sample test needs at least 200 draws per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let total = na + nb;
    let mut table: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    for &x in a {
        table.entry(x).or_default().0 += 1;
    }
    for &x in b {
        table.entry(x).or_default().1 += 1;
    }
    let min_share = na.min(nb) / total;
    let mut bins: Vec<(u64, u64)> = Vec::new();
    let mut cur = (0u64, 0u64);
    for &(ca, cb) in table.values() {
        cur.0 += ca;
        cur.1 += cb;
        if (cur.0 + cur.1) as f64 * min_share >= MIN_EXPECTED {
            bins.push(cur);
            cur = (0, 0);
        }
    }
    if cur.0 + cur.1 > 0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += cur.0;
                last.1 += cur.1;
            }
            None => bins.push(cur),
        }
    }
    let sizes = vec![a.len(), b.len()];
    if bins.len() < 2 {
        let mut rep = TestReport::new("two-sample chi-square", Some(0.0), Some(1.0), sizes);
        rep.bins = Some(bins.len());
        rep.diagnostics.push(format!(
            "pooled sample collapses to a single bin ({} distinct value(s)); passes trivially",
            table.len()
        ));
        return Ok(rep);
    }
    let mut stat = 0.0;
    for &(ca, cb) in &bins {
        let pooled = (ca + cb) as f64;
        let (ea, eb) = (pooled * na / total, pooled * nb / total);
        stat += (ca as f64 - ea).powi(2) / ea + (cb as f64 - eb).powi(2) / eb;
    }
    let df = bins.len() - 1;
    let mut rep = TestReport::new(
        "two-sample chi-square",
        Some(stat),
        Some(chi_square_sf(stat, df)),
        sizes,
    );
    rep.bins = Some(bins.len());
    rep.degrees_of_freedom = Some(df);
    Ok(rep)
}

/// Goodness of fit of observed cell counts against cell probabilities.
/// Adjacent cells are merged, in the given order, until each expected count
/// reaches 5.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<TestReport> {
    if observed.len() != probs.len() || observed.is_empty() {
        return Err(Error::Domain(
            "observed counts and probabilities must align".into(),
        ));
    }
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return Err(Error::Domain("no observations".into()));
    }
    let nf = n as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut cur = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        cur.0 += o as f64;
        cur.1 += p * nf;
        if cur.1 >= MIN_EXPECTED {
            cells.push(cur);
            cur = (0.0, 0.0);
        }
    }
    if cur.0 > 0.0 || cur.1 > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += cur.0;
                last.1 += cur.1;
            }
            None => cells.push(cur),
        }
    }
    if cells.len() < 2 {
        let mut rep = TestReport::new(
            "chi-square goodness of fit",
            Some(0.0),
            Some(1.0),
            vec![observed.len()],
        );
        rep.diagnostics
            .push("all cells merged into one; passes trivially".into());
        return Ok(rep);
    }
    let stat: f64 = cells.iter().map(|&(o, e)| (o - e).powi(2) / e).sum();
    let df = cells.len() - 1;
    let mut rep = TestReport::new(
        "chi-square goodness of fit",
        Some(stat),
        Some(chi_square_sf(stat, df)),
        vec![n as usize],
    );
    rep.bins = Some(cells.len());
    rep.degrees_of_freedom = Some(df);
    Ok(rep)
}

/// Index of dispersion `D = s²/x̄` with the normal approximation
/// `(D - 1)·sqrt((n-1)/2) ~ N(0, 1)` under a Poisson null.
pub fn dispersion_test(samples: &[u64]) -> Result<TestReport> {
    if samples.len() < 500 {
        return Err(Error::Domain(format!(
            "dispersion test needs at least 500 draws, got {}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|&x| x as f64).sum::<f64>() / n;
    if mean == 0.0 {
        let mut rep = TestReport::new("index of dispersion", None, None, vec![samples.len()]);
        rep.diagnostics
            .push("undefined dispersion: sample mean is zero".into());
        return Ok(rep);
    }
    let var = samples
        .iter()
        .map(|&x| (x as f64 - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    let d = var / mean;
    let z = (d - 1.0) * ((n - 1.0) / 2.0).sqrt();
    let p = erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0);
    let mut rep = TestReport::new("index of dispersion", Some(d), Some(p), vec![samples.len()]);
    rep.diagnostics
        .push(format!("mean = {mean}, variance = {var}, z = {z}"));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::Exp1;

    fn poisson_sample(lambda: f64, n: usize, seed: u64, idx: u64) -> Vec<u64> {
        let mut r = rng::stream(seed, 9, idx);
        let d = Poisson::new(lambda).unwrap();
        (0..n).map(|_| d.sample(&mut r) as u64).collect()
    }

    #[test]
    fn identical_samples_give_unit_p_value() {
        let a = poisson_sample(2.0, 1000, 1, 0);
        let rep = two_sample_test(&a, &a).unwrap();
        assert!((rep.p_value.unwrap() - 1.0).abs() < 1e-12);
        assert!(rep.passed);
    }

    #[test]
    fn degenerate_pool_passes_with_diagnostic() {
        let a = vec![0u64; 300];
        let rep = two_sample_test(&a, &a).unwrap();
        assert_eq!(rep.p_value, Some(1.0));
        assert!(!rep.diagnostics.is_empty());
        assert!(two_sample_test(&a[..100], &a).is_err());
    }

    #[test]
    fn two_sample_null_calibration() {
        let rejections = (0..200)
            .filter(|&i| {
                let a = poisson_sample(2.0, 10_000, 3, 2 * i);
                let b = poisson_sample(2.0, 10_000, 3, 2 * i + 1);
                two_sample_test(&a, &b).unwrap().p_value.unwrap() < 0.05
            })
            .count();
        let frac = rejections as f64 / 200.0;
        assert!((0.02..=0.09).contains(&frac), "{frac}");
    }

    #[test]
    fn two_sample_power() {
        let a = poisson_sample(2.0, 10_000, 4, 0);
        let b = poisson_sample(3.0, 10_000, 4, 1);
        assert!(two_sample_test(&a, &b).unwrap().p_value.unwrap() < 1e-6);
    }

    #[test]
    fn dispersion_of_poisson_and_mixtures() {
        let a = poisson_sample(1.0, 100_000, 5, 0);
        let rep = dispersion_test(&a).unwrap();
        assert!((0.97..=1.03).contains(&rep.statistic.unwrap()));
        // exponential mixing with mean 2: D = 1 + Var(I)/E(I) = 3
        let mut r = rng::stream(5, 9, 1);
        let mix: Vec<f64> = (0..100_000)
            .map(|_| {
                let e: f64 = Exp1.sample(&mut r);
                2.0 * e
            })
            .collect();
        let m = mixed_poisson_reference(0.5, 1.0, &mix, &mut r).unwrap();
        let rep = dispersion_test(&m).unwrap();
        assert!(rep.statistic.unwrap() > 1.1 && !rep.passed);
    }

    #[test]
    fn dispersion_edge_cases() {
        let rep = dispersion_test(&vec![0; 600]).unwrap();
        assert!(rep.statistic.is_none() && rep.p_value.is_none() && !rep.passed);
        let rep = dispersion_test(&vec![4; 600]).unwrap();
        assert_eq!(rep.statistic, Some(0.0));
        assert!(!rep.passed);
        assert!(dispersion_test(&[1; 10]).is_err());
    }

    #[test]
    fn dispersion_null_calibration() {
        let rejections = (0..200)
            .filter(|&i| {
                dispersion_test(&poisson_sample(2.0, 10_000, 6, i))
                    .unwrap()
                    .p_value
                    .unwrap()
                    < 0.05
            })
            .count();
        let frac = rejections as f64 / 200.0;
        assert!((0.02..=0.09).contains(&frac), "{frac}");
    }

    #[test]
    fn mixed_reference_edge_cases() {
        let mut r = rng::stream(7, 9, 0);
        // I = λ u^{α+1} gives plain Poisson(λ)
        let u: f64 = 2.0;
        let lambda = 1.5;
        let i = vec![lambda * u.powf(1.5); 100_000];
        let m = mixed_poisson_reference(0.5, u, &i, &mut r).unwrap();
        let d = dispersion_test(&m).unwrap().statistic.unwrap();
        assert!((0.97..=1.03).contains(&d));
        // large u drives the means to zero
        let m = mixed_poisson_reference(0.5, 1e6, &[1.0; 1000], &mut r).unwrap();
        assert!(m.iter().filter(|&&x| x == 0).count() >= 999);
        assert!(mixed_poisson_reference(0.5, 1.0, &[1.0, 0.0], &mut r).is_err());
        assert!(mixed_poisson_reference(0.5, 0.0, &[1.0], &mut r).is_err());
    }

    #[test]
    fn mixed_reference_tower_property() {
        let mut r = rng::stream(8, 9, 0);
        let i: Vec<f64> = (0..10_000).map(|_| 0.5 + r.random::<f64>()).collect();
        let u = 0.8f64;
        let m = mixed_poisson_reference(0.5, u, &i, &mut r).unwrap();
        let n = m.len() as f64;
        let mean = m.iter().sum::<u64>() as f64 / n;
        let var = m.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let target = u.powf(-1.5) * i.iter().sum::<f64>() / n;
        assert!((mean - target).abs() < 3.0 * (var / n).sqrt());
    }

    #[test]
    fn report_json_round_trip() {
        let rep = two_sample_test(
            &poisson_sample(1.0, 500, 9, 0),
            &poisson_sample(1.0, 500, 9, 1),
        )
        .unwrap();
        let back: TestReport = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(back, rep);
    }
}
