//! Desk-scale verification runs, one per acceptance criterion.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::abelian::{case_ratio, closed_form_ratio, AbelianCase, Lemma};
use crate::error::Result;
use crate::numeric::ln_gamma;
use crate::occupancy::{allocate_fixed, count_profile, FixedFrequencies};
use crate::regvar::{small_count_constant, solve_threshold, GrowthFunction, SlowlyVarying};
use crate::rng::{domain, stream};
use crate::stats::config::{
    Allocation, ExperimentConfig, GrowthSpec, ModelConfig, ResolvedModel, StatisticSpec,
};
use crate::stats::hypothesis::{
    chi_square_gof, dispersion_test, mixed_poisson_reference, two_sample_test, DEFAULT_LEVEL,
};
use crate::stats::replicate::{run_replications, with_pool};
use crate::stats::report::{convergence_reports, RatioReport, Target};
use crate::subordinator::{exp_functional, frequencies, rho, simulate_path, SubordinatorSpec};

/// One quantitative check inside a criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance region.
    pub bound: String,
    pub passed: bool,
    /// Reported but not gating.
    pub informational: bool,
}

impl Check {
    fn gate(name: impl Into<String>, value: f64, bound: impl Into<String>, passed: bool) -> Self {
        Self {
            name: name.into(),
            value,
            bound: bound.into(),
            passed,
            informational: false,
        }
    }

    fn info(name: impl Into<String>, value: f64, bound: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value,
            bound: bound.into(),
            passed: true,
            informational: true,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.informational {
            "info"
        } else if self.passed {
            "ok"
        } else {
            "FAIL"
        };
        write!(
            f,
            "[{tag}] {} = {:.6} ({})",
            self.name, self.value, self.bound
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: &'static str,
    pub checks: Vec<Check>,
}

impl CriterionOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

fn as_f64(xs: &[u64]) -> Vec<f64> {
    xs.iter().map(|&x| x as f64).collect()
}

fn poisson_draws<R: Rng + ?Sized>(lambda: f64, m: usize, rng: &mut R) -> Vec<u64> {
    let d = Poisson::new(lambda).expect("positive mean");
    (0..m).map(|_| d.sample(rng) as u64).collect()
}

fn stable_ell(alpha: f64) -> SlowlyVarying {
    SlowlyVarying::Constant((-ln_gamma(1.0 - alpha)).exp())
}

// ---------------------------------------------------------------- 1

#[derive(Debug, Clone)]
pub struct KarlinPoissonParams {
    pub beta: f64,
    pub t: f64,
    pub replications: usize,
    pub seed: u64,
    pub threads: usize,
}

impl Default for KarlinPoissonParams {
    fn default() -> Self {
        Self {
            beta: 2.0,
            t: 1e7,
            replications: 5000,
            seed: 1,
            threads: 0,
        }
    }
}

/// Poissonized power-law scheme at its threshold `r*(t)` against Poisson(1).
pub fn karlin_poisson_limit(p: &KarlinPoissonParams) -> Result<CriterionOutcome> {
    let mut cfg = ExperimentConfig::new(
        ModelConfig::PowerLaw {
            beta: p.beta,
            tail_tol: None,
        },
        Allocation::Poissonized(p.t),
    );
    cfg.statistics = vec![StatisticSpec::Exactly(GrowthSpec::Threshold { scale: 1.0 })];
    cfg.replications = p.replications;
    cfg.master_seed = p.seed;
    cfg.threads = p.threads;
    let table = run_replications(&cfg)?;
    let k = table.counts(0);
    let mut rng = stream(p.seed, domain::REFERENCE, 0);
    let reference = poisson_draws(1.0, k.len(), &mut rng);
    let two = two_sample_test(&k, &reference)?;
    let disp = dispersion_test(&k)?;
    let xs = as_f64(&k);
    let m = mean(&xs);
    let se = (variance(&xs) / xs.len() as f64).sqrt();
    let d = disp.statistic.unwrap_or(f64::NAN);
    Ok(CriterionOutcome {
        id: 1,
        title: "deterministic Karlin Poisson limit",
        checks: vec![
            Check::info("r*(t)", threshold_r(p)? as f64, "threshold index"),
            Check::gate(
                "two-sample p vs Poisson(1)",
                two.p_value.unwrap_or(1.0),
                "> 0.01",
                two.passes(DEFAULT_LEVEL),
            ),
            Check::gate(
                "dispersion index",
                d,
                "in [0.9, 1.1]",
                (0.9..=1.1).contains(&d),
            ),
            Check::gate(
                "sample mean",
                m,
                format!("|mean - 1| <= 3 s.e. = {:.4}", 3.0 * se),
                (m - 1.0).abs() <= 3.0 * se,
            ),
        ],
    })
}

fn threshold_r(p: &KarlinPoissonParams) -> Result<u64> {
    let probe = crate::occupancy::PowerLawFrequencies::with_boxes(p.beta, 1)?;
    let tail = probe.counting_tail();
    GrowthFunction::threshold(tail.alpha, tail.ell).eval(p.t)
}

// ---------------------------------------------------------------- 2

#[derive(Debug, Clone)]
pub struct MixedPoissonParams {
    pub alpha: f64,
    pub n: u64,
    /// `r_1 = ⌊n^θ⌋`, `r_2 = 2 r_1`.
    pub theta: f64,
    pub replications: usize,
    pub seed: u64,
    pub threads: usize,
}

impl Default for MixedPoissonParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            n: 1_000_000,
            theta: 1.0 / 3.0,
            replications: 3000,
            seed: 2,
            threads: 0,
        }
    }
}

/// Moderate-part counts of the stable model against the mixed Poisson limit.
pub fn mixed_poisson_limit(p: &MixedPoissonParams) -> Result<CriterionOutcome> {
    let alpha = p.alpha;
    let ell = stable_ell(alpha);
    let mut cfg = ExperimentConfig::new(ModelConfig::stable(alpha), Allocation::FixedN(p.n));
    let r1 = GrowthFunction::power(p.theta).eval(p.n as f64)?;
    cfg.statistics = vec![
        StatisticSpec::Exactly(GrowthSpec::Fixed(GrowthFunction::Constant(r1))),
        StatisticSpec::Exactly(GrowthSpec::Fixed(GrowthFunction::Constant(2 * r1))),
    ];
    cfg.replications = p.replications;
    cfg.master_seed = p.seed;
    cfg.threads = p.threads;
    let table = run_replications(&cfg)?;
    let k1 = table.counts(0);
    let k2 = table.counts(1);
    let i_paired = table.column("i_alpha").expect("regenerative model");

    // independent I_α draws for the reference sample
    let resolved = cfg.resolve()?;
    let ResolvedModel::Regenerative {
        spec,
        epsilon,
        stop_tol,
    } = resolved.model
    else {
        unreachable!("stable model")
    };
    let i_indep = with_pool(p.threads, || {
        (0..p.replications as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(p.seed, domain::REFERENCE, i);
                let path = simulate_path(&spec, epsilon, stop_tol, &mut rng)?;
                Ok(exp_functional(&path, alpha)?.exp_functional)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let r_n = solve_threshold(alpha, &ell, p.n as f64)?;
    let u1 = r1 as f64 / r_n;
    let u2 = (2 * r1) as f64 / r_n;
    let mut rng = stream(p.seed, domain::AUXILIARY, 0);
    let reference = mixed_poisson_reference(alpha, u1, &i_indep, &mut rng)?;
    let two = two_sample_test(&k1, &reference)?;

    let x1 = as_f64(&k1);
    let x2 = as_f64(&k2);
    let m = mean(&x1);
    let expected = u1.powf(-alpha - 1.0) * alpha.powf(-alpha);
    let oracle = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mm = p.replications as f64;
    let corr = correlation(&x1, &x2);
    let corr_se = (1.0 - corr * corr) / (mm - 1.0).sqrt();
    // conditional on the path the two counts are independent Poisson
    let res1: Vec<f64> = x1
        .iter()
        .zip(&i_paired)
        .map(|(k, i)| k - u1.powf(-alpha - 1.0) * i)
        .collect();
    let res2: Vec<f64> = x2
        .iter()
        .zip(&i_paired)
        .map(|(k, i)| k - u2.powf(-alpha - 1.0) * i)
        .collect();
    let res_corr = correlation(&res1, &res2);
    let (ei, vi) = (mean(&i_indep), variance(&i_indep));
    let (l1, l2) = (u1.powf(-alpha - 1.0), u2.powf(-alpha - 1.0));
    let predicted = l1 * l2 * vi / ((l1 * ei + l1 * l1 * vi) * (l2 * ei + l2 * l2 * vi)).sqrt();
    Ok(CriterionOutcome {
        id: 2,
        title: "moderate-part mixed Poisson limit",
        checks: vec![
            Check::info(
                "limit mean u^{-α-1} α^{-α} at the floored r",
                expected,
                format!("r = {r1}, r(n) = {r_n:.3}"),
            ),
            Check::gate(
                "(a) mean of K_{n,r}",
                m,
                format!("within 10% of {oracle:.4}"),
                (m / oracle - 1.0).abs() <= 0.10,
            ),
            Check::gate(
                "(b) two-sample p vs mixed Poisson",
                two.p_value.unwrap_or(1.0),
                "> 0.01",
                two.passes(DEFAULT_LEVEL),
            ),
            Check::gate(
                "(c) correlation of K_{n,r1}, K_{n,r2}",
                corr,
                format!("|corr| <= 3 s.e. = {:.4}", 3.0 * corr_se),
                corr.abs() <= 3.0 * corr_se,
            ),
            Check::info(
                "(c) correlation predicted by the mixed limit",
                predicted,
                "from Var I / E I",
            ),
            Check::info(
                "(c) correlation of counts centred at E[K|S]",
                res_corr,
                format!("3 s.e. = {:.4}", 3.0 / (mm - 1.0).sqrt()),
            ),
        ],
    })
}

// ---------------------------------------------------------------- 3

/// The implemented lemma instances: every lemma with `ℓ ≡ 1` and
/// `ℓ = 1 + ln x`.
pub fn abelian_suite() -> Vec<AbelianCase> {
    let ells = [
        SlowlyVarying::one(),
        SlowlyVarying::LogPower {
            power: 1.0,
            offset: 1.0,
        },
    ];
    let mut cases = Vec::new();
    for ell in ells {
        cases.push(AbelianCase::new(
            Lemma::Karamata,
            ell,
            GrowthFunction::power(0.4),
            0.0,
        ));
        cases.push(AbelianCase::new(
            Lemma::KaramataRegvar,
            ell,
            GrowthFunction::power(0.3),
            -0.5,
        ));
        cases.push(AbelianCase::new(
            Lemma::LaplaceStieltjesDec,
            ell,
            GrowthFunction::power(0.35),
            0.5,
        ));
        cases.push(AbelianCase::new(
            Lemma::LaplaceStieltjesInc,
            ell,
            GrowthFunction::power(0.35),
            0.5,
        ));
    }
    cases
}

const QUADRATURE_NOISE: f64 = 1e-9;

/// Gates for one case: deviation at the last grid point, monotone
/// deviations, the closed form when `ℓ` is constant, and the tail bound.
pub fn case_checks(case: &AbelianCase) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let label = format!(
        "{} ell={} q={} index={}",
        case.lemma, case.ell, case.q, case.index
    );
    let mut devs = Vec::new();
    let mut oracle_err: f64 = 0.0;
    let mut tail: f64 = 0.0;
    for &t in &case.t_grid {
        let est = case_ratio(case, t)?;
        devs.push((est.ratio - 1.0).abs());
        tail = tail.max(est.tail_bound);
        if case.ell.is_constant() {
            let exact = closed_form_ratio(case.lemma, case.index, est.q);
            oracle_err = oracle_err.max((est.ratio / exact - 1.0).abs());
        }
    }
    let last = *devs.last().expect("nonempty grid");
    let t_max = *case.t_grid.last().expect("nonempty grid");
    // a bounded q has a limit other than 1; only the closed form applies
    if matches!(case.q, GrowthFunction::Constant(_)) {
        checks.push(Check::info(
            format!("{label}: |ratio-1| at t={t_max:e}"),
            last,
            "bounded q",
        ));
    } else {
        checks.push(Check::gate(
            format!("{label}: |ratio-1| at t={t_max:e}"),
            last,
            "< 0.02",
            last < 0.02,
        ));
        // deviations below the quadrature tolerance are indistinguishable
        let monotone = devs.windows(2).all(|w| w[1] <= w[0] + QUADRATURE_NOISE);
        checks.push(Check::gate(
            format!("{label}: |ratio-1| nonincreasing"),
            devs[0],
            format!(
                "deviations {}",
                devs.iter()
                    .map(|d| format!("{d:.3e}"))
                    .collect::<Vec<_>>()
                    .join(" > ")
            ),
            monotone,
        ));
    }
    if case.ell.is_constant() {
        checks.push(Check::gate(
            format!("{label}: closed-form error"),
            oracle_err,
            "< 1e-8",
            oracle_err < 1e-8,
        ));
    }
    checks.push(Check::gate(
        format!("{label}: tail bound"),
        tail,
        "< 1e-6",
        tail < 1e-6,
    ));
    Ok(checks)
}

pub fn abelian_ratios() -> Result<CriterionOutcome> {
    let mut checks = Vec::new();
    for case in abelian_suite() {
        checks.extend(case_checks(&case)?);
    }
    // closed forms at large q where ratios differ visibly from 1
    for (lemma, index, q) in [
        (Lemma::KaramataRegvar, 1.0, 100.0),
        (Lemma::LaplaceStieltjesDec, 0.5, 200.0),
        (Lemma::LaplaceStieltjesInc, 0.5, 200.0),
    ] {
        let case = AbelianCase::new(
            lemma,
            SlowlyVarying::one(),
            GrowthFunction::Constant(q as u64),
            index,
        );
        let est = case_ratio(&case, 1e8)?;
        let err = (est.ratio / closed_form_ratio(lemma, index, q) - 1.0).abs();
        checks.push(Check::gate(
            format!("{lemma} ell=const:1 q={q} index={index}: closed-form error"),
            err,
            "< 1e-8",
            err < 1e-8,
        ));
    }
    Ok(CriterionOutcome {
        id: 3,
        title: "Abelian lemma ratios",
        checks,
    })
}

// ---------------------------------------------------------------- 4

fn signed_error(row: &crate::stats::report::RatioRow) -> f64 {
    row.ratio / row.target - 1.0
}

fn error_summary(signed: &[f64]) -> String {
    let m = mean(signed);
    let sd = variance(signed).sqrt();
    format!("signed relative error: mean {m:+.4}, sd {sd:.4}")
}

#[derive(Debug, Clone)]
pub struct StrongLawParams {
    pub alpha: f64,
    pub t_grid: Vec<f64>,
    pub paths: usize,
    pub kappa: f64,
    pub seed: u64,
    pub threads: usize,
}

impl Default for StrongLawParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            t_grid: vec![1e5, 1e6, 1e7],
            paths: 100,
            kappa: 1e-4,
            seed: 4,
            threads: 0,
        }
    }
}

/// `K_t` and `K_{t,r}` for `r = 1, 2, 3` along one path per replication.
pub fn strong_laws(p: &StrongLawParams) -> Result<CriterionOutcome> {
    let mut cfg = ExperimentConfig::new(ModelConfig::stable(p.alpha), Allocation::Poissonized(1.0));
    if let ModelConfig::Regenerative { kappa, .. } = &mut cfg.model {
        *kappa = p.kappa;
    }
    cfg.master_seed = p.seed;
    let targets = [
        Target::LlnKn,
        Target::LlnKnr(1),
        Target::LlnKnr(2),
        Target::LlnKnr(3),
    ];
    let tols = [0.05, 0.10, 0.10, 0.10];
    let errors = with_pool(p.threads, || {
        (0..p.paths as u64)
            .into_par_iter()
            .map(|i| {
                let reps = convergence_reports(&targets, &cfg, &p.t_grid, i)?;
                Ok(reps
                    .iter()
                    .map(|r| signed_error(r.last().expect("grid")))
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<Vec<f64>>>>()
    })?;
    let need = (0.9 * p.paths as f64).ceil();
    let mut checks = Vec::new();
    let joint = errors
        .iter()
        .filter(|e| e.iter().zip(&tols).all(|(x, tol)| x.abs() <= *tol))
        .count() as f64;
    checks.push(Check::gate(
        "paths with every ratio within tolerance",
        joint,
        format!(">= {need} of {}", p.paths),
        joint >= need,
    ));
    for (j, target) in targets.iter().enumerate() {
        let hits = errors.iter().filter(|e| e[j].abs() <= tols[j]).count() as f64;
        let signed: Vec<f64> = errors.iter().map(|e| e[j]).collect();
        checks.push(Check::info(
            format!("{target}: paths within {:.0}%", tols[j] * 100.0),
            hits,
            error_summary(&signed),
        ));
    }
    Ok(CriterionOutcome {
        id: 4,
        title: "strong laws for K_t and K_{t,r}",
        checks,
    })
}

// ---------------------------------------------------------------- sweeps

/// Final-grid-point tolerance and the fraction of paths that must meet it.
pub fn target_tolerance(target: &Target) -> (f64, f64) {
    match target {
        Target::LlnKn => (0.05, 0.9),
        Target::ToZero(_) => (0.0, 0.95),
        _ => (0.10, 0.9),
    }
}

/// Convergence reports for `paths` independent paths; entry `i` holds the
/// reports of path `i` in target order.
pub fn sweep(
    targets: &[Target],
    cfg: &ExperimentConfig,
    grid: &[f64],
    paths: usize,
) -> Result<Vec<Vec<RatioReport>>> {
    with_pool(cfg.threads, || {
        (0..paths as u64)
            .into_par_iter()
            .map(|i| convergence_reports(targets, cfg, grid, i))
            .collect()
    })
}

/// One gate per target: the share of paths whose last row is within
/// [`target_tolerance`].
pub fn sweep_outcome(
    id: u8,
    title: &'static str,
    targets: &[Target],
    reports: &[Vec<RatioReport>],
) -> CriterionOutcome {
    let mut checks = Vec::new();
    let m = reports.len() as f64;
    for (j, target) in targets.iter().enumerate() {
        let (tol, frac) = target_tolerance(target);
        let errs: Vec<f64> = reports
            .iter()
            .map(|r| signed_error(r[j].last().expect("grid")))
            .collect();
        let hits = errs.iter().filter(|e| e.abs() <= tol).count() as f64;
        let flagged = reports
            .iter()
            .filter(|r| r[j].rows.iter().any(|row| row.flag.is_some()))
            .count();
        checks.push(Check::gate(
            format!("{target}: share of paths within {}%", tol * 100.0),
            hits / m,
            format!(">= {frac}"),
            hits / m >= frac,
        ));
        let mut detail = error_summary(&errs);
        if flagged > 0 {
            detail.push_str(&format!("; {flagged} paths with flagged rows"));
        }
        checks.push(Check::info(
            format!("{target}: errors"),
            mean(&errs),
            detail,
        ));
    }
    CriterionOutcome { id, title, checks }
}

// ---------------------------------------------------------------- 5

#[derive(Debug, Clone)]
pub struct ModerateLawParams {
    pub alpha: f64,
    pub n_grid: Vec<f64>,
    pub paths: usize,
    pub seed: u64,
    pub threads: usize,
}

impl Default for ModerateLawParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            n_grid: vec![1e4, 1e5, 1e6],
            paths: 100,
            seed: 5,
            threads: 0,
        }
    }
}

/// Normalized `K_{n,w(n)}` and `K_{n,≥q(n)}` against `α I_α` and `I_α`.
pub fn moderate_laws(p: &ModerateLawParams) -> Result<CriterionOutcome> {
    let mut cfg = ExperimentConfig::new(ModelConfig::stable(p.alpha), Allocation::FixedN(1));
    cfg.master_seed = p.seed;
    let targets = [Target::thm_main2(), Target::thm_main3()];
    let errors = with_pool(p.threads, || {
        (0..p.paths as u64)
            .into_par_iter()
            .map(|i| {
                let reps = convergence_reports(&targets, &cfg, &p.n_grid, i)?;
                Ok(reps
                    .iter()
                    .map(|r| signed_error(r.last().expect("grid")))
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<Vec<f64>>>>()
    })?;
    let need = (0.9 * p.paths as f64).ceil();
    let mut checks = Vec::new();
    for (j, target) in targets.iter().enumerate() {
        let hits = errors.iter().filter(|e| e[j].abs() <= 0.10).count() as f64;
        let signed: Vec<f64> = errors.iter().map(|e| e[j]).collect();
        checks.push(Check::gate(
            format!("{target}: paths within 10%"),
            hits,
            format!(">= {need} of {}", p.paths),
            hits >= need,
        ));
        let mut abs: Vec<f64> = signed.iter().map(|e| e.abs()).collect();
        abs.sort_by(f64::total_cmp);
        checks.push(Check::info(
            format!("{target}: median |relative error|"),
            abs[abs.len() / 2],
            error_summary(&signed),
        ));
    }
    Ok(CriterionOutcome {
        id: 5,
        title: "moderate parts below and above the threshold",
        checks,
    })
}

// ---------------------------------------------------------------- 6

#[derive(Debug, Clone)]
pub struct VanishingParams {
    pub alpha: f64,
    pub n: u64,
    pub theta: f64,
    pub replications: usize,
    pub seed: u64,
    pub threads: usize,
}

impl Default for VanishingParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            n: 1_000_000,
            theta: 0.45,
            replications: 200,
            seed: 6,
            threads: 0,
        }
    }
}

/// `P{K_{n,q(n)} = 0}` for `q` growing faster than the threshold.
pub fn vanishing_regime(p: &VanishingParams) -> Result<CriterionOutcome> {
    let mut cfg = ExperimentConfig::new(ModelConfig::stable(p.alpha), Allocation::FixedN(p.n));
    cfg.statistics = vec![StatisticSpec::Exactly(GrowthSpec::Fixed(
        GrowthFunction::power(p.theta),
    ))];
    cfg.replications = p.replications;
    cfg.master_seed = p.seed;
    cfg.threads = p.threads;
    let table = run_replications(&cfg)?;
    let k = table.counts(0);
    let zeros = k.iter().filter(|&&x| x == 0).count() as f64 / k.len() as f64;
    Ok(CriterionOutcome {
        id: 6,
        title: "vanishing counts above the threshold",
        checks: vec![Check::gate(
            format!("P{{{} = 0}}", table.labels[0]),
            zeros,
            ">= 0.95",
            zeros >= 0.95,
        )],
    })
}

// ---------------------------------------------------------------- 7

#[derive(Debug, Clone)]
pub struct PropertyParams {
    pub seed: u64,
    pub paths: usize,
    pub calibration_repetitions: usize,
    pub threads: usize,
}

impl Default for PropertyParams {
    fn default() -> Self {
        Self {
            seed: 7,
            paths: 200,
            calibration_repetitions: 200,
            threads: 0,
        }
    }
}

fn multinomial_pmf(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let mut ln = ln_gamma(n as f64 + 1.0);
    for (&c, &p) in counts.iter().zip(probs) {
        ln += c as f64 * p.ln() - ln_gamma(c as f64 + 1.0);
    }
    ln.exp()
}

pub fn property_suites(p: &PropertyParams) -> Result<CriterionOutcome> {
    let mut checks = Vec::new();
    let alpha = 0.5;
    let spec = SubordinatorSpec::stable(alpha)?;
    let n = 100_000u64;

    // conservation, telescoping and ρ monotonicity on simulated paths
    let per_path = with_pool(p.threads, || {
        (0..p.paths as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(p.seed, domain::PATH, i);
                let path = simulate_path(&spec, 1e-7, 1e-3 / n as f64, &mut rng)?;
                let freqs = frequencies(&path)?;
                let tele = (freqs.total_mass() - 1.0).abs();
                let mut rng = stream(p.seed, domain::ALLOCATION, i);
                let prof = count_profile(&allocate_fixed(&freqs, n, Some(0.1), &mut rng)?);
                let conserved = prof.balls() + prof.overflow == n;
                let mut monotone = true;
                let mut prev = usize::MAX;
                for e in 0..=120 {
                    let x = 10f64.powf(-(e as f64) / 20.0);
                    let r = rho(&freqs, x)?;
                    monotone &= r >= prev || prev == usize::MAX;
                    prev = r;
                }
                let sorted = freqs.sorted_view();
                for (j, &pj) in sorted.iter().enumerate().take(50) {
                    monotone &= rho(&freqs, pj)? > j;
                }
                Ok((tele, conserved, monotone))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let violations = per_path.iter().filter(|x| !x.1).count() as f64;
    checks.push(Check::gate(
        "conservation violations",
        violations,
        "= 0",
        violations == 0.0,
    ));
    let tele = per_path.iter().map(|x| x.0).fold(0.0, f64::max);
    checks.push(Check::gate(
        "max |Σp + residual - 1|",
        tele,
        "<= 1e-12",
        tele <= 1e-12,
    ));
    let bad_rho = per_path.iter().filter(|x| !x.2).count() as f64;
    checks.push(Check::gate(
        "ρ monotonicity violations",
        bad_rho,
        "= 0",
        bad_rho == 0.0,
    ));

    // Σ c_r ↑ 1
    let mut partial = 0.0;
    let mut increasing = true;
    for r in 1..=10_000u64 {
        let c = small_count_constant(alpha, r)?;
        increasing &= c > 0.0;
        partial += c;
    }
    checks.push(Check::gate(
        "Σ_{r≤1e4} c_r",
        partial,
        "increasing, within 1e-2 of 1",
        increasing && (1.0 - partial) < 1e-2 && partial <= 1.0,
    ));

    // multinomial against the exact pmf, K = 3 boxes, n = 5
    let probs = [0.5, 0.3, 0.2];
    let freqs = FixedFrequencies::new(probs.to_vec())?;
    let outcomes: Vec<[u64; 3]> = (0..=5u64)
        .flat_map(|a| (0..=5 - a).map(move |b| [a, b, 5 - a - b]))
        .collect();
    let mut observed = vec![0u64; outcomes.len()];
    let mut rng = stream(p.seed, domain::AUXILIARY, 0);
    for _ in 0..10_000 {
        let c = allocate_fixed(&freqs, 5, None, &mut rng)?;
        let key = [c.count(0), c.count(1), c.count(2)];
        observed[outcomes.iter().position(|o| *o == key).expect("outcome")] += 1;
    }
    let pmf: Vec<f64> = outcomes
        .iter()
        .map(|o| multinomial_pmf(o, &probs))
        .collect();
    let gof = chi_square_gof(&observed, &pmf)?;
    checks.push(Check::gate(
        "multinomial chi-square p (K=3, n=5)",
        gof.p_value.unwrap_or(0.0),
        "> 0.01",
        gof.passes(DEFAULT_LEVEL),
    ));

    // null calibration of both tests at nominal 0.05
    let reps = p.calibration_repetitions as u64;
    let (two_rej, disp_rej) = with_pool(p.threads, || {
        let rej = (0..reps)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(p.seed, domain::REFERENCE, i);
                let a = poisson_draws(2.0, 10_000, &mut rng);
                let b = poisson_draws(2.0, 10_000, &mut rng);
                let t = two_sample_test(&a, &b)?;
                let d = dispersion_test(&a)?;
                Ok((!t.passes(0.05) as u64, !d.passes(0.05) as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(rej.iter().fold((0, 0), |acc, x| (acc.0 + x.0, acc.1 + x.1)))
    })?;
    for (name, rej) in [("two-sample", two_rej), ("dispersion", disp_rej)] {
        let frac = rej as f64 / reps as f64;
        checks.push(Check::gate(
            format!("{name} type-I error at 0.05"),
            frac,
            "in [0.02, 0.09]",
            (0.02..=0.09).contains(&frac),
        ));
    }

    // byte-identical reruns
    let mut cfg = ExperimentConfig::new(ModelConfig::stable(alpha), Allocation::FixedN(10_000));
    cfg.statistics = vec![
        "exact:pow:0.3333333333333333".parse()?,
        StatisticSpec::Occupied,
    ];
    cfg.replications = 50;
    cfg.master_seed = p.seed;
    cfg.threads = p.threads;
    let csv = |cfg: &ExperimentConfig| -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        run_replications(cfg)?.write_csv(&mut buf)?;
        Ok(buf)
    };
    let identical = csv(&cfg)? == csv(&cfg)?;
    checks.push(Check::gate(
        "fixed-seed reruns byte-identical",
        identical as u8 as f64,
        "= 1",
        identical,
    ));

    Ok(CriterionOutcome {
        id: 7,
        title: "property suites",
        checks,
    })
}
