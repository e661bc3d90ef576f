use std::path::PathBuf;

use serde_json::{json, Value};

use regcomp::abelian::{abelian_report, write_report_csv, AbelianCase, AbelianRow, Lemma};
use regcomp::numeric::ln_gamma;
use regcomp::regvar::{naive_threshold, solve_threshold, GrowthFunction, SlowlyVarying};
use regcomp::stats::config::{Allocation, ExperimentConfig, ModelConfig};
use regcomp::stats::experiments::{
    abelian_ratios, abelian_suite, case_checks, karlin_poisson_limit, mixed_poisson_limit, sweep,
    sweep_outcome, CriterionOutcome, KarlinPoissonParams, MixedPoissonParams,
};
use regcomp::stats::hypothesis::dispersion_test;
use regcomp::stats::replicate::run_replications;
use regcomp::stats::report::{RatioReport, Target};

use crate::args::{layered_config, model_kind, read_config_file, Command, Flags, ModelKind};
use crate::output::Artifacts;
use crate::{print_criterion, CliError, Outcome};

const DEFAULT_OUT_DIR: &str = "regcomp-out";

pub fn out_dir(cmd: Command, flags: &Flags) -> Option<PathBuf> {
    match (&flags.out_dir, cmd) {
        (Some(d), _) => Some(d.clone()),
        (None, Command::Threshold) => None,
        (None, _) => Some(PathBuf::from(DEFAULT_OUT_DIR)),
    }
}

pub fn run(
    cmd: Command,
    flags: &Flags,
    art: &mut Artifacts,
    out: &mut Outcome,
) -> Result<(), CliError> {
    match cmd {
        Command::Threshold => threshold(flags, art),
        Command::Simulate => simulate(flags, art, out),
        Command::VerifyAbelian => verify_abelian(flags, art, out),
        Command::VerifyPoissonLimit => verify_poisson_limit(flags, art, out),
        Command::VerifyLln => verify_lln(flags, art, out),
        Command::VerifyTail => verify_tail(flags, art, out),
    }
}

fn stable_ell(alpha: f64) -> SlowlyVarying {
    SlowlyVarying::Constant((-ln_gamma(1.0 - alpha)).exp())
}

fn parse_ell(s: &str) -> Result<SlowlyVarying, CliError> {
    s.parse()
        .map_err(|e: regcomp::Error| CliError::Invalid(format!("--ell: {e}")))
}

fn parse_growth(s: &str) -> Result<GrowthFunction, CliError> {
    s.parse()
        .map_err(|e: regcomp::Error| CliError::Invalid(format!("--q: {e}")))
}

fn json_bytes(v: &impl serde::Serialize) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn record_config(
    cfg: &ExperimentConfig,
    art: &mut Artifacts,
    out: &mut Outcome,
) -> Result<(), CliError> {
    let echo = cfg.to_json();
    art.write("config.json", &json_bytes(&echo))?;
    out.config = Some(echo);
    out.seed = Some(cfg.master_seed);
    Ok(())
}

fn record_criteria(
    criteria: Vec<CriterionOutcome>,
    art: &mut Artifacts,
    out: &mut Outcome,
) -> Result<(), CliError> {
    for c in &criteria {
        print_criterion(c);
    }
    art.write("checks.json", &json_bytes(&criteria))?;
    out.criteria = criteria;
    Ok(())
}

fn threshold(flags: &Flags, art: &mut Artifacts) -> Result<(), CliError> {
    let alpha = flags
        .alpha
        .ok_or_else(|| CliError::Invalid("threshold: --alpha is required".into()))?;
    let t = flags
        .t
        .ok_or_else(|| CliError::Invalid("threshold: --t is required".into()))?;
    let ell = match &flags.ell {
        Some(s) => parse_ell(s)?,
        None if alpha > 0.0 && alpha < 1.0 => stable_ell(alpha),
        None => SlowlyVarying::one(),
    };
    let r = solve_threshold(alpha, &ell, t)?;
    let naive = naive_threshold(alpha, &ell, t);
    println!("r = {r:.6}");
    println!("floor = {}", r.floor() as u64);
    println!("naive = {naive:.6}");
    art.write(
        "threshold.json",
        &json_bytes(&json!({"alpha": alpha, "ell": ell.to_string(), "t": t, "r": r, "floor": r.floor() as u64, "naive": naive})),
    )?;
    Ok(())
}

fn simulate(flags: &Flags, art: &mut Artifacts, out: &mut Outcome) -> Result<(), CliError> {
    let file = read_config_file(flags)?;
    let has_model = flags.model.is_some()
        || flags.alpha.is_some()
        || flags.beta.is_some()
        || file.as_ref().is_some_and(|f| f.get("model").is_some());
    let kind = has_model.then(|| model_kind(flags, file.as_ref(), ModelKind::Regenerative));
    let cfg = layered_config(
        json!({"statistics": ["r-star", "occupied"]}),
        file.as_ref(),
        flags,
        kind,
    )?;
    cfg.validate()?;
    record_config(&cfg, art, out)?;
    let table = run_replications(&cfg)?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    art.write("replications.csv", &csv)?;

    let mut reports = Vec::new();
    for (j, label) in table.labels.iter().enumerate() {
        let counts = table.counts(j);
        let mean = counts.iter().sum::<u64>() as f64 / counts.len().max(1) as f64;
        match dispersion_test(&counts) {
            Ok(rep) => {
                println!(
                    "{label}: mean {mean:.4}, dispersion p = {}",
                    rep.p_value.map_or("n/a".to_string(), |p| format!("{p:.4}"))
                );
                reports.push(json!({"statistic": label, "mean": mean, "dispersion": rep}));
            }
            Err(e) => {
                println!("{label}: mean {mean:.4} ({e})");
                reports.push(json!({"statistic": label, "mean": mean, "dispersion": null}));
            }
        }
    }
    art.write("reports.json", &json_bytes(&reports))?;
    if let Some(dir) = art.dir() {
        println!(
            "wrote {} replications to {}",
            table.rows.len(),
            dir.display()
        );
    }
    Ok(())
}

fn abelian_default(lemma: Lemma, flags: &Flags) -> (GrowthFunction, f64) {
    let base = abelian_suite()
        .into_iter()
        .find(|c| c.lemma == lemma)
        .expect("every lemma in the suite");
    let index = match lemma {
        Lemma::Karamata => 0.0,
        Lemma::KaramataRegvar => flags.beta.unwrap_or(base.index),
        Lemma::LaplaceStieltjesDec | Lemma::LaplaceStieltjesInc => {
            flags.gamma.unwrap_or(base.index)
        }
    };
    (base.q, index)
}

fn verify_abelian(flags: &Flags, art: &mut Artifacts, out: &mut Outcome) -> Result<(), CliError> {
    let mut rows: Vec<AbelianRow> = Vec::new();
    let criterion = match &flags.lemma {
        Some(name) => {
            let lemma: Lemma = name.parse()?;
            let (default_q, index) = abelian_default(lemma, flags);
            let q = match &flags.q {
                Some(s) => parse_growth(s)?,
                None => default_q,
            };
            let ell = match &flags.ell {
                Some(s) => parse_ell(s)?,
                None => SlowlyVarying::one(),
            };
            let mut case = AbelianCase::new(lemma, ell, q, index);
            if !flags.grid.is_empty() {
                case.t_grid = flags.grid.clone();
            }
            rows.extend(abelian_report(&case)?);
            CriterionOutcome {
                id: 3,
                title: "Abelian lemma ratios",
                checks: case_checks(&case)?,
            }
        }
        None => {
            for case in abelian_suite() {
                rows.extend(abelian_report(&case)?);
            }
            abelian_ratios()?
        }
    };
    let mut csv = Vec::new();
    write_report_csv(&rows, &mut csv)?;
    art.write("abelian.csv", &csv)?;
    record_criteria(vec![criterion], art, out)
}

fn verify_poisson_limit(
    flags: &Flags,
    art: &mut Artifacts,
    out: &mut Outcome,
) -> Result<(), CliError> {
    let file = read_config_file(flags)?;
    let kind = model_kind(flags, file.as_ref(), ModelKind::Regenerative);
    let criterion = match kind {
        ModelKind::Powerlaw => {
            let d = KarlinPoissonParams::default();
            let defaults = json!({
                "model": {"kind": "power-law", "beta": d.beta},
                "allocation": {"kind": "poissonized", "t": d.t},
                "replications": d.replications,
                "master_seed": d.seed,
            });
            let cfg = layered_config(defaults, file.as_ref(), flags, Some(kind))?;
            record_config(&cfg, art, out)?;
            let (ModelConfig::PowerLaw { beta, .. }, Allocation::Poissonized(t)) =
                (&cfg.model, cfg.allocation)
            else {
                return Err(CliError::Invalid(
                    "verify-poisson-limit: the power-law check needs a Poissonized allocation"
                        .into(),
                ));
            };
            karlin_poisson_limit(&KarlinPoissonParams {
                beta: *beta,
                t,
                replications: cfg.replications,
                seed: cfg.master_seed,
                threads: cfg.threads,
            })?
        }
        ModelKind::Regenerative => {
            let d = MixedPoissonParams::default();
            let defaults = json!({
                "model": {"kind": "regenerative", "alpha": d.alpha},
                "allocation": {"kind": "fixed-n", "n": d.n},
                "replications": d.replications,
                "master_seed": d.seed,
            });
            let cfg = layered_config(defaults, file.as_ref(), flags, Some(kind))?;
            record_config(&cfg, art, out)?;
            let (ModelConfig::Regenerative { alpha, ell, .. }, Allocation::FixedN(n)) =
                (&cfg.model, cfg.allocation)
            else {
                return Err(CliError::Invalid(
                    "verify-poisson-limit: the mixed Poisson check needs a fixed-n allocation"
                        .into(),
                ));
            };
            let stable = match (ell, stable_ell(*alpha)) {
                (SlowlyVarying::Constant(c), SlowlyVarying::Constant(s)) => {
                    (c / s - 1.0).abs() < 1e-6
                }
                _ => false,
            };
            if !stable {
                return Err(CliError::Invalid(format!(
                    "verify-poisson-limit: the mixed Poisson reference needs the stable preset ell = {}, got {ell}",
                    stable_ell(*alpha)
                )));
            }
            let theta = match &flags.q {
                None => d.theta,
                Some(s) => match parse_growth(s)? {
                    GrowthFunction::Power { theta, scale } if scale == 1.0 => theta,
                    g => return Err(CliError::Invalid(format!("--q: expected pow:θ, got {g}"))),
                },
            };
            mixed_poisson_limit(&MixedPoissonParams {
                alpha: *alpha,
                n,
                theta,
                replications: cfg.replications,
                seed: cfg.master_seed,
                threads: cfg.threads,
            })?
        }
    };
    record_criteria(vec![criterion], art, out)
}

fn parse_targets(flags: &Flags, defaults: Vec<Target>) -> Result<Vec<Target>, CliError> {
    if flags.target.is_empty() {
        return Ok(defaults);
    }
    flags
        .target
        .iter()
        .map(|s| {
            s.parse()
                .map_err(|e: regcomp::Error| CliError::Invalid(format!("--target: {e}")))
        })
        .collect()
}

fn grid_for(
    flags: &Flags,
    cfg: &ExperimentConfig,
    explicit_scale: bool,
    default: &[f64],
) -> Vec<f64> {
    if !flags.grid.is_empty() {
        flags.grid.clone()
    } else if explicit_scale {
        let s = cfg.allocation.scale();
        vec![s / 100.0, s / 10.0, s]
    } else {
        default.to_vec()
    }
}

fn ratios_csv(reports: &[Vec<RatioReport>], cfg: &ExperimentConfig) -> Result<Vec<u8>, CliError> {
    let mut buf = format!("# config={}\n", cfg.to_json()).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record([
            "path",
            "target",
            "scale",
            "r",
            "statistic",
            "ratio",
            "limit",
            "i_alpha",
            "flag",
        ])
        .map_err(|e| CliError::Runtime(e.to_string()))?;
        for path in reports {
            for rep in path {
                for row in &rep.rows {
                    w.write_record([
                        rep.path_index.to_string(),
                        rep.target.to_string(),
                        row.scale.to_string(),
                        row.r.map_or(String::new(), |r| r.to_string()),
                        row.statistic.to_string(),
                        format!("{:.10}", row.ratio),
                        format!("{:.10}", row.target),
                        format!("{:.10}", rep.i_alpha),
                        row.flag.clone().unwrap_or_default(),
                    ])
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
                }
            }
        }
        w.flush()?;
    }
    Ok(buf)
}

struct SweepSetup {
    id: u8,
    title: &'static str,
    targets: Vec<Target>,
    allocation: Value,
    grid: Vec<f64>,
    kappa: Option<f64>,
    seed: u64,
}

fn run_sweep(
    setup: SweepSetup,
    flags: &Flags,
    art: &mut Artifacts,
    out: &mut Outcome,
) -> Result<(), CliError> {
    let file = read_config_file(flags)?;
    if model_kind(flags, file.as_ref(), ModelKind::Regenerative) != ModelKind::Regenerative {
        return Err(CliError::Invalid(
            "convergence reports need a regenerative model".into(),
        ));
    }
    let mut model = json!({"kind": "regenerative", "alpha": 0.5});
    if let Some(k) = setup.kappa {
        model["kappa"] = json!(k);
    }
    let defaults = json!({"model": model, "allocation": setup.allocation, "replications": 100, "master_seed": setup.seed});
    let cfg = layered_config(
        defaults,
        file.as_ref(),
        flags,
        Some(ModelKind::Regenerative),
    )?;
    cfg.validate()?;
    record_config(&cfg, art, out)?;
    let explicit = flags.n.is_some()
        || flags.t.is_some()
        || flags.poissonized.is_some()
        || file.as_ref().is_some_and(|f| f.get("allocation").is_some());
    let grid = grid_for(flags, &cfg, explicit, &setup.grid);
    let targets = parse_targets(flags, setup.targets)?;
    let reports = sweep(&targets, &cfg, &grid, cfg.replications)?;
    art.write("ratios.csv", &ratios_csv(&reports, &cfg)?)?;
    let criterion = sweep_outcome(setup.id, setup.title, &targets, &reports);
    record_criteria(vec![criterion], art, out)
}

fn verify_lln(flags: &Flags, art: &mut Artifacts, out: &mut Outcome) -> Result<(), CliError> {
    let setup = SweepSetup {
        id: 4,
        title: "strong laws for K_t, K_{t,r} and the counting function",
        targets: vec![
            Target::LlnKn,
            Target::LlnKnr(1),
            Target::LlnKnr(2),
            Target::LlnKnr(3),
            Target::RhoPathwise,
        ],
        allocation: json!({"kind": "poissonized", "t": 1e7}),
        grid: vec![1e5, 1e6, 1e7],
        kappa: Some(1e-4),
        seed: 4,
    };
    run_sweep(setup, flags, art, out)
}

fn verify_tail(flags: &Flags, art: &mut Artifacts, out: &mut Outcome) -> Result<(), CliError> {
    let setup = SweepSetup {
        id: 5,
        title: "counts below and above the threshold",
        targets: vec![Target::thm_main2(), Target::thm_main3(), Target::to_zero()],
        allocation: json!({"kind": "fixed-n", "n": 1_000_000}),
        grid: vec![1e4, 1e5, 1e6],
        kappa: None,
        seed: 5,
    };
    run_sweep(setup, flags, art, out)
}
