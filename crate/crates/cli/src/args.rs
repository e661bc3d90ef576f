use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use regcomp::stats::config::ExperimentConfig;

use crate::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "regcomp",
    version,
    about = "Regenerative compositions and Karlin occupancy: simulation and verification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Solve α t^α ℓ(t/r) / r^{α+1} = 1 for the moderate-part threshold r(t)
    Threshold,
    /// Run replications of a configured experiment and record counts
    Simulate,
    /// Quadrature ratios for the Abelian lemmas
    VerifyAbelian,
    /// Poisson limit at the threshold (power law) or mixed Poisson limit (regenerative)
    VerifyPoissonLimit,
    /// Strong laws for K_t, K_{t,r} and the counting function along single paths
    VerifyLln,
    /// Counts below and above the threshold: K_{n,w}, K_{n,≥q} and vanishing K_{n,q}
    VerifyTail,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Threshold => "threshold",
            Command::Simulate => "simulate",
            Command::VerifyAbelian => "verify-abelian",
            Command::VerifyPoissonLimit => "verify-poisson-limit",
            Command::VerifyLln => "verify-lln",
            Command::VerifyTail => "verify-tail",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Regenerative,
    #[value(alias = "power-law")]
    Powerlaw,
}

impl ModelKind {
    pub fn json_kind(&self) -> &'static str {
        match self {
            ModelKind::Regenerative => "regenerative",
            ModelKind::Powerlaw => "power-law",
        }
    }
}

fn parse_count(s: &str) -> Result<u64, String> {
    let x: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 {
        Ok(x as u64)
    } else {
        Err(format!("'{s}' is not a nonnegative integer"))
    }
}

#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Power-law exponent, or the index of the regularly varying Karamata case
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Index of the Laplace–Stieltjes cases
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// const:c | logpow:p[,offset]
    #[arg(long, global = true)]
    pub ell: Option<String>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub kappa: Option<f64>,
    #[arg(long = "stop-tol", global = true)]
    pub stop_tol: Option<f64>,
    /// Fixed number of balls
    #[arg(long, global = true, value_parser = parse_count)]
    pub n: Option<u64>,
    /// Time parameter; Poissonized intensity for the simulation commands
    #[arg(long, global = true)]
    pub t: Option<f64>,
    /// Poissonized allocation with intensity t
    #[arg(long, global = true, value_name = "T")]
    pub poissonized: Option<f64>,
    #[arg(long, global = true, value_parser = parse_count)]
    pub replications: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads, 0 = all cores
    #[arg(long, global = true)]
    pub threads: Option<u64>,
    /// JSON experiment configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long = "out-dir", global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true, overrides_with = "no_strict")]
    pub strict: bool,
    #[arg(long = "no-strict", global = true, overrides_with = "strict")]
    pub no_strict: bool,
    #[arg(long, global = true)]
    pub model: Option<ModelKind>,
    /// Statistic to record (repeatable): exact:<growth>, at-least:<growth>, occupied, r-star
    #[arg(long, global = true)]
    pub record: Vec<String>,
    /// karamata | karamata-regvar | laplace-stieltjes-dec | laplace-stieltjes-inc
    #[arg(long, global = true)]
    pub lemma: Option<String>,
    /// Growth function pow:θ[,scale] | powlog:θ,p[,scale] | const:k
    #[arg(long, global = true)]
    pub q: Option<String>,
    /// Convergence target (repeatable): thm-main2, thm-main3, lln-kn, lln-knr[:r], rho-pathwise, to-zero
    #[arg(long, global = true)]
    pub target: Vec<String>,
    /// Comma-separated sizes for convergence reports
    #[arg(long, global = true, value_delimiter = ',')]
    pub grid: Vec<f64>,
}

/// Deep merge; an object whose `kind` changes is replaced wholesale.
pub fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            let kind_changed =
                matches!((b.get("kind"), o.get("kind")), (Some(x), Some(y)) if x != y);
            if kind_changed {
                *b = o.clone();
                return;
            }
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

pub fn read_config_file(flags: &Flags) -> Result<Option<Value>, CliError> {
    let Some(path) = &flags.config else {
        return Ok(None);
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Invalid(format!("{} is not valid JSON: {e}", path.display())))?;
    if !v.is_object() {
        return Err(CliError::Invalid(format!(
            "{}: expected a JSON object",
            path.display()
        )));
    }
    Ok(Some(v))
}

/// Model kind in force after the file and the flags are applied.
pub fn model_kind(flags: &Flags, file: Option<&Value>, fallback: ModelKind) -> ModelKind {
    if let Some(k) = flags.model {
        return k;
    }
    match file
        .and_then(|f| f.pointer("/model/kind"))
        .and_then(Value::as_str)
    {
        Some("power-law") => return ModelKind::Powerlaw,
        Some("regenerative") => return ModelKind::Regenerative,
        _ => {}
    }
    if flags.alpha.is_some() {
        ModelKind::Regenerative
    } else if flags.beta.is_some() {
        ModelKind::Powerlaw
    } else {
        fallback
    }
}

/// Flag values as a config fragment.
fn flag_overlay(flags: &Flags, kind: Option<ModelKind>) -> Result<Value, CliError> {
    let mut top = Map::new();
    let mut model = Map::new();
    if let Some(k) = kind {
        model.insert("kind".into(), json!(k.json_kind()));
        match k {
            ModelKind::Regenerative => {
                for (key, val) in [
                    ("alpha", flags.alpha),
                    ("kappa", flags.kappa),
                    ("epsilon", flags.epsilon),
                    ("stop_tol", flags.stop_tol),
                ] {
                    if let Some(x) = val {
                        model.insert(key.into(), json!(x));
                    }
                }
                if let Some(e) = &flags.ell {
                    model.insert("ell".into(), json!(e));
                }
            }
            ModelKind::Powerlaw => {
                if let Some(b) = flags.beta {
                    model.insert("beta".into(), json!(b));
                }
                if let Some(s) = flags.stop_tol {
                    model.insert("tail_tol".into(), json!(s));
                }
            }
        }
        top.insert("model".into(), Value::Object(model));
    }
    let t = flags.poissonized.or(flags.t);
    match (flags.n, t) {
        (Some(_), Some(_)) => {
            return Err(CliError::Invalid(
                "allocation: give either --n or --poissonized/--t, not both".into(),
            ));
        }
        (Some(n), None) => {
            top.insert("allocation".into(), json!({"kind": "fixed-n", "n": n}));
        }
        (None, Some(t)) => {
            top.insert("allocation".into(), json!({"kind": "poissonized", "t": t}));
        }
        (None, None) => {}
    }
    if !flags.record.is_empty() {
        top.insert("statistics".into(), json!(flags.record));
    }
    if let Some(r) = flags.replications {
        top.insert("replications".into(), json!(r));
    }
    if let Some(s) = flags.seed {
        top.insert("master_seed".into(), json!(s));
    }
    if let Some(t) = flags.threads {
        top.insert("threads".into(), json!(t));
    }
    if flags.strict {
        top.insert("strict".into(), json!(true));
    }
    if flags.no_strict {
        top.insert("strict".into(), json!(false));
    }
    Ok(Value::Object(top))
}

/// Precedence: flag > config file > `defaults`.
pub fn layered_config(
    defaults: Value,
    file: Option<&Value>,
    flags: &Flags,
    kind: Option<ModelKind>,
) -> Result<ExperimentConfig, CliError> {
    let mut v = defaults;
    if let Some(f) = file {
        merge(&mut v, f);
    }
    let overlay = flag_overlay(flags, kind)?;
    merge(&mut v, &overlay);
    Ok(ExperimentConfig::from_json(&v)?)
}
