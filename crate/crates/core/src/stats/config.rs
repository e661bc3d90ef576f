//! Experiment configuration: JSON schema, validation with a complete list of
//! offending fields, defaults, and resolution into concrete simulation inputs.

use std::fmt;
use std::str::FromStr;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::numeric::ln_gamma;
use crate::occupancy::{power_law_frequencies, AllocationMode, PowerLawFrequencies};
use crate::regvar::{GrowthFunction, RegVarTail, SlowlyVarying, TailRole};
use crate::subordinator::SubordinatorSpec;

pub const DEFAULT_KAPPA: f64 = 1e-2;
pub const DEFAULT_OVERFLOW_BUDGET: f64 = 0.1;
pub const DEFAULT_REPLICATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    /// Subordinator with Lévy tail `y^{-α} ℓ(1/y)`. Missing `epsilon` and
    /// `stop_tol` are derived from `kappa` and the allocation scale.
    Regenerative {
        alpha: f64,
        ell: SlowlyVarying,
        kappa: f64,
        epsilon: Option<f64>,
        stop_tol: Option<f64>,
    },
    PowerLaw {
        beta: f64,
        tail_tol: Option<f64>,
    },
}

impl ModelConfig {
    /// The stable preset, `ℓ ≡ 1/Γ(1-α)`.
    pub fn stable(alpha: f64) -> Self {
        ModelConfig::Regenerative {
            alpha,
            ell: SlowlyVarying::Constant((-ln_gamma(1.0 - alpha)).exp()),
            kappa: DEFAULT_KAPPA,
            epsilon: None,
            stop_tol: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Allocation {
    FixedN(u64),
    Poissonized(f64),
}

impl Allocation {
    pub fn scale(&self) -> f64 {
        match *self {
            Allocation::FixedN(n) => n as f64,
            Allocation::Poissonized(t) => t,
        }
    }

    pub fn mode(&self) -> AllocationMode {
        match *self {
            Allocation::FixedN(n) => AllocationMode::FixedN(n),
            Allocation::Poissonized(t) => AllocationMode::Poissonized(t),
        }
    }
}

/// Growth index of a recorded count: an explicit growth function or a
/// multiple of the model's threshold `r(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowthSpec {
    Fixed(GrowthFunction),
    Threshold { scale: f64 },
}

impl fmt::Display for GrowthSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GrowthSpec::Fixed(g) => write!(f, "{g}"),
            GrowthSpec::Threshold { scale } if *scale == 1.0 => write!(f, "threshold"),
            GrowthSpec::Threshold { scale } => write!(f, "threshold:{scale}"),
        }
    }
}

impl FromStr for GrowthSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "threshold" {
            return Ok(GrowthSpec::Threshold { scale: 1.0 });
        }
        if let Some(rest) = s.strip_prefix("threshold:") {
            let scale: f64 = rest
                .parse()
                .map_err(|_| Error::Domain(format!("bad threshold scale in '{s}'")))?;
            if !(scale > 0.0) {
                return Err(Error::Domain(format!(
                    "threshold scale must be positive in '{s}'"
                )));
            }
            return Ok(GrowthSpec::Threshold { scale });
        }
        s.parse().map(GrowthSpec::Fixed)
    }
}

/// A count to record per replication: `K_{n,r}`, `K_{n,≥r}` or `K_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StatisticSpec {
    Exactly(GrowthSpec),
    AtLeast(GrowthSpec),
    Occupied,
}

impl fmt::Display for StatisticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatisticSpec::Exactly(g) => write!(f, "exact:{g}"),
            StatisticSpec::AtLeast(g) => write!(f, "at-least:{g}"),
            StatisticSpec::Occupied => write!(f, "occupied"),
        }
    }
}

/// `exact:<growth>`, `at-least:<growth>`, `occupied`, or `r-star` as a
/// shorthand for `exact:threshold`.
impl FromStr for StatisticSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "occupied" => return Ok(StatisticSpec::Occupied),
            "r-star" => return Ok(StatisticSpec::Exactly(GrowthSpec::Threshold { scale: 1.0 })),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("exact:") {
            return rest.parse().map(StatisticSpec::Exactly);
        }
        if let Some(rest) = s.strip_prefix("at-least:") {
            return rest.parse().map(StatisticSpec::AtLeast);
        }
        Err(Error::Domain(format!(
            "cannot parse statistic '{s}' (want exact:<growth>, at-least:<growth>, occupied or r-star)"
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub allocation: Allocation,
    pub statistics: Vec<StatisticSpec>,
    pub replications: usize,
    pub master_seed: u64,
    pub strict: bool,
    pub overflow_budget: f64,
    /// 0 = let rayon decide
    pub threads: usize,
}

impl ExperimentConfig {
    pub fn new(model: ModelConfig, allocation: Allocation) -> Self {
        Self {
            model,
            allocation,
            statistics: Vec::new(),
            replications: DEFAULT_REPLICATIONS,
            master_seed: 0,
            strict: true,
            overflow_budget: DEFAULT_OVERFLOW_BUDGET,
            threads: 0,
        }
    }

    pub fn to_json(&self) -> Value {
        let model = match &self.model {
            ModelConfig::Regenerative {
                alpha,
                ell,
                kappa,
                epsilon,
                stop_tol,
            } => json!({
                "kind": "regenerative",
                "alpha": alpha,
                "ell": ell.to_string(),
                "kappa": kappa,
                "epsilon": epsilon,
                "stop_tol": stop_tol,
            }),
            ModelConfig::PowerLaw { beta, tail_tol } => json!({
                "kind": "power-law",
                "beta": beta,
                "tail_tol": tail_tol,
            }),
        };
        let allocation = match self.allocation {
            Allocation::FixedN(n) => json!({"kind": "fixed-n", "n": n}),
            Allocation::Poissonized(t) => json!({"kind": "poissonized", "t": t}),
        };
        json!({
            "model": model,
            "allocation": allocation,
            "statistics": self.statistics.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            "replications": self.replications,
            "master_seed": self.master_seed,
            "strict": self.strict,
            "overflow_budget": self.overflow_budget,
            "threads": self.threads,
        })
    }

    /// Parses and validates a JSON object, reporting every problem at once.
    pub fn from_json(value: &Value) -> Result<Self> {
        let mut errs = Vec::new();
        let Some(obj) = value.as_object() else {
            return Err(Error::Config(vec!["config: expected a JSON object".into()]));
        };
        check_keys(
            obj,
            "",
            &[
                "model",
                "allocation",
                "statistics",
                "replications",
                "master_seed",
                "strict",
                "overflow_budget",
                "threads",
            ],
            &mut errs,
        );
        let model = match obj.get("model") {
            None | Some(Value::Null) => {
                errs.push("model: required".into());
                None
            }
            Some(v) => parse_model(v, &mut errs),
        };
        let allocation = match obj.get("allocation") {
            None | Some(Value::Null) => {
                errs.push("allocation: required".into());
                None
            }
            Some(v) => parse_allocation(v, &mut errs),
        };
        let mut statistics = Vec::new();
        match obj.get("statistics") {
            None | Some(Value::Null) => {}
            Some(Value::Array(items)) => {
                for (i, item) in items.iter().enumerate() {
                    match item.as_str().map(str::parse::<StatisticSpec>) {
                        Some(Ok(s)) => statistics.push(s),
                        Some(Err(e)) => errs.push(format!("statistics[{i}]: {e}")),
                        None => errs.push(format!("statistics[{i}]: expected a string")),
                    }
                }
            }
            Some(_) => errs.push("statistics: expected an array of strings".into()),
        }
        let replications = get_u64(obj, "replications", "replications", &mut errs)
            .unwrap_or(DEFAULT_REPLICATIONS as u64);
        if replications == 0 {
            errs.push("replications: must be at least 1".into());
        }
        let master_seed = get_u64(obj, "master_seed", "master_seed", &mut errs).unwrap_or(0);
        let strict = match obj.get("strict") {
            None | Some(Value::Null) => true,
            Some(Value::Bool(b)) => *b,
            Some(_) => {
                errs.push("strict: expected a boolean".into());
                true
            }
        };
        let overflow_budget = get_f64(obj, "overflow_budget", "overflow_budget", &mut errs)
            .unwrap_or(DEFAULT_OVERFLOW_BUDGET);
        if !(overflow_budget > 0.0) {
            errs.push("overflow_budget: must be positive".into());
        }
        let threads = get_u64(obj, "threads", "threads", &mut errs).unwrap_or(0);
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        let cfg = ExperimentConfig {
            model: model.expect("checked"),
            allocation: allocation.expect("checked"),
            statistics,
            replications: replications as usize,
            master_seed,
            strict,
            overflow_budget,
            threads: threads as usize,
        };
        Ok(cfg)
    }

    /// Checks everything `from_json` checks on an already-built config
    /// (used after command-line overrides).
    pub fn validate(&self) -> Result<()> {
        Self::from_json(&self.to_json()).map(|_| ())
    }

    pub fn resolve(&self) -> Result<ResolvedExperiment> {
        self.validate()?;
        let scale = self.allocation.scale();
        let (threshold_alpha, threshold_ell, plan) = match self.model {
            ModelConfig::Regenerative { alpha, ell, .. } => (alpha, ell, None),
            ModelConfig::PowerLaw { beta, .. } => {
                let probe = PowerLawFrequencies::with_boxes(beta, 1)?;
                let tail = probe.counting_tail();
                (tail.alpha, tail.ell, Some(probe))
            }
        };
        let resolve_growth = |g: &GrowthSpec| -> Result<u64> {
            match g {
                GrowthSpec::Fixed(g) => g.eval(scale),
                GrowthSpec::Threshold { scale: s } => GrowthFunction::Threshold {
                    alpha: threshold_alpha,
                    ell: threshold_ell,
                    scale: *s,
                }
                .eval(scale),
            }
        };
        let mut stats = Vec::new();
        let mut errs = Vec::new();
        for (i, spec) in self.statistics.iter().enumerate() {
            let r = match spec {
                StatisticSpec::Exactly(g) | StatisticSpec::AtLeast(g) => match resolve_growth(g) {
                    Ok(r) => r,
                    Err(e) => {
                        errs.push(format!("statistics[{i}]: {e}"));
                        continue;
                    }
                },
                StatisticSpec::Occupied => 1,
            };
            let label = match spec {
                StatisticSpec::Exactly(_) => format!("K_{r}"),
                StatisticSpec::AtLeast(_) => format!("K_ge_{r}"),
                StatisticSpec::Occupied => "K".to_string(),
            };
            stats.push(ResolvedStatistic {
                spec: *spec,
                r,
                label,
            });
        }
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        let min_r = match stats.iter().map(|s| s.r).min() {
            Some(r) => r,
            None => GrowthFunction::threshold(threshold_alpha, threshold_ell)
                .eval(scale)
                .unwrap_or(1),
        };
        let model = match self.model {
            ModelConfig::Regenerative {
                alpha,
                ell,
                kappa,
                epsilon,
                stop_tol,
            } => {
                let spec = SubordinatorSpec::new(RegVarTail::new(alpha, ell, TailRole::LevyTail)?)?;
                let bound = kappa * min_r as f64 / scale;
                let epsilon = match epsilon {
                    None => bound,
                    Some(e) if e > bound * (1.0 + 1e-12) => {
                        let msg = format!(
                            "model.epsilon: {e} exceeds kappa * r / scale = {bound} (kappa = {kappa}, r = {min_r})"
                        );
                        if self.strict {
                            return Err(Error::Config(vec![msg]));
                        }
                        log::warn!("{msg}");
                        e
                    }
                    Some(e) => e,
                };
                let stop_tol = stop_tol.unwrap_or(1e-3 / scale);
                if let Allocation::FixedN(n) = self.allocation {
                    let expected = stop_tol * n as f64;
                    if self.strict && expected > self.overflow_budget {
                        return Err(Error::Config(vec![format!(
                            "model.stop_tol: expected overflow {expected} exceeds overflow_budget {}",
                            self.overflow_budget
                        )]));
                    }
                }
                ResolvedModel::Regenerative {
                    spec,
                    epsilon,
                    stop_tol,
                }
            }
            ModelConfig::PowerLaw { beta, tail_tol } => {
                let probe = plan.expect("power-law probe");
                let freqs = match tail_tol {
                    Some(tol) => power_law_frequencies(beta, tol)?,
                    None => match self.allocation {
                        Allocation::FixedN(n) => {
                            power_law_frequencies(beta, 0.5 * self.overflow_budget / n as f64)?
                        }
                        Allocation::Poissonized(t) => {
                            let k = stats
                                .iter()
                                .map(|s| poissonized_boxes_needed(&probe, t, s.r))
                                .max()
                                .unwrap_or_else(|| poissonized_boxes_needed(&probe, t, min_r));
                            PowerLawFrequencies::with_boxes(beta, k)?
                        }
                    },
                };
                if let Allocation::FixedN(n) = self.allocation {
                    let expected = freqs.residual * n as f64;
                    if self.strict && expected > self.overflow_budget {
                        return Err(Error::Config(vec![format!(
                            "model.tail_tol: expected overflow {expected} exceeds overflow_budget {}",
                            self.overflow_budget
                        )]));
                    }
                }
                ResolvedModel::PowerLaw(freqs)
            }
        };
        Ok(ResolvedExperiment {
            model,
            allocation: self.allocation,
            statistics: stats,
            threshold_alpha,
            threshold_ell,
        })
    }
}

/// Boxes needed so that the dropped power-law boxes change `E K_{t,r}` by
/// less than `1e-4` (absolute, or relative to `ρ*(1/t)` when `r = 1`),
/// using `Σ_{j>K} (t p_j)^r / r! ≤ (t/Z)^r K^{1-βr} / ((βr - 1) r!)`.
fn poissonized_boxes_needed(probe: &PowerLawFrequencies, t: f64, r: u64) -> usize {
    let beta = probe.beta;
    let r = r.max(1) as f64;
    let tol = if r == 1.0 {
        1e-4 * (t / probe.z).powf(1.0 / beta)
    } else {
        1e-4
    };
    let e = beta * r - 1.0;
    let ln_k = (r * (t / probe.z).ln() - ln_gamma(r + 1.0) - e.ln() - tol.ln()) / e;
    let k = ln_k.exp().ceil().max(16.0);
    // never fewer than the boxes with mean count above r
    let bulk = (t / (probe.z * r)).powf(1.0 / beta).ceil();
    k.max(2.0 * bulk).min(1e9) as usize
}

#[derive(Debug, Clone)]
pub enum ResolvedModel {
    Regenerative {
        spec: SubordinatorSpec,
        epsilon: f64,
        stop_tol: f64,
    },
    PowerLaw(PowerLawFrequencies),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedStatistic {
    pub spec: StatisticSpec,
    pub r: u64,
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub model: ResolvedModel,
    pub allocation: Allocation,
    pub statistics: Vec<ResolvedStatistic>,
    /// Index and factor of the counting function used for `r(t)`.
    pub threshold_alpha: f64,
    pub threshold_ell: SlowlyVarying,
}

fn check_keys(obj: &Map<String, Value>, prefix: &str, known: &[&str], errs: &mut Vec<String>) {
    for key in obj.keys() {
        if !known.contains(&key.as_str()) {
            errs.push(format!("{prefix}{key}: unknown field"));
        }
    }
}

fn get_f64(obj: &Map<String, Value>, key: &str, path: &str, errs: &mut Vec<String>) -> Option<f64> {
    match obj.get(key) {
        None | Some(Value::Null) => None,
        Some(v) => match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                errs.push(format!("{path}: expected a number"));
                None
            }
        },
    }
}

fn get_u64(obj: &Map<String, Value>, key: &str, path: &str, errs: &mut Vec<String>) -> Option<u64> {
    match obj.get(key) {
        None | Some(Value::Null) => None,
        Some(v) => match v.as_u64().or_else(|| {
            v.as_f64()
                .filter(|x| x.fract() == 0.0 && *x >= 0.0 && *x < 1.8e19)
                .map(|x| x as u64)
        }) {
            Some(x) => Some(x),
            None => {
                errs.push(format!("{path}: expected a nonnegative integer"));
                None
            }
        },
    }
}

fn parse_model(v: &Value, errs: &mut Vec<String>) -> Option<ModelConfig> {
    let Some(obj) = v.as_object() else {
        errs.push("model: expected an object".into());
        return None;
    };
    match obj.get("kind").and_then(Value::as_str) {
        Some("regenerative") => {
            check_keys(
                obj,
                "model.",
                &["kind", "alpha", "ell", "kappa", "epsilon", "stop_tol"],
                errs,
            );
            let alpha = get_f64(obj, "alpha", "model.alpha", errs);
            if alpha.is_none() && obj.get("alpha").is_none_or(Value::is_null) {
                errs.push("model.alpha: required".into());
            }
            let alpha_ok = alpha.filter(|a| *a > 0.0 && *a < 1.0);
            if alpha.is_some() && alpha_ok.is_none() {
                errs.push("model.alpha: must lie in (0, 1)".into());
            }
            let ell = match obj.get("ell") {
                None | Some(Value::Null) => {
                    alpha_ok.map(|a| SlowlyVarying::Constant((-ln_gamma(1.0 - a)).exp()))
                }
                Some(Value::String(s)) => match s.parse::<SlowlyVarying>() {
                    Ok(l) => Some(l),
                    Err(e) => {
                        errs.push(format!("model.ell: {e}"));
                        None
                    }
                },
                Some(_) => {
                    errs.push("model.ell: expected a string".into());
                    None
                }
            };
            let kappa = get_f64(obj, "kappa", "model.kappa", errs).unwrap_or(DEFAULT_KAPPA);
            if !(kappa > 0.0 && kappa <= 1.0) {
                errs.push("model.kappa: must lie in (0, 1]".into());
            }
            let epsilon = get_f64(obj, "epsilon", "model.epsilon", errs);
            if epsilon.is_some_and(|e| !(e > 0.0)) {
                errs.push("model.epsilon: must be positive".into());
            }
            let stop_tol = get_f64(obj, "stop_tol", "model.stop_tol", errs);
            if stop_tol.is_some_and(|s| !(s > 0.0 && s < 1.0)) {
                errs.push("model.stop_tol: must lie in (0, 1)".into());
            }
            if let (Some(a), Some(l)) = (alpha_ok, ell) {
                let tail = RegVarTail::new(a, l, TailRole::LevyTail);
                if let Err(e) = tail.and_then(SubordinatorSpec::new) {
                    errs.push(format!("model: {e}"));
                }
            }
            Some(ModelConfig::Regenerative {
                alpha: alpha_ok?,
                ell: ell?,
                kappa,
                epsilon,
                stop_tol,
            })
        }
        Some("power-law") => {
            check_keys(obj, "model.", &["kind", "beta", "tail_tol"], errs);
            let beta = get_f64(obj, "beta", "model.beta", errs);
            match beta {
                None => errs.push("model.beta: required".into()),
                Some(b) if !(b > 1.0) => {
                    errs.push("model.beta: must exceed 1 for summable frequencies".into())
                }
                _ => {}
            }
            let tail_tol = get_f64(obj, "tail_tol", "model.tail_tol", errs);
            if tail_tol.is_some_and(|s| !(s > 0.0 && s < 1.0)) {
                errs.push("model.tail_tol: must lie in (0, 1)".into());
            }
            Some(ModelConfig::PowerLaw {
                beta: beta.filter(|b| *b > 1.0)?,
                tail_tol,
            })
        }
        Some(other) => {
            errs.push(format!(
                "model.kind: unknown model '{other}' (want regenerative or power-law)"
            ));
            None
        }
        None => {
            errs.push("model.kind: required".into());
            None
        }
    }
}

fn parse_allocation(v: &Value, errs: &mut Vec<String>) -> Option<Allocation> {
    let Some(obj) = v.as_object() else {
        errs.push("allocation: expected an object".into());
        return None;
    };
    match obj.get("kind").and_then(Value::as_str) {
        Some("fixed-n") => {
            check_keys(obj, "allocation.", &["kind", "n"], errs);
            match get_u64(obj, "n", "allocation.n", errs) {
                Some(n) if n >= 1 => Some(Allocation::FixedN(n)),
                Some(_) => {
                    errs.push("allocation.n: must be at least 1".into());
                    None
                }
                None => {
                    if obj.get("n").is_none_or(Value::is_null) {
                        errs.push("allocation.n: required".into());
                    }
                    None
                }
            }
        }
        Some("poissonized") => {
            check_keys(obj, "allocation.", &["kind", "t"], errs);
            match get_f64(obj, "t", "allocation.t", errs) {
                Some(t) if t >= 1.0 => Some(Allocation::Poissonized(t)),
                Some(_) => {
                    errs.push("allocation.t: must be at least 1".into());
                    None
                }
                None => {
                    if obj.get("t").is_none_or(Value::is_null) {
                        errs.push("allocation.t: required".into());
                    }
                    None
                }
            }
        }
        Some(other) => {
            errs.push(format!(
                "allocation.kind: unknown allocation '{other}' (want fixed-n or poissonized)"
            ));
            None
        }
        None => {
            errs.push("allocation.kind: required".into());
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(ModelConfig::stable(0.5), Allocation::FixedN(1_000_000));
        c.statistics = vec![
            "exact:pow:0.3333333333333333".parse().unwrap(),
            "r-star".parse().unwrap(),
            StatisticSpec::Occupied,
        ];
        c.master_seed = 7;
        c
    }

    fn config_errors(v: Value) -> Vec<String> {
        match ExperimentConfig::from_json(&v) {
            Err(Error::Config(e)) => e,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn empty_object_names_required_fields() {
        let errs = config_errors(json!({}));
        assert!(errs.iter().any(|e| e.starts_with("model")));
        assert!(errs.iter().any(|e| e.starts_with("allocation")));
    }

    #[test]
    fn every_offending_field_is_listed() {
        let errs = config_errors(json!({
            "model": {"kind": "regenerative", "alpha": 1.5, "kappa": -1},
            "allocation": {"kind": "fixed-n", "n": 0},
            "statistics": ["exact:pow:2", 3],
            "replications": 0,
            "bogus": true,
        }));
        for key in [
            "model.alpha",
            "model.kappa",
            "allocation.n",
            "statistics[0]",
            "statistics[1]",
            "replications",
            "bogus",
        ] {
            assert!(
                errs.iter().any(|e| e.starts_with(key)),
                "missing {key} in {errs:?}"
            );
        }
    }

    #[test]
    fn defaults_are_applied() {
        let c = ExperimentConfig::from_json(&json!({
            "model": {"kind": "regenerative", "alpha": 0.5},
            "allocation": {"kind": "fixed-n", "n": 1000},
        }))
        .unwrap();
        assert_eq!(c.replications, DEFAULT_REPLICATIONS);
        assert!(c.strict);
        assert_eq!(c.overflow_budget, 0.1);
        match c.model {
            ModelConfig::Regenerative {
                ell,
                kappa,
                epsilon,
                stop_tol,
                ..
            } => {
                assert!((ell.eval(10.0) - 0.564_189_583_547_756_3).abs() < 1e-15);
                assert_eq!(kappa, 1e-2);
                assert!(epsilon.is_none() && stop_tol.is_none());
            }
            _ => panic!(),
        }
        let r = c.resolve().unwrap();
        match r.model {
            ResolvedModel::Regenerative {
                epsilon, stop_tol, ..
            } => {
                assert!((stop_tol - 1e-6).abs() < 1e-20);
                // no statistics: epsilon scales with the threshold r(1000)
                let rt = GrowthFunction::threshold(
                    0.5,
                    SlowlyVarying::Constant(0.564_189_583_547_756_3),
                )
                .eval(1000.0)
                .unwrap();
                assert!((epsilon - 1e-2 * rt as f64 / 1000.0).abs() < 1e-18);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn echo_round_trips() {
        let c = sample();
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        let text = serde_json::to_string(&c.to_json()).unwrap();
        let again = ExperimentConfig::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(again, c);
        let p = ExperimentConfig::new(
            ModelConfig::PowerLaw {
                beta: 2.0,
                tail_tol: Some(1e-6),
            },
            Allocation::Poissonized(1e7),
        );
        assert_eq!(ExperimentConfig::from_json(&p.to_json()).unwrap(), p);
    }

    #[test]
    fn resolution_of_statistics_and_epsilon() {
        let r = sample().resolve().unwrap();
        let rs: Vec<u64> = r.statistics.iter().map(|s| s.r).collect();
        assert_eq!(rs, vec![100, 43, 1]);
        assert_eq!(r.statistics[1].label, "K_43");
        match r.model {
            ResolvedModel::Regenerative {
                epsilon, stop_tol, ..
            } => {
                assert!((epsilon - 1e-8).abs() < 1e-22);
                assert!((stop_tol - 1e-9).abs() < 1e-22);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn epsilon_above_kappa_bound_is_rejected_in_strict_mode() {
        let mut c = sample();
        if let ModelConfig::Regenerative { epsilon, .. } = &mut c.model {
            *epsilon = Some(1e-3);
        }
        assert!(matches!(c.resolve(), Err(Error::Config(_))));
        c.strict = false;
        assert!(c.resolve().is_ok());
    }

    #[test]
    fn power_law_threshold_and_boxes() {
        let mut c = ExperimentConfig::new(
            ModelConfig::PowerLaw {
                beta: 2.0,
                tail_tol: None,
            },
            Allocation::Poissonized(1e7),
        );
        c.statistics = vec!["r-star".parse().unwrap()];
        let r = c.resolve().unwrap();
        assert_eq!(r.statistics[0].r, 114);
        match r.model {
            ResolvedModel::PowerLaw(f) => assert!(f.k >= 400 && f.k < 10_000, "{}", f.k),
            _ => panic!(),
        }
        let mut fixed = ExperimentConfig::new(
            ModelConfig::PowerLaw {
                beta: 2.0,
                tail_tol: None,
            },
            Allocation::FixedN(1000),
        );
        fixed.statistics = vec![StatisticSpec::Occupied];
        match fixed.resolve().unwrap().model {
            ResolvedModel::PowerLaw(f) => assert!(f.residual * 1000.0 <= 0.1),
            _ => panic!(),
        }
    }

    #[test]
    fn statistic_strings_round_trip() {
        for s in [
            "exact:threshold",
            "exact:threshold:2",
            "at-least:pow:0.25,1",
            "occupied",
            "exact:const:3",
        ] {
            assert_eq!(s.parse::<StatisticSpec>().unwrap().to_string(), s);
        }
        assert!("exactly:3".parse::<StatisticSpec>().is_err());
    }
}
