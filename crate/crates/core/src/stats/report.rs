//! Convergence reports: one subordinator path, a grid of sizes, and the
//! normalized statistic of a limit theorem at each grid point next to the
//! path's own limit.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numeric::ln_gamma;
use crate::occupancy::CountProfile;
use crate::regvar::{small_count_constant, GrowthFunction, RegVarTail, SlowlyVarying, TailRole};
use crate::rng::{domain, stream, sub_stream};
use crate::stats::config::{Allocation, ExperimentConfig, ModelConfig};
use crate::stats::replicate::Environment;
use crate::subordinator::{exp_functional, frequencies, rho, simulate_path, SubordinatorSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    /// `w^{α+1} K_{n,w} / (n^α ℓ(n/w)) → α I_α`
    ThmMain2(GrowthFunction),
    /// `q^α K_{n,≥q} / (n^α ℓ(n/q)) → I_α`
    ThmMain3(GrowthFunction),
    /// `K_n / (Γ(1-α) n^α ℓ(n)) → I_α`
    LlnKn,
    /// `K_{n,r} / (Γ(1-α) n^α ℓ(n)) → c_r I_α`
    LlnKnr(u64),
    /// `ρ(x) x^α / ℓ(1/x) → I_α` at `x = 1/n`
    RhoPathwise,
    /// `1{K_{n,q} = 0} → 1`
    ToZero(GrowthFunction),
}

impl Target {
    pub fn thm_main2() -> Self {
        Target::ThmMain2(GrowthFunction::power(0.2))
    }

    pub fn thm_main3() -> Self {
        Target::ThmMain3(GrowthFunction::power(0.25))
    }

    pub fn to_zero() -> Self {
        Target::ToZero(GrowthFunction::power(0.45))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Target::ThmMain2(_) => "thm-main2",
            Target::ThmMain3(_) => "thm-main3",
            Target::LlnKn => "lln-kn",
            Target::LlnKnr(_) => "lln-knr",
            Target::RhoPathwise => "rho-pathwise",
            Target::ToZero(_) => "to-zero",
        }
    }

    /// Count index at size `n`, if the target has one.
    fn index(&self, n: f64) -> Result<Option<u64>> {
        match self {
            Target::ThmMain2(g) | Target::ThmMain3(g) | Target::ToZero(g) => g.eval(n).map(Some),
            Target::LlnKn => Ok(Some(1)),
            Target::LlnKnr(r) => Ok(Some(*r)),
            Target::RhoPathwise => Ok(None),
        }
    }

    /// Smallest box frequency the statistic at size `n` looks at; the
    /// truncation level has to stay a factor `κ` below it.
    fn frequency_scale(&self, n: f64) -> Result<f64> {
        Ok(self.index(n)?.unwrap_or(1) as f64 / n)
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::ThmMain2(g) | Target::ThmMain3(g) | Target::ToZero(g) => {
                write!(f, "{}:{g}", self.name())
            }
            Target::LlnKnr(r) => write!(f, "lln-knr:{r}"),
            _ => write!(f, "{}", self.name()),
        }
    }
}

/// `thm-main2[:<growth>]`, `thm-main3[:<growth>]`, `to-zero[:<growth>]`,
/// `lln-kn`, `lln-knr[:r]`, `rho-pathwise`.
impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        let growth = |default: GrowthFunction| -> Result<GrowthFunction> {
            rest.map_or(Ok(default), str::parse)
        };
        match head {
            "thm-main2" => Ok(Target::ThmMain2(growth(GrowthFunction::power(0.2))?)),
            "thm-main3" => Ok(Target::ThmMain3(growth(GrowthFunction::power(0.25))?)),
            "to-zero" => Ok(Target::ToZero(growth(GrowthFunction::power(0.45))?)),
            "lln-kn" if rest.is_none() => Ok(Target::LlnKn),
            "rho-pathwise" if rest.is_none() => Ok(Target::RhoPathwise),
            "lln-knr" => {
                let r = rest.map_or(Ok(1), |r| r.trim().parse::<u64>()).map_err(|_| Error::Domain(format!("bad r in '{s}'")))?;
                if r == 0 {
                    return Err(Error::Domain("lln-knr needs r >= 1".into()));
                }
                Ok(Target::LlnKnr(r))
            }
            _ => Err(Error::Domain(format!(
                "unknown target '{s}' (want thm-main2, thm-main3, lln-kn, lln-knr[:r], rho-pathwise or to-zero)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    /// `n` (fixed-n), `t` (Poissonized) or `1/x` (ρ).
    pub scale: f64,
    pub r: Option<u64>,
    /// Raw count.
    pub statistic: f64,
    pub ratio: f64,
    pub target: f64,
    /// Why the row violates the truncation or overflow constraints.
    pub flag: Option<String>,
}

impl RatioRow {
    pub fn relative_error(&self) -> f64 {
        (self.ratio / self.target - 1.0).abs()
    }
}

#[derive(Debug, Clone)]
pub struct RatioReport {
    pub target: Target,
    pub path_index: u64,
    pub master_seed: u64,
    pub allocation: &'static str,
    pub epsilon: f64,
    pub stop_tol: f64,
    pub i_alpha: f64,
    pub i_alpha_bias: f64,
    pub rows: Vec<RatioRow>,
}

impl RatioReport {
    pub fn last(&self) -> Option<&RatioRow> {
        self.rows.last()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# target={},allocation={},path={},seed={},epsilon={:e},stop_tol={:e},i_alpha={:.12e},i_alpha_bias={:.3e}",
            self.target, self.allocation, self.path_index, self.master_seed, self.epsilon, self.stop_tol, self.i_alpha, self.i_alpha_bias
        )?;
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["scale", "r", "statistic", "ratio", "target", "flag"])?;
        for row in &self.rows {
            wtr.write_record([
                format!("{:e}", row.scale),
                row.r.map(|r| r.to_string()).unwrap_or_default(),
                row.statistic.to_string(),
                format!("{:.12e}", row.ratio),
                format!("{:.12e}", row.target),
                row.flag.clone().unwrap_or_default(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn allocation_at(template: Allocation, n: f64) -> Allocation {
    match template {
        Allocation::FixedN(_) => Allocation::FixedN(n.round() as u64),
        Allocation::Poissonized(_) => Allocation::Poissonized(n),
    }
}

/// Convergence reports for several targets that share one path and, at each
/// grid point, one allocation. The path is the `path_index`-th path stream of
/// `config.master_seed`; grid point `j` allocates from its own sub-stream.
pub fn convergence_reports(
    targets: &[Target],
    config: &ExperimentConfig,
    n_grid: &[f64],
    path_index: u64,
) -> Result<Vec<RatioReport>> {
    let ModelConfig::Regenerative {
        alpha,
        ell,
        kappa,
        epsilon,
        stop_tol,
    } = config.model
    else {
        return Err(Error::Config(vec![
            "model: convergence reports need a regenerative model".into(),
        ]));
    };
    if n_grid.is_empty() || n_grid.iter().any(|n| !(*n >= 1.0)) {
        return Err(Error::Domain("grid sizes must be at least 1".into()));
    }
    let spec = SubordinatorSpec::new(RegVarTail::new(alpha, ell, TailRole::LevyTail)?)?;
    let fixed_n = matches!(config.allocation, Allocation::FixedN(_));

    // per (target, grid point) bound on the truncation level
    let mut bounds = vec![vec![f64::NAN; n_grid.len()]; targets.len()];
    for (ti, target) in targets.iter().enumerate() {
        for (j, &n) in n_grid.iter().enumerate() {
            if let Ok(scale) = target.frequency_scale(n) {
                bounds[ti][j] = kappa * scale;
            }
        }
    }
    let min_bound = bounds
        .iter()
        .flatten()
        .copied()
        .filter(|b| b.is_finite())
        .fold(f64::INFINITY, f64::min);
    let n_max = n_grid.iter().copied().fold(0.0, f64::max);
    let epsilon = epsilon.unwrap_or(if min_bound.is_finite() {
        min_bound
    } else {
        kappa / n_max
    });
    let stop_tol = stop_tol.unwrap_or(1e-3 / n_max);

    let mut rng = stream(config.master_seed, domain::PATH, path_index);
    let path = simulate_path(&spec, epsilon, stop_tol, &mut rng)?;
    let summary = exp_functional(&path, alpha)?;
    let freqs = frequencies(&path)?;
    let i_alpha = summary.exp_functional;
    let env = Environment::Path { freqs, summary };
    let Environment::Path { freqs, .. } = &env else {
        unreachable!()
    };

    let needs_counts = targets.iter().any(|t| *t != Target::RhoPathwise);
    let mut profiles: Vec<Option<CountProfile>> = Vec::with_capacity(n_grid.len());
    for (j, &n) in n_grid.iter().enumerate() {
        if !needs_counts {
            profiles.push(None);
            continue;
        }
        let mut rng = sub_stream(config.master_seed, domain::ALLOCATION, path_index, j as u64);
        profiles.push(Some(env.allocate(
            allocation_at(config.allocation, n),
            None,
            &mut rng,
        )?));
    }

    let ln_gamma_1ma = ln_gamma(1.0 - alpha);
    let mut reports = Vec::with_capacity(targets.len());
    for (ti, target) in targets.iter().enumerate() {
        let mut rows = Vec::with_capacity(n_grid.len());
        for (j, &n) in n_grid.iter().enumerate() {
            let mut flags = Vec::new();
            let bound = bounds[ti][j];
            if bound.is_finite() && epsilon > bound * (1.0 + 1e-12) {
                flags.push(format!("epsilon {epsilon:e} > kappa*scale {bound:e}"));
            }
            if fixed_n && stop_tol * n > config.overflow_budget {
                flags.push(format!(
                    "expected overflow {:.3} > budget {}",
                    stop_tol * n,
                    config.overflow_budget
                ));
            }
            let r = match target.index(n) {
                Ok(r) => r,
                Err(e) => {
                    flags.push(e.to_string());
                    rows.push(RatioRow {
                        scale: n,
                        r: None,
                        statistic: f64::NAN,
                        ratio: f64::NAN,
                        target: f64::NAN,
                        flag: Some(flags.join("; ")),
                    });
                    continue;
                }
            };
            let (statistic, ratio, limit) = evaluate(
                target,
                alpha,
                &ell,
                ln_gamma_1ma,
                n,
                r,
                profiles[j].as_ref(),
                freqs,
                i_alpha,
            )?;
            rows.push(RatioRow {
                scale: n,
                r,
                statistic,
                ratio,
                target: limit,
                flag: (!flags.is_empty()).then(|| flags.join("; ")),
            });
        }
        reports.push(RatioReport {
            target: *target,
            path_index,
            master_seed: config.master_seed,
            allocation: if fixed_n { "fixed-n" } else { "poissonized" },
            epsilon,
            stop_tol,
            i_alpha,
            i_alpha_bias: env.summary().map_or(0.0, |s| s.total_bias()),
            rows,
        });
    }
    Ok(reports)
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    target: &Target,
    alpha: f64,
    ell: &SlowlyVarying,
    ln_gamma_1ma: f64,
    n: f64,
    r: Option<u64>,
    profile: Option<&CountProfile>,
    freqs: &crate::subordinator::FrequencyVector,
    i_alpha: f64,
) -> Result<(f64, f64, f64)> {
    let profile = || profile.expect("allocation for count targets");
    let lln_norm = (ln_gamma_1ma + alpha * n.ln() + ell.ln_eval(n)).exp();
    Ok(match *target {
        Target::ThmMain2(_) => {
            let w = r.expect("index") as f64;
            let k = profile().exactly(w as u64) as f64;
            let norm = ((alpha + 1.0) * w.ln() - alpha * n.ln() - ell.ln_eval(n / w)).exp();
            (k, k * norm, alpha * i_alpha)
        }
        Target::ThmMain3(_) => {
            let q = r.expect("index") as f64;
            let k = profile().at_least(q as u64) as f64;
            let norm = (alpha * q.ln() - alpha * n.ln() - ell.ln_eval(n / q)).exp();
            (k, k * norm, i_alpha)
        }
        Target::LlnKn => {
            let k = profile().total_occupied as f64;
            (k, k / lln_norm, i_alpha)
        }
        Target::LlnKnr(r) => {
            let k = profile().exactly(r) as f64;
            (k, k / lln_norm, small_count_constant(alpha, r)? * i_alpha)
        }
        Target::RhoPathwise => {
            let x = 1.0 / n;
            let k = rho(freqs, x)? as f64;
            (k, k * (alpha * x.ln() - ell.ln_eval(n)).exp(), i_alpha)
        }
        Target::ToZero(_) => {
            let k = profile().exactly(r.expect("index")) as f64;
            (k, if k == 0.0 { 1.0 } else { 0.0 }, 1.0)
        }
    })
}

/// Single-target form of [`convergence_reports`].
pub fn convergence_report(
    target: Target,
    config: &ExperimentConfig,
    n_grid: &[f64],
    path_index: u64,
) -> Result<RatioReport> {
    Ok(convergence_reports(&[target], config, n_grid, path_index)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(alloc: Allocation) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(ModelConfig::stable(0.5), alloc);
        c.master_seed = 3;
        c
    }

    #[test]
    fn target_strings_round_trip() {
        for s in [
            "thm-main2:pow:0.2,1",
            "thm-main3:pow:0.25,1",
            "lln-kn",
            "lln-knr:3",
            "rho-pathwise",
            "to-zero:pow:0.45,1",
        ] {
            let t: Target = s.parse().unwrap();
            assert_eq!(t.to_string(), s);
        }
        assert_eq!("thm-main2".parse::<Target>().unwrap(), Target::thm_main2());
        assert_eq!("lln-knr".parse::<Target>().unwrap(), Target::LlnKnr(1));
        assert!("lln-knr:0".parse::<Target>().is_err());
        assert!("thm-main4".parse::<Target>().is_err());
    }

    #[test]
    fn shared_path_gives_consistent_reports() {
        let targets = [
            Target::LlnKn,
            Target::LlnKnr(1),
            Target::LlnKnr(2),
            Target::RhoPathwise,
        ];
        let reps = convergence_reports(
            &targets,
            &config(Allocation::Poissonized(1.0)),
            &[1e3, 1e4],
            0,
        )
        .unwrap();
        assert_eq!(reps.len(), 4);
        let i = reps[0].i_alpha;
        assert!(reps.iter().all(|r| r.i_alpha == i && r.rows.len() == 2));
        for (j, row) in reps[0].rows.iter().enumerate() {
            // K_n ≥ K_{n,1} + K_{n,2}
            assert!(row.statistic >= reps[1].rows[j].statistic + reps[2].rows[j].statistic);
            assert!(row.flag.is_none(), "{:?}", row.flag);
        }
        assert!((reps[2].rows[0].target - i / 8.0).abs() < 1e-15);
    }

    #[test]
    fn explicit_coarse_epsilon_is_flagged_not_dropped() {
        let mut c = config(Allocation::FixedN(1));
        if let ModelConfig::Regenerative { epsilon, .. } = &mut c.model {
            *epsilon = Some(1e-5);
        }
        let rep = convergence_report(Target::thm_main3(), &c, &[1e3, 1e5], 0).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert!(rep.rows[0].flag.is_none());
        assert!(rep.rows[1].flag.as_deref().unwrap().contains("epsilon"));
    }

    #[test]
    fn reports_are_reproducible_and_path_indexed() {
        let c = config(Allocation::FixedN(1));
        let a = convergence_report(Target::thm_main2(), &c, &[1e4, 1e5], 5).unwrap();
        let b = convergence_report(Target::thm_main2(), &c, &[1e4, 1e5], 5).unwrap();
        let d = convergence_report(Target::thm_main2(), &c, &[1e4, 1e5], 6).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_ne!(a.i_alpha, d.i_alpha);
        let mut x = Vec::new();
        a.write_csv(&mut x).unwrap();
        let text = String::from_utf8(x).unwrap();
        assert!(text.starts_with("# target=thm-main2"));
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "scale,r,statistic,ratio,target,flag"
        );
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn to_zero_rows_are_indicators() {
        let rep = convergence_report(
            Target::to_zero(),
            &config(Allocation::FixedN(1)),
            &[1e4, 1e5],
            1,
        )
        .unwrap();
        for row in &rep.rows {
            assert_eq!(row.target, 1.0);
            assert_eq!(row.ratio, if row.statistic == 0.0 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn power_law_model_is_rejected() {
        let c = ExperimentConfig::new(
            ModelConfig::PowerLaw {
                beta: 2.0,
                tail_tol: None,
            },
            Allocation::FixedN(10),
        );
        assert!(matches!(
            convergence_report(Target::LlnKn, &c, &[10.0], 0),
            Err(Error::Config(_))
        ));
    }
}
