//! Regular-variation primitives: slowly varying factors, regularly varying
//! tails, the moderate-part threshold `r(t)` and the small-count constants
//! `c_r`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{bisect, ln_gamma};

/// A slowly varying function `ℓ` on `[1, ∞)`.
///
/// Arguments below 1 are clamped to 1, which keeps Lévy tails `y^{-α} ℓ(1/y)`
/// well defined (and monotone) for large jumps `y > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SlowlyVarying {
    /// `ℓ(x) = c`
    Constant(f64),
    /// `ℓ(x) = (offset + ln x)^power`
    LogPower { power: f64, offset: f64 },
}

impl SlowlyVarying {
    pub fn constant(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Domain(format!(
                "constant slowly varying factor must be positive, got {c}"
            )));
        }
        Ok(Self::Constant(c))
    }

    pub fn log_power(power: f64, offset: f64) -> Result<Self> {
        if !power.is_finite() || !offset.is_finite() || offset < 0.0 {
            return Err(Error::Domain(format!(
                "log-power factor needs finite power and offset >= 0, got ({power}, {offset})"
            )));
        }
        if power < 0.0 && offset <= 0.0 {
            return Err(Error::Domain(
                "negative log-power needs a positive offset".into(),
            ));
        }
        Ok(Self::LogPower { power, offset })
    }

    pub fn one() -> Self {
        Self::Constant(1.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::Constant(c) => c,
            Self::LogPower { power, offset } => (offset + x.max(1.0).ln()).powf(power),
        }
    }

    pub fn ln_eval(&self, x: f64) -> f64 {
        match *self {
            Self::Constant(c) => c.ln(),
            Self::LogPower { power, offset } => power * (offset + x.max(1.0).ln()).ln(),
        }
    }

    /// `x ℓ'(x)`; zero on the clamped region `x < 1`.
    pub fn x_derivative(&self, x: f64) -> f64 {
        match *self {
            Self::Constant(_) => 0.0,
            Self::LogPower { power, offset } => {
                if x < 1.0 || power == 0.0 {
                    0.0
                } else {
                    power * (offset + x.ln()).powf(power - 1.0)
                }
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant(_))
    }
}

impl fmt::Display for SlowlyVarying {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "const:{c}"),
            Self::LogPower { power, offset } => write!(f, "logpow:{power},{offset}"),
        }
    }
}

impl FromStr for SlowlyVarying {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Domain(format!(
                "cannot parse slowly varying spec '{s}' (want const:c or logpow:p[,offset])"
            ))
        };
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = rest
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        match (kind.trim(), nums.as_slice()) {
            ("const", [c]) => Self::constant(*c),
            ("logpow", [p]) => Self::log_power(*p, 1.0),
            ("logpow", [p, o]) => Self::log_power(*p, *o),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for SlowlyVarying {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SlowlyVarying> for String {
    fn from(l: SlowlyVarying) -> String {
        l.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailRole {
    LevyTail,
    CountingFunction,
}

/// `y ↦ y^{-α} ℓ(1/y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegVarTail {
    pub alpha: f64,
    pub ell: SlowlyVarying,
    pub role: TailRole,
}

impl RegVarTail {
    pub fn new(alpha: f64, ell: SlowlyVarying, role: TailRole) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Domain(format!(
                "index alpha must lie in (0, 1], got {alpha}"
            )));
        }
        Ok(Self { alpha, ell, role })
    }

    /// Lévy tail of the α-stable subordinator, `y^{-α}/Γ(1-α)`.
    pub fn stable(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!(
                "stable index must lie in (0, 1), got {alpha}"
            )));
        }
        let c = (-ln_gamma(1.0 - alpha)).exp();
        Self::new(alpha, SlowlyVarying::Constant(c), TailRole::LevyTail)
    }

    pub fn eval(&self, y: f64) -> f64 {
        y.powf(-self.alpha) * self.ell.eval(1.0 / y)
    }
}

/// `ν̄(y) = ν([y, ∞))` for a Lévy tail.
pub fn levy_tail(tail: &RegVarTail, y: f64) -> Result<f64> {
    if tail.role != TailRole::LevyTail {
        return Err(Error::Domain(
            "levy_tail called on a counting-function tail".into(),
        ));
    }
    if !(y > 0.0) {
        return Err(Error::Domain(format!(
            "Lévy tail argument must be positive, got {y}"
        )));
    }
    Ok(tail.eval(y))
}

fn threshold_equation(alpha: f64, ell: &SlowlyVarying, t: f64, r: f64) -> f64 {
    // α t^α ℓ(t/r) / r^{α+1} - 1, in logs to stay finite for huge t
    (alpha.ln() + alpha * t.ln() + ell.ln_eval(t / r) - (alpha + 1.0) * r.ln()).exp() - 1.0
}

/// Solves `α t^α ℓ(t/r) / r^{α+1} = 1` for `r ∈ [1, t]` by bisection.
pub fn solve_threshold(alpha: f64, ell: &SlowlyVarying, t: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if !(t.is_finite() && t > 1.0) {
        return Err(Error::Domain(format!("threshold needs t > 1, got {t}")));
    }
    let g = |r: f64| threshold_equation(alpha, ell, t, r);
    if !(g(1.0) > 0.0 && g(t) < 0.0) {
        return Err(Error::InfeasibleThreshold { t });
    }
    let r = bisect(g, 1.0, t, 1e-13);
    Ok(r)
}

/// Residual `α t^α ℓ(t/r)/r^{α+1} - 1` of a candidate threshold.
pub fn threshold_residual(alpha: f64, ell: &SlowlyVarying, t: f64, r: f64) -> f64 {
    threshold_equation(alpha, ell, t, r)
}

/// The candidate obtained by freezing `ℓ` at `t`: `(α t^α ℓ(t))^{1/(α+1)}`.
/// Agrees with [`solve_threshold`] for constant `ℓ`.
pub fn naive_threshold(alpha: f64, ell: &SlowlyVarying, t: f64) -> f64 {
    ((alpha.ln() + alpha * t.ln() + ell.ln_eval(t)) / (alpha + 1.0)).exp()
}

/// `c_r = (-1)^{r-1} binom(α, r) = α Γ(r-α) / (Γ(1-α) Γ(r+1))`.
pub fn small_count_constant(alpha: f64, r: u64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if r == 0 {
        return Err(Error::Domain("r must be at least 1".into()));
    }
    let r = r as f64;
    Ok((alpha.ln() + ln_gamma(r - alpha) - ln_gamma(1.0 - alpha) - ln_gamma(r + 1.0)).exp())
}

/// Integer-valued growth sequences `q(t)`, `w(t)`, `r_i(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowthFunction {
    /// `scale · t^θ`
    Power {
        theta: f64,
        scale: f64,
    },
    /// `scale · t^θ (ln t)^p`
    PowerLog {
        theta: f64,
        power: f64,
        scale: f64,
    },
    /// `scale · r(t)` with `r` from [`solve_threshold`]
    Threshold {
        alpha: f64,
        ell: SlowlyVarying,
        scale: f64,
    },
    Constant(u64),
}

impl GrowthFunction {
    pub fn power(theta: f64) -> Self {
        Self::Power { theta, scale: 1.0 }
    }

    pub fn threshold(alpha: f64, ell: SlowlyVarying) -> Self {
        Self::Threshold {
            alpha,
            ell,
            scale: 1.0,
        }
    }

    /// Unfloored value.
    pub fn value(&self, t: f64) -> Result<f64> {
        if !(t >= 1.0) {
            return Err(Error::Domain(format!(
                "growth functions are evaluated at t >= 1, got {t}"
            )));
        }
        let v = match *self {
            Self::Power { theta, scale } => scale * t.powf(theta),
            Self::PowerLog {
                theta,
                power,
                scale,
            } => scale * t.powf(theta) * t.ln().powf(power),
            Self::Threshold { alpha, ell, scale } => scale * solve_threshold(alpha, &ell, t)?,
            Self::Constant(k) => k as f64,
        };
        Ok(v)
    }

    pub fn eval(&self, t: f64) -> Result<u64> {
        let v = self.value(t)?;
        // guard against 99.99999999 from powf at exact powers
        let f = (v * (1.0 + 4.0 * f64::EPSILON)).floor();
        if !(f >= 1.0) || !f.is_finite() {
            return Err(Error::Domain(format!(
                "growth function value {v} at t = {t} is below 1"
            )));
        }
        Ok(f as u64)
    }
}

impl fmt::Display for GrowthFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Power { theta, scale } => write!(f, "pow:{theta},{scale}"),
            Self::PowerLog {
                theta,
                power,
                scale,
            } => write!(f, "powlog:{theta},{power},{scale}"),
            Self::Threshold { alpha, ell, scale } => {
                write!(f, "threshold(alpha={alpha},ell={ell},scale={scale})")
            }
            Self::Constant(k) => write!(f, "const:{k}"),
        }
    }
}

/// Parses `pow:θ[,scale]`, `powlog:θ,p[,scale]` and `const:k`. Thresholds
/// depend on a model and are resolved elsewhere.
impl FromStr for GrowthFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Domain(format!("cannot parse growth function '{s}' (want pow:θ[,scale], powlog:θ,p[,scale] or const:k)"))
        };
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        if kind.trim() == "const" {
            let k: u64 = rest.trim().parse().map_err(|_| bad())?;
            return if k >= 1 {
                Ok(Self::Constant(k))
            } else {
                Err(bad())
            };
        }
        let nums: Vec<f64> = rest
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let g = match (kind.trim(), nums.as_slice()) {
            ("pow", [theta]) => Self::Power {
                theta: *theta,
                scale: 1.0,
            },
            ("pow", [theta, scale]) => Self::Power {
                theta: *theta,
                scale: *scale,
            },
            ("powlog", [theta, power]) => Self::PowerLog {
                theta: *theta,
                power: *power,
                scale: 1.0,
            },
            ("powlog", [theta, power, scale]) => Self::PowerLog {
                theta: *theta,
                power: *power,
                scale: *scale,
            },
            _ => return Err(bad()),
        };
        match g {
            Self::Power { theta, scale } | Self::PowerLog { theta, scale, .. }
                if !(theta > 0.0 && theta < 1.0 && scale > 0.0) =>
            {
                Err(Error::Domain(format!(
                    "growth '{s}' needs 0 < θ < 1 and scale > 0"
                )))
            }
            g => Ok(g),
        }
    }
}

/// Evaluates `growth` at `t`; free-function form of [`GrowthFunction::eval`].
pub fn growth_eval(growth: &GrowthFunction, t: f64) -> Result<u64> {
    growth.eval(t)
}
