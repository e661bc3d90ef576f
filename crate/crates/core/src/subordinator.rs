//! Drift-free subordinators simulated through their jumps of size at least
//! `ε`, the box frequencies they induce, the counting function `ρ` and the
//! exponential functional `I_α = ∫ e^{-α S(τ)} dτ`.

use std::io::Write;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::numeric::{simpson_adaptive, CompensatedSum};
use crate::regvar::{RegVarTail, SlowlyVarying, TailRole};

/// A subordinator given by its Lévy tail `ν̄(y) = y^{-α} ℓ(1/y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubordinatorSpec {
    pub tail: RegVarTail,
}

impl SubordinatorSpec {
    pub fn new(tail: RegVarTail) -> Result<Self> {
        if tail.role != TailRole::LevyTail {
            return Err(Error::Domain("subordinator needs a Lévy-tail role".into()));
        }
        if tail.alpha >= 1.0 {
            return Err(Error::Domain(format!(
                "alpha = {} does not give a Lévy measure with ∫ min(1, y) ν(dy) < ∞",
                tail.alpha
            )));
        }
        if let SlowlyVarying::LogPower { power, offset } = tail.ell {
            // d/dy ln ν̄ = -(α + p/(offset + ln(1/y)))/y must stay negative
            if power < 0.0 && tail.alpha * offset + power < 0.0 {
                return Err(Error::Domain(format!(
                    "Lévy tail with {} is not monotone near y = 1",
                    tail.ell
                )));
            }
        }
        Ok(Self { tail })
    }

    pub fn stable(alpha: f64) -> Result<Self> {
        Self::new(RegVarTail::stable(alpha)?)
    }

    pub fn alpha(&self) -> f64 {
        self.tail.alpha
    }

    pub fn ell(&self) -> SlowlyVarying {
        self.tail.ell
    }

    /// `ν̄(y)`; infinite at `y = 0`.
    pub fn tail_at(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return f64::INFINITY;
        }
        self.tail.eval(y)
    }

    fn ln_tail_at(&self, y: f64) -> f64 {
        -self.tail.alpha * y.ln() + self.tail.ell.ln_eval(1.0 / y)
    }

    /// Generalized inverse of `y ↦ ν̄(y)`.
    pub fn inverse_tail(&self, level: f64) -> f64 {
        self.inverse_ln_tail(level.ln())
    }

    fn inverse_ln_tail(&self, ln_level: f64) -> f64 {
        let alpha = self.tail.alpha;
        match self.tail.ell {
            SlowlyVarying::Constant(c) => ((c.ln() - ln_level) / alpha).exp(),
            ell => {
                // beyond y = 1 the factor is frozen at ℓ(1)
                let ln_l1 = ell.ln_eval(1.0);
                if ln_level <= ln_l1 {
                    return ((ln_l1 - ln_level) / alpha).exp();
                }
                let g = |u: f64| self.ln_tail_at(u.exp()) - ln_level;
                let mut lo = -1.0;
                while g(lo) < 0.0 {
                    lo *= 2.0;
                }
                let mut hi = 0.0;
                // relative 1e-12 in y means 1e-12 in ln y
                while hi - lo > 1e-13 {
                    let mid = 0.5 * (lo + hi);
                    if g(mid) >= 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                (0.5 * (lo + hi)).exp()
            }
        }
    }

    /// Draws a jump from the law with survival function `ν̄(y)/ν̄(ε)` on `[ε, ∞)`.
    pub fn sample_jump<R: Rng + ?Sized>(&self, epsilon: f64, ln_rate: f64, rng: &mut R) -> f64 {
        let u = 1.0 - rng.random::<f64>();
        match self.tail.ell {
            SlowlyVarying::Constant(_) => epsilon * u.powf(-1.0 / self.tail.alpha),
            _ => self.inverse_ln_tail(u.ln() + ln_rate).max(epsilon),
        }
    }

    fn tail_integral(&self, epsilon: f64, k: f64) -> f64 {
        // ∫_0^ε y^{k-1} ν̄(y) dy = ε^{k-α} ∫_0^∞ e^{-(k-α)s} ℓ(e^s/ε) ds
        let alpha = self.tail.alpha;
        let decay = k - alpha;
        match self.tail.ell {
            SlowlyVarying::Constant(c) => c * epsilon.powf(decay) / decay,
            ell => {
                let f = |s: f64| (-decay * s + ell.ln_eval(s.exp() / epsilon)).exp();
                let upper = 60.0 / decay;
                let v = simpson_adaptive(&f, 0.0, upper, 256, 1e-10, 0.0)
                    .unwrap_or_else(|_| crate::numeric::simpson(&f, 0.0, upper, 1 << 16));
                epsilon.powf(decay) * v
            }
        }
    }

    /// Per-unit-time mass of the discarded jumps, `∫_0^ε y ν(dy)`.
    pub fn small_jump_mean(&self, epsilon: f64) -> f64 {
        (self.tail_integral(epsilon, 1.0) - epsilon * self.tail_at(epsilon)).max(0.0)
    }

    /// `∫_0^ε y² ν(dy)`.
    pub fn small_jump_second_moment(&self, epsilon: f64) -> f64 {
        (2.0 * self.tail_integral(epsilon, 2.0) - epsilon * epsilon * self.tail_at(epsilon))
            .max(0.0)
    }

    /// `Φ_ε(s) = ∫_ε^∞ (1 - e^{-sy}) ν(dy)`, the Laplace exponent of the
    /// truncated subordinator.
    pub fn laplace_exponent(&self, epsilon: f64, s: f64) -> f64 {
        // integrate by parts, then y = ε e^u
        let head = -(-s * epsilon).exp_m1() * self.tail_at(epsilon);
        let upper = (60.0 / (s * epsilon)).ln().max(1.0);
        let f = |u: f64| {
            let y = epsilon * u.exp();
            (-s * y + self.ln_tail_at(y) + y.ln()).exp()
        };
        let body = simpson_adaptive(&f, 0.0, upper, 512, 1e-11, 0.0)
            .unwrap_or_else(|_| crate::numeric::simpson(&f, 0.0, upper, 1 << 18));
        head + s * body
    }
}

/// Jump record of a truncated subordinator, stopped once `e^{-S}` drops below
/// the stop tolerance.
#[derive(Debug, Clone)]
pub struct SubordinatorPath {
    pub spec: SubordinatorSpec,
    pub epochs: Vec<f64>,
    pub jumps: Vec<f64>,
    pub running: Vec<f64>,
    pub epsilon: f64,
    pub stop_tol: f64,
    pub stop_mass: f64,
}

impl SubordinatorPath {
    pub fn len(&self) -> usize {
        self.jumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }

    /// The same path seen through a coarser truncation: jumps below
    /// `epsilon` are dropped, which is exactly a path of the coarser
    /// truncated process. Stops at `stop_tol` or at the end of this path.
    pub fn coarsen(&self, epsilon: f64, stop_tol: f64) -> Result<SubordinatorPath> {
        if epsilon < self.epsilon {
            return Err(Error::Domain(format!(
                "cannot refine a path truncated at {} down to {epsilon}",
                self.epsilon
            )));
        }
        let stop_level = -stop_tol.ln();
        let mut out = SubordinatorPath {
            spec: self.spec,
            epochs: Vec::new(),
            jumps: Vec::new(),
            running: Vec::new(),
            epsilon,
            stop_tol,
            stop_mass: 1.0,
        };
        let mut s = CompensatedSum::new();
        for (&tau, &j) in self.epochs.iter().zip(&self.jumps) {
            if j < epsilon {
                continue;
            }
            s.add(j);
            out.epochs.push(tau);
            out.jumps.push(j);
            out.running.push(s.value());
            if s.value() > stop_level {
                break;
            }
        }
        if out.is_empty() {
            return Err(Error::EmptyPath);
        }
        out.stop_mass = (-s.value()).exp();
        Ok(out)
    }

    /// CSV dump with columns `k, tau_k, j_k, S_k`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["k", "tau_k", "j_k", "S_k"])?;
        for k in 0..self.len() {
            wtr.write_record([
                (k + 1).to_string(),
                self.epochs[k].to_string(),
                self.jumps[k].to_string(),
                self.running[k].to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Simulates jumps of size `≥ epsilon` until `exp(-S) < stop_tol`.
pub fn simulate_path<R: Rng + ?Sized>(
    spec: &SubordinatorSpec,
    epsilon: f64,
    stop_tol: f64,
    rng: &mut R,
) -> Result<SubordinatorPath> {
    if !(epsilon > 0.0) {
        return Err(Error::TruncationRequired(epsilon));
    }
    if !(stop_tol > 0.0 && stop_tol < 1.0) {
        return Err(Error::DegenerateStop(stop_tol));
    }
    let rate = spec.tail_at(epsilon);
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::TruncationRequired(epsilon));
    }
    let ln_rate = rate.ln();
    let stop_level = -stop_tol.ln();

    // expected number of jumps is unknown in general; start modestly
    let mut epochs = Vec::with_capacity(1024);
    let mut jumps = Vec::with_capacity(1024);
    let mut running = Vec::with_capacity(1024);
    let mut tau = 0.0;
    let mut s = CompensatedSum::new();
    loop {
        let e: f64 = Exp1.sample(rng);
        tau += e / rate;
        let j = spec.sample_jump(epsilon, ln_rate, rng);
        s.add(j);
        epochs.push(tau);
        jumps.push(j);
        running.push(s.value());
        if s.value() > stop_level {
            break;
        }
    }
    let stop_mass = (-s.value()).exp();
    Ok(SubordinatorPath {
        spec: *spec,
        epochs,
        jumps,
        running,
        epsilon,
        stop_tol,
        stop_mass,
    })
}

/// Box frequencies `p_k = e^{-S(τ_{k-1})} - e^{-S(τ_k)}` in path order.
#[derive(Debug)]
pub struct FrequencyVector {
    pub probs: Vec<f64>,
    pub residual_mass: f64,
    sorted: OnceLock<Vec<f64>>,
}

impl Clone for FrequencyVector {
    fn clone(&self) -> Self {
        Self {
            probs: self.probs.clone(),
            residual_mass: self.residual_mass,
            sorted: OnceLock::new(),
        }
    }
}

impl FrequencyVector {
    pub fn new(probs: Vec<f64>, residual_mass: f64) -> Result<Self> {
        if probs.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::Domain("frequencies must be positive".into()));
        }
        if !(0.0..1.0).contains(&residual_mass) {
            return Err(Error::Domain(format!(
                "residual mass {residual_mass} outside [0, 1)"
            )));
        }
        Ok(Self {
            probs,
            residual_mass,
            sorted: OnceLock::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Descending copy, built on first use.
    pub fn sorted_view(&self) -> &[f64] {
        self.sorted.get_or_init(|| {
            let mut v = self.probs.clone();
            v.sort_unstable_by(|a, b| b.total_cmp(a));
            v
        })
    }

    pub fn total_mass(&self) -> f64 {
        let mut s = CompensatedSum::new();
        for &p in &self.probs {
            s.add(p);
        }
        s.add(self.residual_mass);
        s.value()
    }
}

pub fn frequencies(path: &SubordinatorPath) -> Result<FrequencyVector> {
    if path.is_empty() {
        return Err(Error::EmptyPath);
    }
    let mut probs = Vec::with_capacity(path.len());
    let mut prev = 0.0;
    for (&s, &j) in path.running.iter().zip(&path.jumps) {
        // e^{-S_{k-1}} (1 - e^{-j_k}) keeps full relative precision for tiny jumps
        let p = (-prev as f64).exp() * -(-j).exp_m1();
        probs.push(p);
        prev = s;
    }
    FrequencyVector::new(probs, path.stop_mass)
}

/// `ρ(x) = #{k : p_k ≥ x}`.
pub fn rho(freqs: &FrequencyVector, x: f64) -> Result<usize> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("ρ(x) needs x > 0, got {x}")));
    }
    Ok(freqs.sorted_view().partition_point(|&p| p >= x))
}

/// `I_α` estimate for one path plus its error budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSummary {
    pub exp_functional: f64,
    /// Expected contribution of the part of the path after the stop,
    /// `stop_mass^α / Φ_ε(α)`.
    pub bias_bound: f64,
    /// Upper estimate of `I_α(ε) - I_α(0)`: the ignored jumps below `ε`
    /// raise `S` by about `m_ε τ ± 3 sqrt(v_ε τ)`.
    pub truncation_bias: f64,
    /// `∫_0^ε y ν(dy)`
    pub ignored_mass_rate: f64,
    pub n_jumps: usize,
}

impl PathSummary {
    pub fn total_bias(&self) -> f64 {
        self.bias_bound + self.truncation_bias
    }
}

pub fn exp_functional(path: &SubordinatorPath, alpha: f64) -> Result<PathSummary> {
    if path.is_empty() {
        return Err(Error::EmptyPath);
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    let m = path.spec.small_jump_mean(path.epsilon);
    let v = path.spec.small_jump_second_moment(path.epsilon);

    let mut integral = CompensatedSum::new();
    let mut drift = CompensatedSum::new();
    integral.add(path.epochs[0]);
    drift.add(
        m * 0.5 * path.epochs[0].powi(2)
            + 3.0 * (v).sqrt() * (2.0 / 3.0) * path.epochs[0].powf(1.5),
    );
    for k in 0..path.len() - 1 {
        let (a, b) = (path.epochs[k], path.epochs[k + 1]);
        let w = (-alpha * path.running[k]).exp();
        integral.add((b - a) * w);
        drift.add(
            w * (m * 0.5 * (b * b - a * a)
                + 3.0 * v.sqrt() * (2.0 / 3.0) * (b.powf(1.5) - a.powf(1.5))),
        );
    }
    let phi = path.spec.laplace_exponent(path.epsilon, alpha);
    Ok(PathSummary {
        exp_functional: integral.value(),
        bias_bound: path.stop_mass.powf(alpha) / phi,
        truncation_bias: alpha * drift.value(),
        ignored_mass_rate: m,
        n_jumps: path.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use std::f64::consts::PI;

    fn path_from_jumps(jumps: &[f64], epochs: &[f64]) -> SubordinatorPath {
        let mut running = Vec::new();
        let mut s = 0.0;
        for &j in jumps {
            s += j;
            running.push(s);
        }
        SubordinatorPath {
            spec: SubordinatorSpec::stable(0.5).unwrap(),
            epochs: epochs.to_vec(),
            jumps: jumps.to_vec(),
            running,
            epsilon: 1e-3,
            stop_tol: 0.1,
            stop_mass: (-s).exp(),
        }
    }

    #[test]
    fn telescoping_examples() {
        let ln2 = 2f64.ln();
        let f = frequencies(&path_from_jumps(&[ln2], &[1.0])).unwrap();
        assert!((f.probs[0] - 0.5).abs() < 1e-15);
        assert!((f.residual_mass - 0.5).abs() < 1e-15);
        let f = frequencies(&path_from_jumps(&[ln2, ln2], &[1.0, 2.0])).unwrap();
        assert!((f.probs[0] - 0.5).abs() < 1e-15 && (f.probs[1] - 0.25).abs() < 1e-15);
        assert!((f.residual_mass - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rho_examples() {
        let f = FrequencyVector::new(vec![0.5, 0.25], 0.25).unwrap();
        assert_eq!(rho(&f, 0.3).unwrap(), 1);
        assert_eq!(rho(&f, 0.6).unwrap(), 0);
        assert_eq!(rho(&f, 0.25).unwrap(), 2);
        assert_eq!(rho(&f, 1e-9).unwrap(), 2);
        assert!(rho(&f, 0.0).is_err());
        assert!(rho(&f, -1.0).is_err());
    }

    #[test]
    fn simulation_argument_errors() {
        let spec = SubordinatorSpec::stable(0.5).unwrap();
        let mut r = rng::stream(1, 0, 0);
        assert!(matches!(
            simulate_path(&spec, 0.0, 0.1, &mut r),
            Err(Error::TruncationRequired(_))
        ));
        assert!(matches!(
            simulate_path(&spec, 1e-3, 1.0, &mut r),
            Err(Error::DegenerateStop(_))
        ));
        assert!(matches!(
            simulate_path(&spec, 1e-3, 0.0, &mut r),
            Err(Error::DegenerateStop(_))
        ));
        let empty = path_from_jumps(&[], &[]);
        assert!(matches!(frequencies(&empty), Err(Error::EmptyPath)));
        assert!(matches!(exp_functional(&empty, 0.5), Err(Error::EmptyPath)));
    }

    #[test]
    fn subordinator_rejects_invalid_tails() {
        assert!(SubordinatorSpec::new(
            RegVarTail::new(1.0, SlowlyVarying::one(), TailRole::LevyTail).unwrap()
        )
        .is_err());
        assert!(SubordinatorSpec::new(
            RegVarTail::new(0.5, SlowlyVarying::one(), TailRole::CountingFunction).unwrap()
        )
        .is_err());
        let bad = SlowlyVarying::log_power(-1.0, 1.0).unwrap();
        assert!(
            SubordinatorSpec::new(RegVarTail::new(0.5, bad, TailRole::LevyTail).unwrap()).is_err()
        );
    }

    #[test]
    fn stop_rule_is_first_passage() {
        let spec = SubordinatorSpec::stable(0.5).unwrap();
        let mut r = rng::stream(3, 0, 0);
        let path = simulate_path(&spec, 1e-4, 0.9, &mut r).unwrap();
        let level = -(0.9f64).ln();
        assert!((level - 0.105_360_5).abs() < 1e-6);
        assert!(*path.running.last().unwrap() > level);
        assert!(path.running[..path.len() - 1].iter().all(|&s| s <= level));
        assert!(path.stop_mass < 0.9);
    }

    #[test]
    fn path_invariants() {
        let spec = SubordinatorSpec::stable(0.5).unwrap();
        let eps = 1e-6;
        let path = simulate_path(&spec, eps, 1e-6, &mut rng::stream(5, 0, 0)).unwrap();
        assert!(path.jumps.iter().all(|&j| j >= eps));
        assert!(path.epochs.windows(2).all(|w| w[1] > w[0]));
        assert!(path.running.windows(2).all(|w| w[1] > w[0]));
        for k in 1..path.len() {
            let naive = path.running[k - 1] + path.jumps[k];
            assert!((path.running[k] - naive).abs() <= 4.0 * f64::EPSILON * path.running[k]);
        }
        assert_eq!(path.stop_mass, (-path.running.last().unwrap()).exp());
        let f = frequencies(&path).unwrap();
        assert!((f.total_mass() - 1.0).abs() < 1e-12);
        assert!(f.probs.iter().all(|&p| p > 0.0));
    }

    #[test]
    fn inter_arrival_mean_matches_rate() {
        let spec = SubordinatorSpec::stable(0.5).unwrap();
        let lambda = 50.0;
        // ν̄(ε) = ε^{-1/2}/√π = λ
        let eps = 1.0 / (lambda * PI.sqrt()).powi(2);
        assert!((spec.tail_at(eps) - lambda).abs() < 1e-9);
        let mut r = rng::stream(11, 0, 0);
        let mut gaps = Vec::new();
        while gaps.len() < 100_000 {
            let p = simulate_path(&spec, eps, 1e-12, &mut r).unwrap();
            let mut prev = 0.0;
            for &t in &p.epochs {
                gaps.push(t - prev);
                prev = t;
            }
        }
        gaps.truncate(100_000);
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        assert!((mean * lambda - 1.0).abs() < 0.01, "{}", mean * lambda);
    }

    #[test]
    fn stable_jumps_follow_inverse_transform() {
        // P(J > y) = (y/ε)^{-α}; check the empirical survival at a few levels
        let spec = SubordinatorSpec::stable(0.5).unwrap();
        let eps = 1e-3;
        let ln_rate = spec.tail_at(eps).ln();
        let mut r = rng::stream(12, 0, 0);
        let n = 200_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| spec.sample_jump(eps, ln_rate, &mut r))
            .collect();
        assert!(draws.iter().all(|&j| j >= eps));
        for &y in &[2e-3, 1e-2, 1e-1] {
            let emp = draws.iter().filter(|&&j| j > y).count() as f64 / n as f64;
            let exact = (y / eps).powf(-0.5);
            let se = (exact * (1.0 - exact) / n as f64).sqrt();
            assert!((emp - exact).abs() < 4.0 * se, "y = {y}: {emp} vs {exact}");
        }
    }

    #[test]
    fn inverse_tail_round_trip() {
        for spec in [
            SubordinatorSpec::stable(0.5).unwrap(),
            SubordinatorSpec::new(
                RegVarTail::new(
                    0.4,
                    SlowlyVarying::log_power(1.0, 1.0).unwrap(),
                    TailRole::LevyTail,
                )
                .unwrap(),
            )
            .unwrap(),
            SubordinatorSpec::new(
                RegVarTail::new(
                    0.7,
                    SlowlyVarying::log_power(-0.5, 2.0).unwrap(),
                    TailRole::LevyTail,
                )
                .unwrap(),
            )
            .unwrap(),
        ] {
            for k in -30..=10 {
                let y = 10f64.powf(k as f64 * 0.4);
                let back = spec.inverse_tail(spec.tail_at(y));
                assert!(((back - y) / y).abs() < 1e-10, "{spec:?} y = {y}: {back}");
            }
        }
    }

    #[test]
    fn small_jump_moments_closed_form() {
        let a: f64 = 0.5;
        let spec = SubordinatorSpec::stable(a).unwrap();
        let eps: f64 = 1e-6;
        let c = 1.0 / PI.sqrt();
        let m = c * eps.powf(1.0 - a) * a / (1.0 - a);
        let v = c * eps.powf(2.0 - a) * a / (2.0 - a);
        assert!((spec.small_jump_mean(eps) / m - 1.0).abs() < 1e-10);
        assert!((spec.small_jump_second_moment(eps) / v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn small_jump_mean_quadrature_for_log_factor() {
        // brute force ∫_0^ε y ν(dy) = ∫_0^ε (ν̄(y) - ν̄(ε)) dy on a log grid
        let spec = SubordinatorSpec::new(
            RegVarTail::new(
                0.5,
                SlowlyVarying::log_power(1.0, 1.0).unwrap(),
                TailRole::LevyTail,
            )
            .unwrap(),
        )
        .unwrap();
        let eps = 1e-4;
        let tail_eps = spec.tail_at(eps);
        let f = |u: f64| {
            let y = eps * (-u).exp();
            (spec.tail_at(y) - tail_eps) * y
        };
        let brute = crate::numeric::simpson(&f, 0.0, 80.0, 400_000);
        assert!((spec.small_jump_mean(eps) / brute - 1.0).abs() < 1e-6);
    }

    #[test]
    fn truncated_laplace_exponent_near_stable_value() {
        // Φ(s) = s^α for the stable preset; truncation removes ≈ s ∫_0^ε y ν(dy)
        let spec = SubordinatorSpec::stable(0.5).unwrap();
        for &eps in &[1e-4, 1e-8] {
            let phi = spec.laplace_exponent(eps, 0.5);
            let expected = 0.5f64.sqrt() - 0.5 * spec.small_jump_mean(eps);
            assert!(
                (phi - expected).abs() < 1e-6,
                "eps = {eps}: {phi} vs {expected}"
            );
        }
    }

    #[test]
    fn one_huge_jump_collapses_integrand() {
        let p = path_from_jumps(&[800.0], &[0.37]);
        let s = exp_functional(&p, 0.5).unwrap();
        assert!((s.exp_functional - 0.37).abs() < 1e-15);
        let p = path_from_jumps(&[800.0, 1.0], &[0.37, 5.0]);
        assert!((exp_functional(&p, 0.5).unwrap().exp_functional - 0.37).abs() < 1e-15);
    }

    #[test]
    fn coarsened_path_only_keeps_large_jumps() {
        let spec = SubordinatorSpec::stable(0.5).unwrap();
        let fine = simulate_path(&spec, 1e-7, 1e-12, &mut rng::stream(9, 0, 0)).unwrap();
        let coarse = fine.coarsen(1e-4, 1e-6).unwrap();
        assert!(coarse.jumps.iter().all(|&j| j >= 1e-4));
        assert!(coarse.len() < fine.len());
        assert!(coarse.stop_mass < 1e-6);
        assert!(fine.coarsen(1e-8, 1e-6).is_err());
    }

    #[test]
    fn path_csv_has_header_and_rows() {
        let p = path_from_jumps(&[0.5, 0.25], &[1.0, 2.0]);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,tau_k,j_k,S_k");
        assert_eq!(lines[2], "2,2,0.25,0.75");
    }
}
