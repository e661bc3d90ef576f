//! Karlin occupancy: fixed-n and Poissonized allocation of balls over a
//! frequency vector, and the count profile `r ↦ K_{n,r}`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::regvar::{RegVarTail, SlowlyVarying, TailRole};
use crate::subordinator::FrequencyVector;

/// Anything that can hand out box probabilities by index.
pub trait BoxFrequencies: Sync {
    fn n_boxes(&self) -> usize;
    /// Probability of box `k` (0-based).
    fn prob(&self, k: usize) -> f64;
    fn residual_mass(&self) -> f64;
    /// `Σ_{i≥k} p_i + residual` when it is available without a scan.
    fn mass_from(&self, _k: usize) -> Option<f64> {
        None
    }
}

impl BoxFrequencies for FrequencyVector {
    fn n_boxes(&self) -> usize {
        self.probs.len()
    }

    fn prob(&self, k: usize) -> f64 {
        self.probs[k]
    }

    fn residual_mass(&self) -> f64 {
        self.residual_mass
    }
}

impl<T: BoxFrequencies> BoxFrequencies for &T {
    fn n_boxes(&self) -> usize {
        (**self).n_boxes()
    }

    fn prob(&self, k: usize) -> f64 {
        (**self).prob(k)
    }

    fn residual_mass(&self) -> f64 {
        (**self).residual_mass()
    }

    fn mass_from(&self, k: usize) -> Option<f64> {
        (**self).mass_from(k)
    }
}

/// Plain probability list, mostly for tests and small examples.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedFrequencies {
    pub probs: Vec<f64>,
    pub residual: f64,
}

impl FixedFrequencies {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let total: f64 = probs.iter().sum();
        if probs.iter().any(|&p| !(p >= 0.0)) || total > 1.0 + 1e-12 {
            return Err(Error::Domain(
                "probabilities must be nonnegative and sum to at most 1".into(),
            ));
        }
        Ok(Self {
            probs,
            residual: (1.0 - total).max(0.0),
        })
    }
}

impl BoxFrequencies for FixedFrequencies {
    fn n_boxes(&self) -> usize {
        self.probs.len()
    }

    fn prob(&self, k: usize) -> f64 {
        self.probs[k]
    }

    fn residual_mass(&self) -> f64 {
        self.residual
    }
}

/// Power-law frequencies `p*_j = j^{-β}/Z`, `j = 1..=K`. Probabilities are
/// evaluated on demand so that very large `K` costs no memory.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawFrequencies {
    pub beta: f64,
    pub z: f64,
    pub k: usize,
    pub residual: f64,
    /// `Σ_{j≥m} j^{-β}` for `m < EM_START`
    head_tails: Vec<f64>,
}

const EM_START: usize = 1000;

/// `Σ_{j≥m} j^{-β}`: direct summation up to `EM_START`, Euler–Maclaurin after.
fn zeta_tail(beta: f64, m: usize) -> f64 {
    let em = |n: f64| {
        n.powf(1.0 - beta) / (beta - 1.0) + 0.5 * n.powf(-beta) + beta * n.powf(-beta - 1.0) / 12.0
            - beta * (beta + 1.0) * (beta + 2.0) * n.powf(-beta - 3.0) / 720.0
            + beta * (beta + 1.0) * (beta + 2.0) * (beta + 3.0) * (beta + 4.0) * n.powf(-beta - 5.0)
                / 30240.0
    };
    if m >= EM_START {
        return em(m as f64);
    }
    let mut s = CompensatedSum::new();
    // smallest terms first
    s.add(em(EM_START as f64));
    for j in (m..EM_START).rev() {
        s.add((j as f64).powf(-beta));
    }
    s.value()
}

impl PowerLawFrequencies {
    /// Retains exactly `k` boxes.
    pub fn with_boxes(beta: f64, k: usize) -> Result<Self> {
        if !(beta > 1.0) {
            return Err(Error::NonSummable(beta));
        }
        if k == 0 {
            return Err(Error::Domain("at least one box is required".into()));
        }
        let mut head_tails = vec![0.0; EM_START];
        let mut s = CompensatedSum::new();
        s.add(zeta_tail(beta, EM_START));
        for j in (1..EM_START).rev() {
            s.add((j as f64).powf(-beta));
            head_tails[j] = s.value();
        }
        head_tails[0] = head_tails[1];
        let z = head_tails[1];
        let mut out = Self {
            beta,
            z,
            k,
            residual: 0.0,
            head_tails,
        };
        out.residual = out.residual_after(k);
        Ok(out)
    }

    /// `Σ_{j>k} p*_j`.
    pub fn residual_after(&self, k: usize) -> f64 {
        let m = k + 1;
        let tail = if m < EM_START {
            self.head_tails[m]
        } else {
            zeta_tail(self.beta, m)
        };
        tail / self.z
    }

    /// Counting function `ρ*(x) ~ x^{-1/β} Z^{-1/β}` as a regularly varying tail.
    pub fn counting_tail(&self) -> RegVarTail {
        RegVarTail {
            alpha: 1.0 / self.beta,
            ell: SlowlyVarying::Constant(self.z.powf(-1.0 / self.beta)),
            role: TailRole::CountingFunction,
        }
    }

    /// `p*_j` for 1-based `j`.
    pub fn prob_at(&self, j: usize) -> f64 {
        (j as f64).powf(-self.beta) / self.z
    }

    pub fn probs(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.k).map(|j| self.prob_at(j))
    }
}

impl BoxFrequencies for PowerLawFrequencies {
    fn n_boxes(&self) -> usize {
        self.k
    }

    fn prob(&self, k: usize) -> f64 {
        self.prob_at(k + 1)
    }

    fn residual_mass(&self) -> f64 {
        self.residual
    }

    fn mass_from(&self, k: usize) -> Option<f64> {
        // boxes k.. (0-based) are j = k+1..; everything beyond K is residual
        Some(if k >= self.k {
            self.residual
        } else {
            self.residual_after(k)
        })
    }
}

/// Power-law frequencies with the fewest boxes leaving residual mass at most
/// `tail_tol`.
pub fn power_law_frequencies(beta: f64, tail_tol: f64) -> Result<PowerLawFrequencies> {
    if !(beta > 1.0) {
        return Err(Error::NonSummable(beta));
    }
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(Error::Domain(format!(
            "tail_tol must lie in (0, 1), got {tail_tol}"
        )));
    }
    let z = zeta_tail(beta, 1);
    let resid = |k: usize| zeta_tail(beta, k + 1) / z;
    let mut hi = 1usize;
    while resid(hi) > tail_tol {
        hi = hi
            .checked_mul(2)
            .ok_or_else(|| Error::Domain("tail_tol too small".into()))?;
    }
    let mut lo = hi / 2;
    if lo == 0 || resid(lo) <= tail_tol {
        lo = 0;
    }
    // invariant: resid(lo) > tail_tol (or lo = 0), resid(hi) <= tail_tol
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if resid(mid) <= tail_tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    PowerLawFrequencies::with_boxes(beta, hi)
}

/// `ρ*(x) = #{j ≤ K : p*_j ≥ x}`.
pub fn rho_star(freqs: &PowerLawFrequencies, x: f64) -> Result<usize> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("ρ*(x) needs x > 0, got {x}")));
    }
    let guess = (freqs.z * x).powf(-1.0 / freqs.beta).floor();
    let mut j = if guess >= freqs.k as f64 {
        freqs.k
    } else {
        guess as usize
    };
    // the closed form can be off by one near box boundaries
    while j < freqs.k && freqs.prob_at(j + 1) >= x {
        j += 1;
    }
    while j > 0 && freqs.prob_at(j) < x {
        j -= 1;
    }
    Ok(j)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AllocationMode {
    FixedN(u64),
    Poissonized(f64),
}

impl fmt::Display for AllocationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AllocationMode::FixedN(n) => write!(f, "mode=fixed-n,n={n}"),
            AllocationMode::Poissonized(t) => write!(f, "mode=poissonized,t={t}"),
        }
    }
}

/// Per-box ball counts from one allocation. Boxes past the last occupied
/// one are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyCounts {
    pub counts: Vec<u64>,
    pub overflow: u64,
    pub mode: AllocationMode,
}

impl OccupancyCounts {
    /// `Z_k` for 0-based `k`.
    pub fn count(&self, k: usize) -> u64 {
        self.counts.get(k).copied().unwrap_or(0)
    }
}

/// Multinomial allocation of `n` balls over the boxes plus an overflow cell
/// for the residual mass, by sequential conditional binomials.
///
/// With `overflow_budget = Some(b)`, an expected overflow `residual·n > b`
/// is an error; with `None` it is only logged.
pub fn allocate_fixed<F: BoxFrequencies, R: Rng + ?Sized>(
    freqs: &F,
    n: u64,
    overflow_budget: Option<f64>,
    rng: &mut R,
) -> Result<OccupancyCounts> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    let expected = freqs.residual_mass() * n as f64;
    match overflow_budget {
        Some(budget) if expected > budget => {
            return Err(Error::OverflowBudget { expected, budget });
        }
        None if expected > 0.1 => {
            log::warn!("expected overflow {expected:.3} balls");
        }
        _ => {}
    }
    let k = freqs.n_boxes();
    // suffix sums keep the conditional probabilities accurate deep in the tail
    let suffix: Option<Vec<f64>> = if freqs.mass_from(0).is_some() {
        None
    } else {
        let mut v = vec![0.0; k + 1];
        let mut acc = CompensatedSum::new();
        acc.add(freqs.residual_mass());
        v[k] = acc.value();
        for i in (0..k).rev() {
            acc.add(freqs.prob(i));
            v[i] = acc.value();
        }
        Some(v)
    };
    let mut counts = Vec::new();
    let mut left = n;
    for i in 0..k {
        if left == 0 {
            break;
        }
        let p = freqs.prob(i);
        let mass = match &suffix {
            Some(v) => v[i],
            None => freqs.mass_from(i).unwrap_or(0.0),
        };
        let q = if mass > 0.0 { (p / mass).min(1.0) } else { 1.0 };
        let z = if q >= 1.0 {
            left
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(left, q).expect("valid binomial").sample(rng)
        };
        counts.push(z);
        left -= z;
    }
    trim_trailing_zeros(&mut counts);
    Ok(OccupancyCounts {
        counts,
        overflow: left,
        mode: AllocationMode::FixedN(n),
    })
}

fn trim_trailing_zeros(counts: &mut Vec<u64>) {
    let len = counts.iter().rposition(|&z| z > 0).map_or(0, |i| i + 1);
    counts.truncate(len);
}

fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let x: f64 = Poisson::new(lambda)
        .expect("finite positive mean")
        .sample(rng);
    x as u64
}

/// Independent `Poisson(p_k t)` counts; the overflow cell is drawn from
/// `Poisson(residual·t)` and only reported.
pub fn allocate_poissonized<F: BoxFrequencies, R: Rng + ?Sized>(
    freqs: &F,
    t: f64,
    rng: &mut R,
) -> Result<OccupancyCounts> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    let mut counts: Vec<u64> = (0..freqs.n_boxes())
        .map(|i| poisson(freqs.prob(i) * t, rng))
        .collect();
    trim_trailing_zeros(&mut counts);
    let overflow = poisson(freqs.residual_mass() * t, rng);
    Ok(OccupancyCounts {
        counts,
        overflow,
        mode: AllocationMode::Poissonized(t),
    })
}

/// `r ↦ K_{n,r}` for the occupied boxes; the overflow cell is kept apart.
#[derive(Debug, Clone, PartialEq)]
pub struct CountProfile {
    pub by_count: BTreeMap<u64, u64>,
    pub total_occupied: u64,
    pub overflow: u64,
    pub mode: AllocationMode,
}

impl CountProfile {
    /// `K_{n,r}`.
    pub fn exactly(&self, r: u64) -> u64 {
        self.by_count.get(&r).copied().unwrap_or(0)
    }

    /// `K_{n,≥r}`.
    pub fn at_least(&self, r: u64) -> u64 {
        self.by_count.range(r.max(1)..).map(|(_, &v)| v).sum()
    }

    /// `Σ_r r·K_{n,r}`.
    pub fn balls(&self) -> u64 {
        self.by_count.iter().map(|(&r, &v)| r * v).sum()
    }

    /// CSV with a `#` metadata line and columns `r, K_n_r`.
    pub fn write_csv<W: Write>(&self, mut w: W, seed: u64) -> Result<()> {
        writeln!(w, "# {},overflow={},seed={seed}", self.mode, self.overflow)?;
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["r", "K_n_r"])?;
        for (r, v) in &self.by_count {
            wtr.write_record([r.to_string(), v.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn count_profile(counts: &OccupancyCounts) -> CountProfile {
    let mut by_count = BTreeMap::new();
    let mut total = 0;
    for &z in counts.counts.iter().filter(|&&z| z > 0) {
        *by_count.entry(z).or_insert(0) += 1;
        total += 1;
    }
    CountProfile {
        by_count,
        total_occupied: total,
        overflow: counts.overflow,
        mode: counts.mode,
    }
}
