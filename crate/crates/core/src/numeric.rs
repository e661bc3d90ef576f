//! Small numerical kernels shared by the analytic and simulation modules.

use crate::error::{Error, Result};

pub use statrs::function::gamma::ln_gamma;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln Γ(x) - [(x - 1/2) ln x - x + ln(2π)/2]`.
///
/// Uses the asymptotic series for `x >= 10`, where it is accurate to full
/// double precision and avoids the cancellation in `ln Γ(x) - x ln x` for
/// very large `x`.
pub fn stirling_remainder(x: f64) -> f64 {
    if x >= 10.0 {
        let r = 1.0 / x;
        let r2 = r * r;
        r * (1.0 / 12.0
            - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 / 1188.0))))
    } else {
        ln_gamma(x) - ((x - 0.5) * x.ln() - x + HALF_LN_2PI)
    }
}

/// `ln Γ(x + a) - ln Γ(x)` without catastrophic cancellation for large `x`.
pub fn ln_gamma_ratio(x: f64, a: f64) -> f64 {
    if x >= 10.0 && x + a >= 10.0 {
        let y = x + a;
        (y - 0.5) * y.ln() - (x - 0.5) * x.ln() - a + stirling_remainder(y) - stirling_remainder(x)
    } else {
        ln_gamma(x + a) - ln_gamma(x)
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Composite Simpson rule with `panels` (even) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut odd = CompensatedSum::new();
    let mut even = CompensatedSum::new();
    for i in 1..n {
        let v = f(a + h * i as f64);
        if i % 2 == 1 {
            odd.add(v);
        } else {
            even.add(v);
        }
    }
    h / 3.0 * (f(a) + f(b) + 4.0 * odd.value() + 2.0 * even.value())
}

/// Composite Simpson, doubling the panel count from `initial_panels` until two
/// successive estimates agree to `rel_tol` (relative) or `abs_floor`.
pub fn simpson_adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    initial_panels: usize,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<f64> {
    let mut panels = initial_panels.max(8);
    let mut prev = simpson(f, a, b, panels);
    for _ in 0..24 {
        panels *= 2;
        let next = simpson(f, a, b, panels);
        if !next.is_finite() {
            return Err(Error::Quadrature(format!(
                "non-finite estimate on [{a}, {b}]"
            )));
        }
        if (next - prev).abs() <= rel_tol * next.abs() || (next - prev).abs() <= abs_floor {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature(format!(
        "no convergence on [{a}, {b}] after {panels} panels"
    )))
}

/// Bisection for a root of a function that is positive at `lo` and negative at
/// `hi` (or vice versa). Stops when `|f| <= f_tol` or the bracket collapses.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, f_tol: f64) -> f64 {
    let f_lo = f(lo);
    let lo_positive = f_lo > 0.0;
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..400 {
        mid = 0.5 * (lo + hi);
        let v = f(mid);
        if v.abs() <= f_tol || mid <= lo || mid >= hi {
            return mid;
        }
        if (v > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    mid
}
