//! Numerical building blocks shared by the analytic and simulation engines.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use libm::erfc;
use libm::lgamma as ln_gamma;

use crate::error::{Error, Result};

/// Gaussian tail probability Q(x) = P(Z > x) for a standard normal Z.
pub fn q_function(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("q_function argument must be finite, got {x}")));
    }
    Ok(q(x))
}

/// Unchecked Q(x); infinities map to the limits 0 and 1.
#[inline]
pub(crate) fn q(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

pub fn ln_choose(n: f64, k: f64) -> f64 {
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

/// Binomial coefficient as a float. Exact for moderate arguments.
pub fn choose(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round_if_small()
}

trait RoundIfSmall {
    fn round_if_small(self) -> Self;
}

impl RoundIfSmall for f64 {
    fn round_if_small(self) -> f64 {
        if self < 9.0e15 {
            self.round()
        } else {
            self
        }
    }
}

pub fn ln_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// Tolerances for adaptive quadrature. Convergence means the summed error
/// estimate is below `max(rel_tol * |I|, abs_tol)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { rel_tol: 1e-8, abs_tol: 1e-13, max_subdivisions: 400 }
    }
}

impl QuadratureSpec {
    pub fn with_tol(rel_tol: f64, abs_tol: f64) -> Self {
        QuadratureSpec { rel_tol, abs_tol, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Panel> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kron * h;
    if !value.is_finite() {
        return Err(Error::Numerical(format!("non-finite integrand on [{a}, {b}]")));
    }
    let error = ((kron - gauss) * h).abs();
    Ok(Panel { a, b, value, error })
}

/// Globally adaptive Gauss-Kronrod (7/15) quadrature on a finite interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Integral> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("integration bounds must be finite, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let first = gk15(&f, a, b)?;
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut evaluations = 15;
    while error > spec.abs_tol.max(spec.rel_tol * value.abs()) {
        if heap.len() >= spec.max_subdivisions {
            return Err(Error::Convergence { estimate: value, error_bound: error });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval collapsed to machine resolution; accept what we have.
            heap.push(worst);
            break;
        }
        let left = gk15(&f, worst.a, mid)?;
        let right = gk15(&f, mid, worst.b)?;
        evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to shed accumulated cancellation from the running updates.
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    Ok(Integral { value, error, evaluations })
}

/// Integral over `[lower, inf)` via `t = lower + u / (1 - u)`.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    spec: &QuadratureSpec,
) -> Result<Integral> {
    if !lower.is_finite() {
        return Err(Error::Domain(format!("lower bound must be finite, got {lower}")));
    }
    let g = |u: f64| {
        let w = 1.0 - u;
        let t = lower + u / w;
        let v = f(t);
        if v == 0.0 {
            0.0
        } else {
            v / (w * w)
        }
    };
    integrate(g, 0.0, 1.0, spec)
}

/// Integral of `f` over `[lower, inf)` for positive-axis integrands, carried
/// out in `x = ln t`. With `lower == 0` the log axis is split at `ln(pivot)`;
/// `pivot` should sit near where the integrand's mass lives.
pub fn integrate_log_axis<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    pivot: f64,
    spec: &QuadratureSpec,
) -> Result<Integral> {
    if lower < 0.0 || !lower.is_finite() {
        return Err(Error::Domain(format!("log-axis lower bound must be finite and >= 0, got {lower}")));
    }
    let g = |x: f64| {
        let t = x.exp();
        if t == 0.0 || !t.is_finite() {
            return 0.0;
        }
        f(t) * t
    };
    if lower > 0.0 {
        let x0 = lower.ln();
        return integrate_semi_infinite(|y| g(x0 + y), 0.0, spec);
    }
    if !(pivot > 0.0 && pivot.is_finite()) {
        return Err(Error::Domain(format!("pivot must be positive and finite, got {pivot}")));
    }
    let c = pivot.ln();
    let half = QuadratureSpec { abs_tol: 0.5 * spec.abs_tol, ..*spec };
    let right = integrate_semi_infinite(|y| g(c + y), 0.0, &half)?;
    let left = integrate_semi_infinite(|y| g(c - y), 0.0, &half)?;
    Ok(Integral {
        value: right.value + left.value,
        error: right.error + left.error,
        evaluations: right.evaluations + left.evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum {
    pub sum: f64,
    pub last_term: f64,
    pub terms: usize,
}

/// Sums `term(0..n_terms)` and reports the last term as a truncation diagnostic.
pub fn truncated_series_sum<F: FnMut(usize) -> f64>(mut term: F, n_terms: usize) -> Result<SeriesSum> {
    let mut sum = 0.0;
    let mut last_term = 0.0;
    for n in 0..n_terms {
        let t = term(n);
        if !t.is_finite() {
            return Err(Error::Numerical(format!("series term {n} is not finite ({t})")));
        }
        sum += t;
        last_term = t;
    }
    Ok(SeriesSum { sum, last_term, terms: n_terms })
}

/// Empirical complementary CDF built from a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCcdf {
    sorted: Vec<f64>,
}

impl EmpiricalCcdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.iter().any(|s| s.is_nan()) {
            return Err(Error::Domain("empirical CCDF sample contains NaN".into()));
        }
        samples.sort_by(|a, b| a.total_cmp(b));
        Ok(EmpiricalCcdf { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Number of samples strictly above `threshold`.
    pub fn count_above(&self, threshold: f64) -> usize {
        self.sorted.len() - self.sorted.partition_point(|&s| s <= threshold)
    }

    /// P(X > threshold); zero for an empty sample.
    pub fn ccdf_at(&self, threshold: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.count_above(threshold) as f64 / self.sorted.len() as f64
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// z-score of a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;
