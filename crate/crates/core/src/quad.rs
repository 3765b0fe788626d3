//! Adaptive quadrature.
//!
//! Globally adaptive Gauss–Kronrod (7/15) bisection plus two substitutions:
//! a logarithmic one for integrands with an integrable singularity at the
//! origin and a windowed one for half-infinite ranges.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

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
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SEGMENTS: usize = 4000;

/// Result of a quadrature: value and estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Quadrature {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Quadrature {
        value: kron * half,
        error: ((kron - gauss) * half).abs(),
    }
}

struct Segment {
    a: f64,
    b: f64,
    q: Quadrature,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.q.error == other.q.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.q.error.total_cmp(&other.q.error)
    }
}

/// Adaptive integration of `f` over the finite interval `[a, b]`.
///
/// Stops when the summed error estimate falls below `max(tol·|I|, 1e-300)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<Quadrature> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("finite bounds required, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0 });
    }
    if b < a {
        let q = integrate(f, b, a, tol)?;
        return Ok(Quadrature { value: -q.value, error: q.error });
    }
    let first = kronrod15(&f, a, b);
    if !first.value.is_finite() {
        return Err(Error::Numerical(format!("non-finite integrand on [{a}, {b}]")));
    }
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, q: first });
    let mut total = first.value;
    let mut err = first.error;
    let mut segments = 1;
    while err > (tol * total.abs()).max(1e-300) && segments < MAX_SEGMENTS {
        let worst = match heap.pop() {
            Some(s) => s,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine precision
            heap.push(worst);
            break;
        }
        let left = kronrod15(&f, worst.a, mid);
        let right = kronrod15(&f, mid, worst.b);
        total += left.value + right.value - worst.q.value;
        err += left.error + right.error - worst.q.error;
        heap.push(Segment { a: worst.a, b: mid, q: left });
        heap.push(Segment { a: mid, b: worst.b, q: right });
        segments += 1;
    }
    // re-sum to shed accumulated cancellation from the running updates
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.q.value, e + s.q.error));
    if !value.is_finite() {
        return Err(Error::Numerical("quadrature diverged".into()));
    }
    Ok(Quadrature { value, error })
}

/// Sums window integrals `∫_{u_k}^{u_k + w}` until the windows become negligible,
/// extrapolating the remainder geometrically.
fn windowed<F: Fn(f64) -> f64>(g: F, start: f64, width: f64, stop: f64, tol: f64) -> Result<Quadrature> {
    let mut lo = start;
    let mut value = 0.0;
    let mut error = 0.0;
    let mut prev: Option<f64> = None;
    let mut last = 0.0;
    let mut ratio = f64::NAN;
    while lo < stop {
        let hi = (lo + width).min(stop);
        let q = integrate(&g, lo, hi, tol * 0.1)?;
        value += q.value;
        error += q.error;
        lo = hi;
        last = q.value;
        if q.value == 0.0 && value == 0.0 {
            return Ok(Quadrature { value, error });
        }
        if q.value.abs() <= tol * value.abs() * 1e-2 {
            return Ok(Quadrature { value, error });
        }
        if let Some(p) = prev {
            ratio = q.value / p;
            if q.value.abs() <= tol * value.abs() && ratio > 0.0 && ratio < 0.9 {
                value += q.value * ratio / (1.0 - ratio);
                return Ok(Quadrature { value, error });
            }
        }
        prev = Some(q.value);
    }
    // range exhausted: extrapolate the geometric decay of the windows
    if ratio > 0.0 && ratio < 1.0 {
        let rest = last * ratio / (1.0 - ratio);
        value += rest;
        error += rest.abs() * 1e-3;
    }
    Ok(Quadrature { value, error })
}

/// `∫_0^c f(s) ds` for an `f` that may have an integrable singularity at 0.
///
/// Uses `s = e^{−u}`, so the integrand becomes `f(e^{−u})·e^{−u}` on `[−ln c, ∞)`.
pub fn integrate_from_zero<F: Fn(f64) -> f64>(f: F, c: f64, tol: f64) -> Result<Quadrature> {
    if !(c > 0.0) {
        return Err(Error::Domain(format!("upper bound must be positive, got {c}")));
    }
    let g = |u: f64| {
        let s = (-u).exp();
        if s == 0.0 {
            0.0
        } else {
            f(s) * s
        }
    };
    windowed(g, -c.ln(), 24.0, 744.0, tol)
}

/// `∫_a^∞ f(x) dx` for a decaying `f`, integrating windows of growing width.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> Result<Quadrature> {
    let scale = a.abs().max(1.0);
    let mut lo = a;
    let mut width = scale;
    let mut value = 0.0;
    let mut error = 0.0;
    for _ in 0..200 {
        let q = integrate(&f, lo, lo + width, tol * 0.1)?;
        value += q.value;
        error += q.error;
        lo += width;
        width *= 2.0;
        if q.value.abs() <= tol * value.abs() * 1e-3 || (q.value == 0.0 && value != 0.0) {
            return Ok(Quadrature { value, error });
        }
    }
    Err(Error::Numerical("integral over [a, ∞) did not settle".into()))
}

/// `λ ∫_0^∞ e^{−λx} f(x) dx`, with `f` allowed to be singular at the origin.
pub fn laplace_weighted<F: Fn(f64) -> f64>(f: F, lambda: f64, tol: f64) -> Result<Quadrature> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("λ must be positive, got {lambda}")));
    }
    // x = u/λ turns the integral into ∫ e^{−u} f(u/λ) du
    let g = |u: f64| (-u).exp() * f(u / lambda);
    let head = integrate_from_zero(&g, 1.0, tol)?;
    let tail = integrate(&g, 1.0, 60.0, tol)?;
    Ok(Quadrature {
        value: head.value + tail.value,
        error: head.error + tail.error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| 3.0 * x * x + 1.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((q.value - 10.0).abs() < 1e-13);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let q = integrate(|x: f64| x.exp(), 1.0, 0.0, 1e-13).unwrap();
        assert!((q.value + (1f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn singular_power_at_origin() {
        for &a in &[0.1, 0.5, 0.9] {
            let q = integrate_from_zero(|s: f64| s.powf(-a), 0.3, 1e-12).unwrap();
            let exact = 0.3f64.powf(1.0 - a) / (1.0 - a);
            assert!((q.value / exact - 1.0).abs() < 1e-9, "a = {a}: {} vs {exact}", q.value);
        }
    }

    #[test]
    fn log_singularity() {
        let q = integrate_from_zero(|s: f64| -s.ln(), 1.0, 1e-12).unwrap();
        assert!((q.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn half_line() {
        let q = integrate_to_infinity(|x: f64| (-x * x).exp(), 0.0, 1e-12).unwrap();
        assert!((q.value - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-11);
    }

    #[test]
    fn laplace_of_power() {
        // λ∫ e^{−λx} x^{−1/2} dx = √(πλ)
        for &l in &[0.1, 1.0, 100.0] {
            let q = laplace_weighted(|x: f64| x.powf(-0.5), l, 1e-12).unwrap();
            let exact = (std::f64::consts::PI * l).sqrt();
            assert!((q.value / exact - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn step_discontinuity() {
        let q = integrate(|x| if x < 0.37 { 2.0 } else { 0.0 }, 0.0, 1.0, 1e-12).unwrap();
        assert!((q.value - 0.74).abs() < 1e-10);
    }
}
