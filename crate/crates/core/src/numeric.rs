//! Numerical building blocks: adaptive Gauss-Kronrod quadrature, golden-section
//! search, and thin wrappers over the special functions used throughout.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Gauss-Kronrod 7/15 nodes on [0, 1] (symmetric, positive half incl. centre).
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
/// Gauss 7-point weights, attached to the odd Kronrod nodes (1, 3, 5, centre).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub abs_error: f64,
    pub intervals: usize,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(centre - dx) + f(centre + dx);
        kronrod += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
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
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive integration of `f` over `[a, b]`, splitting the segment
/// with the largest error estimate until the summed estimate drops below
/// `abs_tol`. Interior `breaks` (kinks, atoms of a CDF) seed the partition.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], abs_tol: f64) -> Result<Quadrature> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Numeric(format!("integration limits must be finite, got [{a}, {b}]")));
    }
    if b <= a {
        return Ok(Quadrature { value: 0.0, abs_error: 0.0, intervals: 0 });
    }
    let mut cuts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    cuts.extend(inner);
    cuts.push(b);

    let mut heap = BinaryHeap::new();
    let mut total_err = 0.0;
    for w in cuts.windows(2) {
        let (value, err) = gk15(&f, w[0], w[1]);
        total_err += err;
        heap.push(Segment { a: w[0], b: w[1], value, err });
    }

    while total_err > abs_tol && heap.len() < MAX_INTERVALS {
        let seg = heap.pop().expect("heap is nonempty");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // interval can no longer be split in floating point
            heap.push(seg);
            break;
        }
        let (v1, e1) = gk15(&f, seg.a, mid);
        let (v2, e2) = gk15(&f, mid, seg.b);
        total_err += e1 + e2 - seg.err;
        heap.push(Segment { a: seg.a, b: mid, value: v1, err: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, err: e2 });
    }

    // re-sum to shed accumulated cancellation from the running updates
    let (value, abs_error) = heap.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.err));
    if !value.is_finite() {
        return Err(Error::Numeric("integrand produced a non-finite value".into()));
    }
    if abs_error > abs_tol.max(1e-12 * value.abs()) * 100.0 {
        return Err(Error::Numeric(format!(
            "quadrature did not reach tolerance {abs_tol:e} (estimate {abs_error:e})"
        )));
    }
    Ok(Quadrature { value, abs_error, intervals: heap.len() })
}

/// Golden-section minimisation of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, x_tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > x_tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Gamma function, extended to negative non-integers by reflection.
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_lr(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    statrs::function::gamma::gamma_lr(a, x)
}

/// Regularized upper incomplete gamma Q(a, x), accurate in the far tail.
pub fn gamma_ur(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    statrs::function::gamma::gamma_ur(a, x)
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| 3.0 * x * x, 0.0, 2.0, &[], 1e-12).unwrap();
        assert!((q.value - 8.0).abs() < 1e-12);
    }

    #[test]
    fn kink_handled_with_breakpoint() {
        let f = |x: f64| (x - 1.0).abs();
        let q = integrate(f, 0.0, 3.0, &[1.0], 1e-12).unwrap();
        assert!((q.value - 2.5).abs() < 1e-12);
        let q = integrate(f, 0.0, 3.0, &[], 1e-10).unwrap();
        assert!((q.value - 2.5).abs() < 1e-9);
    }

    #[test]
    fn exponential_tail() {
        let q = integrate(|x: f64| (-x).exp(), 0.0, 40.0, &[], 1e-12).unwrap();
        assert!((q.value - (1.0 - (-40f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn empty_range_is_zero() {
        assert_eq!(integrate(|x| x, 1.0, 1.0, &[], 1e-8).unwrap().value, 0.0);
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, fx) = golden_section_min(|x| (x - 0.3).powi(2) + 1.0, -2.0, 5.0, 1e-9);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_reflection_values() {
        assert!((gamma(-0.5) + 2.0 * std::f64::consts::PI.sqrt()).abs() < 1e-10);
        assert!((gamma(-1.5) - 4.0 / 3.0 * std::f64::consts::PI.sqrt()).abs() < 1e-10);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }
}
