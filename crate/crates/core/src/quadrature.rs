//! Globally adaptive Gauss–Kronrod (7/15) quadrature with interval bisection.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{invalid, Error, Result};

/// Tolerances for [`adaptive_quadrature`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 10_000,
        }
    }
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let spec = QuadratureSpec {
            abs_tol,
            rel_tol,
            max_subdivisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn tight() -> Self {
        QuadratureSpec {
            abs_tol: 1e-13,
            rel_tol: 1e-13,
            max_subdivisions: 10_000,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(invalid("quadrature tolerances must be positive"));
        }
        if self.max_subdivisions == 0 {
            return Err(invalid("max_subdivisions must be positive"));
        }
        Ok(())
    }
}

/// Value and error estimate of a converged integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub err_estimate: f64,
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

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
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
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
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
        self.err.total_cmp(&other.err)
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Option<Panel> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut finite = fc.is_finite();
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        finite &= s.is_finite();
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    if !finite {
        return None;
    }
    Some(Panel {
        a,
        b,
        value: kronrod * h,
        err: ((kronrod - gauss) * h).abs(),
    })
}

/// Integrates `f` over `[a, b]`.
///
/// Stops once the summed error estimate is below
/// `max(abs_tol, rel_tol * |value|)`. Fails with
/// [`Error::QuadratureFailure`] when the subdivision budget is exhausted,
/// an interval can no longer be bisected in floating point, or `f`
/// returns a non-finite value at a node.
pub fn adaptive_quadrature<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Integral>
where
    F: Fn(f64) -> f64,
{
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(invalid("integration limits must be finite"));
    }
    if a > b {
        return Err(invalid(format!("lower limit {a} exceeds upper limit {b}")));
    }
    if a == b {
        return Ok(Integral {
            value: 0.0,
            err_estimate: 0.0,
        });
    }

    let fail = |value: f64, err: f64, n: usize| Error::QuadratureFailure {
        partial: value,
        err_estimate: err,
        subdivisions: n,
    };

    let first = gauss_kronrod(&f, a, b).ok_or_else(|| fail(f64::NAN, f64::INFINITY, 1))?;
    let mut value = first.value;
    let mut err = first.err;
    let mut heap = BinaryHeap::new();
    heap.push(first);

    loop {
        if err <= spec.abs_tol.max(spec.rel_tol * value.abs()) {
            break;
        }
        if heap.len() >= spec.max_subdivisions {
            return Err(fail(value, err, heap.len()));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(fail(value, err, heap.len() + 1));
        }
        let left = gauss_kronrod(&f, worst.a, mid);
        let right = gauss_kronrod(&f, mid, worst.b);
        let (left, right) = match (left, right) {
            (Some(l), Some(r)) => (l, r),
            _ => return Err(fail(value, err, heap.len() + 1)),
        };
        value += left.value + right.value - worst.value;
        err += left.err + right.err - worst.err;
        heap.push(left);
        heap.push(right);
        // refresh the running sums now and then to stop rounding drift
        if heap.len() % 256 == 0 {
            value = heap.iter().map(|p| p.value).sum();
            err = heap.iter().map(|p| p.err).sum();
        }
    }

    let value = heap.iter().map(|p| p.value).sum();
    let err_estimate = heap.iter().map(|p| p.err).sum();
    Ok(Integral {
        value,
        err_estimate,
    })
}

/// Convenience wrapper returning only the value.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    adaptive_quadrature(f, a, b, spec).map(|r| r.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant() {
        let r = adaptive_quadrature(|_| 1.0, 0.0, 1.0, &QuadratureSpec::default()).unwrap();
        assert!((r.value - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn exponential_matches_antiderivative() {
        let exact = (1.0 - (-0.8f64).exp()) / 0.8;
        let r = adaptive_quadrature(|u| (-0.8 * u).exp(), 0.0, 1.0, &QuadratureSpec::default())
            .unwrap();
        assert!((r.value - exact).abs() <= 1e-10);
        assert!((r.value - 0.688_339).abs() < 1e-6);
    }

    #[test]
    fn integrable_endpoint_singularity_converges() {
        let b = 0.999_999;
        let exact = 2.0 * (1.0 - (1.0f64 - b).sqrt());
        let r = adaptive_quadrature(|u| (1.0 - u).powf(-0.5), 0.0, b, &QuadratureSpec::default())
            .unwrap();
        assert!((r.value - exact).abs() < 1e-9, "{} vs {}", r.value, exact);
    }

    #[test]
    fn non_integrable_singularity_fails() {
        let out = adaptive_quadrature(|u| 1.0 / (1.0 - u), 0.0, 1.0, &QuadratureSpec::default());
        match out {
            Err(Error::QuadratureFailure { partial, .. }) => assert!(partial > 10.0),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn subdivision_budget_is_enforced() {
        let spec = QuadratureSpec::new(1e-14, 1e-14, 3).unwrap();
        let out = adaptive_quadrature(|u: f64| (50.0 * u).sin().abs(), 0.0, 10.0, &spec);
        assert!(matches!(out, Err(Error::QuadratureFailure { subdivisions: 3, .. })));
    }

    #[test]
    fn rejects_bad_arguments() {
        let s = QuadratureSpec::default();
        assert!(adaptive_quadrature(|u| u, 1.0, 0.0, &s).is_err());
        assert!(QuadratureSpec::new(0.0, 1e-8, 10).is_err());
        assert_eq!(adaptive_quadrature(|u| u, 0.5, 0.5, &s).unwrap().value, 0.0);
    }

    #[test]
    fn log_singularity() {
        // ∫_0^1 ln(u) du = -1
        let r = adaptive_quadrature(|u: f64| u.ln(), 0.0, 1.0, &QuadratureSpec::default()).unwrap();
        assert!((r.value + 1.0).abs() < 1e-9);
    }
}
