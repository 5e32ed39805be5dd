//! Numerical integral test for boundary accessibility.
//!
//! A boundary `r` is reached in finite time iff
//! `int_c^r S'(w) M(w) dw` converges, where `M(w) = |int_c^w m|` and
//! `m = 2 / (sigma^2 S')` is the speed density. The integral is truncated
//! at distance `eps` from `r` for `eps = 1e-2 .. 1e-8`; a convergent
//! integral shows geometrically shrinking increments between successive
//! truncations, a divergent one does not.

use super::log_scale_density;
use crate::diffusion::DiffusionSpec;
use crate::error::Result;
use crate::quadrature::{integrate, QuadratureSpec};

const EPSILONS: [f64; 7] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];
const ANCHOR: f64 = 0.5;
const CONVERGENT_RATIO: f64 = 0.5;
const DIVERGENT_RATIO: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryClass {
    Accessible,
    Inaccessible,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryReport {
    pub zero: BoundaryClass,
    pub one: BoundaryClass,
    /// Ratios of successive increments near 0 and near 1.
    pub ratios_zero: Vec<f64>,
    pub ratios_one: Vec<f64>,
}

pub fn boundary_classification(spec: &DiffusionSpec) -> Result<BoundaryReport> {
    let (zero, ratios_zero) = classify_end(spec, false)?;
    let (one, ratios_one) = classify_end(spec, true)?;
    Ok(BoundaryReport {
        zero,
        one,
        ratios_zero,
        ratios_one,
    })
}

fn classify_end(spec: &DiffusionSpec, upper: bool) -> Result<(BoundaryClass, Vec<f64>)> {
    let quad = QuadratureSpec::new(1e-14, 1e-11, 20_000)?;
    // point at distance d from the boundary being tested
    let at = |d: f64| if upper { 1.0 - d } else { d };
    let speed = |v: f64| 2.0 / (spec.variance(v) * log_scale_density(spec, v).exp());
    // M(w) = int between the anchor and w of m
    let big_m = |w: f64| -> f64 {
        let (lo, hi) = if w < ANCHOR { (w, ANCHOR) } else { (ANCHOR, w) };
        integrate(speed, lo, hi, &quad).unwrap_or(f64::NAN)
    };
    let integrand = |w: f64| log_scale_density(spec, w).exp() * big_m(w);

    let mut increments = Vec::with_capacity(EPSILONS.len() - 1);
    for pair in EPSILONS.windows(2) {
        let (p, q) = (at(pair[0]), at(pair[1]));
        let (lo, hi) = if p < q { (p, q) } else { (q, p) };
        increments.push(integrate(integrand, lo, hi, &quad)?);
    }
    let ratios: Vec<f64> = increments.windows(2).map(|w| w[1] / w[0]).collect();
    let last = *ratios.last().expect("several truncation levels");
    let class = if !last.is_finite() {
        BoundaryClass::Inconclusive
    } else if last <= CONVERGENT_RATIO {
        BoundaryClass::Accessible
    } else if last >= DIVERGENT_RATIO {
        BoundaryClass::Inaccessible
    } else {
        BoundaryClass::Inconclusive
    };
    Ok((class, ratios))
}
