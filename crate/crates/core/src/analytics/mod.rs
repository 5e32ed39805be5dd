//! Scale functions, fixation probabilities, expected absorption times,
//! boundary classification and the Sibuya law.
//!
//! Fixation entry points take `y`, the initial frequency of the
//! inefficient type; the efficient frequency is `x = 1 - y`. The scale
//! density of every variant is
//! `S'(u) = exp(-int_0^u 2 mu / sigma^2) = (1 - kappa u)^(-2 alpha / kappa) exp(-2 D(u))`
//! where `D` is the antiderivative of the efficiency part of the drift
//! factor divided by `1 - kappa u`.

mod boundary;
mod sibuya;

pub use boundary::{boundary_classification, BoundaryClass, BoundaryReport};
pub use sibuya::{sibuya_pmf, x_infinity_law, SibuyaDist};

use crate::diffusion::{DiffusionSpec, M2Case, Variant};
use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate, QuadratureSpec};
use crate::rational::Rational;

/// Width of the band around `kappa = 2 alpha` treated as the logarithmic branch.
pub const BRANCH_TOL: f64 = 1e-12;

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(invalid(format!("{name} = {v} outside [0, 1]")));
    }
    Ok(())
}

/// `ln(1 - kappa u) / kappa`, continuous at `kappa = 0`.
fn log_ratio(kappa: f64, u: f64) -> f64 {
    if kappa == 0.0 {
        -u
    } else {
        (-kappa * u).ln_1p() / kappa
    }
}

/// `ln S'(u)` for any variant.
pub fn log_scale_density(spec: &DiffusionSpec, u: f64) -> f64 {
    let k = spec.kappa;
    let selection = -2.0 * spec.alpha * log_ratio(k, u);
    let efficiency = match &spec.variant {
        Variant::M1 => 0.0,
        Variant::M2(d) => match d.case_tag {
            M2Case::CaseI => k * u,
            M2Case::CaseII => {
                let mut sum = 0.0;
                let mut pow = u.powi(d.caseii_sum_from as i32 + 1);
                for r in d.caseii_sum_from..d.b {
                    sum += u - pow / (r + 1) as f64;
                    pow *= u;
                }
                (1.0 - k) * sum
            }
            M2Case::CaseIII => {
                let mut sum = 0.0;
                let mut pow = u * u;
                for (i, ci) in d.c.iter().enumerate() {
                    sum += ci * (u - pow / (i + 2) as f64);
                    pow *= u;
                }
                sum
            }
        },
    };
    selection - 2.0 * efficiency
}

/// Normalised M1 scale function, `S(0) = 0`, `S(1) = 1`.
pub fn scale_m1(kappa: f64, alpha: f64, x: f64) -> Result<f64> {
    check_unit("kappa", kappa)?;
    check_unit("x", x)?;
    if !(alpha >= 0.0) {
        return Err(invalid(format!("alpha = {alpha} must be non-negative")));
    }
    if alpha == 0.0 {
        return Ok(x);
    }
    if kappa == 0.0 {
        // S'(u) = exp(2 alpha u)
        return Ok((2.0 * alpha * x).exp_m1() / (2.0 * alpha).exp_m1());
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let p = 1.0 - 2.0 * alpha / kappa;
    if kappa >= 1.0 && p <= 0.0 {
        // S(1) is infinite: the upper boundary carries no mass
        return Ok(0.0);
    }
    let lx = (-kappa * x).ln_1p();
    let l1 = if kappa >= 1.0 { f64::NEG_INFINITY } else { (-kappa).ln_1p() };
    if (kappa - 2.0 * alpha).abs() < BRANCH_TOL {
        return Ok(lx / l1);
    }
    // (1 - (1 - kappa x)^p) / (1 - (1 - kappa)^p)
    Ok((p * lx).exp_m1() / (p * l1).exp_m1())
}

/// M1 probability that the inefficient type fixes from frequency `y`.
pub fn fixation_prob_inefficient_m1(kappa: f64, alpha: f64, y: f64) -> Result<f64> {
    check_unit("y", y)?;
    if kappa >= 1.0 {
        return Err(invalid(
            "kappa = 1 has an inaccessible upper boundary; use x_infinity_law",
        ));
    }
    Ok(1.0 - scale_m1(kappa, alpha, 1.0 - y)?)
}

/// Closed-form expected absorption time of the neutral M1 diffusion.
pub fn expected_fixation_time_m1_neutral(kappa: f64, x: f64) -> Result<f64> {
    check_unit("x", x)?;
    check_unit("kappa", kappa)?;
    if kappa >= 1.0 {
        return Err(Error::InfiniteExpectation);
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    let upper = 2.0 * x * ((1.0 - kappa * x).ln() - x.ln() - (1.0 - kappa).ln());
    let lower = 2.0 * (1.0 - x) / (1.0 - kappa) * ((1.0 - kappa * x).ln() - (1.0 - x).ln());
    Ok(upper + lower)
}

/// Green's function of the neutral M1 diffusion.
pub fn greens_m1_neutral(kappa: f64, x: f64, u: f64) -> Result<f64> {
    check_unit("kappa", kappa)?;
    if !(x > 0.0 && x < 1.0 && u > 0.0 && u < 1.0) {
        return Err(invalid(format!("need 0 < x, u < 1, got x = {x}, u = {u}")));
    }
    Ok(if u > x {
        2.0 * x / (u * (1.0 - kappa * u))
    } else {
        2.0 * (1.0 - x) / ((1.0 - u) * (1.0 - kappa * u))
    })
}

/// Closed-form scale density of a variant with integrals of it by
/// quadrature. Requires `kappa < 1`.
#[derive(Debug, Clone)]
pub struct ScaleFunction<'a> {
    spec: &'a DiffusionSpec,
    quad: QuadratureSpec,
    total: f64,
}

impl<'a> ScaleFunction<'a> {
    pub fn new(spec: &'a DiffusionSpec, quad: QuadratureSpec) -> Result<Self> {
        if spec.kappa >= 1.0 {
            return Err(invalid("scale integrals by quadrature need kappa < 1"));
        }
        let mut s = ScaleFunction {
            spec,
            quad,
            total: 0.0,
        };
        s.total = s.raw(1.0)?;
        Ok(s)
    }

    pub fn density(&self, u: f64) -> f64 {
        log_scale_density(self.spec, u).exp()
    }

    /// `S(x) - S(0)`.
    pub fn raw(&self, x: f64) -> Result<f64> {
        integrate(|u| self.density(u), 0.0, x, &self.quad)
    }

    /// `S(1) - S(x)`.
    pub fn tail(&self, x: f64) -> Result<f64> {
        integrate(|u| self.density(u), x, 1.0, &self.quad)
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn normalized(&self, x: f64) -> Result<f64> {
        check_unit("x", x)?;
        if x <= 0.5 {
            Ok(self.raw(x)? / self.total)
        } else {
            Ok(1.0 - self.tail(x)? / self.total)
        }
    }

    /// Probability that the inefficient type fixes from frequency `y`.
    pub fn fixation_prob_inefficient(&self, y: f64) -> Result<f64> {
        check_unit("y", y)?;
        Ok(self.tail(1.0 - y)? / self.total)
    }

    /// Green's function `G(x, u)`.
    pub fn greens(&self, x: f64, u: f64) -> Result<f64> {
        if !(x > 0.0 && x < 1.0 && u > 0.0 && u < 1.0) {
            return Err(invalid(format!("need 0 < x, u < 1, got x = {x}, u = {u}")));
        }
        let denom = self.total * self.density(u) * self.spec.variance(u);
        if u > x {
            Ok(2.0 * self.raw(x)? * self.tail(u)? / denom)
        } else {
            Ok(2.0 * self.tail(x)? * self.raw(u)? / denom)
        }
    }
}

/// Expected absorption time `int_0^1 G(x, u) du`.
pub fn expected_fixation_time_numeric(
    spec: &DiffusionSpec,
    x: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    check_unit("x", x)?;
    if spec.kappa >= 1.0 {
        return Err(Error::InfiniteExpectation);
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    let inner = QuadratureSpec::tight();
    let scale = ScaleFunction::new(spec, inner)?;
    let (sx, tx) = (scale.raw(x)?, scale.tail(x)?);
    let below = integrate(
        |u| 2.0 * tx * scale.raw(u).unwrap_or(f64::NAN) / (scale.total * scale.density(u) * spec.variance(u)),
        0.0,
        x,
        quad,
    )?;
    let above = integrate(
        |u| 2.0 * sx * scale.tail(u).unwrap_or(f64::NAN) / (scale.total * scale.density(u) * spec.variance(u)),
        x,
        1.0,
        quad,
    )?;
    Ok(below + above)
}

/// Rule-M2 inefficient fixation probability for `kappa < 1/2`.
pub fn fixation_prob_inefficient_m2_case_i(
    kappa: Rational,
    alpha: f64,
    y: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    check_unit("y", y)?;
    if kappa.numer() <= 0 || kappa >= Rational::new(1, 2)? {
        return Err(invalid(format!("kappa = {kappa} must lie in (0, 1/2)")));
    }
    if !(alpha >= 0.0) {
        return Err(invalid(format!("alpha = {alpha} must be non-negative")));
    }
    let k = kappa.to_f64();
    let f = |u: f64| (-2.0 * k * u - 2.0 * alpha / k * (-k * u).ln_1p()).exp();
    let num = integrate(f, 1.0 - y, 1.0, quad)?;
    let den = integrate(f, 0.0, 1.0, quad)?;
    Ok(num / den)
}

/// `ln S'(u)` from nested quadrature of `2 mu / sigma^2`, independent of
/// the closed forms.
fn log_scale_density_numeric(spec: &DiffusionSpec, u: f64, inner: &QuadratureSpec) -> Result<f64> {
    let k = spec.kappa;
    let i = integrate(|v| 2.0 * spec.selection_factor(v) / (1.0 - k * v), 0.0, u, inner)?;
    Ok(-i)
}

/// Normalised scale function by nested quadrature.
pub fn scale_numeric(spec: &DiffusionSpec, x: f64, quad: &QuadratureSpec) -> Result<f64> {
    check_unit("x", x)?;
    let (low, high) = scale_numeric_parts(spec, x, quad)?;
    Ok(if x <= 0.5 { low / (low + high) } else { 1.0 - high / (low + high) })
}

/// `(S(x) - S(0), S(1) - S(x))` by nested quadrature.
fn scale_numeric_parts(spec: &DiffusionSpec, x: f64, quad: &QuadratureSpec) -> Result<(f64, f64)> {
    if spec.kappa >= 1.0 {
        return Err(invalid("scale_numeric needs kappa < 1"));
    }
    let inner = QuadratureSpec::tight();
    let density = |u: f64| match log_scale_density_numeric(spec, u, &inner) {
        Ok(l) => l.exp(),
        Err(_) => f64::NAN,
    };
    let low = integrate(density, 0.0, x, quad)?;
    let high = integrate(density, x, 1.0, quad)?;
    Ok((low, high))
}

/// Inefficient fixation probability `(S(1) - S(1 - y)) / (S(1) - S(0))`
/// by nested quadrature.
pub fn fixation_prob_numeric(spec: &DiffusionSpec, y: f64, quad: &QuadratureSpec) -> Result<f64> {
    check_unit("y", y)?;
    let (low, high) = scale_numeric_parts(spec, 1.0 - y, quad)?;
    Ok(high / (low + high))
}

/// Interior zero of the `CaseI` drift, `(kappa - alpha) / kappa^2`, if it
/// lies in `(0, 1)`.
pub fn drift_root_case_i(kappa: f64, alpha: f64) -> Option<f64> {
    if kappa <= 0.0 {
        return None;
    }
    let root = (kappa - alpha) / (kappa * kappa);
    (root > 0.0 && root < 1.0).then_some(root)
}

/// Initial inefficient frequency for a fixation query on a given model.
#[derive(Debug, Clone, PartialEq)]
pub struct FixationQuery {
    pub model: DiffusionSpec,
    pub y: f64,
}

impl FixationQuery {
    pub fn new(model: DiffusionSpec, y: f64) -> Result<Self> {
        check_unit("y", y)?;
        Ok(FixationQuery { model, y })
    }

    /// Closed form where one exists, quadrature otherwise.
    pub fn probability(&self, quad: &QuadratureSpec) -> Result<(f64, Method)> {
        match self.model.variant {
            Variant::M1 => Ok((
                fixation_prob_inefficient_m1(self.model.kappa, self.model.alpha, self.y)?,
                Method::ClosedForm,
            )),
            Variant::M2(_) => {
                let scale = ScaleFunction::new(&self.model, *quad)?;
                Ok((scale.fixation_prob_inefficient(self.y)?, Method::Quadrature))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::Quadrature => "quadrature",
            Method::MonteCarlo => "monte_carlo",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d).unwrap()
    }

    #[test]
    fn scale_normalisation_and_identity() {
        for (k, a) in [(0.3, 0.1), (0.5, 0.25), (0.9, 1.0), (0.0, 0.7), (1.0, 0.2)] {
            assert_eq!(scale_m1(k, a, 0.0).unwrap(), 0.0);
            assert!((scale_m1(k, a, 1.0).unwrap() - 1.0).abs() < 1e-15);
        }
        assert_eq!(scale_m1(0.4, 0.0, 0.37).unwrap(), 0.37);
    }

    #[test]
    fn log_branch_value() {
        let v = scale_m1(0.5, 0.25, 0.5).unwrap();
        assert!((v - (1.0f64 / 0.75).ln() / 2f64.ln()).abs() < 1e-15);
        assert!((v - 0.415_037_499_278_843_8).abs() < 1e-12);
    }

    #[test]
    fn branch_switch_is_continuous() {
        let at = scale_m1(0.5, 0.25, 0.5).unwrap();
        for d in [1e-11, 1e-9, 1e-7] {
            for a in [0.25 - d, 0.25 + d] {
                assert!((scale_m1(0.5, a, 0.5).unwrap() - at).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn scale_matches_quadrature_of_density() {
        for (k, a) in [(0.5, 0.25), (0.3, 0.7), (0.9, 1.0)] {
            let spec = DiffusionSpec::m1(k, a).unwrap();
            let s = ScaleFunction::new(&spec, QuadratureSpec::tight()).unwrap();
            for x in [0.1, 0.5, 0.9] {
                let want = scale_m1(k, a, x).unwrap();
                assert!((s.normalized(x).unwrap() - want).abs() < 1e-10);
                assert!((scale_numeric(&spec, x, &QuadratureSpec::tight()).unwrap() - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn m1_fixation_values() {
        assert_eq!(fixation_prob_inefficient_m1(0.3, 0.5, 0.0).unwrap(), 0.0);
        assert!((fixation_prob_inefficient_m1(0.3, 0.5, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let v = fixation_prob_inefficient_m1(0.5, 0.25, 0.5).unwrap();
        assert!((v - 0.584_962_500_721_156).abs() < 1e-12);
        let mut last = 0.0;
        for k in [0.1, 0.3, 0.5, 0.7] {
            let p = fixation_prob_inefficient_m1(k, 0.5, 0.5).unwrap();
            assert!(p > last);
            last = p;
        }
    }

    #[test]
    fn classical_limit() {
        for a in [0.5f64, 1.0] {
            for i in 1..10 {
                let y = i as f64 / 10.0;
                let classical = (-(-2.0 * a * y).exp_m1()) / (-(-2.0 * a).exp_m1());
                assert!((fixation_prob_inefficient_m1(1e-6, a, y).unwrap() - classical).abs() < 1e-4);
                assert!((fixation_prob_inefficient_m1(0.0, a, y).unwrap() - classical).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn neutral_time_values() {
        let t = expected_fixation_time_m1_neutral(0.0, 0.5).unwrap();
        assert!((t - 2.0 * 2f64.ln()).abs() < 1e-14);
        let t = expected_fixation_time_m1_neutral(0.3, 0.5).unwrap();
        assert!((t - 1.645_343).abs() < 1e-6);
        let mut last = 0.0;
        for k in [0.0, 0.3, 0.6, 0.9] {
            let t = expected_fixation_time_m1_neutral(k, 0.5).unwrap();
            assert!(t > last);
            last = t;
        }
        assert_eq!(expected_fixation_time_m1_neutral(1.0, 0.5), Err(Error::InfiniteExpectation));
    }

    #[test]
    fn greens_function_values() {
        assert!((greens_m1_neutral(0.0, 0.5, 0.75).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        for (x, u) in [(0.3, 0.8), (0.2, 0.6)] {
            let a = greens_m1_neutral(0.0, x, u).unwrap();
            let b = greens_m1_neutral(0.0, 1.0 - x, 1.0 - u).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
        assert!(greens_m1_neutral(0.3, 0.5, 1.0).is_err());
        let g = |u: f64| greens_m1_neutral(0.3, 0.5, u).unwrap();
        let q = QuadratureSpec::tight();
        let total = integrate(g, 0.0, 0.5, &q).unwrap() + integrate(g, 0.5, 1.0, &q).unwrap();
        assert!((total - expected_fixation_time_m1_neutral(0.3, 0.5).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn general_greens_reduces_to_neutral_form() {
        let spec = DiffusionSpec::m1(0.6, 0.0).unwrap();
        let s = ScaleFunction::new(&spec, QuadratureSpec::tight()).unwrap();
        for (x, u) in [(0.3, 0.8), (0.7, 0.2)] {
            let want = greens_m1_neutral(0.6, x, u).unwrap();
            assert!((s.greens(x, u).unwrap() - want).abs() < 1e-10);
        }
    }

    #[test]
    fn numeric_time_matches_closed_form() {
        let spec = DiffusionSpec::m1(0.3, 0.0).unwrap();
        let t = expected_fixation_time_numeric(&spec, 0.5, &QuadratureSpec::default()).unwrap();
        assert!((t - expected_fixation_time_m1_neutral(0.3, 0.5).unwrap()).abs() < 1e-8);
        let m2 = DiffusionSpec::m2(r(2, 5), 0.0).unwrap();
        let t = expected_fixation_time_numeric(&m2, 0.5, &QuadratureSpec::default()).unwrap();
        assert!(t.is_finite() && t > 0.0);
        let k1 = DiffusionSpec::m1(1.0, 0.0).unwrap();
        assert_eq!(
            expected_fixation_time_numeric(&k1, 0.5, &QuadratureSpec::default()),
            Err(Error::InfiniteExpectation)
        );
    }

    #[test]
    fn case_i_fixation() {
        let q = QuadratureSpec::default();
        let v = fixation_prob_inefficient_m2_case_i(r(2, 5), 0.0, 0.5, &q).unwrap();
        let exact = ((-0.4f64).exp() - (-0.8f64).exp()) / (1.0 - (-0.8f64).exp());
        assert!((v - exact).abs() < 1e-12);
        assert!((v - 0.40131).abs() < 1e-5);
        assert!(fixation_prob_inefficient_m2_case_i(r(2, 5), 1.5, 0.5, &q).unwrap() > 0.5);
        assert_eq!(fixation_prob_inefficient_m2_case_i(r(2, 5), 0.3, 0.0, &q).unwrap(), 0.0);
        assert!((fixation_prob_inefficient_m2_case_i(r(2, 5), 0.3, 1.0, &q).unwrap() - 1.0).abs() < 1e-15);
        assert!(fixation_prob_inefficient_m2_case_i(r(1, 2), 0.3, 0.5, &q).is_err());
    }

    #[test]
    fn three_routes_agree_for_case_i() {
        let q = QuadratureSpec::tight();
        for (a, y) in [(0.0, 0.3), (0.3, 0.5), (1.5, 0.8)] {
            let spec = DiffusionSpec::m2(r(2, 5), a).unwrap();
            let direct = fixation_prob_inefficient_m2_case_i(r(2, 5), a, y, &q).unwrap();
            let nested = fixation_prob_numeric(&spec, y, &q).unwrap();
            let closed = ScaleFunction::new(&spec, q).unwrap().fixation_prob_inefficient(y).unwrap();
            assert!((direct - nested).abs() < 1e-8);
            assert!((direct - closed).abs() < 1e-10);
        }
    }

    #[test]
    fn closed_density_matches_nested_for_all_cases() {
        let q = QuadratureSpec::tight();
        for k in [r(1, 5), r(1, 2), r(3, 4), r(9, 10), r(7, 10), r(5, 7)] {
            for r0 in [1, 2] {
                let spec = DiffusionSpec::m2(k, 0.4).unwrap().caseii_sum_from(r0).unwrap();
                for u in [0.1, 0.5, 0.95] {
                    let a = log_scale_density(&spec, u);
                    let b = log_scale_density_numeric(&spec, u, &q).unwrap();
                    assert!((a - b).abs() < 1e-11, "kappa {k}, u {u}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn numeric_scale_is_monotone() {
        let spec = DiffusionSpec::m2(r(7, 10), 0.3).unwrap();
        let q = QuadratureSpec::default();
        let mut last = -1.0;
        for i in 0..=100 {
            let s = scale_numeric(&spec, i as f64 / 100.0, &q).unwrap();
            assert!(s > last);
            last = s;
        }
        assert_eq!(scale_numeric(&spec, 0.0, &q).unwrap(), 0.0);
        assert!((last - 1.0).abs() < 1e-15);
    }

    #[test]
    fn drift_roots() {
        assert!((drift_root_case_i(0.4, 0.3).unwrap() - 0.625).abs() < 1e-15);
        assert_eq!(drift_root_case_i(0.4, 0.2), None);
        assert_eq!(drift_root_case_i(0.4, 0.0), None);
    }

    #[test]
    fn query_dispatch() {
        let q = QuadratureSpec::default();
        let m1 = FixationQuery::new(DiffusionSpec::m1(0.5, 0.25).unwrap(), 0.5).unwrap();
        assert_eq!(m1.probability(&q).unwrap().1, Method::ClosedForm);
        let m2 = FixationQuery::new(DiffusionSpec::m2(r(2, 5), 0.0).unwrap(), 0.5).unwrap();
        let (p, m) = m2.probability(&q).unwrap();
        assert_eq!(m, Method::Quadrature);
        assert!((p - 0.40131).abs() < 1e-5);
    }
}
