//! Limiting diffusions of the discrete model and their Euler-Maruyama
//! integration.
//!
//! Every variant shares the noise coefficient `sqrt(x (1 - x)(1 - kappa x))`
//! and has a drift of the form `x (1 - x) g(x)`, where `g` is the
//! [`DiffusionSpec::selection_factor`]. The generator is taken with the
//! Ito convention `A f = mu f' + sigma^2 f'' / 2`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::rational::Rational;
use crate::rng::Stream;

/// Largest value a path may take when `kappa = 1`, where the upper
/// boundary is never reached.
pub const KAPPA_ONE_CEILING: f64 = 1.0 - 1e-12;

pub const DEFAULT_DT: f64 = 1e-3;
pub const ABSORPTION_DT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum M2Case {
    CaseI,
    CaseII,
    CaseIII,
}

/// Parameters of a rule-M2 limit.
///
/// For `CaseI`, `a/b = kappa`. For `CaseII` and `CaseIII`, `a/b = 1 - kappa`,
/// `m = floor(b / a)` and `c` holds `c_1..c_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct M2CaseData {
    pub case_tag: M2Case,
    pub a: u64,
    pub b: u64,
    pub m: u64,
    pub c: Vec<f64>,
    /// Lower index of the `CaseII` sum, 1 or 2.
    pub caseii_sum_from: u64,
}

/// Sorts `kappa` into the case whose limiting equation applies.
/// `kappa = 1/2` goes to `CaseII` with `b = 2`, whose sum is empty.
pub fn classify_m2_case(kappa: Rational) -> Result<M2CaseData> {
    if kappa.numer() <= 0 || kappa >= Rational::ONE {
        return Err(invalid(format!("kappa = {kappa} must lie strictly between 0 and 1")));
    }
    let half = Rational::new(1, 2)?;
    if kappa < half {
        return Ok(M2CaseData {
            case_tag: M2Case::CaseI,
            a: kappa.numer() as u64,
            b: kappa.denom() as u64,
            m: 0,
            c: Vec::new(),
            caseii_sum_from: 2,
        });
    }
    let rest = kappa.complement();
    let (a, b) = (rest.numer() as u64, rest.denom() as u64);
    if a == 1 {
        return Ok(M2CaseData {
            case_tag: M2Case::CaseII,
            a,
            b,
            m: 0,
            c: Vec::new(),
            caseii_sum_from: 2,
        });
    }
    let m = b / a;
    let step = a as f64 / b as f64;
    let mut c = vec![step; m as usize];
    c[m as usize - 1] = (b - m * a) as f64 / b as f64;
    Ok(M2CaseData {
        case_tag: M2Case::CaseIII,
        a,
        b,
        m,
        c,
        caseii_sum_from: 2,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Variant {
    M1,
    M2(M2CaseData),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSpec {
    pub variant: Variant,
    pub alpha: f64,
    pub kappa: f64,
}

impl DiffusionSpec {
    pub fn m1(kappa: f64, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&kappa) {
            return Err(invalid(format!("kappa = {kappa} must lie in [0, 1]")));
        }
        check_alpha(alpha)?;
        Ok(DiffusionSpec {
            variant: Variant::M1,
            alpha,
            kappa,
        })
    }

    pub fn m2(kappa: Rational, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let data = classify_m2_case(kappa)?;
        Ok(DiffusionSpec {
            variant: Variant::M2(data),
            alpha,
            kappa: kappa.to_f64(),
        })
    }

    /// Switches the lower index of the `CaseII` sum; other variants ignore it.
    pub fn caseii_sum_from(mut self, r0: u64) -> Result<Self> {
        if r0 != 1 && r0 != 2 {
            return Err(invalid(format!("CaseII sum must start at 1 or 2, got {r0}")));
        }
        if let Variant::M2(d) = &mut self.variant {
            d.caseii_sum_from = r0;
        }
        Ok(self)
    }

    pub fn is_m1(&self) -> bool {
        matches!(self.variant, Variant::M1)
    }

    pub fn m2_case(&self) -> Option<M2Case> {
        match &self.variant {
            Variant::M1 => None,
            Variant::M2(d) => Some(d.case_tag),
        }
    }

    /// `g(x)` with `drift = x (1 - x) g(x)`.
    pub fn selection_factor(&self, x: f64) -> f64 {
        let k = self.kappa;
        match &self.variant {
            Variant::M1 => -self.alpha,
            Variant::M2(d) => match d.case_tag {
                M2Case::CaseI => -self.alpha + k * (1.0 - k * x),
                M2Case::CaseII => {
                    let mut sum = 0.0;
                    let mut pow = x.powi(d.caseii_sum_from as i32);
                    for _ in d.caseii_sum_from..d.b {
                        sum += 1.0 - pow;
                        pow *= x;
                    }
                    -self.alpha + (1.0 - k) * (1.0 - k * x) * sum
                }
                M2Case::CaseIII => {
                    let mut sum = 0.0;
                    let mut pow = x;
                    for ci in &d.c {
                        sum += ci * (1.0 - pow);
                        pow *= x;
                    }
                    -self.alpha + (1.0 - k * x) * sum
                }
            },
        }
    }

    /// `sigma^2 (x) = x (1 - x)(1 - kappa x)`, truncated at 0.
    pub fn variance(&self, x: f64) -> f64 {
        (x * (1.0 - x) * (1.0 - self.kappa * x)).max(0.0)
    }

    /// Upper clamp for integrated paths.
    pub fn upper_limit(&self) -> f64 {
        if self.kappa >= 1.0 {
            KAPPA_ONE_CEILING
        } else {
            1.0
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(invalid(format!("alpha = {alpha} must be a finite non-negative number")));
    }
    Ok(())
}

pub fn drift(spec: &DiffusionSpec, x: f64) -> f64 {
    x * (1.0 - x) * spec.selection_factor(x)
}

pub fn noise_coef(spec: &DiffusionSpec, x: f64) -> f64 {
    spec.variance(x).sqrt()
}

/// `A f (x) = mu(x) f'(x) + sigma^2(x) f''(x) / 2`.
pub fn generator_apply(
    spec: &DiffusionSpec,
    f: impl Fn(f64) -> f64,
    f1: impl Fn(f64) -> f64,
    f2: impl Fn(f64) -> f64,
    x: f64,
) -> f64 {
    // f itself does not enter a diffusion generator; kept for a uniform
    // signature with other generators
    let _ = f;
    drift(spec, x) * f1(x) + 0.5 * spec.variance(x) * f2(x)
}

/// One Euler-Maruyama step driven by the standard normal `gaussian`.
pub fn em_step(spec: &DiffusionSpec, x: f64, dt: f64, gaussian: f64) -> f64 {
    let upper = spec.upper_limit();
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 && upper >= 1.0 {
        return 1.0;
    }
    let next = x + drift(spec, x) * dt + noise_coef(spec, x) * dt.sqrt() * gaussian;
    next.clamp(0.0, upper)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    Zero,
    One,
}

impl Boundary {
    pub fn value(self) -> f64 {
        match self {
            Boundary::Zero => 0.0,
            Boundary::One => 1.0,
        }
    }
}

fn boundary_of(spec: &DiffusionSpec, x: f64) -> Option<Boundary> {
    if x <= 0.0 {
        Some(Boundary::Zero)
    } else if x >= 1.0 && spec.kappa < 1.0 {
        Some(Boundary::One)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub absorbed: Option<(Boundary, f64)>,
}

/// How long to integrate and how densely to record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOptions {
    pub horizon: Option<f64>,
    pub until_absorption: bool,
    /// Record every k-th step (absorption and the final state are always kept).
    pub record_every: u64,
}

impl PathOptions {
    pub fn horizon(t: f64) -> Self {
        PathOptions {
            horizon: Some(t),
            until_absorption: false,
            record_every: 1,
        }
    }

    pub fn until_absorption() -> Self {
        PathOptions {
            horizon: None,
            until_absorption: true,
            record_every: 1,
        }
    }

    pub fn thinned(mut self, every: u64) -> Self {
        self.record_every = every.max(1);
        self
    }
}

fn check_start(x0: f64, dt: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x0) {
        return Err(invalid(format!("x0 = {x0} outside [0, 1]")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("dt = {dt} must be positive")));
    }
    Ok(())
}

fn steps_for(t: f64, dt: f64) -> u64 {
    (t / dt).round() as u64
}

pub fn simulate_path(
    spec: &DiffusionSpec,
    x0: f64,
    dt: f64,
    options: PathOptions,
    rng: &mut Stream,
) -> Result<DiffusionPath> {
    check_start(x0, dt)?;
    let max_steps = match (options.horizon, options.until_absorption) {
        (None, false) => return Err(invalid("set a horizon, until-absorption, or both")),
        (Some(t), _) if !(t >= 0.0 && t.is_finite()) => {
            return Err(invalid(format!("horizon {t} must be finite and non-negative")))
        }
        (Some(t), _) => steps_for(t, dt),
        (None, true) if spec.kappa >= 1.0 => return Err(Error::BoundaryInaccessible),
        (None, true) => u64::MAX,
    };
    let every = options.record_every.max(1);
    let mut x = x0.min(spec.upper_limit());
    let mut times = vec![0.0];
    let mut values = vec![x];
    let mut absorbed = boundary_of(spec, x).map(|b| (b, 0.0));
    let mut step = 0u64;
    while step < max_steps {
        if absorbed.is_some() {
            if options.until_absorption {
                break;
            }
            // stays put; jump to the horizon
            step = max_steps;
            times.push(step as f64 * dt);
            values.push(x);
            break;
        }
        let g: f64 = rng.sample(StandardNormal);
        x = em_step(spec, x, dt, g);
        step += 1;
        let hit = boundary_of(spec, x);
        if hit.is_some() || step.is_multiple_of(every) || step == max_steps {
            times.push(step as f64 * dt);
            values.push(x);
        }
        if let Some(b) = hit {
            absorbed = Some((b, step as f64 * dt));
        }
    }
    Ok(DiffusionPath {
        times,
        values,
        absorbed,
    })
}

/// Integrates until a boundary is hit. `kappa = 1` is refused because the
/// upper boundary is never reached.
pub fn absorption_trial(
    spec: &DiffusionSpec,
    x0: f64,
    dt: f64,
    rng: &mut Stream,
) -> Result<(Boundary, f64)> {
    check_start(x0, dt)?;
    if spec.kappa >= 1.0 {
        return Err(Error::BoundaryInaccessible);
    }
    let mut x = x0;
    let mut step = 0u64;
    loop {
        if let Some(b) = boundary_of(spec, x) {
            return Ok((b, step as f64 * dt));
        }
        let g: f64 = rng.sample(StandardNormal);
        x = em_step(spec, x, dt, g);
        step += 1;
    }
}

/// Values of one path at each of `times` (ascending, on the `dt` grid up
/// to rounding). After absorption the boundary value is repeated.
pub fn observe_at(
    spec: &DiffusionSpec,
    x0: f64,
    dt: f64,
    times: &[f64],
    rng: &mut Stream,
) -> Result<Vec<f64>> {
    check_start(x0, dt)?;
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|t| !(*t >= 0.0)) {
        return Err(invalid("observation times must be non-negative and ascending"));
    }
    let mut out = Vec::with_capacity(times.len());
    let mut x = x0.min(spec.upper_limit());
    let mut step = 0u64;
    for &t in times {
        let target = steps_for(t, dt);
        while step < target {
            if boundary_of(spec, x).is_some() {
                step = target;
                break;
            }
            let g: f64 = rng.sample(StandardNormal);
            x = em_step(spec, x, dt, g);
            step += 1;
        }
        out.push(x);
    }
    Ok(out)
}

/// Value of one path at time `t`.
pub fn value_at(spec: &DiffusionSpec, x0: f64, dt: f64, t: f64, rng: &mut Stream) -> Result<f64> {
    Ok(observe_at(spec, x0, dt, &[t], rng)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc;
    use crate::rng::{derive_rng_stream, RngSpec, StreamFamily};

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d).unwrap()
    }

    #[test]
    fn classification() {
        let d = classify_m2_case(r(1, 5)).unwrap();
        assert_eq!((d.case_tag, d.a, d.b), (M2Case::CaseI, 1, 5));
        let d = classify_m2_case(r(9, 10)).unwrap();
        assert_eq!((d.case_tag, d.b), (M2Case::CaseII, 10));
        let d = classify_m2_case(r(7, 10)).unwrap();
        assert_eq!((d.case_tag, d.a, d.b, d.m), (M2Case::CaseIII, 3, 10, 3));
        let want = [0.3, 0.3, 0.1];
        for (c, w) in d.c.iter().zip(want) {
            assert!((c - w).abs() < 1e-15);
        }
        assert!((d.c.iter().sum::<f64>() + 0.3 - 1.0).abs() < 1e-15);
        assert_eq!(classify_m2_case(r(1, 2)).unwrap().case_tag, M2Case::CaseII);
        assert!(classify_m2_case(Rational::ZERO).is_err());
        assert!(classify_m2_case(Rational::ONE).is_err());
    }

    #[test]
    fn case_iii_weights_are_non_negative() {
        for b in 3..40 {
            for a in 2..b {
                let rest = r(a, b);
                if rest.numer() < 2 || rest.to_f64() >= 0.5 {
                    continue;
                }
                let d = classify_m2_case(rest.complement()).unwrap();
                assert_eq!(d.case_tag, M2Case::CaseIII);
                assert!(d.c.iter().all(|c| *c >= 0.0));
                assert!((d.c.iter().sum::<f64>() + rest.to_f64() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn drift_values() {
        let m1 = DiffusionSpec::m1(0.3, 0.7).unwrap();
        assert_eq!(drift(&m1, 0.0), 0.0);
        assert_eq!(drift(&m1, 1.0), 0.0);
        let c1 = DiffusionSpec::m2(r(2, 5), 0.0).unwrap();
        assert!((drift(&c1, 0.5) - 0.08).abs() < 1e-15);
        let c1 = DiffusionSpec::m2(r(2, 5), 0.3).unwrap();
        assert!(drift(&c1, 0.6) > 0.0 && drift(&c1, 0.65) < 0.0);
        assert!(c1.selection_factor(0.625).abs() < 1e-15);
    }

    #[test]
    fn case_ii_sum_switch() {
        // kappa = 3/4: b = 4, sum over r = 2..3 by default, 1..3 when switched
        let x: f64 = 0.4;
        let base = DiffusionSpec::m2(r(3, 4), 0.0).unwrap();
        let want2 = 0.25 * (1.0 - 0.75 * x) * ((1.0 - x * x) + (1.0 - x.powi(3)));
        assert!((base.selection_factor(x) - want2).abs() < 1e-15);
        let from1 = base.clone().caseii_sum_from(1).unwrap();
        let want1 = want2 + 0.25 * (1.0 - 0.75 * x) * (1.0 - x);
        assert!((from1.selection_factor(x) - want1).abs() < 1e-15);
        assert!(base.caseii_sum_from(3).is_err());
    }

    #[test]
    fn m2_drift_positive_without_selection() {
        for k in [r(1, 5), r(2, 5), r(1, 2), r(3, 4), r(9, 10), r(7, 10), r(5, 7)] {
            let spec = DiffusionSpec::m2(k, 0.0).unwrap();
            assert_eq!(drift(&spec, 0.0), 0.0);
            assert_eq!(drift(&spec, 1.0), 0.0);
            for i in 1..100 {
                let x = i as f64 / 100.0;
                let d = drift(&spec, x);
                // kappa = 1/2 has an empty sum and zero drift
                if k == r(1, 2) {
                    assert_eq!(d, 0.0);
                } else {
                    assert!(d > 0.0, "kappa {k}, x {x}");
                }
            }
        }
    }

    #[test]
    fn kappa_zero_reduces_to_classical() {
        let spec = DiffusionSpec::m1(0.0, 0.4).unwrap();
        for i in 0..=10 {
            let x = i as f64 / 10.0;
            assert!((drift(&spec, x) + 0.4 * x * (1.0 - x)).abs() < 1e-15);
            assert!((noise_coef(&spec, x) - (x * (1.0 - x)).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn noise_values() {
        let s0 = DiffusionSpec::m1(0.0, 0.0).unwrap();
        assert_eq!(noise_coef(&s0, 0.5), 0.5);
        let s1 = DiffusionSpec::m1(1.0, 0.0).unwrap();
        assert!((noise_coef(&s1, 0.9) - 0.094_868_329_805_051_4).abs() < 1e-12);
        assert_eq!(noise_coef(&s1, 1.0), 0.0);
    }

    #[test]
    fn generator_values() {
        let spec = DiffusionSpec::m1(0.0, 0.0).unwrap();
        assert_eq!(generator_apply(&spec, |_| 3.0, |_| 0.0, |_| 0.0, 0.3), 0.0);
        let spec = DiffusionSpec::m1(0.3, 0.0).unwrap();
        assert_eq!(generator_apply(&spec, |x| x, |_| 1.0, |_| 0.0, 0.3), 0.0);
        let spec = DiffusionSpec::m1(0.0, 0.0).unwrap();
        let v = generator_apply(&spec, |x| x * x, |x| 2.0 * x, |_| 2.0, 0.5);
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn euler_step() {
        let spec = DiffusionSpec::m1(0.0, 0.0).unwrap();
        assert_eq!(em_step(&spec, 0.0, 0.01, 3.0), 0.0);
        assert_eq!(em_step(&spec, 0.42, 0.01, 0.0), 0.42);
        assert!((em_step(&spec, 0.5, 0.01, 1.0) - 0.55).abs() < 1e-15);
        assert_eq!(em_step(&spec, 0.99, 0.01, 50.0), 1.0);
        let k1 = DiffusionSpec::m1(1.0, 0.0).unwrap();
        assert_eq!(em_step(&k1, 0.99, 0.01, 50.0), KAPPA_ONE_CEILING);
    }

    #[test]
    fn path_modes() {
        let spec = DiffusionSpec::m1(0.3, 0.1).unwrap();
        let mut g = derive_rng_stream(RngSpec::new(1, 0));
        let p = simulate_path(&spec, 1.0, 1e-3, PathOptions::horizon(1.0), &mut g).unwrap();
        assert_eq!(p.absorbed, Some((Boundary::One, 0.0)));
        assert!(p.values.iter().all(|v| *v == 1.0));
        let none = PathOptions {
            horizon: None,
            until_absorption: false,
            record_every: 1,
        };
        assert!(simulate_path(&spec, 0.5, 1e-3, none, &mut g).is_err());
        let p = simulate_path(&spec, 0.5, 1e-3, PathOptions::horizon(2.0).thinned(100), &mut g).unwrap();
        assert!(p.times.windows(2).all(|w| w[1] > w[0]));
        assert!(p.values.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!((p.times.last().unwrap() - 2.0).abs() < 1e-9);
        if let Some((b, t)) = p.absorbed {
            assert_eq!(*p.values.last().unwrap(), b.value());
            assert!(t <= 2.0 + 1e-9);
        }
    }

    #[test]
    fn absorption_edges() {
        let spec = DiffusionSpec::m1(0.3, 0.0).unwrap();
        let mut g = derive_rng_stream(RngSpec::new(2, 0));
        assert_eq!(absorption_trial(&spec, 0.0, 1e-3, &mut g).unwrap(), (Boundary::Zero, 0.0));
        let k1 = DiffusionSpec::m1(1.0, 0.0).unwrap();
        assert!(matches!(absorption_trial(&k1, 0.5, 1e-3, &mut g), Err(Error::BoundaryInaccessible)));
    }

    #[test]
    fn most_figure_paths_absorb_by_three() {
        let spec = DiffusionSpec::m1(0.3, 0.1).unwrap();
        let s = mc::summarize(StreamFamily::new(3), 2000, |_, g| {
            let x = value_at(&spec, 0.5, 1e-3, 3.0, g).unwrap();
            (x == 0.0 || x == 1.0) as u8 as f64
        });
        assert!(s.mean > 0.5, "absorbed fraction {}", s.mean);
    }

    #[test]
    fn neutral_m1_fixation_is_martingale() {
        let spec = DiffusionSpec::m1(0.3, 0.0).unwrap();
        let s = mc::summarize(StreamFamily::new(4), 10_000, |_, g| {
            let (b, _) = absorption_trial(&spec, 0.5, 1e-3, g).unwrap();
            b.value()
        });
        assert!((s.mean - 0.5).abs() < 3.0 * s.std_error(), "{} +- {}", s.mean, s.std_error());
    }

    #[test]
    fn observation_grid_matches_single_values() {
        let spec = DiffusionSpec::m1(0.3, 0.1).unwrap();
        let fam = StreamFamily::new(5);
        let many = observe_at(&spec, 0.5, 1e-3, &[0.1, 0.5, 1.0], &mut fam.stream(0)).unwrap();
        let last = value_at(&spec, 0.5, 1e-3, 1.0, &mut fam.stream(0)).unwrap();
        assert_eq!(many[2], last);
        assert_eq!(observe_at(&spec, 0.5, 1e-3, &[0.0], &mut fam.stream(0)).unwrap(), vec![0.5]);
    }
}
