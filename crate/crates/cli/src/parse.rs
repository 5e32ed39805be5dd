//! Value parsers shared by the subcommands.

use wfe_core::diffusion::DiffusionSpec;
use wfe_core::discrete::{Efficiency, StoppingRule};
use wfe_core::Rational;

use crate::Failure;

/// Replicate counts accept `100000` or `1e5`.
pub fn count(s: &str) -> Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 => Ok(v as u64),
        _ => Err(format!("'{s}' is not a non-negative integer")),
    }
}

/// `start:stop:step`, inclusive of `stop` when it lies on the grid.
pub fn grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, h] = parts[..] else {
        return Err(format!("'{s}' is not of the form start:stop:step"));
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number"));
    let (a, b, h) = (num(a)?, num(b)?, num(h)?);
    if !(h > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
        return Err(format!("'{s}' needs start <= stop and step > 0"));
    }
    let n = ((b - a) / h + 1e-9).floor() as u64;
    // rounding to 12 places keeps 0.1 * 3 from printing as 0.30000000000000004
    Ok((0..=n).map(|i| ((a + i as f64 * h) * 1e12).round() / 1e12).collect())
}

/// Exact `a/b` under M2, any real (or fraction) under M1.
pub fn efficiency(rule: StoppingRule, kappa: &str) -> Result<Efficiency, Failure> {
    let field = |m: String| Failure::Invalid(format!("--kappa: {m}"));
    match rule {
        StoppingRule::M2 => {
            if !kappa.contains('/') {
                return Err(field(format!("rule m2 needs an exact fraction a/b, got '{kappa}'")));
            }
            kappa.parse::<Rational>().map(Efficiency::Exact).map_err(|e| field(e.to_string()))
        }
        StoppingRule::M1 => {
            if kappa.contains('/') {
                kappa.parse::<Rational>().map(Efficiency::Exact).map_err(|e| field(e.to_string()))
            } else {
                kappa
                    .parse::<f64>()
                    .map(Efficiency::Real)
                    .map_err(|_| field(format!("'{kappa}' is not a number")))
            }
        }
    }
}

pub fn diffusion_spec(rule: StoppingRule, kappa: &str, alpha: f64, caseii_sum_from: u64) -> Result<DiffusionSpec, Failure> {
    Ok(match efficiency(rule, kappa)? {
        Efficiency::Exact(k) if rule == StoppingRule::M2 => {
            DiffusionSpec::m2(k, alpha)?.caseii_sum_from(caseii_sum_from)?
        }
        e => DiffusionSpec::m1(e.value(), alpha)?,
    })
}
