//! The Sibuya law and the long-run law of the frequency at `kappa = 1`.

use crate::error::{invalid, Error, Result};

/// Sibuya distribution on `{1, 2, ...}` with pgf `1 - (1 - x)^gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SibuyaDist {
    pub gamma: f64,
}

impl SibuyaDist {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(invalid(format!("gamma = {gamma} must lie in (0, 1]")));
        }
        Ok(SibuyaDist { gamma })
    }

    /// Stationary law of the count process at `kappa = 1`, `gamma = 1 - 2 alpha`.
    pub fn from_alpha(alpha: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&alpha) {
            return Err(invalid(format!("alpha = {alpha} must lie in [0, 1/2)")));
        }
        Self::new(1.0 - 2.0 * alpha)
    }

    pub fn pgf(&self, x: f64) -> f64 {
        1.0 - (1.0 - x).powf(self.gamma)
    }

    /// `p_1 .. p_kmax`.
    pub fn pmf_vec(&self, kmax: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(kmax);
        let mut p = self.gamma;
        for k in 1..=kmax {
            out.push(p);
            p *= (k as f64 - self.gamma) / (k as f64 + 1.0);
        }
        out
    }

    /// `P(K > k) = prod_{j=1..k} (1 - gamma / j)`.
    pub fn survival(&self, k: u64) -> f64 {
        (1..=k).map(|j| 1.0 - self.gamma / j as f64).product()
    }
}

pub fn sibuya_pmf(dist: &SibuyaDist, k: u64) -> Result<f64> {
    if k == 0 {
        return Err(invalid("the Sibuya law lives on k >= 1"));
    }
    let mut p = dist.gamma;
    for j in 1..k {
        p *= (j as f64 - dist.gamma) / (j as f64 + 1.0);
    }
    Ok(p)
}

/// `P(X_inf = 1)` for the `kappa = 1` diffusion started at `x`.
pub fn x_infinity_law(alpha: f64, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(invalid(format!("x = {x} outside [0, 1]")));
    }
    if !(alpha >= 0.0) {
        return Err(invalid(format!("alpha = {alpha} must be non-negative")));
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    if alpha == 0.5 {
        return Err(Error::UnresolvedCase(
            "alpha = 1/2 with kappa = 1: the long-run behaviour is not established".into(),
        ));
    }
    if alpha > 0.5 {
        return Ok(0.0);
    }
    Ok(1.0 - (1.0 - x).powf(1.0 - 2.0 * alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_at_gamma_one() {
        let d = SibuyaDist::new(1.0).unwrap();
        assert_eq!(d.pmf_vec(4), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn half_matches_series() {
        let d = SibuyaDist::new(0.5).unwrap();
        let want = [0.5, 0.125, 0.0625, 0.0390625];
        for (k, w) in want.iter().enumerate() {
            assert!((sibuya_pmf(&d, k as u64 + 1).unwrap() - w).abs() < 1e-15);
        }
        // binomial series of 1 - sqrt(1 - x): p_k = C(2k-2, k-1) / (k 4^k) * 2
        for k in 1..30u64 {
            let mut c = 1.0f64;
            for j in 0..k - 1 {
                c *= (2 * (k - 1) - j) as f64 / (j + 1) as f64;
            }
            let series = 2.0 * c / (k as f64 * 4f64.powi(k as i32));
            assert!((sibuya_pmf(&d, k).unwrap() - series).abs() < 1e-14);
        }
    }

    #[test]
    fn partial_sums() {
        let d = SibuyaDist::new(0.5).unwrap();
        let pmf = d.pmf_vec(1_000_000);
        let total: f64 = pmf.iter().sum();
        assert!(total > 0.99 && total <= 1.0 + 1e-12, "{total}");
        assert!((total + d.survival(1_000_000) - 1.0).abs() < 1e-9);
        let head = &pmf[..100_000];
        for x in [0.1, 0.5, 0.9] {
            let mut s = 0.0;
            let mut xp = x;
            for p in head {
                s += p * xp;
                xp *= x;
            }
            assert!((s - d.pgf(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(SibuyaDist::new(0.0).is_err());
        assert!(SibuyaDist::new(1.5).is_err());
        assert!(SibuyaDist::from_alpha(0.5).is_err());
        assert!(sibuya_pmf(&SibuyaDist::new(0.5).unwrap(), 0).is_err());
    }

    #[test]
    fn long_run_law() {
        for x in [0.0, 0.3, 0.8] {
            assert!((x_infinity_law(0.0, x).unwrap() - x).abs() < 1e-15);
        }
        assert!((x_infinity_law(0.25, 0.5).unwrap() - 0.292_893_218_813_452_5).abs() < 1e-12);
        assert_eq!(x_infinity_law(0.25, 1.0).unwrap(), 1.0);
        assert_eq!(x_infinity_law(0.7, 0.5).unwrap(), 0.0);
        assert!(matches!(x_infinity_law(0.5, 0.5), Err(Error::UnresolvedCase(_))));
    }
}
