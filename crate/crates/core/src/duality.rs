//! Moment duality between the M1 diffusion and the ASEG count process:
//! `E_x[X_t^n] = E_n[x^{Z_t}]`.
//!
//! The algebraic check applies both generators to `h(x, n) = x^n`. The Monte
//! Carlo report estimates both sides on a parameter grid. Diffusion paths
//! are shared by every cell with the same `(kappa, alpha, x)` and count
//! paths by every cell with the same `(kappa, alpha, n)`; each group has its
//! own stream family, so the two sides stay independent.

use crate::aseg::{sample_count_at, transition_rates, AsegParams, CountSampler};
use crate::diffusion::{generator_apply, observe_at, DiffusionSpec};
use crate::error::{invalid, Result};
use crate::mc;
use crate::rng::StreamFamily;
use crate::summary::McSummary;

/// Cells with `|z|` above this are flagged.
pub const Z_FLAG: f64 = 4.0;

/// `x^k` for any count `k`.
fn pow_count(x: f64, k: u64) -> f64 {
    if k <= i32::MAX as u64 {
        x.powi(k as i32)
    } else {
        x.powf(k as f64)
    }
}

/// `|A h(., n)(x) - Q h(x, .)(n)|` for `h(x, n) = x^n`.
pub fn generator_duality_check(x: f64, n: u32, kappa: f64, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let spec = DiffusionSpec::m1(kappa, alpha)?;
    let nf = n as f64;
    let a = generator_apply(
        &spec,
        |y| y.powi(n as i32),
        |y| nf * y.powi(n as i32 - 1),
        |y| if n >= 2 { nf * (nf - 1.0) * y.powi(n as i32 - 2) } else { 0.0 },
        x,
    );
    let (up, down) = transition_rates(n as u64, alpha, kappa);
    let xn = x.powi(n as i32);
    let q = up * (x.powi(n as i32 + 1) - xn) + down * (x.powi(n as i32 - 1) - xn);
    Ok((a - q).abs())
}

/// Monte Carlo summary of `X_t^n` over Euler-Maruyama paths.
pub fn moment_estimate_diffusion(
    spec: &DiffusionSpec,
    x: f64,
    n: u32,
    t: f64,
    dt: f64,
    replicates: u64,
    family: StreamFamily,
) -> Result<McSummary> {
    if !spec.is_m1() {
        return Err(invalid("the moment dual is stated for the M1 diffusion"));
    }
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    mc::try_summarize(family, replicates, |_, rng| {
        Ok(observe_at(spec, x, dt, &[t], rng)?[0].powi(n as i32))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualityCell {
    pub kappa: f64,
    pub alpha: f64,
    pub x: f64,
    pub n: u32,
    pub t: f64,
    pub lhs: McSummary,
    pub rhs: McSummary,
    pub z_score: f64,
    /// Count replicates that passed the explosion ceiling.
    pub exploded: u64,
}

impl DualityCell {
    fn new(kappa: f64, alpha: f64, x: f64, n: u32, t: f64, lhs: McSummary, rhs: McSummary, exploded: u64) -> Self {
        let diff = lhs.mean - rhs.mean;
        let se = (lhs.std_error().powi(2) + rhs.std_error().powi(2)).sqrt();
        let z_score = if diff == 0.0 { 0.0 } else { diff / se };
        DualityCell {
            kappa,
            alpha,
            x,
            n,
            t,
            lhs,
            rhs,
            z_score,
            exploded,
        }
    }

    pub fn flag(&self) -> &'static str {
        if self.exploded > 0 {
            "explosion"
        } else if !(self.z_score.abs() <= Z_FLAG) {
            "z_exceeded"
        } else {
            "ok"
        }
    }
}

/// Cross product of parameter lists; cells are ordered by kappa, alpha,
/// x, n, t.
#[derive(Debug, Clone, PartialEq)]
pub struct DualityGrid {
    pub kappas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub xs: Vec<f64>,
    pub ns: Vec<u32>,
    pub ts: Vec<f64>,
}

impl Default for DualityGrid {
    fn default() -> Self {
        DualityGrid {
            kappas: vec![0.0, 0.3, 1.0],
            alphas: vec![0.0, 0.25],
            xs: vec![0.2, 0.5, 0.8],
            ns: vec![1, 2, 3],
            ts: vec![0.1, 0.5, 1.0],
        }
    }
}

impl DualityGrid {
    fn validate(&self) -> Result<()> {
        let lists = [self.kappas.len(), self.alphas.len(), self.xs.len(), self.ns.len(), self.ts.len()];
        if lists.contains(&0) {
            return Err(invalid("every grid axis needs at least one value"));
        }
        if self.ts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("grid times must be strictly ascending"));
        }
        if self.ns.contains(&0) {
            return Err(invalid("grid moments n must be at least 1"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.kappas.len() * self.alphas.len() * self.xs.len() * self.ns.len() * self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn group_tag(side: &str, a: f64, b: f64, c: f64) -> String {
    format!("{side}/{a:e}/{b:e}/{c:e}")
}

/// Estimates both sides of the duality on every grid cell.
pub fn duality_grid_report(
    grid: &DualityGrid,
    replicates: u64,
    dt: f64,
    sampler: &CountSampler,
    family: StreamFamily,
) -> Result<Vec<DualityCell>> {
    grid.validate()?;
    if replicates == 0 {
        return Err(invalid("replicates must be at least 1"));
    }
    let (nn, nt) = (grid.ns.len(), grid.ts.len());
    let horizon = *grid.ts.last().expect("validated");
    let mut cells = Vec::with_capacity(grid.len());
    for &kappa in &grid.kappas {
        for &alpha in &grid.alphas {
            let spec = DiffusionSpec::m1(kappa, alpha)?;
            // one accumulator per (n, t), one vector per x
            let mut lhs = Vec::with_capacity(grid.xs.len());
            for &x in &grid.xs {
                let fam = family.child(&group_tag("diffusion", kappa, alpha, x));
                let sums = mc::try_fold_replicates(
                    fam,
                    replicates,
                    || vec![McSummary::new(); nn * nt],
                    |acc, _, rng| {
                        let values = observe_at(&spec, x, dt, &grid.ts, rng)?;
                        for (ni, &n) in grid.ns.iter().enumerate() {
                            for (ti, v) in values.iter().enumerate() {
                                acc[ni * nt + ti].push(v.powi(n as i32));
                            }
                        }
                        Ok(())
                    },
                )?;
                lhs.push(sums);
            }
            // one accumulator per (x, t) plus an explosion tally, one vector per n
            let nx = grid.xs.len();
            let mut rhs = Vec::with_capacity(nn);
            for &n in &grid.ns {
                let params = AsegParams::new(n as u64, alpha, kappa, horizon, 0.5)?;
                let fam = family.child(&group_tag("aseg", kappa, alpha, n as f64));
                let sums = mc::try_fold_replicates(
                    fam,
                    replicates,
                    || (vec![McSummary::new(); nx * nt], 0u64),
                    |acc, _, rng| {
                        let (counts, end) = sample_count_at(&params, sampler, None, &grid.ts, rng)?;
                        acc.1 += end.exploded as u64;
                        for (xi, &x) in grid.xs.iter().enumerate() {
                            for (ti, &z) in counts.iter().enumerate() {
                                acc.0[xi * nt + ti].push(pow_count(x, z));
                            }
                        }
                        Ok(())
                    },
                )?;
                rhs.push(sums);
            }
            for (xi, &x) in grid.xs.iter().enumerate() {
                for (ni, &n) in grid.ns.iter().enumerate() {
                    for (ti, &t) in grid.ts.iter().enumerate() {
                        let l = lhs[xi][ni * nt + ti];
                        let r = rhs[ni].0[xi * nt + ti];
                        cells.push(DualityCell::new(kappa, alpha, x, n, t, l, r, rhs[ni].1));
                    }
                }
            }
        }
    }
    Ok(cells)
}
