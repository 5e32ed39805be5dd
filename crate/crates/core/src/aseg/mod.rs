//! The ancestral selection/efficiency graph and its vertex-counting process.
//!
//! With `j` active vertices the count moves to `j + 1` at rate
//! `alpha j + kappa j (j - 1) / 2` (branching and pairwise branching) and to
//! `j - 1` at rate `j (j - 1) / 2` (coalescence).
//!
//! Two simulators are provided. [`simulate_vertex_count`] records every
//! jump exactly. [`sample_count`] only reports the state at the horizon and
//! switches to Poisson tau-leaping above a configurable level, which keeps
//! the heavy-tailed excursions at `kappa = 1` affordable.

mod graph;

pub use graph::{
    color_and_propagate, simulate_graph, AsegGraph, EventKind, GraphEvent, Vertex,
};

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use crate::analytics::SibuyaDist;
use crate::error::{invalid, Result};
use crate::mc::{self, Accumulator, Histogram};
use crate::rng::{Stream, StreamFamily};
use crate::summary::McSummary;

/// Default explosion ceiling on the number of active vertices.
pub const DEFAULT_CEILING: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsegParams {
    pub n0: u64,
    pub alpha: f64,
    pub kappa: f64,
    pub horizon: f64,
    /// Probability that a tip is of type 0.
    pub x: f64,
}

impl AsegParams {
    pub fn new(n0: u64, alpha: f64, kappa: f64, horizon: f64, x: f64) -> Result<Self> {
        let p = AsegParams {
            n0,
            alpha,
            kappa,
            horizon,
            x,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 {
            return Err(invalid("n0 must be at least 1"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!("alpha = {} must be non-negative", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(invalid(format!("kappa = {} must lie in [0, 1]", self.kappa)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(invalid(format!("horizon = {} must be non-negative", self.horizon)));
        }
        if !(0.0..=1.0).contains(&self.x) {
            return Err(invalid(format!("x = {} must lie in [0, 1]", self.x)));
        }
        Ok(())
    }
}

/// `(up, down)` jump rates from `j` active vertices.
pub fn transition_rates(j: u64, alpha: f64, kappa: f64) -> (f64, f64) {
    let j = j as f64;
    let pairs = j * (j - 1.0) / 2.0;
    (alpha * j + kappa * pairs, pairs)
}

/// Jump-chain probabilities `(p_up, p_down)` from state `k >= 2`.
pub fn jump_chain_probs(k: u64, alpha: f64, kappa: f64) -> Result<(f64, f64)> {
    if k < 2 {
        return Err(invalid(format!("jump chain probabilities need k >= 2, got {k}")));
    }
    let (up, down) = transition_rates(k, alpha, kappa);
    let total = up + down;
    Ok((up / total, down / total))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexCountPath {
    pub n0: u64,
    pub event_times: Vec<f64>,
    /// Count after each event.
    pub counts: Vec<u64>,
    /// Time at which the count passed the ceiling, if it did.
    pub exploded_at: Option<f64>,
}

impl VertexCountPath {
    pub fn final_count(&self) -> u64 {
        *self.counts.last().unwrap_or(&self.n0)
    }

    /// Count at time `t` (right-continuous).
    pub fn count_at(&self, t: f64) -> u64 {
        let idx = self.event_times.partition_point(|&s| s <= t);
        if idx == 0 {
            self.n0
        } else {
            self.counts[idx - 1]
        }
    }
}

fn holding_time(total: f64, rng: &mut Stream) -> f64 {
    let e: f64 = Exp1.sample(rng);
    e / total
}

/// Exact jump-by-jump path on `[0, T]`.
pub fn simulate_vertex_count(
    params: &AsegParams,
    ceiling: u64,
    rng: &mut Stream,
) -> Result<VertexCountPath> {
    params.validate()?;
    let mut j = params.n0;
    let mut t = 0.0;
    let mut event_times = Vec::new();
    let mut counts = Vec::new();
    let mut exploded_at = None;
    loop {
        if j > ceiling {
            exploded_at = Some(t);
            break;
        }
        let (up, down) = transition_rates(j, params.alpha, params.kappa);
        let total = up + down;
        if total <= 0.0 {
            break;
        }
        t += holding_time(total, rng);
        if t > params.horizon {
            break;
        }
        if rng.random::<f64>() * total < up {
            j += 1;
        } else {
            j -= 1;
        }
        event_times.push(t);
        counts.push(j);
    }
    Ok(VertexCountPath {
        n0: params.n0,
        event_times,
        counts,
        exploded_at,
    })
}

/// Settings of the horizon-only sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountSampler {
    /// Jumps are simulated one by one while the count is below this level.
    pub leap_threshold: u64,
    /// Target relative change of the count per leap.
    pub epsilon: f64,
    pub ceiling: u64,
}

impl Default for CountSampler {
    fn default() -> Self {
        CountSampler {
            leap_threshold: 128,
            epsilon: 0.03,
            ceiling: DEFAULT_CEILING,
        }
    }
}

impl CountSampler {
    /// No leaping: every jump is simulated.
    pub fn exact(ceiling: u64) -> Self {
        CountSampler {
            leap_threshold: u64::MAX,
            epsilon: 0.03,
            ceiling,
        }
    }

    pub fn with_ceiling(mut self, ceiling: u64) -> Self {
        self.ceiling = ceiling;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid(format!("leap epsilon {} must lie in (0, 1)", self.epsilon)));
        }
        if self.leap_threshold < 16 {
            return Err(invalid("leap threshold must be at least 16"));
        }
        Ok(())
    }
}

/// State of the count process at the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountOutcome {
    /// Count at the horizon, or at the moment the ceiling was passed.
    pub count: u64,
    pub exploded: bool,
    /// Last time the count entered the watched state, if it ever did.
    pub last_watch_time: Option<f64>,
}

/// Samples `Z_T`, optionally recording visits to `watch` (which must lie
/// below the leap threshold so that no visit is skipped).
pub fn sample_count(
    params: &AsegParams,
    sampler: &CountSampler,
    watch: Option<u64>,
    rng: &mut Stream,
) -> Result<CountOutcome> {
    Ok(sample_count_at(params, sampler, watch, &[params.horizon], rng)?.1)
}

/// Like [`sample_count`], also reporting the count at each of `times`
/// (ascending, at most the horizon). After an explosion every later
/// observation is the count at which the ceiling was passed.
pub fn sample_count_at(
    params: &AsegParams,
    sampler: &CountSampler,
    watch: Option<u64>,
    times: &[f64],
    rng: &mut Stream,
) -> Result<(Vec<u64>, CountOutcome)> {
    params.validate()?;
    sampler.validate()?;
    if let Some(w) = watch {
        if w >= sampler.leap_threshold {
            return Err(invalid("watched state must lie below the leap threshold"));
        }
    }
    if times.windows(2).any(|w| w[1] < w[0])
        || times.iter().any(|&t| !(t >= 0.0 && t <= params.horizon))
    {
        return Err(invalid("observation times must be ascending within [0, horizon]"));
    }
    let (alpha, kappa, horizon) = (params.alpha, params.kappa, params.horizon);
    let mut observed = Vec::with_capacity(times.len());
    let mut j = params.n0;
    let mut t = 0.0;
    let mut last_watch_time = (watch == Some(j)).then_some(0.0);
    // records every pending observation strictly before `until`
    let flush = |observed: &mut Vec<u64>, j: u64, until: f64| {
        while observed.len() < times.len() && times[observed.len()] < until {
            observed.push(j);
        }
    };
    loop {
        if j > sampler.ceiling {
            while observed.len() < times.len() {
                observed.push(j);
            }
            return Ok((
                observed,
                CountOutcome {
                    count: j,
                    exploded: true,
                    last_watch_time,
                },
            ));
        }
        let (up, down) = transition_rates(j, alpha, kappa);
        let total = up + down;
        if total <= 0.0 || t >= horizon {
            break;
        }
        if j < sampler.leap_threshold {
            let next = t + holding_time(total, rng);
            flush(&mut observed, j, next);
            if next > horizon {
                break;
            }
            t = next;
            if rng.random::<f64>() * total < up {
                j += 1;
            } else {
                j -= 1;
            }
            if watch == Some(j) {
                last_watch_time = Some(t);
            }
        } else {
            // observations at exactly t belong to the current state
            flush(&mut observed, j, t + f64::MIN_POSITIVE.max(t * f64::EPSILON));
            let jf = j as f64;
            let eps = sampler.epsilon;
            let mut tau = eps * eps * jf * jf / total;
            let net = (up - down).abs();
            if net > 0.0 {
                tau = tau.min(eps * jf / net);
            }
            let stop = times.get(observed.len()).copied().unwrap_or(horizon);
            tau = tau.min(stop - t).min(horizon - t);
            let n_up = poisson(up * tau, rng);
            let n_down = poisson(down * tau, rng);
            // a leap never legitimately crosses far below the threshold
            j = (j as f64 + n_up - n_down).max(1.0) as u64;
            t = if tau == stop - t { stop } else { t + tau };
        }
    }
    while observed.len() < times.len() {
        observed.push(j);
    }
    Ok((
        observed,
        CountOutcome {
            count: j,
            exploded: false,
            last_watch_time,
        },
    ))
}

fn poisson(mean: f64, rng: &mut Stream) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng)
}

/// Monte Carlo estimate of `E_n[x^{Z_T}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PgfEstimate {
    pub summary: McSummary,
    /// Replicates that passed the ceiling; they contribute `x^ceiling`.
    pub exploded: u64,
}

impl Accumulator for PgfEstimate {
    fn combine(&mut self, other: Self) {
        self.summary.combine(other.summary);
        self.exploded += other.exploded;
    }
}

pub fn pgf_estimate(
    params: &AsegParams,
    replicates: u64,
    sampler: &CountSampler,
    family: StreamFamily,
) -> Result<PgfEstimate> {
    params.validate()?;
    if replicates == 0 {
        return Err(invalid("replicates must be at least 1"));
    }
    mc::try_fold_replicates(
        family,
        replicates,
        || PgfEstimate {
            summary: McSummary::new(),
            exploded: 0,
        },
        |acc, _, rng| {
            let out = sample_count(params, sampler, None, rng)?;
            acc.exploded += out.exploded as u64;
            acc.summary.push(params.x.powf(out.count as f64));
            Ok(())
        },
    )
}

/// Empirical law of `Z_T` at `kappa = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarySample {
    /// Bin `k` counts replicates with `Z_T = k` for `1 <= k <= kmax`; bin
    /// `kmax + 1` collects larger values; bin 0 is unused.
    pub histogram: Histogram,
    pub exploded: u64,
}

impl Accumulator for StationarySample {
    fn combine(&mut self, other: Self) {
        self.histogram.combine(other.histogram);
        self.exploded += other.exploded;
    }
}

impl StationarySample {
    pub fn replicates(&self) -> u64 {
        self.histogram.total()
    }

    /// Empirical `P(Z_T = k)` for `k = 1..=kmax`.
    pub fn pmf(&self) -> Vec<f64> {
        let n = self.replicates().max(1) as f64;
        let kmax = self.histogram.0.len() - 2;
        (1..=kmax).map(|k| self.histogram.0[k] as f64 / n).collect()
    }

    /// Half the summed absolute differences to `reference` on `1..=k`.
    pub fn tv_on_head(&self, reference: &[f64], k: usize) -> f64 {
        let pmf = self.pmf();
        0.5 * (0..k).map(|i| (pmf[i] - reference[i]).abs()).sum::<f64>()
    }

    pub fn tv_to_sibuya(&self, dist: &SibuyaDist, k: usize) -> f64 {
        self.tv_on_head(&dist.pmf_vec(k), k)
    }
}

/// Samples `Z_T` for `kappa = 1`, `alpha < 1/2` across replicates.
pub fn stationary_sample(
    alpha: f64,
    horizon: f64,
    n0: u64,
    replicates: u64,
    kmax: usize,
    sampler: &CountSampler,
    family: StreamFamily,
) -> Result<StationarySample> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(invalid(format!("alpha = {alpha} must lie in [0, 1/2)")));
    }
    let params = AsegParams::new(n0, alpha, 1.0, horizon, 0.5)?;
    mc::try_fold_replicates(
        family,
        replicates,
        || StationarySample {
            histogram: Histogram::zeros(kmax + 2),
            exploded: 0,
        },
        |acc, _, rng| {
            let out = sample_count(&params, sampler, None, rng)?;
            acc.exploded += out.exploded as u64;
            let bin = (out.count as usize).min(kmax + 1);
            acc.histogram.0[bin] += 1;
            Ok(())
        },
    )
}

/// Fraction of replicates whose count enters `state` at some time after
/// `after`.
pub fn return_frequency(
    params: &AsegParams,
    state: u64,
    after: f64,
    replicates: u64,
    sampler: &CountSampler,
    family: StreamFamily,
) -> Result<McSummary> {
    mc::try_summarize(family, replicates, |_, rng| {
        let out = sample_count(params, sampler, Some(state), rng)?;
        Ok(out.last_watch_time.is_some_and(|t| t > after) as u8 as f64)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_rng_stream, RngSpec};

    fn params(n0: u64, alpha: f64, kappa: f64, horizon: f64, x: f64) -> AsegParams {
        AsegParams::new(n0, alpha, kappa, horizon, x).unwrap()
    }

    #[test]
    fn rates() {
        assert_eq!(transition_rates(1, 0.3, 0.7), (0.3, 0.0));
        assert_eq!(transition_rates(2, 0.3, 0.7), (2.0 * 0.3 + 0.7, 1.0));
        assert_eq!(transition_rates(4, 0.0, 1.0), (6.0, 6.0));
    }

    #[test]
    fn jump_chain() {
        for k in [2, 5, 100] {
            assert_eq!(jump_chain_probs(k, 0.0, 1.0).unwrap().0, 0.5);
        }
        let (p, _) = jump_chain_probs(10, 0.25, 1.0).unwrap();
        assert!((p - 47.5 / 92.5).abs() < 1e-15);
        // the remainder after the first-order term shrinks like k^-2
        let rem = |k: u64| {
            let (p, _) = jump_chain_probs(k, 0.25, 1.0).unwrap();
            (p - 0.5 - 0.25 / (2.0 * k as f64)).abs()
        };
        for k in [100u64, 1000] {
            let ratio = rem(k) / rem(10 * k);
            assert!((ratio - 100.0).abs() < 5.0, "ratio {ratio}");
        }
        assert!(jump_chain_probs(1, 0.25, 1.0).is_err());
    }

    #[test]
    fn single_vertex_without_branching_is_frozen() {
        let p = params(1, 0.0, 0.7, 10.0, 0.5);
        let path = simulate_vertex_count(&p, DEFAULT_CEILING, &mut derive_rng_stream(RngSpec::new(1, 0))).unwrap();
        assert!(path.counts.is_empty());
        assert_eq!(path.final_count(), 1);
    }

    #[test]
    fn path_moves_by_one_and_stays_positive() {
        let p = params(4, 0.7, 0.5, 5.0, 0.5);
        let mut g = derive_rng_stream(RngSpec::new(2, 0));
        for _ in 0..50 {
            let path = simulate_vertex_count(&p, 10_000, &mut g).unwrap();
            let mut prev = p.n0;
            for (&c, w) in path.counts.iter().zip(path.event_times.windows(2).map(|w| w[1] - w[0]).chain([1.0])) {
                assert!(c >= 1 && c.abs_diff(prev) == 1);
                assert!(w > 0.0);
                prev = c;
            }
            assert!(path.event_times.iter().all(|&t| t <= 5.0));
        }
    }

    #[test]
    fn absorption_at_one_without_branching() {
        let p = params(5, 0.0, 0.8, 50.0, 0.5);
        let path = simulate_vertex_count(&p, DEFAULT_CEILING, &mut derive_rng_stream(RngSpec::new(3, 0))).unwrap();
        if let Some(i) = path.counts.iter().position(|&c| c == 1) {
            assert!(path.counts[i..].iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn kingman_pair_coalesces_at_unit_rate() {
        let p = params(2, 0.0, 0.0, 1e9, 0.5);
        let s = mc::summarize(StreamFamily::new(4), 10_000, |_, g| {
            simulate_vertex_count(&p, DEFAULT_CEILING, g).unwrap().event_times[0]
        });
        assert!((s.mean - 1.0).abs() < 3.0 * s.std_error(), "{}", s.mean);
    }

    #[test]
    fn transient_regime_grows() {
        let p = params(2, 1.0, 1.0, 50.0, 0.5);
        let mut finals: Vec<u64> = mc::map_replicates(StreamFamily::new(5), 100, |_, g| {
            let path = simulate_vertex_count(&p, 2000, g).unwrap();
            if path.exploded_at.is_some() {
                u64::MAX
            } else {
                path.final_count()
            }
        });
        finals.sort_unstable();
        assert!(finals[50] > 100);
    }

    #[test]
    fn count_at_lookup() {
        let path = VertexCountPath {
            n0: 3,
            event_times: vec![0.5, 1.0],
            counts: vec![4, 3],
            exploded_at: None,
        };
        assert_eq!(path.count_at(0.2), 3);
        assert_eq!(path.count_at(0.5), 4);
        assert_eq!(path.count_at(2.0), 3);
    }

    #[test]
    fn pgf_edges() {
        let s = CountSampler::default();
        let p = params(3, 0.4, 0.6, 0.0, 0.7);
        let e = pgf_estimate(&p, 50, &s, StreamFamily::new(6)).unwrap();
        assert!((e.summary.mean - 0.343).abs() < 1e-12 && e.summary.variance() < 1e-20);
        let p = params(1, 0.0, 0.6, 3.0, 0.7);
        let e = pgf_estimate(&p, 50, &s, StreamFamily::new(6)).unwrap();
        assert_eq!(e.summary.mean, 0.7);
    }

    #[test]
    fn pgf_two_state_closed_form() {
        let p = params(2, 0.0, 0.0, 1.0, 0.5);
        let e = pgf_estimate(&p, 100_000, &CountSampler::default(), StreamFamily::new(7)).unwrap();
        let want = 0.5 + (0.25 - 0.5) * (-1.0f64).exp();
        assert!((e.summary.mean - want).abs() < 3.0 * e.summary.std_error());
    }

    #[test]
    fn exact_sampler_matches_full_path() {
        let p = params(3, 0.25, 1.0, 2.0, 0.5);
        let fam = StreamFamily::new(8);
        for i in 0..200 {
            let a = sample_count(&p, &CountSampler::exact(DEFAULT_CEILING), None, &mut fam.stream(i)).unwrap();
            let b = simulate_vertex_count(&p, DEFAULT_CEILING, &mut fam.stream(i)).unwrap();
            assert_eq!(a.count, b.final_count());
        }
    }

    /// Leaping above a low threshold must not move the head of the law of
    /// `Z_T` beyond sampling noise when compared with exact simulation.
    #[test]
    fn leaping_agrees_with_exact_on_head_of_law() {
        let p = params(5, 0.25, 1.0, 5.0, 0.5);
        let leap = CountSampler {
            leap_threshold: 32,
            ..CountSampler::default()
        };
        let exact = CountSampler::exact(u64::MAX);
        let n = 40_000;
        let fam = StreamFamily::new(9);
        let run = |s: &CountSampler, tag: &str| {
            mc::fold_replicates(fam.child(tag), n, || Histogram::zeros(12), |h, _, g| {
                let c = sample_count(&p, s, None, g).unwrap().count as usize;
                h.0[c.min(11)] += 1;
            })
            .masses()
        };
        let (a, b) = (run(&leap, "leap"), run(&exact, "exact"));
        for k in 1..=10 {
            let se = ((a[k] * (1.0 - a[k]) + b[k] * (1.0 - b[k])) / n as f64).sqrt();
            assert!((a[k] - b[k]).abs() < 4.0 * se + 1e-4, "k = {k}: {} vs {}", a[k], b[k]);
        }
    }

    #[test]
    fn observations_match_separate_runs() {
        let p = params(5, 0.25, 1.0, 3.0, 0.5);
        let fam = StreamFamily::new(11);
        for s in [CountSampler::exact(u64::MAX), CountSampler { leap_threshold: 16, ..CountSampler::default() }] {
            for i in 0..300 {
                let (obs, end) = sample_count_at(&p, &s, None, &[0.0, 1.0, 3.0], &mut fam.stream(i)).unwrap();
                assert_eq!(obs[0], 5);
                assert_eq!(obs[2], end.count);
                // leaps are cut at observation times, so only exact runs
                // reproduce the single-observation stream
                if s.leap_threshold == u64::MAX {
                    let single = sample_count(&p, &s, None, &mut fam.stream(i)).unwrap();
                    assert_eq!(single.count, end.count);
                }
            }
        }
        // exact mode agrees with the full path at intermediate times
        let s = CountSampler::exact(u64::MAX);
        for i in 0..300 {
            let (obs, _) = sample_count_at(&p, &s, None, &[0.7, 1.9], &mut fam.stream(i)).unwrap();
            let path = simulate_vertex_count(&AsegParams { horizon: 1.9, ..p }, u64::MAX, &mut fam.stream(i)).unwrap();
            assert_eq!(obs, vec![path.count_at(0.7), path.count_at(1.9)]);
        }
    }

    #[test]
    fn watch_state_visits() {
        let p = params(2, 0.25, 1.0, 20.0, 0.5);
        let s = CountSampler::default();
        let f = return_frequency(&p, 2, 10.0, 500, &s, StreamFamily::new(10)).unwrap();
        assert!(f.mean > 0.5);
        assert!(sample_count(&p, &s, Some(600), &mut derive_rng_stream(RngSpec::new(1, 1))).is_err());
    }
}
