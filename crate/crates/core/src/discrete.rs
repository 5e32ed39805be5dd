//! The discrete Wright-Fisher model with efficiency.
//!
//! Each generation starts with `N` units of resource. Offspring are produced
//! one at a time; an efficient (type 0) individual costs `1 - kappa` units
//! and an inefficient (type 1) one costs a full unit. Parents are chosen
//! from the previous generation, with type 0 chosen with probability
//! [`parent_type_prob`]. Two stopping rules close a generation:
//!
//! * [`StoppingRule::M1`]: production continues while the cumulative cost
//!   is below `N`; the individual that reaches or passes `N` is kept.
//! * [`StoppingRule::M2`]: an individual that would push the cost above `N`
//!   is discarded and production stops; hitting `N` exactly also stops.
//!
//! When `kappa = a/b` is rational, costs are tracked as integers in units of
//! `1/b`, so every stopping decision is exact.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{invalid, Error, Result};
use crate::mc::{self, Histogram};
use crate::rational::Rational;
use crate::rng::{Stream, StreamFamily};
use crate::summary::McSummary;

/// Tolerance used when `kappa` is an arbitrary real (rule M1 only): a
/// cumulative cost within this distance of `N` counts as having reached it.
pub const REAL_COST_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StoppingRule {
    M1,
    M2,
}

impl std::str::FromStr for StoppingRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(StoppingRule::M1),
            "m2" => Ok(StoppingRule::M2),
            _ => Err(invalid(format!("unknown stopping rule '{s}' (expected m1 or m2)"))),
        }
    }
}

/// Efficiency parameter: exact rational or (rule M1 only) a real number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Efficiency {
    Exact(Rational),
    Real(f64),
}

impl Efficiency {
    pub fn value(&self) -> f64 {
        match self {
            Efficiency::Exact(r) => r.to_f64(),
            Efficiency::Real(k) => *k,
        }
    }

    pub fn exact(&self) -> Option<Rational> {
        match self {
            Efficiency::Exact(r) => Some(*r),
            Efficiency::Real(_) => None,
        }
    }
}

impl From<Rational> for Efficiency {
    fn from(r: Rational) -> Self {
        Efficiency::Exact(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteConfig {
    /// Resource available per generation (`N`).
    pub resource_n: u64,
    pub kappa: Efficiency,
    /// Selection coefficient against type 0, in `[0, 1)`.
    pub s: f64,
    pub rule: StoppingRule,
    /// Initial-frequency parameter `x`.
    pub x0: f64,
    pub max_generations: u64,
}

impl DiscreteConfig {
    /// Validated configuration with `max_generations = 100 N`.
    pub fn new(
        resource_n: u64,
        kappa: impl Into<Efficiency>,
        s: f64,
        rule: StoppingRule,
        x0: f64,
    ) -> Result<Self> {
        let cfg = DiscreteConfig {
            resource_n,
            kappa: kappa.into(),
            s,
            rule,
            x0,
            max_generations: resource_n.saturating_mul(100).max(1),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_max_generations(mut self, max_generations: u64) -> Result<Self> {
        self.max_generations = max_generations;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resource_n == 0 {
            return Err(invalid("resource N must be a positive integer"));
        }
        match self.kappa {
            Efficiency::Exact(r) => {
                if !r.in_unit_interval() {
                    return Err(invalid(format!("kappa = {r} must lie in [0, 1]")));
                }
                (self.resource_n as u128 * r.denom() as u128 <= i64::MAX as u128)
                    .then_some(())
                    .ok_or_else(|| invalid("N times the denominator of kappa overflows"))?;
            }
            Efficiency::Real(k) => {
                if !(0.0..=1.0).contains(&k) {
                    return Err(invalid(format!("kappa = {k} must lie in [0, 1]")));
                }
                if self.rule == StoppingRule::M2 {
                    return Err(invalid("rule M2 needs kappa as an exact fraction a/b"));
                }
            }
        }
        if !(0.0..1.0).contains(&self.s) {
            return Err(invalid(format!("s = {} must lie in [0, 1)", self.s)));
        }
        if !(0.0..=1.0).contains(&self.x0) {
            return Err(invalid(format!("x0 = {} must lie in [0, 1]", self.x0)));
        }
        if self.max_generations == 0 {
            return Err(invalid("max_generations must be positive"));
        }
        Ok(())
    }
}

/// Final cost of a generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Consumed {
    Exact(Rational),
    Approx(f64),
}

impl Consumed {
    pub fn to_f64(&self) -> f64 {
        match self {
            Consumed::Exact(r) => r.to_f64(),
            Consumed::Approx(v) => *v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generation {
    pub size_m: u64,
    pub count_type0: u64,
    pub consumed: Consumed,
}

impl Generation {
    pub fn frequency(&self) -> f64 {
        self.count_type0 as f64 / self.size_m as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Absorbing {
    AllEfficient,
    AllInefficient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTrajectory {
    pub generations: Vec<Generation>,
    pub absorbed_at: Option<usize>,
    pub absorbed_state: Option<Absorbing>,
}

/// Result of a fixation run; censoring is reported, never dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixationOutcome {
    Absorbed { winner: Absorbing, generations: u64 },
    Censored { generations: u64, frequency: f64 },
}

/// `N_x = N / (1 - kappa x)`, the population size a resource budget `N`
/// supports at efficient frequency `x`.
pub fn effective_size_nx(resource_n: u64, kappa: f64, x: f64) -> Result<f64> {
    if kappa * x >= 1.0 {
        return Err(invalid(format!("kappa * x = {} must be below 1", kappa * x)));
    }
    Ok(resource_n as f64 / (1.0 - kappa * x))
}

/// Probability that a newborn picks a type 0 parent when the parental
/// frequency of type 0 is `x`: `(1 - s) x / (1 - s x)`.
pub fn parent_type_prob(x: f64, s: f64) -> f64 {
    if s == 0.0 {
        return x;
    }
    (1.0 - s) * x / (1.0 - s * x)
}

fn absorbing_state(count_type0: u64, size_m: u64) -> Option<Absorbing> {
    if count_type0 == 0 {
        Some(Absorbing::AllInefficient)
    } else if count_type0 == size_m {
        Some(Absorbing::AllEfficient)
    } else {
        None
    }
}

/// Generation 0: `floor(N_x)` individuals of which `floor(x N_x)` are efficient.
pub fn initial_generation(config: &DiscreteConfig) -> Result<Generation> {
    config.validate()?;
    let nx = effective_size_nx(config.resource_n, config.kappa.value(), config.x0)?;
    // absorb rounding noise such as 19.999999999999996 for N_x = 20
    let size_m = (nx + 1e-9).floor() as u64;
    let count_type0 = ((config.x0 * nx + 1e-9).floor() as u64).min(size_m);
    let consumed = match config.kappa {
        Efficiency::Exact(k) => {
            let saved = k
                .checked_mul(&Rational::integer(count_type0 as i64))
                .ok_or_else(|| invalid("initial cost overflows"))?;
            let cost = Rational::integer(size_m as i64)
                .checked_add(&Rational::new(-saved.numer(), saved.denom())?)
                .ok_or_else(|| invalid("initial cost overflows"))?;
            Consumed::Exact(cost)
        }
        Efficiency::Real(k) => Consumed::Approx(size_m as f64 - k * count_type0 as f64),
    };
    Ok(Generation {
        size_m,
        count_type0,
        consumed,
    })
}

/// Per-individual costs in units of `1/den`.
#[derive(Debug, Clone, Copy)]
struct UnitLedger {
    budget: u64,
    efficient: u64,
    inefficient: u64,
    den: u64,
}

/// A generation together with the leftover `N - C` (in units of `1/den`)
/// at the first moment the cumulative cost exceeded `N - 1`.
#[derive(Debug, Clone, Copy)]
struct Built {
    size_m: u64,
    count_type0: u64,
    used: u64,
    leftover_at_crossing: Option<u64>,
}

fn build_exact(ledger: UnitLedger, p: f64, rule: StoppingRule, rng: &mut Stream) -> Built {
    let UnitLedger {
        budget,
        efficient,
        inefficient,
        ..
    } = ledger;
    let mut used = 0u64;
    let mut size_m = 0u64;
    let mut count_type0 = 0u64;
    let mut leftover = None;
    let threshold = budget.saturating_sub(inefficient);
    loop {
        // A block of k individuals costs at most k units, so while k units
        // still fit below N - 1 nobody in the block can stop production or
        // cross N - 1; only the number of efficient draws matters.
        let k = (budget - used) / inefficient;
        if k >= 2 {
            let k = k - 1;
            let b = if p <= 0.0 {
                0
            } else if p >= 1.0 {
                k
            } else {
                Binomial::new(k, p).expect("valid binomial").sample(rng)
            };
            used += k * inefficient - b * (inefficient - efficient);
            size_m += k;
            count_type0 += b;
            continue;
        }
        let is_efficient = rng.random::<f64>() < p;
        let cost = if is_efficient { efficient } else { inefficient };
        match rule {
            StoppingRule::M1 => {
                used += cost;
                size_m += 1;
                count_type0 += is_efficient as u64;
                if leftover.is_none() && used > threshold {
                    leftover = Some(budget.saturating_sub(used));
                }
                if used >= budget {
                    break;
                }
            }
            StoppingRule::M2 => {
                if used + cost > budget {
                    break;
                }
                used += cost;
                size_m += 1;
                count_type0 += is_efficient as u64;
                if leftover.is_none() && used > threshold {
                    leftover = Some(budget - used);
                }
                if used == budget {
                    break;
                }
            }
        }
    }
    Built {
        size_m,
        count_type0,
        used,
        leftover_at_crossing: leftover,
    }
}

fn build_real(resource_n: u64, kappa: f64, p: f64, rng: &mut Stream) -> (u64, u64, f64) {
    let budget = resource_n as f64;
    let efficient = 1.0 - kappa;
    let mut used = 0.0f64;
    let mut size_m = 0u64;
    let mut count_type0 = 0u64;
    loop {
        let remaining = budget - used;
        if remaining >= 2.0 + REAL_COST_GUARD {
            let k = (remaining - REAL_COST_GUARD).floor() as u64 - 1;
            let b = if p <= 0.0 {
                0
            } else if p >= 1.0 {
                k
            } else {
                Binomial::new(k, p).expect("valid binomial").sample(rng)
            };
            used += (k - b) as f64 + b as f64 * efficient;
            size_m += k;
            count_type0 += b;
            continue;
        }
        let is_efficient = rng.random::<f64>() < p;
        used += if is_efficient { efficient } else { 1.0 };
        size_m += 1;
        count_type0 += is_efficient as u64;
        if used >= budget - REAL_COST_GUARD {
            break;
        }
    }
    (size_m, count_type0, used)
}

fn exact_ledger(resource_n: u64, kappa: Rational) -> UnitLedger {
    let den = kappa.denom() as u64;
    let a = kappa.numer() as u64;
    UnitLedger {
        budget: resource_n * den,
        efficient: den - a,
        inefficient: den,
        den,
    }
}

fn check_terminates(config: &DiscreteConfig, p: f64) -> Result<()> {
    if config.kappa.value() >= 1.0 && p >= 1.0 {
        return Err(invalid(
            "kappa = 1 with an all-efficient parental pool never exhausts the resource",
        ));
    }
    Ok(())
}

/// Builds the next generation from parental efficient frequency `prev_freq`.
pub fn next_generation(
    prev_freq: f64,
    config: &DiscreteConfig,
    rng: &mut Stream,
) -> Result<Generation> {
    if !(0.0..=1.0).contains(&prev_freq) {
        return Err(invalid(format!("frequency {prev_freq} outside [0, 1]")));
    }
    let p = parent_type_prob(prev_freq, config.s);
    check_terminates(config, p)?;
    Ok(next_generation_unchecked(p, config, rng))
}

fn next_generation_unchecked(p: f64, config: &DiscreteConfig, rng: &mut Stream) -> Generation {
    match config.kappa {
        Efficiency::Exact(k) => {
            let ledger = exact_ledger(config.resource_n, k);
            let built = build_exact(ledger, p, config.rule, rng);
            let consumed = Rational::new(built.used as i64, ledger.den as i64)
                .expect("denominator is positive");
            Generation {
                size_m: built.size_m,
                count_type0: built.count_type0,
                consumed: Consumed::Exact(consumed),
            }
        }
        Efficiency::Real(k) => {
            let (size_m, count_type0, used) = build_real(config.resource_n, k, p, rng);
            Generation {
                size_m,
                count_type0,
                consumed: Consumed::Approx(used),
            }
        }
    }
}

/// Iterates generations until the efficient frequency hits 0 or 1 or
/// `max_generations` further generations have been produced.
pub fn simulate_trajectory(config: &DiscreteConfig, rng: &mut Stream) -> Result<DiscreteTrajectory> {
    let first = initial_generation(config)?;
    let mut generations = vec![first];
    let mut state = absorbing_state(first.count_type0, first.size_m);
    let mut produced = 0u64;
    while state.is_none() && produced < config.max_generations {
        let prev = generations.last().expect("non-empty").frequency();
        let g = next_generation(prev, config, rng)?;
        state = absorbing_state(g.count_type0, g.size_m);
        generations.push(g);
        produced += 1;
    }
    let absorbed_at = state.map(|_| generations.len() - 1);
    Ok(DiscreteTrajectory {
        generations,
        absorbed_at,
        absorbed_state: state,
    })
}

/// Runs one trajectory without recording it and reports the absorbing
/// state and absorption generation, or a censored result.
pub fn fixation_trial(config: &DiscreteConfig, rng: &mut Stream) -> Result<FixationOutcome> {
    let first = initial_generation(config)?;
    let mut freq = first.frequency();
    let mut state = absorbing_state(first.count_type0, first.size_m);
    let mut produced = 0u64;
    while state.is_none() {
        if produced >= config.max_generations {
            return Ok(FixationOutcome::Censored {
                generations: produced,
                frequency: freq,
            });
        }
        let g = next_generation(freq, config, rng)?;
        produced += 1;
        freq = g.frequency();
        state = absorbing_state(g.count_type0, g.size_m);
    }
    Ok(FixationOutcome::Absorbed {
        winner: state.expect("loop exits on absorption"),
        generations: produced,
    })
}

/// Aggregate of many fixation trials.
#[derive(Debug, Clone, PartialEq)]
pub struct FixationStudy {
    /// Indicator of absorption in the all-efficient state, over absorbed runs.
    pub efficient_wins: McSummary,
    /// Absorption generation over absorbed runs.
    pub generations: McSummary,
    pub censored: u64,
}

impl mc::Accumulator for FixationStudy {
    fn combine(&mut self, other: Self) {
        self.efficient_wins.merge(&other.efficient_wins);
        self.generations.merge(&other.generations);
        self.censored += other.censored;
    }
}

pub fn fixation_study(
    config: &DiscreteConfig,
    replicates: u64,
    family: StreamFamily,
) -> Result<FixationStudy> {
    initial_generation(config)?;
    mc::try_fold_replicates(
        family,
        replicates,
        || FixationStudy {
            efficient_wins: McSummary::new(),
            generations: McSummary::new(),
            censored: 0,
        },
        |acc, _, rng| {
            match fixation_trial(config, rng)? {
                FixationOutcome::Absorbed {
                    winner,
                    generations,
                } => {
                    acc.efficient_wins
                        .push((winner == Absorbing::AllEfficient) as u8 as f64);
                    acc.generations.push(generations as f64);
                }
                FixationOutcome::Censored { .. } => acc.censored += 1,
            }
            Ok(())
        },
    )
}

/// Empirical law of the leftover `N - C` at the first time the cost of a
/// rule-M2 generation exceeds `N - 1`; returns masses on `{j/b : j < b}`.
pub fn leftover_distribution(
    config: &DiscreteConfig,
    prev_freq: f64,
    replicates: u64,
    family: StreamFamily,
) -> Result<Vec<f64>> {
    config.validate()?;
    let kappa = match (config.rule, config.kappa) {
        (StoppingRule::M2, Efficiency::Exact(k)) => k,
        _ => return Err(invalid("leftover distribution needs rule M2 with exact kappa = a/b")),
    };
    if kappa.is_zero() || kappa >= Rational::ONE {
        return Err(invalid("leftover distribution needs 0 < kappa < 1"));
    }
    if !(0.0..=1.0).contains(&prev_freq) {
        return Err(invalid(format!("frequency {prev_freq} outside [0, 1]")));
    }
    let ledger = exact_ledger(config.resource_n, kappa);
    let p = parent_type_prob(prev_freq, config.s);
    let bins = ledger.den as usize;
    let hist = mc::fold_replicates(
        family,
        replicates,
        || Histogram::zeros(bins),
        |acc, _, rng| {
            let built = build_exact(ledger, p, StoppingRule::M2, rng);
            let j = built
                .leftover_at_crossing
                .expect("an M2 generation always crosses N - 1");
            acc.0[j as usize] += 1;
        },
    );
    Ok(hist.masses())
}

/// The `b`-state chain of fractional leftovers `ceil(C) - C` on
/// `{0, 1/b, ..., (b-1)/b}` when `kappa = a/b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeftoverChain {
    pub a: u64,
    pub b: u64,
    pub x: f64,
}

impl LeftoverChain {
    pub fn new(a: u64, b: u64, x: f64) -> Result<Self> {
        if b == 0 || a == 0 || a >= b {
            return Err(invalid(format!("need 0 < a < b, got a = {a}, b = {b}")));
        }
        if !(0.0..=1.0).contains(&x) {
            return Err(invalid(format!("x = {x} outside [0, 1]")));
        }
        Ok(LeftoverChain { a, b, x })
    }

    pub fn from_kappa(kappa: Rational, x: f64) -> Result<Self> {
        if kappa.numer() <= 0 {
            return Err(invalid("kappa must be positive"));
        }
        Self::new(kappa.numer() as u64, kappa.denom() as u64, x)
    }

    /// Row `j` puts mass `x` on state `j - a (mod b)` and `1 - x` on `j`.
    pub fn transition_matrix(&self) -> nalgebra::DMatrix<f64> {
        let b = self.b as usize;
        let a = self.a as usize;
        let mut m = nalgebra::DMatrix::zeros(b, b);
        for j in 0..b {
            m[(j, (j + b - a) % b)] += self.x;
            m[(j, j)] += 1.0 - self.x;
        }
        m
    }
}

/// Stationary distribution of the leftover chain, solved directly.
pub fn leftover_chain_stationary(chain: &LeftoverChain) -> Result<Vec<f64>> {
    if chain.x <= 0.0 || chain.x >= 1.0 {
        return Err(Error::DegenerateChain(format!(
            "x = {} leaves the chain reducible or periodic",
            chain.x
        )));
    }
    if num_integer::gcd(chain.a, chain.b) != 1 {
        return Err(Error::DegenerateChain(format!(
            "gcd({}, {}) != 1, chain is reducible",
            chain.a, chain.b
        )));
    }
    let b = chain.b as usize;
    let p = chain.transition_matrix();
    // pi (P - I) = 0 with one balance equation swapped for sum(pi) = 1
    let mut system = p.transpose() - nalgebra::DMatrix::<f64>::identity(b, b);
    let mut rhs = nalgebra::DVector::<f64>::zeros(b);
    for c in 0..b {
        system[(b - 1, c)] = 1.0;
    }
    rhs[b - 1] = 1.0;
    let pi = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::DegenerateChain("singular balance equations".into()))?;
    Ok(pi.iter().copied().collect())
}

/// Monte Carlo estimate of `P(M / N_x in [1 - N^a, 1 + N^a])` for one
/// neutral generation built from frequency `x`.
pub fn concentration_probe(
    config: &DiscreteConfig,
    x: f64,
    a_exponent: f64,
    replicates: u64,
    family: StreamFamily,
) -> Result<McSummary> {
    config.validate()?;
    if config.s != 0.0 {
        return Err(invalid("the concentration probe is defined for the neutral rule (s = 0)"));
    }
    if !(a_exponent > -0.5 && a_exponent < 0.0) {
        return Err(invalid(format!("exponent a = {a_exponent} must lie in (-1/2, 0)")));
    }
    let nx = effective_size_nx(config.resource_n, config.kappa.value(), x)?;
    check_terminates(config, x)?;
    let width = (config.resource_n as f64).powf(a_exponent);
    let (lo, hi) = (1.0 - width, 1.0 + width);
    Ok(mc::summarize(family, replicates, |_, rng| {
        let g = next_generation_unchecked(x, config, rng);
        let ratio = g.size_m as f64 / nx;
        ((lo..=hi).contains(&ratio)) as u8 as f64
    }))
}

/// Monte Carlo summary of the one-generation increment `X_{n+1} - x`.
pub fn one_step_increment(
    config: &DiscreteConfig,
    x: f64,
    replicates: u64,
    family: StreamFamily,
) -> Result<McSummary> {
    config.validate()?;
    let p = parent_type_prob(x, config.s);
    check_terminates(config, p)?;
    Ok(mc::summarize(family, replicates, |_, rng| {
        next_generation_unchecked(p, config, rng).frequency() - x
    }))
}
