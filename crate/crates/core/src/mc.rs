//! Reproducible parallel replicate execution.
//!
//! Replicate `i` always draws from stream `i` of its family and replicates
//! are reduced in fixed blocks of [`BLOCK`], merged in block order. Results
//! are therefore identical for any rayon pool size.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{Stream, StreamFamily};
use crate::summary::{mc_merge, McSummary};

pub const BLOCK: u64 = 1024;

/// Partial results that can be combined left to right.
pub trait Accumulator: Send {
    fn combine(&mut self, other: Self);
}

impl Accumulator for McSummary {
    fn combine(&mut self, other: Self) {
        *self = mc_merge(self, &other);
    }
}

impl Accumulator for u64 {
    fn combine(&mut self, other: Self) {
        *self += other;
    }
}

impl<A: Accumulator, B: Accumulator> Accumulator for (A, B) {
    fn combine(&mut self, other: Self) {
        self.0.combine(other.0);
        self.1.combine(other.1);
    }
}

impl<A: Accumulator> Accumulator for Vec<A> {
    fn combine(&mut self, other: Self) {
        assert_eq!(self.len(), other.len(), "accumulator shapes differ");
        for (a, b) in self.iter_mut().zip(other) {
            a.combine(b);
        }
    }
}

/// Integer tallies over a fixed number of bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram(pub Vec<u64>);

impl Histogram {
    pub fn zeros(bins: usize) -> Self {
        Histogram(vec![0; bins])
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    /// Bin masses normalised by the total count.
    pub fn masses(&self) -> Vec<f64> {
        let n = self.total().max(1) as f64;
        self.0.iter().map(|&c| c as f64 / n).collect()
    }
}

impl Accumulator for Histogram {
    fn combine(&mut self, other: Self) {
        assert_eq!(self.0.len(), other.0.len(), "histogram shapes differ");
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a += b;
        }
    }
}

/// Runs `replicates` jobs, folding each block with `step` into a fresh
/// accumulator from `init`, then combining blocks in order.
pub fn fold_replicates<A, I, F>(family: StreamFamily, replicates: u64, init: I, step: F) -> A
where
    A: Accumulator,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, u64, &mut Stream) + Sync,
{
    let blocks = replicates.div_ceil(BLOCK);
    let partials: Vec<A> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = init();
            let end = ((b + 1) * BLOCK).min(replicates);
            for i in b * BLOCK..end {
                let mut rng = family.stream(i);
                step(&mut acc, i, &mut rng);
            }
            acc
        })
        .collect();
    let mut out = init();
    for p in partials {
        out.combine(p);
    }
    out
}

/// Monte Carlo summary of a scalar observable.
pub fn summarize<F>(family: StreamFamily, replicates: u64, f: F) -> McSummary
where
    F: Fn(u64, &mut Stream) -> f64 + Sync,
{
    fold_replicates(family, replicates, McSummary::new, |acc, i, rng| acc.push(f(i, rng)))
}

/// Accumulator that keeps the first error (in replicate order) instead of
/// aborting the whole run.
#[derive(Debug, Clone)]
pub struct Fallible<A> {
    pub value: A,
    pub error: Option<Error>,
}

impl<A: Accumulator> Accumulator for Fallible<A> {
    fn combine(&mut self, other: Self) {
        if self.error.is_none() {
            self.error = other.error;
        }
        self.value.combine(other.value);
    }
}

/// Like [`fold_replicates`] with a fallible step; the first error wins.
pub fn try_fold_replicates<A, I, F>(family: StreamFamily, replicates: u64, init: I, step: F) -> Result<A>
where
    A: Accumulator,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, u64, &mut Stream) -> Result<()> + Sync,
{
    let out = fold_replicates(
        family,
        replicates,
        || Fallible {
            value: init(),
            error: None,
        },
        |acc, i, rng| {
            if acc.error.is_none() {
                if let Err(e) = step(&mut acc.value, i, rng) {
                    acc.error = Some(e);
                }
            }
        },
    );
    match out.error {
        Some(e) => Err(e),
        None => Ok(out.value),
    }
}

/// Like [`summarize`] with a fallible observable.
pub fn try_summarize<F>(family: StreamFamily, replicates: u64, f: F) -> Result<McSummary>
where
    F: Fn(u64, &mut Stream) -> Result<f64> + Sync,
{
    try_fold_replicates(family, replicates, McSummary::new, |acc, i, rng| {
        acc.push(f(i, rng)?);
        Ok(())
    })
}

/// Collects one value per replicate, in replicate order.
pub fn map_replicates<T, F>(family: StreamFamily, replicates: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut Stream) -> T + Sync,
{
    (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = family.stream(i);
            f(i, &mut rng)
        })
        .collect()
}
