//! Mergeable running summaries for Monte Carlo output.

/// Count, mean and sum of squared deviations of a sample.
///
/// Updates use Welford's recurrence; merges use the pairwise formula of
/// Chan, Golub and LeVeque, so summaries can be reduced in any tree shape.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct McSummary {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl McSummary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut s = Self::new();
        for &x in xs {
            s.push(x);
        }
        s
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Sample variance (`m2 / (count - 1)`); zero below two observations.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    pub fn merge(&mut self, other: &McSummary) {
        *self = mc_merge(self, other);
    }
}

/// Summary of the concatenation of the two underlying samples.
pub fn mc_merge(a: &McSummary, b: &McSummary) -> McSummary {
    if a.count == 0 {
        return *b;
    }
    if b.count == 0 {
        return *a;
    }
    let n = a.count + b.count;
    let (na, nb, nf) = (a.count as f64, b.count as f64, n as f64);
    let delta = b.mean - a.mean;
    McSummary {
        count: n,
        mean: a.mean + delta * nb / nf,
        m2: a.m2 + b.m2 + delta * delta * na * nb / nf,
    }
}
