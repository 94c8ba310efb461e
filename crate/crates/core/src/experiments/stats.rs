//! Streaming moments with an exact pairwise merge.

use serde::{Deserialize, Serialize};

/// Welford accumulator of count, mean and centred second moment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Accumulator {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Chan et al. combination; `self` then holds the union of both samples.
    pub fn merge(&mut self, other: &Accumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let d = other.mean - self.mean;
        self.mean += d * nb / n;
        self.m2 += other.m2 + d * d * na * nb / n;
        self.count += other.count;
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Standard error of the mean.
    pub fn std_err(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Moments of one recorded estimator against its ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SeriesStats {
    /// Moments of the estimate `ω̂`.
    pub estimate: Accumulator,
    /// Moments of the error `ω̂ − ω`.
    pub error: Accumulator,
    /// Moments of the squared error `(ω̂ − ω)²`.
    pub sq_error: Accumulator,
}

impl SeriesStats {
    pub fn push(&mut self, estimate: f64, truth: f64) {
        let e = estimate - truth;
        self.estimate.push(estimate);
        self.error.push(e);
        self.sq_error.push(e * e);
    }

    pub fn merge(&mut self, other: &SeriesStats) {
        self.estimate.merge(&other.estimate);
        self.error.merge(&other.error);
        self.sq_error.merge(&other.sq_error);
    }

    pub fn count(&self) -> u64 {
        self.estimate.count
    }

    /// `√((1/M) Σ (ω̂[m] − ω)²)`.
    pub fn rmse(&self) -> f64 {
        self.sq_error.mean.sqrt()
    }

    /// Delta-method standard error of [`rmse`](Self::rmse).
    pub fn rmse_std_err(&self) -> f64 {
        let r = self.rmse();
        if r == 0.0 {
            0.0
        } else {
            self.sq_error.std_err() / (2.0 * r)
        }
    }
}

/// A fixed-layout bank of [`SeriesStats`]; each experiment assigns indices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleStats {
    pub series: Vec<SeriesStats>,
}

impl SampleStats {
    pub fn new(len: usize) -> Self {
        Self {
            series: vec![SeriesStats::default(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    #[inline]
    pub fn push(&mut self, idx: usize, estimate: f64, truth: f64) {
        self.series[idx].push(estimate, truth);
    }

    pub fn merge(&mut self, other: &SampleStats) {
        assert_eq!(self.len(), other.len(), "merging stats of different layouts");
        for (a, b) in self.series.iter_mut().zip(&other.series) {
            a.merge(b);
        }
    }

    pub fn get(&self, idx: usize) -> &SeriesStats {
        &self.series[idx]
    }
}
