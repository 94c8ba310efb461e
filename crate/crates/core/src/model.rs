//! Gamma-Poisson generative model and its Empirical Bayes closed forms.
//!
//! Rates `λ_i ~ Gamma(a, b)` (shape-scale), counts `y_{i,l} | λ_i ~ Poisson(λ_i)`.
//! All inference uses the sufficient statistics `(n_i, σ_i)` only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{require_positive, Error, Result};
use crate::minimize;

/// Gamma prior on the arrival rates: known shape `a`, scale `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub a: f64,
    pub b: f64,
}

impl HyperParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        require_positive("a", a)?;
        require_positive("b", b)?;
        Ok(Self { a, b })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.a, self.b).map(|_| ())
    }

    /// Prior mean `a·b`.
    pub fn prior_mean(&self) -> f64 {
        self.a * self.b
    }

    /// Prior variance `a·b²`.
    pub fn prior_variance(&self) -> f64 {
        self.a * self.b * self.b
    }
}

impl Default for HyperParams {
    fn default() -> Self {
        Self { a: 10.0, b: 1.0 }
    }
}

/// Raw counts collected by a single monitor together with their sum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorData {
    node_id: usize,
    counts: Vec<u64>,
    sigma: u64,
}

impl MonitorData {
    /// `node_id` is 1-based. Fails on an empty sample or if the total overflows.
    pub fn new(node_id: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "monitor {node_id} needs at least one measurement"
            )));
        }
        let sigma = counts
            .iter()
            .try_fold(0u64, |acc, &y| acc.checked_add(y))
            .ok_or(Error::CountOverflow { node: node_id })?;
        Ok(Self {
            node_id,
            counts,
            sigma,
        })
    }

    pub fn node_id(&self) -> usize {
        self.node_id
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Sample size `n_i`.
    pub fn n(&self) -> u64 {
        self.counts.len() as u64
    }

    /// Sufficient statistic `σ_i = Σ_l y_{i,l}`.
    pub fn sigma(&self) -> u64 {
        self.sigma
    }
}

/// One realization of the whole network: true rates plus every monitor's data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkData {
    monitors: Vec<MonitorData>,
    lambdas: Vec<f64>,
    n_total: u64,
    sigma_total: u64,
}

impl NetworkData {
    pub fn new(monitors: Vec<MonitorData>, lambdas: Vec<f64>) -> Result<Self> {
        if monitors.is_empty() {
            return Err(Error::InvalidParameter("network needs at least one node".into()));
        }
        if monitors.len() != lambdas.len() {
            return Err(Error::DimensionMismatch {
                expected: monitors.len(),
                found: lambdas.len(),
            });
        }
        for &l in &lambdas {
            require_positive("lambda", l)?;
        }
        let n_total = monitors.iter().map(MonitorData::n).sum();
        let sigma_total = monitors
            .iter()
            .try_fold(0u64, |acc, m| acc.checked_add(m.sigma()))
            .ok_or(Error::CountOverflow { node: 0 })?;
        Ok(Self {
            monitors,
            lambdas,
            n_total,
            sigma_total,
        })
    }

    pub fn len(&self) -> usize {
        self.monitors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monitors.is_empty()
    }

    pub fn monitors(&self) -> &[MonitorData] {
        &self.monitors
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Total number of measurements `n`.
    pub fn n_total(&self) -> u64 {
        self.n_total
    }

    /// Total count `σ`.
    pub fn sigma_total(&self) -> u64 {
        self.sigma_total
    }

    pub fn sizes(&self) -> Vec<u64> {
        self.monitors.iter().map(MonitorData::n).collect()
    }

    pub fn sigmas(&self) -> Vec<u64> {
        self.monitors.iter().map(MonitorData::sigma).collect()
    }

    /// Closed-form homogeneous estimate `σ / (a n)`.
    pub fn b_hom(&self, a: f64) -> f64 {
        self.sigma_total as f64 / (a * self.n_total as f64)
    }
}

fn validate_sizes(sizes: &[u64]) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::InvalidParameter("sample_sizes is empty".into()));
    }
    if let Some(pos) = sizes.iter().position(|&n| n == 0) {
        return Err(Error::InvalidParameter(format!(
            "sample size of node {} must be at least 1",
            pos + 1
        )));
    }
    Ok(())
}

/// Draws a network from the generative model with a ChaCha20 stream keyed by `seed`.
pub fn sample_network(hp: HyperParams, sample_sizes: &[u64], seed: u64) -> Result<NetworkData> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    sample_network_with(hp, sample_sizes, &mut rng, &[])
}

/// Draws a network from `rng`. Entries of `pinned` (0-based node, rate) override
/// the drawn rate of that node; the Gamma draw is still consumed so the stream
/// layout does not depend on pinning.
pub fn sample_network_with<R: Rng + ?Sized>(
    hp: HyperParams,
    sample_sizes: &[u64],
    rng: &mut R,
    pinned: &[(usize, f64)],
) -> Result<NetworkData> {
    hp.validate()?;
    validate_sizes(sample_sizes)?;
    let gamma = Gamma::new(hp.a, hp.b)
        .map_err(|e| Error::InvalidParameter(format!("gamma prior: {e}")))?;
    let mut lambdas: Vec<f64> = (0..sample_sizes.len()).map(|_| gamma.sample(rng)).collect();
    for &(node, rate) in pinned {
        require_positive("pinned lambda", rate)?;
        let slot = lambdas.get_mut(node).ok_or_else(|| {
            Error::InvalidParameter(format!("pinned node {} out of range", node + 1))
        })?;
        *slot = rate;
    }
    // Gamma draws can underflow to exactly zero for tiny shapes.
    for l in &mut lambdas {
        if *l <= 0.0 {
            *l = f64::MIN_POSITIVE;
        }
    }

    let mut monitors = Vec::with_capacity(sample_sizes.len());
    for (i, (&n_i, &lambda)) in sample_sizes.iter().zip(&lambdas).enumerate() {
        let poisson = Poisson::new(lambda)
            .map_err(|e| Error::InvalidParameter(format!("poisson rate {lambda}: {e}")))?;
        let counts = (0..n_i).map(|_| poisson.sample(rng) as u64).collect();
        monitors.push(MonitorData::new(i + 1, counts)?);
    }
    NetworkData::new(monitors, lambdas)
}

/// Local sample mean `σ_i / n_i`.
pub fn decentralized_estimate(m: &MonitorData) -> f64 {
    m.sigma() as f64 / m.n() as f64
}

/// Per-node ML cost term `f(b; n_i, σ_i) = a log b − (σ_i + a) log(b / (n_i b + 1))`.
///
/// The network cost is the sum of these terms over all nodes.
pub fn ml_cost(b: f64, n_i: u64, sigma_i: u64, a: f64) -> Result<f64> {
    require_positive("b", b)?;
    Ok(cost_term(b, n_i as f64, sigma_i as f64, a))
}

/// Derivative of [`ml_cost`] with respect to `b`: `(a n_i b − σ_i) / (b (n_i b + 1))`.
///
/// The optimizer's published update carries an extra factor `a`; both vanish
/// at the same point. This is the exact derivative of the cost.
pub fn ml_gradient(b: f64, n_i: u64, sigma_i: u64, a: f64) -> Result<f64> {
    require_positive("b", b)?;
    Ok(gradient_term(b, n_i as f64, sigma_i as f64, a))
}

#[inline]
pub(crate) fn cost_term(b: f64, n: f64, sigma: f64, a: f64) -> f64 {
    // a log b − (σ+a)(log b − log(nb+1)) = (σ+a) log(nb+1) − σ log b
    let tail = if sigma > 0.0 { sigma * b.ln() } else { 0.0 };
    (sigma + a) * (n * b).ln_1p() - tail
}

#[inline]
pub(crate) fn gradient_term(b: f64, n: f64, sigma: f64, a: f64) -> f64 {
    log_gradient_term(b, n, sigma, a) / b
}

/// `b · ∂f/∂b`, i.e. the derivative of the cost term with respect to `log b`.
#[inline]
pub(crate) fn log_gradient_term(b: f64, n: f64, sigma: f64, a: f64) -> f64 {
    let nb = n * b;
    if nb <= 1.0 {
        (a * nb - sigma) / (nb + 1.0)
    } else {
        // Finite as b → ∞.
        a - (sigma + a) / (nb + 1.0)
    }
}

/// Log of the negative-binomial marginal `p(y_i | b)`.
pub fn log_marginal(m: &MonitorData, b: f64, a: f64) -> Result<f64> {
    require_positive("b", b)?;
    require_positive("a", a)?;
    let sigma = m.sigma() as f64;
    let n = m.n() as f64;
    let log_fact: f64 = m.counts().iter().map(|&y| ln_gamma(y as f64 + 1.0)).sum();
    Ok(ln_gamma(sigma + a) - ln_gamma(a) - a * b.ln() - log_fact
        + (sigma + a) * (b.ln() - (n * b).ln_1p()))
}

/// Gamma posterior of `λ_i` given the data: `(σ_i + a, b / (n_i b + 1))`.
pub fn posterior_params(m: &MonitorData, b: f64, a: f64) -> Result<(f64, f64)> {
    require_positive("b", b)?;
    let n = m.n() as f64;
    Ok((m.sigma() as f64 + a, b / (n * b + 1.0)))
}

/// Posterior-mean (MMSE) estimate of `λ_i` under a plug-in scale `b_hat`.
///
/// With `b_hat` set to the homogeneous estimate this is the ad-hoc estimator.
pub fn mmse_estimate(m: &MonitorData, b_hat: f64, a: f64) -> Result<f64> {
    require_positive("b_hat", b_hat)?;
    Ok(shrink(b_hat, m.n() as f64, m.sigma() as f64, a))
}

#[inline]
pub(crate) fn shrink(b_hat: f64, n: f64, sigma: f64, a: f64) -> f64 {
    (a + sigma) / (n + b_hat.recip())
}

/// Outcome of the centralized ML search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlFit {
    pub b_hat: f64,
    pub cost: f64,
    /// Number of distinct basins seen by the multistart scan.
    pub local_minima: usize,
}

const SCAN_POINTS: usize = 64;
const SCAN_SPAN: f64 = 1e6;
const LOG_TOL: f64 = 1e-10;

/// Global minimizer of the network ML cost.
pub fn centralized_ml(data: &NetworkData, a: f64) -> Result<f64> {
    centralized_ml_fit(data, a).map(|fit| fit.b_hat)
}

pub fn centralized_ml_fit(data: &NetworkData, a: f64) -> Result<MlFit> {
    ml_fit_from_stats(&data.sizes(), &data.sigmas(), a)
}

/// ML estimate of `b` from sufficient statistics alone.
///
/// The search runs on `log b`: a 64-point log-uniform scan over
/// `[1e-6, 1e6]·σ/(a n)`, golden-section refinement of every scanned basin to
/// `1e-10` in `log b`, then a derivative-sign bisection that resolves the
/// minimizer to machine precision.
pub fn ml_fit_from_stats(sizes: &[u64], sigmas: &[u64], a: f64) -> Result<MlFit> {
    require_positive("a", a)?;
    validate_sizes(sizes)?;
    if sizes.len() != sigmas.len() {
        return Err(Error::DimensionMismatch {
            expected: sizes.len(),
            found: sigmas.len(),
        });
    }
    let n_total: u64 = sizes.iter().sum();
    let sigma_total: u64 = sigmas.iter().sum();
    if sigma_total == 0 {
        return Err(Error::DegenerateData(
            "no arrivals in the network; the ML cost has no minimizer in (0, ∞)".into(),
        ));
    }
    let stats: Vec<(f64, f64)> = sizes
        .iter()
        .zip(sigmas)
        .map(|(&n, &s)| (n as f64, s as f64))
        .collect();
    let cost = |u: f64| {
        let b = u.exp();
        stats.iter().map(|&(n, s)| cost_term(b, n, s, a)).sum::<f64>()
    };
    let slope = |u: f64| {
        let b = u.exp();
        stats.iter().map(|&(n, s)| log_gradient_term(b, n, s, a)).sum::<f64>()
    };

    let center = (sigma_total as f64 / (a * n_total as f64)).ln();
    let half = SCAN_SPAN.ln();
    let step = 2.0 * half / (SCAN_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..SCAN_POINTS).map(|k| center - half + step * k as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&u| cost(u)).collect();
    let basins = minimize::grid_local_minima(&values);

    let mut best: Option<(f64, f64)> = None;
    for &k in &basins {
        let lo = grid[k.saturating_sub(1)];
        let hi = grid[(k + 1).min(SCAN_POINTS - 1)];
        let br = minimize::golden_section(cost, lo, hi, LOG_TOL, 400);
        // Below sqrt(eps) cost comparisons are noise and the bracket can drift
        // off the minimizer; re-bracket on the derivative sign before bisecting.
        let mut width = (br.hi - br.lo).max(LOG_TOL);
        let (mut s_lo, mut s_hi) = (br.x_min - width, br.x_min + width);
        for _ in 0..64 {
            if slope(s_lo) <= 0.0 {
                break;
            }
            s_lo -= width;
            width *= 2.0;
        }
        let mut width = (br.hi - br.lo).max(LOG_TOL);
        for _ in 0..64 {
            if slope(s_hi) >= 0.0 {
                break;
            }
            s_hi += width;
            width *= 2.0;
        }
        let u = if slope(s_lo) <= 0.0 && slope(s_hi) >= 0.0 {
            minimize::bisect_derivative(slope, s_lo, s_hi)
        } else {
            br.x_min
        };
        let f = cost(u);
        if best.is_none_or(|(_, fb)| f < fb) {
            best = Some((u, f));
        }
    }
    let (u, f) = best.ok_or_else(|| Error::DegenerateData("ML scan found no basin".into()))?;
    Ok(MlFit {
        b_hat: u.exp(),
        cost: f,
        local_minima: basins.len(),
    })
}

/// Network cost `Σ_i f(b; n_i, σ_i)`.
pub fn network_cost(data: &NetworkData, b: f64, a: f64) -> Result<f64> {
    require_positive("b", b)?;
    Ok(data
        .monitors()
        .iter()
        .map(|m| cost_term(b, m.n() as f64, m.sigma() as f64, a))
        .sum())
}
