//! Ad-hoc distributed estimator: push-sum on `(σ_i, n_i)` with a local
//! homogeneous readout `b̂_i(t) = s_i(t) / (a η_i(t))` and the MMSE plug-in.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::graph::{WeightMatrix, WeightSource};
use crate::model::{shrink, NetworkData};
use crate::trace::{spread, Readout, Trace};

/// Whether a designated node feeds its own data into the consensus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Participation {
    #[default]
    Included,
    /// `node` starts with `s = η = 0`. Until mass reaches it, it borrows the
    /// estimate of `proxy`. Its `λ̂` still uses its own `σ`.
    Excluded { node: usize, proxy: usize },
}

impl Participation {
    pub fn validate(&self, n: usize) -> Result<()> {
        if let Participation::Excluded { node, proxy } = *self {
            if node >= n || proxy >= n || node == proxy {
                return Err(Error::InvalidParameter(format!(
                    "excluded node {} / proxy {} invalid for N={n}",
                    node + 1,
                    proxy + 1
                )));
            }
        }
        Ok(())
    }

    pub fn excluded(&self) -> Option<usize> {
        match self {
            Participation::Included => None,
            Participation::Excluded { node, .. } => Some(*node),
        }
    }
}

/// Push-sum state of every node at round `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdHocState {
    pub s: DVector<f64>,
    pub eta: DVector<f64>,
    pub b_hat: Vec<f64>,
    pub lambda_hat: Vec<f64>,
    pub t: usize,
}

/// Fixed per-run inputs of the ad-hoc estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct AdHoc {
    n: Vec<f64>,
    sigma: Vec<f64>,
    a: f64,
    participation: Participation,
}

impl AdHoc {
    pub fn new(data: &NetworkData, a: f64, participation: Participation) -> Result<Self> {
        Self::from_stats(&data.sizes(), &data.sigmas(), a, participation)
    }

    pub fn from_stats(sizes: &[u64], sigmas: &[u64], a: f64, participation: Participation) -> Result<Self> {
        require_positive("a", a)?;
        if sizes.len() != sigmas.len() {
            return Err(Error::DimensionMismatch {
                expected: sizes.len(),
                found: sigmas.len(),
            });
        }
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::InvalidParameter("sample sizes must be non-empty and ≥ 1".into()));
        }
        participation.validate(sizes.len())?;
        Ok(Self {
            n: sizes.iter().map(|&x| x as f64).collect(),
            sigma: sigmas.iter().map(|&x| x as f64).collect(),
            a,
            participation,
        })
    }

    pub fn nodes(&self) -> usize {
        self.n.len()
    }

    /// `s = σ`, `η = n`, `b̂_i = max(σ_i, 1)/(a n_i)`.
    pub fn init(&self) -> AdHocState {
        let mut s = DVector::from_column_slice(&self.sigma);
        let mut eta = DVector::from_column_slice(&self.n);
        if let Some(j) = self.participation.excluded() {
            s[j] = 0.0;
            eta[j] = 0.0;
        }
        let mut st = AdHocState {
            b_hat: vec![0.0; self.nodes()],
            lambda_hat: vec![0.0; self.nodes()],
            s,
            eta,
            t: 0,
        };
        for i in 0..self.nodes() {
            st.b_hat[i] = self.sigma[i].max(1.0) / (self.a * self.n[i]);
        }
        self.readout(&mut st);
        st
    }

    /// One synchronous round `s ← W s`, `η ← W η`, then the local readouts.
    pub fn step(&self, st: &mut AdHocState, w: &WeightMatrix) -> Result<()> {
        if w.nodes() != self.nodes() || st.s.len() != self.nodes() {
            return Err(Error::DimensionMismatch {
                expected: self.nodes(),
                found: w.nodes(),
            });
        }
        st.s = w.apply(&st.s);
        st.eta = w.apply(&st.eta);
        st.t += 1;
        for i in 0..self.nodes() {
            let (s, eta) = (st.s[i], st.eta[i]);
            if eta > 0.0 {
                // Zero mass so far keeps the guarded value from the previous round.
                if s > 0.0 {
                    st.b_hat[i] = s / (self.a * eta);
                }
            }
        }
        self.readout(st);
        Ok(())
    }

    fn readout(&self, st: &mut AdHocState) {
        if let Participation::Excluded { node, proxy } = self.participation {
            if st.eta[node] <= 0.0 || st.s[node] <= 0.0 {
                st.b_hat[node] = st.b_hat[proxy];
            }
        }
        for i in 0..self.nodes() {
            st.lambda_hat[i] = shrink(st.b_hat[i], self.n[i], self.sigma[i], self.a);
        }
    }

    /// Runs `rounds` rounds against `source`, recording per `readout`.
    pub fn run(&self, source: &impl WeightSource, rounds: usize, readout: &Readout) -> Result<AdHocRun> {
        if source.nodes() != self.nodes() {
            return Err(Error::DimensionMismatch {
                expected: self.nodes(),
                found: source.nodes(),
            });
        }
        let mut trace = Trace::new(readout, self.nodes())?;
        let mut st = self.init();
        trace.offer(0, rounds, &st.b_hat, &st.lambda_hat);
        for t in 0..rounds {
            self.step(&mut st, &source.weights(t))?;
            trace.offer(t + 1, rounds, &st.b_hat, &st.lambda_hat);
        }
        let residual = spread(&st.b_hat);
        Ok(AdHocRun {
            trace,
            last: st,
            residual,
        })
    }
}

/// Output of [`AdHoc::run`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdHocRun {
    pub trace: Trace,
    pub last: AdHocState,
    /// Final consensus residual `max_{i,k} |b̂_i − b̂_k|`.
    pub residual: f64,
}

pub fn adhoc_init(data: &NetworkData, a: f64) -> Result<AdHocState> {
    Ok(AdHoc::new(data, a, Participation::Included)?.init())
}

pub fn adhoc_step(st: &AdHocState, w: &WeightMatrix, data: &NetworkData, a: f64) -> Result<AdHocState> {
    let est = AdHoc::new(data, a, Participation::Included)?;
    let mut next = st.clone();
    est.step(&mut next, w)?;
    Ok(next)
}

pub fn adhoc_run(
    data: &NetworkData,
    source: &impl WeightSource,
    a: f64,
    rounds: usize,
    readout: &Readout,
) -> Result<AdHocRun> {
    AdHoc::new(data, a, Participation::Included)?.run(source, rounds, readout)
}

/// Consensus limit `λ̂_i = σ/(a n + σ n_i) (a + σ_i)` of the ad-hoc estimator.
pub fn adhoc_limit(data: &NetworkData, a: f64) -> Vec<f64> {
    let b = data.b_hom(a);
    data.monitors()
        .iter()
        .map(|m| shrink(b, m.n() as f64, m.sigma() as f64, a))
        .collect()
}
