//! Per-round readouts shared by both distributed estimators.

use serde::{Deserialize, Serialize};

/// Which node states a run keeps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    /// Every node at every round.
    All,
    /// The listed 0-based nodes at every round.
    Nodes(Vec<usize>),
    /// Every node, final round only.
    #[default]
    FinalOnly,
}

impl Readout {
    fn nodes(&self, n: usize) -> Vec<usize> {
        match self {
            Readout::All | Readout::FinalOnly => (0..n).collect(),
            Readout::Nodes(list) => list.clone(),
        }
    }
}

/// Recorded `(b̂_i(t), λ̂_i(t))` for the selected nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    /// 0-based node indices, in column order.
    pub nodes: Vec<usize>,
    /// Round index of each recorded row.
    pub rounds: Vec<usize>,
    /// `b_hat[r][c]` is node `nodes[c]` at round `rounds[r]`.
    pub b_hat: Vec<Vec<f64>>,
    pub lambda_hat: Vec<Vec<f64>>,
    #[serde(skip)]
    final_only: bool,
}

impl Trace {
    pub(crate) fn new(readout: &Readout, n: usize) -> crate::Result<Self> {
        let nodes = readout.nodes(n);
        if let Some(&bad) = nodes.iter().find(|&&i| i >= n) {
            return Err(crate::Error::InvalidParameter(format!(
                "readout node {} outside 1..={n}",
                bad + 1
            )));
        }
        Ok(Self {
            nodes,
            rounds: Vec::new(),
            b_hat: Vec::new(),
            lambda_hat: Vec::new(),
            final_only: matches!(readout, Readout::FinalOnly),
        })
    }

    pub(crate) fn offer(&mut self, t: usize, last: usize, b_hat: &[f64], lambda_hat: &[f64]) {
        if self.final_only && t != last {
            return;
        }
        self.rounds.push(t);
        self.b_hat.push(self.nodes.iter().map(|&i| b_hat[i]).collect());
        self.lambda_hat.push(self.nodes.iter().map(|&i| lambda_hat[i]).collect());
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    /// Time series of `b̂` for the `c`-th recorded node.
    pub fn b_hat_series(&self, c: usize) -> Vec<f64> {
        self.b_hat.iter().map(|row| row[c]).collect()
    }
}

/// `max_{i,k} |x_i − x_k|`.
pub fn spread(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if values.is_empty() {
        0.0
    } else {
        hi - lo
    }
}
