//! Time-varying communication digraphs and the push-sum weight matrices they induce.
//!
//! Node indices are 0-based internally; the scripted text format and every
//! user-facing output use 1-based identifiers. An edge `(i, k)` means node `i`
//! sends to node `k`. Self-loops are never stored as edges: every node always
//! keeps a share of its own state through the diagonal of `W(t)`.

use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Directed edges active at one time step, sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EdgeSet {
    edges: Vec<(usize, usize)>,
}

impl EdgeSet {
    /// Builds an edge set over `n` nodes from 0-based `(from, to)` pairs.
    pub fn new(n: usize, mut edges: Vec<(usize, usize)>) -> Result<Self> {
        for &(i, k) in &edges {
            if i >= n || k >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge {}>{} outside 1..={n}",
                    i + 1,
                    k + 1
                )));
            }
            if i == k {
                return Err(Error::InvalidParameter(format!(
                    "explicit self-loop at node {}",
                    i + 1
                )));
            }
        }
        edges.sort_unstable();
        let before = edges.len();
        edges.dedup();
        if edges.len() != before {
            return Err(Error::InvalidParameter("duplicate directed edge".into()));
        }
        Ok(Self { edges })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, from: usize, to: usize) -> bool {
        self.edges.binary_search(&(from, to)).is_ok()
    }

    /// Out-degree of every node, self-loop included.
    pub fn out_degrees(&self, n: usize) -> Vec<usize> {
        let mut d = vec![1usize; n];
        for (i, _) in self.iter() {
            d[i] += 1;
        }
        d
    }

    /// Senders to `node` in this step, in increasing order.
    pub fn in_neighbors(&self, node: usize) -> Vec<usize> {
        self.iter().filter(|&(_, k)| k == node).map(|(i, _)| i).collect()
    }
}

/// How the edge set evolves over time.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleKind {
    /// The same edges at every step.
    Fixed(EdgeSet),
    /// Every ordered pair is present independently with probability `p`,
    /// redrawn each step from a stream keyed by `(seed, t)`.
    ErdosRenyi { p: f64, seed: u64 },
    /// An explicit list of edge sets, repeated periodically past its end.
    Scripted(Vec<EdgeSet>),
}

/// A time-varying digraph `t ↦ G(t)` over `n` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSchedule {
    n: usize,
    kind: ScheduleKind,
}

impl GraphSchedule {
    pub fn new(n: usize, kind: ScheduleKind) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("graph needs at least one node".into()));
        }
        match &kind {
            ScheduleKind::ErdosRenyi { p, .. } if !(0.0..=1.0).contains(p) => {
                return Err(Error::InvalidParameter(format!("edge probability {p} not in [0,1]")));
            }
            ScheduleKind::Scripted(steps) if steps.is_empty() => {
                return Err(Error::InvalidParameter("scripted schedule has no steps".into()));
            }
            _ => {}
        }
        let check = |e: &EdgeSet| e.iter().all(|(i, k)| i < n && k < n);
        let ok = match &kind {
            ScheduleKind::Fixed(e) => check(e),
            ScheduleKind::Scripted(steps) => steps.iter().all(check),
            ScheduleKind::ErdosRenyi { .. } => true,
        };
        if !ok {
            return Err(Error::InvalidParameter(format!("edge endpoint outside 1..={n}")));
        }
        Ok(Self { n, kind })
    }

    /// Directed cycle `1 → 2 → … → n → 1`.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter("a cycle needs at least two nodes".into()));
        }
        let edges = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::new(n, ScheduleKind::Fixed(EdgeSet::new(n, edges)?))
    }

    /// The sparse unbalanced benchmark digraph: a directed cycle plus the
    /// edges `3→1`, `3→2`, `4→1`, `4→2`.
    pub fn benchmark_fixed(n: usize) -> Result<Self> {
        if n < 5 {
            return Err(Error::InvalidParameter(
                "the benchmark graph needs at least five nodes".into(),
            ));
        }
        let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        edges.extend([(2, 0), (2, 1), (3, 0), (3, 1)]);
        Self::new(n, ScheduleKind::Fixed(EdgeSet::new(n, edges)?))
    }

    pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Self> {
        Self::new(n, ScheduleKind::ErdosRenyi { p, seed })
    }

    pub fn scripted(n: usize, steps: Vec<EdgeSet>) -> Result<Self> {
        Self::new(n, ScheduleKind::Scripted(steps))
    }

    /// Parses the line-oriented script format: one line per step holding
    /// comma-separated `i>k` edges (1-based); a blank line is an empty step.
    pub fn parse_scripted(n: usize, text: &str) -> Result<Self> {
        let mut steps = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            let mut edges = Vec::new();
            if !line.is_empty() {
                for token in line.split(',') {
                    let token = token.trim();
                    let parse_err = |message: String| Error::Parse {
                        line: lineno + 1,
                        message,
                    };
                    let (from, to) = token
                        .split_once('>')
                        .ok_or_else(|| parse_err(format!("expected `i>k`, got `{token}`")))?;
                    let from: usize = from
                        .trim()
                        .parse()
                        .map_err(|_| parse_err(format!("bad node id `{from}`")))?;
                    let to: usize = to
                        .trim()
                        .parse()
                        .map_err(|_| parse_err(format!("bad node id `{to}`")))?;
                    if from == 0 || to == 0 {
                        return Err(parse_err("node ids are 1-based".into()));
                    }
                    edges.push((from - 1, to - 1));
                }
            }
            let set = EdgeSet::new(n, edges).map_err(|e| Error::Parse {
                line: lineno + 1,
                message: e.to_string(),
            })?;
            steps.push(set);
        }
        Self::scripted(n, steps)
    }

    pub fn nodes(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn is_time_invariant(&self) -> bool {
        match &self.kind {
            ScheduleKind::Fixed(_) => true,
            ScheduleKind::Scripted(steps) => steps.len() == 1,
            ScheduleKind::ErdosRenyi { p, .. } => *p == 0.0 || *p == 1.0,
        }
    }

    /// Edge set `E(t)`; deterministic in `(self, t)`.
    pub fn edges_at(&self, t: usize) -> Cow<'_, EdgeSet> {
        match &self.kind {
            ScheduleKind::Fixed(e) => Cow::Borrowed(e),
            ScheduleKind::Scripted(steps) => Cow::Borrowed(&steps[t % steps.len()]),
            ScheduleKind::ErdosRenyi { p, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(t as u64);
                let mut edges = Vec::new();
                for i in 0..self.n {
                    for k in 0..self.n {
                        if i != k && rng.random_bool(*p) {
                            edges.push((i, k));
                        }
                    }
                }
                Cow::Owned(EdgeSet { edges })
            }
        }
    }

    /// Push-sum weights `W(t)` with `w_ik = 1/d_k(t)`.
    pub fn weights_at(&self, t: usize) -> WeightMatrix {
        WeightMatrix::from_edges(self.n, &self.edges_at(t), t)
    }
}

/// Column-stochastic mixing matrix for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    t: usize,
    entries: DMatrix<f64>,
}

impl WeightMatrix {
    /// `w_ik = 1/d_k` when `k → i` is an edge or `i = k`, zero otherwise.
    /// An isolated node gets the unit column `e_k`.
    pub fn from_edges(n: usize, edges: &EdgeSet, t: usize) -> Self {
        let d = edges.out_degrees(n);
        let mut entries = DMatrix::zeros(n, n);
        for k in 0..n {
            entries[(k, k)] = 1.0 / d[k] as f64;
        }
        for (k, i) in edges.iter() {
            entries[(i, k)] = 1.0 / d[k] as f64;
        }
        Self { t, entries }
    }

    /// Wraps an arbitrary matrix; fails unless it is square and column-stochastic
    /// with a positive diagonal.
    pub fn from_matrix(entries: DMatrix<f64>, t: usize) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        let w = Self { t, entries };
        if w.entries.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidParameter("negative weight".into()));
        }
        if (0..w.nodes()).any(|i| w.entries[(i, i)] <= 0.0) {
            return Err(Error::InvalidParameter("diagonal weights must be positive".into()));
        }
        if w.column_sums().iter().any(|s| (s - 1.0).abs() > 1e-12) {
            return Err(Error::InvalidParameter("matrix is not column stochastic".into()));
        }
        Ok(w)
    }

    pub fn identity(n: usize, t: usize) -> Self {
        Self {
            t,
            entries: DMatrix::identity(n, n),
        }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn nodes(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.entries[(i, k)]
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.entries.column_iter().map(|c| c.sum()).collect()
    }

    /// Smallest nonzero entry; a valid lower bound `α` for this matrix.
    pub fn alpha(&self) -> f64 {
        self.entries
            .iter()
            .copied()
            .filter(|&x| x > 0.0)
            .fold(f64::INFINITY, f64::min)
    }

    /// `out ← W x`.
    pub fn apply_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        out.gemv(1.0, &self.entries, x, 0.0);
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.entries * x
    }
}

/// Anything that can hand out `W(t)` for consecutive rounds.
pub trait WeightSource {
    fn nodes(&self) -> usize;
    fn weights(&self, t: usize) -> Cow<'_, WeightMatrix>;

    /// In-neighbors of `node` at time `t`, if the source knows its graph.
    fn in_neighbors(&self, t: usize, node: usize) -> Vec<usize> {
        let w = self.weights(t);
        (0..self.nodes())
            .filter(|&k| k != node && w.get(node, k) > 0.0)
            .collect()
    }
}

impl WeightSource for GraphSchedule {
    fn nodes(&self) -> usize {
        self.n
    }

    fn weights(&self, t: usize) -> Cow<'_, WeightMatrix> {
        Cow::Owned(self.weights_at(t))
    }

    fn in_neighbors(&self, t: usize, node: usize) -> Vec<usize> {
        self.edges_at(t).in_neighbors(node)
    }
}

/// Precomputed weights for the first `horizon` rounds of a schedule
/// (a single matrix when the schedule is time-invariant).
#[derive(Debug, Clone)]
pub struct WeightCache {
    n: usize,
    matrices: Vec<WeightMatrix>,
}

impl WeightCache {
    pub fn new(sched: &GraphSchedule, horizon: usize) -> Self {
        let count = if sched.is_time_invariant() { 1 } else { horizon.max(1) };
        Self {
            n: sched.nodes(),
            matrices: (0..count).map(|t| sched.weights_at(t)).collect(),
        }
    }

    pub fn from_matrices(matrices: Vec<WeightMatrix>) -> Result<Self> {
        let n = matrices
            .first()
            .map(WeightMatrix::nodes)
            .ok_or_else(|| Error::InvalidParameter("empty weight sequence".into()))?;
        if let Some(bad) = matrices.iter().find(|w| w.nodes() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.nodes(),
            });
        }
        Ok(Self { n, matrices })
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }
}

impl WeightSource for WeightCache {
    fn nodes(&self) -> usize {
        self.n
    }

    /// Rounds past the cached horizon repeat the sequence periodically.
    fn weights(&self, t: usize) -> Cow<'_, WeightMatrix> {
        Cow::Borrowed(&self.matrices[t % self.matrices.len()])
    }
}

/// Outcome of a joint-connectivity scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Connectivity {
    pub holds: bool,
    /// Index `w` of the first window `[wQ, (w+1)Q)` whose union is not
    /// strongly connected.
    pub first_failing_window: Option<usize>,
    pub windows_checked: usize,
}

/// Whether the digraph on `n` nodes with these edges is strongly connected.
pub fn is_strongly_connected(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> bool {
    if n <= 1 {
        return true;
    }
    let mut g = DiGraph::<(), ()>::with_capacity(n, 0);
    let ids: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for (i, k) in edges {
        g.add_edge(ids[i], ids[k], ());
    }
    tarjan_scc(&g).len() == 1
}

/// Checks uniform joint strong connectivity with window length `q` over the
/// complete windows inside `[0, horizon)`.
pub fn verify_joint_connectivity(sched: &GraphSchedule, q: usize, horizon: usize) -> Result<Connectivity> {
    if q == 0 || horizon < q {
        return Err(Error::InvalidParameter(format!(
            "need Q ≥ 1 and horizon ≥ Q (got Q={q}, horizon={horizon})"
        )));
    }
    let n = sched.nodes();
    let windows = horizon / q;
    for w in 0..windows {
        let mut union: Vec<(usize, usize)> = Vec::new();
        for t in w * q..(w + 1) * q {
            union.extend(sched.edges_at(t).iter());
        }
        union.sort_unstable();
        union.dedup();
        if !is_strongly_connected(n, union) {
            return Ok(Connectivity {
                holds: false,
                first_failing_window: Some(w),
                windows_checked: w + 1,
            });
        }
    }
    Ok(Connectivity {
        holds: true,
        first_failing_window: None,
        windows_checked: windows,
    })
}

/// Smallest `Q ≤ q_max` for which joint connectivity holds over `horizon`.
pub fn smallest_joint_q(sched: &GraphSchedule, horizon: usize, q_max: usize) -> Result<Option<usize>> {
    for q in 1..=q_max.min(horizon) {
        if verify_joint_connectivity(sched, q, horizon)?.holds {
            return Ok(Some(q));
        }
    }
    Ok(None)
}

/// Largest within-row spread `max_i max_{k,h} |a_ik − a_ih|`.
///
/// Zero exactly when every row is constant, which is the limit push-sum
/// products approach. This is the transpose of the classical coefficient
/// for row-stochastic matrices.
pub fn ergodicity_coefficient(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|row| row.max() - row.min())
        .fold(0.0, f64::max)
}

/// Running product `Φ(t) = W(t−1)⋯W(0)` with its ergodicity diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTracker {
    phi: DMatrix<f64>,
    scratch: DMatrix<f64>,
    t: usize,
    delta: f64,
    mu_hat: f64,
}

impl TransitionTracker {
    /// `Φ(0) = I`.
    pub fn new(n: usize) -> Self {
        let phi = DMatrix::identity(n, n);
        let delta = ergodicity_coefficient(&phi);
        Self {
            scratch: DMatrix::zeros(n, n),
            phi,
            t: 0,
            delta,
            mu_hat: 1.0,
        }
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// `δ(Φ(t))`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Running minimum over `τ ≤ t` of the smallest row sum of `Φ(τ)`.
    pub fn mu_hat(&self) -> f64 {
        self.mu_hat
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.phi.row(i).iter().copied().collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.phi.column_iter().map(|c| c.sum()).collect()
    }

    /// Advances to `Φ(t+1) = W(t) Φ(t)`.
    pub fn step(&mut self, w: &WeightMatrix) -> Result<()> {
        let n = self.phi.nrows();
        if w.nodes() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: w.nodes(),
            });
        }
        self.scratch.gemm(1.0, w.entries(), &self.phi, 0.0);
        std::mem::swap(&mut self.phi, &mut self.scratch);
        self.t += 1;
        self.delta = ergodicity_coefficient(&self.phi);
        let min_row = self.phi.row_iter().map(|r| r.sum()).fold(f64::INFINITY, f64::min);
        self.mu_hat = self.mu_hat.min(min_row);
        Ok(())
    }
}

/// Pure form of [`TransitionTracker::step`].
pub fn tracker_step(tr: &TransitionTracker, w: &WeightMatrix) -> Result<TransitionTracker> {
    let mut next = tr.clone();
    next.step(w)?;
    Ok(next)
}
