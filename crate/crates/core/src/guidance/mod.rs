//! Edge guidance: learned (SGN) or heuristic edge scores, node penalties,
//! candidate lists and AB-cycle scoring.

mod sgn;
mod weights;

pub use sgn::sgn_forward;
pub use weights::{load_weights, save_weights, BatchNorm, SgnLayer, SgnWeights, WeightsError, UNGW_VERSION};

use crate::eax::AbCycle;
use crate::graph::SparseGraph;
use crate::instance::Node;

/// Per directed sparse-graph edge score β, row-stochastic per origin node.
/// Rows are aligned with [`SparseGraph::neighbors`].
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeScores {
    k: usize,
    targets: Vec<Node>,
    beta: Vec<f64>,
}

impl EdgeScores {
    pub fn new(graph: &SparseGraph, beta: Vec<f64>) -> Self {
        assert_eq!(beta.len(), graph.edge_count(), "one score per sparse edge");
        Self {
            k: graph.degree(),
            targets: graph.flat_targets().to_vec(),
            beta,
        }
    }

    pub fn n(&self) -> usize {
        if self.k == 0 {
            0
        } else {
            self.beta.len() / self.k
        }
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: Node) -> &[f64] {
        let s = i as usize * self.k;
        &self.beta[s..s + self.k]
    }

    pub fn targets(&self, i: Node) -> &[Node] {
        let s = i as usize * self.k;
        &self.targets[s..s + self.k]
    }

    pub fn flat(&self) -> &[f64] {
        &self.beta
    }

    /// β of the directed edge `i → j`, `None` when it is not a sparse edge.
    pub fn directed(&self, i: Node, j: Node) -> Option<f64> {
        self.targets(i)
            .iter()
            .position(|&t| t == j)
            .map(|p| self.row(i)[p])
    }

    /// β of the undirected edge `{i, j}`: the larger of the two directions
    /// present in the sparse graph, 0 when neither is.
    pub fn undirected(&self, i: Node, j: Node) -> f64 {
        match (self.directed(i, j), self.directed(j, i)) {
            (Some(a), Some(b)) => a.max(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => 0.0,
        }
    }
}

/// Per-node penalty π with |π| ≤ bound.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePenalties {
    bound: f64,
    pi: Vec<f64>,
}

impl NodePenalties {
    pub fn new(pi: Vec<f64>, bound: f64) -> Self {
        debug_assert!(pi.iter().all(|p| p.abs() <= bound));
        Self { bound, pi }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            bound: 0.0,
            pi: vec![0.0; n],
        }
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    #[inline]
    pub fn get(&self, i: Node) -> f64 {
        self.pi[i as usize]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.pi
    }

    pub fn is_zero(&self) -> bool {
        self.pi.iter().all(|&p| p == 0.0)
    }
}

/// Up to `k` neighbours per node, best β first.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateLists {
    k: usize,
    lists: Vec<Node>,
}

impl CandidateLists {
    pub fn width(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        if self.k == 0 {
            0
        } else {
            self.lists.len() / self.k
        }
    }

    #[inline]
    pub fn get(&self, i: Node) -> &[Node] {
        let s = i as usize * self.k;
        &self.lists[s..s + self.k]
    }

    /// Candidate lists taken straight from the sparse graph (nearest first).
    pub fn from_graph(graph: &SparseGraph, k: usize) -> Self {
        let k = k.min(graph.degree());
        let lists = (0..graph.n() as Node)
            .flat_map(|i| graph.neighbors(i)[..k].iter().copied())
            .collect();
        Self { k, lists }
    }
}

/// Weight-free scorer: softmax over each node's out-edges of `−d / τ_i`,
/// with `τ_i` the mean out-edge distance of node `i`.
///
/// The logit is evaluated as `−(d·k) / Σd` from integer operands, so
/// uniformly scaling every distance leaves β bit-identical.
pub fn heuristic_scores(graph: &SparseGraph) -> EdgeScores {
    let k = graph.degree();
    let mut beta = Vec::with_capacity(graph.edge_count());
    let mut logits = vec![0.0; k];
    for i in 0..graph.n() as Node {
        let d = graph.distances(i);
        let total: i64 = d.iter().sum();
        for (l, &di) in logits.iter_mut().zip(d) {
            *l = if total == 0 {
                0.0
            } else {
                -((di * k as i64) as f64) / total as f64
            };
        }
        softmax_into(&logits, &mut beta);
    }
    EdgeScores::new(graph, beta)
}

pub(crate) fn softmax_into(logits: &[f64], out: &mut Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let start = out.len();
    let mut sum = 0.0;
    for &l in logits {
        let e = (l - max).exp();
        sum += e;
        out.push(e);
    }
    for b in &mut out[start..] {
        *b /= sum;
    }
}

/// Top-`k` out-edges per node by β, ties broken by smaller node id.
pub fn candidate_lists(scores: &EdgeScores, graph: &SparseGraph, k: usize) -> CandidateLists {
    assert!(k >= 1, "candidate width must be positive");
    let k = k.min(graph.degree());
    let mut lists = Vec::with_capacity(graph.n() * k);
    let mut row: Vec<(f64, Node)> = Vec::with_capacity(graph.degree());
    for i in 0..graph.n() as Node {
        row.clear();
        row.extend(scores.row(i).iter().copied().zip(graph.neighbors(i).iter().copied()));
        row.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        lists.extend(row[..k].iter().map(|&(_, j)| j));
    }
    CandidateLists { k, lists }
}

/// Score of an AB-cycle: β summed over its B edges (added to the child)
/// minus β summed over its A edges (removed from the child).
pub fn score_ab_cycle(cycle: &AbCycle, scores: &EdgeScores) -> f64 {
    let gained: f64 = cycle.b_edges().map(|e| scores.undirected(e.u, e.v)).sum();
    let lost: f64 = cycle.a_edges().map(|e| scores.undirected(e.u, e.v)).sum();
    gained - lost
}
