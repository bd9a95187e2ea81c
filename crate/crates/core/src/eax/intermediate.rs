//! Intermediate solutions (degree-2 subgraphs) and subtour merging.

use crate::graph::SparseGraph;
use crate::instance::{Node, Tour, TspInstance};

use super::{AbCycle, Origin};

const NONE: Node = Node::MAX;

/// A 2-regular spanning subgraph, possibly split into several subtours.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntermediateSolution {
    adj: Vec<[Node; 2]>,
    /// Subtour id of every node.
    label: Vec<u32>,
    /// Node lists, indexed by subtour id.
    subtours: Vec<Vec<Node>>,
}

impl IntermediateSolution {
    /// Wrap an adjacency array. Returns `None` unless every node has two
    /// distinct neighbours and the relation is symmetric.
    pub fn from_adjacency(adj: Vec<[Node; 2]>) -> Option<Self> {
        let n = adj.len();
        for (v, &[a, b]) in adj.iter().enumerate() {
            let v = v as Node;
            if a == b || a == v || b == v || a as usize >= n || b as usize >= n {
                return None;
            }
            if !adj[a as usize].contains(&v) || !adj[b as usize].contains(&v) {
                return None;
            }
        }
        let (label, subtours) = components(&adj);
        Some(Self { adj, label, subtours })
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn adjacency(&self) -> &[[Node; 2]] {
        &self.adj
    }

    pub fn subtours(&self) -> &[Vec<Node>] {
        &self.subtours
    }

    pub fn subtour_count(&self) -> usize {
        self.subtours.len()
    }

    /// Undirected edges as sorted `(min, max)` pairs.
    pub fn edges(&self) -> Vec<(Node, Node)> {
        let mut e: Vec<(Node, Node)> = self
            .adj
            .iter()
            .enumerate()
            .flat_map(|(v, nb)| nb.iter().map(move |&w| (v as Node, w)))
            .filter(|&(v, w)| v < w)
            .collect();
        e.sort_unstable();
        e
    }

    pub fn length(&self, inst: &TspInstance) -> i64 {
        self.edges().iter().map(|&(u, v)| inst.distance(u, v)).sum()
    }
}

fn components(adj: &[[Node; 2]]) -> (Vec<u32>, Vec<Vec<Node>>) {
    let n = adj.len();
    let mut label = vec![u32::MAX; n];
    let mut subtours = Vec::new();
    for s in 0..n {
        if label[s] != u32::MAX {
            continue;
        }
        let id = subtours.len() as u32;
        let mut members = Vec::new();
        let (mut prev, mut cur) = (NONE, s as Node);
        loop {
            label[cur as usize] = id;
            members.push(cur);
            let [a, b] = adj[cur as usize];
            let next = if a != prev { a } else { b };
            prev = cur;
            cur = next;
            if cur as usize == s {
                break;
            }
        }
        subtours.push(members);
    }
    (label, subtours)
}

/// Remove the cycle's A edges from `adj` and add its B edges. Returns the
/// length change. `adj` must be p_A's adjacency and the cycle one of its
/// AB-cycles against some p_B.
pub(crate) fn apply_cycle(adj: &mut [[Node; 2]], cycle: &AbCycle, inst: &TspInstance) -> i64 {
    let mut delta = 0;
    for e in cycle.a_edges() {
        unlink(adj, e.u, e.v);
        unlink(adj, e.v, e.u);
        delta -= inst.distance(e.u, e.v);
    }
    for e in cycle.b_edges() {
        link(adj, e.u, e.v);
        link(adj, e.v, e.u);
        delta += inst.distance(e.u, e.v);
    }
    delta
}

#[inline]
fn unlink(adj: &mut [[Node; 2]], v: Node, w: Node) {
    let slot = &mut adj[v as usize];
    let k = slot.iter().position(|&x| x == w).expect("edge to remove is absent");
    slot[k] = NONE;
}

#[inline]
fn link(adj: &mut [[Node; 2]], v: Node, w: Node) {
    let slot = &mut adj[v as usize];
    let k = slot.iter().position(|&x| x == NONE).expect("node already has degree 2");
    slot[k] = w;
}

#[inline]
fn replace(adj: &mut [[Node; 2]], v: Node, old: Node, new: Node) {
    let slot = &mut adj[v as usize];
    let k = if slot[0] == old { 0 } else { 1 };
    debug_assert_eq!(slot[k], old);
    slot[k] = new;
}

/// Child edge set `(E_A \ (E ∩ E_A)) ∪ (E ∩ E_B)` for the E-set `eset`.
pub fn apply_eset(pa: &Tour, eset: &AbCycle, pb: &Tour) -> IntermediateSolution {
    debug_assert!(eset.edges().iter().all(|e| match e.origin {
        Origin::A => pa.adjacency()[e.u as usize].contains(&e.v),
        Origin::B => pb.adjacency()[e.u as usize].contains(&e.v),
    }));
    let _ = pb;
    let mut adj = pa.adjacency();
    for e in eset.a_edges() {
        unlink(&mut adj, e.u, e.v);
        unlink(&mut adj, e.v, e.u);
    }
    for e in eset.b_edges() {
        link(&mut adj, e.u, e.v);
        link(&mut adj, e.v, e.u);
    }
    IntermediateSolution::from_adjacency(adj).expect("E-set application keeps every degree at 2")
}

/// Join subtours into a single tour, always reconnecting the smallest
/// remaining subtour by the cheapest 2-edge exchange.
pub fn merge_subtours(im: IntermediateSolution, inst: &TspInstance) -> Tour {
    let base = im.length(inst);
    let mut im = im;
    let delta = merge_in_place(&mut im, inst, None);
    let order = adjacency_order(&im.adj);
    Tour::from_parts(order, base + delta)
}

/// Like [`merge_subtours`], but only reconnections that create an edge of
/// the sparse graph are tried (falling back to the exhaustive scan when a
/// subtour has no neighbour outside itself).
pub fn merge_subtours_sparse(im: IntermediateSolution, inst: &TspInstance, graph: &SparseGraph) -> Tour {
    let base = im.length(inst);
    let mut im = im;
    let delta = merge_in_place(&mut im, inst, Some(graph));
    let order = adjacency_order(&im.adj);
    Tour::from_parts(order, base + delta)
}

/// Candidate reconnection: remove (a,b) and (c,d), add (a,c) and (b,d).
#[derive(Debug, Clone, Copy)]
struct Exchange {
    delta: i64,
    a: Node,
    b: Node,
    c: Node,
    d: Node,
}

impl Exchange {
    fn eval(inst: &TspInstance, a: Node, b: Node, c: Node, d: Node) -> Self {
        let delta = inst.distance(a, c) + inst.distance(b, d) - inst.distance(a, b) - inst.distance(c, d);
        Self { delta, a, b, c, d }
    }
}

fn keep_min(best: &mut Option<Exchange>, x: Exchange) {
    if best.map_or(true, |b| x.delta < b.delta) {
        *best = Some(x);
    }
}

/// Merge all subtours of `im`, returning the total length increase.
pub(crate) fn merge_in_place(im: &mut IntermediateSolution, inst: &TspInstance, graph: Option<&SparseGraph>) -> i64 {
    let mut alive: Vec<u32> = (0..im.subtours.len() as u32).collect();
    let mut min_id: Vec<Node> = im.subtours.iter().map(|s| *s.iter().min().expect("non-empty")).collect();
    let mut total = 0;
    while alive.len() > 1 {
        let (ai, &s) = alive
            .iter()
            .enumerate()
            .min_by_key(|&(_, &id)| (im.subtours[id as usize].len(), min_id[id as usize]))
            .expect("at least two subtours");
        let ex = graph
            .and_then(|g| best_sparse_exchange(im, inst, s, g))
            .unwrap_or_else(|| best_exact_exchange(im, inst, s));
        let t = im.label[ex.c as usize];
        debug_assert_ne!(t, s);
        let Exchange { delta, a, b, c, d } = ex;
        replace(&mut im.adj, a, b, c);
        replace(&mut im.adj, b, a, d);
        replace(&mut im.adj, c, d, a);
        replace(&mut im.adj, d, c, b);
        total += delta;
        let moved = std::mem::take(&mut im.subtours[s as usize]);
        for &v in &moved {
            im.label[v as usize] = t;
        }
        im.subtours[t as usize].extend(moved);
        min_id[t as usize] = min_id[t as usize].min(min_id[s as usize]);
        alive.swap_remove(ai);
    }
    if alive.len() == 1 && alive[0] != 0 {
        // Keep the surviving subtour first so `subtours()` stays meaningful.
        let id = alive[0] as usize;
        im.subtours.swap(0, id);
        im.label.iter_mut().for_each(|l| *l = 0);
    }
    im.subtours.retain(|s| !s.is_empty());
    total
}

fn best_exact_exchange(im: &IntermediateSolution, inst: &TspInstance, s: u32) -> Exchange {
    let mut best = None;
    for &a in &im.subtours[s as usize] {
        for &b in &im.adj[a as usize] {
            if a > b {
                continue;
            }
            for c in 0..im.n() as Node {
                if im.label[c as usize] == s {
                    continue;
                }
                for &d in &im.adj[c as usize] {
                    if c > d {
                        continue;
                    }
                    keep_min(&mut best, Exchange::eval(inst, a, b, c, d));
                    keep_min(&mut best, Exchange::eval(inst, a, b, d, c));
                }
            }
        }
    }
    best.expect("another subtour exists")
}

fn best_sparse_exchange(im: &IntermediateSolution, inst: &TspInstance, s: u32, graph: &SparseGraph) -> Option<Exchange> {
    let mut best = None;
    for &a in &im.subtours[s as usize] {
        for &c in graph.neighbors(a) {
            if im.label[c as usize] == s {
                continue;
            }
            for &b in &im.adj[a as usize] {
                for &d in &im.adj[c as usize] {
                    keep_min(&mut best, Exchange::eval(inst, a, b, c, d));
                }
            }
        }
    }
    best
}

/// Cyclic node order of a single-cycle adjacency, starting at node 0.
pub(crate) fn adjacency_order(adj: &[[Node; 2]]) -> Vec<Node> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let (mut prev, mut cur) = (NONE, 0 as Node);
    for _ in 0..n {
        order.push(cur);
        let [a, b] = adj[cur as usize];
        let next = if a != prev { a } else { b };
        prev = cur;
        cur = next;
    }
    debug_assert_eq!(cur, 0, "adjacency is not a single cycle");
    order
}
