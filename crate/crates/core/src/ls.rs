//! Candidate-guided local search: 2-opt, Or-opt and segment-exchange 3-opt
//! with don't-look bits, restarted from double-bridge kicks.

use std::collections::VecDeque;

use rand::Rng;

use crate::budget::Budget;
use crate::graph::SparseGraph;
use crate::guidance::{CandidateLists, NodePenalties};
use crate::instance::{Node, Tour, TspInstance};
use crate::transition::{ConvergenceTrace, Phase};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LsConfig {
    /// 2 for 2-opt + Or-opt, 3 to add segment-exchange 3-opt moves.
    pub lambda_depth: u8,
    pub candidates_k: usize,
    /// Evaluate moves on `d(i,j) + π_i + π_j` instead of raw distances.
    pub use_penalties: bool,
    /// Window (in tour positions) of the local double-bridge kick; 0 stops
    /// at the first local optimum.
    pub restart_perturbation: usize,
}

impl Default for LsConfig {
    fn default() -> Self {
        Self {
            lambda_depth: 3,
            candidates_k: 5,
            use_penalties: false,
            restart_perturbation: 50,
        }
    }
}

impl LsConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(2..=3).contains(&self.lambda_depth) {
            return Err(format!("lambda_depth must be 2 or 3, got {}", self.lambda_depth));
        }
        if self.candidates_k == 0 {
            return Err("candidates_k must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LsOutcome {
    pub tour: Tour,
    pub trace: ConvergenceTrace,
    /// The deadline cut the search short (the tour is still the best found).
    pub interrupted: bool,
}

/// Move-evaluation distance `d(i,j) + π_i + π_j`.
pub fn pi_distance(inst: &TspInstance, penalties: &NodePenalties, i: Node, j: Node) -> f64 {
    inst.distance(i, j) as f64 + penalties.get(i) + penalties.get(j)
}

/// Greedy nearest-neighbour tour from node 0 over sparse-graph edges, falling
/// back to the nearest unvisited node when every neighbour is taken.
pub fn initial_tour(inst: &TspInstance, graph: &SparseGraph) -> Tour {
    greedy_from(inst, graph, 0)
}

pub(crate) fn greedy_from(inst: &TspInstance, graph: &SparseGraph, start: Node) -> Tour {
    let n = inst.n();
    let mut visited = vec![false; n];
    let mut unvisited: Vec<Node> = (0..n as Node).collect();
    let mut slot: Vec<usize> = (0..n).collect();
    let mut take = |v: Node, unvisited: &mut Vec<Node>, visited: &mut Vec<bool>| {
        visited[v as usize] = true;
        let p = slot[v as usize];
        unvisited.swap_remove(p);
        if p < unvisited.len() {
            slot[unvisited[p] as usize] = p;
        }
    };
    let mut order = Vec::with_capacity(n);
    let mut cur = start;
    take(cur, &mut unvisited, &mut visited);
    order.push(cur);
    let mut length = 0;
    while !unvisited.is_empty() {
        // Sparse rows are sorted by (distance, id), so the first hit is nearest.
        let next = graph
            .neighbors(cur)
            .iter()
            .copied()
            .find(|&j| !visited[j as usize])
            .unwrap_or_else(|| {
                *unvisited
                    .iter()
                    .min_by_key(|&&j| (inst.distance(cur, j), j))
                    .expect("unvisited is non-empty")
            });
        length += inst.distance(cur, next);
        take(next, &mut unvisited, &mut visited);
        order.push(next);
        cur = next;
    }
    length += inst.distance(cur, start);
    Tour::from_parts(order, length)
}

/// Iterated local search until `budget` runs out. Returns the shortest tour
/// by raw length; it is never longer than `start`.
pub fn local_search<R: Rng + ?Sized>(
    inst: &TspInstance,
    cands: &CandidateLists,
    penalties: Option<&NodePenalties>,
    start: &Tour,
    cfg: &LsConfig,
    budget: &Budget,
    rng: &mut R,
) -> LsOutcome {
    local_search_observed(inst, cands, penalties, start, cfg, budget, rng, &mut |_, _| {})
}

/// [`local_search`], calling `observer(order, raw_length)` with the working
/// tour after every change (improving move, kick or revert).
#[allow(clippy::too_many_arguments)]
pub fn local_search_observed<R: Rng + ?Sized>(
    inst: &TspInstance,
    cands: &CandidateLists,
    penalties: Option<&NodePenalties>,
    start: &Tour,
    cfg: &LsConfig,
    budget: &Budget,
    rng: &mut R,
    observer: &mut dyn FnMut(&[Node], i64),
) -> LsOutcome {
    let pi = if cfg.use_penalties { penalties.map(NodePenalties::as_slice) } else { None };
    let moves = Moves {
        or_opt: true,
        three_opt: cfg.lambda_depth >= 3,
    };
    let mut trace = ConvergenceTrace::new();
    trace.record(budget.elapsed(), start.len(), Phase::Ls);
    let n = inst.n();
    if n <= 3 || budget.exhausted() {
        return LsOutcome {
            tour: start.clone(),
            trace,
            interrupted: n > 3,
        };
    }

    let mut search = Kernel::new(inst, cands, pi, start.order(), start.len(), moves);
    let mut best_order = start.order().to_vec();
    let mut best_len = start.len();
    search.queue_all();
    let mut interrupted = false;
    loop {
        if !search.descend(budget, observer) {
            interrupted = true;
        }
        if search.raw_len < best_len {
            best_len = search.raw_len;
            best_order.copy_from_slice(&search.order);
            trace.record(budget.elapsed(), best_len, Phase::Ls);
        } else if search.raw_len > best_len {
            search.reset_to(&best_order, best_len);
            observer(&search.order, search.raw_len);
        }
        if interrupted || cfg.restart_perturbation == 0 || budget.exhausted() {
            interrupted |= budget.exhausted() && cfg.restart_perturbation > 0;
            break;
        }
        search.kick(cfg.restart_perturbation, rng);
        observer(&search.order, search.raw_len);
    }
    let tour = Tour::from_parts(best_order, best_len);
    debug_assert_eq!(inst.cycle_length(tour.order()), tour.len());
    trace.t_end = budget.elapsed();
    LsOutcome {
        tour,
        trace,
        interrupted,
    }
}

/// Plain candidate 2-opt descent, stopping after `max_moves` improvements.
pub fn two_opt(inst: &TspInstance, cands: &CandidateLists, tour: &Tour, max_moves: usize) -> Tour {
    if inst.n() <= 3 {
        return tour.clone();
    }
    let moves = Moves {
        or_opt: false,
        three_opt: false,
    };
    let mut search = Kernel::new(inst, cands, None, tour.order(), tour.len(), moves);
    search.move_cap = Some(max_moves);
    search.queue_all();
    search.descend(&Budget::work(u64::MAX), &mut |_, _| {});
    Tour::from_parts(search.order, search.raw_len)
}

#[derive(Debug, Clone, Copy)]
struct Moves {
    or_opt: bool,
    three_opt: bool,
}

struct Kernel<'a> {
    inst: &'a TspInstance,
    cands: &'a CandidateLists,
    pi: Option<&'a [f64]>,
    moves: Moves,
    n: usize,
    order: Vec<Node>,
    pos: Vec<usize>,
    raw_len: i64,
    queue: VecDeque<Node>,
    queued: Vec<bool>,
    move_cap: Option<usize>,
    applied: usize,
    scratch: Vec<Node>,
}

impl<'a> Kernel<'a> {
    fn new(
        inst: &'a TspInstance,
        cands: &'a CandidateLists,
        pi: Option<&'a [f64]>,
        order: &[Node],
        raw_len: i64,
        moves: Moves,
    ) -> Self {
        let n = order.len();
        let mut pos = vec![0; n];
        for (p, &v) in order.iter().enumerate() {
            pos[v as usize] = p;
        }
        Self {
            inst,
            cands,
            pi,
            moves,
            n,
            order: order.to_vec(),
            pos,
            raw_len,
            queue: VecDeque::with_capacity(n),
            queued: vec![false; n],
            move_cap: None,
            applied: 0,
            scratch: Vec::with_capacity(n),
        }
    }

    fn reset_to(&mut self, order: &[Node], len: i64) {
        self.order.copy_from_slice(order);
        for (p, &v) in self.order.iter().enumerate() {
            self.pos[v as usize] = p;
        }
        self.raw_len = len;
    }

    #[inline]
    fn cost(&self, i: Node, j: Node) -> f64 {
        let d = self.inst.distance(i, j) as f64;
        match self.pi {
            Some(pi) => d + pi[i as usize] + pi[j as usize],
            None => d,
        }
    }

    #[inline]
    fn raw(&self, i: Node, j: Node) -> i64 {
        self.inst.distance(i, j)
    }

    #[inline]
    fn succ(&self, v: Node) -> Node {
        let p = self.pos[v as usize] + 1;
        self.order[if p == self.n { 0 } else { p }]
    }

    #[inline]
    fn pred(&self, v: Node) -> Node {
        let p = self.pos[v as usize];
        self.order[if p == 0 { self.n - 1 } else { p - 1 }]
    }

    #[inline]
    fn next(&self, v: Node, fwd: bool) -> Node {
        if fwd {
            self.succ(v)
        } else {
            self.pred(v)
        }
    }

    /// Is `b` on the walk from `a` to `c` (inclusive) in direction `fwd`?
    #[inline]
    fn between(&self, a: Node, b: Node, c: Node, fwd: bool) -> bool {
        let (a, c) = if fwd { (a, c) } else { (c, a) };
        let (pa, pb, pc) = (self.pos[a as usize], self.pos[b as usize], self.pos[c as usize]);
        if pa <= pc {
            pa <= pb && pb <= pc
        } else {
            pb >= pa || pb <= pc
        }
    }

    fn push(&mut self, v: Node) {
        if !std::mem::replace(&mut self.queued[v as usize], true) {
            self.queue.push_back(v);
        }
    }

    fn queue_all(&mut self) {
        for i in 0..self.n {
            let v = self.order[i];
            self.push(v);
        }
    }

    /// Run until no node has an improving move. Returns `false` when the
    /// budget interrupted the descent.
    fn descend(&mut self, budget: &Budget, observer: &mut dyn FnMut(&[Node], i64)) -> bool {
        while let Some(t1) = self.queue.pop_front() {
            self.queued[t1 as usize] = false;
            if budget.exhausted() {
                self.push(t1);
                return false;
            }
            if self.move_cap.is_some_and(|cap| self.applied >= cap) {
                self.queue.clear();
                self.queued.iter_mut().for_each(|q| *q = false);
                return true;
            }
            if self.improve(t1, budget) {
                self.applied += 1;
                self.push(t1);
                observer(&self.order, self.raw_len);
            }
        }
        true
    }

    fn improve(&mut self, t1: Node, budget: &Budget) -> bool {
        for fwd in [true, false] {
            if self.try_two_opt(t1, fwd, budget) {
                return true;
            }
        }
        if self.moves.or_opt && self.n >= 5 {
            for fwd in [true, false] {
                if self.try_or_opt(t1, fwd, budget) {
                    return true;
                }
            }
        }
        if self.moves.three_opt && self.n >= 6 {
            for fwd in [true, false] {
                if self.try_segment_exchange(t1, fwd, budget) {
                    return true;
                }
            }
        }
        false
    }

    /// Remove (t1,t2), (t4,t3); add (t2,t3), (t4,t1) with t3 a candidate of t2.
    fn try_two_opt(&mut self, t1: Node, fwd: bool, budget: &Budget) -> bool {
        let t2 = self.next(t1, fwd);
        let d12 = self.cost(t1, t2);
        for &t3 in self.cands.get(t2) {
            budget.spend(1);
            let g1 = d12 - self.cost(t2, t3);
            if g1 <= EPS {
                continue;
            }
            let t4 = self.next(t3, !fwd);
            if t3 == t1 || t4 == t2 {
                continue;
            }
            let gain = g1 + self.cost(t3, t4) - self.cost(t4, t1);
            if gain > EPS {
                let raw_delta = self.raw(t2, t3) + self.raw(t4, t1) - self.raw(t1, t2) - self.raw(t3, t4);
                // The path t2 … t4 (direction `fwd`) is reversed.
                if fwd {
                    self.reverse_path(t2, t4);
                } else {
                    self.reverse_path(t4, t2);
                }
                self.raw_len += raw_delta;
                for v in [t1, t2, t3, t4] {
                    self.push(v);
                }
                return true;
            }
        }
        false
    }

    /// Move the segment of 1–3 nodes starting at `s1` (extending in
    /// direction `fwd`) next to a candidate neighbour of either end.
    fn try_or_opt(&mut self, s1: Node, fwd: bool, budget: &Budget) -> bool {
        let mut s2 = s1;
        for seg_len in 1..=3usize {
            if seg_len > 1 {
                s2 = self.next(s2, fwd);
            }
            if seg_len + 3 > self.n {
                break;
            }
            let p = self.next(s1, !fwd);
            let nx = self.next(s2, fwd);
            let removed = self.cost(p, s1) + self.cost(s2, nx) - self.cost(p, nx);
            if removed <= EPS {
                continue;
            }
            for (end, other) in [(s1, s2), (s2, s1)] {
                for &c in self.cands.get(end) {
                    budget.spend(1);
                    if self.between(s1, c, s2, fwd) {
                        continue;
                    }
                    let add_end = self.cost(c, end);
                    if add_end >= removed - EPS {
                        continue;
                    }
                    // Place the segment on either side of `c`.
                    for side in [true, false] {
                        let d = self.next(c, side);
                        if self.between(s1, d, s2, fwd) {
                            continue;
                        }
                        let delta = add_end + self.cost(other, d) - self.cost(c, d) - removed;
                        if delta < -EPS {
                            let raw_delta = self.raw(c, end) + self.raw(other, d) - self.raw(c, d)
                                - (self.raw(p, s1) + self.raw(s2, nx) - self.raw(p, nx));
                            self.splice_segment(s1, s2, fwd, c, end, d);
                            self.raw_len += raw_delta;
                            for v in [p, nx, s1, s2, c, d] {
                                self.push(v);
                            }
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    /// Sequential pure 3-opt: remove (t1,t2), (t3,t4), (t5,t6) and add
    /// (t2,t3), (t4,t5), (t6,t1), which swaps the paths t2…t5 and t6…t3.
    fn try_segment_exchange(&mut self, t1: Node, fwd: bool, budget: &Budget) -> bool {
        let t2 = self.next(t1, fwd);
        let d12 = self.cost(t1, t2);
        for &t3 in self.cands.get(t2) {
            budget.spend(1);
            if t3 == t1 || t3 == t2 {
                continue;
            }
            let g1 = d12 - self.cost(t2, t3);
            if g1 <= EPS {
                continue;
            }
            let t4 = self.next(t3, fwd);
            if t3 == self.next(t2, fwd) || t4 == t1 && self.next(t4, fwd) == t2 {
                continue;
            }
            let g2_base = g1 + self.cost(t3, t4);
            for &t5 in self.cands.get(t4) {
                budget.spend(1);
                if t5 == t3 || t5 == t4 || !self.between(t2, t5, t3, fwd) {
                    continue;
                }
                let g2 = g2_base - self.cost(t4, t5);
                if g2 <= EPS {
                    continue;
                }
                let t6 = self.next(t5, fwd);
                let gain = g2 + self.cost(t5, t6) - self.cost(t6, t1);
                if gain > EPS {
                    let raw_delta = self.raw(t2, t3) + self.raw(t4, t5) + self.raw(t6, t1)
                        - self.raw(t1, t2)
                        - self.raw(t3, t4)
                        - self.raw(t5, t6);
                    // New cyclic order (direction `fwd`): t4 … t1, t6 … t3, t2 … t5.
                    self.scratch.clear();
                    self.collect_path(t4, t1, fwd);
                    self.collect_path(t6, t3, fwd);
                    self.collect_path(t2, t5, fwd);
                    self.commit_scratch();
                    self.raw_len += raw_delta;
                    for v in [t1, t2, t3, t4, t5, t6] {
                        self.push(v);
                    }
                    return true;
                }
            }
        }
        false
    }

    /// Reverse the forward path from `a` to `b`, or equivalently the
    /// complementary path, whichever is shorter.
    fn reverse_path(&mut self, a: Node, b: Node) {
        let n = self.n;
        let (mut i, mut j) = (self.pos[a as usize], self.pos[b as usize]);
        let len = (j + n - i) % n + 1;
        if 2 * len > n {
            let (ni, nj) = ((j + 1) % n, (i + n - 1) % n);
            i = ni;
            j = nj;
        }
        let len = (j + n - i) % n + 1;
        for _ in 0..len / 2 {
            self.order.swap(i, j);
            self.pos[self.order[i] as usize] = i;
            self.pos[self.order[j] as usize] = j;
            i = if i + 1 == n { 0 } else { i + 1 };
            j = if j == 0 { n - 1 } else { j - 1 };
        }
    }

    fn collect_path(&mut self, from: Node, to: Node, fwd: bool) {
        let mut v = from;
        loop {
            self.scratch.push(v);
            if v == to {
                break;
            }
            v = self.next(v, fwd);
        }
    }

    fn commit_scratch(&mut self) {
        debug_assert_eq!(self.scratch.len(), self.n);
        std::mem::swap(&mut self.order, &mut self.scratch);
        for (p, &v) in self.order.iter().enumerate() {
            self.pos[v as usize] = p;
        }
    }

    /// Cut the path `s1 … s2` (direction `fwd`) out and reinsert it between
    /// the adjacent nodes `c` and `d`, with `end` next to `c`.
    fn splice_segment(&mut self, s1: Node, s2: Node, fwd: bool, c: Node, end: Node, d: Node) {
        let other = if end == s1 { s2 } else { s1 };
        let nx = self.next(s2, fwd);
        let p = self.next(s1, !fwd);
        self.scratch.clear();
        // Walk the rest of the tour from `nx` to `p`, inserting at c–d.
        let mut v = nx;
        loop {
            self.scratch.push(v);
            let w = self.next(v, fwd);
            if (v == c && w == d) || (v == d && w == c) {
                let (first, last) = if v == c { (end, other) } else { (other, end) };
                let forward = first == s1;
                let mut u = first;
                loop {
                    self.scratch.push(u);
                    if u == last {
                        break;
                    }
                    u = self.next(u, if forward { fwd } else { !fwd });
                }
            }
            if v == p {
                break;
            }
            v = w;
        }
        self.commit_scratch();
    }

    /// Segment-local double bridge: within a window of `span` positions,
    /// swap two consecutive sub-paths. Falls back to a random reversal on
    /// tours too small for three cut points.
    fn kick<R: Rng + ?Sized>(&mut self, span: usize, rng: &mut R) {
        let n = self.n;
        let window = span.clamp(4, n - 1);
        if n < 8 {
            let a = self.order[rng.gen_range(0..n)];
            let b = self.order[(self.pos[a as usize] + rng.gen_range(1..n - 2)) % n];
            let (pa, sb) = (self.pred(a), self.succ(b));
            let delta = self.raw(pa, b) + self.raw(a, sb) - self.raw(pa, a) - self.raw(b, sb);
            self.reverse_path(a, b);
            self.raw_len += delta;
            for v in [pa, a, b, sb] {
                self.push(v);
            }
            return;
        }
        // Offsets 1 <= c0 < c1 < window <= n - 1 from a random start, cyclic.
        let start = rng.gen_range(0..n);
        let mut cuts = [0usize; 2];
        while cuts[0] == cuts[1] {
            cuts = [rng.gen_range(1..window), rng.gen_range(1..window)];
        }
        cuts.sort_unstable();
        let at = |off: usize| self.order[(start + off) % n];
        let a_end = at(0);
        let b_start = at(1);
        let b_end = at(cuts[0]);
        let c_start = at(cuts[0] + 1);
        let c_end = at(cuts[1]);
        let d_start = at(cuts[1] + 1);
        // A | B | C | D  →  A | C | B | D
        let delta = self.raw(a_end, c_start) + self.raw(c_end, b_start) + self.raw(b_end, d_start)
            - self.raw(a_end, b_start)
            - self.raw(b_end, c_start)
            - self.raw(c_end, d_start);
        self.scratch.clear();
        self.collect_path(d_start, a_end, true);
        self.collect_path(c_start, c_end, true);
        self.collect_path(b_start, b_end, true);
        self.commit_scratch();
        self.raw_len += delta;
        for v in [a_end, b_start, b_end, c_start, c_end, d_start] {
            self.push(v);
        }
    }
}
