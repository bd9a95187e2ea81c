//! AB-cycle decomposition of the union multigraph of two parent tours.

use rand::Rng;

use crate::instance::{Node, Tour};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    A,
    B,
}

impl Origin {
    pub fn flip(self) -> Self {
        match self {
            Origin::A => Origin::B,
            Origin::B => Origin::A,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AbEdge {
    pub u: Node,
    pub v: Node,
    pub origin: Origin,
}

/// A closed walk whose edges alternate between the two parents, starting
/// with an A edge. Consecutive edges share an endpoint and the last edge
/// ends where the first starts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbCycle {
    edges: Vec<AbEdge>,
}

impl AbCycle {
    /// Build from a closed walk given as nodes `w[0], w[1], …, w[m] == w[0]`
    /// whose first edge has origin `first`.
    pub fn from_walk(walk: &[Node], first: Origin) -> Self {
        debug_assert!(walk.len() >= 3 && walk.first() == walk.last());
        let mut origin = first;
        let mut edges: Vec<AbEdge> = walk
            .windows(2)
            .map(|w| {
                let e = AbEdge {
                    u: w[0],
                    v: w[1],
                    origin,
                };
                origin = origin.flip();
                e
            })
            .collect();
        if first == Origin::B {
            edges.rotate_left(1);
        }
        Self { edges }
    }

    /// Wrap explicitly labelled edges; the caller is responsible for the
    /// alternation invariant (checked by [`AbCycle::is_valid`]).
    pub fn from_edges(edges: Vec<AbEdge>) -> Self {
        Self { edges }
    }

    pub fn edges(&self) -> &[AbEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn a_edges(&self) -> impl Iterator<Item = &AbEdge> {
        self.edges.iter().filter(|e| e.origin == Origin::A)
    }

    pub fn b_edges(&self) -> impl Iterator<Item = &AbEdge> {
        self.edges.iter().filter(|e| e.origin == Origin::B)
    }

    /// The same cycle with every A label turned into B and vice versa.
    pub fn swapped(&self) -> Self {
        Self {
            edges: self
                .edges
                .iter()
                .map(|e| AbEdge {
                    origin: e.origin.flip(),
                    ..*e
                })
                .collect(),
        }
    }

    /// Closed, alternating, even and at least four edges long.
    pub fn is_valid(&self) -> bool {
        let m = self.edges.len();
        if m < 4 || m % 2 != 0 {
            return false;
        }
        (0..m).all(|k| {
            let e = self.edges[k];
            let next = self.edges[(k + 1) % m];
            e.v == next.u && e.origin != next.origin
        })
    }
}

/// Partition `E_A Δ E_B` into AB-cycles by random alternating walks.
///
/// Edges shared by both parents are cancelled up front. The walk starts at a
/// random node with unused edges, takes an A edge, then a B edge, and so on.
/// Whenever it reaches a node it already visited at the same phase, the
/// closed alternating section is cut off as a cycle and the walk resumes from
/// that node.
pub fn generate_ab_cycles<R: Rng + ?Sized>(pa: &Tour, pb: &Tour, rng: &mut R) -> Vec<AbCycle> {
    let n = pa.n();
    assert_eq!(n, pb.n(), "parents must come from the same instance");
    let adj_a = pa.adjacency();
    let adj_b = pb.adjacency();

    // Remaining edges per node, at most two of each origin.
    let mut rem_a: Vec<Slot> = adj_a.iter().map(|&[x, y]| Slot::new(x, y)).collect();
    let mut rem_b: Vec<Slot> = adj_b.iter().map(|&[x, y]| Slot::new(x, y)).collect();
    for v in 0..n {
        for w in adj_a[v] {
            if (v as Node) < w && (adj_b[v][0] == w || adj_b[v][1] == w) {
                rem_a[v].remove(w);
                rem_a[w as usize].remove(v as Node);
                rem_b[v].remove(w);
                rem_b[w as usize].remove(v as Node);
            }
        }
    }

    let mut active: Vec<Node> = (0..n as Node).filter(|&v| rem_a[v as usize].len > 0).collect();
    let mut active_pos = vec![usize::MAX; n];
    for (p, &v) in active.iter().enumerate() {
        active_pos[v as usize] = p;
    }
    let deactivate = |v: Node, active: &mut Vec<Node>, active_pos: &mut Vec<usize>| {
        let p = active_pos[v as usize];
        if p == usize::MAX {
            return;
        }
        active.swap_remove(p);
        if p < active.len() {
            active_pos[active[p] as usize] = p;
        }
        active_pos[v as usize] = usize::MAX;
    };

    // Latest path index of each node at even / odd positions.
    let mut seen: [Vec<usize>; 2] = [vec![usize::MAX; n], vec![usize::MAX; n]];
    let mut cycles = Vec::new();
    let mut path: Vec<Node> = Vec::new();

    while !active.is_empty() {
        let start = active[rng.gen_range(0..active.len())];
        path.clear();
        path.push(start);
        seen[0][start as usize] = 0;
        loop {
            let m = path.len() - 1;
            let cur = path[m];
            let origin = if m % 2 == 0 { Origin::A } else { Origin::B };
            let slots = match origin {
                Origin::A => &mut rem_a,
                Origin::B => &mut rem_b,
            };
            if slots[cur as usize].len == 0 {
                // Only reachable at the walk's start once all its edges are used.
                debug_assert_eq!(m, 0);
                seen[0][cur as usize] = usize::MAX;
                break;
            }
            let next = slots[cur as usize].take_random(rng);
            slots[next as usize].remove(cur);
            path.push(next);
            for v in [cur, next] {
                if rem_a[v as usize].len == 0 && rem_b[v as usize].len == 0 {
                    deactivate(v, &mut active, &mut active_pos);
                }
            }
            let m = path.len() - 1;
            let parity = m % 2;
            // A node sits on the path at most once per parity, so a hit
            // here closes an alternating cycle.
            let j = seen[parity][next as usize];
            if j != usize::MAX {
                let first = if j % 2 == 0 { Origin::A } else { Origin::B };
                cycles.push(AbCycle::from_walk(&path[j..], first));
                for (idx, &v) in path.iter().enumerate().skip(j + 1) {
                    if seen[idx % 2][v as usize] == idx {
                        seen[idx % 2][v as usize] = usize::MAX;
                    }
                }
                path.truncate(j + 1);
            } else {
                seen[parity][next as usize] = m;
            }
            if path.len() == 1 {
                let v = path[0];
                if rem_a[v as usize].len == 0 {
                    seen[0][v as usize] = usize::MAX;
                    break;
                }
            }
        }
    }
    cycles
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    items: [Node; 2],
    len: u8,
}

impl Slot {
    fn new(x: Node, y: Node) -> Self {
        Self {
            items: [x, y],
            len: 2,
        }
    }

    fn remove(&mut self, w: Node) {
        let len = self.len as usize;
        if let Some(p) = self.items[..len].iter().position(|&x| x == w) {
            self.items[p] = self.items[len - 1];
            self.len -= 1;
        }
    }

    fn take_random<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Node {
        let len = self.len as usize;
        let p = if len == 1 { 0 } else { rng.gen_range(0..len) };
        let w = self.items[p];
        self.items[p] = self.items[len - 1];
        self.len -= 1;
        w
    }
}
