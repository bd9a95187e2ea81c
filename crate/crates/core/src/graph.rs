//! Directed γ-nearest-neighbour graph, built with a uniform grid index.

use crate::instance::{Metric, Node, TspInstance};

/// For every node, its `min(γ, n−1)` nearest other nodes sorted by
/// (distance, id).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGraph {
    gamma: usize,
    k: usize,
    neighbors: Vec<Node>,
    dist: Vec<i64>,
}

impl SparseGraph {
    pub fn build(inst: &TspInstance, gamma: usize) -> Self {
        assert!(gamma >= 1, "gamma must be at least 1");
        let n = inst.n();
        let k = gamma.min(n - 1);
        let mut neighbors = Vec::with_capacity(n * k);
        let mut dist = Vec::with_capacity(n * k);
        if k == n - 1 {
            // Complete graph: exact scan is both cheaper and trivially right.
            for i in 0..n as Node {
                let mut row: Vec<(i64, Node)> = (0..n as Node)
                    .filter(|&j| j != i)
                    .map(|j| (inst.distance(i, j), j))
                    .collect();
                row.sort_unstable();
                for (d, j) in row {
                    neighbors.push(j);
                    dist.push(d);
                }
            }
        } else {
            let grid = Grid::new(inst);
            let mut scratch = Vec::new();
            for i in 0..n as Node {
                grid.nearest(inst, i, k, &mut scratch);
                for &(d, j) in &scratch[..k] {
                    neighbors.push(j);
                    dist.push(d);
                }
            }
        }
        Self {
            gamma,
            k,
            neighbors,
            dist,
        }
    }

    /// Assemble a graph from explicit rows; used by tests and deserialisers.
    pub fn from_rows(gamma: usize, rows: Vec<Vec<(Node, i64)>>) -> Self {
        let k = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == k), "ragged neighbour rows");
        let mut neighbors = Vec::with_capacity(rows.len() * k);
        let mut dist = Vec::with_capacity(rows.len() * k);
        for row in rows {
            for (j, d) in row {
                neighbors.push(j);
                dist.push(d);
            }
        }
        Self {
            gamma,
            k,
            neighbors,
            dist,
        }
    }

    pub fn gamma(&self) -> usize {
        self.gamma
    }

    /// Out-degree of every node, `min(γ, n−1)`.
    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        if self.k == 0 {
            0
        } else {
            self.neighbors.len() / self.k
        }
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len()
    }

    #[inline]
    pub fn neighbors(&self, i: Node) -> &[Node] {
        let s = i as usize * self.k;
        &self.neighbors[s..s + self.k]
    }

    #[inline]
    pub fn distances(&self, i: Node) -> &[i64] {
        let s = i as usize * self.k;
        &self.dist[s..s + self.k]
    }

    /// Flat index of the directed edge `i → j`, if present.
    pub fn edge_index(&self, i: Node, j: Node) -> Option<usize> {
        self.neighbors(i)
            .iter()
            .position(|&t| t == j)
            .map(|p| i as usize * self.k + p)
    }

    pub fn contains(&self, i: Node, j: Node) -> bool {
        self.neighbors(i).contains(&j)
    }

    /// For each flat edge index `i → j`, the flat index of `j → i` if present.
    pub fn reverse_index(&self) -> Vec<Option<usize>> {
        (0..self.n() as Node)
            .flat_map(|i| self.neighbors(i).iter().map(move |&j| self.edge_index(j, i)))
            .collect()
    }

    pub fn flat_targets(&self) -> &[Node] {
        &self.neighbors
    }

    pub fn flat_distances(&self) -> &[i64] {
        &self.dist
    }
}

/// Uniform bucket grid over the bounding box, about two points per cell.
struct Grid {
    min_x: f64,
    min_y: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    start: Vec<usize>,
    items: Vec<Node>,
}

impl Grid {
    fn new(inst: &TspInstance) -> Self {
        let n = inst.n();
        let (min_x, min_y, max_x, max_y) = inst.bounding_box();
        let w = max_x - min_x;
        let h = max_y - min_y;
        let span = w.max(h);
        let mut cell = if w > 0.0 && h > 0.0 {
            (w * h * 2.0 / n as f64).sqrt()
        } else {
            span * 2.0 / n as f64
        };
        if !(cell > 0.0) || !cell.is_finite() {
            cell = 1.0;
        }
        let mut nx = ((w / cell).floor() as usize + 1).max(1);
        let mut ny = ((h / cell).floor() as usize + 1).max(1);
        while nx * ny > 4 * n + 16 {
            cell *= 1.5;
            nx = ((w / cell).floor() as usize + 1).max(1);
            ny = ((h / cell).floor() as usize + 1).max(1);
        }
        let mut grid = Self {
            min_x,
            min_y,
            cell,
            nx,
            ny,
            start: vec![0; nx * ny + 1],
            items: vec![0; n],
        };
        let cells: Vec<usize> = (0..n as Node).map(|i| grid.cell_of(inst.coord(i))).collect();
        for &c in &cells {
            grid.start[c + 1] += 1;
        }
        for c in 0..nx * ny {
            grid.start[c + 1] += grid.start[c];
        }
        let mut fill = grid.start.clone();
        for (i, &c) in cells.iter().enumerate() {
            grid.items[fill[c]] = i as Node;
            fill[c] += 1;
        }
        grid
    }

    fn cell_xy(&self, (x, y): (f64, f64)) -> (usize, usize) {
        let cx = (((x - self.min_x) / self.cell).floor().max(0.0) as usize).min(self.nx - 1);
        let cy = (((y - self.min_y) / self.cell).floor().max(0.0) as usize).min(self.ny - 1);
        (cx, cy)
    }

    fn cell_of(&self, p: (f64, f64)) -> usize {
        let (cx, cy) = self.cell_xy(p);
        cy * self.nx + cx
    }

    /// Fill `out` with at least the `k` nearest nodes to `i` by (distance, id),
    /// sorted. Scans square rings of cells outward and stops once no unseen
    /// node can round to a distance at or below the current k-th best.
    fn nearest(&self, inst: &TspInstance, i: Node, k: usize, out: &mut Vec<(i64, Node)>) {
        out.clear();
        let (cx, cy) = self.cell_xy(inst.coord(i));
        let max_ring = self.nx.max(self.ny);
        let mut ring = 0usize;
        loop {
            self.scan_ring(inst, i, cx, cy, ring, out);
            if ring >= max_ring {
                break;
            }
            if out.len() >= k {
                out.select_nth_unstable(k - 1);
                let kth = out[k - 1].0;
                // Largest Euclidean distance that can still round to `kth`.
                let reach = match inst.metric() {
                    Metric::Euc2d => kth as f64 + 0.5,
                    Metric::Ceil2d => kth as f64,
                };
                // Unscanned nodes are at least `ring * cell` away; one ring of
                // slack absorbs floating-point error in the cell assignment.
                if (ring as f64) * self.cell > reach + self.cell {
                    break;
                }
            }
            ring += 1;
        }
        out.sort_unstable();
    }

    fn scan_ring(
        &self,
        inst: &TspInstance,
        i: Node,
        cx: usize,
        cy: usize,
        ring: usize,
        out: &mut Vec<(i64, Node)>,
    ) {
        let r = ring as isize;
        let (cx, cy) = (cx as isize, cy as isize);
        let mut visit = |x: isize, y: isize| {
            if x < 0 || y < 0 || x >= self.nx as isize || y >= self.ny as isize {
                return;
            }
            let c = y as usize * self.nx + x as usize;
            for &j in &self.items[self.start[c]..self.start[c + 1]] {
                if j != i {
                    out.push((inst.distance(i, j), j));
                }
            }
        };
        if r == 0 {
            visit(cx, cy);
            return;
        }
        for x in cx - r..=cx + r {
            visit(x, cy - r);
            visit(x, cy + r);
        }
        for y in cy - r + 1..=cy + r - 1 {
            visit(cx - r, y);
            visit(cx + r, y);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Metric;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(inst: &TspInstance, gamma: usize) -> Vec<Vec<(Node, i64)>> {
        let n = inst.n();
        (0..n as Node)
            .map(|i| {
                let mut row: Vec<(i64, Node)> = (0..n as Node)
                    .filter(|&j| j != i)
                    .map(|j| (inst.distance(i, j), j))
                    .collect();
                row.sort();
                row.truncate(gamma.min(n - 1));
                row.into_iter().map(|(d, j)| (j, d)).collect()
            })
            .collect()
    }

    fn assert_matches_brute_force(inst: &TspInstance, gamma: usize) {
        let g = SparseGraph::build(inst, gamma);
        let want = brute_force(inst, gamma);
        for i in 0..inst.n() as Node {
            let got: Vec<(Node, i64)> = g
                .neighbors(i)
                .iter()
                .copied()
                .zip(g.distances(i).iter().copied())
                .collect();
            assert_eq!(got, want[i as usize], "node {i}");
        }
    }

    #[test]
    fn unit_square_excludes_diagonal() {
        let inst = TspInstance::new(
            "sq",
            vec![(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)],
            Metric::Euc2d,
        )
        .unwrap();
        let g = SparseGraph::build(&inst, 2);
        assert_eq!(g.neighbors(0), &[1, 3]);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert_eq!(g.neighbors(2), &[1, 3]);
        assert_eq!(g.neighbors(3), &[0, 2]);
        assert_matches_brute_force(&inst, 2);
    }

    #[test]
    fn complete_when_gamma_large() {
        let inst = TspInstance::new("t", vec![(0.0, 0.0), (1.0, 5.0), (3.0, 2.0), (7.0, 7.0)], Metric::Euc2d).unwrap();
        let g = SparseGraph::build(&inst, 10);
        assert_eq!(g.degree(), 3);
        for i in 0..4 {
            let mut row = g.neighbors(i).to_vec();
            row.sort();
            let want: Vec<Node> = (0..4).filter(|&j| j != i).collect();
            assert_eq!(row, want);
        }
    }

    #[test]
    fn collinear_ties_prefer_lower_id() {
        let coords = (0..9).map(|i| (i as f64 * 3.0, 0.0)).collect();
        let inst = TspInstance::new("line", coords, Metric::Euc2d).unwrap();
        let g = SparseGraph::build(&inst, 2);
        assert_eq!(g.neighbors(4), &[3, 5]);
        assert_eq!(g.neighbors(0), &[1, 2]);
        assert_matches_brute_force(&inst, 4);
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..40 {
            let n = rng.gen_range(3..=500);
            let scale = [1.0, 50.0, 1e6][trial % 3];
            let metric = if trial % 2 == 0 { Metric::Euc2d } else { Metric::Ceil2d };
            let coords = (0..n)
                .map(|_| ((rng.gen::<f64>() * scale).round(), (rng.gen::<f64>() * scale).round()))
                .collect();
            let inst = TspInstance::new("r", coords, metric).unwrap();
            for gamma in [1, 5, 20] {
                assert_matches_brute_force(&inst, gamma);
            }
        }
    }

    #[test]
    fn clustered_and_duplicate_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut coords: Vec<(f64, f64)> = (0..200)
            .map(|_| (rng.gen_range(0.0..5.0), rng.gen_range(0.0..5.0)))
            .collect();
        coords.extend((0..50).map(|_| (1e5 + rng.gen_range(0.0..1.0), 1e5)));
        coords.extend(std::iter::repeat((7.0, 7.0)).take(30));
        let inst = TspInstance::new("c", coords, Metric::Euc2d).unwrap();
        assert_matches_brute_force(&inst, 20);
        let line = TspInstance::new("v", (0..100).map(|i| (0.0, i as f64)).collect(), Metric::Euc2d).unwrap();
        assert_matches_brute_force(&line, 7);
    }

    #[test]
    fn reverse_index_points_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let coords = (0..60).map(|_| (rng.gen::<f64>() * 100.0, rng.gen::<f64>() * 100.0)).collect();
        let inst = TspInstance::new("r", coords, Metric::Euc2d).unwrap();
        let g = SparseGraph::build(&inst, 5);
        let rev = g.reverse_index();
        let targets = g.flat_targets();
        for (e, r) in rev.iter().enumerate() {
            let i = (e / g.degree()) as Node;
            let j = targets[e];
            match r {
                Some(r) => {
                    assert_eq!(targets[*r], i);
                    assert_eq!(*r / g.degree(), j as usize);
                }
                None => assert!(!g.contains(j, i)),
            }
        }
    }
}
