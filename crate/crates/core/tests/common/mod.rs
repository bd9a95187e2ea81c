//! Test-only oracles, kept independent of the solver code paths.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unics::instance::{Metric, Node, TspInstance};

/// Uniform integer coordinates in `[0, scale)²`.
pub fn uniform_instance(n: usize, seed: u64, scale: u32) -> TspInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = (0..n)
        .map(|_| (rng.gen_range(0..scale) as f64, rng.gen_range(0..scale) as f64))
        .collect();
    TspInstance::new(format!("u{n}_{seed}"), coords, Metric::Euc2d).unwrap()
}

pub fn random_order<R: Rng>(n: usize, rng: &mut R) -> Vec<Node> {
    let mut o: Vec<Node> = (0..n as Node).collect();
    o.shuffle(rng);
    o
}

/// Length of the closed tour, computed straight from the coordinates.
pub fn length_of(inst: &TspInstance, order: &[Node]) -> i64 {
    (0..order.len())
        .map(|k| {
            let (a, b) = (order[k], order[(k + 1) % order.len()]);
            let (x1, y1) = inst.coord(a);
            let (x2, y2) = inst.coord(b);
            ((x1 - x2).hypot(y1 - y2) + 0.5).floor() as i64
        })
        .sum()
}

pub fn is_permutation(order: &[Node], n: usize) -> bool {
    let mut seen = vec![false; n];
    order.len() == n
        && order
            .iter()
            .all(|&v| (v as usize) < n && !std::mem::replace(&mut seen[v as usize], true))
}

pub fn edge_set(order: &[Node]) -> BTreeSet<(Node, Node)> {
    (0..order.len())
        .map(|k| {
            let (a, b) = (order[k], order[(k + 1) % order.len()]);
            (a.min(b), a.max(b))
        })
        .collect()
}

/// Held–Karp dynamic programme over subsets containing node 0.
pub fn held_karp(inst: &TspInstance) -> i64 {
    let n = inst.n();
    assert!(n <= 16, "held_karp is exponential");
    let m = n - 1;
    let full = 1usize << m;
    let d = |i: usize, j: usize| inst.distance(i as Node, j as Node);
    let mut dp = vec![i64::MAX; full * m];
    for j in 0..m {
        dp[(1 << j) * m + j] = d(0, j + 1);
    }
    for set in 1..full {
        for last in 0..m {
            let cur = dp[set * m + last];
            if set & (1 << last) == 0 || cur == i64::MAX {
                continue;
            }
            for next in 0..m {
                if set & (1 << next) != 0 {
                    continue;
                }
                let s2 = set | (1 << next);
                let cand = cur + d(last + 1, next + 1);
                if cand < dp[s2 * m + next] {
                    dp[s2 * m + next] = cand;
                }
            }
        }
    }
    (0..m).map(|j| dp[(full - 1) * m + j] + d(j + 1, 0)).min().unwrap()
}

/// Exhaustive search over all tours starting at node 0.
pub fn brute_force(inst: &TspInstance) -> i64 {
    fn rec(inst: &TspInstance, path: &mut Vec<Node>, used: &mut [bool], len: i64, best: &mut i64) {
        let n = inst.n();
        if len >= *best {
            return;
        }
        if path.len() == n {
            *best = (*best).min(len + inst.distance(*path.last().unwrap(), path[0]));
            return;
        }
        for v in 1..n as Node {
            if !used[v as usize] {
                used[v as usize] = true;
                let last = *path.last().unwrap();
                path.push(v);
                rec(inst, path, used, len + inst.distance(last, v), best);
                path.pop();
                used[v as usize] = false;
            }
        }
    }
    let mut best = i64::MAX;
    let mut used = vec![false; inst.n()];
    used[0] = true;
    rec(inst, &mut vec![0], &mut used, 0, &mut best);
    best
}
