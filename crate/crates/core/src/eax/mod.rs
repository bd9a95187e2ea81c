//! Population-based phase: edge assembly crossover with score-guided
//! AB-cycle selection.

mod abcycle;
mod intermediate;

pub use abcycle::{generate_ab_cycles, AbCycle, AbEdge, Origin};
pub use intermediate::{apply_eset, merge_subtours, merge_subtours_sparse, IntermediateSolution};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::budget::Budget;
use crate::graph::SparseGraph;
use crate::guidance::{score_ab_cycle, CandidateLists, EdgeScores};
use crate::instance::{Node, Tour, TspInstance};
use crate::ls::two_opt;
use crate::transition::{ConvergenceTrace, Phase};

use intermediate::{adjacency_order, apply_cycle, merge_in_place};

#[derive(Debug, Clone, PartialEq)]
pub struct EaxConfig {
    pub population_size: usize,
    pub n_children: usize,
    /// Probability of picking a random unused AB-cycle instead of the best.
    pub eta: f64,
    /// Generations without a new best before switching to stage II.
    pub stage2_no_improve_generations: usize,
    /// Largest n for which subtour merging scans every edge pair; above it
    /// only reconnections creating a sparse-graph edge are tried.
    pub exact_merge_max_n: usize,
}

impl Default for EaxConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            n_children: 30,
            eta: 0.5,
            stage2_no_improve_generations: 50,
            exact_merge_max_n: 200,
        }
    }
}

impl EaxConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.population_size < 2 {
            return Err(format!("population size must be at least 2, got {}", self.population_size));
        }
        if self.n_children == 0 {
            return Err("number of children must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(format!("eta must lie in [0, 1], got {}", self.eta));
        }
        Ok(())
    }
}

/// Pick up to `cfg.n_children` cycles without replacement: with
/// probability η a uniformly random unused cycle, otherwise the best-scored
/// unused one (ties broken by position in `cycles`). Returns indices.
pub fn select_esets<R: Rng + ?Sized>(cycles: &[AbCycle], scores: &EdgeScores, cfg: &EaxConfig, rng: &mut R) -> Vec<usize> {
    let m = cycles.len();
    let want = cfg.n_children.min(m);
    let score: Vec<f64> = cycles.iter().map(|c| score_ab_cycle(c, scores)).collect();
    let mut ranked: Vec<usize> = (0..m).collect();
    ranked.sort_by(|&i, &j| score[j].total_cmp(&score[i]).then(i.cmp(&j)));

    // `unused` is a swap-remove set; `slot[i]` is i's index in it.
    let mut unused: Vec<usize> = (0..m).collect();
    let mut slot: Vec<usize> = (0..m).collect();
    let mut used = vec![false; m];
    let mut cursor = 0;
    let mut picked = Vec::with_capacity(want);
    while picked.len() < want {
        let i = if cfg.eta > 0.0 && rng.gen::<f64>() < cfg.eta {
            unused[rng.gen_range(0..unused.len())]
        } else {
            while used[ranked[cursor]] {
                cursor += 1;
            }
            ranked[cursor]
        };
        used[i] = true;
        let s = slot[i];
        unused.swap_remove(s);
        if s < unused.len() {
            slot[unused[s]] = s;
        }
        picked.push(i);
    }
    picked
}

/// Randomised nearest-neighbour construction: random start, and at each
/// step the nearest unvisited sparse neighbour, or the second nearest with
/// probability 1/4.
fn randomized_greedy<R: Rng + ?Sized>(inst: &TspInstance, graph: &SparseGraph, rng: &mut R) -> Tour {
    let n = inst.n();
    let mut visited = vec![false; n];
    let mut unvisited: Vec<Node> = (0..n as Node).collect();
    let mut slot: Vec<usize> = (0..n).collect();
    let mut take = |v: Node, unvisited: &mut Vec<Node>| {
        let p = slot[v as usize];
        unvisited.swap_remove(p);
        if p < unvisited.len() {
            slot[unvisited[p] as usize] = p;
        }
    };
    let start = rng.gen_range(0..n) as Node;
    let mut order = Vec::with_capacity(n);
    let mut cur = start;
    visited[cur as usize] = true;
    take(cur, &mut unvisited);
    order.push(cur);
    while !unvisited.is_empty() {
        let mut open = graph.neighbors(cur).iter().copied().filter(|&j| !visited[j as usize]);
        let next = match (open.next(), open.next()) {
            (Some(_), Some(second)) if rng.gen_ratio(1, 4) => second,
            (Some(first), _) => first,
            _ => *unvisited
                .iter()
                .min_by_key(|&&j| (inst.distance(cur, j), j))
                .expect("unvisited is non-empty"),
        };
        visited[next as usize] = true;
        take(next, &mut unvisited);
        order.push(next);
        cur = next;
    }
    let length = inst.cycle_length(&order);
    Tour::from_parts(order, length)
}

/// `size` tours from randomised nearest neighbour followed by one capped
/// 2-opt pass; `seed_tour` (if any) replaces a uniformly random member.
pub fn init_population<R: Rng + ?Sized>(
    inst: &TspInstance,
    graph: &SparseGraph,
    size: usize,
    seed_tour: Option<&Tour>,
    budget: &Budget,
    rng: &mut R,
) -> Vec<Tour> {
    assert!(size >= 2, "population size must be at least 2");
    let cands = CandidateLists::from_graph(graph, 8);
    let n = inst.n();
    let mut pop: Vec<Tour> = (0..size)
        .map(|_| {
            budget.spend(n as u64);
            two_opt(inst, &cands, &randomized_greedy(inst, graph, rng), n)
        })
        .collect();
    if let Some(seed) = seed_tour {
        let i = rng.gen_range(0..size);
        pop[i] = seed.clone();
    }
    pop
}

/// Best member (shortest, earliest on ties).
pub fn population_best(pop: &[Tour]) -> &Tour {
    pop.iter().min_by_key(|t| t.len()).expect("population is non-empty")
}

/// Statistics of one generation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenerationStats {
    pub offspring: usize,
    pub replacements: usize,
}

/// One EAX generation. Parents are paired along a random cyclic
/// permutation; for each pair the shortest of up to N_ch children replaces
/// p_A if strictly shorter. Replacements are applied after all pairs, so
/// every crossover of a generation sees the same population. Stops early
/// (keeping the work done so far) when the budget runs out; each child
/// costs `n` work units.
pub fn eax_generation<R: Rng + ?Sized>(
    pop: &mut [Tour],
    inst: &TspInstance,
    graph: &SparseGraph,
    scores: &EdgeScores,
    cfg: &EaxConfig,
    budget: &Budget,
    rng: &mut R,
) -> GenerationStats {
    let size = pop.len();
    let n = inst.n();
    let mut perm: Vec<usize> = (0..size).collect();
    perm.shuffle(rng);
    let sparse_merge = (n > cfg.exact_merge_max_n).then_some(graph);
    let mut stats = GenerationStats::default();
    let mut replacements: Vec<(usize, Tour)> = Vec::new();
    for k in 0..size {
        if budget.exhausted() {
            break;
        }
        let (ia, ib) = (perm[k], perm[(k + 1) % size]);
        let (pa, pb) = (&pop[ia], &pop[ib]);
        let cycles = generate_ab_cycles(pa, pb, rng);
        if cycles.is_empty() {
            continue;
        }
        let chosen = select_esets(&cycles, scores, cfg, rng);
        let base = pa.adjacency();
        let mut best: Option<(i64, Vec<[Node; 2]>)> = None;
        for &c in &chosen {
            budget.spend(n as u64);
            stats.offspring += 1;
            let mut adj = base.clone();
            let delta = apply_cycle(&mut adj, &cycles[c], inst);
            let mut im = IntermediateSolution::from_adjacency(adj).expect("E-set application keeps every degree at 2");
            let len = pa.len() + delta + merge_in_place(&mut im, inst, sparse_merge);
            if best.as_ref().map_or(true, |(b, _)| len < *b) {
                best = Some((len, im.adjacency().to_vec()));
            }
        }
        if let Some((len, adj)) = best {
            if len < pa.len() {
                let child = Tour::from_parts(adjacency_order(&adj), len);
                debug_assert_eq!(inst.cycle_length(child.order()), len);
                replacements.push((ia, child));
            }
        }
    }
    stats.replacements = replacements.len();
    for (i, t) in replacements {
        pop[i] = t;
    }
    stats
}

#[derive(Debug, Clone)]
pub struct PbsOutcome {
    pub best: Tour,
    pub trace: ConvergenceTrace,
    pub generations: usize,
    /// Every member identical (no AB-cycles left) or stage II stalled.
    pub converged: bool,
}

/// Run generations until the budget is spent or the search stalls.
/// Stage II starts after `stage2_no_improve_generations` generations
/// without a new best and halves η; a further stall of the same length in
/// stage II ends the run.
pub fn run_pbs<R: Rng + ?Sized>(
    inst: &TspInstance,
    graph: &SparseGraph,
    scores: &EdgeScores,
    cfg: &EaxConfig,
    mut pop: Vec<Tour>,
    budget: &Budget,
    rng: &mut R,
) -> PbsOutcome {
    let mut trace = ConvergenceTrace::new();
    let mut best = population_best(&pop).clone();
    trace.record(budget.elapsed(), best.len(), Phase::Pbs);
    let mut stage_cfg = cfg.clone();
    let mut stage2 = false;
    let mut stall = 0;
    let mut generations = 0;
    let mut converged = false;
    while !budget.exhausted() {
        let stats = eax_generation(&mut pop, inst, graph, scores, &stage_cfg, budget, rng);
        generations += 1;
        let gen_best = population_best(&pop);
        if gen_best.len() < best.len() {
            best = gen_best.clone();
            trace.record(budget.elapsed(), best.len(), Phase::Pbs);
            stall = 0;
        } else {
            stall += 1;
        }
        if stats.offspring == 0 && !budget.exhausted() {
            converged = true;
            break;
        }
        if stall >= cfg.stage2_no_improve_generations {
            if stage2 {
                converged = true;
                break;
            }
            log::debug!("eax: stage II after {generations} generations");
            stage2 = true;
            stage_cfg.eta = cfg.eta / 2.0;
            stall = 0;
        }
    }
    trace.t_end = budget.elapsed();
    PbsOutcome {
        best,
        trace,
        generations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guidance::heuristic_scores;
    use crate::instance::Metric;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_instance(n: usize, rng: &mut ChaCha8Rng) -> TspInstance {
        let coords = (0..n).map(|_| (rng.gen_range(0..1000) as f64, rng.gen_range(0..1000) as f64)).collect();
        TspInstance::new("r", coords, Metric::Euc2d).unwrap()
    }

    fn cycle_with_score(k: usize) -> AbCycle {
        // Distinct dummy cycles; scores come from a hand-built table below.
        let b = 10 * k as Node;
        AbCycle::from_walk(&[b, b + 1, b + 2, b + 3, b], Origin::A)
    }

    #[test]
    fn config_validation() {
        assert!(EaxConfig::default().validate().is_ok());
        let bad = EaxConfig {
            population_size: 1,
            ..EaxConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = EaxConfig {
            eta: 1.5,
            ..EaxConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn greedy_selection_is_descending() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = random_instance(40, &mut rng);
        let graph = SparseGraph::build(&inst, 39);
        let scores = heuristic_scores(&graph);
        let cycles: Vec<AbCycle> = (0..3).map(cycle_with_score).collect();
        let cfg = EaxConfig {
            eta: 0.0,
            n_children: 10,
            ..EaxConfig::default()
        };
        let picked = select_esets(&cycles, &scores, &cfg, &mut rng);
        assert_eq!(picked.len(), 3);
        let s: Vec<f64> = picked.iter().map(|&i| score_ab_cycle(&cycles[i], &scores)).collect();
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        assert!(select_esets(&[], &scores, &cfg, &mut rng).is_empty());
    }

    #[test]
    fn n_children_caps_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inst = random_instance(40, &mut rng);
        let graph = SparseGraph::build(&inst, 5);
        let scores = heuristic_scores(&graph);
        let cycles: Vec<AbCycle> = (0..3).map(cycle_with_score).collect();
        let cfg = EaxConfig {
            n_children: 2,
            ..EaxConfig::default()
        };
        let picked = select_esets(&cycles, &scores, &cfg, &mut rng);
        assert_eq!(picked.len(), 2);
        assert_ne!(picked[0], picked[1]);
    }

    #[test]
    fn tiny_population_is_copies() {
        let inst = TspInstance::new("t", vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)], Metric::Euc2d).unwrap();
        let graph = SparseGraph::build(&inst, 20);
        let pop = init_population(&inst, &graph, 2, None, &Budget::work(u64::MAX), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(pop.len(), 2);
        assert_eq!(pop[0].edges(), pop[1].edges());
    }

    #[test]
    fn seed_tour_is_injected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inst = random_instance(60, &mut rng);
        let graph = SparseGraph::build(&inst, 10);
        let seed = Tour::new(&inst, (0..60).collect()).unwrap();
        let pop = init_population(&inst, &graph, 10, Some(&seed), &Budget::work(u64::MAX), &mut rng);
        assert_eq!(pop.iter().filter(|t| **t == seed).count(), 1);
        for t in &pop {
            assert_eq!(inst.tour_length(t.order()).unwrap(), t.len());
        }
    }

    #[test]
    fn identical_population_is_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let inst = random_instance(30, &mut rng);
        let graph = SparseGraph::build(&inst, 10);
        let scores = heuristic_scores(&graph);
        let t = Tour::new(&inst, (0..30).collect()).unwrap();
        let mut pop = vec![t.clone(); 5];
        let stats = eax_generation(&mut pop, &inst, &graph, &scores, &EaxConfig::default(), &Budget::work(u64::MAX), &mut rng);
        assert_eq!(stats.offspring, 0);
        assert!(pop.iter().all(|p| *p == t));
    }

    #[test]
    fn generations_never_worsen_best() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let inst = random_instance(80, &mut rng);
        let graph = SparseGraph::build(&inst, 10);
        let scores = heuristic_scores(&graph);
        let cfg = EaxConfig {
            population_size: 20,
            ..EaxConfig::default()
        };
        let budget = Budget::work(u64::MAX);
        let mut pop = init_population(&inst, &graph, 20, None, &budget, &mut rng);
        let mut best = population_best(&pop).len();
        for _ in 0..30 {
            eax_generation(&mut pop, &inst, &graph, &scores, &cfg, &budget, &mut rng);
            assert_eq!(pop.len(), 20);
            let b = population_best(&pop).len();
            assert!(b <= best);
            best = b;
            for t in &pop {
                assert_eq!(inst.tour_length(t.order()).unwrap(), t.len());
            }
        }
    }

    #[test]
    fn sparse_merge_path_gives_valid_children() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let inst = random_instance(150, &mut rng);
        let graph = SparseGraph::build(&inst, 8);
        let scores = heuristic_scores(&graph);
        let cfg = EaxConfig {
            population_size: 10,
            exact_merge_max_n: 0,
            ..EaxConfig::default()
        };
        let budget = Budget::work(u64::MAX);
        let pop = init_population(&inst, &graph, 10, None, &budget, &mut rng);
        let start = population_best(&pop).len();
        let out = run_pbs(&inst, &graph, &scores, &cfg, pop, &Budget::work(2_000_000), &mut rng);
        assert!(out.best.len() <= start);
        assert_eq!(inst.tour_length(out.best.order()).unwrap(), out.best.len());
    }
}
