//! Property-based invariants across modules.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unics::budget::Budget;
use unics::eax::{apply_eset, eax_generation, generate_ab_cycles, init_population, merge_subtours, population_best, EaxConfig};
use unics::graph::SparseGraph;
use unics::guidance::{candidate_lists, heuristic_scores};
use unics::instance::{parse_tsplib, Metric, Node, Tour, TspInstance};
use unics::ls::{local_search, LsConfig};
use unics::transition::{gap_curve, ConvergenceTrace, GapSampling, LinearPolicy, Phase};

use common::{edge_set, is_permutation, length_of};

fn coords_strategy(min: usize, max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0u32..5_000, 0u32..5_000), min..=max)
        .prop_map(|v| v.into_iter().map(|(x, y)| (x as f64, y as f64)).collect())
}

fn instance(coords: Vec<(f64, f64)>) -> TspInstance {
    TspInstance::new("p", coords, Metric::Euc2d).unwrap()
}

fn order_strategy(n: usize) -> impl Strategy<Value = Vec<Node>> {
    Just((0..n as Node).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tsplib_round_trip(coords in coords_strategy(3, 60)) {
        let inst = instance(coords);
        let back = parse_tsplib(&inst.to_tsplib()).unwrap();
        prop_assert_eq!(back.coords(), inst.coords());
        prop_assert_eq!(back.metric(), inst.metric());
    }

    #[test]
    fn sparse_graph_rows_are_nearest_neighbours(coords in coords_strategy(3, 80), gamma in 1usize..12) {
        let inst = instance(coords);
        let g = SparseGraph::build(&inst, gamma);
        let n = inst.n();
        prop_assert_eq!(g.degree(), gamma.min(n - 1));
        for i in 0..n as Node {
            let mut all: Vec<(i64, Node)> = (0..n as Node).filter(|&j| j != i).map(|j| (inst.distance(i, j), j)).collect();
            all.sort_unstable();
            let expect: Vec<Node> = all[..g.degree()].iter().map(|p| p.1).collect();
            prop_assert_eq!(g.neighbors(i), &expect[..]);
        }
    }

    #[test]
    fn heuristic_rows_are_distributions(coords in coords_strategy(3, 80), gamma in 1usize..12) {
        let inst = instance(coords);
        let g = SparseGraph::build(&inst, gamma);
        let s = heuristic_scores(&g);
        for i in 0..inst.n() as Node {
            let row = s.row(i);
            prop_assert!(row.iter().all(|&b| (0.0..=1.0).contains(&b)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn crossover_children_are_tours(
        (coords, a, b) in coords_strategy(8, 40).prop_flat_map(|c| {
            let n = c.len();
            (Just(c), order_strategy(n), order_strategy(n))
        }),
        seed in any::<u64>(),
    ) {
        let inst = instance(coords);
        let n = inst.n();
        let pa = Tour::new(&inst, a.clone()).unwrap();
        let pb = Tour::new(&inst, b.clone()).unwrap();
        let cycles = generate_ab_cycles(&pa, &pb, &mut ChaCha8Rng::seed_from_u64(seed));
        let edges: usize = cycles.iter().map(|c| c.len()).sum();
        let sym = edge_set(&a).symmetric_difference(&edge_set(&b)).count();
        prop_assert_eq!(edges, sym);
        for c in &cycles {
            prop_assert!(c.is_valid());
            let child = merge_subtours(apply_eset(&pa, c, &pb), &inst);
            prop_assert!(is_permutation(child.order(), n));
            prop_assert_eq!(length_of(&inst, child.order()), child.len());
        }
    }

    #[test]
    fn local_search_never_worsens(coords in coords_strategy(5, 120), seed in any::<u64>(), depth in 2u8..=3) {
        let inst = instance(coords);
        let g = SparseGraph::build(&inst, 8);
        let cands = candidate_lists(&heuristic_scores(&g), &g, 5);
        let start = Tour::new(&inst, (0..inst.n() as Node).collect()).unwrap();
        let cfg = LsConfig { lambda_depth: depth, ..LsConfig::default() };
        let out = local_search(&inst, &cands, None, &start, &cfg, &Budget::work(20_000), &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(out.tour.len() <= start.len());
        prop_assert!(is_permutation(out.tour.order(), inst.n()));
        prop_assert_eq!(length_of(&inst, out.tour.order()), out.tour.len());
    }

    #[test]
    fn eax_population_best_monotone(coords in coords_strategy(8, 60), seed in any::<u64>()) {
        let inst = instance(coords);
        let g = SparseGraph::build(&inst, 8);
        let scores = heuristic_scores(&g);
        let cfg = EaxConfig { population_size: 8, n_children: 5, ..EaxConfig::default() };
        let budget = Budget::work(u64::MAX);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pop = init_population(&inst, &g, 8, None, &budget, &mut rng);
        let mut best = population_best(&pop).len();
        for _ in 0..5 {
            eax_generation(&mut pop, &inst, &g, &scores, &cfg, &budget, &mut rng);
            prop_assert_eq!(pop.len(), 8);
            let b = population_best(&pop).len();
            prop_assert!(b <= best);
            best = b;
        }
    }

    #[test]
    fn policy_prediction_within_clamps(a in -1.0f64..1.0, b in -50.0f64..50.0, n in 3usize..200_000, t_max in 1.0f64..10_000.0) {
        let p = LinearPolicy::new(a, b);
        let t = p.predict(n, t_max);
        prop_assert!(t >= p.clamp_min.min(p.clamp_fraction * t_max));
        prop_assert!(t <= p.clamp_fraction * t_max);
    }

    #[test]
    fn gap_curve_is_non_increasing(steps in prop::collection::vec((0.01f64..3.0, 1i64..500), 1..10), bks in 1_000i64..2_000) {
        let mut trace = ConvergenceTrace::new();
        let (mut t, mut len) = (0.0, bks + 10_000);
        for (dt, dl) in steps {
            t += dt;
            len -= dl;
            trace.record(t, len.max(bks), Phase::Pbs);
        }
        let curve = gap_curve(&trace, bks, GapSampling::per_second(t.ceil() + 1.0)).unwrap();
        prop_assert!(curve.iter().all(|g| g.is_finite() && *g >= 0.0));
        // From the first sample that sees a solution, the curve can only go down.
        let start = (trace.events()[0].t.ceil() as usize).saturating_sub(1);
        prop_assert!(curve[start..].windows(2).all(|w| w[1] <= w[0]));
    }
}
