//! Solver output checked against exhaustive oracles, plus end-to-end
//! cascade contracts.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unics::budget::Budget;
use unics::cascade::{solve, CascadeConfig};
use unics::eax::{eax_generation, init_population, population_best, EaxConfig};
use unics::graph::SparseGraph;
use unics::guidance::heuristic_scores;
use unics::transition::{Phase, TraceEvent};

use common::{brute_force, held_karp, uniform_instance};

#[test]
fn held_karp_agrees_with_brute_force() {
    for seed in 0..30 {
        let inst = uniform_instance(4 + (seed % 6) as usize, seed, 500);
        assert_eq!(held_karp(&inst), brute_force(&inst), "seed {seed}");
    }
}

#[test]
fn eax_finds_eight_node_optimum() {
    let mut hits = 0;
    for seed in 0..100 {
        let inst = uniform_instance(8, 10_000 + seed, 1_000);
        let opt = brute_force(&inst);
        let graph = SparseGraph::build(&inst, 20);
        let scores = heuristic_scores(&graph);
        let cfg = EaxConfig::default();
        let budget = Budget::work(u64::MAX);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pop = init_population(&inst, &graph, cfg.population_size, None, &budget, &mut rng);
        for _ in 0..200 {
            eax_generation(&mut pop, &inst, &graph, &scores, &cfg, &budget, &mut rng);
        }
        hits += usize::from(population_best(&pop).len() == opt);
    }
    assert!(hits >= 95, "optimum reached in {hits}/100 runs");
}

#[test]
fn cascade_is_deterministic_under_work_budget() {
    let inst = uniform_instance(300, 1, 100_000);
    let cfg = CascadeConfig {
        t_max: 10.0,
        seed: 9,
        work_budget: Some(3_000_000),
        ..CascadeConfig::default()
    };
    let (a, ta, _) = solve(&inst, &cfg).unwrap();
    let (b, tb, _) = solve(&inst, &cfg).unwrap();
    assert_eq!(a, b);
    let lens = |t: &unics::transition::ConvergenceTrace| t.events().iter().map(|e| e.len).collect::<Vec<_>>();
    assert_eq!(lens(&ta), lens(&tb));
}

#[test]
fn cascade_trace_covers_both_phases() {
    let inst = uniform_instance(400, 2, 100_000);
    let cfg = CascadeConfig {
        t_max: 10.0,
        t_trans_override: Some(1.0),
        seed: 1,
        work_budget: Some(4_000_000),
        ..CascadeConfig::default()
    };
    let (tour, trace, report) = solve(&inst, &cfg).unwrap();
    let events = trace.events();
    assert_eq!(events[0].phase, Phase::Ls);
    assert!(events.windows(2).all(|w| w[1].len < w[0].len && w[1].t >= w[0].t));
    assert_eq!(events.last().unwrap().len, tour.len());
    assert!(report.pbs_start.unwrap() <= report.ls_best.unwrap());
    assert!(tour.len() <= report.ls_best.unwrap());

    for line in trace.to_json_lines().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys.len(), 3);
        assert!(["t", "len", "phase"].iter().all(|k| keys.contains(k)));
        let e: TraceEvent = serde_json::from_value(v).unwrap();
        assert!(matches!(e.phase, Phase::Ls | Phase::Pbs));
    }
}

#[test]
fn small_instances_solved_exactly_within_two_seconds() {
    for seed in 0..10 {
        let inst = uniform_instance(6 + (seed % 5) as usize, 20_000 + seed, 1_000);
        let cfg = CascadeConfig {
            t_max: 2.0,
            seed,
            ..CascadeConfig::default()
        };
        let (tour, _, report) = solve(&inst, &cfg).unwrap();
        assert_eq!(tour.len(), held_karp(&inst), "seed {seed}");
        assert!(report.wall_s <= 2.5);
    }
}
