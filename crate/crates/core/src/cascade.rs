//! The two-phase solver: local search until the transition time, then EAX
//! seeded with the local-search best until the overall deadline.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::budget::{Budget, Limit};
use crate::eax::{init_population, run_pbs, EaxConfig};
use crate::graph::SparseGraph;
use crate::guidance::{candidate_lists, heuristic_scores, sgn_forward, NodePenalties, SgnWeights, WeightsError};
use crate::instance::{Tour, TspInstance};
use crate::ls::{initial_tour, local_search, LsConfig};
use crate::transition::{ConvergenceTrace, LinearPolicy, TransitionError};

#[derive(Debug, Error)]
pub enum CascadeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error(transparent)]
    Policy(#[from] TransitionError),
}

/// Where edge scores and node penalties come from.
#[derive(Debug, Clone, Default)]
pub enum Scorer {
    /// Distance-based softmax scores and zero penalties.
    #[default]
    Fallback,
    Network(SgnWeights),
}

#[derive(Debug, Clone)]
pub struct CascadeConfig {
    /// Overall budget in seconds. Also sets the phase split in work mode.
    pub t_max: f64,
    /// Fixed transition time; `None` asks the policy.
    pub t_trans_override: Option<f64>,
    pub ls: LsConfig,
    pub eax: EaxConfig,
    pub gamma: usize,
    pub scorer: Scorer,
    pub policy: LinearPolicy,
    pub seed: u64,
    /// Replace wall-clock deadlines by this many work units, split between
    /// the phases in the ratio t_trans : (t_max − t_trans). Makes a run
    /// reproducible bit for bit.
    pub work_budget: Option<u64>,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            t_max: 60.0,
            t_trans_override: None,
            ls: LsConfig::default(),
            eax: EaxConfig::default(),
            gamma: 20,
            scorer: Scorer::Fallback,
            policy: LinearPolicy::default(),
            seed: 0,
            work_budget: None,
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<(), CascadeError> {
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(CascadeError::Config(format!("t_max must be positive, got {}", self.t_max)));
        }
        if let Some(t) = self.t_trans_override {
            if !(0.0..=self.t_max).contains(&t) {
                return Err(CascadeError::Config(format!(
                    "t_trans {t} outside [0, t_max = {}]",
                    self.t_max
                )));
            }
        }
        if self.gamma == 0 {
            return Err(CascadeError::Config("gamma must be at least 1".into()));
        }
        self.ls.validate().map_err(CascadeError::Config)?;
        self.eax.validate().map_err(CascadeError::Config)?;
        self.policy.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub n: usize,
    /// Planned transition time (seconds from the start of the solve).
    pub t_trans: f64,
    /// Best length when local search handed over, if it ran.
    pub ls_best: Option<i64>,
    /// Best of the initial PBS population, if the population phase ran.
    pub pbs_start: Option<i64>,
    pub generations: usize,
    pub length: i64,
    pub wall_s: f64,
}

/// Run the cascade on `inst`. The returned tour is the best seen in either
/// phase and its length equals the last trace event.
pub fn solve(inst: &TspInstance, cfg: &CascadeConfig) -> Result<(Tour, ConvergenceTrace, SolveReport), CascadeError> {
    let origin = Instant::now();
    cfg.validate()?;
    let n = inst.n();

    let graph = SparseGraph::build(inst, cfg.gamma);
    let (scores, penalties) = match &cfg.scorer {
        Scorer::Fallback => (heuristic_scores(&graph), NodePenalties::zeros(n)),
        Scorer::Network(w) => {
            if w.gamma != graph.degree() {
                log::warn!(
                    "weights were trained with gamma={}, graph uses degree {}",
                    w.gamma,
                    graph.degree()
                );
            }
            sgn_forward(&graph, inst, w)?
        }
    };
    let t_trans = cfg
        .t_trans_override
        .unwrap_or_else(|| cfg.policy.predict(n, cfg.t_max));
    let run_ls = t_trans > 0.0;
    let run_pbs_phase = t_trans < cfg.t_max;

    // Deadline of a phase ending `secs` after the solve started.
    let phase_budget = |secs: f64, units: u64| match cfg.work_budget {
        Some(_) => Budget::with_origin(Limit::Work(units), origin),
        None => {
            let left = secs - origin.elapsed().as_secs_f64();
            Budget::with_origin(Limit::Time(Duration::from_secs_f64(left.max(0.0))), origin)
        }
    };
    let total_units = cfg.work_budget.unwrap_or(0);
    let ls_units = (total_units as f64 * t_trans / cfg.t_max).round() as u64;

    let mut trace = ConvergenceTrace::new();
    let mut best: Option<Tour> = None;
    let mut ls_best = None;
    let mut ls_used = 0;
    if run_ls {
        let cands = candidate_lists(&scores, &graph, cfg.ls.candidates_k);
        let budget = phase_budget(t_trans, ls_units);
        let start = initial_tour(inst, &graph);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let out = local_search(inst, &cands, Some(&penalties), &start, &cfg.ls, &budget, &mut rng);
        ls_used = budget.used();
        trace.extend(&out.trace);
        ls_best = Some(out.tour.len());
        best = Some(out.tour);
    }

    let mut pbs_start = None;
    let mut generations = 0;
    if run_pbs_phase {
        trace.transition_at = Some(origin.elapsed().as_secs_f64());
        // Work left over by an early-finishing local search goes to PBS.
        let budget = phase_budget(cfg.t_max, total_units.saturating_sub(ls_used.min(ls_units)));
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 1);
        let pop = init_population(inst, &graph, cfg.eax.population_size, best.as_ref(), &budget, &mut rng);
        pbs_start = pop.iter().map(Tour::len).min();
        let out = run_pbs(inst, &graph, &scores, &cfg.eax, pop, &budget, &mut rng);
        generations = out.generations;
        trace.extend(&out.trace);
        if best.as_ref().map_or(true, |b| out.best.len() < b.len()) {
            best = Some(out.best);
        }
    }

    let tour = best.expect("at least one phase runs");
    let wall_s = origin.elapsed().as_secs_f64();
    trace.t_end = trace.t_end.max(wall_s);
    debug_assert_eq!(trace.best(), Some(tour.len()));
    let report = SolveReport {
        n,
        t_trans,
        ls_best,
        pbs_start,
        generations,
        length: tour.len(),
        wall_s,
    };
    Ok((tour, trace, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Metric;
    use rand::Rng;

    fn random_instance(n: usize, seed: u64) -> TspInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords = (0..n).map(|_| (rng.gen_range(0..10_000) as f64, rng.gen_range(0..10_000) as f64)).collect();
        TspInstance::new("r", coords, Metric::Euc2d).unwrap()
    }

    fn work_cfg(t_trans: Option<f64>) -> CascadeConfig {
        CascadeConfig {
            t_max: 10.0,
            t_trans_override: t_trans,
            eax: EaxConfig {
                population_size: 10,
                ..EaxConfig::default()
            },
            seed: 3,
            work_budget: Some(2_000_000),
            ..CascadeConfig::default()
        }
    }

    #[test]
    fn rejects_bad_config() {
        let inst = random_instance(20, 0);
        let cfg = CascadeConfig {
            t_max: 0.0,
            ..CascadeConfig::default()
        };
        assert!(matches!(solve(&inst, &cfg), Err(CascadeError::Config(_))));
        let cfg = CascadeConfig {
            t_trans_override: Some(100.0),
            ..CascadeConfig::default()
        };
        assert!(matches!(solve(&inst, &cfg), Err(CascadeError::Config(_))));
    }

    #[test]
    fn cascade_trace_and_result_agree() {
        let inst = random_instance(120, 1);
        let (tour, trace, report) = solve(&inst, &work_cfg(Some(5.0))).unwrap();
        assert_eq!(inst.tour_length(tour.order()).unwrap(), tour.len());
        assert_eq!(trace.best(), Some(tour.len()));
        assert!(tour.len() <= report.ls_best.unwrap());
        assert!(report.pbs_start.unwrap() <= report.ls_best.unwrap());
        assert!(trace.transition_at.is_some());
    }

    #[test]
    fn degenerate_transition_times() {
        let inst = random_instance(80, 2);
        let (_, _, pure_pbs) = solve(&inst, &work_cfg(Some(0.0))).unwrap();
        assert!(pure_pbs.ls_best.is_none());
        assert!(pure_pbs.generations > 0);
        let (_, trace, pure_ls) = solve(&inst, &work_cfg(Some(10.0))).unwrap();
        assert!(pure_ls.pbs_start.is_none());
        assert!(trace.transition_at.is_none());
    }

    #[test]
    fn work_budget_is_deterministic() {
        let inst = random_instance(100, 3);
        let a = solve(&inst, &work_cfg(Some(4.0))).unwrap().0;
        let b = solve(&inst, &work_cfg(Some(4.0))).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn network_scorer_runs() {
        let inst = random_instance(40, 4);
        let w = SgnWeights::random(1, 8, 20, &mut ChaCha8Rng::seed_from_u64(0));
        let cfg = CascadeConfig {
            scorer: Scorer::Network(w),
            ls: LsConfig {
                use_penalties: true,
                ..LsConfig::default()
            },
            ..work_cfg(Some(5.0))
        };
        let (tour, _, _) = solve(&inst, &cfg).unwrap();
        assert_eq!(inst.tour_length(tour.order()).unwrap(), tour.len());
    }
}
