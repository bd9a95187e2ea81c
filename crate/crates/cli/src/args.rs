use std::path::PathBuf;

use clap::Args;
use unics::cascade::{CascadeConfig, Scorer};
use unics::guidance::load_weights;
use unics::transition::LinearPolicy;

use crate::error::CliError;

/// Solver flags shared by `solve`, `bench` and `fit-policy`.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Total time budget in seconds.
    #[arg(long, default_value_t = 60.0)]
    pub t_max: f64,
    /// Fixed transition time in seconds (default: predicted by the policy).
    #[arg(long)]
    pub t_trans: Option<f64>,
    /// Out-degree of the sparse candidate graph.
    #[arg(long, default_value_t = 20)]
    pub gamma: usize,
    /// Probability of random AB-cycle selection.
    #[arg(long, default_value_t = 0.5)]
    pub eta: f64,
    /// EAX population size.
    #[arg(long, default_value_t = 100)]
    pub pop: usize,
    /// Children per parent pair.
    #[arg(long, default_value_t = 30)]
    pub nch: usize,
    /// UNGW weight file; the distance-based fallback scorer is used without it.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Transition-policy file (`a=… b=… clamp_min=… clamp_fraction=…`).
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Deterministic work-unit budget replacing wall-clock deadlines.
    #[arg(long)]
    pub iter_budget: Option<u64>,
}

impl SolverArgs {
    pub fn config(&self, seed: u64) -> Result<CascadeConfig, CliError> {
        let mut cfg = CascadeConfig {
            t_max: self.t_max,
            t_trans_override: self.t_trans,
            gamma: self.gamma,
            seed,
            work_budget: self.iter_budget,
            ..CascadeConfig::default()
        };
        cfg.eax.eta = self.eta;
        cfg.eax.population_size = self.pop;
        cfg.eax.n_children = self.nch;
        if let Some(path) = &self.weights {
            let w = load_weights(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            cfg.scorer = Scorer::Network(w);
            cfg.ls.use_penalties = true;
        }
        if let Some(path) = &self.policy {
            cfg.policy = read_policy(path)?;
        }
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

pub fn read_policy(path: &std::path::Path) -> Result<LinearPolicy, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    text.trim()
        .parse()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
