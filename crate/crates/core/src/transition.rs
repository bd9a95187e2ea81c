//! Anytime metric and the size → transition-time policy.
//!
//! The metric is the area under the optimality-gap curve: the gap is sampled
//! at a fixed interval over the run, and seconds before the first solution
//! are charged ten times the first solution's gap. The policy is a clamped
//! linear function of the node count fitted by least squares to the
//! per-instance best transition times.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TransitionError {
    #[error("trace contains no solution")]
    EmptyTrace,
    #[error("need at least two samples with distinct node counts")]
    DegenerateSamples,
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Ls,
    Pbs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t: f64,
    pub len: i64,
    pub phase: Phase,
}

/// Time-stamped best-so-far lengths: times strictly increase and lengths
/// strictly decrease.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    events: Vec<TraceEvent>,
    /// Total runtime covered by the trace.
    pub t_end: f64,
    /// When the cascade handed over from local search to the population phase.
    pub transition_at: Option<f64>,
}

impl ConvergenceTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record a candidate best. Ignored unless strictly shorter than the
    /// current best; an event at a non-increasing time overwrites the last one.
    pub fn record(&mut self, t: f64, len: i64, phase: Phase) -> bool {
        if let Some(last) = self.events.last_mut() {
            if len >= last.len {
                return false;
            }
            if t <= last.t {
                last.len = len;
                last.phase = phase;
                return true;
            }
        }
        self.events.push(TraceEvent { t, len, phase });
        self.t_end = self.t_end.max(t);
        true
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn best(&self) -> Option<i64> {
        self.events.last().map(|e| e.len)
    }

    /// Best length at time `t`, if any solution existed by then.
    pub fn best_at(&self, t: f64) -> Option<i64> {
        let idx = self.events.partition_point(|e| e.t <= t);
        idx.checked_sub(1).map(|i| self.events[i].len)
    }

    /// Append another trace's events (already on the same clock).
    pub fn extend(&mut self, other: &ConvergenceTrace) {
        for e in &other.events {
            self.record(e.t, e.len, e.phase);
        }
        self.t_end = self.t_end.max(other.t_end);
    }

    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("trace events serialize"));
            out.push('\n');
        }
        out
    }

    /// Build a trace from `(t, len)` pairs, enforcing the invariants.
    pub fn from_events(events: &[(f64, i64)], t_end: f64) -> Result<Self, TransitionError> {
        let mut trace = Self::new();
        for w in events.windows(2) {
            if !(w[1].0 > w[0].0 && w[1].1 < w[0].1) {
                return Err(TransitionError::InvalidArgument(
                    "events must have increasing times and decreasing lengths".into(),
                ));
            }
        }
        for &(t, len) in events {
            trace.record(t, len, Phase::Pbs);
        }
        trace.t_end = t_end.max(trace.t_end);
        Ok(trace)
    }
}

/// Sampling grid for [`gap_curve`]: `horizon / interval` samples at
/// `interval, 2·interval, …, horizon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapSampling {
    pub horizon: f64,
    pub interval: f64,
}

impl GapSampling {
    /// One sample per second.
    pub fn per_second(horizon: f64) -> Self {
        Self {
            horizon,
            interval: 1.0,
        }
    }

    pub fn samples(&self) -> usize {
        (self.horizon / self.interval + 1e-9).floor() as usize
    }
}

/// Multiplier applied to the first solution's gap for samples taken before
/// any solution existed.
pub const MISSING_SOLUTION_PENALTY: f64 = 10.0;

pub fn gap_curve(
    trace: &ConvergenceTrace,
    bks: i64,
    sampling: GapSampling,
) -> Result<Vec<f64>, TransitionError> {
    if bks <= 0 {
        return Err(TransitionError::InvalidArgument("reference length must be positive".into()));
    }
    if !(sampling.interval > 0.0) || sampling.samples() == 0 {
        return Err(TransitionError::InvalidArgument("horizon must cover at least one sample".into()));
    }
    let first = trace.events().first().ok_or(TransitionError::EmptyTrace)?;
    let gap = |len: i64| (len - bks) as f64 / bks as f64;
    let penalty = MISSING_SOLUTION_PENALTY * gap(first.len);
    Ok((1..=sampling.samples())
        .map(|k| {
            let t = k as f64 * sampling.interval;
            // Tolerate float noise in `k * interval` at event boundaries.
            trace.best_at(t + 1e-9).map_or(penalty, gap)
        })
        .collect())
}

pub fn gap_sum(curve: &[f64]) -> f64 {
    curve.iter().sum()
}

/// `t_trans = a·n + b`, clamped to `[clamp_min, clamp_fraction·t_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPolicy {
    pub slope: f64,
    pub intercept: f64,
    pub clamp_min: f64,
    pub clamp_fraction: f64,
}

// Fitted on uniform random instances (n = 200..2000, t_max = 30 s, one core).
impl Default for LinearPolicy {
    fn default() -> Self {
        Self {
            slope: 0.00053,
            intercept: 0.16,
            clamp_min: 1.0,
            clamp_fraction: 0.8,
        }
    }
}

impl LinearPolicy {
    pub fn new(slope: f64, intercept: f64) -> Self {
        Self {
            slope,
            intercept,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TransitionError> {
        if !self.slope.is_finite() || !self.intercept.is_finite() {
            return Err(TransitionError::InvalidPolicy("coefficients must be finite".into()));
        }
        if !(self.clamp_min >= 0.0) {
            return Err(TransitionError::InvalidPolicy("clamp_min must be non-negative".into()));
        }
        if !(self.clamp_fraction > 0.0 && self.clamp_fraction < 1.0) {
            return Err(TransitionError::InvalidPolicy("clamp_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Predicted transition time. When `clamp_min` exceeds the budget cap the
    /// cap wins, so the prediction never exceeds `clamp_fraction·t_max`.
    pub fn predict(&self, n: usize, t_max: f64) -> f64 {
        assert!(t_max > 0.0, "budget must be positive");
        let raw = self.slope * n as f64 + self.intercept;
        raw.max(self.clamp_min).min(self.clamp_fraction * t_max)
    }
}

impl fmt::Display for LinearPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "a={} b={} clamp_min={} clamp_fraction={}",
            self.slope, self.intercept, self.clamp_min, self.clamp_fraction
        )
    }
}

impl FromStr for LinearPolicy {
    type Err = TransitionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = LinearPolicy::default();
        let mut seen = [false; 4];
        for token in s.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| TransitionError::InvalidPolicy(format!("bad token `{token}`")))?;
            let value: f64 = value
                .parse()
                .map_err(|_| TransitionError::InvalidPolicy(format!("bad number in `{token}`")))?;
            let slot = match key {
                "a" => 0,
                "b" => 1,
                "clamp_min" => 2,
                "clamp_fraction" => 3,
                other => return Err(TransitionError::InvalidPolicy(format!("unknown key `{other}`"))),
            };
            seen[slot] = true;
            match slot {
                0 => p.slope = value,
                1 => p.intercept = value,
                2 => p.clamp_min = value,
                _ => p.clamp_fraction = value,
            }
        }
        if !seen[0] || !seen[1] {
            return Err(TransitionError::InvalidPolicy("policy needs both `a` and `b`".into()));
        }
        p.validate()?;
        Ok(p)
    }
}

/// Ordinary least squares for `t = a·n + b`.
pub fn fit_policy(samples: &[(usize, f64)]) -> Result<LinearPolicy, TransitionError> {
    if samples.len() < 2 {
        return Err(TransitionError::DegenerateSamples);
    }
    let m = samples.len() as f64;
    let mean_n = samples.iter().map(|s| s.0 as f64).sum::<f64>() / m;
    let mean_t = samples.iter().map(|s| s.1).sum::<f64>() / m;
    let sxx: f64 = samples.iter().map(|s| (s.0 as f64 - mean_n).powi(2)).sum();
    if sxx == 0.0 {
        return Err(TransitionError::DegenerateSamples);
    }
    let sxy: f64 = samples
        .iter()
        .map(|s| (s.0 as f64 - mean_n) * (s.1 - mean_t))
        .sum();
    let slope = sxy / sxx;
    Ok(LinearPolicy::new(slope, mean_t - slope * mean_n))
}

/// One instance entering policy-sample collection.
#[derive(Debug, Clone)]
pub struct PolicyInstance<I> {
    pub instance: I,
    pub n: usize,
    pub bks: Option<i64>,
}

/// For every instance, run the solver once per grid transition time and keep
/// the grid point with the smallest gap area (ties go to the smaller time).
///
/// `run(instance, t_trans)` returns the run's convergence trace. Gaps are
/// measured against the BKS when known, otherwise against the best length
/// seen on that instance across the whole grid. Instances whose runs fail
/// are logged and skipped.
pub fn collect_policy_samples<I, E, F>(
    instances: &[PolicyInstance<I>],
    grid: &[f64],
    budget: f64,
    sampling_interval: f64,
    mut run: F,
) -> Result<Vec<(usize, f64)>, TransitionError>
where
    E: fmt::Display,
    F: FnMut(&I, f64) -> Result<ConvergenceTrace, E>,
{
    if grid.is_empty() {
        return Err(TransitionError::InvalidArgument("empty transition-time grid".into()));
    }
    if let Some(bad) = grid.iter().find(|&&t| !(t >= 0.0 && t < budget)) {
        return Err(TransitionError::InvalidArgument(format!(
            "grid value {bad} is outside [0, {budget})"
        )));
    }
    let sampling = GapSampling {
        horizon: budget,
        interval: sampling_interval,
    };
    let mut samples = Vec::with_capacity(instances.len());
    'instances: for (idx, item) in instances.iter().enumerate() {
        let mut traces = Vec::with_capacity(grid.len());
        for &t in grid {
            match run(&item.instance, t) {
                Ok(trace) if !trace.is_empty() => traces.push(trace),
                Ok(_) => {
                    log::warn!("instance #{idx}: run at t_trans={t} produced no solution; skipping");
                    continue 'instances;
                }
                Err(e) => {
                    log::warn!("instance #{idx}: run at t_trans={t} failed: {e}; skipping");
                    continue 'instances;
                }
            }
        }
        let reference = item
            .bks
            .unwrap_or_else(|| traces.iter().filter_map(ConvergenceTrace::best).min().expect("non-empty traces"));
        let mut best: Option<(f64, f64)> = None;
        for (trace, &t) in traces.iter().zip(grid) {
            let area = gap_sum(&gap_curve(trace, reference, sampling)?);
            let better = match best {
                None => true,
                Some((a, bt)) => area < a || (area == a && t < bt),
            };
            if better {
                best = Some((area, t));
            }
        }
        samples.push((item.n, best.expect("non-empty grid").1));
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(events: &[(f64, i64)], t_end: f64) -> ConvergenceTrace {
        ConvergenceTrace::from_events(events, t_end).unwrap()
    }

    #[test]
    fn optimal_immediately() {
        let c = gap_curve(&trace(&[(1.0, 100)], 5.0), 100, GapSampling::per_second(5.0)).unwrap();
        assert_eq!(c, vec![0.0; 5]);
    }

    #[test]
    fn penalty_fill_before_first_solution() {
        let c = gap_curve(&trace(&[(3.0, 102)], 4.0), 100, GapSampling::per_second(4.0)).unwrap();
        let want = [0.2, 0.2, 0.02, 0.02];
        for (a, b) in c.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((gap_sum(&c) - 0.44).abs() < 1e-12);
    }

    #[test]
    fn piecewise_constant_steps() {
        let tr = trace(&[(0.5, 120), (2.5, 110), (2.7, 105)], 6.0);
        let c = gap_curve(&tr, 100, GapSampling::per_second(6.0)).unwrap();
        // Direct step-function evaluation at t = 1..6.
        let step = |t: f64| {
            if t >= 2.7 {
                0.05
            } else if t >= 2.5 {
                0.1
            } else {
                0.2
            }
        };
        for (k, g) in c.iter().enumerate() {
            assert!((g - step(k as f64 + 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_trace_is_an_error() {
        assert_eq!(
            gap_curve(&ConvergenceTrace::new(), 10, GapSampling::per_second(3.0)),
            Err(TransitionError::EmptyTrace)
        );
    }

    #[test]
    fn gap_sum_identities() {
        assert!((gap_sum(&[0.01; 100]) - 1.0).abs() < 1e-12);
        assert_eq!(gap_sum(&[0.0; 7]), 0.0);
    }

    #[test]
    fn sub_second_sampling() {
        let s = GapSampling {
            horizon: 2.0,
            interval: 0.1,
        };
        assert_eq!(s.samples(), 20);
        let c = gap_curve(&trace(&[(0.3, 110)], 2.0), 100, s).unwrap();
        assert_eq!(c.len(), 20);
        assert!((c[0] - 1.0).abs() < 1e-12 && (c[1] - 1.0).abs() < 1e-12);
        assert!((c[2] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn record_keeps_invariants() {
        let mut t = ConvergenceTrace::new();
        assert!(t.record(0.1, 50, Phase::Ls));
        assert!(!t.record(0.2, 50, Phase::Ls));
        assert!(t.record(0.1, 40, Phase::Ls));
        assert_eq!(t.events().len(), 1);
        assert!(t.record(0.3, 30, Phase::Pbs));
        assert_eq!(t.best(), Some(30));
        assert_eq!(t.best_at(0.05), None);
        assert_eq!(t.best_at(0.2), Some(40));
    }

    #[test]
    fn json_lines_format() {
        let mut t = ConvergenceTrace::new();
        t.record(0.5, 12, Phase::Ls);
        t.record(1.25, 11, Phase::Pbs);
        assert_eq!(
            t.to_json_lines(),
            "{\"t\":0.5,\"len\":12,\"phase\":\"ls\"}\n{\"t\":1.25,\"len\":11,\"phase\":\"pbs\"}\n"
        );
    }

    #[test]
    fn two_point_fit_is_exact() {
        let p = fit_policy(&[(100, 10.0), (200, 20.0)]).unwrap();
        assert_eq!(p.slope, 0.1);
        assert_eq!(p.intercept, 0.0);
    }

    #[test]
    fn fit_on_a_line() {
        let pts: Vec<(usize, f64)> = [3000, 7000, 12000, 20000, 30000]
            .iter()
            .map(|&n| (n, 0.0125 * n as f64 + 40.0))
            .collect();
        let p = fit_policy(&pts).unwrap();
        for &(n, t) in &pts {
            assert!((p.slope * n as f64 + p.intercept - t).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_samples() {
        assert_eq!(fit_policy(&[(100, 1.0), (100, 2.0)]), Err(TransitionError::DegenerateSamples));
        assert_eq!(fit_policy(&[(100, 1.0)]), Err(TransitionError::DegenerateSamples));
    }

    #[test]
    fn prediction_clamps() {
        let p = LinearPolicy::new(0.01, 2.0);
        assert_eq!(p.predict(1000, 100.0), 12.0);
        assert_eq!(LinearPolicy::new(-1.0, 0.0).predict(1000, 100.0), 1.0);
        assert_eq!(p.predict(100_000, 100.0), 80.0);
    }

    #[test]
    fn policy_text_round_trip() {
        let p = LinearPolicy {
            slope: 0.0123,
            intercept: -4.5,
            clamp_min: 2.0,
            clamp_fraction: 0.75,
        };
        assert_eq!(p.to_string().parse::<LinearPolicy>().unwrap(), p);
        assert!("a=1".parse::<LinearPolicy>().is_err());
        assert!("a=1 b=2 clamp_fraction=1.5".parse::<LinearPolicy>().is_err());
        assert!("a=1 b=2 zeta=3".parse::<LinearPolicy>().is_err());
    }

    #[test]
    fn single_grid_value_is_always_chosen() {
        let insts: Vec<PolicyInstance<usize>> =
            (0..3).map(|i| PolicyInstance { instance: i, n: 100 * (i + 1), bks: None }).collect();
        let samples = collect_policy_samples(&insts, &[4.0], 10.0, 1.0, |_, _| {
            Ok::<_, String>(trace(&[(0.5, 1000)], 10.0))
        })
        .unwrap();
        assert_eq!(samples, vec![(100, 4.0), (200, 4.0), (300, 4.0)]);
    }

    #[test]
    fn failing_instances_are_skipped() {
        let insts: Vec<PolicyInstance<usize>> =
            (0..3).map(|i| PolicyInstance { instance: i, n: 10 * (i + 1), bks: Some(90) }).collect();
        let samples = collect_policy_samples(&insts, &[1.0, 2.0], 5.0, 1.0, |&i, _| {
            if i == 1 {
                Err("boom".to_string())
            } else {
                Ok(trace(&[(0.5, 100)], 5.0))
            }
        })
        .unwrap();
        assert_eq!(samples, vec![(10, 1.0), (30, 1.0)]);
    }

    #[test]
    fn grid_must_fit_in_budget() {
        let insts = vec![PolicyInstance { instance: (), n: 10, bks: None }];
        let r = collect_policy_samples(&insts, &[5.0], 5.0, 1.0, |_, _| Ok::<_, String>(ConvergenceTrace::new()));
        assert!(matches!(r, Err(TransitionError::InvalidArgument(_))));
    }
}
