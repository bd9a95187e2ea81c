//! Search deadlines: wall clock or a deterministic work-unit budget.

use std::cell::Cell;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Limit {
    /// Stop once this much wall time has elapsed since the budget was armed.
    Time(Duration),
    /// Stop once this many work units have been spent. One unit is roughly
    /// one candidate-move evaluation; a crossover offspring costs `n` units.
    Work(u64),
}

/// A deadline shared by a search phase. Work counting uses interior
/// mutability so searches can spend units through a shared reference.
#[derive(Debug)]
pub struct Budget {
    limit: Limit,
    start: Instant,
    clock_origin: Instant,
    used: Cell<u64>,
}

impl Budget {
    pub fn new(limit: Limit) -> Self {
        let now = Instant::now();
        Self::with_origin(limit, now)
    }

    /// Times reported by [`Budget::elapsed`] are measured from `origin`,
    /// while a time limit counts from now.
    pub fn with_origin(limit: Limit, origin: Instant) -> Self {
        Self {
            limit,
            start: Instant::now(),
            clock_origin: origin,
            used: Cell::new(0),
        }
    }

    pub fn time(secs: f64) -> Self {
        Self::new(Limit::Time(Duration::from_secs_f64(secs.max(0.0))))
    }

    pub fn work(units: u64) -> Self {
        Self::new(Limit::Work(units))
    }

    pub fn limit(&self) -> Limit {
        self.limit
    }

    #[inline]
    pub fn spend(&self, units: u64) {
        self.used.set(self.used.get().saturating_add(units));
    }

    pub fn used(&self) -> u64 {
        self.used.get()
    }

    pub fn exhausted(&self) -> bool {
        match self.limit {
            Limit::Time(d) => self.start.elapsed() >= d,
            Limit::Work(units) => self.used.get() >= units,
        }
    }

    /// Seconds since the clock origin.
    pub fn elapsed(&self) -> f64 {
        self.clock_origin.elapsed().as_secs_f64()
    }

    pub fn is_work_based(&self) -> bool {
        matches!(self.limit, Limit::Work(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn work_budget_counts_units() {
        let b = Budget::work(10);
        assert!(!b.exhausted());
        b.spend(9);
        assert!(!b.exhausted());
        b.spend(1);
        assert!(b.exhausted());
    }

    #[test]
    fn zero_time_is_exhausted() {
        assert!(Budget::time(0.0).exhausted());
        assert!(!Budget::time(60.0).exhausted());
    }
}
