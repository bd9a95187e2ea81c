//! Cascaded neural-guided TSP solver: a candidate-guided local-search phase
//! followed by an edge-assembly-crossover population phase, with a learned
//! size-to-transition-time policy.

pub mod budget;
pub mod cascade;
pub mod eax;
pub mod graph;
pub mod guidance;
pub mod instance;
pub mod ls;
pub mod transition;
