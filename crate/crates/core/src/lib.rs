//! Simulation of hybrid inclusions and extremum-seeking feedback.
//!
//! [`hybrid`] integrates systems `H = {C, F, D, G}` on hybrid time domains,
//! [`closeness`] measures graphical distance between the resulting arcs, and
//! [`es`], [`supervisors`] and [`set_valued`] supply the controller pieces
//! that [`scenarios`] wires into ready-made closed loops.

pub mod hybrid;
pub mod closeness;
pub mod set_valued;
pub mod es;
pub mod supervisors;
pub mod scenarios;

pub use hybrid::{
    empirical_average, inflate, sample_at, simulate, HybridArc, HybridError, HybridSystem,
    HybridTimeDomain, JumpPolicy, Solution, SolverConfig, Termination,
};
