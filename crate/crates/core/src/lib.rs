//! Symbolic reachability and parameter synthesis for timed automata whose
//! clocks may be reset to parameters.
//!
//! The symbolic engine works on *parametric difference bound matrices* over
//! the fractional parts of parameters. Parameter valuations are grouped into
//! finitely many regions within which the engine's decisions cannot change,
//! so reachability is decided once per region.

pub mod automaton;
pub mod concrete;
pub mod frontend;
pub mod param_region;
pub mod pdbm;
pub mod plt;
pub mod region_automaton;
pub mod synthesis;

mod fm;

pub use num_rational::Ratio;

/// Exact rational numbers used throughout.
pub type Q = Ratio<i64>;
