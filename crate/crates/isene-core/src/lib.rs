//! Numerical workbench for chains of Andreev spin qubits coupled by linear
//! inductors: classical circuit equilibria, effective Ising and dispersive
//! models, EDSR-driven spin dynamics, optimal-control pulses and the bit-flip
//! detect-and-correct cycle.

pub mod circuit;
pub mod dynamics;
pub mod extract;
pub mod pulse;
pub mod qec;
pub mod resonator;
pub mod solver;
pub mod units;
pub mod walsh;

pub use circuit::{ChainCircuit, JunctionParams, JunctionSign, NodePhases, SpinConfig};
pub use extract::{ExtractOptions, ReadoutSpec};
pub use resonator::TransmissionLine;
pub use solver::{solve_all_configs, solve_equilibrium, EquilibriumSolution, SolveMode, SolverOptions};
