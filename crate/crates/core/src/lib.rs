//! Variational inequalities over weighted Hilbert spaces.
//!
//! Find `x* in C` with `<A x*, x - x*> >= 0` for every `x in C`, where `A`
//! is pseudomonotone and Lipschitz and `C` is a closed convex set with a
//! closed-form projection. The main method is a self-adaptive inertial
//! viscosity Tseng extragradient scheme; several classical projection
//! methods are provided for comparison.
//!
//! ```
//! use vi_core::{generate_example2, solve, AlgorithmKind, Point, SolverConfig};
//!
//! let problem = generate_example2(5, 1).unwrap();
//! let x0 = Point::constant(5, 1.0);
//! let out = solve(&problem, &SolverConfig::benchmark_defaults(), AlgorithmKind::TsengInertial, &x0, &x0).unwrap();
//! assert!(out.trace.len() > 0);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod error;
pub mod problems;
pub mod rng;
pub mod sets;
pub mod solvers;
pub mod space;

pub use control::{
    build_vi_problem, example41_optimal_control, example41_problem, example42_optimal_control,
    example42_problem, switching_times, write_trajectory_csv, ControlProblem, ControlTrajectory,
    TerminalCost,
};
pub use error::{Error, Result};
pub use problems::{
    example1_problem, example3_problem, generate_example2, minty_certificate, AffineOperator,
    Example3Start, Operator, Problem, SoftSphereParams,
};
pub use rng::SeededRng;
pub use sets::{FeasibleSet, SetKind};
pub use solvers::{
    solve, solve_with_observer, AlgorithmKind, ArmijoParams, Contraction, IterationTrace, Schedule,
    SolveOutcome, SolverConfig, StopReason, TraceRecord,
};
pub use space::{HilbertSpace, Point};
