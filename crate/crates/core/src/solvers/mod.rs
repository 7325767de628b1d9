//! Iterative solvers for VI(C, A).
//!
//! [`solve`] drives any [`AlgorithmKind`] from a pair of starting points
//! until the step length falls below the tolerance or the iteration budget
//! runs out.
//!
//! The residual reported as `E_n` is the natural residual
//! `||s_n - P_C(s_n - gamma_n A(s_n))||`. Its literal printed form in the
//! original experiments omits the operator, which would make it independent
//! of the problem; the form with `A` is the one that vanishes exactly at
//! solutions.

mod baselines;
mod config;
mod trace;
mod tseng;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

pub use baselines::{baseline_step, MAX_ARMIJO_REDUCTIONS};
pub use config::{ArmijoParams, Contraction, Schedule, SolverConfig};
pub use trace::{residuals, IterationTrace, StepRecord, TraceRecord};
pub use tseng::{inertia_coefficient, step_size_update, tseng_inertial_step, SolverState};

use crate::error::{Error, Result};
use crate::problems::Problem;
use crate::space::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlgorithmKind {
    /// Self-adaptive inertial viscosity Tseng extragradient method.
    TsengInertial,
    /// The same method with inertia switched off.
    TsengViscosity,
    /// Projected gradient.
    Pgm,
    /// Projected reflected gradient.
    Prgm,
    /// Korpelevich extragradient.
    Egm,
    /// Tseng forward-backward-forward.
    Tegm,
    /// Subgradient extragradient.
    Segm,
    /// Mann-type Tseng method with an Armijo step search.
    MannTseng,
    /// Viscosity inertial subgradient extragradient.
    ViscosityInertialSegm,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 9] = [
        Self::TsengInertial,
        Self::TsengViscosity,
        Self::Pgm,
        Self::Prgm,
        Self::Egm,
        Self::Tegm,
        Self::Segm,
        Self::MannTseng,
        Self::ViscosityInertialSegm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::TsengInertial => "tseng_inertial",
            Self::TsengViscosity => "tseng_viscosity",
            Self::Pgm => "pgm",
            Self::Prgm => "prgm",
            Self::Egm => "egm",
            Self::Tegm => "tegm",
            Self::Segm => "segm",
            Self::MannTseng => "mategm",
            Self::ViscosityInertialSegm => "visegm",
        }
    }

    /// Methods that need a fixed step supplied up front.
    pub fn uses_fixed_step(self) -> bool {
        matches!(
            self,
            Self::Pgm | Self::Prgm | Self::Egm | Self::Tegm | Self::Segm
        )
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s.trim().to_ascii_lowercase().as_str() {
            "tseng_inertial" | "alg1" => Self::TsengInertial,
            "tseng_viscosity" => Self::TsengViscosity,
            "pgm" => Self::Pgm,
            "prgm" => Self::Prgm,
            "egm" => Self::Egm,
            "tegm" => Self::Tegm,
            "segm" => Self::Segm,
            "mategm" | "matsegm" => Self::MannTseng,
            "visegm" => Self::ViscosityInertialSegm,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown algorithm '{other}'"
                )))
            }
        };
        Ok(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Tolerance,
    MaxIters,
    /// A non-finite value appeared while computing the given iteration.
    Divergence {
        iteration: usize,
    },
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Tolerance => f.write_str("tolerance"),
            Self::MaxIters => f.write_str("max_iters"),
            Self::Divergence { .. } => f.write_str("divergence"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    /// Last finite iterate.
    pub solution: Point,
    pub trace: IterationTrace,
    pub stop: StopReason,
    pub iterations: usize,
    /// Operator evaluations charged to this solve.
    pub op_evals: u64,
    pub last_residual: Option<f64>,
}

/// Step size the fixed-step baselines start from.
pub fn initial_step(kind: AlgorithmKind, problem: &Problem, config: &SolverConfig) -> Result<f64> {
    if !kind.uses_fixed_step() {
        return Ok(match kind {
            AlgorithmKind::MannTseng => config.armijo.alpha,
            _ => config.gamma1,
        });
    }
    match (config.fixed_step, problem.lipschitz()) {
        (Some(step), _) => Ok(step),
        (None, Some(l)) if l > 0.0 => Ok(0.4 / l),
        _ => Err(Error::Config(format!(
            "{kind} needs a fixed step and '{}' has no Lipschitz bound",
            problem.name()
        ))),
    }
}

/// One iteration of any method.
pub fn step(
    kind: AlgorithmKind,
    state: &SolverState,
    problem: &Problem,
    config: &SolverConfig,
) -> Result<(SolverState, StepRecord)> {
    match kind {
        AlgorithmKind::TsengInertial => tseng_inertial_step(state, problem, config),
        AlgorithmKind::TsengViscosity => {
            let mut plain = config.clone();
            plain.delta = 0.0;
            tseng_inertial_step(state, problem, &plain)
        }
        _ => baseline_step(kind, state, problem, config),
    }
}

pub fn solve(
    problem: &Problem,
    config: &SolverConfig,
    algorithm: AlgorithmKind,
    x0: &Point,
    x1: &Point,
) -> Result<SolveOutcome> {
    solve_with_observer(problem, config, algorithm, x0, x1, |_| {})
}

/// [`solve`], calling `observe` with every step record.
///
/// Starting points are projected onto C first. A non-finite iterate ends the
/// run with [`StopReason::Divergence`] and the last finite iterate; other
/// failures are returned as errors.
pub fn solve_with_observer(
    problem: &Problem,
    config: &SolverConfig,
    algorithm: AlgorithmKind,
    x0: &Point,
    x1: &Point,
    mut observe: impl FnMut(&StepRecord),
) -> Result<SolveOutcome> {
    config.validate()?;
    let space = problem.space();
    space.check(x0)?;
    space.check(x1)?;

    let start_evals = problem.eval_count();
    let started = Instant::now();
    let x0 = problem.project(x0)?;
    let x1 = problem.project(x1)?;
    let mut state = SolverState::new(x0, x1, initial_step(algorithm, problem, config)?);
    let mut trace = IterationTrace::default();
    let mut last_residual = None;

    let finish = |state: SolverState, trace, stop, iterations, last_residual| SolveOutcome {
        solution: state.x_cur,
        trace,
        stop,
        iterations,
        op_evals: problem.eval_count() - start_evals,
        last_residual,
    };

    let mut iterations = 0;
    while iterations < config.max_iters {
        let (next, record) = match step(algorithm, &state, problem, config) {
            Ok(out) => out,
            Err(Error::Divergence { iteration }) => {
                return Ok(finish(
                    state,
                    trace,
                    StopReason::Divergence { iteration },
                    iterations,
                    last_residual,
                ));
            }
            Err(e) => return Err(e),
        };
        iterations += 1;
        observe(&record);

        let d_n = space.distance_unchecked(&next.x_cur, &state.x_cur);
        last_residual = Some(record.residual);
        if config.record_trace {
            trace.records.push(TraceRecord {
                n: record.n,
                d_n,
                e_n: record.residual,
                gamma: record.gamma,
                delta: record.delta,
                error: problem.error(&next.x_cur),
                op_evals: problem.eval_count() - start_evals,
                elapsed_ns: if config.timing {
                    started.elapsed().as_nanos() as u64
                } else {
                    0
                },
            });
        }
        state = next;
        if d_n <= config.stop_tol {
            return Ok(finish(
                state,
                trace,
                StopReason::Tolerance,
                iterations,
                last_residual,
            ));
        }
    }
    Ok(finish(
        state,
        trace,
        StopReason::MaxIters,
        iterations,
        last_residual,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{example1_problem, example3_problem, generate_example2, Example3Start};
    use crate::rng::SeededRng;

    #[test]
    fn names_round_trip() {
        for kind in AlgorithmKind::ALL {
            assert_eq!(kind.name().parse::<AlgorithmKind>().unwrap(), kind);
        }
        assert_eq!(
            "matsegm".parse::<AlgorithmKind>().unwrap(),
            AlgorithmKind::MannTseng
        );
        assert!("nope".parse::<AlgorithmKind>().is_err());
    }

    #[test]
    fn zero_budget_returns_start() {
        let p = generate_example2(3, 1).unwrap();
        let mut config = SolverConfig::benchmark_defaults();
        config.max_iters = 0;
        let x1 = Point::new(vec![0.1, 0.2, 0.3]);
        let out = solve(&p, &config, AlgorithmKind::TsengInertial, &x1, &x1).unwrap();
        assert_eq!(out.solution, x1);
        assert_eq!(out.stop, StopReason::MaxIters);
        assert!(out.trace.is_empty());
    }

    #[test]
    fn example2_converges() {
        let p = generate_example2(5, 1).unwrap();
        let mut rng = SeededRng::new(1);
        let x1 = Point::new(rng.uniform_vec(5, 0.0, 1.0));
        let out = solve(
            &p,
            &SolverConfig::benchmark_defaults(),
            AlgorithmKind::TsengInertial,
            &x1,
            &x1,
        )
        .unwrap();
        let err = out.trace.last().unwrap().error.unwrap();
        assert!(err < 1e-3, "final error {err}");
    }

    #[test]
    fn example3_converges_from_t_squared() {
        let p = example3_problem(200).unwrap();
        let x1 = p.space().point_from_fn(|t| Example3Start::Square.eval(t));
        let mut config = SolverConfig::benchmark_defaults();
        config.max_iters = 200;
        let out = solve(&p, &config, AlgorithmKind::TsengInertial, &x1, &x1).unwrap();
        assert!(p.space().norm(&out.solution).unwrap() <= 1e-2);
    }

    #[test]
    fn all_methods_run_on_example2() {
        let p = generate_example2(5, 3).unwrap();
        let x1 = Point::constant(5, 0.5);
        let mut config = SolverConfig::benchmark_defaults();
        config.max_iters = 300;
        for kind in AlgorithmKind::ALL {
            let fork = p.fork();
            let out = solve(&fork, &config, kind, &x1, &x1).unwrap();
            assert!(out.solution.is_finite(), "{kind}");
            let first = out.trace.records[0].error.unwrap();
            let last = out.trace.last().unwrap().error.unwrap();
            assert!(last < first, "{kind}: {first} -> {last}");
            let evals: Vec<u64> = out.trace.records.iter().map(|r| r.op_evals).collect();
            assert!(evals.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn fixed_step_needs_lipschitz() {
        let p = example1_problem(3).unwrap();
        let x = Point::constant(3, 0.5);
        let err = solve(&p, &SolverConfig::default(), AlgorithmKind::Egm, &x, &x).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let config = SolverConfig {
            fixed_step: Some(0.5),
            max_iters: 20,
            ..Default::default()
        };
        assert!(solve(&p, &config, AlgorithmKind::Egm, &x, &x).is_ok());
    }

    #[test]
    fn residual_helper_matches_step_record() {
        let p = generate_example2(4, 7).unwrap();
        let x = Point::constant(4, 0.7);
        let mut recs = Vec::new();
        let mut config = SolverConfig::benchmark_defaults();
        config.max_iters = 5;
        solve_with_observer(&p, &config, AlgorithmKind::TsengInertial, &x, &x, |r| {
            recs.push(r.clone())
        })
        .unwrap();
        for r in &recs {
            let (d, e) = residuals(&p, &r.anchor, r.gamma, &r.next, &r.next).unwrap();
            assert_eq!(d, 0.0);
            assert!((e - r.residual).abs() <= 1e-12);
        }
        let zero = Point::zeros(4);
        let (_, e) = residuals(&p, &zero, 1.0, &zero, &zero).unwrap();
        assert_eq!(e, 0.0);
    }
}
