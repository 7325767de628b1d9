use crate::error::Result;
use crate::problems::Problem;
use crate::space::Point;

/// Step-local quantities of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Iteration index `n` that produced `next = x_{n+1}`.
    pub n: usize,
    /// Point at which the forward step is taken (`s_n` for inertial methods,
    /// `x_n` otherwise).
    pub anchor: Point,
    /// `y_n = P_C(anchor - gamma_n A(anchor))`.
    pub projected: Point,
    /// `z_n`, for methods that form a correction point.
    pub corrected: Option<Point>,
    pub next: Point,
    pub delta: f64,
    pub gamma: f64,
    pub gamma_next: f64,
    /// Natural residual `||anchor - P_C(anchor - gamma_n A(anchor))||`.
    pub residual: f64,
    /// Armijo reductions taken (0 for methods without a line search).
    pub backtracks: u32,
}

/// One row of an iteration trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub n: usize,
    /// `||x_{n+1} - x_n||`, the quantity tested by the stopping rule.
    pub d_n: f64,
    pub e_n: f64,
    pub gamma: f64,
    pub delta: f64,
    /// `||x_{n+1} - x*||` when the solution is known.
    pub error: Option<f64>,
    /// Cumulative operator evaluations since the solve started.
    pub op_evals: u64,
    pub elapsed_ns: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<TraceRecord>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }
}

/// `(D_n, E_n)` with `D_n = ||x_n - x_prev||` and
/// `E_n = ||s_n - P_C(s_n - gamma_n A(s_n))||`.
///
/// The operator is evaluated without touching the problem's counter, so
/// diagnostics never distort cost accounting.
pub fn residuals(
    problem: &Problem,
    s_n: &Point,
    gamma_n: f64,
    x_n: &Point,
    x_prev: &Point,
) -> Result<(f64, f64)> {
    let space = problem.space();
    let d = space.distance(x_n, x_prev)?;
    let a = problem.evaluate_uncounted(s_n)?;
    let y = problem
        .set()
        .project(&Point::axpy_unchecked(s_n, -gamma_n, &a))?;
    Ok((d, space.distance_unchecked(s_n, &y)))
}
