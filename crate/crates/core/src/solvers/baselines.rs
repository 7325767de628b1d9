//! Comparator methods: projected gradient, projected reflected gradient,
//! extragradient, Tseng, subgradient extragradient, Mann-type Tseng with an
//! Armijo search, and the viscosity inertial subgradient extragradient method.

use crate::error::{Error, Result};
use crate::problems::Problem;
use crate::sets::project_half_space;
use crate::space::Point;

use super::config::SolverConfig;
use super::trace::StepRecord;
use super::tseng::{ensure_finite, inertia_coefficient, step_size_update, viscosity, SolverState};
use super::AlgorithmKind;

/// Armijo trials allowed before the line search gives up.
pub const MAX_ARMIJO_REDUCTIONS: u32 = 60;

/// One iteration of a baseline method.
///
/// Fixed-step methods read their step from `state.gamma`.
pub fn baseline_step(
    kind: AlgorithmKind,
    state: &SolverState,
    problem: &Problem,
    config: &SolverConfig,
) -> Result<(SolverState, StepRecord)> {
    let space = problem.space();
    let n = state.n;
    let x = &state.x_cur;
    let gamma = state.gamma;

    let mut backtracks = 0;
    let mut delta_n = 0.0;
    let mut gamma_next = gamma;
    let mut corrected = None;

    let (anchor, projected, next, residual) = match kind {
        AlgorithmKind::Pgm => {
            let ax = problem.evaluate(x)?;
            let y = problem.project(&Point::axpy_unchecked(x, -gamma, &ax))?;
            ensure_finite(n, &[&ax, &y], &[])?;
            let r = space.distance_unchecked(x, &y);
            (x.clone(), y.clone(), y, r)
        }
        AlgorithmKind::Prgm => {
            let reflected = Point::combine_unchecked(2.0, x, -1.0, &state.x_prev);
            let aw = problem.evaluate(&reflected)?;
            let next = problem.project(&Point::axpy_unchecked(x, -gamma, &aw))?;
            ensure_finite(n, &[&aw, &next], &[])?;
            // Residual at x_n is a diagnostic; keep it off the counters.
            let ax = problem.evaluate_uncounted(x)?;
            let y = problem
                .set()
                .project(&Point::axpy_unchecked(x, -gamma, &ax))?;
            let r = space.distance_unchecked(x, &y);
            (x.clone(), y, next, r)
        }
        AlgorithmKind::Egm => {
            let ax = problem.evaluate(x)?;
            let y = problem.project(&Point::axpy_unchecked(x, -gamma, &ax))?;
            let ay = problem.evaluate(&y)?;
            let next = problem.project(&Point::axpy_unchecked(x, -gamma, &ay))?;
            ensure_finite(n, &[&ax, &y, &ay, &next], &[])?;
            let r = space.distance_unchecked(x, &y);
            (x.clone(), y, next, r)
        }
        AlgorithmKind::Tegm => {
            let ax = problem.evaluate(x)?;
            let y = problem.project(&Point::axpy_unchecked(x, -gamma, &ax))?;
            let ay = problem.evaluate(&y)?;
            let next = Point::axpy_unchecked(&y, -gamma, &Point::sub_unchecked(&ay, &ax));
            ensure_finite(n, &[&ax, &y, &ay, &next], &[])?;
            let r = space.distance_unchecked(x, &y);
            (x.clone(), y, next, r)
        }
        AlgorithmKind::Segm => {
            let ax = problem.evaluate(x)?;
            let forward = Point::axpy_unchecked(x, -gamma, &ax);
            let y = problem.project(&forward)?;
            let ay = problem.evaluate(&y)?;
            let next = project_onto_cut(
                problem,
                &forward,
                &y,
                &Point::axpy_unchecked(x, -gamma, &ay),
            );
            ensure_finite(n, &[&ax, &y, &ay, &next], &[])?;
            let r = space.distance_unchecked(x, &y);
            (x.clone(), y, next, r)
        }
        AlgorithmKind::MannTseng => {
            let armijo = config.armijo;
            let ax = problem.evaluate(x)?;
            let mut step = armijo.alpha;
            let (y, ay) = loop {
                let y = problem.project(&Point::axpy_unchecked(x, -step, &ax))?;
                let ay = problem.evaluate(&y)?;
                ensure_finite(n, &[&ax, &y, &ay], &[step])?;
                let lhs = step * space.distance_unchecked(&ax, &ay);
                let rhs = armijo.phi * space.distance_unchecked(x, &y);
                if lhs <= rhs {
                    break (y, ay);
                }
                if backtracks == MAX_ARMIJO_REDUCTIONS {
                    return Err(Error::LineSearch {
                        iteration: n,
                        trials: backtracks,
                    });
                }
                backtracks += 1;
                step *= armijo.ell;
            };
            let z = Point::axpy_unchecked(&y, -step, &Point::sub_unchecked(&ay, &ax));
            let w = config.viscosity.at(n);
            let tau = armijo.tau_factor * (1.0 - w);
            let next = Point::combine_unchecked(1.0 - w - tau, x, tau, &z);
            ensure_finite(n, &[&z, &next], &[])?;
            let r = space.distance_unchecked(x, &y);
            gamma_next = step;
            corrected = Some(z);
            (x.clone(), y, next, r)
        }
        AlgorithmKind::ViscosityInertialSegm => {
            delta_n = inertia_coefficient(
                space,
                x,
                &state.x_prev,
                config.eps_schedule.at(n),
                config.delta,
            )?;
            let s = Point::combine_unchecked(1.0 + delta_n, x, -delta_n, &state.x_prev);
            let a_s = problem.evaluate(&s)?;
            let forward = Point::axpy_unchecked(&s, -gamma, &a_s);
            let y = problem.project(&forward)?;
            let a_y = problem.evaluate(&y)?;
            let z = project_onto_cut(
                problem,
                &forward,
                &y,
                &Point::axpy_unchecked(&s, -gamma, &a_y),
            );
            let next = viscosity(config, n, &z);
            ensure_finite(n, &[&s, &a_s, &y, &a_y, &z, &next], &[])?;
            gamma_next = step_size_update(space, gamma, config.phi, &s, &y, &a_s, &a_y)?;
            let r = space.distance_unchecked(&s, &y);
            corrected = Some(z);
            (s, y, next, r)
        }
        AlgorithmKind::TsengInertial | AlgorithmKind::TsengViscosity => {
            return Err(Error::InvalidArgument(format!(
                "{} is not a baseline method",
                kind.name()
            )))
        }
    };

    let record = StepRecord {
        n,
        anchor,
        projected,
        corrected,
        next: next.clone(),
        delta: delta_n,
        gamma,
        gamma_next,
        residual,
        backtracks,
    };
    let state = SolverState {
        n: n + 1,
        x_prev: x.clone(),
        x_cur: next,
        gamma: gamma_next,
    };
    Ok((state, record))
}

/// Projection of `target` onto `T = {v : <forward - y, v - y> <= 0}`, the
/// half-space supporting C at `y = P_C(forward)`. When `forward = y` the cut
/// is the whole space.
fn project_onto_cut(problem: &Problem, forward: &Point, y: &Point, target: &Point) -> Point {
    let space = problem.space();
    let normal = Point::sub_unchecked(forward, y);
    if normal.iter().all(|v| *v == 0.0) {
        return target.clone();
    }
    let offset = space.inner_unchecked(&normal, y);
    project_half_space(space, &normal, offset, target)
}
