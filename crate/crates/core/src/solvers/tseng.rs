//! Self-adaptive inertial viscosity Tseng extragradient step.
//!
//! One iteration from `(x_{n-1}, x_n, gamma_n)`:
//!
//! ```text
//! s_n     = x_n + delta_n (x_n - x_{n-1})
//! y_n     = P_C(s_n - gamma_n A s_n)
//! z_n     = y_n - gamma_n (A y_n - A s_n)
//! x_{n+1} = phi_n f(z_n) + (1 - phi_n) z_n
//! ```
//!
//! with `delta_n` from [`inertia_coefficient`] and `gamma_{n+1}` from
//! [`step_size_update`]. Each call costs exactly two operator evaluations and
//! one projection onto C.

use crate::error::{Error, Result};
use crate::problems::Problem;
use crate::space::{HilbertSpace, Point};

use super::config::SolverConfig;
use super::trace::StepRecord;

/// Iterate pair and current step of a running solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub n: usize,
    pub x_prev: Point,
    pub x_cur: Point,
    pub gamma: f64,
}

impl SolverState {
    pub fn new(x_prev: Point, x_cur: Point, gamma: f64) -> Self {
        Self {
            n: 1,
            x_prev,
            x_cur,
            gamma,
        }
    }
}

/// Inertia weight `delta_n`.
///
/// `min(eps_n / ||x_n - x_prev||, delta)` when the iterates differ, `delta`
/// otherwise. The product `delta_n ||x_n - x_prev||` never exceeds `eps_n`,
/// including after rounding.
pub fn inertia_coefficient(
    space: &HilbertSpace,
    x_n: &Point,
    x_prev: &Point,
    eps_n: f64,
    delta: f64,
) -> Result<f64> {
    space.check(x_n)?;
    space.check(x_prev)?;
    if x_n == x_prev {
        return Ok(delta);
    }
    let d = space.distance_unchecked(x_n, x_prev);
    let mut coeff = (eps_n / d).min(delta);
    while coeff > 0.0 && coeff * d > eps_n {
        coeff = coeff.next_down();
    }
    Ok(coeff)
}

/// Next step size `gamma_{n+1}`.
///
/// `min(phi ||s - y|| / ||A s - A y||, gamma_n)` unless `A s = A y` exactly
/// (componentwise), in which case `gamma_n` is kept.
pub fn step_size_update(
    space: &HilbertSpace,
    gamma_n: f64,
    phi: f64,
    s: &Point,
    y: &Point,
    a_s: &Point,
    a_y: &Point,
) -> Result<f64> {
    for p in [s, y, a_s, a_y] {
        space.check(p)?;
    }
    if a_s == a_y {
        return Ok(gamma_n);
    }
    let num = phi * space.distance_unchecked(s, y);
    let den = space.distance_unchecked(a_s, a_y);
    Ok((num / den).min(gamma_n))
}

pub(crate) fn ensure_finite(n: usize, points: &[&Point], scalars: &[f64]) -> Result<()> {
    if points.iter().all(|p| p.is_finite()) && scalars.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { iteration: n })
    }
}

/// Viscosity step `phi_n f(z) + (1 - phi_n) z`.
pub(crate) fn viscosity(config: &SolverConfig, n: usize, z: &Point) -> Point {
    let w = config.viscosity.at(n);
    Point::combine_unchecked(w, &config.contraction.apply(z), 1.0 - w, z)
}

/// One iteration of the inertial viscosity Tseng method.
///
/// With `config.delta = 0` this is the non-inertial viscosity variant.
pub fn tseng_inertial_step(
    state: &SolverState,
    problem: &Problem,
    config: &SolverConfig,
) -> Result<(SolverState, StepRecord)> {
    let space = problem.space();
    let n = state.n;
    let gamma = state.gamma;

    let delta_n = inertia_coefficient(
        space,
        &state.x_cur,
        &state.x_prev,
        config.eps_schedule.at(n),
        config.delta,
    )?;
    let s = Point::combine_unchecked(1.0 + delta_n, &state.x_cur, -delta_n, &state.x_prev);
    let a_s = problem.evaluate(&s)?;
    let y = problem.project(&Point::axpy_unchecked(&s, -gamma, &a_s))?;
    let a_y = problem.evaluate(&y)?;
    let z = Point::axpy_unchecked(&y, -gamma, &Point::sub_unchecked(&a_y, &a_s));
    let next = viscosity(config, n, &z);
    ensure_finite(n, &[&s, &a_s, &y, &a_y, &next], &[])?;

    let gamma_next = step_size_update(space, gamma, config.phi, &s, &y, &a_s, &a_y)?;
    let residual = space.distance_unchecked(&s, &y);

    let record = StepRecord {
        n,
        anchor: s,
        projected: y,
        corrected: Some(z),
        next: next.clone(),
        delta: delta_n,
        gamma,
        gamma_next,
        residual,
        backtracks: 0,
    };
    let state = SolverState {
        n: n + 1,
        x_prev: state.x_cur.clone(),
        x_cur: next,
        gamma: gamma_next,
    };
    Ok((state, record))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::sets::FeasibleSet;

    fn e(dim: usize) -> HilbertSpace {
        HilbertSpace::euclidean(dim).unwrap()
    }

    #[test]
    fn inertia_rules() {
        let s = e(1);
        let x = Point::new(vec![1.0]);
        assert_eq!(inertia_coefficient(&s, &x, &x, 1e-2, 0.3).unwrap(), 0.3);
        let prev = Point::new(vec![0.0]);
        assert_eq!(inertia_coefficient(&s, &x, &prev, 1e-2, 0.3).unwrap(), 0.01);
        assert_eq!(inertia_coefficient(&s, &x, &prev, 10.0, 0.3).unwrap(), 0.3);
    }

    #[test]
    fn inertia_product_bounded_after_rounding() {
        let s = e(3);
        let mut rng = crate::rng::SeededRng::new(9);
        for _ in 0..2000 {
            let x = Point::new(rng.uniform_vec(3, -1.0, 1.0));
            let p = Point::new(rng.uniform_vec(3, -1.0, 1.0));
            let eps = rng.uniform(1e-9, 1e-1);
            let d = s.distance(&x, &p).unwrap();
            let c = inertia_coefficient(&s, &x, &p, eps, 0.3).unwrap();
            assert!(c * d <= eps);
            assert!((0.0..=0.3).contains(&c));
        }
    }

    #[test]
    fn step_size_rules() {
        let s = e(1);
        let p = |v: f64| Point::new(vec![v]);
        assert_eq!(
            step_size_update(&s, 1.0, 0.8, &p(0.0), &p(1.0), &p(2.0), &p(2.0)).unwrap(),
            1.0
        );
        let g = step_size_update(&s, 1.0, 0.8, &p(0.0), &p(1.0), &p(0.0), &p(4.0)).unwrap();
        assert!((g - 0.2).abs() < 1e-16);
        assert_eq!(
            step_size_update(&s, 1.0, 0.8, &p(0.0), &p(1.0), &p(0.0), &p(0.5)).unwrap(),
            1.0
        );
    }

    #[test]
    fn zero_operator_step() {
        let space = e(2);
        let set = FeasibleSet::uniform_box(space, -5.0, 5.0).unwrap();
        let problem = Problem::new("zero", set, Arc::new(|x: &Point| Point::zeros(x.len())));
        let config = SolverConfig::benchmark_defaults();
        let c = Point::new(vec![1.0, -2.0]);
        let state = SolverState::new(c.clone(), c.clone(), config.gamma1);
        let (next, rec) = tseng_inertial_step(&state, &problem, &config).unwrap();
        assert_eq!(rec.projected, rec.anchor);
        assert_eq!(rec.corrected.as_ref().unwrap(), &rec.anchor);
        let w = config.viscosity.at(1);
        let expected = Point::combine(w * 0.9, &c, 1.0 - w, &c).unwrap();
        for i in 0..2 {
            assert!((next.x_cur[i] - expected[i]).abs() < 1e-15);
        }
        assert_eq!(problem.eval_count(), 2);
        assert_eq!(problem.projection_count(), 1);
    }

    #[test]
    fn divergence_detected() {
        let space = e(1);
        let set = FeasibleSet::half_space(space, Point::new(vec![1.0]), 1e300).unwrap();
        let problem = Problem::new("blowup", set, Arc::new(|x: &Point| x.scaled(-1e308)));
        let config = SolverConfig::benchmark_defaults();
        let state = SolverState::new(Point::new(vec![-1e300]), Point::new(vec![-1e300]), 1.0);
        let err = tseng_inertial_step(&state, &problem, &config).unwrap_err();
        assert_eq!(err, Error::Divergence { iteration: 1 });
    }
}
