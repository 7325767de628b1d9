//! Terminal-cost optimal control with box-constrained controls, reduced to
//! a variational inequality over piecewise-constant controls.
//!
//! The state obeys `x' = A x + b u(t)` on `[0, T]` with `u` constant on each
//! of `N` uniform intervals. Each interval is integrated with four classical
//! Runge-Kutta substeps. The VI operator is the exact gradient of the
//! discretized objective `J_N(u) = phi(x_N)`, obtained by running the
//! integrator backwards (reverse accumulation through every stage), so it
//! matches finite differences of `J_N` to rounding.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2};

use crate::error::{check_dim, Error, Result};
use crate::problems::Problem;
use crate::rng::SeededRng;
use crate::sets::FeasibleSet;
use crate::space::{HilbertSpace, Point};

/// Runge-Kutta substeps per control interval.
pub const SUBSTEPS: usize = 4;

type CostFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type CostGrad = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Differentiable terminal cost `phi(x_T)`.
#[derive(Clone)]
pub struct TerminalCost {
    value: CostFn,
    gradient: CostGrad,
}

impl TerminalCost {
    pub fn new(value: CostFn, gradient: CostGrad) -> Self {
        Self { value, gradient }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }
}

#[derive(Clone)]
pub struct ControlProblem {
    dynamics: Array2<f64>,
    control_vector: Array1<f64>,
    horizon: f64,
    x0: Array1<f64>,
    cost: TerminalCost,
    lo: f64,
    hi: f64,
    intervals: usize,
}

impl fmt::Debug for ControlProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlProblem")
            .field("dynamics", &self.dynamics)
            .field("control_vector", &self.control_vector)
            .field("horizon", &self.horizon)
            .field("x0", &self.x0)
            .field("bounds", &(self.lo, self.hi))
            .field("intervals", &self.intervals)
            .finish()
    }
}

/// Piecewise-constant control with the states at interval boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTrajectory {
    pub control: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl ControlProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dynamics: Array2<f64>,
        control_vector: Array1<f64>,
        horizon: f64,
        x0: Array1<f64>,
        cost: TerminalCost,
        bounds: (f64, f64),
        intervals: usize,
    ) -> Result<Self> {
        let d = x0.len();
        if d == 0 || dynamics.dim() != (d, d) || control_vector.len() != d {
            return Err(Error::InvalidArgument(format!(
                "state dimension {d} inconsistent with dynamics {:?} and control vector of length {}",
                dynamics.dim(),
                control_vector.len()
            )));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "horizon {horizon} must be positive"
            )));
        }
        if !(bounds.0 < bounds.1) {
            return Err(Error::InvalidArgument(format!(
                "control bounds {bounds:?} need lo < hi"
            )));
        }
        if intervals == 0 {
            return Err(Error::InvalidArgument(
                "at least one control interval is required".into(),
            ));
        }
        check_cost_gradient(&cost, d)?;
        Ok(Self {
            dynamics: dynamics.as_standard_layout().into_owned(),
            control_vector: control_vector.as_standard_layout().into_owned(),
            horizon,
            x0,
            cost,
            lo: bounds.0,
            hi: bounds.1,
            intervals,
        })
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn state_dim(&self) -> usize {
        self.x0.len()
    }

    /// Length `T / N` of one control interval.
    pub fn cell_width(&self) -> f64 {
        self.horizon / self.intervals as f64
    }

    /// Centers of the control intervals.
    pub fn cell_midpoints(&self) -> Vec<f64> {
        let h = self.cell_width();
        (0..self.intervals).map(|j| (j as f64 + 0.5) * h).collect()
    }

    /// States at the `N + 1` interval boundaries.
    pub fn simulate_state(&self, u: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_dim(self.intervals, u.len())?;
        let h = self.cell_width() / SUBSTEPS as f64;
        let mut ws = Workspace::new(self.state_dim());
        let mut x = self.x0.to_vec();
        let mut states = Vec::with_capacity(self.intervals + 1);
        states.push(x.clone());
        for (j, &uj) in u.iter().enumerate() {
            for _ in 0..SUBSTEPS {
                self.rk4_step(&mut x, uj, h, &mut ws);
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { iteration: j });
            }
            states.push(x.clone());
        }
        Ok(states)
    }

    pub fn trajectory(&self, u: &[f64]) -> Result<ControlTrajectory> {
        Ok(ControlTrajectory {
            control: u.to_vec(),
            states: self.simulate_state(u)?,
        })
    }

    /// `J_N(u) = phi(x_N)`.
    pub fn objective(&self, u: &[f64]) -> Result<f64> {
        let states = self.simulate_state(u)?;
        Ok(self.cost.value(states.last().expect("at least one state")))
    }

    /// Exact partial derivatives `dJ_N / du_j`.
    pub fn discrete_gradient(&self, u: &[f64]) -> Result<Point> {
        let states = self.simulate_state(u)?;
        let terminal = states.last().expect("at least one state");
        let mut adjoint = self.cost.gradient(terminal);
        check_dim(self.state_dim(), adjoint.len())?;

        let h = self.cell_width() / SUBSTEPS as f64;
        let mut ws = Workspace::new(self.state_dim());
        let mut grad = vec![0.0; self.intervals];
        for g in grad.iter_mut().rev() {
            *g = (0..SUBSTEPS)
                .map(|_| self.rk4_step_adjoint(&mut adjoint, h, &mut ws))
                .sum();
        }
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration: 0 });
        }
        Ok(Point::new(grad))
    }

    /// Gradient with respect to the control-space inner product, which
    /// weights every interval by `T / N`: the raw partials divided by `T / N`.
    /// Approximates the continuous gradient `b^T lambda(t)` on each cell.
    pub fn control_space_gradient(&self, u: &[f64]) -> Result<Point> {
        let w = self.cell_width();
        Ok(self.discrete_gradient(u)?.scaled(1.0 / w))
    }

    /// Control space `R^N` with weights `T / N`.
    pub fn control_space(&self) -> HilbertSpace {
        HilbertSpace::uniform(self.intervals, self.cell_width()).expect("positive cell width")
    }

    /// `out = A x + b u`.
    fn field(&self, x: &[f64], u: f64, out: &mut [f64]) {
        let d = x.len();
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.dynamics.as_slice().expect("standard layout")[i * d..(i + 1) * d];
            *o = row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + self.control_vector[i] * u;
        }
    }

    /// `out = A^T v`.
    fn transpose_apply(&self, v: &[f64], out: &mut [f64]) {
        let d = v.len();
        let a = self.dynamics.as_slice().expect("standard layout");
        out.fill(0.0);
        for (i, vi) in v.iter().enumerate() {
            for (o, aij) in out.iter_mut().zip(&a[i * d..(i + 1) * d]) {
                *o += aij * vi;
            }
        }
    }

    fn rk4_step(&self, x: &mut [f64], u: f64, h: f64, ws: &mut Workspace) {
        let Workspace {
            k1,
            k2,
            k3,
            k4,
            tmp,
        } = ws;
        self.field(x, u, k1);
        axpy_into(tmp, x, h / 2.0, k1);
        self.field(tmp, u, k2);
        axpy_into(tmp, x, h / 2.0, k2);
        self.field(tmp, u, k3);
        axpy_into(tmp, x, h, k3);
        self.field(tmp, u, k4);
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    /// Vector-Jacobian product of one RK4 substep. On entry `lam` holds
    /// `dJ/dx_{k+1}`; on exit it holds `dJ/dx_k`. Returns the substep's
    /// contribution to `dJ/du`.
    fn rk4_step_adjoint(&self, lam: &mut [f64], h: f64, ws: &mut Workspace) -> f64 {
        let Workspace {
            k1: g1,
            k2: g2,
            k3: g3,
            k4: g4,
            tmp,
        } = ws;
        let b = self.control_vector.as_slice().expect("contiguous");
        // stage cotangents from x' = x + h/6 (k1 + 2 k2 + 2 k3 + k4)
        for i in 0..lam.len() {
            g1[i] = lam[i] * (h / 6.0);
            g2[i] = lam[i] * (h / 3.0);
            g3[i] = lam[i] * (h / 3.0);
            g4[i] = lam[i] * (h / 6.0);
        }
        let mut gu = 0.0;
        // k4 = f(x + h k3, u)
        self.transpose_apply(g4, tmp);
        accumulate(lam, g3, tmp, h);
        gu += dot(b, g4);
        // k3 = f(x + h/2 k2, u)
        self.transpose_apply(g3, tmp);
        accumulate(lam, g2, tmp, h / 2.0);
        gu += dot(b, g3);
        // k2 = f(x + h/2 k1, u)
        self.transpose_apply(g2, tmp);
        accumulate(lam, g1, tmp, h / 2.0);
        gu += dot(b, g2);
        // k1 = f(x, u)
        self.transpose_apply(g1, tmp);
        for (l, t) in lam.iter_mut().zip(tmp.iter()) {
            *l += t;
        }
        gu + dot(b, g1)
    }
}

struct Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Workspace {
    fn new(d: usize) -> Self {
        Self {
            k1: vec![0.0; d],
            k2: vec![0.0; d],
            k3: vec![0.0; d],
            k4: vec![0.0; d],
            tmp: vec![0.0; d],
        }
    }
}

fn axpy_into(out: &mut [f64], x: &[f64], a: f64, k: &[f64]) {
    for ((o, xi), ki) in out.iter_mut().zip(x).zip(k) {
        *o = xi + a * ki;
    }
}

/// `lam += t` and `stage += scale * t`.
fn accumulate(lam: &mut [f64], stage: &mut [f64], t: &[f64], scale: f64) {
    for ((l, g), ti) in lam.iter_mut().zip(stage.iter_mut()).zip(t) {
        *l += ti;
        *g += scale * ti;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_cost_gradient(cost: &TerminalCost, dim: usize) -> Result<()> {
    let mut rng = SeededRng::with_stream(0xc057, 2);
    for _ in 0..3 {
        let x: Vec<f64> = rng.uniform_vec(dim, -2.0, 2.0);
        let g = cost.gradient(&x);
        check_dim(dim, g.len())?;
        for i in 0..dim {
            let step = 1e-6 * (1.0 + x[i].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += step;
            xm[i] -= step;
            let fd = (cost.value(&xp) - cost.value(&xm)) / (2.0 * step);
            let rel = (fd - g[i]).abs() / g[i].abs().max(1.0);
            if !(rel <= 1e-6) {
                return Err(Error::InvalidArgument(format!(
                    "terminal cost gradient fails finite-difference check in component {i}: {} vs {fd}",
                    g[i]
                )));
            }
        }
    }
    Ok(())
}

/// VI over the control space: operator is the control-space gradient,
/// feasible set the box `[lo, hi]^N`.
pub fn build_vi_problem(problem: &ControlProblem) -> Result<Problem> {
    let space = problem.control_space();
    let (lo, hi) = problem.bounds();
    let set = FeasibleSet::uniform_box(space, lo, hi)?;
    let cp = problem.clone();
    let n = problem.intervals();
    let operator = Arc::new(move |u: &Point| {
        cp.control_space_gradient(u.as_slice())
            .unwrap_or_else(|_| Point::constant(n, f64::NAN))
    });
    Ok(Problem::new(format!("control(N={n})"), set, operator))
}

/// Harmonic oscillator `x1' = x2, x2' = -x1 + u` on `[0, 3 pi]`, minimizing `x2(3 pi)`.
pub fn example41_problem() -> ControlProblem {
    example41_with(100).expect("valid preset")
}

pub fn example41_with(intervals: usize) -> Result<ControlProblem> {
    ControlProblem::new(
        ndarray::array![[0.0, 1.0], [-1.0, 0.0]],
        ndarray::array![0.0, 1.0],
        3.0 * PI,
        Array1::zeros(2),
        TerminalCost::new(
            Arc::new(|x: &[f64]| x[1]),
            Arc::new(|_: &[f64]| vec![0.0, 1.0]),
        ),
        (-1.0, 1.0),
        intervals,
    )
}

/// Double integrator on `[0, 2]`, minimizing `-x1(2) + x2(2)^2`.
pub fn example42_problem() -> ControlProblem {
    example42_with(100).expect("valid preset")
}

pub fn example42_with(intervals: usize) -> Result<ControlProblem> {
    ControlProblem::new(
        ndarray::array![[0.0, 1.0], [0.0, 0.0]],
        ndarray::array![0.0, 1.0],
        2.0,
        Array1::zeros(2),
        TerminalCost::new(
            Arc::new(|x: &[f64]| -x[0] + x[1] * x[1]),
            Arc::new(|x: &[f64]| vec![-1.0, 2.0 * x[1]]),
        ),
        (-1.0, 1.0),
        intervals,
    )
}

/// Known bang-bang optimum of the harmonic oscillator problem.
pub fn example41_optimal_control(t: f64) -> f64 {
    let on = t < PI / 2.0 || (t > 1.5 * PI && t < 2.5 * PI);
    if on {
        1.0
    } else {
        -1.0
    }
}

/// Known bang-bang optimum of the double integrator problem.
pub fn example42_optimal_control(t: f64) -> f64 {
    if t < 1.2 {
        1.0
    } else {
        -1.0
    }
}

/// Times at which the sign of `u` flips, ignoring cells with `|u| < 0.5`.
///
/// Each switch is placed halfway between the centers of the last cell of the
/// old sign and the first cell of the new sign.
pub fn switching_times(u: &[f64], horizon: f64) -> Vec<f64> {
    if u.is_empty() {
        return Vec::new();
    }
    let h = horizon / u.len() as f64;
    let mut out = Vec::new();
    let mut last: Option<(usize, bool)> = None;
    for (j, &v) in u.iter().enumerate() {
        if v.abs() < 0.5 {
            continue;
        }
        let positive = v > 0.0;
        if let Some((i, sign)) = last {
            if sign != positive {
                out.push(((i as f64 + 0.5) + (j as f64 + 0.5)) / 2.0 * h);
            }
        }
        last = Some((j, positive));
    }
    out
}

/// Write `t, u, x1, ..., xd` at every interval boundary. The control is held
/// from the left, so the final row repeats the last control value.
pub fn write_trajectory_csv(
    path: impl AsRef<Path>,
    problem: &ControlProblem,
    trajectory: &ControlTrajectory,
) -> std::io::Result<()> {
    let path = path.as_ref();
    let with_path = |e: csv::Error| std::io::Error::other(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(with_path)?;
    let d = problem.state_dim();
    let mut header = vec!["t".to_string(), "u".to_string()];
    header.extend((1..=d).map(|i| format!("x{i}")));
    w.write_record(&header).map_err(with_path)?;
    let h = problem.cell_width();
    let n = trajectory.control.len();
    for (k, state) in trajectory.states.iter().enumerate() {
        let u = trajectory.control[k.min(n.saturating_sub(1))];
        let mut row = vec![format!("{:.16e}", k as f64 * h), format!("{u:.16e}")];
        row.extend(state.iter().map(|v| format!("{v:.16e}")));
        w.write_record(&row).map_err(with_path)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(horizon: f64, intervals: usize) -> ControlProblem {
        ControlProblem::new(
            ndarray::array![[0.0, 1.0], [-1.0, 0.0]],
            ndarray::array![0.0, 1.0],
            horizon,
            Array1::zeros(2),
            TerminalCost::new(
                Arc::new(|x: &[f64]| x[1]),
                Arc::new(|_: &[f64]| vec![0.0, 1.0]),
            ),
            (-1.0, 1.0),
            intervals,
        )
        .unwrap()
    }

    #[test]
    fn equilibrium() {
        let p = example41_problem();
        let states = p.simulate_state(&vec![0.0; 100]).unwrap();
        assert_eq!(states.len(), 101);
        assert!(states.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn closed_form_oscillator() {
        let p = oscillator(PI / 2.0, 10);
        let states = p.simulate_state(&[1.0; 10]).unwrap();
        let last = states.last().unwrap();
        assert!((last[0] - 1.0).abs() < 1e-4 && (last[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn fourth_order_convergence() {
        let err = |n: usize| {
            let p = oscillator(PI / 2.0, n);
            let s = p.simulate_state(&vec![1.0; n]).unwrap();
            let l = s.last().unwrap();
            ((l[0] - 1.0).powi(2) + (l[1] - 1.0).powi(2)).sqrt()
        };
        let ratio = err(4) / err(8);
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn invalid_problems_rejected() {
        let bad_bounds = ControlProblem::new(
            ndarray::array![[0.0]],
            ndarray::array![1.0],
            1.0,
            Array1::zeros(1),
            TerminalCost::new(Arc::new(|x: &[f64]| x[0]), Arc::new(|_: &[f64]| vec![1.0])),
            (1.0, -1.0),
            4,
        );
        assert!(bad_bounds.is_err());
        let bad_grad = ControlProblem::new(
            ndarray::array![[0.0]],
            ndarray::array![1.0],
            1.0,
            Array1::zeros(1),
            TerminalCost::new(
                Arc::new(|x: &[f64]| x[0] * x[0]),
                Arc::new(|_: &[f64]| vec![1.0]),
            ),
            (-1.0, 1.0),
            4,
        );
        assert!(bad_grad.is_err());
        assert!(example41_with(0).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = SeededRng::new(4);
        for p in [example41_with(20).unwrap(), example42_with(20).unwrap()] {
            let u = rng.uniform_vec(20, -1.0, 1.0);
            let g = p.discrete_gradient(&u).unwrap();
            for j in 0..20 {
                let mut up = u.clone();
                let mut um = u.clone();
                up[j] += 1e-5;
                um[j] -= 1e-5;
                let fd = (p.objective(&up).unwrap() - p.objective(&um).unwrap()) / 2e-5;
                let rel = (fd - g[j]).abs() / g[j].abs().max(1e-3);
                assert!(rel <= 1e-6, "component {j}: {} vs {fd}", g[j]);
            }
        }
    }

    #[test]
    fn switching_examples() {
        assert!(switching_times(&[1.0; 10], 2.0).is_empty());
        let mut u = vec![1.0; 50];
        u.extend(vec![-1.0; 50]);
        let s = switching_times(&u, 2.0);
        assert_eq!(s.len(), 1);
        assert!((s[0] - 1.0).abs() <= 2.0 / 100.0);
        // indeterminate cells are skipped
        let s = switching_times(&[1.0, 0.1, -0.2, -1.0], 4.0);
        assert_eq!(s, vec![2.0]);
    }

    #[test]
    fn optimal_controls_feasible() {
        for p in [example41_problem(), example42_problem()] {
            let (lo, hi) = p.bounds();
            for t in p.cell_midpoints() {
                for u in [example41_optimal_control(t), example42_optimal_control(t)] {
                    assert!(lo <= u && u <= hi);
                }
            }
        }
        let p = example41_problem();
        let u: Vec<f64> = p
            .cell_midpoints()
            .into_iter()
            .map(example41_optimal_control)
            .collect();
        let s = switching_times(&u, p.horizon());
        let expected = [PI / 2.0, 1.5 * PI, 2.5 * PI];
        assert_eq!(s.len(), 3);
        for (a, b) in s.iter().zip(expected) {
            assert!((a - b).abs() <= p.cell_width());
        }
        let p = example42_problem();
        let u: Vec<f64> = p
            .cell_midpoints()
            .into_iter()
            .map(example42_optimal_control)
            .collect();
        let s = switching_times(&u, p.horizon());
        assert_eq!(s.len(), 1);
        assert!((s[0] - 1.2).abs() <= p.cell_width());
    }

    #[test]
    fn vi_problem_contract() {
        let cp = example41_problem();
        let p = build_vi_problem(&cp).unwrap();
        assert_eq!(p.space().dim(), 100);
        assert!(p.set().contains(&Point::constant(100, 1.0), 0.0).unwrap());
        p.evaluate(&Point::zeros(100)).unwrap();
        assert_eq!(p.eval_count(), 1);
        assert!((p.space().weights()[0] - 3.0 * PI / 100.0).abs() < 1e-15);
    }

    #[test]
    fn trajectory_csv_layout() {
        let p = example41_with(5).unwrap();
        let traj = p.trajectory(&[1.0, 1.0, -1.0, -1.0, 1.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        write_trajectory_csv(&path, &p, &traj).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,u,x1,x2");
        assert_eq!(lines.len(), 7);
    }
}
