//! Variational inequality test problems.
//!
//! A [`Problem`] bundles an operator oracle with its feasible set and keeps
//! thread-safe counters of operator evaluations and projections onto the
//! feasible set. Solvers never report their own costs; the counters on the
//! problem are the single source of truth.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{check_dim, Error, Result};
use crate::rng::SeededRng;
use crate::sets::FeasibleSet;
use crate::space::{HilbertSpace, Point};

pub type Operator = Arc<dyn Fn(&Point) -> Point + Send + Sync>;

/// An instance of VI(C, A): find `x* in C` with `<A x*, z - x*> >= 0` for all `z in C`.
pub struct Problem {
    name: String,
    space: HilbertSpace,
    set: FeasibleSet,
    operator: Operator,
    lipschitz: Option<f64>,
    known_solution: Option<Point>,
    evals: AtomicU64,
    projections: AtomicU64,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dim", &self.space.dim())
            .field("set", &self.set.kind())
            .field("lipschitz", &self.lipschitz)
            .field("evals", &self.eval_count())
            .field("projections", &self.projection_count())
            .finish()
    }
}

impl Problem {
    pub fn new(name: impl Into<String>, set: FeasibleSet, operator: Operator) -> Self {
        Self {
            name: name.into(),
            space: set.space().clone(),
            set,
            operator,
            lipschitz: None,
            known_solution: None,
            evals: AtomicU64::new(0),
            projections: AtomicU64::new(0),
        }
    }

    pub fn with_lipschitz(mut self, lipschitz: f64) -> Self {
        self.lipschitz = Some(lipschitz);
        self
    }

    pub fn with_known_solution(mut self, solution: Point) -> Self {
        self.known_solution = Some(solution);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn known_solution(&self) -> Option<&Point> {
        self.known_solution.as_ref()
    }

    /// Evaluate `A(x)`, incrementing the evaluation counter by one.
    pub fn evaluate(&self, x: &Point) -> Result<Point> {
        self.space.check(x)?;
        self.evals.fetch_add(1, Ordering::Relaxed);
        let ax = (self.operator)(x);
        check_dim(self.space.dim(), ax.len())?;
        Ok(ax)
    }

    /// Evaluate `A(x)` for diagnostics without touching the counter.
    pub fn evaluate_uncounted(&self, x: &Point) -> Result<Point> {
        self.space.check(x)?;
        let ax = (self.operator)(x);
        check_dim(self.space.dim(), ax.len())?;
        Ok(ax)
    }

    /// Project onto the feasible set, incrementing the projection counter.
    pub fn project(&self, x: &Point) -> Result<Point> {
        let p = self.set.project(x)?;
        self.projections.fetch_add(1, Ordering::Relaxed);
        Ok(p)
    }

    pub fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    pub fn projection_count(&self) -> u64 {
        self.projections.load(Ordering::Relaxed)
    }

    /// Same instance with fresh counters, for running algorithms side by side.
    pub fn fork(&self) -> Problem {
        Problem {
            name: self.name.clone(),
            space: self.space.clone(),
            set: self.set.clone(),
            operator: Arc::clone(&self.operator),
            lipschitz: self.lipschitz,
            known_solution: self.known_solution.clone(),
            evals: AtomicU64::new(0),
            projections: AtomicU64::new(0),
        }
    }

    /// Distance to the known solution, if there is one.
    pub fn error(&self, x: &Point) -> Option<f64> {
        self.known_solution
            .as_ref()
            .map(|s| self.space.distance_unchecked(x, s))
    }
}

/// Minimum of `<A(x), x - candidate>` over `samples` random members `x` of C.
///
/// By the Minty characterization a solution of a continuous pseudomonotone
/// VI makes every such term nonnegative, so a negative return rules the
/// candidate out. A nonnegative return is only a necessary check.
pub fn minty_certificate(
    problem: &Problem,
    candidate: &Point,
    samples: usize,
    rng: &mut SeededRng,
) -> Result<f64> {
    problem.space().check(candidate)?;
    if samples == 0 {
        return Err(Error::InvalidArgument(
            "minty certificate needs at least one sample".into(),
        ));
    }
    if !problem.set().contains(candidate, 1e-8)? {
        return Err(Error::InvalidArgument(
            "candidate lies outside the feasible set".into(),
        ));
    }
    let space = problem.space();
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let x = problem.set().sample(rng);
        let ax = problem.evaluate(&x)?;
        let gap = space.inner_unchecked(&ax, &Point::sub_unchecked(&x, candidate));
        worst = worst.min(gap);
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Example 1: argmin operator, pseudomonotone but not monotone.

/// Unique real root of `rho^3 + rho = r` for `r >= 0`.
///
/// Newton's method started from `min(r, r^(1/3))`, which lies at or above the
/// root; on this convex increasing cubic the iterates then decrease
/// monotonically onto it.
pub fn monotone_cubic_root(r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let mut rho = r.min(r.cbrt());
    for _ in 0..100 {
        let g = rho * rho * rho + rho - r;
        if g.abs() <= 1e-14 {
            break;
        }
        let next = rho - g / (3.0 * rho * rho + 1.0);
        // Monotone from above; a non-decreasing step means we hit rounding.
        if !(next < rho) {
            break;
        }
        rho = next;
    }
    rho
}

/// `argmin_y { ||y||^4 / 4 + ||x - y||^2 / 2 }`, which solves `(||y||^2 + 1) y = x`.
pub fn example1_inner_argmin(x: &Point) -> Point {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Point::zeros(x.len());
    }
    let rho = monotone_cubic_root(r);
    x.scaled(rho / r)
}

/// `A(x) = argmin_y {...} / (||x||^2 + 1)` on Euclidean space.
pub fn eval_example1(x: &Point) -> Point {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    example1_inner_argmin(x).scaled(1.0 / (r2 + 1.0))
}

/// Example 1 on `[-5, 5]^m`. The unique solution is the origin, since
/// `A(x)` is a positive multiple of `x`.
pub fn example1_problem(m: usize) -> Result<Problem> {
    let space = HilbertSpace::euclidean(m)?;
    let set = FeasibleSet::uniform_box(space, -5.0, 5.0)?;
    Ok(
        Problem::new(format!("example1(m={m})"), set, Arc::new(eval_example1))
            .with_known_solution(Point::zeros(m)),
    )
}

// ---------------------------------------------------------------------------
// Example 2: affine operator G x + g with G = B B^T + M + E.

#[derive(Debug, Clone, PartialEq)]
pub struct AffineOperator {
    /// `B B^T`.
    pub gram: Array2<f64>,
    /// Skew-symmetric part `M`.
    pub skew: Array2<f64>,
    /// Nonnegative diagonal of `E`.
    pub diag: Array1<f64>,
    /// `G = B B^T + M + E`.
    pub matrix: Array2<f64>,
    pub offset: Array1<f64>,
}

impl AffineOperator {
    /// Random instance: entries of `B` and `M` uniform in `[-2, 2]`, diagonal
    /// of `E` uniform in `[0, 2]`, `g = 0`.
    pub fn random(m: usize, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let mut rng = SeededRng::new(seed);
        let b = Array2::from_shape_fn((m, m), |_| rng.uniform(-2.0, 2.0));
        let mut skew = Array2::<f64>::zeros((m, m));
        for i in 0..m {
            for j in (i + 1)..m {
                let v = rng.uniform(-2.0, 2.0);
                skew[[i, j]] = v;
                skew[[j, i]] = -v;
            }
        }
        let diag = Array1::from_shape_fn(m, |_| rng.uniform(0.0, 2.0));
        let gram = b.dot(&b.t());
        let mut matrix = &gram + &skew;
        for i in 0..m {
            matrix[[i, i]] += diag[i];
        }
        Ok(Self {
            gram,
            skew,
            diag,
            matrix,
            offset: Array1::zeros(m),
        })
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn apply(&self, x: &Point) -> Point {
        let v = self.matrix.dot(&ArrayView1::from(x.as_slice())) + &self.offset;
        Point::new(v.to_vec())
    }

    /// Largest singular value of `G` by power iteration on `G^T G`.
    pub fn spectral_norm(&self) -> f64 {
        let m = self.dim();
        let mut rng = SeededRng::with_stream(0x5eed, 1);
        let mut v = Array1::from_shape_fn(m, |_| rng.uniform(0.5, 1.5));
        v /= v.dot(&v).sqrt();
        let mut lambda = 0.0;
        for _ in 0..200 {
            let w = self.matrix.t().dot(&self.matrix.dot(&v));
            let next = w.dot(&w).sqrt();
            if next == 0.0 {
                return 0.0;
            }
            v = w / next;
            let done = (next - lambda).abs() <= 1e-12 * next;
            lambda = next;
            if done {
                break;
            }
        }
        lambda.sqrt()
    }
}

/// Example 2 on the box `[-2, 5]^m`, solution `x* = 0`.
pub fn generate_example2(m: usize, seed: u64) -> Result<Problem> {
    let op = AffineOperator::random(m, seed)?;
    let lipschitz = op.spectral_norm();
    let space = HilbertSpace::euclidean(m)?;
    let set = FeasibleSet::uniform_box(space, -2.0, 5.0)?;
    Ok(Problem::new(
        format!("example2(m={m},seed={seed})"),
        set,
        Arc::new(move |x: &Point| op.apply(x)),
    )
    .with_lipschitz(lipschitz)
    .with_known_solution(Point::zeros(m)))
}

// ---------------------------------------------------------------------------
// Example 3: A(x) = (B - ||x||) x on a discretized L^2[0,1].

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftSphereParams {
    /// `B` in `A(x) = (B - ||x||) x`.
    pub bcap: f64,
    /// Radius `b` of the feasible ball.
    pub radius: f64,
    /// Scalar `m > 1` with `B/(m+1) < b/m < b < B`, used for the
    /// non-monotonicity witness.
    pub m_scalar: f64,
}

impl Default for SoftSphereParams {
    fn default() -> Self {
        Self {
            bcap: 1.5,
            radius: 1.0,
            m_scalar: 1.1,
        }
    }
}

pub fn eval_softsphere(space: &HilbertSpace, bcap: f64, x: &Point) -> Result<Point> {
    let n = space.norm(x)?;
    Ok(x.scaled(bcap - n))
}

pub fn example3_problem(intervals: usize) -> Result<Problem> {
    example3_with(intervals, SoftSphereParams::default())
}

pub fn example3_with(intervals: usize, params: SoftSphereParams) -> Result<Problem> {
    let space = HilbertSpace::l2_unit_interval(intervals)?;
    let set = FeasibleSet::ball(space.clone(), space.zero(), params.radius)?;
    let op_space = space.clone();
    let bcap = params.bcap;
    Ok(Problem::new(
        format!("example3(N={intervals})"),
        set,
        Arc::new(move |x: &Point| x.scaled(bcap - op_space.norm_unchecked(x))),
    )
    .with_known_solution(space.zero()))
}

/// Starting functions used with Example 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example3Start {
    Square,
    Cos,
    Sin2t,
    Exp2,
}

impl Example3Start {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            Self::Square => t * t,
            Self::Cos => t.cos(),
            Self::Sin2t => (2.0 * t).sin(),
            Self::Exp2 => 2f64.powf(t),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Square => "t2",
            Self::Cos => "cos",
            Self::Sin2t => "sin2t",
            Self::Exp2 => "exp2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "t2" => Some(Self::Square),
            "cos" => Some(Self::Cos),
            "sin2t" => Some(Self::Sin2t),
            "exp2" => Some(Self::Exp2),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(v: &[f64]) -> Point {
        Point::new(v.to_vec())
    }

    /// Damped gradient descent on `||y||^4/4 + ||x-y||^2/2`.
    fn brute_argmin(x: &Point) -> Point {
        let mut y = x.clone();
        for _ in 0..200_000 {
            let n2: f64 = y.iter().map(|v| v * v).sum();
            let g: Vec<f64> = y
                .iter()
                .zip(x.iter())
                .map(|(yi, xi)| n2 * yi + (yi - xi))
                .collect();
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gn <= 1e-12 {
                break;
            }
            let step = 1.0 / (1.0 + 3.0 * n2);
            y = Point::new(y.iter().zip(&g).map(|(yi, gi)| yi - step * gi).collect());
        }
        y
    }

    #[test]
    fn cubic_root_residual() {
        for r in [1e-12, 1e-3, 0.5, 1.0, 2.0, 10.0, 1e3, 1e6] {
            let rho = monotone_cubic_root(r);
            assert!(
                (rho.powi(3) + rho - r).abs() <= 1e-14 * r.max(1.0) * 4.0,
                "r={r}"
            );
        }
        assert_eq!(monotone_cubic_root(2.0), 1.0);
    }

    #[test]
    fn example1_at_origin() {
        assert_eq!(eval_example1(&Point::zeros(5)), Point::zeros(5));
    }

    #[test]
    fn example1_norm_two() {
        let x = e(&[2.0, 0.0, 0.0]);
        let ax = eval_example1(&x);
        let expected = x.scaled(1.0 / 10.0);
        for i in 0..3 {
            assert!((ax[i] - expected[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn example1_matches_brute_force_argmin() {
        let mut rng = SeededRng::new(11);
        for _ in 0..5 {
            let x = Point::new(rng.uniform_vec(4, -3.0, 3.0));
            let fast = example1_inner_argmin(&x);
            let slow = brute_argmin(&x);
            for i in 0..4 {
                assert!((fast[i] - slow[i]).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn example1_empirical_lipschitz_is_finite() {
        let mut rng = SeededRng::new(2);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let x = Point::new(rng.uniform_vec(5, -5.0, 5.0));
            let y = Point::new(rng.uniform_vec(5, -5.0, 5.0));
            let num = Point::sub_unchecked(&eval_example1(&x), &eval_example1(&y));
            let den = Point::sub_unchecked(&x, &y);
            let ratio = num.iter().map(|v| v * v).sum::<f64>().sqrt()
                / den.iter().map(|v| v * v).sum::<f64>().sqrt();
            worst = worst.max(ratio);
        }
        assert!(worst.is_finite() && worst > 0.0);
        assert!(worst < 10.0, "empirical Lipschitz bound {worst}");
    }

    #[test]
    fn example2_is_deterministic() {
        let a = AffineOperator::random(6, 42).unwrap();
        let b = AffineOperator::random(6, 42).unwrap();
        assert_eq!(a.matrix, b.matrix);
        let c = AffineOperator::random(6, 43).unwrap();
        assert_ne!(a.matrix, c.matrix);
    }

    #[test]
    fn example2_structure() {
        let op = AffineOperator::random(7, 1).unwrap();
        assert_eq!(op.skew.t().to_owned(), op.skew.mapv(|v| -v));
        assert!(op.diag.iter().all(|d| (0.0..=2.0).contains(d)));
        assert!(op.skew.iter().all(|v| (-2.0..=2.0).contains(v)));
        let p = generate_example2(7, 1).unwrap();
        assert_eq!(p.evaluate(&Point::zeros(7)).unwrap(), Point::zeros(7));
        assert!(p.lipschitz().unwrap() > 0.0);
    }

    #[test]
    fn eval_counter_increments_by_one() {
        let p = generate_example2(4, 3).unwrap();
        let before = p.eval_count();
        p.evaluate(&Point::constant(4, 0.3)).unwrap();
        assert_eq!(p.eval_count(), before + 1);
        p.evaluate_uncounted(&Point::constant(4, 0.3)).unwrap();
        assert_eq!(p.eval_count(), before + 1);
        let q = p.fork();
        assert_eq!(q.eval_count(), 0);
    }

    #[test]
    fn counters_are_thread_safe() {
        let p = generate_example2(3, 1).unwrap();
        std::thread::scope(|s| {
            for _ in 0..4 {
                s.spawn(|| {
                    for _ in 0..250 {
                        p.evaluate(&Point::zeros(3)).unwrap();
                    }
                });
            }
        });
        assert_eq!(p.eval_count(), 1000);
    }

    #[test]
    fn softsphere_examples() {
        let s = HilbertSpace::l2_unit_interval(50).unwrap();
        assert_eq!(eval_softsphere(&s, 1.5, &s.zero()).unwrap(), s.zero());
        let x = Point::constant(51, 1.5);
        let ax = eval_softsphere(&s, 1.5, &x).unwrap();
        assert!(ax.iter().all(|v| v.abs() < 1e-14));
        let x = Point::constant(51, 0.5);
        let ax = eval_softsphere(&s, 1.5, &x).unwrap();
        for (a, b) in ax.iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn softsphere_along_rays() {
        let s = HilbertSpace::l2_unit_interval(30).unwrap();
        let x = s.point_from_fn(|t| (3.0 * t).cos());
        let nx = s.norm(&x).unwrap();
        for t in [0.0, 0.25, 1.0, 2.5] {
            let tx = x.scaled(t);
            let got = eval_softsphere(&s, 1.5, &tx).unwrap();
            let want = x.scaled((1.5 - s.norm(&tx).unwrap()) * t);
            for (a, b) in got.iter().zip(want.iter()) {
                assert!((a - b).abs() <= 1e-15);
            }
            assert!((s.norm(&tx).unwrap() - t * nx).abs() < 1e-14);
        }
    }

    #[test]
    fn example3_known_solution_is_zero() {
        let p = example3_problem(200).unwrap();
        assert_eq!(p.known_solution().unwrap(), &Point::zeros(201));
    }

    #[test]
    fn minty_rejects_outside_candidate() {
        let p = example3_problem(20).unwrap();
        let mut rng = SeededRng::new(1);
        let far = Point::constant(21, 3.0);
        assert!(matches!(
            minty_certificate(&p, &far, 10, &mut rng),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn minty_at_solutions() {
        let mut rng = SeededRng::new(5);
        let p2 = generate_example2(5, 1).unwrap();
        assert!(minty_certificate(&p2, &Point::zeros(5), 500, &mut rng).unwrap() >= -1e-8);
        let p3 = example3_problem(100).unwrap();
        assert!(minty_certificate(&p3, &Point::zeros(101), 500, &mut rng).unwrap() >= -1e-8);
    }

    #[test]
    fn minty_exposes_corner() {
        let p2 = generate_example2(5, 1).unwrap();
        let corner = Point::constant(5, 5.0);
        let violated = (1..=5).any(|seed| {
            let mut rng = SeededRng::new(seed);
            minty_certificate(&p2, &corner, 200, &mut rng).unwrap() < 0.0
        });
        assert!(violated);
    }
}
