//! Closed convex feasible sets with closed-form metric projections.
//!
//! All distances are measured in the owning space's weighted inner product.
//! The box projection stays a componentwise clamp because the weighted
//! squared distance is separable across coordinates.

use crate::error::{check_dim, Error, Result};
use crate::rng::SeededRng;
use crate::space::{HilbertSpace, Point};

/// Relative slack under which a point is treated as already lying on the
/// boundary. Grows with the dimension to cover inner-product rounding, which
/// keeps projections bitwise idempotent.
fn boundary_rtol(dim: usize) -> f64 {
    (dim as f64 + 8.0) * f64::EPSILON
}

#[derive(Debug, Clone, PartialEq)]
pub enum SetKind {
    /// `{x : <u, x> <= v}`.
    HalfSpace { normal: Point, offset: f64 },
    /// `{x : lower <= x <= upper}` componentwise.
    Box { lower: Point, upper: Point },
    /// `{x : ||x - center|| <= radius}`.
    Ball { center: Point, radius: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSet {
    space: HilbertSpace,
    kind: SetKind,
}

impl FeasibleSet {
    pub fn half_space(space: HilbertSpace, normal: Point, offset: f64) -> Result<Self> {
        space.check(&normal)?;
        if normal.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidArgument(
                "half-space normal must be nonzero".into(),
            ));
        }
        if !offset.is_finite() || !normal.is_finite() {
            return Err(Error::InvalidArgument(
                "half-space data must be finite".into(),
            ));
        }
        Ok(Self {
            space,
            kind: SetKind::HalfSpace { normal, offset },
        })
    }

    pub fn boxed(space: HilbertSpace, lower: Point, upper: Point) -> Result<Self> {
        space.check(&lower)?;
        space.check(&upper)?;
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i])) {
            return Err(Error::InvalidArgument(format!(
                "box bounds out of order at coordinate {i}: {} > {}",
                lower[i], upper[i]
            )));
        }
        Ok(Self {
            space,
            kind: SetKind::Box { lower, upper },
        })
    }

    /// `[lo, hi]^dim`.
    pub fn uniform_box(space: HilbertSpace, lo: f64, hi: f64) -> Result<Self> {
        let dim = space.dim();
        Self::boxed(space, Point::constant(dim, lo), Point::constant(dim, hi))
    }

    pub fn ball(space: HilbertSpace, center: Point, radius: f64) -> Result<Self> {
        space.check(&center)?;
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "ball radius {radius} must be positive"
            )));
        }
        Ok(Self {
            space,
            kind: SetKind::Ball { center, radius },
        })
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    /// Nearest point of the set to `x`.
    pub fn project(&self, x: &Point) -> Result<Point> {
        self.space.check(x)?;
        Ok(self.project_unchecked(x))
    }

    pub(crate) fn project_unchecked(&self, x: &Point) -> Point {
        match &self.kind {
            SetKind::HalfSpace { normal, offset } => {
                project_half_space(&self.space, normal, *offset, x)
            }
            SetKind::Box { lower, upper } => Point::new(
                x.iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .map(|(v, (a, b))| b.min(v.max(*a)))
                    .collect(),
            ),
            SetKind::Ball { center, radius } => {
                let d = self.space.distance_unchecked(x, center);
                if d <= radius * (1.0 + boundary_rtol(x.len())) {
                    x.clone()
                } else {
                    let diff = Point::sub_unchecked(x, center);
                    Point::axpy_unchecked(center, radius / d, &diff)
                }
            }
        }
    }

    /// True iff `x` violates the defining inequality by at most `tol`.
    pub fn contains(&self, x: &Point, tol: f64) -> Result<bool> {
        self.space.check(x)?;
        if !(tol >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance {tol} must be nonnegative"
            )));
        }
        Ok(self.violation(x) <= tol)
    }

    /// Amount by which `x` violates the set's inequality (0 for members).
    pub fn violation(&self, x: &Point) -> f64 {
        match &self.kind {
            SetKind::HalfSpace { normal, offset } => {
                (self.space.inner_unchecked(normal, x) - offset).max(0.0)
            }
            SetKind::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .map(|(v, (a, b))| (a - v).max(v - b).max(0.0))
                .fold(0.0, f64::max),
            SetKind::Ball { center, radius } => {
                (self.space.distance_unchecked(x, center) - radius).max(0.0)
            }
        }
    }

    /// Draw a member of the set. Not uniform, but every interior region has
    /// positive probability.
    pub fn sample(&self, rng: &mut SeededRng) -> Point {
        let dim = self.space.dim();
        match &self.kind {
            SetKind::Box { lower, upper } => Point::new(
                lower
                    .iter()
                    .zip(upper.iter())
                    .map(|(a, b)| rng.uniform(*a, *b))
                    .collect(),
            ),
            SetKind::Ball { center, radius } => {
                let mut dir = Point::new((0..dim).map(|_| rng.normal()).collect());
                let mut n = self.space.norm_unchecked(&dir);
                while n == 0.0 {
                    dir = Point::new((0..dim).map(|_| rng.normal()).collect());
                    n = self.space.norm_unchecked(&dir);
                }
                let r = radius * rng.uniform(0.0, 1.0);
                Point::axpy_unchecked(center, r / n, &dir)
            }
            SetKind::HalfSpace { normal, offset } => {
                // Spread around the boundary so both sides are hit before projecting.
                let nn = self.space.inner_unchecked(normal, normal);
                let anchor = normal.scaled(offset / nn);
                let scale = 1.0 + offset.abs() / nn.sqrt();
                let raw = Point::new(
                    anchor
                        .iter()
                        .map(|a| a + scale * rng.uniform(-2.0, 2.0))
                        .collect(),
                );
                project_half_space(&self.space, normal, *offset, &raw)
            }
        }
    }
}

/// Projection onto `{x : <u, x> <= v}` in a weighted space.
pub fn half_space_projection(
    space: &HilbertSpace,
    normal: &Point,
    offset: f64,
    x: &Point,
) -> Result<Point> {
    space.check(normal)?;
    space.check(x)?;
    check_dim(normal.len(), x.len())?;
    Ok(project_half_space(space, normal, offset, x))
}

pub(crate) fn project_half_space(
    space: &HilbertSpace,
    normal: &Point,
    offset: f64,
    x: &Point,
) -> Point {
    let nn = space.inner_unchecked(normal, normal);
    if nn == 0.0 {
        return x.clone();
    }
    let rtol = boundary_rtol(x.len());
    // A far-away x loses digits to cancellation in x - t u, so the first
    // result can land just outside the boundary band. Repeat the step
    // until it passes the same test `project` applies, which makes the
    // projection idempotent.
    let mut p = x.clone();
    for _ in 0..4 {
        let excess = space.inner_unchecked(normal, &p) - offset;
        let scale = offset.abs() + nn.sqrt() * space.norm_unchecked(&p);
        if excess <= rtol * scale {
            break;
        }
        p = Point::axpy_unchecked(&p, -excess / nn, normal);
    }
    p
}
