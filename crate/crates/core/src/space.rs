//! Weighted inner-product spaces.
//!
//! A [`HilbertSpace`] is a dimension together with positive quadrature
//! weights, so that `<x, y> = sum_i w_i x_i y_i`. Euclidean `R^m` uses unit
//! weights; `L^2[0,1]` is approximated on a uniform grid with trapezoidal
//! weights.

use std::ops::Index;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};

/// Default number of grid intervals for the `L^2[0,1]` discretization.
pub const DEFAULT_L2_INTERVALS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct HilbertSpace {
    weights: Arc<[f64]>,
}

/// A vector of coordinates living in some [`HilbertSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Vec<f64>);

impl HilbertSpace {
    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::with_weights(vec![1.0; dim])
    }

    /// `L^2[0,1]` on `intervals + 1` uniform nodes with trapezoid weights
    /// `(h/2, h, ..., h, h/2)`.
    pub fn l2_unit_interval(intervals: usize) -> Result<Self> {
        if intervals == 0 {
            return Err(Error::InvalidArgument(
                "L2 grid needs at least one interval".into(),
            ));
        }
        let h = 1.0 / intervals as f64;
        let mut w = vec![h; intervals + 1];
        w[0] = h / 2.0;
        w[intervals] = h / 2.0;
        Self::with_weights(w)
    }

    /// Every coordinate weighted by the same positive constant.
    pub fn uniform(dim: usize, weight: f64) -> Result<Self> {
        Self::with_weights(vec![weight; dim])
    }

    pub fn with_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument(
                "space dimension must be positive".into(),
            ));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weight {w} is not a positive real"
            )));
        }
        Ok(Self {
            weights: weights.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Node positions of an `L^2[0,1]` grid space (`k / (dim - 1)`).
    pub fn grid_nodes(&self) -> Vec<f64> {
        let n = self.dim();
        if n == 1 {
            return vec![0.0];
        }
        (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
    }

    pub fn check(&self, x: &Point) -> Result<()> {
        check_dim(self.dim(), x.len())
    }

    pub fn inner(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.inner_unchecked(x, y))
    }

    pub fn norm(&self, x: &Point) -> Result<f64> {
        self.check(x)?;
        Ok(self.norm_unchecked(x))
    }

    /// `||x - y||`.
    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.distance_unchecked(x, y))
    }

    pub fn zero(&self) -> Point {
        Point::zeros(self.dim())
    }

    pub fn point_from_fn(&self, f: impl Fn(f64) -> f64) -> Point {
        Point(self.grid_nodes().into_iter().map(f).collect())
    }

    pub(crate) fn inner_unchecked(&self, x: &Point, y: &Point) -> f64 {
        self.weights
            .iter()
            .zip(x.0.iter().zip(&y.0))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    pub(crate) fn norm_unchecked(&self, x: &Point) -> f64 {
        self.inner_unchecked(x, x).sqrt()
    }

    pub(crate) fn distance_unchecked(&self, x: &Point, y: &Point) -> f64 {
        self.weights
            .iter()
            .zip(x.0.iter().zip(&y.0))
            .map(|(w, (a, b))| w * (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        Self(vec![value; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `a * x + b * y`, componentwise.
    pub fn combine(a: f64, x: &Point, b: f64, y: &Point) -> Result<Point> {
        check_dim(x.len(), y.len())?;
        Ok(Self::combine_unchecked(a, x, b, y))
    }

    pub(crate) fn combine_unchecked(a: f64, x: &Point, b: f64, y: &Point) -> Point {
        Point(x.0.iter().zip(&y.0).map(|(p, q)| a * p + b * q).collect())
    }

    pub fn scaled(&self, a: f64) -> Point {
        Point(self.0.iter().map(|v| a * v).collect())
    }

    pub(crate) fn sub_unchecked(x: &Point, y: &Point) -> Point {
        Point(x.0.iter().zip(&y.0).map(|(p, q)| p - q).collect())
    }

    /// `x + a * d`.
    pub(crate) fn axpy_unchecked(x: &Point, a: f64, d: &Point) -> Point {
        Point(x.0.iter().zip(&d.0).map(|(p, q)| p + a * q).collect())
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Index<usize> for Point {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}
