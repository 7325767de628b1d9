use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::space::{HilbertSpace, Point};

/// Positive sequence `n -> scale / (n + 1)^power`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub scale: f64,
    pub power: f64,
}

impl Schedule {
    pub const fn new(scale: f64, power: f64) -> Self {
        Self { scale, power }
    }

    pub fn at(&self, n: usize) -> f64 {
        self.scale / ((n + 1) as f64).powf(self.power)
    }
}

/// A contraction `f` with modulus `rho < 1`.
#[derive(Clone)]
pub struct Contraction {
    map: Arc<dyn Fn(&Point) -> Point + Send + Sync>,
    modulus: f64,
    scale: Option<f64>,
}

impl fmt::Debug for Contraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.scale {
            Some(c) => write!(f, "Contraction(x -> {c} x)"),
            None => write!(f, "Contraction(custom, rho = {})", self.modulus),
        }
    }
}

impl Contraction {
    /// `f(x) = c x`.
    pub fn scaling(c: f64) -> Result<Self> {
        if !(c.abs() < 1.0) {
            return Err(Error::Config(format!(
                "contraction coefficient {c} must satisfy |c| < 1"
            )));
        }
        Ok(Self {
            map: Arc::new(move |x: &Point| x.scaled(c)),
            modulus: c.abs(),
            scale: Some(c),
        })
    }

    /// Arbitrary map with a claimed modulus, checked on 100 random pairs.
    pub fn custom(
        map: Arc<dyn Fn(&Point) -> Point + Send + Sync>,
        modulus: f64,
        space: &HilbertSpace,
        seed: u64,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&modulus) {
            return Err(Error::Config(format!(
                "contraction modulus {modulus} must be in [0, 1)"
            )));
        }
        let mut rng = SeededRng::new(seed);
        for _ in 0..100 {
            let x = Point::new(rng.uniform_vec(space.dim(), -10.0, 10.0));
            let y = Point::new(rng.uniform_vec(space.dim(), -10.0, 10.0));
            let (fx, fy) = (map(&x), map(&y));
            space.check(&fx)?;
            space.check(&fy)?;
            let lhs = space.distance_unchecked(&fx, &fy);
            let rhs = modulus * space.distance_unchecked(&x, &y);
            if lhs > rhs + 1e-10 {
                return Err(Error::Config(format!(
                    "map is not {modulus}-contractive: {lhs} > {rhs}"
                )));
            }
        }
        Ok(Self {
            map,
            modulus,
            scale: None,
        })
    }

    pub fn apply(&self, x: &Point) -> Point {
        (self.map)(x)
    }

    pub fn modulus(&self) -> f64 {
        self.modulus
    }

    /// Coefficient `c` when the map is `x -> c x`.
    pub fn scale(&self) -> Option<f64> {
        self.scale
    }
}

/// Armijo parameters for the Mann-type Tseng baseline: trial steps
/// `alpha * ell^q` until `step * ||A x - A y|| <= phi * ||x - y||`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoParams {
    pub alpha: f64,
    pub ell: f64,
    pub phi: f64,
    /// `tau_n = tau_factor * (1 - phi_n)`.
    pub tau_factor: f64,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            ell: 0.5,
            phi: 0.4,
            tau_factor: 0.5,
        }
    }
}

/// Tunables of the inertial Tseng method and the baselines.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Inertia cap `delta >= 0`.
    pub delta: f64,
    /// Initial step `gamma_1 > 0`.
    pub gamma1: f64,
    /// Step-size safety factor in `(0, 1)`.
    pub phi: f64,
    /// `eps_n`, bounding `delta_n ||x_n - x_{n-1}||`.
    pub eps_schedule: Schedule,
    /// Viscosity weights `phi_n` in `(0, 1)`.
    pub viscosity: Schedule,
    pub contraction: Contraction,
    pub max_iters: usize,
    /// Stop once `||x_{n+1} - x_n|| <= stop_tol`.
    pub stop_tol: f64,
    pub record_trace: bool,
    /// Measure wall-clock time per iteration. When false, elapsed times are 0.
    pub timing: bool,
    /// Fixed step for PGM, PRGM, EGM, TEGM and SEGM. Defaults to
    /// `0.4 / L` when the problem knows its Lipschitz constant.
    pub fixed_step: Option<f64>,
    pub armijo: ArmijoParams,
}

impl SolverConfig {
    /// Parameters used for Examples 1-3: `phi = 0.8`, `gamma_1 = 1`,
    /// `delta = 0.3`, `eps_n = 1/(n+1)^2`, `phi_n = 1/(n+1)`, `f(x) = 0.9 x`.
    pub fn benchmark_defaults() -> Self {
        Self {
            delta: 0.3,
            gamma1: 1.0,
            phi: 0.8,
            eps_schedule: Schedule::new(1.0, 2.0),
            viscosity: Schedule::new(1.0, 1.0),
            contraction: Contraction::scaling(0.9).expect("0.9 is contractive"),
            max_iters: 1000,
            stop_tol: 0.0,
            record_trace: true,
            timing: true,
            fixed_step: None,
            armijo: ArmijoParams::default(),
        }
    }

    /// Optimal-control parameters: `phi = 0.1`, `gamma_1 = 0.4`,
    /// `delta = 0.3`, `eps_n = 1e-4/(n+1)^2`, `phi_n = 1e-4/(n+1)`,
    /// `f(x) = 0.1 x`, stop at `1e-4` or 1000 iterations.
    pub fn optimal_control() -> Self {
        Self {
            delta: 0.3,
            gamma1: 0.4,
            phi: 0.1,
            eps_schedule: Schedule::new(1e-4, 2.0),
            viscosity: Schedule::new(1e-4, 1.0),
            contraction: Contraction::scaling(0.1).expect("0.1 is contractive"),
            max_iters: 1000,
            stop_tol: 1e-4,
            ..Self::benchmark_defaults()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.phi > 0.0 && self.phi < 1.0) {
            return bad(format!("phi = {} must lie in (0, 1)", self.phi));
        }
        if !(self.gamma1 > 0.0) || !self.gamma1.is_finite() {
            return bad(format!("gamma1 = {} must be positive", self.gamma1));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return bad(format!("delta = {} must be nonnegative", self.delta));
        }
        if !(self.stop_tol >= 0.0) {
            return bad(format!("stop_tol = {} must be nonnegative", self.stop_tol));
        }
        if !(self.eps_schedule.scale > 0.0) || !(self.eps_schedule.power >= 0.0) {
            return bad("eps schedule must be positive with nonnegative power".into());
        }
        let v1 = self.viscosity.at(1);
        if !(self.viscosity.power >= 0.0) || !(v1 > 0.0 && v1 < 1.0) {
            return bad(format!(
                "viscosity weights must lie in (0, 1); phi_1 = {v1}"
            ));
        }
        if let Some(step) = self.fixed_step {
            if !(step > 0.0) || !step.is_finite() {
                return bad(format!("fixed step {step} must be positive"));
            }
        }
        let a = &self.armijo;
        if !(a.alpha > 0.0) || !(a.ell > 0.0 && a.ell < 1.0) || !(a.phi > 0.0 && a.phi < 1.0) {
            return bad("Armijo parameters need alpha > 0 and ell, phi in (0, 1)".into());
        }
        if !(a.tau_factor > 0.0 && a.tau_factor <= 1.0) {
            return bad(format!("tau factor {} must lie in (0, 1]", a.tau_factor));
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::benchmark_defaults()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        let eps = Schedule::new(1.0, 2.0);
        assert_eq!(eps.at(1), 0.25);
        let visc = Schedule::new(1e-4, 1.0);
        assert_eq!(visc.at(3), 1e-4 / 4.0);
    }

    #[test]
    fn defaults_validate() {
        SolverConfig::benchmark_defaults().validate().unwrap();
        SolverConfig::optimal_control().validate().unwrap();
    }

    #[test]
    fn out_of_range_rejected() {
        let mut c = SolverConfig::benchmark_defaults();
        c.phi = 1.5;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::benchmark_defaults();
        c.viscosity = Schedule::new(3.0, 1.0);
        assert!(c.validate().is_err());
        assert!(Contraction::scaling(1.0).is_err());
    }

    #[test]
    fn custom_contraction_checked() {
        let s = HilbertSpace::euclidean(3).unwrap();
        let shrink = Contraction::custom(Arc::new(|x: &Point| x.scaled(0.5)), 0.5, &s, 1);
        assert!(shrink.is_ok());
        let grow = Contraction::custom(Arc::new(|x: &Point| x.scaled(2.0)), 0.5, &s, 1);
        assert!(grow.is_err());
    }
}
