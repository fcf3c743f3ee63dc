//! Per-layer optimal control problem: condensing into a box-constrained
//! strictly convex QP over the N laser powers, an active-set solver with a
//! structure-exploiting equality subproblem, and an independent KKT
//! verifier.
//!
//! Cost convention: depth errors are measured in micrometres and power in
//! watts, so the default weights (q = 1, r = 0.05) put the two terms on
//! comparable scales at nominal depths and power steps.

mod condense;
mod solver;
mod verify;

pub use condense::condense;
pub use solver::{solve_box_qp, solve_ocp};
pub use verify::{verify_kkt, KktReport};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sysid::{Mat2, Vec2};

/// Internal depth unit: metres -> micrometres.
pub(crate) const DEPTH_SCALE: f64 = 1.0e6;

/// One layer's optimal control problem.
#[derive(Debug, Clone, PartialEq)]
pub struct OcpSpec<T> {
    /// Melt-pool depth target [m].
    pub target_depth: T,
    /// Depth tracking weight [1/um^2].
    pub q_depth: T,
    /// Input increment weight [1/W^2].
    pub r_smooth: T,
    /// Number of control intervals N.
    pub n_intervals: usize,
    /// Power bounds when the laser is on [W].
    pub u_min: T,
    pub u_max: T,
    /// Laser on/off mask; off intervals pin the power to zero.
    pub xi: Vec<bool>,
    /// One-step model matrices in SI units (m, W).
    pub a: Mat2<T>,
    pub b: Vec2<T>,
    pub c: Vec2<T>,
    /// Anchor for the first increment penalty, u^{-1}.
    pub u_prev_init: T,
}

impl<T: Real> OcpSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n_intervals == 0 {
            return Err(Error::Config("OCP needs at least one interval".to_string()));
        }
        if self.xi.len() != self.n_intervals {
            return Err(Error::Config(format!(
                "mask length {} != n_intervals {}",
                self.xi.len(),
                self.n_intervals
            )));
        }
        if !(self.q_depth > T::zero()) {
            return Err(Error::Config("q_depth must be positive".to_string()));
        }
        if self.r_smooth < T::zero() {
            return Err(Error::Config("r_smooth must be nonnegative".to_string()));
        }
        if !(self.u_min <= self.u_max) {
            return Err(Error::Config("u_min must be <= u_max".to_string()));
        }
        let finite = self.target_depth.is_finite()
            && self.u_prev_init.is_finite()
            && self.a.iter().flatten().all(|v| v.is_finite())
            && self.b.iter().all(|v| v.is_finite())
            && self.c.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("OCP data must be finite".to_string()));
        }
        Ok(())
    }
}

/// Condensed box QP: `min 1/2 u' H u + f' u + c0` over `lo <= u <= hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem<T> {
    pub n: usize,
    /// Row-major symmetric positive definite Hessian (includes the
    /// regularization shift).
    pub h: Vec<T>,
    pub f: Vec<T>,
    pub lo: Vec<T>,
    pub hi: Vec<T>,
    /// Constant cost term, so the objective equals the full OCP cost.
    pub c0: T,
    /// Tikhonov shift that was added to the diagonal.
    pub eps: T,
}

impl<T: Real> QpProblem<T> {
    /// Objective value at `u`.
    pub fn objective(&self, u: &[T]) -> T {
        let n = self.n;
        let mut quad = T::zero();
        let mut lin = T::zero();
        for i in 0..n {
            let mut hu = T::zero();
            for j in 0..n {
                hu += self.h[i * n + j] * u[j];
            }
            quad += u[i] * hu;
            lin += self.f[i] * u[i];
        }
        quad / crate::scalar::real::<T>(2.0) + lin + self.c0
    }

    /// Gradient `H u + f` written into `out`.
    pub fn gradient(&self, u: &[T], out: &mut [T]) {
        let n = self.n;
        for i in 0..n {
            let mut g = self.f[i];
            for j in 0..n {
                g += self.h[i * n + j] * u[j];
            }
            out[i] = g;
        }
    }

    /// Variable is pinned when its bounds coincide (off-geometry interval).
    pub fn is_pinned(&self, i: usize) -> bool {
        self.lo[i] == self.hi[i]
    }

    /// Structural checks: symmetry and ordered bounds.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if self.h.len() != n * n || self.f.len() != n || self.lo.len() != n || self.hi.len() != n
        {
            return Err(Error::Config("QP dimension mismatch".to_string()));
        }
        for i in 0..n {
            if self.lo[i] > self.hi[i] {
                return Err(Error::Config(format!("bounds crossed at variable {i}")));
            }
            for j in 0..i {
                let d = (self.h[i * n + j] - self.h[j * n + i]).abs();
                if d > T::epsilon() * (T::one() + self.h[i * n + j].abs()) {
                    return Err(Error::Config(format!(
                        "Hessian not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Which bound a variable sits on in the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundSide {
    Lower,
    Upper,
    Pinned,
}

/// Solver output with its own optimality diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution<T> {
    pub u_star: Vec<T>,
    /// Full OCP objective at the solution (includes constant term).
    pub objective: T,
    /// Max KKT violation: stationarity on free variables, multiplier sign
    /// at active bounds; pinned variables excluded.
    pub kkt_residual: T,
    /// Active-set iterations performed.
    pub iterations: usize,
    /// Variables at a bound in the solution.
    pub active_set: Vec<(usize, BoundSide)>,
    /// Objective after each iteration; non-increasing along the solve path.
    pub objective_trace: Vec<T>,
}

/// Nonconvergence report carrying the best iterate found.
#[derive(Debug, Clone)]
pub struct SolveError<T> {
    pub message: String,
    pub best_u: Vec<T>,
    pub residual: T,
}

impl<T: std::fmt::Display> std::fmt::Display for SolveError<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (best residual {})", self.message, self.residual)
    }
}

impl<T: Real> From<SolveError<T>> for Error {
    fn from(e: SolveError<T>) -> Self {
        Error::Solver(e.to_string())
    }
}
