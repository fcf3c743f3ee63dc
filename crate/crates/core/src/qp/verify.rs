use crate::qp::QpProblem;
use crate::scalar::Real;

/// Independent KKT check of a candidate solution.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport<T> {
    pub satisfied: bool,
    /// Max |gradient| over interior variables.
    pub stationarity: T,
    /// Max wrong-signed multiplier at an active bound.
    pub multiplier_sign: T,
    /// Max bound violation (0 for a feasible point).
    pub feasibility: T,
}

/// Recompute stationarity, feasibility, and complementarity for `u` from
/// the problem data alone; shares no state with the solver.
///
/// A variable sitting exactly on a bound (or within `tol` of it) is
/// classified as active, matching the solver's tie-break.
pub fn verify_kkt<T: Real>(qp: &QpProblem<T>, u: &[T], tol: T) -> KktReport<T> {
    let n = qp.n;
    assert_eq!(u.len(), n);

    let mut feasibility = T::zero();
    for i in 0..n {
        feasibility = feasibility
            .max(qp.lo[i] - u[i])
            .max(u[i] - qp.hi[i]);
    }
    feasibility = feasibility.max(T::zero());

    let mut stationarity = T::zero();
    let mut multiplier_sign = T::zero();
    for i in 0..n {
        if qp.is_pinned(i) {
            continue;
        }
        // plain inner-product gradient, recomputed here on purpose
        let mut g = qp.f[i];
        for j in 0..n {
            g += qp.h[i * n + j] * u[j];
        }
        let at_lo = u[i] - qp.lo[i] <= tol;
        let at_hi = qp.hi[i] - u[i] <= tol;
        if at_lo {
            multiplier_sign = multiplier_sign.max(-g);
        } else if at_hi {
            multiplier_sign = multiplier_sign.max(g);
        } else {
            stationarity = stationarity.max(g.abs());
        }
    }
    multiplier_sign = multiplier_sign.max(T::zero());

    KktReport {
        satisfied: feasibility <= T::zero()
            && stationarity <= tol
            && multiplier_sign <= tol,
        stationarity,
        multiplier_sign,
        feasibility,
    }
}
