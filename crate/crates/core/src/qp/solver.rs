use crate::error::Result;
use crate::linalg::Cholesky;
use crate::qp::{
    condense, BoundSide, OcpSpec, QpProblem, QpSolution, SolveError, DEPTH_SCALE,
};
use crate::scalar::{real, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Free,
    Lower,
    Upper,
    Pinned,
}

impl VarState {
    fn is_fixed(self) -> bool {
        self != VarState::Free
    }
}

fn fixed_value<T: Real>(qp: &QpProblem<T>, i: usize, s: VarState) -> T {
    match s {
        VarState::Lower | VarState::Pinned => qp.lo[i],
        VarState::Upper => qp.hi[i],
        VarState::Free => unreachable!("free variable has no bound value"),
    }
}

/// Equality-subproblem backend: minimizes the QP over the free variables
/// with the fixed ones held at their bound values, and solves the analogous
/// correction system `H d = rhs` (d = 0 on fixed variables) used for
/// iterative refinement.
trait EqpBackend<T: Real> {
    fn solve_eqp(&mut self, qp: &QpProblem<T>, state: &[VarState]) -> Option<Vec<T>>;
    fn solve_correction(
        &mut self,
        qp: &QpProblem<T>,
        state: &[VarState],
        rhs: &[T],
    ) -> Option<Vec<T>>;
}

/// Dense backend: reduce to the free block and factor it directly.
struct DenseEqp;

impl DenseEqp {
    fn solve_restricted<T: Real>(
        qp: &QpProblem<T>,
        state: &[VarState],
        b_full: &[T],
        fixed_vals: bool,
    ) -> Option<Vec<T>> {
        let n = qp.n;
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == VarState::Free).collect();
        let mut out = vec![T::zero(); n];
        for i in 0..n {
            if state[i].is_fixed() {
                out[i] = if fixed_vals {
                    fixed_value(qp, i, state[i])
                } else {
                    T::zero()
                };
            }
        }
        if free.is_empty() {
            return Some(out);
        }
        let m = free.len();
        let mut hff = vec![T::zero(); m * m];
        let mut rhs = vec![T::zero(); m];
        for (a, &i) in free.iter().enumerate() {
            let mut b = b_full[i];
            if fixed_vals {
                for j in 0..n {
                    if state[j].is_fixed() {
                        b -= qp.h[i * n + j] * out[j];
                    }
                }
            }
            rhs[a] = b;
            for (bidx, &j) in free.iter().enumerate() {
                hff[a * m + bidx] = qp.h[i * n + j];
            }
        }
        let ch = Cholesky::factor(&hff, m)?;
        ch.solve_in_place(&mut rhs);
        for (a, &i) in free.iter().enumerate() {
            out[i] = rhs[a];
        }
        Some(out)
    }
}

impl<T: Real> EqpBackend<T> for DenseEqp {
    fn solve_eqp(&mut self, qp: &QpProblem<T>, state: &[VarState]) -> Option<Vec<T>> {
        let neg_f: Vec<T> = qp.f.iter().map(|&v| -v).collect();
        Self::solve_restricted(qp, state, &neg_f, true)
    }

    fn solve_correction(
        &mut self,
        qp: &QpProblem<T>,
        state: &[VarState],
        rhs: &[T],
    ) -> Option<Vec<T>> {
        Self::solve_restricted(qp, state, rhs, false)
    }
}

// --- stagewise backend -------------------------------------------------
//
// The same equality subproblem solved by a backward value recursion on the
// two-state model augmented with the previous input, O(N) per solve. The
// condensed Hessian of the subproblem is identical, so iterates match the
// dense backend up to rounding.

type V3<T> = [T; 3];
type M3<T> = [[T; 3]; 3];

fn m3_zero<T: Real>() -> M3<T> {
    [[T::zero(); 3]; 3]
}

fn mv3<T: Real>(m: &M3<T>, v: &V3<T>) -> V3<T> {
    let mut out = [T::zero(); 3];
    for r in 0..3 {
        out[r] = m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2];
    }
    out
}

/// out = F' M F for the sparse F = [[A, 0], [0, 0]] with A embedded 2x2.
fn congruence_f<T: Real>(m: &M3<T>, f: &M3<T>) -> M3<T> {
    // generic dense 3x3 congruence; N is small enough that clarity wins
    let mut mf = m3_zero::<T>();
    for r in 0..3 {
        for c in 0..3 {
            let mut s = T::zero();
            for k in 0..3 {
                s += m[r][k] * f[k][c];
            }
            mf[r][c] = s;
        }
    }
    let mut out = m3_zero::<T>();
    for r in 0..3 {
        for c in 0..3 {
            let mut s = T::zero();
            for k in 0..3 {
                s += f[k][r] * mf[k][c];
            }
            out[r][c] = s;
        }
    }
    out
}

struct StagewiseEqp<T> {
    /// Augmented transition s' = F s + G w + e, state s = [d_um, l_um, p].
    f: M3<T>,
    g: V3<T>,
    e: V3<T>,
    q: T,
    r: T,
    eps: T,
    d_bar: T,
    anchor: T,
    n: usize,
    /// Per-stage feedback gains from the last backward pass.
    gains: Vec<(V3<T>, T)>,
}

impl<T: Real> StagewiseEqp<T> {
    fn new(spec: &OcpSpec<T>, eps: T) -> Self {
        let s = real::<T>(DEPTH_SCALE);
        let mut f = m3_zero::<T>();
        for r in 0..2 {
            for c in 0..2 {
                f[r][c] = spec.a[r][c];
            }
        }
        let g = [s * spec.b[0], s * spec.b[1], T::one()];
        let e = [s * spec.c[0], s * spec.c[1], T::zero()];
        StagewiseEqp {
            f,
            g,
            e,
            q: spec.q_depth,
            r: spec.r_smooth,
            eps,
            d_bar: s * spec.target_depth,
            anchor: spec.u_prev_init,
            n: spec.n_intervals,
            gains: Vec::new(),
        }
    }

    /// Backward Riccati pass with fixed stages substituted, then a forward
    /// rollout. `rho` is an optional extra per-stage linear cost on w;
    /// `homogeneous` drops drift, targets, and the anchor (the correction
    /// system shares the Hessian but nothing affine).
    fn solve_general(
        &mut self,
        qp: &QpProblem<T>,
        state: &[VarState],
        rho: Option<&[T]>,
        homogeneous: bool,
    ) -> Option<Vec<T>> {
        let n = self.n;
        let two = real::<T>(2.0);
        let e = if homogeneous { [T::zero(); 3] } else { self.e };
        let d_bar = if homogeneous { T::zero() } else { self.d_bar };
        let anchor = if homogeneous { T::zero() } else { self.anchor };

        // terminal value: state cost at stage N
        let mut p = m3_zero::<T>();
        p[0][0] = two * self.q;
        let mut qv = [-two * self.q * d_bar, T::zero(), T::zero()];

        self.gains.clear();
        self.gains.resize(n, ([T::zero(); 3], T::zero()));

        for i in (0..n).rev() {
            let pe_q = {
                let pe = mv3(&p, &e);
                [pe[0] + qv[0], pe[1] + qv[1], pe[2] + qv[2]]
            };
            let pg = mv3(&p, &self.g);
            let a_w = two * self.r + self.eps
                + self.g[0] * pg[0]
                + self.g[1] * pg[1]
                + self.g[2] * pg[2];
            if !(a_w > T::zero()) || !a_w.is_finite() {
                return None;
            }
            // m = F' P G + [0, 0, -2R]
            let mut mvec = [T::zero(); 3];
            for r in 0..3 {
                mvec[r] = self.f[0][r] * pg[0] + self.f[1][r] * pg[1] + self.f[2][r] * pg[2];
            }
            mvec[2] -= two * self.r;
            let rho_i = rho.map_or(T::zero(), |v| v[i]);
            let nlin = rho_i + self.g[0] * pe_q[0] + self.g[1] * pe_q[1] + self.g[2] * pe_q[2];

            // C_ss = F' P F + 2R e_p e_p'; c_s = F' (P e + q)
            let mut c_ss = congruence_f(&p, &self.f);
            c_ss[2][2] += two * self.r;
            let mut c_s = [T::zero(); 3];
            for r in 0..3 {
                c_s[r] =
                    self.f[0][r] * pe_q[0] + self.f[1][r] * pe_q[1] + self.f[2][r] * pe_q[2];
            }

            if state[i] == VarState::Free {
                let inv = T::one() / a_w;
                let k_vec = [-mvec[0] * inv, -mvec[1] * inv, -mvec[2] * inv];
                let k_w = -nlin * inv;
                self.gains[i] = (k_vec, k_w);
                for r in 0..3 {
                    for c in 0..3 {
                        c_ss[r][c] -= mvec[r] * mvec[c] * inv;
                    }
                    c_s[r] -= nlin * inv * mvec[r];
                }
            } else {
                let v = if homogeneous {
                    T::zero()
                } else {
                    fixed_value(qp, i, state[i])
                };
                self.gains[i] = ([T::zero(); 3], v);
                for r in 0..3 {
                    c_s[r] += v * mvec[r];
                }
            }

            // state cost at stage i (only for i >= 1; stage 0 is constant)
            if i >= 1 {
                c_ss[0][0] += two * self.q;
                c_s[0] -= two * self.q * d_bar;
            }
            p = c_ss;
            qv = c_s;
        }

        // forward rollout
        let mut s = [T::zero(), T::zero(), anchor];
        let mut u = vec![T::zero(); n];
        for i in 0..n {
            let w = if state[i] == VarState::Free {
                let (k_vec, k_w) = self.gains[i];
                k_vec[0] * s[0] + k_vec[1] * s[1] + k_vec[2] * s[2] + k_w
            } else {
                self.gains[i].1
            };
            u[i] = w;
            let fs = mv3(&self.f, &s);
            s = [
                fs[0] + self.g[0] * w + e[0],
                fs[1] + self.g[1] * w + e[1],
                fs[2] + self.g[2] * w + e[2],
            ];
        }
        Some(u)
    }
}

impl<T: Real> EqpBackend<T> for StagewiseEqp<T> {
    fn solve_eqp(&mut self, qp: &QpProblem<T>, state: &[VarState]) -> Option<Vec<T>> {
        self.solve_general(qp, state, None, false)
    }

    fn solve_correction(
        &mut self,
        qp: &QpProblem<T>,
        state: &[VarState],
        rhs: &[T],
    ) -> Option<Vec<T>> {
        // min 1/2 d'Hd - rhs'd  <=>  stage linear term -rhs on each w
        let rho: Vec<T> = rhs.iter().map(|&v| -v).collect();
        self.solve_general(qp, state, Some(&rho), true)
    }
}

// --- active-set outer loop ----------------------------------------------

fn kkt_residual<T: Real>(qp: &QpProblem<T>, state: &[VarState], g: &[T]) -> T {
    let mut res = T::zero();
    for i in 0..qp.n {
        match state[i] {
            VarState::Pinned => {}
            VarState::Free => res = res.max(g[i].abs()),
            VarState::Lower => res = res.max((-g[i]).max(T::zero())),
            VarState::Upper => res = res.max(g[i].max(T::zero())),
        }
    }
    res
}

fn run_active_set<T: Real, B: EqpBackend<T>>(
    qp: &QpProblem<T>,
    backend: &mut B,
    tol: T,
) -> std::result::Result<QpSolution<T>, SolveError<T>> {
    let n = qp.n;
    let max_changes = 10 * n;
    let max_iters = 10 * n + 100;

    let mut state = vec![VarState::Free; n];
    for i in 0..n {
        if qp.is_pinned(i) {
            state[i] = VarState::Pinned;
        }
    }

    let fail = |msg: String, u: Vec<T>, res: T| SolveError {
        message: msg,
        best_u: u,
        residual: res,
    };

    // start from the clamped unconstrained minimizer over non-pinned vars
    let newton = backend
        .solve_eqp(qp, &state)
        .ok_or_else(|| fail("Hessian not positive definite".to_string(), vec![], T::nan()))?;
    let mut u = newton;
    for i in 0..n {
        if state[i] == VarState::Free {
            if u[i] <= qp.lo[i] {
                u[i] = qp.lo[i];
                state[i] = VarState::Lower;
            } else if u[i] >= qp.hi[i] {
                u[i] = qp.hi[i];
                state[i] = VarState::Upper;
            }
        }
    }

    let mut g = vec![T::zero(); n];
    let mut changes = 0usize;
    let mut iterations = 0usize;
    let mut trace = vec![qp.objective(&u)];
    let feas_slack = {
        let span = qp
            .hi
            .iter()
            .zip(&qp.lo)
            .map(|(&h, &l)| h - l)
            .fold(T::zero(), T::max);
        real::<T>(1e-12) * span.max(T::one())
    };

    loop {
        iterations += 1;
        if iterations > max_iters {
            qp.gradient(&u, &mut g);
            let res = kkt_residual(qp, &state, &g);
            return Err(fail(
                format!("active-set solver exceeded {max_iters} iterations"),
                u,
                res,
            ));
        }

        let mut u_try = backend.solve_eqp(qp, &state).ok_or_else(|| {
            fail(
                "equality subproblem not positive definite".to_string(),
                u.clone(),
                T::nan(),
            )
        })?;

        // one refinement pass against the full-precision gradient
        qp.gradient(&u_try, &mut g);
        let mut rhs = vec![T::zero(); n];
        for i in 0..n {
            if state[i] == VarState::Free {
                rhs[i] = -g[i];
            }
        }
        if let Some(delta) = backend.solve_correction(qp, &state, &rhs) {
            for i in 0..n {
                if state[i] == VarState::Free {
                    u_try[i] += delta[i];
                }
            }
        }

        // feasibility of the subproblem minimizer
        let mut blocking: Option<(usize, VarState, T)> = None;
        for i in 0..n {
            if state[i] != VarState::Free {
                continue;
            }
            if u_try[i] < qp.lo[i] - feas_slack || u_try[i] > qp.hi[i] + feas_slack {
                let (side, bound) = if u_try[i] < qp.lo[i] {
                    (VarState::Lower, qp.lo[i])
                } else {
                    (VarState::Upper, qp.hi[i])
                };
                let denom = u_try[i] - u[i];
                let alpha = if denom.abs() > T::zero() {
                    (bound - u[i]) / denom
                } else {
                    T::zero()
                };
                match blocking {
                    Some((_, _, best)) if alpha >= best => {}
                    _ => blocking = Some((i, side, alpha)),
                }
            }
        }

        if let Some((j, side, alpha)) = blocking {
            // partial step to the first blocking bound
            let alpha = alpha.max(T::zero()).min(T::one());
            for i in 0..n {
                if state[i] == VarState::Free {
                    u[i] = u[i] + alpha * (u_try[i] - u[i]);
                    u[i] = u[i].max(qp.lo[i]).min(qp.hi[i]);
                }
            }
            u[j] = fixed_value(qp, j, side);
            state[j] = side;
            changes += 1;
            trace.push(qp.objective(&u));
            if changes > max_changes {
                qp.gradient(&u, &mut g);
                let res = kkt_residual(qp, &state, &g);
                return Err(fail(
                    format!("active-set solver exceeded {max_changes} working-set changes"),
                    u,
                    res,
                ));
            }
            continue;
        }

        // accept the subproblem minimizer (snap round-off onto the box)
        for i in 0..n {
            if state[i] == VarState::Free {
                u[i] = u_try[i].max(qp.lo[i]).min(qp.hi[i]);
            }
        }
        trace.push(qp.objective(&u));
        qp.gradient(&u, &mut g);

        // multiplier signs at active bounds; release the worst violation
        let mut worst: Option<(usize, T)> = None;
        for i in 0..n {
            let viol = match state[i] {
                VarState::Lower => -g[i],
                VarState::Upper => g[i],
                _ => continue,
            };
            if viol > tol {
                match worst {
                    Some((_, best)) if viol <= best => {}
                    _ => worst = Some((i, viol)),
                }
            }
        }
        match worst {
            Some((j, _)) => {
                state[j] = VarState::Free;
                changes += 1;
                if changes > max_changes {
                    let res = kkt_residual(qp, &state, &g);
                    return Err(fail(
                        format!(
                            "active-set solver exceeded {max_changes} working-set changes"
                        ),
                        u,
                        res,
                    ));
                }
            }
            None => {
                let res = kkt_residual(qp, &state, &g);
                if res > tol {
                    return Err(fail(
                        format!("KKT residual {res} above tolerance {tol}"),
                        u,
                        res,
                    ));
                }
                let active_set = (0..n)
                    .filter_map(|i| match state[i] {
                        VarState::Lower => Some((i, BoundSide::Lower)),
                        VarState::Upper => Some((i, BoundSide::Upper)),
                        VarState::Pinned => Some((i, BoundSide::Pinned)),
                        VarState::Free => None,
                    })
                    .collect();
                return Ok(QpSolution {
                    objective: qp.objective(&u),
                    u_star: u,
                    kkt_residual: res,
                    iterations,
                    active_set,
                    objective_trace: trace,
                });
            }
        }
    }
}

/// Solve a condensed box QP with the dense active-set method.
pub fn solve_box_qp<T: Real>(
    qp: &QpProblem<T>,
    tol: T,
) -> std::result::Result<QpSolution<T>, SolveError<T>> {
    run_active_set(qp, &mut DenseEqp, tol)
}

/// Build and solve one layer's OCP.
///
/// The condensed problem is returned alongside the solution so callers can
/// verify the KKT conditions independently; the equality subproblems are
/// solved by the stagewise recursion, which keeps the whole build+solve at
/// O(N^2).
pub fn solve_ocp<T: Real>(
    spec: &OcpSpec<T>,
    tol: T,
) -> Result<(QpProblem<T>, QpSolution<T>)> {
    let qp = condense(spec)?;
    let mut backend = StagewiseEqp::new(spec, qp.eps);
    let sol = run_active_set(&qp, &mut backend, tol)?;
    Ok((qp, sol))
}

// expose the internals the tests need to cross-check the two backends
#[cfg(test)]
pub(crate) fn solve_ocp_dense<T: Real>(
    spec: &OcpSpec<T>,
    tol: T,
) -> Result<(QpProblem<T>, QpSolution<T>)> {
    let qp = condense(spec)?;
    let sol = solve_box_qp(&qp, tol)?;
    Ok((qp, sol))
}
