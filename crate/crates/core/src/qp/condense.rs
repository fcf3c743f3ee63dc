use crate::error::Result;
use crate::qp::{OcpSpec, QpProblem, DEPTH_SCALE};
use crate::scalar::{real, Real};

/// Depth impulse response in um/W: `h[d] = 1e6 * e_d' A^d B`.
pub(crate) fn depth_impulse<T: Real>(spec: &OcpSpec<T>) -> Vec<T> {
    let scale = real::<T>(DEPTH_SCALE);
    let n = spec.n_intervals;
    let mut w = spec.b;
    let mut h = Vec::with_capacity(n);
    for _ in 0..n {
        h.push(scale * w[0]);
        w = [
            spec.a[0][0] * w[0] + spec.a[0][1] * w[1],
            spec.a[1][0] * w[0] + spec.a[1][1] * w[1],
        ];
    }
    h
}

/// Input-free depth drift in um: `w[i] = 1e6 * e_d' sum_{d<i} A^d c`
/// for i = 1..=N (index 0 of the result corresponds to i = 1).
pub(crate) fn depth_drift<T: Real>(spec: &OcpSpec<T>) -> Vec<T> {
    let scale = real::<T>(DEPTH_SCALE);
    let n = spec.n_intervals;
    let mut acc = [T::zero(); 2];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        acc = [
            spec.a[0][0] * acc[0] + spec.a[0][1] * acc[1] + spec.c[0],
            spec.a[1][0] * acc[0] + spec.a[1][1] * acc[1] + spec.c[1],
        ];
        out.push(scale * acc[0]);
    }
    out
}

/// Eliminate the states by forward substitution and expand the cost into
/// the condensed box QP over the N powers.
///
/// The tracking block `2Q G'G` is assembled per diagonal through prefix
/// sums of the impulse-response autocorrelation, keeping the build at
/// O(N^2); the increment penalty adds a tridiagonal band anchored at
/// `u_prev_init`, and a Tikhonov shift `1e-8 trace(H)/N` guarantees strict
/// convexity for degenerate models.
pub fn condense<T: Real>(spec: &OcpSpec<T>) -> Result<QpProblem<T>> {
    spec.validate()?;
    let n = spec.n_intervals;
    let q = spec.q_depth;
    let r = spec.r_smooth;
    let two = real::<T>(2.0);
    let d_bar = real::<T>(DEPTH_SCALE) * spec.target_depth;

    let h_resp = depth_impulse(spec);
    let drift = depth_drift(spec);

    let mut hmat = vec![T::zero(); n * n];

    // tracking term, diagonal by diagonal:
    // H[j][j+m] = 2Q sum_{d=0}^{N-1-(j+m)} h[d+m] h[d]
    let mut pref = vec![T::zero(); n];
    for m in 0..n {
        let len = n - m;
        let mut acc = T::zero();
        for d in 0..len {
            acc += h_resp[d + m] * h_resp[d];
            pref[d] = acc;
        }
        for j in 0..len {
            let k = j + m;
            let tail = n - 1 - k;
            let v = two * q * pref[tail];
            hmat[j * n + k] = v;
            hmat[k * n + j] = v;
        }
    }

    // increment penalty: (u_0 - a)^2 + sum (u_i - u_{i-1})^2
    hmat[0] += two * r;
    for i in 1..n {
        hmat[i * n + i] += two * r;
        hmat[(i - 1) * n + (i - 1)] += two * r;
        hmat[i * n + (i - 1)] -= two * r;
        hmat[(i - 1) * n + i] -= two * r;
    }

    // linear term
    let mut f = vec![T::zero(); n];
    for j in 0..n {
        let mut s = T::zero();
        for i in j..n {
            // depth index i+1, impulse lag (i+1)-1-j = i-j
            s += (drift[i] - d_bar) * h_resp[i - j];
        }
        f[j] = two * q * s;
    }
    f[0] -= two * r * spec.u_prev_init;

    // constant term: i=0 depth cost + drift costs + anchor
    let mut c0 = q * d_bar * d_bar + r * spec.u_prev_init * spec.u_prev_init;
    for i in 0..n {
        let e = drift[i] - d_bar;
        c0 += q * e * e;
    }

    // Tikhonov shift for strict convexity under degenerate models
    let mut trace = T::zero();
    for i in 0..n {
        trace += hmat[i * n + i];
    }
    let mut eps = real::<T>(1e-8) * trace / real::<T>(n as f64);
    if !(eps > T::zero()) {
        eps = real::<T>(1e-8);
    }
    for i in 0..n {
        hmat[i * n + i] += eps;
    }

    let mut lo = vec![T::zero(); n];
    let mut hi = vec![T::zero(); n];
    for i in 0..n {
        if spec.xi[i] {
            lo[i] = spec.u_min;
            hi[i] = spec.u_max;
        }
    }

    Ok(QpProblem {
        n,
        h: hmat,
        f,
        lo,
        hi,
        c0,
        eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysid::predict_with;

    fn spec(n: usize) -> OcpSpec<f64> {
        OcpSpec {
            target_depth: 30.0e-6,
            q_depth: 1.0,
            r_smooth: 0.05,
            n_intervals: n,
            u_min: 100.0,
            u_max: 150.0,
            xi: vec![true; n],
            a: [[0.55, 0.02], [0.08, 0.6]],
            b: [2.1e-7, 4.0e-7],
            c: [4.5e-6, 9.0e-6],
            u_prev_init: 100.0,
        }
    }

    /// Direct OCP cost by simulating the model, plus the regularizer.
    fn simulated_cost(s: &OcpSpec<f64>, eps: f64, u: &[f64]) -> f64 {
        let d_bar = s.target_depth * 1.0e6;
        let states = predict_with(&s.a, &s.b, &s.c, u);
        let mut j = s.q_depth * d_bar * d_bar; // i = 0, no melt pool yet
        for st in &states {
            let e = st.depth * 1.0e6 - d_bar;
            j += s.q_depth * e * e;
        }
        let mut prev = s.u_prev_init;
        for &ui in u {
            j += s.r_smooth * (ui - prev) * (ui - prev);
            prev = ui;
        }
        for &ui in u {
            j += 0.5 * eps * ui * ui;
        }
        j
    }

    #[test]
    fn condensed_objective_matches_simulated_cost() {
        let s = spec(12);
        let qp = condense(&s).unwrap();
        qp.validate().unwrap();
        for k in 0..5 {
            let u: Vec<f64> = (0..12)
                .map(|i| 100.0 + ((i * 13 + k * 29) % 51) as f64)
                .collect();
            let direct = simulated_cost(&s, qp.eps, &u);
            let quad = qp.objective(&u);
            assert!(
                (quad - direct).abs() < 1e-9 * direct.abs().max(1.0),
                "condensed {quad} vs simulated {direct}"
            );
        }
    }

    #[test]
    fn tracking_block_matches_explicit_gram_matrix() {
        let s = spec(9);
        let qp = condense(&s).unwrap();
        let h_resp = depth_impulse(&s);
        let n = 9;
        // explicit G: row i-1 covers depth index i, G[r][j] = h[r-j]
        let mut g = vec![vec![0.0; n]; n];
        for r in 0..n {
            for j in 0..=r {
                g[r][j] = h_resp[r - j];
            }
        }
        for j in 0..n {
            for k in 0..n {
                let mut acc = 0.0;
                for r in 0..n {
                    acc += g[r][j] * g[r][k];
                }
                // each increment term touching u_j adds 2R to its diagonal:
                // the anchor or left difference always, the right difference
                // only for j < n-1
                let mut expected = 2.0 * s.q_depth * acc;
                if j == k {
                    expected += 2.0 * s.r_smooth * if j + 1 < n { 2.0 } else { 1.0 };
                    expected += qp.eps;
                } else if j.abs_diff(k) == 1 {
                    expected -= 2.0 * s.r_smooth;
                }
                let got = qp.h[j * n + k];
                assert!(
                    (got - expected).abs() < 1e-9 * expected.abs().max(1.0),
                    "H[{j}][{k}] got {got} expected {expected}"
                );
            }
        }
    }

    #[test]
    fn single_interval_has_closed_form_vertex() {
        let mut s = spec(1);
        s.u_prev_init = 100.0;
        let qp = condense(&s).unwrap();
        // J(u) = q (h0 u + w1 - dbar)^2 + r (u - a)^2 + eps/2 u^2 + const
        let h0 = depth_impulse(&s)[0];
        let w1 = depth_drift(&s)[0];
        let d_bar = 30.0;
        let h_expected = 2.0 * s.q_depth * h0 * h0 + 2.0 * s.r_smooth + qp.eps;
        let f_expected = 2.0 * s.q_depth * h0 * (w1 - d_bar) - 2.0 * s.r_smooth * 100.0;
        assert!((qp.h[0] - h_expected).abs() < 1e-12 * h_expected.abs());
        assert!((qp.f[0] - f_expected).abs() < 1e-12 * f_expected.abs());
        // vertex of the parabola
        let vertex = -qp.f[0] / qp.h[0];
        let clipped = vertex.clamp(100.0, 150.0);
        assert!(clipped.is_finite());
    }

    #[test]
    fn masked_intervals_are_pinned_to_zero() {
        let mut s = spec(6);
        s.xi = vec![false, true, true, false, true, false];
        let qp = condense(&s).unwrap();
        for i in 0..6 {
            if s.xi[i] {
                assert_eq!((qp.lo[i], qp.hi[i]), (100.0, 150.0));
                assert!(!qp.is_pinned(i));
            } else {
                assert_eq!((qp.lo[i], qp.hi[i]), (0.0, 0.0));
                assert!(qp.is_pinned(i));
            }
        }
    }

    #[test]
    fn degenerate_model_gets_regularization_floor() {
        let mut s = spec(4);
        s.r_smooth = 0.0;
        s.b = [0.0, 3.0e-7]; // depth row of B is zero
        s.a = [[0.0, 0.0], [0.0, 0.5]];
        let qp = condense(&s).unwrap();
        assert!(qp.eps >= 1e-8);
        // Hessian is eps I: still solvable, strictly convex
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { qp.eps } else { 0.0 };
                assert!((qp.h[i * 4 + j] - expected).abs() < 1e-20);
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = spec(4);
        s.q_depth = 0.0;
        assert!(condense(&s).is_err());
        let mut s = spec(4);
        s.xi = vec![true; 3];
        assert!(condense(&s).is_err());
        let mut s = spec(4);
        s.a[0][0] = f64::NAN;
        assert!(condense(&s).is_err());
    }
}
