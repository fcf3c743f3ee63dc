use crate::error::{Error, Result};
use crate::linalg::{lstsq_qr, Mat};
use crate::scalar::{real, Real};
use crate::sysid::dataset::LayerRecord;
use crate::sysid::model::{LpvKnot, LpvModel};

/// Fitting options. Records are aggregated into temperature bins of
/// `bin_width`; each bin contributes one knot at its data-mean theta.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions<T> {
    pub bin_width: T,
    pub rank_tol: T,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        FitOptions {
            bin_width: real(50.0),
            rank_tol: real(1e-10),
        }
    }
}

struct Bin<'a, T> {
    records: Vec<&'a LayerRecord<T>>,
    theta_lo: T,
    theta_hi: T,
}

impl<'a, T: Real> Bin<'a, T> {
    fn mean_theta(&self) -> T {
        let sum: T = self.records.iter().map(|r| r.theta).sum();
        sum / real::<T>(self.records.len() as f64)
    }

    fn rows(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.states.len().saturating_sub(1))
            .sum()
    }
}

/// Ordinary least squares for one knot: regressors `[d_i, l_i, u_{i+1}, 1]`
/// against targets `[d_{i+1}, l_{i+1}]`, stacked over the bin's records.
/// The input pairing follows the sampling convention: between consecutive
/// end-of-interval samples the acting power is the later interval's.
fn fit_bin<T: Real>(bin: &Bin<T>, rank_tol: T) -> Option<LpvKnot<T>> {
    let rows = bin.rows();
    if rows < 4 {
        return None;
    }
    let mut a = Mat::zeros(rows, 4);
    let mut b = Mat::zeros(rows, 2);
    let mut r_idx = 0;
    for rec in &bin.records {
        let n = rec.states.len();
        for i in 0..n.saturating_sub(1) {
            *a.at_mut(r_idx, 0) = rec.states[i].depth;
            *a.at_mut(r_idx, 1) = rec.states[i].length;
            *a.at_mut(r_idx, 2) = rec.inputs[i + 1];
            *a.at_mut(r_idx, 3) = T::one();
            *b.at_mut(r_idx, 0) = rec.states[i + 1].depth;
            *b.at_mut(r_idx, 1) = rec.states[i + 1].length;
            r_idx += 1;
        }
    }
    let x = lstsq_qr(&a, &b, rank_tol)?;
    Some(LpvKnot {
        theta: bin.mean_theta(),
        a: [
            [x.at(0, 0), x.at(1, 0)],
            [x.at(0, 1), x.at(1, 1)],
        ],
        b: [x.at(2, 0), x.at(2, 1)],
        c: [x.at(3, 0), x.at(3, 1)],
    })
}

/// Fit the temperature-scheduled model by binned least squares.
///
/// Rank-deficient bins are merged into their left neighbour (right for the
/// first bin) and refit; a deficiency that survives merging down to a
/// single bin is reported with the offending temperature range.
pub fn fit_lpv<T: Real>(records: &[LayerRecord<T>], opts: &FitOptions<T>) -> Result<LpvModel<T>> {
    if records.len() < 2 {
        return Err(Error::Fit(format!(
            "need at least 2 layer records, got {}",
            records.len()
        )));
    }
    for r in records {
        if r.states.len() != r.inputs.len() {
            return Err(Error::Fit(format!(
                "record ({}, {}) has mismatched state/input lengths",
                r.print_id, r.layer_id
            )));
        }
        if r.states.len() < 2 {
            return Err(Error::Fit(format!(
                "record ({}, {}) too short to form regression rows",
                r.print_id, r.layer_id
            )));
        }
    }
    if !(opts.bin_width > T::zero()) {
        return Err(Error::Fit("bin width must be positive".to_string()));
    }

    let theta_min = records
        .iter()
        .map(|r| r.theta)
        .fold(T::infinity(), T::min);
    let width = opts.bin_width;
    let bin_index = |theta: T| -> usize {
        ((theta - theta_min) / width).to_f64().unwrap().floor() as usize
    };

    let max_bin = records.iter().map(|r| bin_index(r.theta)).max().unwrap();
    let mut bins: Vec<Bin<T>> = Vec::new();
    for k in 0..=max_bin {
        let members: Vec<&LayerRecord<T>> = records
            .iter()
            .filter(|r| bin_index(r.theta) == k)
            .collect();
        if members.is_empty() {
            continue;
        }
        bins.push(Bin {
            records: members,
            theta_lo: theta_min + real::<T>(k as f64) * width,
            theta_hi: theta_min + real::<T>((k + 1) as f64) * width,
        });
    }

    // Fit each bin; merge rank-deficient bins leftwards until they resolve.
    let mut knots: Vec<LpvKnot<T>> = Vec::new();
    let mut idx = 0;
    while idx < bins.len() {
        match fit_bin(&bins[idx], opts.rank_tol) {
            Some(k) => {
                knots.push(k);
                idx += 1;
            }
            None => {
                if idx > 0 {
                    // merge into the left neighbour and refit it
                    let bad = bins.remove(idx);
                    let left = &mut bins[idx - 1];
                    left.records.extend(bad.records);
                    left.theta_hi = bad.theta_hi;
                    knots.pop();
                    idx -= 1;
                } else if bins.len() > 1 {
                    // first bin deficient: pull the next one in
                    let next = bins.remove(1);
                    bins[0].records.extend(next.records);
                    bins[0].theta_hi = next.theta_hi;
                } else {
                    return Err(Error::Fit(format!(
                        "rank-deficient regression in temperature bin [{}, {}) K even after merging",
                        bins[idx].theta_lo, bins[idx].theta_hi
                    )));
                }
            }
        }
    }

    LpvModel::new(knots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysid::model::{predict_with, rmse, Mat2, Vec2};
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};

    const A_TRUE: Mat2<f64> = [[0.8, 0.05], [0.1, 0.7]];
    const B_TRUE: Vec2<f64> = [3.0e-7, 5.0e-7];
    const C_TRUE: Vec2<f64> = [1.0e-6, 2.0e-6];

    fn random_inputs(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| 100.0 + 50.0 * ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64))
            .collect()
    }

    fn synthetic_record(print_id: usize, theta: f64, seed: u64) -> LayerRecord<f64> {
        let inputs = random_inputs(seed, 40);
        let states = predict_with(&A_TRUE, &B_TRUE, &C_TRUE, &inputs);
        LayerRecord {
            print_id,
            layer_id: 0,
            theta,
            inputs,
            states,
        }
    }

    #[test]
    fn exact_linear_data_is_recovered() {
        let records: Vec<_> = (0..3)
            .map(|p| synthetic_record(p, 500.0, 100 + p as u64))
            .collect();
        let model = fit_lpv(&records, &FitOptions::default()).unwrap();
        assert_eq!(model.knots().len(), 1);
        let k = &model.knots()[0];
        for r in 0..2 {
            for c in 0..2 {
                assert!((k.a[r][c] - A_TRUE[r][c]).abs() < 1e-8, "A[{r}][{c}]");
            }
            assert!((k.b[r] - B_TRUE[r]).abs() < 1e-8 * B_TRUE[r].abs().max(1e-9));
            assert!((k.c[r] - C_TRUE[r]).abs() < 1e-8 * C_TRUE[r].abs().max(1e-9));
        }
    }

    #[test]
    fn all_equal_theta_gives_single_knot() {
        let records: Vec<_> = (0..4)
            .map(|p| synthetic_record(p, 400.0, 7 + p as u64))
            .collect();
        let model = fit_lpv(&records, &FitOptions::default()).unwrap();
        assert_eq!(model.knots().len(), 1);
        assert_eq!(model.evaluate(100.0).a, model.evaluate(900.0).a);
    }

    #[test]
    fn spread_thetas_give_multiple_sorted_knots() {
        let mut records = Vec::new();
        for (i, theta) in [300.0, 310.0, 420.0, 430.0, 555.0, 560.0].iter().enumerate() {
            records.push(synthetic_record(i, *theta, 50 + i as u64));
        }
        let model = fit_lpv(&records, &FitOptions::default()).unwrap();
        assert_eq!(model.knots().len(), 3);
        let thetas: Vec<f64> = model.knots().iter().map(|k| k.theta).collect();
        assert!(thetas.windows(2).all(|w| w[1] > w[0]));
        assert!((thetas[0] - 305.0).abs() < 1e-9);
    }

    #[test]
    fn constant_input_bin_merges_into_neighbour() {
        // the high-theta bin has constant input (collinear with intercept)
        let mut records = vec![
            synthetic_record(0, 300.0, 1),
            synthetic_record(1, 305.0, 2),
        ];
        let inputs = vec![125.0; 40];
        let states = predict_with(&A_TRUE, &B_TRUE, &C_TRUE, &inputs);
        records.push(LayerRecord {
            print_id: 2,
            layer_id: 0,
            theta: 400.0,
            inputs,
            states,
        });
        let model = fit_lpv(&records, &FitOptions::default()).unwrap();
        // deficient bin merged: single knot spanning all records
        assert_eq!(model.knots().len(), 1);
    }

    #[test]
    fn fully_degenerate_data_reports_the_bin() {
        let inputs = vec![125.0; 40];
        let states = predict_with(&A_TRUE, &B_TRUE, &C_TRUE, &inputs);
        let rec = LayerRecord {
            print_id: 0,
            layer_id: 0,
            theta: 300.0,
            inputs,
            states,
        };
        let mut rec2 = rec.clone();
        rec2.print_id = 1;
        let err = fit_lpv(&[rec, rec2], &FitOptions::default()).unwrap_err();
        match err {
            Error::Fit(msg) => assert!(msg.contains("bin"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fit_is_a_stationary_point_of_the_residual() {
        let records: Vec<_> = (0..2)
            .map(|p| synthetic_record(p, 500.0, 900 + p as u64))
            .collect();
        // corrupt targets a little so the optimum is interior, not exact
        let mut noisy = records.clone();
        for (ri, r) in noisy.iter_mut().enumerate() {
            for (si, s) in r.states.iter_mut().enumerate() {
                let bump = ((ri * 41 + si * 7) % 13) as f64 / 13.0 - 0.5;
                s.depth += 1.0e-7 * bump;
            }
        }
        let model = fit_lpv(&noisy, &FitOptions::default()).unwrap();
        let k = model.knots()[0];

        let ssr = |a: &Mat2<f64>, b: &Vec2<f64>, c: &Vec2<f64>| -> f64 {
            let mut s = 0.0;
            for r in &noisy {
                for i in 0..r.states.len() - 1 {
                    let x = [r.states[i].depth, r.states[i].length];
                    let u = r.inputs[i + 1];
                    for ch in 0..2 {
                        let pred = a[ch][0] * x[0] + a[ch][1] * x[1] + b[ch] * u + c[ch];
                        let meas = if ch == 0 {
                            r.states[i + 1].depth
                        } else {
                            r.states[i + 1].length
                        };
                        s += (pred - meas) * (pred - meas);
                    }
                }
            }
            s
        };

        let base = ssr(&k.a, &k.b, &k.c);
        let eps = 1e-6;
        for ch in 0..2 {
            for j in 0..2 {
                let mut a = k.a;
                a[ch][j] += eps * (1.0 + k.a[ch][j].abs());
                assert!(ssr(&a, &k.b, &k.c) >= base);
                a[ch][j] -= 2.0 * eps * (1.0 + k.a[ch][j].abs());
                assert!(ssr(&a, &k.b, &k.c) >= base);
            }
            let mut b = k.b;
            b[ch] += eps * (1.0 + k.b[ch].abs());
            assert!(ssr(&k.a, &b, &k.c) >= base);
            let mut c = k.c;
            c[ch] += eps * (1.0 + k.c[ch].abs());
            assert!(ssr(&k.a, &k.b, &c) >= base);
        }
    }

    #[test]
    fn shuffled_inputs_fit_worse_than_true_pairing() {
        let records: Vec<_> = (0..3)
            .map(|p| synthetic_record(p, 500.0, 300 + p as u64))
            .collect();
        let model = fit_lpv(&records, &FitOptions::default()).unwrap();

        let mut corrupted = records.clone();
        for r in &mut corrupted {
            r.inputs.rotate_left(17); // deterministic shuffle
        }
        let model_bad = fit_lpv(&corrupted, &FitOptions::default()).unwrap();

        let depth_rmse = |m: &LpvModel<f64>, recs: &[LayerRecord<f64>]| -> f64 {
            let mut preds = Vec::new();
            let mut meas = Vec::new();
            for r in recs {
                preds.extend(m.predict_trajectory(r.theta, &r.inputs));
                meas.extend(r.states.iter().copied());
            }
            rmse(&preds, &meas).unwrap().0
        };
        let good = depth_rmse(&model, &records);
        let bad = depth_rmse(&model_bad, &corrupted);
        assert!(
            good < bad,
            "true pairing rmse {good} should beat shuffled {bad}"
        );
    }

    #[test]
    fn too_few_records_is_an_error() {
        let rec = synthetic_record(0, 300.0, 1);
        assert!(fit_lpv(&[rec], &FitOptions::default()).is_err());
    }

    #[test]
    fn fit_is_deterministic() {
        let records: Vec<_> = (0..4)
            .map(|p| synthetic_record(p, 350.0 + 40.0 * p as f64, p as u64))
            .collect();
        let a = fit_lpv(&records, &FitOptions::default()).unwrap();
        let b = fit_lpv(&records, &FitOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn depth_rmse_near_zero_on_exact_data() {
        let records: Vec<_> = (0..3)
            .map(|p| synthetic_record(p, 500.0, 100 + p as u64))
            .collect();
        let model = fit_lpv(&records, &FitOptions::default()).unwrap();
        let mut preds = Vec::new();
        let mut meas = Vec::new();
        for r in &records {
            preds.extend(model.predict_trajectory(r.theta, &r.inputs));
            meas.extend(r.states.iter().copied());
        }
        let (d, l) = rmse(&preds, &meas).unwrap();
        let scale = meas.iter().map(|s| s.depth.abs()).fold(0.0, f64::max);
        assert!(d < 1e-8 * scale, "depth rmse {d} vs scale {scale}");
        assert!(l < 1e-7 * scale);
    }
}
