use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::MeltPoolState;
use crate::scalar::{real, Real};

/// 2x2 matrix stored row-major as nested arrays.
pub type Mat2<T> = [[T; 2]; 2];
/// Length-2 column vector.
pub type Vec2<T> = [T; 2];

/// One knot of the temperature-scheduled model: the linear one-step map
/// `x' = A x + B u + c` valid at mean surface temperature `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpvKnot<T> {
    pub theta: T,
    pub a: Mat2<T>,
    pub b: Vec2<T>,
    pub c: Vec2<T>,
}

/// Model matrices interpolated at a query temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluatedModel<T> {
    pub a: Mat2<T>,
    pub b: Vec2<T>,
    pub c: Vec2<T>,
    /// Set when the query fell outside the knot domain and was clamped.
    pub clamped: bool,
}

/// Temperature-scheduled melt-pool model: a sorted grid of knots with
/// componentwise linear interpolation between them.
#[derive(Debug, Clone, PartialEq)]
pub struct LpvModel<T> {
    knots: Vec<LpvKnot<T>>,
}

impl<T: Real> LpvModel<T> {
    pub fn new(knots: Vec<LpvKnot<T>>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Fit("model needs at least one knot".to_string()));
        }
        for w in knots.windows(2) {
            if !(w[1].theta > w[0].theta) {
                return Err(Error::Fit(
                    "knot temperatures must be strictly increasing".to_string(),
                ));
            }
        }
        for k in &knots {
            let finite = k.theta.is_finite()
                && k.a.iter().flatten().all(|v| v.is_finite())
                && k.b.iter().all(|v| v.is_finite())
                && k.c.iter().all(|v| v.is_finite());
            if !finite {
                return Err(Error::Fit("knot contains non-finite entries".to_string()));
            }
        }
        Ok(LpvModel { knots })
    }

    pub fn knots(&self) -> &[LpvKnot<T>] {
        &self.knots
    }

    pub fn theta_min(&self) -> T {
        self.knots.first().unwrap().theta
    }

    pub fn theta_max(&self) -> T {
        self.knots.last().unwrap().theta
    }

    /// Componentwise linear interpolation at `theta`; queries outside the
    /// knot domain clamp to the boundary knot and flag it.
    pub fn evaluate(&self, theta: T) -> EvaluatedModel<T> {
        let first = self.knots.first().unwrap();
        let last = self.knots.last().unwrap();
        if theta <= first.theta {
            return EvaluatedModel {
                a: first.a,
                b: first.b,
                c: first.c,
                clamped: theta < first.theta,
            };
        }
        if theta >= last.theta {
            return EvaluatedModel {
                a: last.a,
                b: last.b,
                c: last.c,
                clamped: theta > last.theta,
            };
        }
        // first knot with theta >= query brackets the interval
        let hi = self
            .knots
            .partition_point(|k| k.theta < theta);
        let (lo_k, hi_k) = (&self.knots[hi - 1], &self.knots[hi]);
        let w = (theta - lo_k.theta) / (hi_k.theta - lo_k.theta);
        let lerp = |a: T, b: T| a + (b - a) * w;
        let mut a = [[T::zero(); 2]; 2];
        let mut b = [T::zero(); 2];
        let mut c = [T::zero(); 2];
        for r in 0..2 {
            for cidx in 0..2 {
                a[r][cidx] = lerp(lo_k.a[r][cidx], hi_k.a[r][cidx]);
            }
            b[r] = lerp(lo_k.b[r], hi_k.b[r]);
            c[r] = lerp(lo_k.c[r], hi_k.c[r]);
        }
        EvaluatedModel {
            a,
            b,
            c,
            clamped: false,
        }
    }

    /// Roll the one-step model out from a zero melt pool under `inputs`,
    /// with matrices frozen at `theta`. Output i corresponds to the state
    /// at the end of interval i.
    pub fn predict_trajectory(&self, theta: T, inputs: &[T]) -> Vec<MeltPoolState<T>> {
        let m = self.evaluate(theta);
        predict_with(&m.a, &m.b, &m.c, inputs)
    }
}

/// Rollout with explicit matrices; `x0 = 0`.
pub fn predict_with<T: Real>(
    a: &Mat2<T>,
    b: &Vec2<T>,
    c: &Vec2<T>,
    inputs: &[T],
) -> Vec<MeltPoolState<T>> {
    let mut x = [T::zero(); 2];
    let mut out = Vec::with_capacity(inputs.len());
    for &u in inputs {
        let next = [
            a[0][0] * x[0] + a[0][1] * x[1] + b[0] * u + c[0],
            a[1][0] * x[0] + a[1][1] * x[1] + b[1] * u + c[1],
        ];
        x = next;
        out.push(MeltPoolState {
            depth: x[0],
            length: x[1],
        });
    }
    out
}

/// Root-mean-square error per channel over paired melt-pool sequences.
pub fn rmse<T: Real>(
    predicted: &[MeltPoolState<T>],
    measured: &[MeltPoolState<T>],
) -> Result<(T, T)> {
    if predicted.len() != measured.len() {
        return Err(Error::Domain(format!(
            "rmse length mismatch: {} vs {}",
            predicted.len(),
            measured.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::Domain("rmse of empty sequences".to_string()));
    }
    let mut sd = T::zero();
    let mut sl = T::zero();
    for (p, m) in predicted.iter().zip(measured) {
        let ed = p.depth - m.depth;
        let el = p.length - m.length;
        sd += ed * ed;
        sl += el * el;
    }
    let n = real::<T>(predicted.len() as f64);
    Ok(((sd / n).sqrt(), (sl / n).sqrt()))
}

// --- model file (self-describing JSON, schema versioned) ---

pub const MODEL_SCHEMA: &str = "lpv-model/1";

#[derive(Serialize, Deserialize)]
struct KnotFile {
    theta_k: f64,
    /// Row-major 2x2 state matrix.
    a: [f64; 4],
    b: [f64; 2],
    c: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema: String,
    theta_domain_k: [f64; 2],
    knots: Vec<KnotFile>,
}

impl<T: Real> LpvModel<T> {
    pub fn to_json(&self) -> String {
        let f = ModelFile {
            schema: MODEL_SCHEMA.to_string(),
            theta_domain_k: [
                self.theta_min().to_f64().unwrap(),
                self.theta_max().to_f64().unwrap(),
            ],
            knots: self
                .knots
                .iter()
                .map(|k| KnotFile {
                    theta_k: k.theta.to_f64().unwrap(),
                    a: [
                        k.a[0][0].to_f64().unwrap(),
                        k.a[0][1].to_f64().unwrap(),
                        k.a[1][0].to_f64().unwrap(),
                        k.a[1][1].to_f64().unwrap(),
                    ],
                    b: [k.b[0].to_f64().unwrap(), k.b[1].to_f64().unwrap()],
                    c: [k.c[0].to_f64().unwrap(), k.c[1].to_f64().unwrap()],
                })
                .collect(),
        };
        serde_json::to_string_pretty(&f).expect("model serialization cannot fail") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("model file: {e}")))?;
        if f.schema != MODEL_SCHEMA {
            return Err(Error::Parse(format!(
                "unsupported model schema '{}', expected '{MODEL_SCHEMA}'",
                f.schema
            )));
        }
        let knots = f
            .knots
            .iter()
            .map(|k| LpvKnot {
                theta: real::<T>(k.theta_k),
                a: [
                    [real(k.a[0]), real(k.a[1])],
                    [real(k.a[2]), real(k.a[3])],
                ],
                b: [real(k.b[0]), real(k.b[1])],
                c: [real(k.c[0]), real(k.c[1])],
            })
            .collect();
        LpvModel::new(knots)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn knot(theta: f64, scale: f64) -> LpvKnot<f64> {
        LpvKnot {
            theta,
            a: [[0.5 * scale, 0.1], [0.0, 0.4 * scale]],
            b: [1.0e-7 * scale, 2.0e-7],
            c: [1.0e-6, 2.0e-6 * scale],
        }
    }

    #[test]
    fn evaluate_reproduces_knots_exactly() {
        let m = LpvModel::new(vec![knot(300.0, 1.0), knot(500.0, 2.0)]).unwrap();
        let e = m.evaluate(300.0);
        assert_eq!(e.a, knot(300.0, 1.0).a);
        assert!(!e.clamped);
        let e = m.evaluate(500.0);
        assert_eq!(e.b, knot(500.0, 2.0).b);
    }

    #[test]
    fn midpoint_is_elementwise_average() {
        let m = LpvModel::new(vec![knot(300.0, 1.0), knot(500.0, 2.0)]).unwrap();
        let e = m.evaluate(400.0);
        for r in 0..2 {
            for c in 0..2 {
                let avg = 0.5 * (knot(300.0, 1.0).a[r][c] + knot(500.0, 2.0).a[r][c]);
                assert!((e.a[r][c] - avg).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn out_of_domain_clamps_with_warning() {
        let m = LpvModel::new(vec![knot(300.0, 1.0), knot(500.0, 2.0)]).unwrap();
        let e = m.evaluate(900.0);
        assert!(e.clamped);
        assert_eq!(e.a, knot(500.0, 2.0).a);
        let e = m.evaluate(100.0);
        assert!(e.clamped);
        assert_eq!(e.a, knot(300.0, 1.0).a);
    }

    #[test]
    fn single_knot_model_is_theta_independent() {
        let m = LpvModel::new(vec![knot(400.0, 1.0)]).unwrap();
        assert_eq!(m.evaluate(100.0).a, m.evaluate(1000.0).a);
    }

    #[test]
    fn non_increasing_knots_rejected() {
        assert!(LpvModel::new(vec![knot(400.0, 1.0), knot(400.0, 2.0)]).is_err());
    }

    #[test]
    fn constant_input_rollout_matches_hand_calculation() {
        // A = 0, B = [1e-7; 0], c = 0, u = 100 -> depth 1e-5 from step 1 on
        let k: LpvKnot<f64> = LpvKnot {
            theta: 300.0,
            a: [[0.0, 0.0], [0.0, 0.0]],
            b: [1.0e-7, 0.0],
            c: [0.0, 0.0],
        };
        let m = LpvModel::new(vec![k]).unwrap();
        let traj = m.predict_trajectory(300.0, &vec![100.0; 5]);
        for s in traj {
            assert!((s.depth - 1.0e-5).abs() < 1e-20);
            assert_eq!(s.length, 0.0);
        }
    }

    #[test]
    fn zero_model_rolls_out_zero() {
        let k: LpvKnot<f64> = LpvKnot {
            theta: 300.0,
            a: [[0.0; 2]; 2],
            b: [0.0; 2],
            c: [0.0; 2],
        };
        let m = LpvModel::new(vec![k]).unwrap();
        let traj = m.predict_trajectory(300.0, &vec![120.0; 8]);
        assert!(traj.iter().all(|s| s.depth == 0.0 && s.length == 0.0));
    }

    #[test]
    fn rmse_of_identical_sequences_is_zero() {
        let s = vec![
            MeltPoolState {
                depth: 1e-5,
                length: 2e-5,
            };
            6
        ];
        assert_eq!(rmse(&s, &s).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn rmse_of_constant_offset_equals_offset() {
        let a = vec![
            MeltPoolState::<f64> {
                depth: 3.0e-5,
                length: 9.0e-5,
            };
            10
        ];
        let b: Vec<_> = a
            .iter()
            .map(|s| MeltPoolState {
                depth: s.depth + 2.0e-6,
                length: s.length,
            })
            .collect();
        let (d, l) = rmse(&a, &b).unwrap();
        assert!((d - 2.0e-6).abs() < 1e-18);
        assert_eq!(l, 0.0);
    }

    #[test]
    fn rmse_rejects_empty_and_mismatched() {
        let empty: Vec<MeltPoolState<f64>> = vec![];
        assert!(rmse(&empty, &empty).is_err());
        let one = vec![MeltPoolState::<f64>::zero()];
        assert!(rmse(&one, &empty).is_err());
    }

    #[test]
    fn model_json_round_trips() {
        let m = LpvModel::new(vec![knot(300.0, 1.0), knot(500.0, 2.0)]).unwrap();
        let text = m.to_json();
        assert!(text.contains("lpv-model/1"));
        let back = LpvModel::<f64>::from_json(&text).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let m = LpvModel::new(vec![knot(300.0, 1.0)]).unwrap();
        let text = m.to_json().replace("lpv-model/1", "lpv-model/9");
        assert!(LpvModel::<f64>::from_json(&text).is_err());
    }
}
