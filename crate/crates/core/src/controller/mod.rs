//! Layer-to-layer feedback loop: measure the surface, recoat, solve the
//! per-layer OCP, scan, cool — plus the constant-power baseline and the
//! closed-vs-open comparison report.

pub mod geometry;

pub use geometry::{make_geometry, GeometryName, LayerGeometry, PartGeometry};

use std::time::Instant;

use crate::error::{Error, Result};
use crate::plant::{MaterialProps, MeltPoolState, Plant, ProcessParams, ScanSample};
use crate::qp::{solve_ocp, verify_kkt, OcpSpec};
use crate::scalar::{real, Real};
use crate::sysid::LpvModel;

/// Controller cost weights; depth errors are weighed in micrometres and
/// power increments in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights<T> {
    /// Melt-pool depth target [m].
    pub target_depth: T,
    pub q_depth: T,
    pub r_smooth: T,
}

impl<T: Real> Weights<T> {
    /// 30 um target with unit depth weight and a light increment penalty.
    pub fn nominal() -> Self {
        Weights {
            target_depth: real(30.0e-6),
            q_depth: real(1.0),
            r_smooth: real(0.05),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_depth > T::zero()) {
            return Err(Error::Config("target_depth must be positive".to_string()));
        }
        if !(self.q_depth > T::zero()) || self.r_smooth < T::zero() {
            return Err(Error::Config(
                "q_depth must be positive and r_smooth nonnegative".to_string(),
            ));
        }
        Ok(())
    }
}

/// Everything recorded about one printed layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerResult<T> {
    pub layer: usize,
    /// Mean surface temperature over the upcoming footprint, measured on
    /// the preceding layer's surface before recoating.
    pub theta: T,
    /// The temperature fell outside the model's knot domain and the
    /// evaluation clamped to the boundary.
    pub theta_clamped: bool,
    pub applied_profile: Vec<T>,
    pub melt_trajectory: Vec<MeltPoolState<T>>,
    /// Per-interval plant samples, one row each in the trace file.
    pub samples: Vec<ScanSample<T>>,
    /// Means over the on-geometry intervals of the layer.
    pub layer_mean_depth: T,
    pub layer_mean_length: T,
    pub mean_power: T,
    /// Mean surface temperature over this layer's footprint right after the
    /// laser pass, before inter-layer cooling.
    pub end_surface_mean: T,
    pub ocp_objective: T,
    pub kkt_residual: T,
    /// Measured wall times; reported in the manifest, never in the CSV.
    pub solve_time_s: f64,
    pub plant_time_s: f64,
}

fn on_interval_means<T: Real>(
    samples: &[ScanSample<T>],
    profile: &[T],
    xi: &[bool],
) -> (T, T, T) {
    let mut n = 0usize;
    let mut depth = T::zero();
    let mut length = T::zero();
    let mut power = T::zero();
    for i in 0..xi.len() {
        if xi[i] {
            depth += samples[i].melt.depth;
            length += samples[i].melt.length;
            power += profile[i];
            n += 1;
        }
    }
    let n_t = real::<T>(n.max(1) as f64);
    (depth / n_t, length / n_t, power / n_t)
}

fn check_profile_compliance<T: Real>(
    profile: &[T],
    xi: &[bool],
    u_min: T,
    u_max: T,
) -> Result<()> {
    for (i, (&u, &on)) in profile.iter().zip(xi).enumerate() {
        let ok = if on {
            u >= u_min && u <= u_max
        } else {
            u == T::zero()
        };
        if !ok {
            return Err(Error::Solver(format!(
                "profile violates geometry constraints at interval {i}: power {u}"
            )));
        }
    }
    Ok(())
}

/// Tolerance used for every per-layer QP solve and its verification.
pub const KKT_TOL: f64 = 1e-9;

fn run_layer<T: Real>(
    plant: &mut Plant<T>,
    geometry: &LayerGeometry,
    layer: usize,
    profile: Vec<T>,
    theta: T,
    theta_clamped: bool,
    ocp_objective: T,
    kkt_residual: T,
    solve_time_s: f64,
) -> Result<LayerResult<T>> {
    let plant_t0 = Instant::now();
    let samples = plant.scan_layer(&profile, &geometry.xi)?;
    let end_surface_mean = plant.measure_surface(geometry.footprint)?.mean_temp;
    plant.cool_between_layers()?;
    let plant_time_s = plant_t0.elapsed().as_secs_f64();

    let (layer_mean_depth, layer_mean_length, mean_power) =
        on_interval_means(&samples, &profile, &geometry.xi);
    Ok(LayerResult {
        layer,
        theta,
        theta_clamped,
        melt_trajectory: samples.iter().map(|s| s.melt).collect(),
        samples,
        applied_profile: profile,
        layer_mean_depth,
        layer_mean_length,
        mean_power,
        end_surface_mean,
        ocp_objective,
        kkt_residual,
        solve_time_s,
        plant_time_s,
    })
}

/// Closed-loop print: per layer, measure the surface temperature over the
/// upcoming footprint, recoat, solve the OCP at that temperature, scan with
/// the optimizer's profile, and cool. Every applied profile is checked
/// against the geometry constraints and the QP solution is re-verified
/// against the condensed problem before it reaches the plant.
pub fn run_closed_loop<T: Real>(
    part: &PartGeometry,
    model: &LpvModel<T>,
    weights: &Weights<T>,
    material: &MaterialProps<T>,
    process: &ProcessParams<T>,
) -> Result<Vec<LayerResult<T>>> {
    weights.validate()?;
    if part.layers.len() != process.n_layers {
        return Err(Error::Config(format!(
            "part has {} layers but the process prints {}",
            part.layers.len(),
            process.n_layers
        )));
    }
    let mut plant = Plant::new(material.clone(), process.clone())?;
    let tol = real::<T>(KKT_TOL);
    let mut results = Vec::with_capacity(part.layers.len());

    for (layer, geometry) in part.layers.iter().enumerate() {
        let theta = plant.measure_surface(geometry.footprint)?.mean_temp;
        plant.deposit_layer(geometry.footprint)?;

        let solve_t0 = Instant::now();
        let eval = model.evaluate(theta);
        let spec = OcpSpec {
            target_depth: weights.target_depth,
            q_depth: weights.q_depth,
            r_smooth: weights.r_smooth,
            n_intervals: process.n_intervals,
            u_min: process.u_min,
            u_max: process.u_max,
            xi: geometry.xi.clone(),
            a: eval.a,
            b: eval.b,
            c: eval.c,
            u_prev_init: process.u_min,
        };
        let (qp, sol) = solve_ocp(&spec, tol).map_err(|e| {
            Error::Solver(format!("layer {layer} (theta {theta}): {e}"))
        })?;
        let solve_time_s = solve_t0.elapsed().as_secs_f64();

        let report = verify_kkt(&qp, &sol.u_star, tol);
        if !report.satisfied {
            return Err(Error::Solver(format!(
                "layer {layer}: independent KKT check failed: {report:?}"
            )));
        }
        let kkt = report
            .stationarity
            .max(report.multiplier_sign)
            .max(report.feasibility);
        check_profile_compliance(&sol.u_star, &geometry.xi, process.u_min, process.u_max)?;

        results.push(run_layer(
            &mut plant,
            geometry,
            layer,
            sol.u_star,
            theta,
            eval.clamped,
            sol.objective,
            kkt,
            solve_time_s,
        )?);
    }
    Ok(results)
}

/// Open-loop baseline: the same print loop with a constant power applied
/// wherever the laser is on.
pub fn run_open_loop<T: Real>(
    part: &PartGeometry,
    constant_power: T,
    material: &MaterialProps<T>,
    process: &ProcessParams<T>,
) -> Result<Vec<LayerResult<T>>> {
    if constant_power != T::zero()
        && (constant_power < process.u_min || constant_power > process.u_max)
    {
        return Err(Error::Config(format!(
            "constant power {constant_power} outside [{}, {}]",
            process.u_min, process.u_max
        )));
    }
    if part.layers.len() != process.n_layers {
        return Err(Error::Config(format!(
            "part has {} layers but the process prints {}",
            part.layers.len(),
            process.n_layers
        )));
    }
    let mut plant = Plant::new(material.clone(), process.clone())?;
    let mut results = Vec::with_capacity(part.layers.len());
    for (layer, geometry) in part.layers.iter().enumerate() {
        let theta = plant.measure_surface(geometry.footprint)?.mean_temp;
        plant.deposit_layer(geometry.footprint)?;
        let profile: Vec<T> = geometry
            .xi
            .iter()
            .map(|&on| if on { constant_power } else { T::zero() })
            .collect();
        results.push(run_layer(
            &mut plant,
            geometry,
            layer,
            profile,
            theta,
            false,
            T::zero(),
            T::zero(),
            0.0,
        )?);
    }
    Ok(results)
}

/// Per-layer comparison of a closed- and an open-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow<T> {
    pub layer: usize,
    pub closed_depth: T,
    pub open_depth: T,
    pub closed_length: T,
    pub open_length: T,
    pub closed_theta: T,
    pub open_theta: T,
    pub closed_power: T,
    pub open_power: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunComparison<T> {
    pub target_depth: T,
    pub rows: Vec<ComparisonRow<T>>,
    /// |final-layer mean depth - target| for each run.
    pub closed_final_dev: T,
    pub open_final_dev: T,
    pub closed_beats_open: bool,
}

pub fn compare_runs<T: Real>(
    closed: &[LayerResult<T>],
    open: &[LayerResult<T>],
    target_depth: T,
) -> Result<RunComparison<T>> {
    if closed.len() != open.len() {
        return Err(Error::Domain(format!(
            "run lengths differ: {} vs {}",
            closed.len(),
            open.len()
        )));
    }
    if closed.is_empty() {
        return Err(Error::Domain("cannot compare empty runs".to_string()));
    }
    let rows = closed
        .iter()
        .zip(open)
        .map(|(c, o)| ComparisonRow {
            layer: c.layer,
            closed_depth: c.layer_mean_depth,
            open_depth: o.layer_mean_depth,
            closed_length: c.layer_mean_length,
            open_length: o.layer_mean_length,
            closed_theta: c.theta,
            open_theta: o.theta,
            closed_power: c.mean_power,
            open_power: o.mean_power,
        })
        .collect();
    let closed_final_dev = (closed.last().unwrap().layer_mean_depth - target_depth).abs();
    let open_final_dev = (open.last().unwrap().layer_mean_depth - target_depth).abs();
    Ok(RunComparison {
        target_depth,
        rows,
        closed_final_dev,
        open_final_dev,
        closed_beats_open: closed_final_dev < open_final_dev,
    })
}

// --- run output files ----------------------------------------------------

pub const RESULTS_SCHEMA: &str = "run-results/1";
const RESULTS_HEADER: &str =
    "layer,theta_k,mean_power_w,mean_depth_m,mean_length_m,end_surface_k,ocp_objective,solve_time_s";

pub const TRACE_SCHEMA: &str = "run-trace/1";
const TRACE_HEADER: &str = "layer,step,time_s,laser_x_m,power_w,depth_m,length_m,max_temp_k";

/// Per-layer results CSV. The `solve_time_s` column is written as zero so
/// that run outputs are byte-reproducible; measured wall times live in the
/// run manifest instead.
pub fn results_to_csv<T: Real>(results: &[LayerResult<T>]) -> String {
    let mut out = format!("# schema: {RESULTS_SCHEMA}\n{RESULTS_HEADER}\n");
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.layer,
            r.theta,
            r.mean_power,
            r.layer_mean_depth,
            r.layer_mean_length,
            r.end_surface_mean,
            r.ocp_objective,
            0.0
        ));
    }
    out
}

/// Per-interval trace CSV, one row per control interval.
pub fn trace_to_csv<T: Real>(results: &[LayerResult<T>]) -> String {
    let mut out = format!("# schema: {TRACE_SCHEMA}\n{TRACE_HEADER}\n");
    for r in results {
        for s in &r.samples {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                s.layer, s.interval, s.time_s, s.laser_x, s.power, s.melt.depth, s.melt.length,
                s.max_temp
            ));
        }
    }
    out
}

/// One parsed row of a results CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultRow {
    pub layer: usize,
    pub theta_k: f64,
    pub mean_power_w: f64,
    pub mean_depth_m: f64,
    pub mean_length_m: f64,
    pub end_surface_k: f64,
    pub ocp_objective: f64,
    pub solve_time_s: f64,
}

pub fn parse_results(text: &str) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (lineno, line) in text.lines().enumerate() {
        let line_id = lineno + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            if line != RESULTS_HEADER {
                return Err(Error::Parse(format!(
                    "line {line_id}: expected header '{RESULTS_HEADER}'"
                )));
            }
            header_seen = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::Parse(format!(
                "line {line_id}: expected 8 fields, got {}",
                f.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {line_id}: bad number '{s}'")))
        };
        rows.push(ResultRow {
            layer: f[0]
                .parse()
                .map_err(|_| Error::Parse(format!("line {line_id}: bad layer '{}'", f[0])))?,
            theta_k: num(f[1])?,
            mean_power_w: num(f[2])?,
            mean_depth_m: num(f[3])?,
            mean_length_m: num(f[4])?,
            end_surface_k: num(f[5])?,
            ocp_objective: num(f[6])?,
            solve_time_s: num(f[7])?,
        });
    }
    if !header_seen {
        return Err(Error::Parse("results file has no header".to_string()));
    }
    Ok(rows)
}

/// One parsed row of a trace CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub layer: usize,
    pub step: usize,
    pub time_s: f64,
    pub laser_x_m: f64,
    pub power_w: f64,
    pub depth_m: f64,
    pub length_m: f64,
    pub max_temp_k: f64,
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>> {
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (lineno, line) in text.lines().enumerate() {
        let line_id = lineno + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            if line != TRACE_HEADER {
                return Err(Error::Parse(format!(
                    "line {line_id}: expected header '{TRACE_HEADER}'"
                )));
            }
            header_seen = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::Parse(format!(
                "line {line_id}: expected 8 fields, got {}",
                f.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {line_id}: bad number '{s}'")))
        };
        let int = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| Error::Parse(format!("line {line_id}: bad index '{s}'")))
        };
        rows.push(TraceRow {
            layer: int(f[0])?,
            step: int(f[1])?,
            time_s: num(f[2])?,
            laser_x_m: num(f[3])?,
            power_w: num(f[4])?,
            depth_m: num(f[5])?,
            length_m: num(f[6])?,
            max_temp_k: num(f[7])?,
        });
    }
    if !header_seen {
        return Err(Error::Parse("trace file has no header".to_string()));
    }
    Ok(rows)
}
