use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::material::MaterialProps;
use crate::scalar::{real, Real};

/// Scan and discretization parameters of the process.
///
/// Field names match the keys of the process config file one to one.
/// `time_step` may be `None`, in which case the largest stable step that
/// divides a control interval evenly is derived at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessParams<T> {
    /// Scanned track length [m].
    pub track_length: T,
    /// Substrate height below the first powder layer [m].
    pub substrate_height: T,
    /// Powder layer thickness [m].
    pub layer_thickness: T,
    /// Laser beam radius at the focal point [m].
    pub beam_radius: T,
    /// Constant scan speed [m/s].
    pub scan_speed: T,
    /// Inter-layer cooling time as a multiple of the scan time.
    pub cooling_factor: T,
    /// Number of layers in the part.
    pub n_layers: usize,
    /// Number of piecewise-constant control intervals per layer.
    pub n_intervals: usize,
    /// Minimum laser power when on [W].
    pub u_min: T,
    /// Maximum laser power [W].
    pub u_max: T,
    /// Grid cell size [m].
    pub cell_size: T,
    /// Explicit time step [s]; derived from the stability bound when absent.
    pub time_step: Option<T>,
    /// Out-of-plane thickness of the simulated slice [m], the constant that
    /// converts laser watts into volumetric heat; defaults to one beam
    /// diameter. Pure calibration: it sets how hot the duty cycle runs.
    pub slice_thickness: Option<T>,
}

impl<T: Real> ProcessParams<T> {
    /// Nominal parameters: 2 mm track, 1.5 m/s scan, 21 um layers on a
    /// 0.15 mm substrate, ten layers of forty control intervals, 100-150 W.
    /// The layer thickness sits below the achievable melt depth so layers
    /// fuse through into the previous one.
    pub fn nominal() -> Self {
        ProcessParams {
            track_length: real(2.0e-3),
            substrate_height: real(1.5e-4),
            layer_thickness: real(2.1e-5),
            beam_radius: real(4.0e-5),
            scan_speed: real(1.5),
            cooling_factor: real(1.5),
            n_layers: 10,
            n_intervals: 40,
            u_min: real(100.0),
            u_max: real(150.0),
            cell_size: real(7.0e-6),
            time_step: None,
            slice_thickness: None,
        }
    }

    /// Effective slice thickness [m].
    pub fn slice(&self) -> T {
        self.slice_thickness
            .unwrap_or(real::<T>(2.0) * self.beam_radius)
    }

    /// Scan duration of one layer [s].
    pub fn scan_time(&self) -> T {
        self.track_length / self.scan_speed
    }

    /// Inter-layer cooling duration [s].
    pub fn cooling_time(&self) -> T {
        self.cooling_factor * self.scan_time()
    }

    /// Explicit-stability limit `0.25 dx^2 rho c_p / k_max` [s].
    pub fn stability_bound(&self, material: &MaterialProps<T>) -> T {
        real::<T>(0.25) * self.cell_size * self.cell_size * material.vol_heat_capacity()
            / material.k_max()
    }

    pub fn validate(&self, material: &MaterialProps<T>) -> Result<()> {
        let positive: [(&str, T); 8] = [
            ("track_length", self.track_length),
            ("substrate_height", self.substrate_height),
            ("layer_thickness", self.layer_thickness),
            ("beam_radius", self.beam_radius),
            ("scan_speed", self.scan_speed),
            ("cooling_factor", self.cooling_factor),
            ("u_min", self.u_min),
            ("cell_size", self.cell_size),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::Config(format!("process {name} must be positive")));
            }
        }
        if self.u_max < self.u_min {
            return Err(Error::Config("u_max must be >= u_min".to_string()));
        }
        if self.n_layers == 0 || self.n_intervals == 0 {
            return Err(Error::Config(
                "n_layers and n_intervals must be nonzero".to_string(),
            ));
        }
        if let Some(w) = self.slice_thickness {
            if !(w > T::zero()) || !w.is_finite() {
                return Err(Error::Config(
                    "slice_thickness must be positive".to_string(),
                ));
            }
        }
        if let Some(dt) = self.time_step {
            let bound = self.stability_bound(material);
            if dt > bound {
                return Err(Error::Config(format!(
                    "time_step {dt} violates the explicit stability bound {bound}"
                )));
            }
            let interval = self.scan_time() / real::<T>(self.n_intervals as f64);
            let ratio = (interval / dt).to_f64().unwrap();
            if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
                return Err(Error::Config(
                    "time_step must divide the control interval evenly".to_string(),
                ));
            }
        }
        Ok(())
    }
}

/// Grid dimensions and time discretization derived from the parameters.
///
/// Heights are quantized to whole cells; `layer_rows * cell_size` is the
/// effective layer thickness the simulation actually deposits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discretization<T> {
    pub n_cols: usize,
    pub substrate_rows: usize,
    pub layer_rows: usize,
    pub n_rows: usize,
    /// Duration of one control interval [s], scan_time / n_intervals.
    pub interval_dt: T,
    /// Thermal steps per control interval.
    pub steps_per_interval: usize,
    /// Thermal time step [s]; interval_dt / steps_per_interval.
    pub dt: T,
}

impl<T: Real> Discretization<T> {
    pub fn derive(process: &ProcessParams<T>, material: &MaterialProps<T>) -> Result<Self> {
        process.validate(material)?;
        let dx = process.cell_size.to_f64().unwrap();
        let quantize = |len: T| -> usize {
            ((len.to_f64().unwrap() / dx).round() as usize).max(1)
        };
        let n_cols = quantize(process.track_length);
        let substrate_rows = quantize(process.substrate_height);
        let layer_rows = quantize(process.layer_thickness);
        let n_rows = substrate_rows + process.n_layers * layer_rows;

        let interval_dt = process.scan_time() / real::<T>(process.n_intervals as f64);
        let (dt, steps) = match process.time_step {
            Some(dt) => {
                let steps = (interval_dt / dt).to_f64().unwrap().round() as usize;
                (interval_dt / real::<T>(steps as f64), steps.max(1))
            }
            None => {
                let bound = process.stability_bound(material);
                let steps = (interval_dt / bound).to_f64().unwrap().ceil().max(1.0) as usize;
                (interval_dt / real::<T>(steps as f64), steps)
            }
        };
        Ok(Discretization {
            n_cols,
            substrate_rows,
            layer_rows,
            n_rows,
            interval_dt,
            steps_per_interval: steps,
            dt,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nominal_discretization_is_stable() {
        let m = MaterialProps::<f64>::stainless_304l();
        let p = ProcessParams::nominal();
        let d = Discretization::derive(&p, &m).unwrap();
        assert_eq!(d.n_cols, 286); // round(2 mm / 7 um)
        assert_eq!(d.substrate_rows, 21);
        assert_eq!(d.layer_rows, 3);
        assert!(d.dt <= p.stability_bound(&m));
        // interval divided exactly
        let steps = d.steps_per_interval as f64;
        assert!((d.dt * steps - d.interval_dt).abs() < 1e-18);
    }

    #[test]
    fn unstable_explicit_step_is_rejected() {
        let m = MaterialProps::<f64>::stainless_304l();
        let mut p = ProcessParams::nominal();
        p.time_step = Some(1.0); // absurdly large
        assert!(matches!(
            Discretization::derive(&p, &m),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn uneven_user_step_is_rejected() {
        let m = MaterialProps::<f64>::stainless_304l();
        let mut p = ProcessParams::nominal();
        // stable but does not divide the 33.3 us interval evenly
        p.time_step = Some(1.0e-6 * 1.3);
        assert!(Discretization::derive(&p, &m).is_err());
    }
}
