//! Deterministic 2D finite-volume thermal melt-pool plant.
//!
//! The plant replaces a fluid-dynamics simulator with a fixed-grid enthalpy
//! method conduction model: it keeps the behaviours the controller study
//! needs (heat buildup across layers, power-responsive melt depth, phase
//! change, layer deposition and inter-layer cooling) while staying cheap
//! and bit-deterministic.

pub mod grid;
pub mod laser;
pub mod material;
pub mod params;
pub mod step;

pub use grid::{ColumnSpan, MeltPoolState, Phase, SurfaceMeasurement, ThermalGrid};
pub use laser::{laser_source, surface_intensity, SourceField};
pub use material::MaterialProps;
pub use params::{Discretization, ProcessParams};
pub use step::Boundaries;

use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use step::StepScratch;

/// Laser powers for the N control intervals of one layer [W].
pub type PowerProfile<T> = Vec<T>;

/// State of the plant sampled once per control interval during a scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSample<T> {
    pub layer: usize,
    pub interval: usize,
    /// Simulated time at the sampling instant [s].
    pub time_s: T,
    /// Laser position at the sampling instant [m].
    pub laser_x: T,
    /// Power applied during the interval [W].
    pub power: T,
    pub melt: MeltPoolState<T>,
    pub max_temp: T,
}

/// The full plant: material, process discretization, and thermal state.
///
/// A plant owns no global state; many instances can run in parallel.
pub struct Plant<T> {
    material: MaterialProps<T>,
    process: ProcessParams<T>,
    disc: Discretization<T>,
    boundaries: Boundaries,
    grid: ThermalGrid<T>,
    scratch: StepScratch<T>,
}

impl<T: Real> Plant<T> {
    pub fn new(material: MaterialProps<T>, process: ProcessParams<T>) -> Result<Self> {
        Self::with_boundaries(material, process, Boundaries::Nominal)
    }

    pub fn with_boundaries(
        material: MaterialProps<T>,
        process: ProcessParams<T>,
        boundaries: Boundaries,
    ) -> Result<Self> {
        material.validate()?;
        let disc = Discretization::derive(&process, &material)?;
        let grid = ThermalGrid::new(&disc, &material, process.cell_size);
        let scratch = StepScratch::new(disc.n_cols * disc.n_rows);
        Ok(Plant {
            material,
            process,
            disc,
            boundaries,
            grid,
            scratch,
        })
    }

    pub fn material(&self) -> &MaterialProps<T> {
        &self.material
    }

    pub fn process(&self) -> &ProcessParams<T> {
        &self.process
    }

    pub fn discretization(&self) -> &Discretization<T> {
        &self.disc
    }

    pub fn grid(&self) -> &ThermalGrid<T> {
        &self.grid
    }

    /// Mutable grid access for test setups.
    pub fn grid_mut(&mut self) -> &mut ThermalGrid<T> {
        &mut self.grid
    }

    /// Full-width footprint covering every column.
    pub fn full_footprint(&self) -> ColumnSpan {
        ColumnSpan::new(0, self.disc.n_cols)
    }

    /// Deposit one powder layer at ambient temperature over `footprint`.
    pub fn deposit_layer(&mut self, footprint: ColumnSpan) -> Result<()> {
        if footprint.is_empty() || footprint.end > self.disc.n_cols {
            return Err(Error::Domain(format!(
                "footprint {}..{} exceeds domain of {} columns",
                footprint.start, footprint.end, self.disc.n_cols
            )));
        }
        let layer = self.grid.current_layer;
        if layer >= self.process.n_layers {
            return Err(Error::Domain(format!(
                "all {} layers already deposited",
                self.process.n_layers
            )));
        }
        let row0 = self.disc.substrate_rows + layer * self.disc.layer_rows;
        let h_amb = self.material.enthalpy_of_temperature(self.material.t_ambient);
        for row in row0..row0 + self.disc.layer_rows {
            for col in footprint.iter() {
                let i = self.grid.idx(col, row);
                self.grid.material[i] = grid::Material::Powder;
                self.grid.enthalpy[i] = h_amb;
                self.grid.temperature[i] = self.material.t_ambient;
                self.grid.liquid_fraction[i] = T::zero();
            }
        }
        for col in footprint.iter() {
            self.grid.top_row[col] = self.grid.top_row[col].max(row0 + self.disc.layer_rows);
        }
        self.grid.current_layer += 1;
        Ok(())
    }

    /// Volumetric heat source for the current surface, laser at `laser_x`.
    pub fn laser_source(&self, laser_x: T, power: T) -> Result<SourceField<T>> {
        laser::laser_source(
            &self.grid,
            &self.material,
            self.process.beam_radius,
            self.process.slice(),
            laser_x,
            power,
        )
    }

    /// Advance the thermal state by one explicit step under `source`.
    pub fn step_thermal(&mut self, source: &SourceField<T>) {
        step::step_thermal(
            &mut self.grid,
            &self.material,
            self.boundaries,
            source,
            &mut self.scratch,
        );
    }

    fn check_profile(&self, profile: &[T], xi: &[bool]) -> Result<()> {
        let n = self.process.n_intervals;
        if profile.len() != n || xi.len() != n {
            return Err(Error::Domain(format!(
                "profile and mask must have length {n}, got {} and {}",
                profile.len(),
                xi.len()
            )));
        }
        let tol = real::<T>(1e-9) * self.process.u_max;
        for (i, (&u, &on)) in profile.iter().zip(xi).enumerate() {
            if !on {
                if u != T::zero() {
                    return Err(Error::Domain(format!(
                        "interval {i} is off-geometry but has power {u}"
                    )));
                }
            } else if u != T::zero()
                && (u < self.process.u_min - tol || u > self.process.u_max + tol)
            {
                return Err(Error::Domain(format!(
                    "power {u} at interval {i} outside [{}, {}]",
                    self.process.u_min, self.process.u_max
                )));
            }
        }
        Ok(())
    }

    /// Scan the current layer with the given piecewise-constant profile.
    ///
    /// Simulates exactly one scan time; the melt pool is sampled at the
    /// final thermal step of each control interval, giving one sample per
    /// interval.
    pub fn scan_layer(&mut self, profile: &[T], xi: &[bool]) -> Result<Vec<ScanSample<T>>> {
        self.check_profile(profile, xi)?;
        let n = self.process.n_intervals;
        let steps = self.disc.steps_per_interval;
        let dt = self.disc.dt;
        let v = self.process.scan_speed;
        let layer = self.grid.current_layer.saturating_sub(1);
        let half = real::<T>(0.5);

        let mut samples = Vec::with_capacity(n);
        let mut local_step = 0usize;
        for (interval, &u) in profile.iter().enumerate() {
            for _ in 0..steps {
                // midpoint laser position within the step
                let t_mid = (real::<T>(local_step as f64) + half) * dt;
                let source = if u > T::zero() {
                    self.laser_source(v * t_mid, u)?
                } else {
                    SourceField::default()
                };
                self.step_thermal(&source);
                local_step += 1;
            }
            let sample_t = real::<T>(local_step as f64) * dt;
            samples.push(ScanSample {
                layer,
                interval,
                time_s: self.grid.sim_time(),
                laser_x: v * sample_t,
                power: u,
                melt: self.grid.measure_melt_pool(),
                max_temp: self.grid.max_temperature(),
            });
        }
        Ok(samples)
    }

    /// Let the part cool with the laser off for `duration` seconds.
    pub fn cool(&mut self, duration: T) -> Result<()> {
        if duration < T::zero() {
            return Err(Error::Domain("cooling duration must be >= 0".to_string()));
        }
        let steps = (duration / self.disc.dt).to_f64().unwrap().round() as usize;
        let none = SourceField::default();
        for _ in 0..steps {
            self.step_thermal(&none);
        }
        Ok(())
    }

    /// Cool for the configured inter-layer time (cooling_factor x scan time).
    pub fn cool_between_layers(&mut self) -> Result<()> {
        self.cool(self.process.cooling_time())
    }

    pub fn measure_melt_pool(&self) -> MeltPoolState<T> {
        self.grid.measure_melt_pool()
    }

    pub fn measure_surface(&self, footprint: ColumnSpan) -> Result<SurfaceMeasurement<T>> {
        self.grid.measure_surface(footprint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_process() -> ProcessParams<f64> {
        let mut p = ProcessParams::nominal();
        p.track_length = 3.5e-4; // 50 columns
        p.substrate_height = 4.9e-5; // 7 rows
        p.layer_thickness = 1.4e-5; // 2 rows
        p.n_layers = 3;
        p.n_intervals = 10;
        p
    }

    fn tiny_plant() -> Plant<f64> {
        Plant::new(MaterialProps::stainless_304l(), tiny_process()).unwrap()
    }

    #[test]
    fn deposit_adds_one_powder_layer_over_footprint() {
        let mut p = tiny_plant();
        let full = p.full_footprint();
        p.deposit_layer(full).unwrap();
        assert_eq!(p.grid().current_layer(), 1);
        assert_eq!(p.grid().phase_at(0, 7), Phase::Powder);
        assert_eq!(p.grid().phase_at(49, 8), Phase::Powder);
        assert_eq!(p.grid().phase_at(0, 9), Phase::Empty);
        assert_eq!(p.grid().temperature_at(10, 7), 293.0);
    }

    #[test]
    fn overhang_layer_leaves_powder_over_void() {
        let mut p = tiny_plant();
        p.deposit_layer(ColumnSpan::new(20, 30)).unwrap();
        p.deposit_layer(ColumnSpan::new(10, 40)).unwrap();
        // column 12 has powder at rows 9-10 above empty rows 7-8
        assert_eq!(p.grid().phase_at(12, 9), Phase::Powder);
        assert_eq!(p.grid().phase_at(12, 7), Phase::Empty);
    }

    #[test]
    fn ten_layers_reach_counted_height() {
        let m = MaterialProps::stainless_304l();
        let mut proc = tiny_process();
        proc.n_layers = 10;
        let mut p = Plant::new(m, proc).unwrap();
        let full = p.full_footprint();
        for _ in 0..10 {
            p.deposit_layer(full).unwrap();
        }
        let d = *p.discretization();
        let expected = (d.substrate_rows + 10 * d.layer_rows) as f64 * 7.0e-6;
        assert!((p.grid().max_active_height() - expected).abs() < 1e-15);
    }

    #[test]
    fn deposit_rejects_footprint_beyond_domain() {
        let mut p = tiny_plant();
        assert!(p.deposit_layer(ColumnSpan::new(0, 51)).is_err());
    }

    #[test]
    fn deposit_rejects_extra_layers() {
        let mut p = tiny_plant();
        let full = p.full_footprint();
        for _ in 0..3 {
            p.deposit_layer(full).unwrap();
        }
        assert!(p.deposit_layer(full).is_err());
    }

    #[test]
    fn zero_power_scan_of_cold_part_has_no_melt_pool() {
        let mut p = tiny_plant();
        let full = p.full_footprint();
        p.deposit_layer(full).unwrap();
        let profile = vec![0.0; 10];
        let xi = vec![true; 10];
        let samples = p.scan_layer(&profile, &xi).unwrap();
        assert_eq!(samples.len(), 10);
        for s in &samples {
            assert_eq!(s.melt.depth, 0.0);
            assert_eq!(s.melt.length, 0.0);
        }
    }

    #[test]
    fn scan_rejects_profile_violating_mask_or_bounds() {
        let mut p = tiny_plant();
        let full = p.full_footprint();
        p.deposit_layer(full).unwrap();
        let mut xi = vec![true; 10];
        xi[3] = false;
        let mut profile = vec![120.0; 10];
        profile[3] = 0.0;
        assert!(p.scan_layer(&profile, &xi).is_ok());

        let mut bad = profile.clone();
        bad[3] = 50.0; // off-geometry power
        assert!(p.scan_layer(&bad, &xi).is_err());

        let mut bad = profile.clone();
        bad[4] = 99.0; // below u_min and nonzero
        assert!(p.scan_layer(&bad, &xi).is_err());

        let mut bad = profile;
        bad[4] = 151.0;
        assert!(p.scan_layer(&bad, &xi).is_err());
    }

    #[test]
    fn scan_melts_powder_at_nominal_power() {
        let mut p = tiny_plant();
        let full = p.full_footprint();
        p.deposit_layer(full).unwrap();
        let profile = vec![125.0; 10];
        let xi = vec![true; 10];
        let samples = p.scan_layer(&profile, &xi).unwrap();
        let max_depth = samples.iter().map(|s| s.melt.depth).fold(0.0, f64::max);
        assert!(max_depth > 0.0, "125 W should melt the powder layer");
        assert!(samples.iter().any(|s| s.max_temp > 1727.0));
    }

    #[test]
    fn cooling_solidifies_and_never_heats() {
        let mut p = tiny_plant();
        let full = p.full_footprint();
        p.deposit_layer(full).unwrap();
        let profile = vec![125.0; 10];
        let xi = vec![true; 10];
        p.scan_layer(&profile, &xi).unwrap();
        let mut prev_max = p.grid().max_temperature();
        let none = SourceField::default();
        for _ in 0..200 {
            p.step_thermal(&none);
            let m = p.grid().max_temperature();
            assert!(m <= prev_max + 1e-9 * prev_max);
            prev_max = m;
        }
        p.cool_between_layers().unwrap();
        assert_eq!(p.grid().count_liquid_cells(), 0);
    }

    #[test]
    fn cool_zero_duration_is_identity() {
        let mut p = tiny_plant();
        let before = p.grid().total_enthalpy();
        let steps = p.grid().steps_taken;
        p.cool(0.0).unwrap();
        assert_eq!(p.grid().total_enthalpy(), before);
        assert_eq!(p.grid().steps_taken, steps);
    }

    #[test]
    fn identical_scans_are_bit_identical() {
        let run = || {
            let mut p = tiny_plant();
            let full = p.full_footprint();
            p.deposit_layer(full).unwrap();
            let profile = vec![130.0; 10];
            let xi = vec![true; 10];
            p.scan_layer(&profile, &xi).unwrap()
        };
        let a = run();
        let b = run();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.melt.depth.to_bits(), y.melt.depth.to_bits());
            assert_eq!(x.melt.length.to_bits(), y.melt.length.to_bits());
            assert_eq!(x.max_temp.to_bits(), y.max_temp.to_bits());
        }
    }
}
