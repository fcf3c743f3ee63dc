use std::io::Write;

use crate::error::{Error, Result};
use crate::plant::material::MaterialProps;
use crate::plant::params::Discretization;
use crate::scalar::{real, Real};

/// Tolerance below full liquid fraction that still counts as fully molten.
pub const FULL_LIQUID_TOL: f64 = 1e-9;

/// What a cell is made of. `Dense` means consolidated material (melted at
/// least once, currently solid or liquid); powder converts to dense
/// permanently the first time it melts completely.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Material {
    Empty,
    Powder,
    Dense,
}

/// Reported phase of a cell, derived from material and liquid fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Empty,
    Powder,
    Solid,
    Liquid,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Empty => "empty",
            Phase::Powder => "powder",
            Phase::Solid => "solid",
            Phase::Liquid => "liquid",
        }
    }
}

/// Contiguous range of grid columns, `start..end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnSpan {
    pub start: usize,
    pub end: usize,
}

impl ColumnSpan {
    pub fn new(start: usize, end: usize) -> Self {
        ColumnSpan { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, col: usize) -> bool {
        col >= self.start && col < self.end
    }

    pub fn iter(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

/// Melt pool dimensions: the controlled output of the plant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeltPoolState<T> {
    /// Vertical extent of the fully molten region [m].
    pub depth: T,
    /// Horizontal extent of the fully molten region [m].
    pub length: T,
}

impl<T: Real> MeltPoolState<T> {
    pub fn zero() -> Self {
        MeltPoolState {
            depth: T::zero(),
            length: T::zero(),
        }
    }
}

/// Per-column surface temperatures and their spatial mean.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMeasurement<T> {
    pub surface_temps: Vec<T>,
    pub mean_temp: T,
}

/// Full thermal state of the part on a fixed 2D grid.
///
/// Storage is struct-of-arrays, row-major with row 0 at the bottom of the
/// substrate; index = row * n_cols + col. Temperature and liquid fraction
/// are kept consistent with enthalpy after every update.
#[derive(Debug, Clone)]
pub struct ThermalGrid<T> {
    pub(crate) n_cols: usize,
    pub(crate) n_rows: usize,
    pub(crate) cell_size: T,
    pub(crate) enthalpy: Vec<T>,
    pub(crate) temperature: Vec<T>,
    pub(crate) liquid_fraction: Vec<T>,
    pub(crate) material: Vec<Material>,
    /// One past the topmost non-empty row per column; 0 when empty.
    pub(crate) top_row: Vec<usize>,
    pub(crate) current_layer: usize,
    pub(crate) steps_taken: u64,
    pub(crate) dt: T,
}

impl<T: Real> ThermalGrid<T> {
    /// Build the initial grid: a solid substrate at ambient temperature,
    /// empty cells above.
    pub fn new(disc: &Discretization<T>, material: &MaterialProps<T>, cell_size: T) -> Self {
        let n = disc.n_cols * disc.n_rows;
        let h_ambient = material.enthalpy_of_temperature(material.t_ambient);
        let mut grid = ThermalGrid {
            n_cols: disc.n_cols,
            n_rows: disc.n_rows,
            cell_size,
            enthalpy: vec![T::zero(); n],
            temperature: vec![T::zero(); n],
            liquid_fraction: vec![T::zero(); n],
            material: vec![Material::Empty; n],
            top_row: vec![0; disc.n_cols],
            current_layer: 0,
            steps_taken: 0,
            dt: disc.dt,
        };
        for row in 0..disc.substrate_rows {
            for col in 0..disc.n_cols {
                let i = grid.idx(col, row);
                grid.material[i] = Material::Dense;
                grid.enthalpy[i] = h_ambient;
                grid.temperature[i] = material.t_ambient;
            }
        }
        for col in 0..disc.n_cols {
            grid.top_row[col] = disc.substrate_rows;
        }
        grid
    }

    #[inline]
    pub(crate) fn idx(&self, col: usize, row: usize) -> usize {
        debug_assert!(col < self.n_cols && row < self.n_rows);
        row * self.n_cols + col
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn cell_size(&self) -> T {
        self.cell_size
    }

    pub fn current_layer(&self) -> usize {
        self.current_layer
    }

    /// Simulated time [s], reconstructed from the step count so it carries
    /// no accumulation drift.
    pub fn sim_time(&self) -> T {
        real::<T>(self.steps_taken as f64) * self.dt
    }

    pub fn temperature_at(&self, col: usize, row: usize) -> T {
        self.temperature[self.idx(col, row)]
    }

    pub fn enthalpy_at(&self, col: usize, row: usize) -> T {
        self.enthalpy[self.idx(col, row)]
    }

    pub fn liquid_fraction_at(&self, col: usize, row: usize) -> T {
        self.liquid_fraction[self.idx(col, row)]
    }

    pub fn phase_at(&self, col: usize, row: usize) -> Phase {
        let i = self.idx(col, row);
        match self.material[i] {
            Material::Empty => Phase::Empty,
            Material::Powder => Phase::Powder,
            Material::Dense => {
                if self.liquid_fraction[i].to_f64().unwrap() >= 1.0 - FULL_LIQUID_TOL {
                    Phase::Liquid
                } else {
                    Phase::Solid
                }
            }
        }
    }

    /// Active material height of a column [m].
    pub fn active_height(&self, col: usize) -> T {
        real::<T>(self.top_row[col] as f64) * self.cell_size
    }

    /// Tallest active height over all columns [m].
    pub fn max_active_height(&self) -> T {
        let rows = self.top_row.iter().copied().max().unwrap_or(0);
        real::<T>(rows as f64) * self.cell_size
    }

    /// Total enthalpy integrated over the grid [J/m^3 * cells]; used by the
    /// conservation checks.
    pub fn total_enthalpy(&self) -> T {
        let mut sum = T::zero();
        for (i, m) in self.material.iter().enumerate() {
            if *m != Material::Empty {
                sum += self.enthalpy[i];
            }
        }
        sum
    }

    pub fn max_temperature(&self) -> T {
        let mut mx = T::zero();
        for (i, m) in self.material.iter().enumerate() {
            if *m != Material::Empty {
                mx = mx.max(self.temperature[i]);
            }
        }
        mx
    }

    pub fn count_liquid_cells(&self) -> usize {
        let thr = 1.0 - FULL_LIQUID_TOL;
        self.material
            .iter()
            .zip(&self.liquid_fraction)
            .filter(|(m, lf)| **m != Material::Empty && lf.to_f64().unwrap() >= thr)
            .count()
    }

    /// Axis-aligned bounding box of fully molten cells.
    ///
    /// Depth is the vertical extent of the box and length its horizontal
    /// extent, both in metres; (0, 0) when nothing is fully molten.
    pub fn measure_melt_pool(&self) -> MeltPoolState<T> {
        let thr = 1.0 - FULL_LIQUID_TOL;
        let mut row_min = usize::MAX;
        let mut row_max = 0usize;
        let mut col_min = usize::MAX;
        let mut col_max = 0usize;
        let mut found = false;
        for row in 0..self.n_rows {
            let base = row * self.n_cols;
            for col in 0..self.n_cols {
                let i = base + col;
                if self.material[i] != Material::Empty
                    && self.liquid_fraction[i].to_f64().unwrap() >= thr
                {
                    found = true;
                    row_min = row_min.min(row);
                    row_max = row_max.max(row);
                    col_min = col_min.min(col);
                    col_max = col_max.max(col);
                }
            }
        }
        if !found {
            return MeltPoolState::zero();
        }
        MeltPoolState {
            depth: real::<T>((row_max - row_min + 1) as f64) * self.cell_size,
            length: real::<T>((col_max - col_min + 1) as f64) * self.cell_size,
        }
    }

    /// Topmost non-empty cell temperature for each column of `span`, plus
    /// the spatial mean. Columns with no material read as ambient-free and
    /// are skipped; with a substrate present every column has material.
    pub fn measure_surface(&self, span: ColumnSpan) -> Result<SurfaceMeasurement<T>> {
        if span.is_empty() || span.end > self.n_cols {
            return Err(Error::Domain(format!(
                "surface span {}..{} outside grid of {} columns",
                span.start, span.end, self.n_cols
            )));
        }
        let mut temps = Vec::with_capacity(span.len());
        for col in span.iter() {
            let top = self.top_row[col];
            if top == 0 {
                continue;
            }
            temps.push(self.temperature[self.idx(col, top - 1)]);
        }
        if temps.is_empty() {
            return Err(Error::Domain(
                "surface span contains no material".to_string(),
            ));
        }
        let mean = temps.iter().copied().sum::<T>() / real::<T>(temps.len() as f64);
        Ok(SurfaceMeasurement {
            surface_temps: temps,
            mean_temp: mean,
        })
    }

    /// Write a full-field snapshot: one row per cell with position,
    /// temperature, phase, and liquid fraction.
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# schema: field-snapshot/1")?;
        writeln!(out, "col,row,x_m,y_m,temp_k,phase,liquid_frac")?;
        for row in 0..self.n_rows {
            for col in 0..self.n_cols {
                let i = self.idx(col, row);
                if self.material[i] == Material::Empty {
                    continue;
                }
                let half = real::<T>(0.5);
                let x = (real::<T>(col as f64) + half) * self.cell_size;
                let y = (real::<T>(row as f64) + half) * self.cell_size;
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    col,
                    row,
                    x,
                    y,
                    self.temperature[i],
                    self.phase_at(col, row).label(),
                    self.liquid_fraction[i]
                )?;
            }
        }
        Ok(())
    }
}
