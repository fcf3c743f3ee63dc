use crate::plant::grid::{Material, ThermalGrid};
use crate::plant::laser::SourceField;
use crate::plant::material::{MaterialProps, STEFAN_BOLTZMANN};
use crate::scalar::{real, Real};

/// Liquid fraction at which powder is considered to have started melting.
pub const MELT_ONSET: f64 = 1e-6;

/// Boundary treatment of the domain.
///
/// `Nominal`: bottom face held at ambient (base-plate sink), open surfaces
/// lose heat by convection and radiation, side walls adiabatic.
/// `Insulated`: every boundary adiabatic and no surface losses; used by the
/// conservation and maximum-principle checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundaries {
    Nominal,
    Insulated,
}

/// Reusable buffers for the explicit step.
#[derive(Debug, Clone)]
pub struct StepScratch<T> {
    rate: Vec<T>,
    conductivity: Vec<T>,
}

impl<T: Real> StepScratch<T> {
    pub fn new(cells: usize) -> Self {
        StepScratch {
            rate: vec![T::zero(); cells],
            conductivity: vec![T::zero(); cells],
        }
    }
}

#[inline]
fn cell_conductivity<T: Real>(material: &MaterialProps<T>, m: Material, lf: T) -> T {
    match m {
        Material::Empty => T::zero(),
        Material::Powder => {
            material.conductivity_powder
                + (material.conductivity_liquid - material.conductivity_powder) * lf
        }
        Material::Dense => {
            material.conductivity_solid
                + (material.conductivity_liquid - material.conductivity_solid) * lf
        }
    }
}

/// One explicit finite-volume step of the energy balance.
///
/// Conduction uses harmonic-mean face conductivities so fluxes are applied
/// symmetrically (exact pairwise conservation); phase change is captured by
/// the enthalpy map; the caller guarantees `dt` satisfies the stability
/// bound (enforced at plant construction).
pub fn step_thermal<T: Real>(
    grid: &mut ThermalGrid<T>,
    material: &MaterialProps<T>,
    boundaries: Boundaries,
    source: &SourceField<T>,
    scratch: &mut StepScratch<T>,
) {
    let n_cols = grid.n_cols;
    let dx = grid.cell_size;
    let inv_dx2 = T::one() / (dx * dx);
    let inv_dx = T::one() / dx;
    let two = real::<T>(2.0);
    let t_amb = material.t_ambient;
    let sigma = real::<T>(STEFAN_BOLTZMANN);
    let emiss = material.emissivity;
    let h_conv = material.convection_coeff;
    let amb4 = t_amb * t_amb * t_amb * t_amb;

    let active_rows = grid.top_row.iter().copied().max().unwrap_or(0);

    for row in 0..active_rows {
        let base = row * n_cols;
        for col in 0..n_cols {
            let i = base + col;
            let m = grid.material[i];
            scratch.conductivity[i] = cell_conductivity(material, m, grid.liquid_fraction[i]);
            scratch.rate[i] = T::zero();
        }
    }

    for row in 0..active_rows {
        let base = row * n_cols;
        for col in 0..n_cols {
            let i = base + col;
            if grid.material[i] == Material::Empty {
                continue;
            }
            let t_i = grid.temperature[i];
            let k_i = scratch.conductivity[i];
            let mut exposed_faces = 0usize;

            // right neighbour: conduction handled pairwise here
            if col + 1 < n_cols {
                let j = i + 1;
                if grid.material[j] != Material::Empty {
                    let k_j = scratch.conductivity[j];
                    let k_face = two * k_i * k_j / (k_i + k_j);
                    let flux = k_face * (grid.temperature[j] - t_i) * inv_dx2;
                    scratch.rate[i] += flux;
                    scratch.rate[j] -= flux;
                } else {
                    exposed_faces += 1;
                }
            }
            // left face: exposure only (conduction covered by the left cell)
            if col > 0 && grid.material[i - 1] == Material::Empty {
                exposed_faces += 1;
            }
            // upper neighbour
            if row + 1 < grid.n_rows {
                let j = i + n_cols;
                if grid.material[j] != Material::Empty {
                    let k_j = scratch.conductivity[j];
                    let k_face = two * k_i * k_j / (k_i + k_j);
                    let flux = k_face * (grid.temperature[j] - t_i) * inv_dx2;
                    scratch.rate[i] += flux;
                    scratch.rate[j] -= flux;
                } else {
                    exposed_faces += 1;
                }
            } else {
                exposed_faces += 1;
            }
            // lower face: base plate or overhang void
            if row == 0 {
                if boundaries == Boundaries::Nominal {
                    // Dirichlet at the bottom face, half-cell distance
                    scratch.rate[i] += two * k_i * (t_amb - t_i) * inv_dx2;
                }
            } else if grid.material[i - n_cols] == Material::Empty {
                exposed_faces += 1;
            }

            if boundaries == Boundaries::Nominal && exposed_faces > 0 {
                let t4 = t_i * t_i * t_i * t_i;
                let q_loss = h_conv * (t_i - t_amb) + emiss * sigma * (t4 - amb4);
                scratch.rate[i] -=
                    real::<T>(exposed_faces as f64) * q_loss * inv_dx;
            }
        }
    }

    for &(i, q) in &source.cells {
        scratch.rate[i] += q;
    }

    // integrate and refresh the enthalpy-consistent fields
    let dt = grid.dt;
    let onset = real::<T>(MELT_ONSET);
    for row in 0..active_rows {
        let base = row * n_cols;
        for col in 0..n_cols {
            let i = base + col;
            if grid.material[i] == Material::Empty {
                continue;
            }
            let r = scratch.rate[i];
            if r != T::zero() {
                let h = grid.enthalpy[i] + dt * r;
                grid.enthalpy[i] = h;
                grid.temperature[i] = material.temperature_of_enthalpy(h);
                let lf = material.liquid_fraction_of_enthalpy(h);
                grid.liquid_fraction[i] = lf;
                // powder consolidates permanently as soon as it starts to melt
                if grid.material[i] == Material::Powder && lf >= onset {
                    grid.material[i] = Material::Dense;
                }
            }
        }
    }
    grid.steps_taken += 1;
}
