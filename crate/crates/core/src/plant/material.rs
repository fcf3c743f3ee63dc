use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{real, Real};

/// Stefan-Boltzmann constant [W/(m^2 K^4)].
pub const STEFAN_BOLTZMANN: f64 = 5.670374419e-8;

/// Thermophysical properties of the build material.
///
/// Field names match the keys of the material config file one to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialProps<T> {
    /// Density [kg/m^3].
    pub density: T,
    /// Specific heat capacity [J/(kg K)].
    pub specific_heat: T,
    /// Conductivity of consolidated solid [W/(m K)].
    pub conductivity_solid: T,
    /// Conductivity of the melt [W/(m K)].
    pub conductivity_liquid: T,
    /// Conductivity of loose powder [W/(m K)].
    pub conductivity_powder: T,
    /// Solidus temperature [K].
    pub t_solidus: T,
    /// Liquidus temperature [K].
    pub t_liquidus: T,
    /// Latent heat of fusion [J/kg].
    pub latent_heat: T,
    /// Laser absorption coefficient, in (0, 1].
    pub absorptivity: T,
    /// Beer-Lambert decay length of the volumetric heat source [m].
    pub extinction_depth: T,
    /// Surface emissivity for radiative loss.
    pub emissivity: T,
    /// Convective film coefficient on open surfaces [W/(m^2 K)].
    pub convection_coeff: T,
    /// Ambient / base-plate temperature [K].
    pub t_ambient: T,
}

impl<T: Real> MaterialProps<T> {
    /// Literature defaults for 304L stainless steel. These are config
    /// defaults, not ground truth; the test suite is property based.
    pub fn stainless_304l() -> Self {
        MaterialProps {
            density: real(7900.0),
            specific_heat: real(500.0),
            conductivity_solid: real(30.0),
            conductivity_liquid: real(35.0),
            conductivity_powder: real(0.4),
            t_solidus: real(1673.0),
            t_liquidus: real(1727.0),
            latent_heat: real(2.6e5),
            absorptivity: real(0.27),
            extinction_depth: real(2.0e-5),
            emissivity: real(0.4),
            convection_coeff: real(10.0),
            t_ambient: real(293.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive: [(&str, T); 12] = [
            ("density", self.density),
            ("specific_heat", self.specific_heat),
            ("conductivity_solid", self.conductivity_solid),
            ("conductivity_liquid", self.conductivity_liquid),
            ("conductivity_powder", self.conductivity_powder),
            ("t_solidus", self.t_solidus),
            ("t_liquidus", self.t_liquidus),
            ("latent_heat", self.latent_heat),
            ("extinction_depth", self.extinction_depth),
            ("emissivity", self.emissivity),
            ("convection_coeff", self.convection_coeff),
            ("t_ambient", self.t_ambient),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::Config(format!("material {name} must be positive")));
            }
        }
        if self.t_liquidus <= self.t_solidus {
            return Err(Error::Config(
                "t_liquidus must exceed t_solidus".to_string(),
            ));
        }
        if !(self.absorptivity > T::zero() && self.absorptivity <= T::one()) {
            return Err(Error::Config(
                "absorptivity must lie in (0, 1]".to_string(),
            ));
        }
        Ok(())
    }

    /// Largest conductivity over all phases, used by the stability bound.
    pub fn k_max(&self) -> T {
        self.conductivity_solid
            .max(self.conductivity_liquid)
            .max(self.conductivity_powder)
    }

    /// Volumetric heat capacity rho*c_p [J/(m^3 K)].
    #[inline]
    pub fn vol_heat_capacity(&self) -> T {
        self.density * self.specific_heat
    }

    /// Volumetric latent heat rho*L [J/m^3].
    #[inline]
    pub fn vol_latent(&self) -> T {
        self.density * self.latent_heat
    }

    /// Volumetric enthalpy at the solidus (liquid fraction 0).
    #[inline]
    pub fn h_solidus(&self) -> T {
        self.vol_heat_capacity() * self.t_solidus
    }

    /// Volumetric enthalpy at the liquidus (liquid fraction 1).
    #[inline]
    pub fn h_liquidus(&self) -> T {
        self.vol_heat_capacity() * self.t_liquidus + self.vol_latent()
    }

    /// Enthalpy-method map: temperature -> volumetric enthalpy [J/m^3].
    ///
    /// Sensible heat with the latent heat released linearly across the
    /// mushy interval [t_solidus, t_liquidus]; the zero of enthalpy sits at
    /// 0 K so all stored material carries positive energy.
    pub fn enthalpy_of_temperature(&self, t: T) -> T {
        let cp = self.vol_heat_capacity();
        if t <= self.t_solidus {
            cp * t
        } else if t >= self.t_liquidus {
            cp * t + self.vol_latent()
        } else {
            let frac = (t - self.t_solidus) / (self.t_liquidus - self.t_solidus);
            cp * t + self.vol_latent() * frac
        }
    }

    /// Inverse map: volumetric enthalpy -> temperature [K].
    pub fn temperature_of_enthalpy(&self, h: T) -> T {
        let cp = self.vol_heat_capacity();
        let hs = self.h_solidus();
        let hl = self.h_liquidus();
        if h <= hs {
            h / cp
        } else if h >= hl {
            (h - self.vol_latent()) / cp
        } else {
            let slope = self.vol_latent() / (self.t_liquidus - self.t_solidus);
            (h + slope * self.t_solidus) / (cp + slope)
        }
    }

    /// Liquid fraction in [0, 1] from volumetric enthalpy.
    pub fn liquid_fraction_of_enthalpy(&self, h: T) -> T {
        let hs = self.h_solidus();
        let hl = self.h_liquidus();
        if h <= hs {
            T::zero()
        } else if h >= hl {
            T::one()
        } else {
            (h - hs) / (hl - hs)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat() -> MaterialProps<f64> {
        MaterialProps::stainless_304l()
    }

    #[test]
    fn defaults_validate() {
        assert!(mat().validate().is_ok());
    }

    #[test]
    fn rejects_inverted_phase_interval() {
        let mut m = mat();
        m.t_liquidus = m.t_solidus;
        assert!(matches!(m.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_absorptivity_above_one() {
        let mut m = mat();
        m.absorptivity = 1.2;
        assert!(m.validate().is_err());
    }

    #[test]
    fn enthalpy_map_round_trips() {
        let m = mat();
        for &t in &[293.0, 1000.0, 1673.0, 1690.0, 1727.0, 2500.0] {
            let h = m.enthalpy_of_temperature(t);
            let back = m.temperature_of_enthalpy(h);
            assert!((back - t).abs() < 1e-9 * t, "t={t} back={back}");
        }
    }

    #[test]
    fn liquid_fraction_is_piecewise_linear() {
        let m = mat();
        assert_eq!(m.liquid_fraction_of_enthalpy(m.enthalpy_of_temperature(500.0)), 0.0);
        assert_eq!(m.liquid_fraction_of_enthalpy(m.enthalpy_of_temperature(2000.0)), 1.0);
        let mid = 0.5 * (m.t_solidus + m.t_liquidus);
        let lf = m.liquid_fraction_of_enthalpy(m.enthalpy_of_temperature(mid));
        assert!((lf - 0.5).abs() < 1e-12);
    }
}
