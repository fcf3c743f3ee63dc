use std::str::FromStr;

use crate::error::{Error, Result};
use crate::plant::{ColumnSpan, Discretization, ProcessParams};
use crate::scalar::{real, Real};

/// Built-in part shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryName {
    Brick,
    Overhang,
}

impl GeometryName {
    pub fn label(self) -> &'static str {
        match self {
            GeometryName::Brick => "brick",
            GeometryName::Overhang => "overhang",
        }
    }
}

impl FromStr for GeometryName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brick" => Ok(GeometryName::Brick),
            "overhang" => Ok(GeometryName::Overhang),
            other => Err(Error::Config(format!(
                "unknown geometry '{other}' (expected brick or overhang)"
            ))),
        }
    }
}

/// One layer's laser schedule and recoat footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGeometry {
    /// Laser on/off per control interval.
    pub xi: Vec<bool>,
    /// Columns that receive powder, derived from the on-intervals under the
    /// constant-speed position map.
    pub footprint: ColumnSpan,
}

impl LayerGeometry {
    /// Build from a contiguous on-interval range `[start, end)`.
    pub fn from_interval_range<T: Real>(
        start: usize,
        end: usize,
        process: &ProcessParams<T>,
        disc: &Discretization<T>,
    ) -> Result<Self> {
        let n = process.n_intervals;
        if start >= end || end > n {
            return Err(Error::Domain(format!(
                "interval range {start}..{end} invalid for {n} intervals"
            )));
        }
        let mut xi = vec![false; n];
        for v in xi[start..end].iter_mut() {
            *v = true;
        }
        let interval_len = process.track_length / real::<T>(n as f64);
        let x_lo = real::<T>(start as f64) * interval_len;
        let x_hi = real::<T>(end as f64) * interval_len;
        let dx = process.cell_size;
        let half = real::<T>(0.5);
        let mut col_start = None;
        let mut col_end = 0;
        for col in 0..disc.n_cols {
            let x = (real::<T>(col as f64) + half) * dx;
            if x >= x_lo && x <= x_hi {
                if col_start.is_none() {
                    col_start = Some(col);
                }
                col_end = col + 1;
            }
        }
        let col_start = col_start.ok_or_else(|| {
            Error::Domain(format!(
                "interval range {start}..{end} covers no grid column"
            ))
        })?;
        Ok(LayerGeometry {
            xi,
            footprint: ColumnSpan::new(col_start, col_end),
        })
    }

    pub fn on_count(&self) -> usize {
        self.xi.iter().filter(|&&b| b).count()
    }
}

/// Full part: one layer geometry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PartGeometry {
    pub name: String,
    pub layers: Vec<LayerGeometry>,
}

/// Build a named part.
///
/// Brick: every layer spans the full track. Overhang: a symmetric trapezoid
/// whose on-fraction grows linearly from 0.4 at the base to 1.0 at the top,
/// rounded to whole intervals and centered on the track.
pub fn make_geometry<T: Real>(
    name: GeometryName,
    process: &ProcessParams<T>,
    disc: &Discretization<T>,
) -> Result<PartGeometry> {
    let n_layers = process.n_layers;
    let n = process.n_intervals;
    let mut layers = Vec::with_capacity(n_layers);
    for layer in 0..n_layers {
        let (start, end) = match name {
            GeometryName::Brick => (0, n),
            GeometryName::Overhang => {
                let frac = if n_layers <= 1 {
                    1.0
                } else {
                    0.4 + 0.6 * layer as f64 / (n_layers - 1) as f64
                };
                let on = ((frac * n as f64).round() as usize).clamp(1, n);
                let start = (n - on) / 2;
                (start, start + on)
            }
        };
        layers.push(LayerGeometry::from_interval_range(
            start, end, process, disc,
        )?);
    }
    Ok(PartGeometry {
        name: name.label().to_string(),
        layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::MaterialProps;

    fn nominal() -> (ProcessParams<f64>, Discretization<f64>) {
        let m = MaterialProps::stainless_304l();
        let p = ProcessParams::nominal();
        let d = Discretization::derive(&p, &m).unwrap();
        (p, d)
    }

    #[test]
    fn brick_layers_are_all_on_full_width() {
        let (p, d) = nominal();
        let g = make_geometry(GeometryName::Brick, &p, &d).unwrap();
        assert_eq!(g.layers.len(), 10);
        for l in &g.layers {
            assert!(l.xi.iter().all(|&b| b));
            assert_eq!(l.footprint, ColumnSpan::new(0, 286));
        }
    }

    #[test]
    fn overhang_base_layer_has_16_central_intervals() {
        let (p, d) = nominal();
        let g = make_geometry(GeometryName::Overhang, &p, &d).unwrap();
        let base = &g.layers[0];
        assert_eq!(base.on_count(), 16);
        assert!(!base.xi[11]);
        assert!(base.xi[12] && base.xi[27]);
        assert!(!base.xi[28]);
        // footprint is the central ~0.8 mm
        assert!(base.footprint.len() >= 112 && base.footprint.len() <= 116);
    }

    #[test]
    fn overhang_top_layer_is_full_width() {
        let (p, d) = nominal();
        let g = make_geometry(GeometryName::Overhang, &p, &d).unwrap();
        let top = g.layers.last().unwrap();
        assert!(top.xi.iter().all(|&b| b));
    }

    #[test]
    fn overhang_widens_monotonically() {
        let (p, d) = nominal();
        let g = make_geometry(GeometryName::Overhang, &p, &d).unwrap();
        for w in g.layers.windows(2) {
            assert!(w[1].on_count() >= w[0].on_count());
            assert!(w[1].footprint.start <= w[0].footprint.start);
            assert!(w[1].footprint.end >= w[0].footprint.end);
        }
    }

    #[test]
    fn unknown_geometry_name_is_rejected() {
        assert!("pyramid".parse::<GeometryName>().is_err());
        assert_eq!(
            "brick".parse::<GeometryName>().unwrap(),
            GeometryName::Brick
        );
    }
}
