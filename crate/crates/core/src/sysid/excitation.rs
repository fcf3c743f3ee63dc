use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::PowerProfile;
use crate::scalar::{real, Real};

/// Specification of the identification campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSpec<T> {
    /// Number of independent prints to simulate.
    pub n_prints: usize,
    /// Layers per print.
    pub n_layers: usize,
    /// Number of constant-power sections per layer.
    pub segments_per_layer: usize,
    /// Lower end of the sampled power range [W].
    pub power_low: T,
    /// Upper end of the sampled power range [W].
    pub power_high: T,
    /// Base seed; profiles are a pure function of (seed, print, layer).
    pub rng_seed: u64,
}

impl<T: Real> ExcitationSpec<T> {
    /// Twenty ten-layer prints excited with three uniform sections per
    /// layer in [100, 150] W.
    pub fn nominal(rng_seed: u64) -> Self {
        ExcitationSpec {
            n_prints: 20,
            n_layers: 10,
            segments_per_layer: 3,
            power_low: real(100.0),
            power_high: real(150.0),
            rng_seed,
        }
    }

    pub fn validate(&self, u_min: T, u_max: T) -> Result<()> {
        if self.n_prints == 0 || self.n_layers == 0 || self.segments_per_layer == 0 {
            return Err(Error::Config(
                "excitation counts must be nonzero".to_string(),
            ));
        }
        if self.power_low > self.power_high {
            return Err(Error::Config("power_low must be <= power_high".to_string()));
        }
        if self.power_low < u_min || self.power_high > u_max {
            return Err(Error::Config(format!(
                "excitation power range [{}, {}] outside actuator bounds [{u_min}, {u_max}]",
                self.power_low, self.power_high
            )));
        }
        Ok(())
    }
}

fn stream_for(seed: u64, print_id: usize, layer_id: usize) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&(print_id as u64).to_le_bytes());
    bytes[16..24].copy_from_slice(&(layer_id as u64).to_le_bytes());
    bytes[24..32].copy_from_slice(b"excite/1");
    ChaCha8Rng::from_seed(bytes)
}

/// Uniform draw in [low, high] from the top 53 bits of the stream; stable
/// across platforms and library versions.
fn uniform<T: Real>(rng: &mut ChaCha8Rng, low: T, high: T) -> T {
    let x = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    low + (high - low) * real::<T>(x)
}

/// Piecewise-constant excitation profile for one layer: the N intervals are
/// split into `segments_per_layer` near-equal sections (earlier sections
/// take the remainder), each at an independently sampled power level.
pub fn generate_excitation<T: Real>(
    spec: &ExcitationSpec<T>,
    n_intervals: usize,
    print_id: usize,
    layer_id: usize,
) -> PowerProfile<T> {
    let segments = spec.segments_per_layer.min(n_intervals).max(1);
    let base = n_intervals / segments;
    let rem = n_intervals % segments;
    let mut rng = stream_for(spec.rng_seed, print_id, layer_id);
    let mut profile = Vec::with_capacity(n_intervals);
    for s in 0..segments {
        let len = base + usize::from(s < rem);
        let level = uniform(&mut rng, spec.power_low, spec.power_high);
        profile.extend(std::iter::repeat(level).take(len));
    }
    profile
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forty_intervals_split_into_14_13_13() {
        let spec = ExcitationSpec::<f64>::nominal(7);
        let p = generate_excitation(&spec, 40, 0, 0);
        assert_eq!(p.len(), 40);
        let mut seg_lens = vec![1usize];
        for i in 1..40 {
            if p[i] == p[i - 1] {
                *seg_lens.last_mut().unwrap() += 1;
            } else {
                seg_lens.push(1);
            }
        }
        assert_eq!(seg_lens, vec![14, 13, 13]);
        // three independent levels inside the range
        for &u in &p {
            assert!((100.0..=150.0).contains(&u));
        }
    }

    #[test]
    fn degenerate_range_gives_constant_profile() {
        let mut spec = ExcitationSpec::<f64>::nominal(3);
        spec.power_low = 120.0;
        spec.power_high = 120.0;
        let p = generate_excitation(&spec, 40, 4, 2);
        assert!(p.iter().all(|&u| u == 120.0));
    }

    #[test]
    fn profiles_are_deterministic_per_key() {
        let spec = ExcitationSpec::<f64>::nominal(42);
        let a = generate_excitation(&spec, 40, 3, 7);
        let b = generate_excitation(&spec, 40, 3, 7);
        assert_eq!(a, b);
        let c = generate_excitation(&spec, 40, 3, 8);
        assert_ne!(a, c);
    }

    #[test]
    fn range_outside_bounds_is_rejected() {
        let spec = ExcitationSpec::<f64>::nominal(1);
        assert!(spec.validate(100.0, 150.0).is_ok());
        assert!(spec.validate(110.0, 150.0).is_err());
        assert!(spec.validate(100.0, 140.0).is_err());
    }
}
