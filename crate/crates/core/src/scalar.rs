use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Scalar type for all numerical kernels.
///
/// Everything in this crate is generic over `Real` so the same code runs in
/// f32 or f64; the concrete aliases at the crate root pick f64 for the
/// pipeline. f32 is mainly useful for quick experiments — the conservation
/// and KKT tolerances in the test suite assume f64.
pub trait Real:
    'static
    + Send
    + Sync
    + Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Default
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Convert an f64 constant into the working scalar type.
#[inline]
pub fn real<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("constant not representable in scalar type")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converts_constants_to_both_widths() {
        let a: f32 = real(1.5);
        let b: f64 = real(1.5);
        assert_eq!(a, 1.5f32);
        assert_eq!(b, 1.5f64);
    }
}
