//! Scalar abstraction for the virtual clock.
//!
//! The timing simulator only needs ordered field arithmetic plus conversions
//! from integers and from sampled `f64` draws, so it is written against
//! [`Seconds`] and instantiated for `f64`, `f32` and exact rationals.

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, ToPrimitive};

/// Resolution used when a sampled `f64` latency is converted into a clock value.
pub const MICROS_PER_SECOND: i64 = 1_000_000;

/// A clock value: seconds on the virtual timeline.
pub trait Seconds:
    Num + FromPrimitive + ToPrimitive + PartialOrd + Copy + Debug + Send + Sync + 'static
{
    /// Larger of two values. `PartialOrd` is enough since clock values are never NaN.
    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    /// `n` as a clock value.
    fn of_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in clock scalar")
    }

    /// Converts a sampled duration, quantized to whole microseconds.
    ///
    /// Quantizing keeps rational denominators bounded so exact arithmetic
    /// cannot blow up on long simulations.
    fn from_sampled(secs: f64) -> Self {
        let micros = (secs * MICROS_PER_SECOND as f64).round() as i64;
        let micros = Self::from_i64(micros).expect("sample representable in clock scalar");
        let scale = Self::from_i64(MICROS_PER_SECOND).expect("scale representable");
        micros / scale
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Seconds for T where
    T: Num + FromPrimitive + ToPrimitive + PartialOrd + Copy + Debug + Send + Sync + 'static
{
}
