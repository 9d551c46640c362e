//! Cleartext ring arithmetic and fixed-point semantics.
//!
//! Everything here is a pure function on plain values. The secure protocols
//! in [`crate::rss`] are tested against these definitions.

mod fixed;
mod ring;

pub use fixed::{
    decode, encode, floor_shift, raw_product, trunc_exact_ref, trunc_prob_ref, FixedPointParams,
    DEFAULT_FRAC_BITS, MAX_FRAC_BITS, MIN_FRAC_BITS, RING_BITS,
};
pub use ring::{decode_elements, encode_elements, RingElement, RING_BYTES};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("value {value} outside the representable range (|x| < {bound})")]
    OutOfRange { value: f64, bound: f64 },
    #[error("fractional bits {frac_bits} outside supported range {min}..={max}")]
    InvalidPrecision { frac_bits: u32, min: u32, max: u32 },
}
