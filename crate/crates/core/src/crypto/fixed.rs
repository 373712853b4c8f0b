//! Fixed-point codec between reals and signed integers / residues mod n.

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use super::CryptoError;

/// Largest encoded magnitude accepted, leaving headroom for sums in `i128`.
pub const MAX_ENCODED_BITS: u32 = 100;

pub fn scale_for_bits(bits: u32) -> f64 {
    (bits as f64).exp2()
}

/// `round(x * scale)`.
pub fn encode_fixed(x: f64, scale: f64) -> Result<i128, CryptoError> {
    let v = (x * scale).round();
    if !v.is_finite() || v.abs() >= (MAX_ENCODED_BITS as f64).exp2() {
        return Err(CryptoError::Overflow(format!(
            "{x} does not fit the fixed-point range at scale {scale}"
        )));
    }
    Ok(v as i128)
}

pub fn decode_fixed(k: i128, scale: f64) -> f64 {
    k as f64 / scale
}

/// `v mod n` as a residue in `[0, n)`.
pub fn to_residue(v: i128, n: &BigUint) -> Result<BigUint, CryptoError> {
    let mag = BigUint::from(v.unsigned_abs());
    if &(&mag * 2u32) >= n {
        return Err(CryptoError::Overflow(format!(
            "value with {} bits exceeds half the modulus",
            mag.bits()
        )));
    }
    Ok(if v < 0 { n - mag } else { mag })
}

/// Centered lift: residues above n/2 are negative.
pub fn from_residue(m: &BigUint, n: &BigUint) -> Result<i128, CryptoError> {
    let half = n >> 1u32;
    let (neg, mag) = if m > &half {
        (true, n - m)
    } else {
        (false, m.clone())
    };
    let mag = mag
        .to_i128()
        .ok_or_else(|| CryptoError::Overflow("decoded value exceeds i128".into()))?;
    Ok(if neg { -mag } else { mag })
}
