use serde::{Deserialize, Serialize};

use super::CryptoError;

/// Session-wide encryption parameters and the data bounds they must cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HEParams {
    pub key_bits: u64,
    pub scale_bits: u32,
    /// Largest pooled row count.
    pub n_max: u64,
    /// Largest design width.
    pub m_max: u64,
    /// Largest magnitude of any design or target value.
    pub v_max: f64,
}

impl Default for HEParams {
    fn default() -> Self {
        HEParams {
            key_bits: 2048,
            scale_bits: 20,
            n_max: 1_000_000,
            m_max: 64,
            v_max: 1.0,
        }
    }
}

impl HEParams {
    pub fn scale(&self) -> f64 {
        super::fixed::scale_for_bits(self.scale_bits)
    }

    /// log2 of n_max * (S * v_max)^2 * m_max.
    pub fn bound_bits(&self) -> f64 {
        (self.n_max as f64).log2()
            + 2.0 * (self.scale().log2() + self.v_max.log2())
            + (self.m_max as f64).log2()
    }

    /// Proves that no sum of session values can wrap the plaintext modulus
    /// (or the `i128` decoding range).
    pub fn validate(&self) -> Result<(), CryptoError> {
        if self.key_bits < 64 {
            return Err(CryptoError::Param(format!(
                "key size {} is below 64 bits",
                self.key_bits
            )));
        }
        if self.scale_bits == 0 || self.scale_bits > 60 {
            return Err(CryptoError::Param(format!(
                "scale exponent {} outside 1..=60",
                self.scale_bits
            )));
        }
        if self.n_max == 0 || self.m_max == 0 || !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return Err(CryptoError::Param(
                "n_max, m_max and v_max must be positive".into(),
            ));
        }
        let need = self.bound_bits() + 1.0;
        if need >= self.key_bits as f64 - 2.0 {
            return Err(CryptoError::Param(format!(
                "bound needs {need:.1} bits but a {}-bit modulus leaves only {}",
                self.key_bits,
                self.key_bits - 2
            )));
        }
        if need >= super::fixed::MAX_ENCODED_BITS as f64 + 20.0 {
            return Err(CryptoError::Param(format!(
                "bound needs {need:.1} bits, beyond the i128 decoding range"
            )));
        }
        Ok(())
    }
}
