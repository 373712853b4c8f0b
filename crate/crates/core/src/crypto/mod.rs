//! Additively homomorphic encryption over fixed-point real matrices.

pub mod fixed;
pub mod matrix;
pub mod paillier;
pub mod params;
pub mod prime;

use thiserror::Error;

pub use fixed::{decode_fixed, encode_fixed, from_residue, scale_for_bits, to_residue};
pub use matrix::{
    add_cipher, decrypt_encoded, decrypt_matrix, decrypt_residues, encrypt_encoded, encrypt_matrix,
    encrypt_residues, CipherMatrix,
};
pub use paillier::{keygen, Ciphertext, KeyPair, PublicKey, SecretKey};
pub use params::HEParams;
pub use prime::{random_below, random_bits};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CryptoError {
    #[error("invalid parameters: {0}")]
    Param(String),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("ciphertexts are under different keys")]
    KeyMismatch,
    #[error("fixed-point scales differ: 2^{0} vs 2^{1}")]
    ScaleMismatch(u32, u32),
    #[error("malformed ciphertext: {0}")]
    Decode(String),
}
