//! Element-wise encrypted real matrices.

use nalgebra::DMatrix;
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::fixed::{decode_fixed, encode_fixed, scale_for_bits};
use super::paillier::{Ciphertext, PublicKey, SecretKey};
use super::CryptoError;
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct CipherMatrix {
    pub rows: usize,
    pub cols: usize,
    pub scale_bits: u32,
    /// Fingerprint of the public key all cells are encrypted under.
    pub key: String,
    /// Column-major, like `nalgebra`.
    pub cells: Vec<Ciphertext>,
}

/// Encrypts pre-encoded integers. Each cell draws from its own ChaCha stream
/// keyed by one seed from `rng`, so the result does not depend on scheduling.
pub fn encrypt_encoded<R: Rng + ?Sized>(
    pk: &PublicKey,
    rows: usize,
    cols: usize,
    scale_bits: u32,
    values: &[i128],
    rng: &mut R,
) -> Result<CipherMatrix, CryptoError> {
    let residues = values
        .iter()
        .map(|&v| super::fixed::to_residue(v, pk.n()))
        .collect::<Result<Vec<_>, _>>()?;
    encrypt_residues(pk, rows, cols, scale_bits, &residues, rng)
}

/// Encrypts residues modulo n directly.
pub fn encrypt_residues<R: Rng + ?Sized>(
    pk: &PublicKey,
    rows: usize,
    cols: usize,
    scale_bits: u32,
    residues: &[BigUint],
    rng: &mut R,
) -> Result<CipherMatrix, CryptoError> {
    assert_eq!(residues.len(), rows * cols);
    let mut seed = [0u8; 32];
    rng.fill_bytes(&mut seed);
    let cells = par::try_map_range(residues.len(), |i| {
        let mut r = ChaCha20Rng::from_seed(seed);
        r.set_stream(i as u64);
        pk.encrypt(&residues[i], &mut r)
    })?;
    Ok(CipherMatrix {
        rows,
        cols,
        scale_bits,
        key: pk.fingerprint(),
        cells,
    })
}

/// Encodes every entry first, so an overflow aborts before any encryption.
pub fn encrypt_matrix<R: Rng + ?Sized>(
    pk: &PublicKey,
    m: &DMatrix<f64>,
    scale_bits: u32,
    rng: &mut R,
) -> Result<CipherMatrix, CryptoError> {
    let scale = scale_for_bits(scale_bits);
    let encoded = m
        .iter()
        .map(|&x| encode_fixed(x, scale))
        .collect::<Result<Vec<_>, _>>()?;
    encrypt_encoded(pk, m.nrows(), m.ncols(), scale_bits, &encoded, rng)
}

/// Signed integers under each cell, column-major.
pub fn decrypt_encoded(sk: &SecretKey, c: &CipherMatrix) -> Result<Vec<i128>, CryptoError> {
    if c.key != sk.public().fingerprint() {
        return Err(CryptoError::KeyMismatch);
    }
    par::try_map_range(c.cells.len(), |i| sk.decrypt_i128(&c.cells[i]))
}

/// Raw residues under each cell, column-major.
pub fn decrypt_residues(sk: &SecretKey, c: &CipherMatrix) -> Result<Vec<BigUint>, CryptoError> {
    if c.key != sk.public().fingerprint() {
        return Err(CryptoError::KeyMismatch);
    }
    par::try_map_range(c.cells.len(), |i| sk.decrypt(&c.cells[i]))
}

pub fn decrypt_matrix(sk: &SecretKey, c: &CipherMatrix) -> Result<DMatrix<f64>, CryptoError> {
    let scale = scale_for_bits(c.scale_bits);
    let raw = decrypt_encoded(sk, c)?;
    Ok(DMatrix::from_iterator(
        c.rows,
        c.cols,
        raw.into_iter().map(|k| decode_fixed(k, scale)),
    ))
}

pub fn add_cipher(
    pk: &PublicKey,
    a: &CipherMatrix,
    b: &CipherMatrix,
) -> Result<CipherMatrix, CryptoError> {
    if (a.rows, a.cols) != (b.rows, b.cols) {
        return Err(CryptoError::DimMismatch {
            left: (a.rows, a.cols),
            right: (b.rows, b.cols),
        });
    }
    let fp = pk.fingerprint();
    if a.key != fp || b.key != fp {
        return Err(CryptoError::KeyMismatch);
    }
    if a.scale_bits != b.scale_bits {
        return Err(CryptoError::ScaleMismatch(a.scale_bits, b.scale_bits));
    }
    let cells = par::map_range(a.cells.len(), |i| pk.add(&a.cells[i], &b.cells[i]));
    Ok(CipherMatrix { cells, ..a.clone() })
}

impl CipherMatrix {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = crate::wire::Writer::default();
        w.u32(self.rows as u32);
        w.u32(self.cols as u32);
        w.u32(self.scale_bits);
        w.str(&self.key);
        for c in &self.cells {
            w.raw(&c.to_bytes());
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<CipherMatrix, CryptoError> {
        let mut r = crate::wire::Reader::new(bytes);
        let err = |e: crate::wire::WireError| CryptoError::Decode(e.to_string());
        let rows = r.u32().map_err(err)? as usize;
        let cols = r.u32().map_err(err)? as usize;
        let scale_bits = r.u32().map_err(err)?;
        let key = r.str().map_err(err)?;
        let mut rest = r.rest();
        let mut cells = Vec::with_capacity(rows.saturating_mul(cols).min(1 << 20));
        for _ in 0..rows * cols {
            let (c, used) = Ciphertext::from_bytes(rest)?;
            cells.push(c);
            rest = &rest[used..];
        }
        if !rest.is_empty() {
            return Err(CryptoError::Decode(
                "trailing bytes after cipher matrix".into(),
            ));
        }
        Ok(CipherMatrix {
            rows,
            cols,
            scale_bits,
            key,
            cells,
        })
    }
}
