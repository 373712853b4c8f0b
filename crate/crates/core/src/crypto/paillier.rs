//! Paillier encryption with generator n+1 and CRT decryption.

use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;
use sha2::{Digest, Sha256};

use super::prime::{gen_prime, random_below};
use super::CryptoError;

#[derive(Clone, PartialEq, Eq)]
pub struct PublicKey {
    n: BigUint,
    n_sq: BigUint,
}

#[derive(Clone)]
pub struct SecretKey {
    pk: PublicKey,
    p: BigUint,
    q: BigUint,
    p_sq: BigUint,
    q_sq: BigUint,
    p_minus_1: BigUint,
    q_minus_1: BigUint,
    hp: BigUint,
    hq: BigUint,
    /// p^-1 mod q
    p_inv: BigUint,
}

#[derive(Debug, Clone)]
pub struct KeyPair {
    pub public: PublicKey,
    pub secret: SecretKey,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ciphertext(pub(crate) BigUint);

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({} bits, {})", self.bits(), self.fingerprint())
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SecretKey({})", self.pk.fingerprint())
    }
}

impl PublicKey {
    pub fn from_modulus(n: BigUint) -> Result<Self, CryptoError> {
        if n.bits() < 16 || n.is_even() {
            return Err(CryptoError::Param(
                "modulus must be odd and at least 16 bits".into(),
            ));
        }
        let n_sq = &n * &n;
        Ok(PublicKey { n, n_sq })
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn n_squared(&self) -> &BigUint {
        &self.n_sq
    }

    pub fn bits(&self) -> u64 {
        self.n.bits()
    }

    /// First 8 bytes of SHA-256 over the modulus, hex-encoded.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.n.to_bytes_be());
        hex::encode(&digest[..8])
    }

    /// Encrypts a residue `m < n`.
    pub fn encrypt<R: Rng + ?Sized>(
        &self,
        m: &BigUint,
        rng: &mut R,
    ) -> Result<Ciphertext, CryptoError> {
        if m >= &self.n {
            return Err(CryptoError::Overflow(format!(
                "plaintext has {} bits, modulus {}",
                m.bits(),
                self.bits()
            )));
        }
        let r = loop {
            let r = random_below(rng, &self.n);
            if !r.is_zero() && r.gcd(&self.n).is_one() {
                break r;
            }
        };
        let gm = (&self.n * m + 1u32) % &self.n_sq;
        let rn = r.modpow(&self.n, &self.n_sq);
        Ok(Ciphertext(gm * rn % &self.n_sq))
    }

    /// Encrypts a signed value, represented modulo n.
    pub fn encrypt_i128<R: Rng + ?Sized>(
        &self,
        v: i128,
        rng: &mut R,
    ) -> Result<Ciphertext, CryptoError> {
        self.encrypt(&super::fixed::to_residue(v, &self.n)?, rng)
    }

    /// E(a) * E(b) = E(a + b mod n)
    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Ciphertext {
        Ciphertext(&a.0 * &b.0 % &self.n_sq)
    }

    /// E(a) * g^k = E(a + k mod n), without fresh randomness.
    pub fn add_plain(&self, a: &Ciphertext, k: &BigUint) -> Ciphertext {
        let gk = (&self.n * (k % &self.n) + 1u32) % &self.n_sq;
        Ciphertext(&a.0 * gk % &self.n_sq)
    }

    /// E(a)^k = E(k * a mod n)
    pub fn mul_plain(&self, a: &Ciphertext, k: &BigUint) -> Ciphertext {
        Ciphertext(a.0.modpow(k, &self.n_sq))
    }

    /// Checks that a ciphertext is a unit below n^2.
    pub fn check(&self, c: &Ciphertext) -> Result<(), CryptoError> {
        if c.0.is_zero() || c.0 >= self.n_sq {
            return Err(CryptoError::Decode("ciphertext out of range".into()));
        }
        Ok(())
    }
}

impl SecretKey {
    pub fn public(&self) -> &PublicKey {
        &self.pk
    }

    fn from_primes(p: BigUint, q: BigUint) -> Result<Self, CryptoError> {
        if p == q {
            return Err(CryptoError::Param("p and q must differ".into()));
        }
        let n = &p * &q;
        let p_minus_1 = &p - 1u32;
        let q_minus_1 = &q - 1u32;
        if !n.gcd(&(&p_minus_1 * &q_minus_1)).is_one() {
            return Err(CryptoError::Param("gcd(n, phi(n)) != 1".into()));
        }
        let pk = PublicKey::from_modulus(n)?;
        let p_sq = &p * &p;
        let q_sq = &q * &q;
        let g = pk.n() + 1u32;
        let hp = l_func(&g.modpow(&p_minus_1, &p_sq), &p)
            .modinv(&p)
            .ok_or_else(|| CryptoError::Param("h_p not invertible".into()))?;
        let hq = l_func(&g.modpow(&q_minus_1, &q_sq), &q)
            .modinv(&q)
            .ok_or_else(|| CryptoError::Param("h_q not invertible".into()))?;
        let p_inv = p
            .modinv(&q)
            .ok_or_else(|| CryptoError::Param("p not invertible mod q".into()))?;
        Ok(SecretKey {
            pk,
            p,
            q,
            p_sq,
            q_sq,
            p_minus_1,
            q_minus_1,
            hp,
            hq,
            p_inv,
        })
    }

    /// Residue `m < n` under `c`.
    pub fn decrypt(&self, c: &Ciphertext) -> Result<BigUint, CryptoError> {
        self.pk.check(c)?;
        let mp = l_func(&c.0.modpow(&self.p_minus_1, &self.p_sq), &self.p) * &self.hp % &self.p;
        let mq = l_func(&c.0.modpow(&self.q_minus_1, &self.q_sq), &self.q) * &self.hq % &self.q;
        // Garner recombination: m = mp + p * ((mq - mp) * p^-1 mod q)
        let diff = (&mq + &self.q - (&mp % &self.q)) % &self.q;
        let h = diff * &self.p_inv % &self.q;
        Ok(mp + &self.p * h)
    }

    /// Signed value under `c`, with residues above n/2 read as negative.
    pub fn decrypt_i128(&self, c: &Ciphertext) -> Result<i128, CryptoError> {
        super::fixed::from_residue(&self.decrypt(c)?, self.pk.n())
    }
}

fn l_func(x: &BigUint, d: &BigUint) -> BigUint {
    (x - 1u32) / d
}

/// Generates a key pair whose modulus has exactly `bits` bits.
pub fn keygen<R: Rng + ?Sized>(bits: u64, rng: &mut R) -> Result<KeyPair, CryptoError> {
    if bits < 64 {
        return Err(CryptoError::Param(format!(
            "key size {bits} is below the 64-bit minimum"
        )));
    }
    loop {
        let p = gen_prime(bits / 2, rng);
        let q = gen_prime(bits - bits / 2, rng);
        if p == q || (&p * &q).bits() != bits {
            continue;
        }
        match SecretKey::from_primes(p, q) {
            Ok(secret) => {
                return Ok(KeyPair {
                    public: secret.pk.clone(),
                    secret,
                })
            }
            Err(_) => continue,
        }
    }
}

impl Ciphertext {
    /// `u32` big-endian length followed by the big-endian magnitude.
    pub fn to_bytes(&self) -> Vec<u8> {
        let body = self.0.to_bytes_be();
        let mut out = Vec::with_capacity(4 + body.len());
        out.extend_from_slice(&(body.len() as u32).to_be_bytes());
        out.extend_from_slice(&body);
        out
    }

    /// Parses one length-prefixed ciphertext, returning it and the bytes consumed.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Ciphertext, usize), CryptoError> {
        if bytes.len() < 4 {
            return Err(CryptoError::Decode("truncated ciphertext length".into()));
        }
        let len = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
        let body = bytes
            .get(4..4 + len)
            .ok_or_else(|| CryptoError::Decode("truncated ciphertext".into()))?;
        Ok((Ciphertext(BigUint::from_bytes_be(body)), 4 + len))
    }

    pub fn bits(&self) -> u64 {
        self.0.bits()
    }

    pub fn as_biguint(&self) -> &BigUint {
        &self.0
    }
}
