//! The four statistics available to data-dependent conditionals.

use std::collections::HashSet;
use std::hash::Hash;

use super::DdError;

/// Number of distinct values present in both inputs.
pub fn intersection_size<T: Eq + Hash>(a: &[T], b: &[T]) -> usize {
    let sa: HashSet<&T> = a.iter().collect();
    let sb: HashSet<&T> = b.iter().collect();
    sa.intersection(&sb).count()
}

/// |A ∩ B| / |A ∪ B| over distinct values.
pub fn jaccard<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<f64, DdError> {
    let sa: HashSet<&T> = a.iter().collect();
    let sb: HashSet<&T> = b.iter().collect();
    let inter = sa.intersection(&sb).count();
    let union = sa.len() + sb.len() - inter;
    if union == 0 {
        return Err(DdError::EmptyUnion);
    }
    Ok(inter as f64 / union as f64)
}

fn same_len(a: &[f64], b: &[f64]) -> Result<(), DdError> {
    if a.len() != b.len() {
        return Err(DdError::LengthMismatch(a.len(), b.len()));
    }
    Ok(())
}

/// Sample Pearson correlation, computed in two passes.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64, DdError> {
    same_len(a, b)?;
    if a.len() < 2 {
        return Err(DdError::TooShort(a.len()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(DdError::ZeroVariance);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// a·b / (‖a‖‖b‖)
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, DdError> {
    same_len(a, b)?;
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(DdError::ZeroNorm);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}
