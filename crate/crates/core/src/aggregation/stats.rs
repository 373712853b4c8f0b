//! Local sufficient statistics O = XᵀX, V = XᵀY.

use nalgebra::{DMatrix, DVector};

use super::AggregationError;
use crate::crypto::{decode_fixed, encode_fixed, CryptoError};
use crate::data::{to_design_matrix, Dataset, DesignMatrix, NormalizationMap};
use crate::policy::{Agreement, Status};

#[derive(Debug, Clone, PartialEq)]
pub struct LocalStats {
    pub o: DMatrix<f64>,
    pub v: DVector<f64>,
    /// Rows behind the statistics.
    pub n: u64,
}

impl LocalStats {
    pub fn zeros(m: usize) -> Self {
        LocalStats {
            o: DMatrix::zeros(m, m),
            v: DVector::zeros(m),
            n: 0,
        }
    }

    pub fn from_design(dm: &DesignMatrix) -> Self {
        let xt = dm.x.transpose();
        LocalStats {
            o: &xt * &dm.x,
            v: &xt * &dm.y,
            n: dm.x.nrows() as u64,
        }
    }

    /// Statistics of the whole dataset, normalized first when `norm` is given.
    pub fn from_dataset(
        ds: &Dataset,
        norm: Option<&NormalizationMap>,
    ) -> Result<Self, AggregationError> {
        let dm = match norm {
            Some(map) => to_design_matrix(&map.apply(ds)?),
            None => to_design_matrix(ds),
        };
        Ok(Self::from_design(&dm))
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn add(&self, other: &LocalStats) -> Result<LocalStats, AggregationError> {
        if self.dim() != other.dim() {
            return Err(AggregationError::DimMismatch(self.dim(), other.dim()));
        }
        Ok(LocalStats {
            o: &self.o + &other.o,
            v: &self.v + &other.v,
            n: self.n + other.n,
        })
    }

    /// Number of packed cells for design width `m`: the upper triangle of O,
    /// all of V, and the row count.
    pub fn packed_len(m: usize) -> usize {
        m * (m + 1) / 2 + m + 1
    }

    /// Fixed-point packing: O's upper triangle column by column, V, then n
    /// unscaled.
    pub fn pack(&self, scale: f64) -> Result<Vec<i128>, CryptoError> {
        let m = self.dim();
        let mut out = Vec::with_capacity(Self::packed_len(m));
        for j in 0..m {
            for i in 0..=j {
                out.push(encode_fixed(self.o[(i, j)], scale)?);
            }
        }
        for j in 0..m {
            out.push(encode_fixed(self.v[j], scale)?);
        }
        out.push(self.n as i128);
        Ok(out)
    }

    pub fn unpack(m: usize, packed: &[i128], scale: f64) -> Result<Self, AggregationError> {
        if packed.len() != Self::packed_len(m) {
            return Err(AggregationError::Transport(format!(
                "expected {} packed cells for width {m}, got {}",
                Self::packed_len(m),
                packed.len()
            )));
        }
        let mut o = DMatrix::zeros(m, m);
        let mut k = 0;
        for j in 0..m {
            for i in 0..=j {
                let x = decode_fixed(packed[k], scale);
                o[(i, j)] = x;
                o[(j, i)] = x;
                k += 1;
            }
        }
        let v = DVector::from_iterator(m, packed[k..k + m].iter().map(|&x| decode_fixed(x, scale)));
        let n = u64::try_from(packed[k + m])
            .map_err(|_| AggregationError::Transport("negative row count".into()))?;
        Ok(LocalStats { o, v, n })
    }
}

/// Statistics of the rows `agreement` releases from `ds`.
pub fn local_stats(
    ds: &Dataset,
    agreement: &Agreement,
    norm: Option<&NormalizationMap>,
) -> Result<LocalStats, AggregationError> {
    if agreement.status == Status::Empty {
        return Err(AggregationError::EmptyRelease(agreement.owner.clone()));
    }
    let released = agreement
        .released(ds)
        .map_err(|e| AggregationError::Policy(e.to_string()))?;
    if released.is_empty() {
        return Err(AggregationError::EmptyRelease(agreement.owner.clone()));
    }
    LocalStats::from_dataset(&released, norm)
}
