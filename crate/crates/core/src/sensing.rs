//! Subsampled orthogonal sensing matrices.
//!
//! A [`SensingMatrix`] is never materialized. It is the set `Σ` of `Q` distinct
//! rows of an orthogonal `d_aug × d_aug` base matrix, scaled by
//! `sqrt(d_aug / Q)`, restricted to the first `d` columns. Products with it go
//! through the fast transform: pad, transform, gather, scale (and the reverse
//! for the adjoint), so both cost `O(d_aug log d_aug)` for the WHT base.
//!
//! # Binary layout
//!
//! [`SensingMatrix::to_bytes`] writes a 16-byte little-endian header followed
//! by the row indices:
//!
//! | offset | size | field                                  |
//! |-------:|-----:|----------------------------------------|
//! | 0      | 1    | base kind (`0` = WHT, `1` = DCT)        |
//! | 1      | 1    | reserved, must be `0`                   |
//! | 2      | 2    | format version (`u16`, currently `1`)   |
//! | 4      | 4    | signal dimension `d` (`u32`)            |
//! | 8      | 4    | number of rows `Q` (`u32`)              |
//! | 12     | 4    | low 32 bits of the generation seed      |
//! | 16     | 4·Q  | row indices, ascending (`u32` each)     |
//!
//! The rows are stored explicitly, so a decoded matrix is the same operator
//! regardless of the seed field, which is informational.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::signal::{DenseSignal, IndexSet};
use crate::transform::{augmented_dim, dct_reference, fwht_in_place, BaseTransformKind};

pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 16;

/// A vector of `Q` compressed measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement(Vec<f64>);

impl Measurement {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Measurement(values))
    }

    pub fn zeros(q: usize) -> Self {
        Measurement(vec![0.0; q])
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Measurement(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm2(&self) -> f64 {
        crate::signal::norm2(&self.0)
    }
}

#[derive(Debug, Clone)]
pub struct SensingMatrix {
    base: BaseTransformKind,
    d: usize,
    d_aug: usize,
    rows: IndexSet,
    scale: f64,
    seed: u64,
    // Selected rows of the dense DCT (Q × d_aug); only for the DCT base.
    dct_rows: Option<Arc<DMatrix<f64>>>,
}

/// Matrices are equal when they define the same operator.
impl PartialEq for SensingMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.base == other.base && self.d == other.d && self.rows == other.rows
    }
}

impl SensingMatrix {
    /// Samples `q` distinct rows uniformly from `[0, d_aug)` with a seeded
    /// partial Fisher–Yates shuffle driven by [`SplitMix64::new(seed)`](SplitMix64).
    pub fn generate(base: BaseTransformKind, d: usize, q: usize, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Size("signal dimension must be positive".into()));
        }
        let d_aug = augmented_dim(d);
        if q == 0 || q > d_aug {
            return Err(Error::Size(format!(
                "number of rows Q={q} must be in 1..={d_aug}"
            )));
        }
        let mut pool: Vec<usize> = (0..d_aug).collect();
        let mut rng = SplitMix64::new(seed);
        for i in 0..q {
            let j = i + rng.below((d_aug - i) as u64) as usize;
            pool.swap(i, j);
        }
        pool.truncate(q);
        pool.sort_unstable();
        Self::from_rows(base, d, IndexSet::from_sorted_unchecked(d_aug, pool), seed)
    }

    /// Builds the operator for an explicit row set over `[0, d_aug)`.
    pub fn from_rows(base: BaseTransformKind, d: usize, rows: IndexSet, seed: u64) -> Result<Self> {
        let d_aug = augmented_dim(d);
        if rows.dim() != d_aug {
            return Err(Error::Dimension {
                expected: d_aug,
                got: rows.dim(),
            });
        }
        let q = rows.len();
        if q == 0 {
            return Err(Error::Size("sensing matrix needs at least one row".into()));
        }
        let dct_rows = match base {
            BaseTransformKind::Wht => None,
            BaseTransformKind::Dct => {
                let full = dct_reference(d_aug)?;
                Some(Arc::new(full.select_rows(rows.as_slice())))
            }
        };
        Ok(SensingMatrix {
            base,
            d,
            d_aug,
            scale: (d_aug as f64 / q as f64).sqrt(),
            rows,
            seed,
            dct_rows,
        })
    }

    pub fn base(&self) -> BaseTransformKind {
        self.base
    }

    /// Signal dimension (number of columns).
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn augmented_dim(&self) -> usize {
        self.d_aug
    }

    /// Number of measurements `Q`.
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &IndexSet {
        &self.rows
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `Φ u` for `u` of dimension `d`.
    pub fn apply(&self, u: &DenseSignal) -> Result<Measurement> {
        check_dim(self.d, u.dim())?;
        Ok(Measurement(self.apply_slice(u.as_slice())))
    }

    /// `Φᵀ v` for `v` of dimension `Q`.
    pub fn adjoint(&self, v: &Measurement) -> Result<DenseSignal> {
        check_dim(self.num_rows(), v.len())?;
        Ok(DenseSignal::from_vec_unchecked(self.adjoint_slice(v.as_slice())))
    }

    /// Product with the full `Q × d_aug` matrix, for `u` of dimension `d_aug`.
    pub fn apply_augmented(&self, u: &[f64]) -> Result<Measurement> {
        check_dim(self.d_aug, u.len())?;
        Ok(Measurement(self.apply_slice(u)))
    }

    /// Adjoint of the full `Q × d_aug` matrix; returns `d_aug` entries.
    pub fn adjoint_augmented(&self, v: &Measurement) -> Result<Vec<f64>> {
        check_dim(self.num_rows(), v.len())?;
        Ok(self.adjoint_full(v.as_slice()))
    }

    /// `u` may have any length up to `d_aug`; missing entries are zero.
    pub(crate) fn apply_slice(&self, u: &[f64]) -> Vec<f64> {
        debug_assert!(u.len() <= self.d_aug);
        match &self.dct_rows {
            None => {
                let mut buf = vec![0.0; self.d_aug];
                buf[..u.len()].copy_from_slice(u);
                fwht_in_place(&mut buf).expect("augmented dimension is a power of two");
                self.rows.iter().map(|r| self.scale * buf[r]).collect()
            }
            Some(m) => (0..m.nrows())
                .map(|q| {
                    let row = m.row(q);
                    let s: f64 = u.iter().enumerate().map(|(j, x)| row[j] * x).sum();
                    self.scale * s
                })
                .collect(),
        }
    }

    /// Adjoint truncated to the first `d` entries.
    pub(crate) fn adjoint_slice(&self, v: &[f64]) -> Vec<f64> {
        let mut full = self.adjoint_full(v);
        full.truncate(self.d);
        full
    }

    pub(crate) fn adjoint_full(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.num_rows());
        match &self.dct_rows {
            None => {
                let mut buf = vec![0.0; self.d_aug];
                for (r, &val) in self.rows.iter().zip(v) {
                    buf[r] = val;
                }
                fwht_in_place(&mut buf).expect("augmented dimension is a power of two");
                for b in &mut buf {
                    *b *= self.scale;
                }
                buf
            }
            Some(m) => {
                let mut out = vec![0.0; self.d_aug];
                for (q, &val) in v.iter().enumerate() {
                    let row = m.row(q);
                    for (o, b) in out.iter_mut().zip(row.iter()) {
                        *o += b * val;
                    }
                }
                for o in &mut out {
                    *o *= self.scale;
                }
                out
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let q = self.num_rows();
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * q);
        out.push(self.base.code());
        out.push(0);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.d as u32).to_le_bytes());
        out.extend_from_slice(&(q as u32).to_le_bytes());
        out.extend_from_slice(&(self.seed as u32).to_le_bytes());
        for r in self.rows.iter() {
            out.extend_from_slice(&(r as u32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Parse(format!(
                "payload of {} bytes is shorter than the {HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        let base = BaseTransformKind::from_code(bytes[0])
            .ok_or_else(|| Error::Parse(format!("unknown base kind {}", bytes[0])))?;
        if bytes[1] != 0 {
            return Err(Error::Parse("reserved byte must be zero".into()));
        }
        let version = u16::from_le_bytes([bytes[2], bytes[3]]);
        if version != FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported format version {version}")));
        }
        let d = u32_at(4) as usize;
        let q = u32_at(8) as usize;
        let seed = u32_at(12) as u64;
        if d == 0 {
            return Err(Error::Parse("dimension must be positive".into()));
        }
        let d_aug = augmented_dim(d);
        if q == 0 || q > d_aug {
            return Err(Error::Parse(format!("row count {q} out of range 1..={d_aug}")));
        }
        if bytes.len() != HEADER_LEN + 4 * q {
            return Err(Error::Parse(format!(
                "expected {} bytes for {q} rows, got {}",
                HEADER_LEN + 4 * q,
                bytes.len()
            )));
        }
        let mut rows = Vec::with_capacity(q);
        for k in 0..q {
            let r = u32_at(HEADER_LEN + 4 * k) as usize;
            if r >= d_aug {
                return Err(Error::Parse(format!("row index {r} out of range for {d_aug}")));
            }
            if rows.last().is_some_and(|&prev| prev >= r) {
                return Err(Error::Parse("row indices must be strictly increasing".into()));
            }
            rows.push(r);
        }
        Self::from_rows(base, d, IndexSet::from_sorted_unchecked(d_aug, rows), seed)
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}
