//! Dense and sparse real signals and the elementary operations the recovery
//! algorithms are built from.
//!
//! Top-K selection everywhere in the crate uses one total order: larger
//! magnitude first, and among equal magnitudes the lower index first.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// A finite real vector of fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSignal {
    values: Vec<f64>,
}

impl DenseSignal {
    /// Wraps `values`, rejecting empty input and NaN/Inf entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Size("signal dimension must be positive".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(DenseSignal { values })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "signal dimension must be positive");
        DenseSignal {
            values: vec![0.0; dim],
        }
    }

    /// Wraps values already known to be finite and non-empty.
    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(!values.is_empty());
        debug_assert!(values.iter().all(|v| v.is_finite()));
        DenseSignal { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn norm1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn norm2(&self) -> f64 {
        norm2(&self.values)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// A signal stored as its (index, value) pairs, sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSignal {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseSignal {
    pub fn empty(dim: usize) -> Self {
        SparseSignal {
            dim,
            entries: Vec::new(),
        }
    }

    /// Builds a sparse signal, validating bounds, distinctness and finiteness.
    /// Entries may be given in any order.
    pub fn new(dim: usize, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.sort_by_key(|&(i, _)| i);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Parameter(format!("duplicate index {}", w[0].0)));
            }
        }
        for &(i, v) in &entries {
            if i >= dim {
                return Err(Error::Bounds { index: i, dim });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite(i));
            }
        }
        Ok(SparseSignal { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    /// Number of stored entries whose value is nonzero.
    pub fn nnz(&self) -> usize {
        self.entries.iter().filter(|(_, v)| *v != 0.0).count()
    }

    pub fn densify(&self) -> DenseSignal {
        DenseSignal::from_vec_unchecked(self.to_vec())
    }

    pub(crate) fn to_vec(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }
}

/// Sorted set of distinct indices below `dim`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    dim: usize,
    indices: Vec<usize>,
}

impl IndexSet {
    pub fn new(dim: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last >= dim {
                return Err(Error::Bounds { index: last, dim });
            }
        }
        Ok(IndexSet { dim, indices })
    }

    pub(crate) fn from_sorted_unchecked(dim: usize, indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(indices.last().map_or(true, |&l| l < dim));
        IndexSet { dim, indices }
    }

    pub fn full(dim: usize) -> Self {
        IndexSet {
            dim,
            indices: (0..dim).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn complement(&self) -> IndexSet {
        let mut mask = vec![true; self.dim];
        for &i in &self.indices {
            mask[i] = false;
        }
        IndexSet {
            dim: self.dim,
            indices: (0..self.dim).filter(|&i| mask[i]).collect(),
        }
    }
}

/// `‖x‖₁² / (‖x‖₂² · d)`, a value in `[1/d, 1]`.
pub fn sparsity_level(x: &DenseSignal) -> Result<f64> {
    sparsity_of(x.as_slice()).ok_or_else(|| Error::Domain("sp undefined at 0".into()))
}

/// Sparsity level of a raw slice; `None` for the zero vector.
pub fn sparsity_of(x: &[f64]) -> Option<f64> {
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    let l2sq: f64 = x.iter().map(|v| v * v).sum();
    if l2sq == 0.0 {
        return None;
    }
    Some((l1 * l1 / (l2sq * x.len() as f64)).min(1.0))
}

/// Best K-term approximation: the K largest-magnitude nonzero entries.
pub fn best_k(x: &DenseSignal, k: usize) -> SparseSignal {
    let support = top_k_indices(x.as_slice(), k);
    SparseSignal {
        dim: x.dim(),
        entries: support
            .iter()
            .filter(|&i| x.values[i] != 0.0)
            .map(|i| (i, x.values[i]))
            .collect(),
    }
}

/// Indices of the K largest-magnitude entries (zeros included when needed).
pub fn principal_support(x: &DenseSignal, k: usize) -> IndexSet {
    top_k_indices(x.as_slice(), k)
}

/// Keeps `x` on `s` and zeroes it elsewhere.
pub fn project(x: &DenseSignal, s: &IndexSet) -> Result<DenseSignal> {
    if s.dim() != x.dim() {
        if let Some(&bad) = s.as_slice().iter().find(|&&i| i >= x.dim()) {
            return Err(Error::Bounds {
                index: bad,
                dim: x.dim(),
            });
        }
    }
    let mut out = vec![0.0; x.dim()];
    for i in s.iter() {
        out[i] = x.values[i];
    }
    Ok(DenseSignal::from_vec_unchecked(out))
}

#[inline]
fn magnitude_order(values: &[f64], a: usize, b: usize) -> Ordering {
    values[b]
        .abs()
        .total_cmp(&values[a].abs())
        .then_with(|| a.cmp(&b))
}

/// Top-K selection in O(d) expected time followed by an O(K log K) sort.
pub(crate) fn top_k_indices(values: &[f64], k: usize) -> IndexSet {
    let d = values.len();
    if k >= d {
        return IndexSet::full(d);
    }
    if k == 0 {
        return IndexSet::from_sorted_unchecked(d, Vec::new());
    }
    let mut idx: Vec<usize> = (0..d).collect();
    idx.select_nth_unstable_by(k - 1, |&a, &b| magnitude_order(values, a, b));
    idx.truncate(k);
    idx.sort_unstable();
    IndexSet::from_sorted_unchecked(d, idx)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2_sq(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    norm2_sq(a).sqrt()
}

/// Copies `x` restricted to `support` into a fresh zero vector.
pub(crate) fn project_slice(x: &[f64], support: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for &i in support {
        out[i] = x[i];
    }
    out
}
