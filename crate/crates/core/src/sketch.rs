//! Count sketch: the compression baseline.
//!
//! Row `i` hashes coordinate `j` with `h = derive_seed(seed, &[i, j])`
//! (see [`crate::rng`]); the bucket is `(h >> 32) % cols` and the sign is `+1`
//! when bit 0 of `h` is clear, `-1` otherwise. Coordinates are estimated by
//! the median over rows of the signed bucket values; for an even number of
//! rows the median is the mean of the two central values.

use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::signal::{best_k, DenseSignal, SparseSignal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountSketchParams {
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
    pub dim: usize,
}

impl CountSketchParams {
    pub fn new(rows: usize, cols: usize, seed: u64, dim: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || dim == 0 {
            return Err(Error::Parameter(format!(
                "count sketch needs rows, cols, dim >= 1 (got {rows}, {cols}, {dim})"
            )));
        }
        Ok(CountSketchParams {
            rows,
            cols,
            seed,
            dim,
        })
    }

    /// Bucket and sign of coordinate `j` in row `i`.
    pub fn hash(&self, i: usize, j: usize) -> (usize, f64) {
        let h = derive_seed(self.seed, &[i as u64, j as u64]);
        let bucket = ((h >> 32) % self.cols as u64) as usize;
        let sign = if h & 1 == 0 { 1.0 } else { -1.0 };
        (bucket, sign)
    }
}

/// An `rows × cols` grid of counters, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchTable {
    params: CountSketchParams,
    cells: Vec<f64>,
}

impl SketchTable {
    pub fn zeros(params: CountSketchParams) -> Self {
        SketchTable {
            params,
            cells: vec![0.0; params.rows * params.cols],
        }
    }

    pub fn params(&self) -> &CountSketchParams {
        &self.params
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[row * self.params.cols + col]
    }

    /// Flattened row-major counters.
    pub fn as_slice(&self) -> &[f64] {
        &self.cells
    }

    pub(crate) fn cells_mut(&mut self) -> &mut [f64] {
        &mut self.cells
    }

    pub fn norm2(&self) -> f64 {
        crate::signal::norm2(&self.cells)
    }

    /// Little-endian bytes of every counter, for determinism checks.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.cells.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

/// Hash tables expanded once for a fixed operator (same values as
/// [`CountSketchParams::hash`]).
#[derive(Debug, Clone)]
pub struct CountSketch {
    params: CountSketchParams,
    buckets: Vec<u32>,
    signs: Vec<f64>,
}

impl CountSketch {
    pub fn new(params: CountSketchParams) -> Self {
        let n = params.rows * params.dim;
        let mut buckets = Vec::with_capacity(n);
        let mut signs = Vec::with_capacity(n);
        for i in 0..params.rows {
            for j in 0..params.dim {
                let (b, s) = params.hash(i, j);
                buckets.push(b as u32);
                signs.push(s);
            }
        }
        CountSketch {
            params,
            buckets,
            signs,
        }
    }

    pub fn params(&self) -> &CountSketchParams {
        &self.params
    }

    pub fn compress(&self, x: &DenseSignal) -> Result<SketchTable> {
        self.check_dim(x.dim())?;
        Ok(self.compress_slice(x.as_slice()))
    }

    pub(crate) fn compress_slice(&self, x: &[f64]) -> SketchTable {
        let p = &self.params;
        let mut table = SketchTable::zeros(*p);
        for i in 0..p.rows {
            let row = &mut table.cells[i * p.cols..(i + 1) * p.cols];
            let off = i * p.dim;
            for (j, &v) in x.iter().enumerate() {
                row[self.buckets[off + j] as usize] += self.signs[off + j] * v;
            }
        }
        table
    }

    /// Median-of-rows estimate of every coordinate.
    pub fn estimate(&self, table: &SketchTable) -> Result<Vec<f64>> {
        if table.params != self.params {
            return Err(Error::Parameter("table was built by a different sketch".into()));
        }
        let p = &self.params;
        let mut views = vec![0.0; p.rows];
        Ok((0..p.dim)
            .map(|j| {
                for (i, v) in views.iter_mut().enumerate() {
                    let off = i * p.dim + j;
                    *v = self.signs[off] * table.get(i, self.buckets[off] as usize);
                }
                median(&mut views)
            })
            .collect())
    }

    pub fn reconstruct(&self, table: &SketchTable, k: usize) -> Result<SparseSignal> {
        if k == 0 {
            return Err(Error::Parameter("K must be at least 1".into()));
        }
        let est = self.estimate(table)?;
        Ok(best_k(&DenseSignal::from_vec_unchecked(est), k))
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.params.dim {
            return Err(Error::Dimension {
                expected: self.params.dim,
                got,
            });
        }
        Ok(())
    }
}

pub fn cs_compress(x: &DenseSignal, params: &CountSketchParams) -> Result<SketchTable> {
    CountSketch::new(*params).compress(x)
}

/// Entrywise `Σ weights[k] · tables[k]`, accumulated in list order.
pub fn cs_combine(tables: &[SketchTable], weights: &[f64]) -> Result<SketchTable> {
    let first = tables
        .first()
        .ok_or_else(|| Error::Parameter("no tables to combine".into()))?;
    if tables.len() != weights.len() {
        return Err(Error::Parameter(format!(
            "{} tables but {} weights",
            tables.len(),
            weights.len()
        )));
    }
    let mut out = SketchTable::zeros(first.params);
    for (t, &w) in tables.iter().zip(weights) {
        if t.params != first.params {
            return Err(Error::Parameter("sketch tables have different parameters".into()));
        }
        for (o, v) in out.cells.iter_mut().zip(&t.cells) {
            *o += w * v;
        }
    }
    Ok(out)
}

pub fn cs_reconstruct(table: &SketchTable, k: usize) -> Result<SparseSignal> {
    CountSketch::new(table.params).reconstruct(table, k)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
