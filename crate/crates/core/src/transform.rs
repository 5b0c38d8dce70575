//! Orthonormal base transforms: the fast Walsh–Hadamard transform, a dense
//! reference DCT, and the zero-padding helpers that lift an arbitrary
//! dimension to the next power of two.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::DenseSignal;

/// Largest dimension for which [`dct_reference`] will build a dense matrix.
pub const DCT_REFERENCE_MAX_DIM: usize = 4096;

/// The orthogonal matrix whose rows are subsampled to form a sensing matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseTransformKind {
    Wht,
    Dct,
}

impl BaseTransformKind {
    pub(crate) fn code(self) -> u8 {
        match self {
            BaseTransformKind::Wht => 0,
            BaseTransformKind::Dct => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(BaseTransformKind::Wht),
            1 => Some(BaseTransformKind::Dct),
            _ => None,
        }
    }
}

/// Normalized Walsh–Hadamard transform `H^(log2 d) x`.
pub fn fwht(x: &DenseSignal) -> Result<DenseSignal> {
    let mut v = x.as_slice().to_vec();
    fwht_in_place(&mut v)?;
    Ok(DenseSignal::from_vec_unchecked(v))
}

/// In-place butterflies; every stage is scaled by 1/√2 so each is orthonormal.
pub(crate) fn fwht_in_place(v: &mut [f64]) -> Result<()> {
    let d = v.len();
    if !d.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(d));
    }
    let mut half = 1;
    while half < d {
        for block in v.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (s, t) = (*a + *b, *a - *b);
                *a = s * FRAC_1_SQRT_2;
                *b = t * FRAC_1_SQRT_2;
            }
        }
        half *= 2;
    }
    Ok(())
}

/// Dense orthogonal DCT matrix with
/// `B[i][j] = sqrt(2/d) / sqrt(1 + [i == 0]) * cos(pi * i * (2j + 1) / (2d))`
/// (zero-based indices).
pub fn dct_reference(d: usize) -> Result<DMatrix<f64>> {
    if d == 0 || d > DCT_REFERENCE_MAX_DIM {
        return Err(Error::Size(format!(
            "dense DCT supports 1 <= d <= {DCT_REFERENCE_MAX_DIM}, got {d}"
        )));
    }
    let base = (2.0 / d as f64).sqrt();
    Ok(DMatrix::from_fn(d, d, |i, j| {
        let norm = if i == 0 { FRAC_1_SQRT_2 } else { 1.0 };
        base * norm * (PI * i as f64 * (2 * j + 1) as f64 / (2 * d) as f64).cos()
    }))
}

/// `2^ceil(log2 d)`.
pub fn augmented_dim(d: usize) -> usize {
    d.next_power_of_two()
}

/// Appends zeros up to the next power of two.
pub fn pad_to_pow2(x: &DenseSignal) -> DenseSignal {
    let mut v = x.as_slice().to_vec();
    v.resize(augmented_dim(x.dim()), 0.0);
    DenseSignal::from_vec_unchecked(v)
}

/// First `d` entries of `x`.
pub fn truncate(x: &DenseSignal, d: usize) -> Result<DenseSignal> {
    if d == 0 || d > x.dim() {
        return Err(Error::Dimension {
            expected: x.dim(),
            got: d,
        });
    }
    Ok(DenseSignal::from_vec_unchecked(x.as_slice()[..d].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand::rngs::StdRng;

    fn sig(v: &[f64]) -> DenseSignal {
        DenseSignal::new(v.to_vec()).unwrap()
    }

    #[test]
    fn fwht_small_cases() {
        let h = fwht(&sig(&[1.0, 0.0])).unwrap();
        assert!((h.as_slice()[0] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((h.as_slice()[1] - FRAC_1_SQRT_2).abs() < 1e-15);
        let h = fwht(&sig(&[1.0, 1.0])).unwrap();
        assert!((h.as_slice()[0] - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert_eq!(h.as_slice()[1], 0.0);
        assert_eq!(fwht(&sig(&[1.0, 2.0, 3.0])), Err(Error::NotPowerOfTwo(3)));
    }

    #[test]
    fn fwht_is_an_involution() {
        let mut rng = StdRng::seed_from_u64(1);
        let x = sig(&(0..256).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
        let back = fwht(&fwht(&x).unwrap()).unwrap();
        for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn dct_small_cases() {
        assert!((dct_reference(1).unwrap()[(0, 0)] - 1.0).abs() < 1e-15);
        let b = dct_reference(2).unwrap();
        let r = FRAC_1_SQRT_2;
        for (got, want) in b.iter().zip([r, r, r, -r]) {
            // column-major iteration: (0,0), (1,0), (0,1), (1,1)
            assert!((got - want).abs() < 1e-15);
        }
        let b = dct_reference(4).unwrap();
        let err = (&b * b.transpose() - DMatrix::identity(4, 4)).abs().max();
        assert!(err <= 1e-12);
        assert!(dct_reference(DCT_REFERENCE_MAX_DIM + 1).is_err());
        assert!(dct_reference(0).is_err());
    }

    #[test]
    fn padding() {
        let p = pad_to_pow2(&sig(&[1.0, 2.0, 3.0]));
        assert_eq!(p.as_slice(), &[1.0, 2.0, 3.0, 0.0]);
        let x = sig(&[1.0, 2.0]);
        assert_eq!(pad_to_pow2(&x), x);
        assert_eq!(pad_to_pow2(&DenseSignal::zeros(5)).dim(), 8);
        assert_eq!(truncate(&p, 3).unwrap().as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(truncate(&p, 4).unwrap(), p);
        assert!(truncate(&p, 5).is_err());
    }

    #[test]
    fn pad_truncate_roundtrip() {
        let mut rng = StdRng::seed_from_u64(2);
        for _ in 0..100 {
            let d = rng.random_range(1..=3000);
            let x = sig(&(0..d).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
            assert_eq!(truncate(&pad_to_pow2(&x), d).unwrap(), x);
        }
    }
}
