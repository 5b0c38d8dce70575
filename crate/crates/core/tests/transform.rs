use csgrad::rng::SplitMix64;
use csgrad::transform::augmented_dim;
use csgrad::{dct_reference, fwht, pad_to_pow2, truncate, DenseSignal};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn randn(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

/// H(1) = [[1, 1], [1, -1]] / √2 and H(k) = H(1) ⊗ H(k-1), built densely.
fn dense_hadamard(d: usize) -> Vec<Vec<f64>> {
    let mut h = vec![vec![1.0]];
    let r = std::f64::consts::FRAC_1_SQRT_2;
    while h.len() < d {
        let m = h.len();
        let mut next = vec![vec![0.0; 2 * m]; 2 * m];
        for i in 0..m {
            for j in 0..m {
                next[i][j] = r * h[i][j];
                next[i][j + m] = r * h[i][j];
                next[i + m][j] = r * h[i][j];
                next[i + m][j + m] = -r * h[i][j];
            }
        }
        h = next;
    }
    h
}

#[test]
fn fwht_matches_dense_recursion() {
    let mut d = 2;
    while d <= 1024 {
        let h = dense_hadamard(d);
        let x = randn(d, d as u64);
        let fast = fwht(&DenseSignal::new(x.clone()).unwrap()).unwrap();
        let dev = h
            .iter()
            .zip(fast.as_slice())
            .map(|(row, f)| (row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() - f).abs())
            .fold(0.0, f64::max);
        assert!(dev <= 1e-10, "d={d}: deviation {dev}");
        let bound = (2.0 / d as f64).sqrt() + 1e-12;
        assert!(h.iter().flatten().all(|v| v.abs() <= bound));
        d *= 2;
    }
}

#[test]
fn parseval_and_involution_at_one_million() {
    let d = 1 << 20;
    let x = DenseSignal::new(randn(d, 99)).unwrap();
    let y = fwht(&x).unwrap();
    assert!((y.norm2() - x.norm2()).abs() <= 1e-12 * x.norm2());
    let back = fwht(&y).unwrap();
    let err: f64 = back
        .as_slice()
        .iter()
        .zip(x.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    assert!(err <= 1e-12 * x.norm2());
}

#[test]
fn dct_reference_is_orthogonal_with_bounded_entries() {
    for d in [3, 5, 16, 100] {
        let b = dct_reference(d).unwrap();
        let err = (&b * b.transpose() - nalgebra::DMatrix::identity(d, d)).abs().max();
        assert!(err <= 1e-12, "d={d}");
        let bound = (2.0 / d as f64).sqrt() + 1e-12;
        assert!(b.iter().all(|v| v.abs() <= bound));
    }
}

#[test]
fn dct_rows_follow_the_cosine_formula() {
    let d = 7;
    let b = dct_reference(d).unwrap();
    for i in 0..d {
        for j in 0..d {
            let c0 = if i == 0 { (1.0 / d as f64).sqrt() } else { (2.0 / d as f64).sqrt() };
            let want = c0 * (std::f64::consts::PI * i as f64 * (2 * j + 1) as f64 / (2 * d) as f64).cos();
            assert!((b[(i, j)] - want).abs() < 1e-14);
        }
    }
}

#[test]
fn errors() {
    assert!(fwht(&DenseSignal::zeros(3)).is_err());
    assert!(truncate(&DenseSignal::zeros(4), 5).is_err());
    assert_eq!(augmented_dim(1), 1);
    assert_eq!(augmented_dim(5), 8);
    assert_eq!(augmented_dim(16384), 16384);
}

proptest! {
    #[test]
    fn fwht_preserves_norm(k in 0u32..10, seed in any::<u64>()) {
        let x = DenseSignal::new(randn(1 << k, seed)).unwrap();
        let y = fwht(&x).unwrap();
        prop_assert!((y.norm2() - x.norm2()).abs() <= 1e-12 * (1.0 + x.norm2()));
    }

    #[test]
    fn pad_then_truncate_is_identity(d in 1usize..300, seed in any::<u64>()) {
        let x = DenseSignal::new(randn(d, seed)).unwrap();
        let p = pad_to_pow2(&x);
        prop_assert_eq!(p.dim(), augmented_dim(d));
        prop_assert_eq!(truncate(&p, d).unwrap(), x);
    }
}
