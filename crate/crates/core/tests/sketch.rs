use csgrad::rng::SplitMix64;
use csgrad::sketch::{cs_combine, cs_compress, CountSketch, CountSketchParams};
use csgrad::DenseSignal;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn randn(d: usize, rng: &mut SplitMix64) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

#[test]
fn combined_tables_equal_sketch_of_the_mean() {
    let d = 300;
    let p = CountSketchParams::new(4, 37, 11, d).unwrap();
    let mut rng = SplitMix64::new(1);
    let xs: Vec<Vec<f64>> = (0..3).map(|_| randn(d, &mut rng)).collect();
    let tables: Vec<_> = xs
        .iter()
        .map(|x| cs_compress(&DenseSignal::new(x.clone()).unwrap(), &p).unwrap())
        .collect();
    let combined = cs_combine(&tables, &[1.0 / 3.0; 3]).unwrap();
    let mean: Vec<f64> = (0..d).map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / 3.0).collect();
    let direct = cs_compress(&DenseSignal::new(mean).unwrap(), &p).unwrap();
    for (a, b) in combined.as_slice().iter().zip(direct.as_slice()) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn single_row_estimator_is_unbiased() {
    let d = 256;
    let x = randn(d, &mut SplitMix64::new(2));
    let signal = DenseSignal::new(x.clone()).unwrap();
    let trials = 10_000;
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    for seed in 0..trials {
        let sk = CountSketch::new(CountSketchParams::new(1, 32, seed, d).unwrap());
        let est = sk.estimate(&sk.compress(&signal).unwrap()).unwrap();
        for j in 0..d {
            let e = est[j] - x[j];
            sum[j] += e;
            sum_sq[j] += e * e;
        }
    }
    let n = trials as f64;
    for j in 0..d {
        let mean = sum[j] / n;
        let std = ((sum_sq[j] / n - mean * mean) * n / (n - 1.0)).sqrt();
        assert!(mean.abs() <= 4.0 * std / n.sqrt(), "coordinate {j}: bias {mean}, std {std}");
    }
}

#[test]
fn hash_is_stateless() {
    let p = CountSketchParams::new(3, 10, 5, 50).unwrap();
    let q = CountSketchParams::new(3, 10, 5, 80).unwrap();
    for i in 0..3 {
        for j in 0..50 {
            assert_eq!(p.hash(i, j), q.hash(i, j));
            assert!(p.hash(i, j).0 < 10);
        }
    }
}

/// Rebuilds `a·u + b·v` from the same stream, for the determinism check.
fn mixed_signal(seed: u64, d: usize, a: f64, b: f64) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    let u = randn(d, &mut rng);
    let v = randn(d, &mut rng);
    u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect()
}

proptest! {
    #[test]
    fn compression_is_linear(
        d in 1usize..200,
        rows in 1usize..6,
        cols in 1usize..40,
        seed in any::<u64>(),
        a in -10.0f64..10.0,
        b in -10.0f64..10.0,
    ) {
        let p = CountSketchParams::new(rows, cols, seed, d).unwrap();
        let mut rng = SplitMix64::new(seed);
        let u = randn(d, &mut rng);
        let v = randn(d, &mut rng);
        let mix: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let tu = cs_compress(&DenseSignal::new(u).unwrap(), &p).unwrap();
        let tv = cs_compress(&DenseSignal::new(v).unwrap(), &p).unwrap();
        let tm = cs_compress(&DenseSignal::new(mix).unwrap(), &p).unwrap();
        let lin = cs_combine(&[tu, tv], &[a, b]).unwrap();
        for (x, y) in tm.as_slice().iter().zip(lin.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
        let again = cs_compress(&DenseSignal::new(mixed_signal(seed, d, a, b)).unwrap(), &p).unwrap();
        prop_assert_eq!(tm.to_bytes(), again.to_bytes());
    }
}
