use csgrad::rng::SplitMix64;
use csgrad::signal::sparsity_of;
use csgrad::synth::{make_problem, make_recon_signal, mean_spectrum, DEFAULT_R1, DEFAULT_R2, DEFAULT_SPIKE_PROB};
use csgrad::DenseSignal;

fn point(d: usize, seed: u64) -> DenseSignal {
    let mut rng = SplitMix64::new(seed);
    DenseSignal::new((0..d).map(|_| rng.below(2001) as f64 / 1000.0 - 1.0).collect()).unwrap()
}

#[test]
fn device_spectra_average_to_the_mean_spectrum() {
    for n in [1, 2, 5, 20] {
        let p = make_problem(500, n, n as u64).unwrap();
        for j in 0..500 {
            let avg: f64 = (0..n).map(|i| p.device_diag(i)[j]).sum::<f64>() / n as f64;
            assert!((avg - mean_spectrum(j + 1)).abs() <= 1e-12);
            assert_eq!(p.mean_diag()[j], mean_spectrum(j + 1));
        }
    }
}

#[test]
fn optimum_is_zero_and_objective_nonnegative() {
    let p = make_problem(128, 7, 3).unwrap();
    assert_eq!(p.objective(p.optimum()).unwrap(), 0.0);
    assert!(p.exact_gradient(p.optimum()).unwrap().is_zero());
    for s in 0..20 {
        assert!(p.objective(&point(128, s)).unwrap() >= 0.0);
    }
}

#[test]
fn oracle_is_unbiased() {
    let (d, draws) = (64, 10_000);
    let p = make_problem(d, 3, 21).unwrap();
    let x = point(d, 4);
    let x0 = p.optimum().as_slice();
    for i in 0..3 {
        let exact: Vec<f64> = (0..d).map(|j| p.device_diag(i)[j] * (x.as_slice()[j] - x0[j])).collect();
        let mut rng = SplitMix64::new(100 + i as u64);
        let mut sum = vec![0.0; d];
        let mut sum_sq = vec![0.0; d];
        for _ in 0..draws {
            let g = p.grad_oracle(i, &x, &mut rng).unwrap();
            for (j, v) in g.as_slice().iter().enumerate() {
                let e = v - exact[j];
                sum[j] += e;
                sum_sq[j] += e * e;
            }
        }
        let n = draws as f64;
        for j in 0..d {
            let mean = sum[j] / n;
            let std = (sum_sq[j] / n - mean * mean).sqrt();
            assert!(mean.abs() <= 5.0 * std / n.sqrt(), "device {i}, coordinate {j}");
        }
    }
}

#[test]
fn oracle_second_moment_matches_closed_form() {
    let (d, draws) = (1024, 10_000);
    let p = make_problem(d, 2, 8).unwrap();
    let x = point(d, 9);
    let x0 = p.optimum().as_slice();
    let exact: Vec<f64> = (0..d).map(|j| p.device_diag(0)[j] * (x.as_slice()[j] - x0[j])).collect();
    let mut rng = SplitMix64::new(10);
    let mut total = 0.0;
    for _ in 0..draws {
        let g = p.grad_oracle(0, &x, &mut rng).unwrap();
        total += g.as_slice().iter().zip(&exact).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    let empirical = total / draws as f64;
    let sum_a2: f64 = (1..=d).map(|j| mean_spectrum(j).powi(2)).sum();
    let closed = DEFAULT_R1 * DEFAULT_R1 * sum_a2 + DEFAULT_R2 * DEFAULT_R2 * DEFAULT_SPIKE_PROB * d as f64;
    assert!(empirical.is_finite());
    assert!((empirical / closed - 1.0).abs() <= 0.05, "{empirical} vs {closed}");
}

#[test]
fn oracle_errors() {
    let p = make_problem(8, 2, 1).unwrap();
    let mut rng = SplitMix64::new(0);
    assert!(p.grad_oracle(2, &DenseSignal::zeros(8), &mut rng).is_err());
    assert!(p.grad_oracle(0, &DenseSignal::zeros(9), &mut rng).is_err());
}

#[test]
fn recon_signals() {
    let mut rng = SplitMix64::new(1);
    assert!(make_recon_signal(50, 0, 0.0, &mut rng).unwrap().is_zero());
    let g = make_recon_signal(50, 12, 0.0, &mut rng).unwrap();
    assert_eq!(g.as_slice().iter().filter(|v| **v != 0.0).count(), 12);
    assert!(make_recon_signal(5, 6, 0.0, &mut rng).is_err());
    for seed in 0..20 {
        let g = make_recon_signal(1 << 16, 3000, 0.05, &mut SplitMix64::new(seed)).unwrap();
        let sp = sparsity_of(g.as_slice()).unwrap();
        assert!(sp > 0.0 && sp < 0.5, "seed {seed}: sp {sp}");
    }
}
