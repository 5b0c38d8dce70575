use csgrad::rng::SplitMix64;
use csgrad::synth::make_recon_signal;
use csgrad::{fiht, reconstruct, BaseTransformKind, DenseSignal, FihtParams, Measurement, SensingMatrix, StopReason};
use proptest::prelude::*;

fn rel_l2(x: &DenseSignal, est: &DenseSignal) -> f64 {
    let diff: f64 = x
        .as_slice()
        .iter()
        .zip(est.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    diff.sqrt() / x.norm2()
}

#[test]
fn noiseless_sparse_signals_are_recovered() {
    let mut errs: Vec<f64> = (0..20u64)
        .map(|trial| {
            let phi = SensingMatrix::generate(BaseTransformKind::Wht, 1024, 256, 1000 + trial).unwrap();
            let x = make_recon_signal(1024, 10, 0.0, &mut SplitMix64::new(trial)).unwrap();
            let y = phi.apply(&x).unwrap();
            let res = fiht(&y, &phi, &FihtParams::new(10)).unwrap();
            assert!(res.estimate.nnz() <= 10);
            let first = res.residual_history[0];
            assert!(*res.residual_history.last().unwrap() <= first);
            rel_l2(&x, &res.estimate.densify())
        })
        .collect();
    errs.sort_by(f64::total_cmp);
    assert!(errs[10] <= 1e-6, "median {}", errs[10]);
    assert!(errs[19] <= 1e-3, "max {}", errs[19]);
}

#[test]
fn dct_base_also_recovers() {
    let phi = SensingMatrix::generate(BaseTransformKind::Dct, 500, 200, 1).unwrap();
    let x = make_recon_signal(500, 5, 0.0, &mut SplitMix64::new(3)).unwrap();
    let est = reconstruct(&phi.apply(&x).unwrap(), &phi, 5).unwrap();
    assert!(rel_l2(&x, &est.densify()) <= 1e-6);
}

#[test]
fn iteration_cap_is_respected() {
    let phi = SensingMatrix::generate(BaseTransformKind::Wht, 4096, 300, 2).unwrap();
    let x = make_recon_signal(4096, 400, 0.1, &mut SplitMix64::new(4)).unwrap();
    let res = fiht(&phi.apply(&x).unwrap(), &phi, &FihtParams::new(100)).unwrap();
    assert!(res.iterations_used <= 25);
    if res.stop_reason == StopReason::MaxIters {
        assert_eq!(res.iterations_used, 25);
    }
    assert_eq!(res.residual_history.len(), res.iterations_used);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn output_is_k_sparse_finite_and_deterministic(
        d in 1usize..600,
        q_frac in 0.05f64..1.0,
        k_frac in 0.0f64..1.0,
        seed in any::<u64>(),
        scale in prop_oneof![Just(0.0), Just(1e-12), Just(1.0), Just(1e6)],
    ) {
        let d_aug = d.next_power_of_two();
        let q = ((d_aug as f64 * q_frac).ceil() as usize).clamp(1, d_aug);
        let k = 1 + ((d - 1) as f64 * k_frac) as usize;
        let phi = SensingMatrix::generate(BaseTransformKind::Wht, d, q, seed).unwrap();
        let mut rng = SplitMix64::new(seed ^ 1);
        let x = make_recon_signal(d, k.min(d), 0.3, &mut rng).unwrap();
        let y: Vec<f64> = phi.apply(&x).unwrap().as_slice().iter().map(|v| v * scale).collect();
        let y = Measurement::new(y).unwrap();
        let a = fiht(&y, &phi, &FihtParams::new(k)).unwrap();
        let b = fiht(&y, &phi, &FihtParams::new(k)).unwrap();
        prop_assert!(a.estimate.nnz() <= k);
        prop_assert!(a.estimate.entries().iter().all(|(_, v)| v.is_finite()));
        prop_assert!(a.residual_history.iter().all(|v| v.is_finite()));
        prop_assert_eq!(a.estimate, b.estimate);
    }
}
