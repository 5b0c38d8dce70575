//! The synthetic test problem: `n` devices with diagonal quadratics
//! `f_i(x) = ½ (x − x0)ᵀ A_i (x − x0)` whose average `A` has the spectrum
//! `A_jj = exp(−j/300) + 0.001` (1-based `j`), and a stochastic gradient that
//! adds a dense, spectrum-shaped term and a rare large spike term.

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fedopt::GradientOracle;
use crate::rng::SplitMix64;
use crate::signal::DenseSignal;

pub const DEFAULT_R1: f64 = 12.5;
pub const DEFAULT_R2: f64 = 50.0;
pub const DEFAULT_SPIKE_PROB: f64 = 1.5e-3;

/// `exp(−j/300) + 0.001` for 1-based `j`.
pub fn mean_spectrum(j_one_based: usize) -> f64 {
    (-(j_one_based as f64) / 300.0).exp() + 0.001
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticProblem {
    d: usize,
    n: usize,
    x0: DenseSignal,
    /// Device-major: entry `i * d + j` is `(A_i)_jj`.
    a_diag: Vec<f64>,
    a_mean: Vec<f64>,
    pub r1: f64,
    pub r2: f64,
    pub spike_prob: f64,
}

/// Draws the per-device spectra and the optimum from `SplitMix64::new(seed)`.
///
/// For each coordinate (in order) `n` standard normals are drawn and centred,
/// so the device deviations have covariance `I − 11ᵀ/n` and sum to zero; the
/// `d` entries of `x0` are drawn afterwards.
pub fn make_problem(d: usize, n: usize, seed: u64) -> Result<SyntheticProblem> {
    if d == 0 || n == 0 {
        return Err(Error::Parameter(format!(
            "synthetic problem needs d >= 1 and n >= 1 (got d={d}, n={n})"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let a_mean: Vec<f64> = (1..=d).map(mean_spectrum).collect();
    let mut a_diag = vec![0.0; n * d];
    let mut z = vec![0.0; n];
    for (j, &mu) in a_mean.iter().enumerate() {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let m = z.iter().sum::<f64>() / n as f64;
        for (i, zi) in z.iter().enumerate() {
            a_diag[i * d + j] = mu + (zi - m);
        }
    }
    let x0: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    Ok(SyntheticProblem {
        d,
        n,
        x0: DenseSignal::from_vec_unchecked(x0),
        a_diag,
        a_mean,
        r1: DEFAULT_R1,
        r2: DEFAULT_R2,
        spike_prob: DEFAULT_SPIKE_PROB,
    })
}

impl SyntheticProblem {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn num_devices(&self) -> usize {
        self.n
    }

    pub fn optimum(&self) -> &DenseSignal {
        &self.x0
    }

    /// Diagonal of `A_i`.
    pub fn device_diag(&self, i: usize) -> &[f64] {
        &self.a_diag[i * self.d..(i + 1) * self.d]
    }

    /// Diagonal of `A`.
    pub fn mean_diag(&self) -> &[f64] {
        &self.a_mean
    }

    pub fn with_noise(mut self, r1: f64, r2: f64, spike_prob: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&spike_prob) || r1 < 0.0 || r2 < 0.0 {
            return Err(Error::Parameter("noise scales must be >= 0 and p_b in [0, 1]".into()));
        }
        self.r1 = r1;
        self.r2 = r2;
        self.spike_prob = spike_prob;
        Ok(self)
    }

    pub fn objective(&self, x: &DenseSignal) -> Result<f64> {
        self.check(x.dim())?;
        Ok(self.objective_slice(x.as_slice()))
    }

    pub fn exact_gradient(&self, x: &DenseSignal) -> Result<DenseSignal> {
        self.check(x.dim())?;
        Ok(DenseSignal::from_vec_unchecked(self.gradient_slice(x.as_slice())))
    }

    /// `A_i (x − x0) + R1 · A u1 + R2 · (b ⊙ u2)` with fresh draws from `rng`.
    pub fn grad_oracle(&self, i: usize, x: &DenseSignal, rng: &mut SplitMix64) -> Result<DenseSignal> {
        self.check(x.dim())?;
        if i >= self.n {
            return Err(Error::Bounds { index: i, dim: self.n });
        }
        Ok(DenseSignal::from_vec_unchecked(self.sample_gradient(i, x.as_slice(), rng)))
    }

    fn objective_slice(&self, x: &[f64]) -> f64 {
        0.5 * x
            .iter()
            .zip(self.x0.as_slice())
            .zip(&self.a_mean)
            .map(|((xi, oi), a)| a * (xi - oi) * (xi - oi))
            .sum::<f64>()
    }

    fn gradient_slice(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.x0.as_slice())
            .zip(&self.a_mean)
            .map(|((xi, oi), a)| a * (xi - oi))
            .collect()
    }

    /// Per coordinate, in order: `u1_j`, then the Bernoulli `b_j`, then `u2_j`
    /// only when `b_j = 1`.
    fn sample_gradient(&self, i: usize, x: &[f64], rng: &mut SplitMix64) -> Vec<f64> {
        let spike = if self.spike_prob > 0.0 {
            Some(Bernoulli::new(self.spike_prob).expect("p_b validated"))
        } else {
            None
        };
        let diag = self.device_diag(i);
        let x0 = self.x0.as_slice();
        (0..self.d)
            .map(|j| {
                let u1: f64 = rng.sample(StandardNormal);
                let mut g = diag[j] * (x[j] - x0[j]) + self.r1 * self.a_mean[j] * u1;
                if let Some(b) = &spike {
                    if b.sample(rng) {
                        let u2: f64 = rng.sample(StandardNormal);
                        g += self.r2 * u2;
                    }
                }
                g
            })
            .collect()
    }

    fn check(&self, got: usize) -> Result<()> {
        if got != self.d {
            return Err(Error::Dimension {
                expected: self.d,
                got,
            });
        }
        Ok(())
    }
}

impl GradientOracle for SyntheticProblem {
    fn dim(&self) -> usize {
        self.d
    }

    fn num_devices(&self) -> usize {
        self.n
    }

    fn stochastic_gradient(&self, device: usize, x: &[f64], rng: &mut SplitMix64) -> Vec<f64> {
        self.sample_gradient(device, x, rng)
    }

    fn exact_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(self.gradient_slice(x))
    }

    fn objective(&self, x: &[f64]) -> Option<f64> {
        Some(self.objective_slice(x))
    }
}

/// `k_nnz` standard-normal entries on a uniformly random support plus dense
/// `N(0, sigma_n²)` noise.
///
/// Draw order: the support by partial Fisher–Yates, then the spike values in
/// support-draw order, then the `d` noise entries (skipped when `sigma_n = 0`).
pub fn make_recon_signal(d: usize, k_nnz: usize, sigma_n: f64, rng: &mut SplitMix64) -> Result<DenseSignal> {
    if d == 0 || k_nnz > d {
        return Err(Error::Parameter(format!("need 1 <= d and k_nnz <= d (d={d}, k={k_nnz})")));
    }
    if !(sigma_n >= 0.0 && sigma_n.is_finite()) {
        return Err(Error::Parameter("sigma_n must be finite and >= 0".into()));
    }
    let mut pool: Vec<usize> = (0..d).collect();
    for i in 0..k_nnz {
        let j = i + rng.below((d - i) as u64) as usize;
        pool.swap(i, j);
    }
    let mut g = vec![0.0; d];
    for &pos in &pool[..k_nnz] {
        g[pos] = rng.sample(StandardNormal);
    }
    if sigma_n > 0.0 {
        for v in g.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *v += sigma_n * e;
        }
    }
    Ok(DenseSignal::from_vec_unchecked(g))
}
