//! Simulation of SGD with compressed-sensing gradient compression.
//!
//! Each round the server broadcasts `x(t)`, every (stateless) device uploads
//! `y_i = Φ g_i` for a fresh stochastic gradient `g_i`, and the server
//! receives the average corrupted by one channel-noise vector `w(t)`:
//!
//! ```text
//! ỹ(t)     = (1/n) Σ y_i(t) + w(t)
//! z(t)     = η ỹ(t) + ε(t)
//! Δ(t)     = FIHT(z(t); Φ)
//! x(t+1)   = x(t) − Δ(t)
//! ε(t+1)   = z(t) − Φ Δ(t)
//! ```
//!
//! `ε` is the server-side error feedback, so devices carry no state. The same
//! loop with a count sketch in place of `Φ`/FIHT, and plain uncompressed SGD,
//! are provided as baselines.
//!
//! # Shadow sequence
//!
//! With `Φ` built from distinct rows of an orthogonal matrix,
//! `Φ Φᵀ = (d_aug/Q) I`, and the run admits signal-space vectors
//!
//! ```text
//! p(t)   = η g(t) + e(t)
//! e(t+1) = p(t) − Δ(t) + (η Q / d_aug) Φᵀ w(t),     e(1) = 0
//! ```
//!
//! with `ε(t) = Φ e(t)` and `z(t) = Φ p(t) + η w(t)`. These live in the
//! augmented dimension `d_aug`; the engine tracks them to report `sp(p(t))`
//! and, in diagnostic mode, checks both identities every round together with
//! `x(t) − e(t) = x̃(t)` for `x̃(t+1) = x̃(t) − η g(t)`.
//!
//! # Random streams
//!
//! Under the trial seed `s`, device `i` in round `t` draws from stream
//! `[GRADIENT, i, t]` and the channel in round `t` from `[CHANNEL, t]`
//! (see [`crate::rng`]), so every engine sees the same gradients for the same
//! seed, regardless of how device work is scheduled.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fiht::reconstruct;
use crate::rng::{stream, SplitMix64};
use crate::sensing::{Measurement, SensingMatrix};
use crate::signal::{norm2, sparsity_of, DenseSignal, SparseSignal};
use crate::sketch::{CountSketch, SketchTable};

/// A distributed stochastic objective `f = (1/n) Σ f_i`.
pub trait GradientOracle: Sync {
    fn dim(&self) -> usize;
    fn num_devices(&self) -> usize;
    /// Unbiased estimate of `∇f_i(x)` drawn from `rng`.
    fn stochastic_gradient(&self, device: usize, x: &[f64], rng: &mut SplitMix64) -> Vec<f64>;
    fn exact_gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
    fn objective(&self, _x: &[f64]) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChannelKind {
    None,
    IidGaussian,
}

/// Additive upload-channel noise with i.i.d. `N(0, W²)` entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelModel {
    pub kind: ChannelKind,
    pub noise_std: f64,
}

impl ChannelModel {
    pub fn noiseless() -> Self {
        ChannelModel {
            kind: ChannelKind::None,
            noise_std: 0.0,
        }
    }

    /// `None` when `w == 0`, Gaussian otherwise.
    pub fn gaussian(w: f64) -> Result<Self> {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::Parameter(format!("noise std must be finite and >= 0, got {w}")));
        }
        Ok(ChannelModel {
            kind: if w == 0.0 {
                ChannelKind::None
            } else {
                ChannelKind::IidGaussian
            },
            noise_std: w,
        })
    }

    /// One noise vector of length `len` from `rng`.
    pub fn sample(&self, len: usize, rng: &mut SplitMix64) -> Vec<f64> {
        match self.kind {
            ChannelKind::None => vec![0.0; len],
            ChannelKind::IidGaussian => (0..len)
                .map(|_| {
                    let e: f64 = rng.sample(StandardNormal);
                    self.noise_std * e
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EtaRule {
    OneOverSqrtT,
    Fixed(f64),
}

impl EtaRule {
    pub fn step_size(&self, rounds: usize) -> f64 {
        match *self {
            EtaRule::OneOverSqrtT => 1.0 / (rounds.max(1) as f64).sqrt(),
            EtaRule::Fixed(eta) => eta,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub rounds: usize,
    pub eta: f64,
    /// Sparsity of the reconstructed update.
    pub k: usize,
    pub channel: ChannelModel,
    /// Trial seed under which the per-round streams are derived.
    pub seed: u64,
    pub initial_point: Option<DenseSignal>,
    /// Check the shadow-sequence identities every round.
    pub diagnostics: bool,
}

impl RunConfig {
    pub fn new(rounds: usize, eta_rule: EtaRule, k: usize, seed: u64) -> Self {
        RunConfig {
            rounds,
            eta: eta_rule.step_size(rounds),
            k,
            channel: ChannelModel::noiseless(),
            seed,
            initial_point: None,
            diagnostics: false,
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Parameter(format!("step size must be positive, got {}", self.eta)));
        }
        if self.k == 0 || self.k > d {
            return Err(Error::Parameter(format!("K={} must be in 1..={d}", self.k)));
        }
        if let Some(x0) = &self.initial_point {
            if x0.dim() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: x0.dim(),
                });
            }
        }
        Ok(())
    }

    fn start(&self, d: usize) -> Vec<f64> {
        self.initial_point
            .as_ref()
            .map_or_else(|| vec![0.0; d], |x| x.as_slice().to_vec())
    }
}

/// One row of a run trace; all quantities refer to round `t` (1-based).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub t: usize,
    /// `f(x(t))`.
    pub f_value: Option<f64>,
    /// `‖∇f(x(t))‖₂`.
    pub grad_norm: Option<f64>,
    /// `sp(g(t))` of the averaged stochastic gradient; `None` when it is zero.
    pub sp_g: Option<f64>,
    /// `sp(p(t))`; `None` when zero or not tracked.
    pub sp_p: Option<f64>,
    pub delta_nnz: usize,
    /// `‖ε(t)‖₂`.
    pub feedback_norm: f64,
    /// `‖z(t) − ΦΔ(t)‖₂`, i.e. `‖ε(t+1)‖₂`.
    pub recon_residual: f64,
}

/// Largest identity residuals observed over a diagnostic run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    /// `max_t ‖ε(t) − Φe(t)‖₂ / (1 + ‖ε(t)‖₂)`.
    pub feedback_identity: f64,
    /// `max_t ‖z(t) − Φp(t) − ηw(t)‖₂ / (1 + ‖z(t)‖₂)`.
    pub measurement_identity: f64,
    /// `max_t ‖(x(t) − e(t)) − x̃(t)‖∞` with `x̃(t+1) = x̃(t) − ηg(t)`.
    pub shadow_sgd_identity: f64,
    /// As above but with the channel term included:
    /// `x̃(t+1) = x̃(t) − ηg(t) − (ηQ/d_aug) Φᵀw(t)`.
    pub shadow_sgd_identity_with_noise: f64,
    pub rounds_checked: usize,
}

impl DiagnosticsReport {
    fn absorb(&mut self, other: &DiagnosticsReport) {
        self.feedback_identity = self.feedback_identity.max(other.feedback_identity);
        self.measurement_identity = self.measurement_identity.max(other.measurement_identity);
        self.shadow_sgd_identity = self.shadow_sgd_identity.max(other.shadow_sgd_identity);
        self.shadow_sgd_identity_with_noise = self
            .shadow_sgd_identity_with_noise
            .max(other.shadow_sgd_identity_with_noise);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<MetricsRecord>,
    /// `x(T+1)`.
    pub final_x: DenseSignal,
    /// `f(x(T+1))`, when the oracle exposes the objective.
    pub final_f: Option<f64>,
    pub diagnostics: Option<DiagnosticsReport>,
}

/// Server-side state of the compressed engine.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    pub x: DenseSignal,
    pub eps: Measurement,
    pub eta: f64,
    pub t: usize,
}

impl ServerState {
    /// `x(1) = x0`, `ε(1) = 0`, `t = 1`.
    pub fn new(x0: DenseSignal, q: usize, eta: f64) -> Self {
        ServerState {
            x: x0,
            eps: Measurement::zeros(q),
            eta,
            t: 1,
        }
    }
}

/// Shadow iterates in the augmented dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowState {
    pub e: Vec<f64>,
    pub p: Vec<f64>,
    pub x_tilde: Vec<f64>,
}

impl ShadowState {
    /// `e(1) = 0`, `x̃(1) = x(1)` (zero-padded to `d_aug`).
    pub fn new(x1: &[f64], d_aug: usize) -> Self {
        let mut x_tilde = vec![0.0; d_aug];
        x_tilde[..x1.len()].copy_from_slice(x1);
        ShadowState {
            e: vec![0.0; d_aug],
            p: vec![0.0; d_aug],
            x_tilde,
        }
    }
}

fn device_rng(seed: u64, device: usize, round: usize) -> SplitMix64 {
    SplitMix64::from_path(seed, &[stream::GRADIENT, device as u64, round as u64])
}

fn channel_rng(seed: u64, round: usize) -> SplitMix64 {
    SplitMix64::from_path(seed, &[stream::CHANNEL, round as u64])
}

/// `y_i = Φ g_i` for one fresh stochastic gradient.
pub fn device_step(
    device: usize,
    x: &DenseSignal,
    phi: &SensingMatrix,
    oracle: &dyn GradientOracle,
    rng: &mut SplitMix64,
) -> Result<Measurement> {
    if x.dim() != oracle.dim() || x.dim() != phi.dim() {
        return Err(Error::Dimension {
            expected: phi.dim(),
            got: x.dim(),
        });
    }
    if device >= oracle.num_devices() {
        return Err(Error::Bounds {
            index: device,
            dim: oracle.num_devices(),
        });
    }
    let g = oracle.stochastic_gradient(device, x.as_slice(), rng);
    phi.apply(&DenseSignal::new(g)?)
}

/// `(1/n) Σ y_i + w` with a single noise draw; returns the noise as well.
pub fn aggregate_with_noise(
    ys: &[Measurement],
    channel: &ChannelModel,
    rng: &mut SplitMix64,
) -> Result<(Measurement, Vec<f64>)> {
    let mean = mean_of(ys.iter().map(Measurement::as_slice))?;
    let w = channel.sample(mean.len(), rng);
    let noisy = mean.iter().zip(&w).map(|(a, b)| a + b).collect();
    Ok((Measurement::from_vec_unchecked(noisy), w))
}

pub fn aggregate(ys: &[Measurement], channel: &ChannelModel, rng: &mut SplitMix64) -> Result<Measurement> {
    Ok(aggregate_with_noise(ys, channel, rng)?.0)
}

/// One server update; returns `Δ(t)` and the next state.
pub fn server_step(
    state: &ServerState,
    y_tilde: &Measurement,
    phi: &SensingMatrix,
    k: usize,
) -> Result<(SparseSignal, ServerState)> {
    let q = phi.num_rows();
    if y_tilde.len() != q || state.eps.len() != q {
        return Err(Error::Dimension {
            expected: q,
            got: y_tilde.len(),
        });
    }
    if state.x.dim() != phi.dim() {
        return Err(Error::Dimension {
            expected: phi.dim(),
            got: state.x.dim(),
        });
    }
    let z: Vec<f64> = y_tilde
        .as_slice()
        .iter()
        .zip(state.eps.as_slice())
        .map(|(y, e)| state.eta * y + e)
        .collect();
    let z = Measurement::from_vec_unchecked(z);
    let delta = reconstruct(&z, phi, k)?;
    let mut x = state.x.as_slice().to_vec();
    for &(j, v) in delta.entries() {
        x[j] -= v;
    }
    let phi_delta = phi.apply_slice(&delta.to_vec());
    let eps = z
        .as_slice()
        .iter()
        .zip(&phi_delta)
        .map(|(a, b)| a - b)
        .collect();
    let next = ServerState {
        x: DenseSignal::new(x)?,
        eps: Measurement::from_vec_unchecked(eps),
        eta: state.eta,
        t: state.t + 1,
    };
    Ok((delta, next))
}

/// Advances the shadow iterates by one round.
///
/// `g` and `delta` have the signal dimension `d`; `w` has `Q` entries.
pub fn shadow_update(
    shadow: &ShadowState,
    g: &[f64],
    delta: &SparseSignal,
    w: &[f64],
    phi: &SensingMatrix,
    eta: f64,
) -> Result<ShadowState> {
    let d_aug = phi.augmented_dim();
    if shadow.e.len() != d_aug || g.len() != phi.dim() || delta.dim() != phi.dim() {
        return Err(Error::Dimension {
            expected: phi.dim(),
            got: g.len(),
        });
    }
    if w.len() != phi.num_rows() {
        return Err(Error::Dimension {
            expected: phi.num_rows(),
            got: w.len(),
        });
    }
    let mut p = shadow.e.clone();
    for (pj, gj) in p.iter_mut().zip(g) {
        *pj += eta * gj;
    }
    let mut e = p.clone();
    for &(j, v) in delta.entries() {
        e[j] -= v;
    }
    if w.iter().any(|&v| v != 0.0) {
        let coeff = eta * phi.num_rows() as f64 / d_aug as f64;
        let back = phi.adjoint_augmented(&Measurement::from_vec_unchecked(w.to_vec()))?;
        for (ej, bj) in e.iter_mut().zip(&back) {
            *ej += coeff * bj;
        }
    }
    let mut x_tilde = shadow.x_tilde.clone();
    for (xj, gj) in x_tilde.iter_mut().zip(g) {
        *xj -= eta * gj;
    }
    Ok(ShadowState { e, p, x_tilde })
}

/// Gradients of all devices at `x` for `round`, in device order.
fn device_gradients(oracle: &dyn GradientOracle, x: &[f64], seed: u64, round: usize) -> Vec<Vec<f64>> {
    (0..oracle.num_devices())
        .into_par_iter()
        .map(|i| oracle.stochastic_gradient(i, x, &mut device_rng(seed, i, round)))
        .collect()
}

fn mean_of<'a>(vs: impl Iterator<Item = &'a [f64]>) -> Result<Vec<f64>> {
    let mut acc: Option<Vec<f64>> = None;
    let mut n = 0usize;
    for v in vs {
        match &mut acc {
            None => acc = Some(v.to_vec()),
            Some(a) => {
                if a.len() != v.len() {
                    return Err(Error::Dimension {
                        expected: a.len(),
                        got: v.len(),
                    });
                }
                for (x, y) in a.iter_mut().zip(v) {
                    *x += y;
                }
            }
        }
        n += 1;
    }
    let mut acc = acc.ok_or_else(|| Error::Parameter("nothing to aggregate".into()))?;
    for x in &mut acc {
        *x /= n as f64;
    }
    Ok(acc)
}

fn record_objective(oracle: &dyn GradientOracle, x: &[f64]) -> (Option<f64>, Option<f64>) {
    (
        oracle.objective(x),
        oracle.exact_gradient(x).map(|g| norm2(&g)),
    )
}

fn finish(oracle: &dyn GradientOracle, records: Vec<MetricsRecord>, x: Vec<f64>, diagnostics: Option<DiagnosticsReport>) -> Result<RunTrace> {
    let final_f = oracle.objective(&x);
    Ok(RunTrace {
        records,
        final_x: DenseSignal::new(x)?,
        final_f,
        diagnostics,
    })
}

fn padded(v: &[f64], d_aug: usize) -> Vec<f64> {
    let mut out = vec![0.0; d_aug];
    out[..v.len()].copy_from_slice(v);
    out
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn rel_residual(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&diff) / (1.0 + norm2(a))
}

/// Identity residuals at the start of a round (state `x(t)`, `ε(t)`, `e(t)`, `x̃(t)`).
fn check_state(
    phi: &SensingMatrix,
    x: &[f64],
    eps: &[f64],
    shadow: &ShadowState,
    x_tilde_noisy: &[f64],
) -> DiagnosticsReport {
    let d_aug = phi.augmented_dim();
    let phi_e = phi.apply_slice(&shadow.e);
    let x_minus_e: Vec<f64> = padded(x, d_aug)
        .iter()
        .zip(&shadow.e)
        .map(|(a, b)| a - b)
        .collect();
    DiagnosticsReport {
        feedback_identity: rel_residual(eps, &phi_e),
        shadow_sgd_identity: max_abs_diff(&x_minus_e, &shadow.x_tilde),
        shadow_sgd_identity_with_noise: max_abs_diff(&x_minus_e, x_tilde_noisy),
        ..Default::default()
    }
}

/// Test hook: a perturbation added to `ε` after a given round.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackCorruption {
    pub after_round: usize,
    pub amount: f64,
}

/// SGD with compressed sensing.
pub fn run_cs_sgd(oracle: &dyn GradientOracle, phi: &SensingMatrix, config: &RunConfig) -> Result<RunTrace> {
    run_cs_sgd_inner(oracle, phi, config, None)
}

#[doc(hidden)]
pub fn run_cs_sgd_corrupted(
    oracle: &dyn GradientOracle,
    phi: &SensingMatrix,
    config: &RunConfig,
    corruption: FeedbackCorruption,
) -> Result<RunTrace> {
    run_cs_sgd_inner(oracle, phi, config, Some(corruption))
}

fn run_cs_sgd_inner(
    oracle: &dyn GradientOracle,
    phi: &SensingMatrix,
    config: &RunConfig,
    corruption: Option<FeedbackCorruption>,
) -> Result<RunTrace> {
    let d = oracle.dim();
    if phi.dim() != d {
        return Err(Error::Dimension {
            expected: d,
            got: phi.dim(),
        });
    }
    config.validate(d)?;
    let q = phi.num_rows();
    let d_aug = phi.augmented_dim();
    let eta = config.eta;

    let mut state = ServerState::new(DenseSignal::new(config.start(d))?, q, eta);
    let mut shadow = ShadowState::new(state.x.as_slice(), d_aug);
    let mut x_tilde_noisy = shadow.x_tilde.clone();
    let mut report = config.diagnostics.then(DiagnosticsReport::default);
    let mut records = Vec::with_capacity(config.rounds);

    for t in 1..=config.rounds {
        let x = state.x.as_slice();
        let (f_value, grad_norm) = record_objective(oracle, x);
        if let Some(r) = &mut report {
            r.absorb(&check_state(phi, x, state.eps.as_slice(), &shadow, &x_tilde_noisy));
            r.rounds_checked += 1;
        }

        let grads = device_gradients(oracle, x, config.seed, t);
        let ys: Vec<Measurement> = grads
            .par_iter()
            .map(|g| Measurement::from_vec_unchecked(phi.apply_slice(g)))
            .collect();
        let g_mean = mean_of(grads.iter().map(Vec::as_slice))?;
        let (y_tilde, w) = aggregate_with_noise(&ys, &config.channel, &mut channel_rng(config.seed, t))?;

        let feedback_norm = state.eps.norm2();
        let (delta, next) = server_step(&state, &y_tilde, phi, config.k)?;
        let next_shadow = shadow_update(&shadow, &g_mean, &delta, &w, phi, eta)?;

        if let Some(r) = &mut report {
            let phi_p = phi.apply_slice(&next_shadow.p);
            let z: Vec<f64> = y_tilde
                .as_slice()
                .iter()
                .zip(state.eps.as_slice())
                .map(|(y, e)| eta * y + e)
                .collect();
            let predicted: Vec<f64> = phi_p.iter().zip(&w).map(|(a, b)| a + eta * b).collect();
            r.measurement_identity = r.measurement_identity.max(rel_residual(&z, &predicted));
            let coeff = eta * q as f64 / d_aug as f64;
            let back = phi.adjoint_full(&w);
            for j in 0..d_aug {
                let gj = if j < d { g_mean[j] } else { 0.0 };
                x_tilde_noisy[j] -= eta * gj + coeff * back[j];
            }
        }

        records.push(MetricsRecord {
            t,
            f_value,
            grad_norm,
            sp_g: sparsity_of(&g_mean),
            sp_p: sparsity_of(&next_shadow.p),
            delta_nnz: delta.nnz(),
            feedback_norm,
            recon_residual: next.eps.norm2(),
        });
        state = next;
        shadow = next_shadow;

        if let Some(c) = corruption {
            if c.after_round == t {
                let mut eps = state.eps.clone().into_vec();
                eps[0] += c.amount;
                state.eps = Measurement::from_vec_unchecked(eps);
            }
        }
    }

    if let Some(r) = &mut report {
        r.absorb(&check_state(
            phi,
            state.x.as_slice(),
            state.eps.as_slice(),
            &shadow,
            &x_tilde_noisy,
        ));
        r.rounds_checked += 1;
    }
    finish(oracle, records, state.x.into_vec(), report)
}

/// Uncompressed SGD on the same gradient streams.
pub fn run_vanilla_sgd(oracle: &dyn GradientOracle, config: &RunConfig) -> Result<RunTrace> {
    let d = oracle.dim();
    config.validate(d)?;
    let eta = config.eta;
    let mut x = config.start(d);
    let mut records = Vec::with_capacity(config.rounds);
    for t in 1..=config.rounds {
        let (f_value, grad_norm) = record_objective(oracle, &x);
        let grads = device_gradients(oracle, &x, config.seed, t);
        let g = mean_of(grads.iter().map(Vec::as_slice))?;
        for (xj, gj) in x.iter_mut().zip(&g) {
            *xj -= eta * gj;
        }
        let sp = sparsity_of(&g);
        records.push(MetricsRecord {
            t,
            f_value,
            grad_norm,
            sp_g: sp,
            sp_p: sp,
            delta_nnz: g.iter().filter(|v| **v != 0.0).count(),
            feedback_norm: 0.0,
            recon_residual: 0.0,
        });
    }
    finish(oracle, records, x, None)
}

/// SGD with count-sketch compression and sketch-domain error feedback.
///
/// Channel noise is one vector of `rows · cols` entries added to the averaged
/// table. `sp(p(t))` is reported only on noiseless channels, where the
/// signal-space feedback `e(t+1) = p(t) − Δ(t)` satisfies `ε(t) = S e(t)`.
pub fn run_sketch_sgd(oracle: &dyn GradientOracle, sketch: &CountSketch, config: &RunConfig) -> Result<RunTrace> {
    let d = oracle.dim();
    if sketch.params().dim != d {
        return Err(Error::Dimension {
            expected: d,
            got: sketch.params().dim,
        });
    }
    config.validate(d)?;
    let eta = config.eta;
    let n = oracle.num_devices();
    let mut x = config.start(d);
    let mut eps = SketchTable::zeros(*sketch.params());
    let mut e = vec![0.0; d];
    let track_p = config.channel.kind == ChannelKind::None;
    let mut records = Vec::with_capacity(config.rounds);

    for t in 1..=config.rounds {
        let (f_value, grad_norm) = record_objective(oracle, &x);
        let grads = device_gradients(oracle, &x, config.seed, t);
        let tables: Vec<SketchTable> = grads.par_iter().map(|g| sketch.compress_slice(g)).collect();
        let g_mean = mean_of(grads.iter().map(Vec::as_slice))?;

        let weights = vec![1.0 / n as f64; n];
        let mut z = crate::sketch::cs_combine(&tables, &weights)?;
        let w = config
            .channel
            .sample(z.as_slice().len(), &mut channel_rng(config.seed, t));
        for ((zc, wc), ec) in z.cells_mut().iter_mut().zip(&w).zip(eps.as_slice()) {
            *zc = eta * (*zc + wc) + ec;
        }
        let feedback_norm = eps.norm2();
        let delta = sketch.reconstruct(&z, config.k)?;
        let dense_delta = delta.to_vec();
        let s_delta = sketch.compress_slice(&dense_delta);
        let mut next_eps = z;
        for (c, s) in next_eps.cells_mut().iter_mut().zip(s_delta.as_slice()) {
            *c -= s;
        }

        let sp_p = if track_p {
            let p: Vec<f64> = e.iter().zip(&g_mean).map(|(ej, gj)| eta * gj + ej).collect();
            e = p.iter().zip(&dense_delta).map(|(a, b)| a - b).collect();
            sparsity_of(&p)
        } else {
            None
        };
        for (xj, dj) in x.iter_mut().zip(&dense_delta) {
            *xj -= dj;
        }
        records.push(MetricsRecord {
            t,
            f_value,
            grad_norm,
            sp_g: sparsity_of(&g_mean),
            sp_p,
            delta_nnz: delta.nnz(),
            feedback_norm,
            recon_residual: next_eps.norm2(),
        });
        eps = next_eps;
    }
    finish(oracle, records, x, None)
}
