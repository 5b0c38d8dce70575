//! Fast Iterative Hard Thresholding.
//!
//! Projected gradient descent onto K-sparse vectors, accelerated by an
//! extrapolation step whose weight comes from an exact line search, with an
//! exact line-search step size on the current support for both the
//! extrapolated and the thresholded iterate. Every product with `Φ` goes
//! through the fast transform in [`SensingMatrix`].
//!
//! Iteration `s` (starting at 1, with `g(0) = 0` and
//! `g(1) = Proj(Φᵀy, PrincipalSupp(Φᵀy, K))`):
//!
//! ```text
//! τ     = 0 if s = 1, else ⟨y − Φg(s), Φ(g(s) − g(s−1))⟩ / ‖Φ(g(s) − g(s−1))‖²
//! w     = g(s) + τ (g(s) − g(s−1))
//! r_w   = Φᵀ(y − Φw)
//! α̃     = ‖Proj(r_w, Supp(w))‖² / ‖Φ Proj(r_w, Supp(w))‖²
//! h     = w + α̃ r_w
//! Ω     = PrincipalSupp(h, K)
//! g̃     = Proj(h, Ω)
//! r     = Φᵀ(y − Φg̃)
//! α     = ‖Proj(r, Ω)‖² / ‖Φ Proj(r, Ω)‖²
//! g(s+1) = g̃ + α Proj(r, Ω)
//! ```
//!
//! A zero denominator sets the corresponding weight to zero. Iteration stops
//! once `s` exceeds `max_iters`, once `‖w‖₂ ≤ residual_tol`, or once the last
//! `stall_window` values of `‖w‖₂` have a (population) standard deviation at
//! most `stall_rel_std` times their mean.

use crate::error::{Error, Result};
use crate::sensing::{Measurement, SensingMatrix};
use crate::signal::{dot, norm2, norm2_sq, project_slice, top_k_indices, IndexSet, SparseSignal};

#[derive(Debug, Clone, PartialEq)]
pub struct FihtParams {
    /// Maximum number of nonzeros in the output.
    pub k: usize,
    pub max_iters: usize,
    pub residual_tol: f64,
    pub stall_window: usize,
    pub stall_rel_std: f64,
}

impl FihtParams {
    /// Defaults: 25 iterations, tolerance 1e-4, 4-iterate stall window at 1%.
    pub fn new(k: usize) -> Self {
        FihtParams {
            k,
            max_iters: 25,
            residual_tol: 1e-4,
            stall_window: 4,
            stall_rel_std: 0.01,
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Parameter("K must be at least 1".into()));
        }
        if self.k > d {
            return Err(Error::Parameter(format!("K={} exceeds dimension {d}", self.k)));
        }
        if self.max_iters == 0 || self.stall_window == 0 {
            return Err(Error::Parameter(
                "max_iters and stall_window must be positive".into(),
            ));
        }
        if !(self.residual_tol >= 0.0 && self.stall_rel_std >= 0.0) {
            return Err(Error::Parameter("tolerances must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIters,
    SmallNorm,
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FihtResult {
    pub estimate: SparseSignal,
    pub iterations_used: usize,
    pub stop_reason: StopReason,
    /// `‖y − Φg(s+1)‖₂` after each iteration.
    pub residual_history: Vec<f64>,
}

pub fn fiht(y: &Measurement, phi: &SensingMatrix, params: &FihtParams) -> Result<FihtResult> {
    let d = phi.dim();
    if y.len() != phi.num_rows() {
        return Err(Error::Dimension {
            expected: phi.num_rows(),
            got: y.len(),
        });
    }
    params.validate(d)?;
    let y = y.as_slice();
    let k = params.k;

    let w0 = phi.adjoint_slice(y);
    let omega0 = top_k_indices(&w0, k);
    let mut g_prev = vec![0.0; d];
    let mut g = project_slice(&w0, omega0.as_slice());
    let mut phi_g_prev = vec![0.0; y.len()];
    let mut phi_g = phi.apply_slice(&g);
    let mut omega;

    let mut w_norms: Vec<f64> = Vec::new();
    let mut residual_history = Vec::new();
    let mut s = 1usize;

    let stop_reason = loop {
        let diff: Vec<f64> = sub(&g, &g_prev);
        let phi_diff: Vec<f64> = sub(&phi_g, &phi_g_prev);
        let tau = if s == 1 {
            0.0
        } else {
            let denom = norm2_sq(&phi_diff);
            if denom == 0.0 {
                0.0
            } else {
                dot(&sub(y, &phi_g), &phi_diff) / denom
            }
        };
        let w = axpy(&g, tau, &diff);
        let phi_w = axpy(&phi_g, tau, &phi_diff);

        let r_w = phi.adjoint_slice(&sub(y, &phi_w));
        let gamma: Vec<usize> = (0..d).filter(|&i| w[i] != 0.0).collect();
        let r_w_on_gamma = project_slice(&r_w, &gamma);
        let alpha_tilde = step_size(phi, &r_w_on_gamma).0;
        let h = axpy(&w, alpha_tilde, &r_w);

        omega = top_k_indices(&h, k);
        let g_tilde = project_slice(&h, omega.as_slice());
        let phi_g_tilde = phi.apply_slice(&g_tilde);
        let r = phi.adjoint_slice(&sub(y, &phi_g_tilde));
        let r_on_omega = project_slice(&r, omega.as_slice());
        let (alpha, phi_r_on_omega) = step_size(phi, &r_on_omega);

        let g_next = axpy(&g_tilde, alpha, &r_on_omega);
        let phi_g_next = axpy(&phi_g_tilde, alpha, &phi_r_on_omega);
        g_prev = std::mem::replace(&mut g, g_next);
        phi_g_prev = std::mem::replace(&mut phi_g, phi_g_next);

        let w_norm = norm2(&w);
        w_norms.push(w_norm);
        residual_history.push(norm2(&sub(y, &phi_g)));
        s += 1;

        if s > params.max_iters {
            break StopReason::MaxIters;
        }
        if w_norm <= params.residual_tol {
            break StopReason::SmallNorm;
        }
        if stalled(&w_norms, params.stall_window, params.stall_rel_std) {
            break StopReason::Stalled;
        }
    };

    Ok(FihtResult {
        estimate: sparse_from(&g, &omega),
        iterations_used: s - 1,
        stop_reason,
        residual_history,
    })
}

/// `A(y; Φ)`: FIHT with default parameters, estimate only.
pub fn reconstruct(y: &Measurement, phi: &SensingMatrix, k: usize) -> Result<SparseSignal> {
    Ok(fiht(y, phi, &FihtParams::new(k))?.estimate)
}

/// Exact line-search step `‖v‖² / ‖Φv‖²` (zero when the denominator is), plus `Φv`.
fn step_size(phi: &SensingMatrix, v: &[f64]) -> (f64, Vec<f64>) {
    let phi_v = phi.apply_slice(v);
    let denom = norm2_sq(&phi_v);
    let alpha = if denom == 0.0 {
        0.0
    } else {
        norm2_sq(v) / denom
    };
    (alpha, phi_v)
}

fn stalled(norms: &[f64], window: usize, rel: f64) -> bool {
    if norms.len() < window {
        return false;
    }
    let tail = &norms[norms.len() - window..];
    let mean = tail.iter().sum::<f64>() / window as f64;
    let var = tail.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / window as f64;
    var.sqrt() <= rel * mean
}

fn sparse_from(g: &[f64], support: &IndexSet) -> SparseSignal {
    let entries = support
        .iter()
        .filter(|&i| g[i] != 0.0)
        .map(|i| (i, g[i]))
        .collect();
    SparseSignal::new(g.len(), entries).expect("iterate stays finite and in range")
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `a + c·b`.
fn axpy(a: &[f64], c: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + c * y).collect()
}
