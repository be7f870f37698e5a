//! Adaptive time integrators.
//!
//! [`DormandPrince`] is an explicit 5(4) pair with PI step control, used for the
//! nonstiff problems (parabolic profile, toy systems, test oracles).
//! [`Radau5`] is the three-stage Radau IIA collocation method, L-stable, used
//! for the singularly perturbed hyperbolic problem.
//!
//! Both integrators clip steps so that every requested output time is hit
//! exactly, and return the state at each of them.

mod dopri;
mod radau;

pub use dopri::DormandPrince;
pub use radau::{Radau5, StiffSystem};

use crate::error::{Error, Result};

/// States at the requested output times plus step statistics.
#[derive(Debug, Clone)]
pub struct Solution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: StepStats,
}

#[derive(Debug, Clone, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// End time of every accepted step.
    pub step_ends: Vec<f64>,
}

impl StepStats {
    /// Accepted steps whose end lies in `[0, t]`.
    pub fn steps_until(&self, t: f64) -> usize {
        self.step_ends.iter().take_while(|e| **e <= t).count()
    }
}

pub(crate) fn check_output_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("no output times requested".into()));
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("output times must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Weighted RMS norm with scale `atol + rtol * max(|a|, |b|)`.
pub(crate) fn error_norm(err: &[f64], a: &[f64], b: &[f64], rtol: f64, atol: f64) -> f64 {
    let n = err.len().max(1) as f64;
    let s: f64 = err
        .iter()
        .zip(a.iter().zip(b))
        .map(|(e, (x, y))| {
            let sc = atol + rtol * x.abs().max(y.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

/// Smallest step allowed at time `t` before declaring failure.
pub(crate) fn min_step(t: f64) -> f64 {
    16.0 * f64::EPSILON * t.abs().max(1e-300)
}
