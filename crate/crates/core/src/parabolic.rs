//! The first-order limit problem `u' + |A^{1/2}u|^{2γ} A u = 0`.
//!
//! Every mode obeys `u_k' = -c(t) λ_k² u_k`, so `u_k(t) = u_k(0) e^{-λ_k² C(t)}`
//! with `C = ∫c`. [`solve_profile`] integrates the scalar equation for `C` and
//! rebuilds the modes; [`solve_direct`] integrates all modes and serves as an
//! independent cross-check.

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use crate::ode::{DormandPrince, StepStats};
use crate::spectral::{weighted_norm_sq_raw, InitialData, SpectralOperator, SpectralVector};

/// Below this `|A^{1/2}u|²` is treated as zero.
pub(crate) const S_FLOOR: f64 = 1e-300;

/// `s^γ`, guarded against underflow.
pub(crate) fn coefficient(s: f64, gamma: f64) -> f64 {
    if s < S_FLOOR {
        0.0
    } else {
        s.powf(gamma)
    }
}

/// Time samples of the parabolic solution with `c(t)` and `C(t)`.
#[derive(Debug, Clone)]
pub struct ParabolicTrajectory {
    pub op: SpectralOperator,
    pub gamma: f64,
    pub times: Vec<f64>,
    pub u: Vec<SpectralVector>,
    /// `c(t) = |A^{1/2}u(t)|^{2γ}`.
    pub c: Vec<f64>,
    /// `C(t) = ∫₀ᵗ c`.
    pub c_integral: Vec<f64>,
    pub stats: StepStats,
}

impl ParabolicTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `|A^α u(t_i)|²`.
    pub fn norm_sq(&self, alpha: f64, i: usize) -> f64 {
        weighted_norm_sq_raw(self.op.eigenvalues(), alpha, &self.u[i].0)
    }

    /// `(u'(t_i), u''(t_i))` in closed form along the equation.
    pub fn derivatives(&self, i: usize) -> (SpectralVector, SpectralVector) {
        let u = &self.u[i];
        let eig = self.op.eigenvalues();
        let c = self.c[i];
        let dc = self.c_derivative(i);
        let du = eig.iter().zip(&u.0).map(|(l, x)| -c * l * x).collect();
        let ddu = eig.iter().zip(&u.0).map(|(l, x)| (-dc * l + c * c * l * l) * x).collect();
        (SpectralVector(du), SpectralVector(ddu))
    }

    /// `c'(t_i) = -2γ s^{2γ-1} |Au|²` with `s = |A^{1/2}u|²`.
    pub fn c_derivative(&self, i: usize) -> f64 {
        let s = self.norm_sq(0.5, i);
        if s < S_FLOOR {
            return 0.0;
        }
        -2.0 * self.gamma * s.powf(2.0 * self.gamma - 1.0) * self.norm_sq(1.0, i)
    }
}

fn check_grid(times: &[f64]) -> Result<()> {
    match times.first() {
        Some(t0) if *t0 == 0.0 => Ok(()),
        _ => Err(Error::InvalidArgument("sample times must start at t = 0".into())),
    }
}

fn check_tol(rel_tol: f64) -> Result<()> {
    if rel_tol > 0.0 && rel_tol < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("relative tolerance {rel_tol} must lie in (0, 1)")))
    }
}

/// Solves the limit problem through the scalar equation
/// `C' = (Σ λ_k² u0_k² e^{-2λ_k² C})^γ`, `C(0) = 0`.
pub fn solve_profile(
    op: &SpectralOperator,
    data: &InitialData,
    times: &[f64],
    rel_tol: f64,
) -> Result<ParabolicTrajectory> {
    check_grid(times)?;
    check_tol(rel_tol)?;
    let eig = op.eigenvalues().to_vec();
    let u0 = data.u0.0.clone();
    let gamma = data.gamma;
    let s_of = |big_c: f64| compensated_sum(eig.iter().zip(&u0).map(|(l, a)| l * a * a * (-2.0 * l * big_c).exp()));

    let solver = DormandPrince::new(rel_tol, rel_tol * 1e-6);
    let sol = solver.solve(|_, y, dy| dy[0] = coefficient(s_of(y[0]), gamma), &[0.0], times)?;

    let mut u = Vec::with_capacity(times.len());
    let mut c = Vec::with_capacity(times.len());
    let mut c_integral = Vec::with_capacity(times.len());
    for (t, state) in times.iter().zip(&sol.states) {
        let big_c = state[0];
        if !big_c.is_finite() {
            return Err(Error::NonFinite(*t));
        }
        u.push(SpectralVector(eig.iter().zip(&u0).map(|(l, a)| a * (-l * big_c).exp()).collect()));
        c.push(coefficient(s_of(big_c), gamma));
        c_integral.push(big_c);
    }
    Ok(ParabolicTrajectory { op: op.clone(), gamma, times: times.to_vec(), u, c, c_integral, stats: sol.stats })
}

/// Integrates all modes together with `C`, without using the profile reduction.
pub fn solve_direct(
    op: &SpectralOperator,
    data: &InitialData,
    times: &[f64],
    rel_tol: f64,
) -> Result<ParabolicTrajectory> {
    check_grid(times)?;
    check_tol(rel_tol)?;
    let eig = op.eigenvalues().to_vec();
    let n = eig.len();
    let gamma = data.gamma;
    let scale = data.u0.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let mut y0 = data.u0.0.clone();
    y0.push(0.0);
    let solver = DormandPrince::new(rel_tol, rel_tol * 1e-6 * scale);
    let sol = solver.solve(
        |_, y, dy| {
            let c = coefficient(weighted_norm_sq_raw(&eig, 0.5, &y[..n]), gamma);
            for k in 0..n {
                dy[k] = -c * eig[k] * y[k];
            }
            dy[n] = c;
        },
        &y0,
        times,
    )?;

    let mut u = Vec::with_capacity(times.len());
    let mut c = Vec::with_capacity(times.len());
    let mut c_integral = Vec::with_capacity(times.len());
    for (t, state) in times.iter().zip(&sol.states) {
        if state.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(*t));
        }
        c.push(coefficient(weighted_norm_sq_raw(&eig, 0.5, &state[..n]), gamma));
        u.push(SpectralVector(state[..n].to_vec()));
        c_integral.push(state[n]);
    }
    Ok(ParabolicTrajectory { op: op.clone(), gamma, times: times.to_vec(), u, c, c_integral, stats: sol.stats })
}
