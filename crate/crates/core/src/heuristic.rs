//! Two-mode toy model of the decay-error mechanism and the comparison
//! argument behind the lower bound.
//!
//! The toy system is `w' = -μ S^γ w`, `v' = -ν S^γ v` with `S = νv² + μw²`,
//! `w(0) = 1`, `v(0) = ε`. Writing `v = εψ` gives `w = ψ^{1/δ}` and
//! `ψ' = -ν(νε²ψ² + μψ^{2/δ})^γ ψ`, `ψ(0) = 1`.

use serde::{Deserialize, Serialize};

use crate::audit::{AuditEntry, AuditReport, BoundKind, ReportMeta, Verdict};
use crate::error::{Error, Result};
use crate::fit::{fit_rate, spread, RateFit};
use crate::grid::{log_grid, probe_time};
use crate::ode::DormandPrince;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToyRun {
    pub mu: f64,
    pub nu: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub times: Vec<f64>,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    /// Integrated from its own equation, not recovered from `v`.
    pub psi: Vec<f64>,
}

impl ToyRun {
    /// Largest relative deviation from `v = εψ`, `w = ψ^{1/δ}`.
    pub fn substitution_error(&self) -> f64 {
        (0..self.times.len())
            .map(|i| {
                let p = self.psi[i];
                let ev = (self.v[i] - self.epsilon * p).abs() / (self.epsilon * p);
                let pw = p.powf(1.0 / self.delta);
                ev.max((self.w[i] - pw).abs() / pw)
            })
            .fold(0.0, f64::max)
    }

    /// Inf and sup of `v(t)(1+t)^{δ/(2γ)}/ε` over samples in `window`.
    pub fn band(&self, window: [f64; 2]) -> Result<(f64, f64)> {
        let k = self.delta / (2.0 * self.gamma);
        let vals: Vec<f64> = self
            .times
            .iter()
            .zip(&self.v)
            .filter(|(t, _)| **t >= window[0] && **t <= window[1])
            .map(|(t, v)| v * (1.0 + t).powf(k) / self.epsilon)
            .collect();
        if vals.is_empty() {
            return Err(Error::EmptyWindow { lo: window[0], hi: window[1], count: 0, need: 1 });
        }
        Ok(vals.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v))))
    }

    /// Whether `ψ`, `w`, `v` are positive and strictly decreasing.
    pub fn is_positive_decreasing(&self) -> bool {
        [&self.psi, &self.w, &self.v].iter().all(|s| s.iter().all(|x| *x > 0.0) && s.windows(2).all(|p| p[1] < p[0]))
    }
}

fn check_toy(mu: f64, nu: f64, gamma: f64, rel_tol: f64) -> Result<()> {
    if !(nu > 0.0 && nu <= mu && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!("need 0 < ν ≤ μ, got μ = {mu}, ν = {nu}")));
    }
    if !(gamma >= 1.0) {
        return Err(Error::InvalidArgument(format!("γ = {gamma} must be at least 1")));
    }
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::InvalidArgument(format!("rel_tol {rel_tol} must lie in (0, 1)")));
    }
    Ok(())
}

fn integrate_psi(mu: f64, nu: f64, gamma: f64, epsilon: f64, times: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    let inv_delta = mu / nu;
    let eps2 = epsilon * epsilon;
    let sol = DormandPrince::new(rel_tol, rel_tol * 1e-9).solve(
        |_, y, dy| {
            let p = y[0].max(0.0);
            dy[0] = -nu * (nu * eps2 * p * p + mu * p.powf(2.0 * inv_delta)).powf(gamma) * p;
        },
        &[1.0],
        times,
    )?;
    Ok(sol.states.into_iter().map(|s| s[0]).collect())
}

pub fn solve_toy(mu: f64, nu: f64, gamma: f64, epsilon: f64, times: &[f64], rel_tol: f64) -> Result<ToyRun> {
    check_toy(mu, nu, gamma, rel_tol)?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} must be positive")));
    }
    let sol = DormandPrince::new(rel_tol, rel_tol * 1e-9 * epsilon).solve(
        |_, y, dy| {
            let s = nu * y[1] * y[1] + mu * y[0] * y[0];
            let rate = s.powf(gamma);
            dy[0] = -mu * rate * y[0];
            dy[1] = -nu * rate * y[1];
        },
        &[1.0, epsilon],
        times,
    )?;
    let psi = integrate_psi(mu, nu, gamma, epsilon, times, rel_tol)?;
    Ok(ToyRun {
        mu,
        nu,
        gamma,
        epsilon,
        delta: nu / mu,
        times: times.to_vec(),
        w: sol.states.iter().map(|s| s[0]).collect(),
        v: sol.states.iter().map(|s| s[1]).collect(),
        psi,
    })
}

/// Solution of the `ψ` equation with `ε = 0`:
/// `(1 + (2γk/δ) t)^{-δ/(2γ)}` with `k = νμ^γ`.
pub fn limit_profile(mu: f64, nu: f64, gamma: f64, t: f64) -> f64 {
    let delta = nu / mu;
    let k = nu * mu.powf(gamma);
    (1.0 + 2.0 * gamma * k / delta * t).powf(-delta / (2.0 * gamma))
}

/// `z(t) = (δ/(4Kγt + δ))^{δ/(2γ)}`, which solves `z' = -2K z^{1+2γ/δ}`,
/// `z(0) = 1`.
pub fn comparison_subsolution(delta: f64, k: f64, gamma: f64, t: f64) -> f64 {
    (delta / (4.0 * k * gamma * t + delta)).powf(delta / (2.0 * gamma))
}

/// Fitted decay exponent of `ψ` over `window`, far beyond the crossover
/// time where the `ε²ψ²` term takes over.
pub fn post_crossover_exponent(
    mu: f64,
    nu: f64,
    gamma: f64,
    epsilon: f64,
    window: [f64; 2],
    rel_tol: f64,
) -> Result<RateFit> {
    check_toy(mu, nu, gamma, rel_tol)?;
    let times = log_grid(window[0] / 10.0, window[1], 10, &[window[0]])?;
    let psi = integrate_psi(mu, nu, gamma, epsilon, &times, rel_tol)?;
    fit_rate(&times, &psi, window)
}

/// One ladder point of the comparison check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonPoint {
    pub epsilon: f64,
    pub probe_time: f64,
    /// Solution of `ψ' = -Kψ(ε^{2γ}ψ^{2γ} + ψ^{2γ/δ})`, `ψ(0) = 1`, at the probe time.
    pub psi: f64,
    pub z: f64,
    /// `ψ(ε^{-δ}) / ε^{δ²/(2γ)}`.
    pub scaled: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonCheck {
    pub points: Vec<ComparisonPoint>,
    pub spread: f64,
    pub report: AuditReport,
}

/// Integrates the equality case of the differential inequality up to
/// `ε^{-δ}` for each ε and compares it with the subsolution `z`. The scaled
/// value must stay within `stability_factor` across the ladder.
pub fn verify_supersolution_bound(
    delta: f64,
    k: f64,
    gamma: f64,
    ladder: &[f64],
    rel_tol: f64,
    stability_factor: f64,
) -> Result<ComparisonCheck> {
    if !(delta > 0.0 && delta <= 1.0 && k > 0.0) {
        return Err(Error::InvalidArgument(format!("need 0 < δ ≤ 1 and K > 0, got δ = {delta}, K = {k}")));
    }
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::InvalidArgument(format!("rel_tol {rel_tol} must lie in (0, 1)")));
    }
    let slack = 10.0 * rel_tol;
    let mut report = AuditReport::new("comparison bound");
    report.meta = ReportMeta { gamma: Some(gamma), delta: Some(delta), ..ReportMeta::default() };
    let mut points = Vec::with_capacity(ladder.len());
    for &eps in ladder {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon {eps} must lie in (0, 1)")));
        }
        let probe = probe_time(eps, delta);
        let e2g = eps.powf(2.0 * gamma);
        let sol = DormandPrince::new(rel_tol, rel_tol * 1e-9).solve(
            |_, y, dy| {
                let p = y[0].max(0.0);
                dy[0] = -k * p * (e2g * p.powf(2.0 * gamma) + p.powf(2.0 * gamma / delta));
            },
            &[1.0],
            &[0.0, probe],
        )?;
        let psi = sol.states[1][0];
        let z = comparison_subsolution(delta, k, gamma, probe);
        let scaled = psi / eps.powf(delta * delta / (2.0 * gamma));
        report.entries.push(AuditEntry {
            name: format!("ψ(ε^{{-δ}}) - z(ε^{{-δ}}) at ε = {eps:e}"),
            claim: format!("comparison-subsolution:{eps:e}"),
            kind: BoundKind::NoViolation,
            constant: (z - psi).max(0.0),
            lower: None,
            window: [0.0, probe],
            verdict: Verdict::from_bool(psi >= z - slack),
            detail: Some(format!("psi = {psi:e}, z = {z:e}")),
        });
        report.entries.push(AuditEntry {
            name: format!("ψ(ε^{{-δ}}) / ε^{{δ²/(2γ)}} at ε = {eps:e}"),
            claim: format!("comparison-constant:{eps:e}"),
            kind: BoundKind::Lower,
            constant: scaled,
            lower: None,
            window: [probe, probe],
            verdict: Verdict::from_bool(scaled > 0.0),
            detail: None,
        });
        points.push(ComparisonPoint { epsilon: eps, probe_time: probe, psi, z, scaled });
    }
    let s = spread(&points.iter().map(|p| p.scaled).collect::<Vec<_>>());
    report.entries.push(AuditEntry {
        name: "max/min of ψ(ε^{-δ}) / ε^{δ²/(2γ)} over the ladder".into(),
        claim: "comparison-constant-stability".into(),
        kind: BoundKind::Upper,
        constant: s,
        lower: None,
        window: [0.0, points.iter().map(|p| p.probe_time).fold(0.0, f64::max)],
        verdict: Verdict::from_bool(s <= stability_factor),
        detail: None,
    });
    Ok(ComparisonCheck { points, spread: s, report })
}
