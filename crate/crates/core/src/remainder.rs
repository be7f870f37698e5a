//! Corrector `θ_ε(t) = εθ₀(1 - e^{-t/ε})` and the remainders
//! `ρ_ε = u_ε - u`, `r_ε = ρ_ε - θ_ε`.

use crate::error::{Error, Result};
use crate::hyperbolic::HyperbolicTrajectory;
use crate::numeric::compensated_sum;
use crate::parabolic::ParabolicTrajectory;
use crate::spectral::{weighted_norm_sq_raw, SpectralVector};

/// `(θ_ε(t), θ_ε'(t))`.
pub fn corrector(theta0: &SpectralVector, epsilon: f64, t: f64) -> (SpectralVector, SpectralVector) {
    // 1 - e^{-x} without cancellation for small x
    let ramp = -(-t / epsilon).exp_m1();
    let decay = (-t / epsilon).exp();
    (theta0.scale(epsilon * ramp), theta0.scale(decay))
}

/// Remainder vectors and their weighted norms on the shared sample grid.
#[derive(Debug, Clone)]
pub struct RemainderSeries {
    pub epsilon: f64,
    pub gamma: f64,
    /// Decay exponent of the difference, when known from the data profile.
    pub delta: Option<f64>,
    pub times: Vec<f64>,
    pub rho: Vec<SpectralVector>,
    pub r: Vec<SpectralVector>,
    pub r_prime: Vec<SpectralVector>,
    /// `|ρ|²`
    pub rho_sq: Vec<f64>,
    /// `|A^{1/2}ρ|²`
    pub rho_half_sq: Vec<f64>,
    /// `|Aρ|²`
    pub rho_one_sq: Vec<f64>,
    /// `|r'|²`
    pub r_prime_sq: Vec<f64>,
    /// `|A^{1/2}r'|²`
    pub r_prime_half_sq: Vec<f64>,
    /// `|ρ'|²`
    pub rho_prime_sq: Vec<f64>,
}

impl RemainderSeries {
    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

pub(crate) fn check_pair(hyp: &HyperbolicTrajectory, par: &ParabolicTrajectory) -> Result<()> {
    if hyp.times != par.times || hyp.op != par.op || hyp.gamma != par.gamma {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

pub fn build_remainders(
    hyp: &HyperbolicTrajectory,
    par: &ParabolicTrajectory,
    theta0: &SpectralVector,
) -> Result<RemainderSeries> {
    check_pair(hyp, par)?;
    if theta0.len() != hyp.op.dim() {
        return Err(Error::DimensionMismatch { expected: hyp.op.dim(), got: theta0.len() });
    }
    let eig = hyp.op.eigenvalues();
    let n = hyp.len();
    let mut out = RemainderSeries {
        epsilon: hyp.epsilon,
        gamma: hyp.gamma,
        delta: None,
        times: hyp.times.clone(),
        rho: Vec::with_capacity(n),
        r: Vec::with_capacity(n),
        r_prime: Vec::with_capacity(n),
        rho_sq: Vec::with_capacity(n),
        rho_half_sq: Vec::with_capacity(n),
        rho_one_sq: Vec::with_capacity(n),
        r_prime_sq: Vec::with_capacity(n),
        r_prime_half_sq: Vec::with_capacity(n),
        rho_prime_sq: Vec::with_capacity(n),
    };
    for i in 0..n {
        let (theta, dtheta) = corrector(theta0, hyp.epsilon, hyp.times[i]);
        let (du, _) = par.derivatives(i);
        let rho = hyp.u[i].sub(&par.u[i]);
        let rho_prime = hyp.du[i].sub(&du);
        let r_prime = rho_prime.sub(&dtheta);
        out.rho_sq.push(weighted_norm_sq_raw(eig, 0.0, &rho.0));
        out.rho_half_sq.push(weighted_norm_sq_raw(eig, 0.5, &rho.0));
        out.rho_one_sq.push(weighted_norm_sq_raw(eig, 1.0, &rho.0));
        out.r_prime_sq.push(weighted_norm_sq_raw(eig, 0.0, &r_prime.0));
        out.r_prime_half_sq.push(weighted_norm_sq_raw(eig, 0.5, &r_prime.0));
        out.rho_prime_sq.push(weighted_norm_sq_raw(eig, 0.0, &rho_prime.0));
        out.r.push(rho.sub(&theta));
        out.rho.push(rho);
        out.r_prime.push(r_prime);
    }
    Ok(out)
}

/// Both sides of `⟨c_ε A u_ε - c A u, ρ⟩ ≥ ½(c_ε + c)|A^{1/2}ρ|²` at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicitySample {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Roundoff allowance `1e-12 · (c_ε + c)(|A^{1/2}u_ε|² + |A^{1/2}u|²)`.
    pub slack: f64,
}

impl MonotonicitySample {
    pub fn holds(&self) -> bool {
        self.lhs >= self.rhs - self.slack
    }

    /// Violation measured in units of the slack scale; 0 when the inequality holds.
    pub fn violation(&self) -> f64 {
        let scale = self.slack / 1e-12;
        if self.holds() || scale == 0.0 {
            0.0
        } else {
            (self.rhs - self.lhs) / scale
        }
    }
}

pub fn monotonicity_samples(hyp: &HyperbolicTrajectory, par: &ParabolicTrajectory) -> Result<Vec<MonotonicitySample>> {
    check_pair(hyp, par)?;
    let eig = hyp.op.eigenvalues();
    Ok((0..hyp.len())
        .map(|i| {
            let (ue, u) = (&hyp.u[i].0, &par.u[i].0);
            let (ce, c) = (hyp.c[i], par.c[i]);
            let lhs = compensated_sum((0..eig.len()).map(|k| eig[k] * (ce * ue[k] - c * u[k]) * (ue[k] - u[k])));
            let rho_half = compensated_sum((0..eig.len()).map(|k| eig[k] * (ue[k] - u[k]).powi(2)));
            let scale = (ce + c) * (hyp.norm_sq(0.5, i) + par.norm_sq(0.5, i));
            MonotonicitySample { t: hyp.times[i], lhs, rhs: 0.5 * (ce + c) * rho_half, slack: 1e-12 * scale }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::run_grid;
    use crate::hyperbolic::{solve_hyperbolic, HyperbolicOptions};
    use crate::ode::DormandPrince;
    use crate::parabolic::solve_profile;
    use crate::spectral::{InitialData, SpectralOperator};

    #[test]
    fn corrector_endpoints() {
        let th = SpectralVector::new(vec![2.0, -1.0]);
        let (v, d) = corrector(&th, 1e-3, 0.0);
        assert_eq!(v.0, vec![0.0, 0.0]);
        assert_eq!(d, th);
        let (v, _) = corrector(&th, 1e-3, 0.1);
        for (a, b) in v.iter().zip(th.iter()) {
            assert!((a - 1e-3 * b).abs() <= 1e-3 * b.abs() * (-100f64).exp() * 2.0 + f64::EPSILON * 1e-3);
        }
    }

    /// Sixth-order central difference.
    fn diff(f: impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
        let w = [(1.0, 45.0), (2.0, -9.0), (3.0, 1.0)];
        w.iter().map(|(k, c)| c * (f(t + k * h) - f(t - k * h))).sum::<f64>() / (60.0 * h)
    }

    #[test]
    fn corrector_solves_its_equation() {
        let th = SpectralVector::new(vec![1.0]);
        let eps = 1e-2;
        for t in [0.001, 0.01, 0.05, 0.2] {
            let value = |s: f64| corrector(&th, eps, s).0 .0[0];
            let slope = |s: f64| corrector(&th, eps, s).1 .0[0];
            assert!((diff(value, t, 1e-5) - slope(t)).abs() <= 1e-12, "t = {t}");
            let residual = eps * diff(slope, t, 1e-5) + slope(t);
            assert!(residual.abs() <= 1e-12, "t = {t}: {residual}");
        }
    }

    #[test]
    fn corrector_matches_numeric_integration() {
        let eps = 1e-3;
        let times: Vec<f64> = (0..=100).map(|i| i as f64 * 1e-4).collect();
        let sol = DormandPrince::new(1e-13, 1e-16)
            .solve(
                |_, y, dy| {
                    dy[0] = y[1];
                    dy[1] = -y[1] / eps;
                },
                &[0.0, 1.0],
                &times,
            )
            .unwrap();
        let th = SpectralVector::unit(1, 0);
        for (t, y) in times.iter().zip(&sol.states) {
            let (v, d) = corrector(&th, eps, *t);
            assert!((v.0[0] - y[0]).abs() <= 1e-10);
            assert!((d.0[0] - y[1]).abs() <= 1e-8);
        }
    }

    fn pair(
        eig: Vec<f64>,
        u0: Vec<f64>,
        u1: Vec<f64>,
        eps: f64,
    ) -> (HyperbolicTrajectory, ParabolicTrajectory, SpectralVector) {
        let op = SpectralOperator::new(eig).unwrap();
        let data = InitialData::new(&op, u0.into(), u1.into(), 1.0).unwrap();
        let times = run_grid(eps, 100.0, 10, None).unwrap();
        let hyp = solve_hyperbolic(&op, &data, eps, &times, &HyperbolicOptions::default()).unwrap();
        let par = solve_profile(&op, &data, &times, 1e-11).unwrap();
        (hyp, par, op.theta0(&data).unwrap())
    }

    #[test]
    fn remainders_start_at_zero_and_decompose() {
        let (hyp, par, th) = pair(vec![1.0, 2.0], vec![0.0, 1.0], vec![1.0, 0.0], 1e-2);
        let rem = build_remainders(&hyp, &par, &th).unwrap();
        assert_eq!(rem.rho_sq[0], 0.0);
        assert_eq!(rem.r_prime_sq[0], 0.0);
        for i in 0..rem.len() {
            let (theta, _) = corrector(&th, rem.epsilon, rem.times[i]);
            let back = rem.r[i].add(&theta);
            for (a, b) in back.iter().zip(rem.rho[i].iter()) {
                assert!((a - b).abs() <= 4.0 * f64::EPSILON * (b.abs() + theta.norm()));
            }
        }
    }

    #[test]
    fn well_prepared_data_has_no_corrector() {
        // u1 = -|A^{1/2}u0|² A u0 for u0 = (1, 1), eigenvalues (1, 2): s = 3
        let (hyp, par, th) = pair(vec![1.0, 2.0], vec![1.0, 1.0], vec![-3.0, -6.0], 1e-2);
        assert!(th.is_zero());
        let rem = build_remainders(&hyp, &par, &th).unwrap();
        assert_eq!(rem.r_prime_sq, rem.rho_prime_sq);
    }

    #[test]
    fn single_mode_rho_is_order_epsilon() {
        let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&eps| {
                let (hyp, par, th) = pair(vec![1.0], vec![1.0], vec![0.0], eps);
                let rem = build_remainders(&hyp, &par, &th).unwrap();
                rem.rho_sq.iter().fold(0.0f64, |m, x| m.max(*x)) / (eps * eps)
            })
            .collect();
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(*x), b.max(*x)));
        assert!(lo > 0.0 && hi / lo < 3.0, "{ratios:?}");
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let (hyp, _, th) = pair(vec![1.0], vec![1.0], vec![0.0], 1e-2);
        let op = hyp.op.clone();
        let data = InitialData::new(&op, vec![1.0].into(), vec![0.0].into(), 1.0).unwrap();
        let par = solve_profile(&op, &data, &[0.0, 1.0], 1e-10).unwrap();
        assert_eq!(build_remainders(&hyp, &par, &th).unwrap_err(), Error::GridMismatch);
        assert!(monotonicity_samples(&hyp, &par).is_err());
    }

    #[test]
    fn monotonicity_holds_on_a_run() {
        let (hyp, par, _) = pair(vec![0.5, 1.0, 3.0], vec![1.0, -1.0, 0.5], vec![2.0, 0.0, -1.0], 1e-2);
        let samples = monotonicity_samples(&hyp, &par).unwrap();
        assert!(samples.iter().all(MonotonicitySample::holds));
        assert!(samples.iter().all(|s| s.violation() == 0.0));
    }
}
