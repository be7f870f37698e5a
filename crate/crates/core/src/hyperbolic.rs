//! The damped problem `εu'' + u' + |A^{1/2}u|^{2γ} A u = 0`.
//!
//! The state `(u, u', C_ε)` is advanced by the Radau IIA integrator with an
//! analytic Jacobian. `C_ε = ∫c_ε` is carried as an extra component so it is
//! integrated by the same stages as `u`. Steps are capped at `ε/4` on `[0, 5ε]`
//! to resolve the initial layer, then grow freely.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numeric::{dot, norm_sq};
use crate::ode::{Radau5, StepStats, StiffSystem};
use crate::parabolic::{coefficient, S_FLOOR};
use crate::spectral::{weighted_norm_sq_raw, InitialData, MuNuProfile, SpectralOperator, SpectralVector};

#[derive(Debug, Clone)]
pub struct HyperbolicOptions {
    pub rel_tol: f64,
    /// Absolute tolerance; defaults to `rel_tol · 1e-6 · max|u0_k|`.
    pub abs_tol: Option<f64>,
    /// Largest ε accepted.
    pub eps_max: f64,
    /// From this time on, `|A^{1/2}u_ε|` must have dropped below its initial value.
    pub blowup_horizon: f64,
    /// Allowed energy increase between samples, relative to the initial energy.
    pub energy_tol: f64,
}

impl Default for HyperbolicOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: None, eps_max: 0.5, blowup_horizon: 1e3, energy_tol: 1e-9 }
    }
}

impl HyperbolicOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub struct HyperbolicTrajectory {
    pub op: SpectralOperator,
    pub gamma: f64,
    pub epsilon: f64,
    pub times: Vec<f64>,
    pub u: Vec<SpectralVector>,
    /// `u_ε'` at each sample.
    pub du: Vec<SpectralVector>,
    pub c: Vec<f64>,
    /// `C_ε(t) = ∫₀ᵗ c_ε`.
    pub c_integral: Vec<f64>,
    pub energy: Vec<f64>,
    pub stats: StepStats,
}

impl HyperbolicTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `|A^α u_ε(t_i)|²`.
    pub fn norm_sq(&self, alpha: f64, i: usize) -> f64 {
        weighted_norm_sq_raw(self.op.eigenvalues(), alpha, &self.u[i].0)
    }

    /// `|A^α u_ε'(t_i)|²`.
    pub fn velocity_norm_sq(&self, alpha: f64, i: usize) -> f64 {
        weighted_norm_sq_raw(self.op.eigenvalues(), alpha, &self.du[i].0)
    }

    /// `u_ε'' = -(u_ε' + c_ε A u_ε) / ε`.
    pub fn second_derivative(&self, i: usize) -> SpectralVector {
        let c = self.c[i];
        SpectralVector(
            self.op
                .eigenvalues()
                .iter()
                .zip(self.u[i].iter().zip(self.du[i].iter()))
                .map(|(l, (x, v))| -(v + c * l * x) / self.epsilon)
                .collect(),
        )
    }

    /// `c_ε' = 2γ s^{γ-1} ⟨Au_ε, u_ε'⟩`.
    pub fn c_derivative(&self, i: usize) -> f64 {
        let s = self.norm_sq(0.5, i);
        if s < S_FLOOR {
            return 0.0;
        }
        let au: Vec<f64> = self.op.eigenvalues().iter().zip(&self.u[i].0).map(|(l, x)| l * x).collect();
        2.0 * self.gamma * s.powf(self.gamma - 1.0) * dot(&au, &self.du[i].0)
    }
}

/// `ε|u'|² + |A^{1/2}u|^{2γ+2}/(γ+1)`, nonincreasing along solutions.
pub fn energy(op: &SpectralOperator, gamma: f64, epsilon: f64, u: &SpectralVector, du: &SpectralVector) -> Result<f64> {
    for v in [u, du] {
        if v.len() != op.dim() {
            return Err(Error::DimensionMismatch { expected: op.dim(), got: v.len() });
        }
    }
    Ok(energy_raw(op.eigenvalues(), gamma, epsilon, &u.0, &du.0))
}

fn energy_raw(eig: &[f64], gamma: f64, epsilon: f64, u: &[f64], du: &[f64]) -> f64 {
    let s = weighted_norm_sq_raw(eig, 0.5, u);
    epsilon * norm_sq(du) + s.powf(gamma + 1.0) / (gamma + 1.0)
}

struct Kirchhoff {
    eig: Vec<f64>,
    gamma: f64,
    epsilon: f64,
}

impl Kirchhoff {
    fn n(&self) -> usize {
        self.eig.len()
    }
}

impl StiffSystem for Kirchhoff {
    fn dim(&self) -> usize {
        2 * self.n() + 1
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.n();
        let (u, p) = (&y[..n], &y[n..2 * n]);
        let c = coefficient(weighted_norm_sq_raw(&self.eig, 0.5, u), self.gamma);
        for k in 0..n {
            dy[k] = p[k];
            dy[n + k] = -(p[k] + c * self.eig[k] * u[k]) / self.epsilon;
        }
        dy[2 * n] = c;
    }

    fn jacobian(&self, _t: f64, y: &[f64], jac: &mut DMatrix<f64>) {
        let n = self.n();
        let u = &y[..n];
        let s = weighted_norm_sq_raw(&self.eig, 0.5, u);
        let c = coefficient(s, self.gamma);
        // dc/ds
        let g = if s < S_FLOOR { 0.0 } else { self.gamma * s.powf(self.gamma - 1.0) };
        let inv = 1.0 / self.epsilon;
        for k in 0..n {
            jac[(k, n + k)] = 1.0;
            jac[(n + k, n + k)] = -inv;
            jac[(n + k, k)] -= c * self.eig[k] * inv;
            for j in 0..n {
                let dc_du = 2.0 * g * self.eig[j] * u[j];
                jac[(n + k, j)] -= self.eig[k] * u[k] * dc_du * inv;
            }
            jac[(2 * n, k)] = 2.0 * g * self.eig[k] * u[k];
        }
    }

    fn max_step(&self, t: f64) -> f64 {
        if t < 5.0 * self.epsilon {
            self.epsilon / 4.0
        } else {
            f64::INFINITY
        }
    }
}

/// Integrates the damped problem and samples it at `times` (which must start at 0).
///
/// Fails with [`Error::BlowUp`] when the energy grows between samples by more
/// than the configured tolerance, or when `|A^{1/2}u_ε|` has not decayed below
/// its initial value by the blow-up horizon.
pub fn solve_hyperbolic(
    op: &SpectralOperator,
    data: &InitialData,
    epsilon: f64,
    times: &[f64],
    opts: &HyperbolicOptions,
) -> Result<HyperbolicTrajectory> {
    if !(epsilon > 0.0 && epsilon <= opts.eps_max) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} must lie in (0, {}]", opts.eps_max)));
    }
    if !(opts.rel_tol > 0.0 && opts.rel_tol < 1.0) {
        return Err(Error::InvalidArgument(format!("relative tolerance {} must lie in (0, 1)", opts.rel_tol)));
    }
    if times.first() != Some(&0.0) {
        return Err(Error::InvalidArgument("sample times must start at t = 0".into()));
    }

    let n = op.dim();
    let sys = Kirchhoff { eig: op.eigenvalues().to_vec(), gamma: data.gamma, epsilon };
    let mut y0 = Vec::with_capacity(2 * n + 1);
    y0.extend_from_slice(&data.u0.0);
    y0.extend_from_slice(&data.u1.0);
    y0.push(0.0);

    let scale = data.u0.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let atol = opts.abs_tol.unwrap_or(opts.rel_tol * 1e-6 * scale);
    let solver = Radau5::new(opts.rel_tol, atol, epsilon / 10.0);

    let s0 = weighted_norm_sq_raw(&sys.eig, 0.5, &data.u0.0);
    let e0 = energy_raw(&sys.eig, data.gamma, epsilon, &data.u0.0, &data.u1.0);
    let slack = opts.energy_tol * e0;
    let mut e_prev = e0;
    let sol = solver.solve_inspect(&sys, &y0, times, |t, y| {
        if y.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(t));
        }
        let e = energy_raw(&sys.eig, sys.gamma, epsilon, &y[..n], &y[n..2 * n]);
        if e > e_prev + slack {
            return Err(Error::BlowUp { t, reason: format!("energy rose from {e_prev:e} to {e:e}") });
        }
        e_prev = e;
        if t >= opts.blowup_horizon && weighted_norm_sq_raw(&sys.eig, 0.5, &y[..n]) >= s0 {
            return Err(Error::BlowUp { t, reason: "|A^{1/2}u| has not decayed".into() });
        }
        Ok(())
    })?;

    let mut traj = HyperbolicTrajectory {
        op: op.clone(),
        gamma: data.gamma,
        epsilon,
        times: times.to_vec(),
        u: Vec::with_capacity(times.len()),
        du: Vec::with_capacity(times.len()),
        c: Vec::with_capacity(times.len()),
        c_integral: Vec::with_capacity(times.len()),
        energy: Vec::with_capacity(times.len()),
        stats: sol.stats,
    };
    for y in &sol.states {
        let (u, p) = (&y[..n], &y[n..2 * n]);
        let c = coefficient(weighted_norm_sq_raw(&sys.eig, 0.5, u), data.gamma);
        if c < 0.0 {
            return Err(Error::NonFinite(c));
        }
        traj.energy.push(energy_raw(&sys.eig, data.gamma, epsilon, u, p));
        traj.c.push(c);
        traj.c_integral.push(y[2 * n]);
        traj.u.push(SpectralVector(u.to_vec()));
        traj.du.push(SpectralVector(p.to_vec()));
    }
    Ok(traj)
}

/// One scalar component `⟨u_ε, v⟩/|v|` along an eigenvector `v` of eigenvalue `frequency`.
#[derive(Debug, Clone)]
pub struct ComponentTrack {
    pub frequency: f64,
    pub value: Vec<f64>,
    pub derivative: Vec<f64>,
    pub second: Vec<f64>,
}

impl ComponentTrack {
    /// `ε y'' + y' + λ c_ε y` at every sample, with `y''` taken from `second`.
    pub fn residual(&self, epsilon: f64, c: &[f64]) -> Vec<f64> {
        (0..self.value.len())
            .map(|i| epsilon * self.second[i] + self.derivative[i] + self.frequency * c[i] * self.value[i])
            .collect()
    }
}

/// Projections of the hyperbolic solution on `v0` (frequency μ) and `v1` (frequency ν).
#[derive(Debug, Clone)]
pub struct ComponentSeries {
    pub times: Vec<f64>,
    pub mu: ComponentTrack,
    nu: Option<ComponentTrack>,
}

impl ComponentSeries {
    pub fn nu(&self) -> Result<&ComponentTrack> {
        self.nu.as_ref().ok_or(Error::MissingV1)
    }

    pub fn has_nu(&self) -> bool {
        self.nu.is_some()
    }
}

fn project(traj: &HyperbolicTrajectory, v: &SpectralVector, frequency: f64) -> ComponentTrack {
    let norm = v.norm();
    let along = |w: &SpectralVector| w.dot(v) / norm;
    ComponentTrack {
        frequency,
        value: traj.u.iter().map(along).collect(),
        derivative: traj.du.iter().map(along).collect(),
        second: (0..traj.len()).map(|i| along(&traj.second_derivative(i))).collect(),
    }
}

pub fn components(traj: &HyperbolicTrajectory, profile: &MuNuProfile) -> Result<ComponentSeries> {
    if profile.v0.len() != traj.op.dim() {
        return Err(Error::DimensionMismatch { expected: traj.op.dim(), got: profile.v0.len() });
    }
    if profile.v0.is_zero() {
        return Err(Error::InvalidData("v0 vanishes".into()));
    }
    let mu = project(traj, &profile.v0, profile.mu);
    let nu = match profile.nu {
        Some(nu) if !profile.v1.is_zero() => Some(project(traj, &profile.v1, nu)),
        _ => None,
    };
    Ok(ComponentSeries { times: traj.times.clone(), mu, nu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::log_space;

    fn grid(eps: f64, hi: f64) -> Vec<f64> {
        let mut t = vec![0.0];
        t.extend(log_space(eps / 10.0, hi, 12));
        t
    }

    #[test]
    fn energy_examples() {
        let op = SpectralOperator::new(vec![1.0]).unwrap();
        let e = energy(&op, 1.0, 0.1, &vec![1.0].into(), &vec![0.0].into()).unwrap();
        assert_eq!(e, 0.5);
        let z = SpectralVector::zeros(1);
        assert_eq!(energy(&op, 1.0, 0.1, &z, &z).unwrap(), 0.0);
        assert!(energy(&op, 1.0, 0.1, &z, &SpectralVector::zeros(2)).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let sys = Kirchhoff { eig: vec![0.0, 1.0, 3.0], gamma: 1.5, epsilon: 0.01 };
        let y = [0.3, -0.7, 0.4, 1.0, -2.0, 0.5, 0.1];
        let mut jac = DMatrix::zeros(7, 7);
        sys.jacobian(0.0, &y, &mut jac);
        let (mut fp, mut fm) = (vec![0.0; 7], vec![0.0; 7]);
        for j in 0..7 {
            let h = 1e-6;
            let (mut yp, mut ym) = (y.to_vec(), y.to_vec());
            yp[j] += h;
            ym[j] -= h;
            sys.rhs(0.0, &yp, &mut fp);
            sys.rhs(0.0, &ym, &mut fm);
            for i in 0..7 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                assert!((fd - jac[(i, j)]).abs() <= 1e-6 * (1.0 + fd.abs()), "({i},{j}): {fd} vs {}", jac[(i, j)]);
            }
        }
    }

    #[test]
    fn initial_conditions_are_sampled_exactly() {
        let op = SpectralOperator::new(vec![1.0, 2.0]).unwrap();
        let data = InitialData::new(&op, vec![1.0, 0.5].into(), vec![0.2, -1.0].into(), 1.0).unwrap();
        let tr = solve_hyperbolic(&op, &data, 1e-2, &[0.0, 1.0], &HyperbolicOptions::default()).unwrap();
        assert_eq!(tr.u[0], data.u0);
        assert_eq!(tr.du[0], data.u1);
        assert_eq!(tr.c_integral[0], 0.0);
    }

    #[test]
    fn kernel_mode_follows_the_corrector() {
        let eps = 1e-2;
        let op = SpectralOperator::new(vec![0.0, 1.0]).unwrap();
        let data = InitialData::new(&op, vec![1.0, 1.0].into(), vec![1.0, 0.0].into(), 1.0).unwrap();
        let mut times: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
        times.extend([1e-3, 5e-3, 2e-2]);
        times.sort_by(f64::total_cmp);
        let tr = solve_hyperbolic(&op, &data, eps, &times, &HyperbolicOptions::default()).unwrap();
        for (t, u) in times.iter().zip(&tr.u) {
            let exact = 1.0 + eps * (-(-t / eps).exp_m1());
            assert!((u.0[0] - exact).abs() <= 1e-8, "t = {t}");
        }
    }

    #[test]
    fn layer_is_resolved_and_energy_dissipates() {
        let eps = 1e-4;
        let op = SpectralOperator::new(vec![1.0, 4.0]).unwrap();
        let data = InitialData::new(&op, vec![1.0, 1.0].into(), vec![0.0, 1.0].into(), 1.0).unwrap();
        let times = grid(eps, 1e3);
        let tr = solve_hyperbolic(&op, &data, eps, &times, &HyperbolicOptions::default()).unwrap();
        assert!(tr.stats.steps_until(5.0 * eps) >= 20);
        let tol = 1e-9 * tr.energy[0];
        assert!(tr.energy.windows(2).all(|w| w[1] <= w[0] + tol));
        assert!(tr.c_integral.windows(2).all(|w| w[1] >= w[0]));
        // steps grow far beyond ε after the layer
        assert!(tr.stats.accepted < 5_000, "{} steps", tr.stats.accepted);
    }

    #[test]
    fn energy_identity_against_finite_differences() {
        let eps = 0.05;
        let op = SpectralOperator::new(vec![1.0, 2.0]).unwrap();
        let data = InitialData::new(&op, vec![1.0, -0.5].into(), vec![1.0, 0.3].into(), 1.0).unwrap();
        let t0 = 0.3;
        let errs: Vec<f64> = [2e-3, 1e-3]
            .iter()
            .map(|h| {
                let times = [0.0, t0 - h, t0, t0 + h];
                let tr = solve_hyperbolic(&op, &data, eps, &times, &HyperbolicOptions::with_rel_tol(1e-12)).unwrap();
                let fd = (tr.energy[3] - tr.energy[1]) / (2.0 * h);
                let exact = -2.0 * tr.velocity_norm_sq(0.0, 2);
                assert!((fd - exact).abs() <= 1e-4 * exact.abs(), "{fd} vs {exact}");
                (fd - exact).abs()
            })
            .collect();
        // second-order convergence of the difference quotient
        let ratio = errs[0] / errs[1];
        assert!(ratio > 3.5 && ratio < 4.5, "{errs:?}");
    }

    #[test]
    fn rejects_large_epsilon_and_bad_grids() {
        let op = SpectralOperator::new(vec![1.0]).unwrap();
        let data = InitialData::new(&op, vec![1.0].into(), vec![0.0].into(), 1.0).unwrap();
        let opts = HyperbolicOptions::default();
        assert!(matches!(solve_hyperbolic(&op, &data, 0.9, &[0.0, 1.0], &opts), Err(Error::InvalidArgument(_))));
        assert!(solve_hyperbolic(&op, &data, 0.0, &[0.0, 1.0], &opts).is_err());
        assert!(solve_hyperbolic(&op, &data, 0.1, &[0.5, 1.0], &opts).is_err());
    }

    #[test]
    fn stalled_decay_is_reported_as_blow_up() {
        let op = SpectralOperator::new(vec![1.0]).unwrap();
        let data = InitialData::new(&op, vec![1.0].into(), vec![0.0].into(), 1.0).unwrap();
        let opts = HyperbolicOptions { blowup_horizon: 0.0, ..HyperbolicOptions::default() };
        // at t = 0 nothing has decayed yet
        let err = solve_hyperbolic(&op, &data, 0.1, &[0.0, 1.0], &opts).unwrap_err();
        assert!(matches!(err, Error::BlowUp { .. }));
    }

    #[test]
    fn components_of_orthogonal_eigenvector_data() {
        let eps = 1e-2;
        let op = SpectralOperator::new(vec![1.0, 2.0]).unwrap();
        let data = InitialData::new(&op, vec![0.0, 1.5].into(), vec![0.8, 0.0].into(), 1.0).unwrap();
        let profile = op.classify(&data).unwrap();
        let times = grid(eps, 50.0);
        let tr = solve_hyperbolic(&op, &data, eps, &times, &HyperbolicOptions::default()).unwrap();
        let comp = components(&tr, &profile).unwrap();
        let nu = comp.nu().unwrap();
        assert_eq!(comp.mu.value[0], 1.5);
        assert_eq!(nu.value[0], 0.0);
        assert!((nu.derivative[0] - 0.8).abs() < 1e-15);
        let scale = nu.derivative.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for r in nu.residual(eps, &tr.c) {
            assert!(r.abs() <= 100.0 * 1e-10 * scale);
        }
    }

    #[test]
    fn component_second_derivative_matches_finite_differences() {
        let eps = 0.05;
        let op = SpectralOperator::new(vec![1.0, 2.0]).unwrap();
        let data = InitialData::new(&op, vec![0.0, 1.0].into(), vec![1.0, 0.0].into(), 1.0).unwrap();
        let profile = op.classify(&data).unwrap();
        let (t0, h) = (0.2, 1e-3);
        let tr = solve_hyperbolic(&op, &data, eps, &[0.0, t0 - h, t0, t0 + h], &HyperbolicOptions::with_rel_tol(1e-12))
            .unwrap();
        let nu = components(&tr, &profile).unwrap().nu().unwrap().clone();
        let fd = (nu.value[3] - 2.0 * nu.value[2] + nu.value[1]) / (h * h);
        assert!((fd - nu.second[2]).abs() <= 1e-4 * nu.second[2].abs().max(1.0), "{fd} vs {}", nu.second[2]);
        let residual = eps * fd + nu.derivative[2] + profile.nu.unwrap() * tr.c[2] * nu.value[2];
        assert!(residual.abs() < 1e-5);
    }

    #[test]
    fn single_mode_component_carries_the_whole_norm() {
        let eps = 1e-2;
        let op = SpectralOperator::new(vec![3.0]).unwrap();
        let data = InitialData::new(&op, vec![0.5].into(), vec![0.0].into(), 1.0).unwrap();
        let profile = op.classify(&data).unwrap();
        let tr = solve_hyperbolic(&op, &data, eps, &grid(eps, 10.0), &HyperbolicOptions::default()).unwrap();
        let comp = components(&tr, &profile).unwrap();
        assert!(matches!(comp.nu(), Err(Error::MissingV1)));
        for i in 0..tr.len() {
            let lhs = comp.mu.value[i].powi(2) * 3.0;
            assert!((lhs - tr.norm_sq(0.5, i)).abs() <= 1e-14 * lhs.max(1e-300));
        }
    }

    #[test]
    fn c_derivative_closed_form_matches_differences() {
        let eps = 0.1;
        let op = SpectralOperator::new(vec![1.0, 5.0]).unwrap();
        let data = InitialData::new(&op, vec![1.0, 0.3].into(), vec![0.5, 0.5].into(), 2.0).unwrap();
        let (t0, h) = (1.0, 1e-4);
        let tr = solve_hyperbolic(&op, &data, eps, &[0.0, t0 - h, t0, t0 + h], &HyperbolicOptions::with_rel_tol(1e-12))
            .unwrap();
        let fd = (tr.c[3] - tr.c[1]) / (2.0 * h);
        assert!((fd - tr.c_derivative(2)).abs() <= 1e-6 * fd.abs());
    }
}
