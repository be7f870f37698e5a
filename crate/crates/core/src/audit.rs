//! Empirical constants of the decay, growth and decay-error estimates.
//!
//! Each audit turns trajectories into normalized quantities (the quantity
//! divided by its claimed rate) and records their sup or inf over the sample
//! grid. A single run can only show that a constant is finite (or positive for
//! lower bounds); whether it is genuinely a constant is judged across an ε
//! ladder by [`ladder_stability`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_rate, improper_integral, spread, RateFit};
use crate::grid::probe_time;
use crate::hyperbolic::{components, HyperbolicTrajectory};
use crate::numeric::cumulative_trapezoid;
use crate::parabolic::ParabolicTrajectory;
use crate::remainder::{check_pair, monotonicity_samples, RemainderSeries};
use crate::spectral::{weighted_norm_sq_raw, MuNuProfile, SpectralVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// Sup of the normalized quantity must be finite.
    Upper,
    /// Inf of the normalized quantity must exceed the floor.
    Lower,
    /// Both of the above.
    TwoSided,
    /// A pointwise inequality that must hold at every sample.
    NoViolation,
}

/// One audited inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    /// The normalized quantity, written out.
    pub name: String,
    /// Stable identifier of the estimate being audited.
    pub claim: String,
    pub kind: BoundKind,
    /// Sup for upper and two-sided bounds, inf for lower bounds, worst
    /// violation for pointwise inequalities.
    pub constant: f64,
    /// Inf of a two-sided bound.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lower: Option<f64>,
    pub window: [f64; 2],
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFit {
    pub quantity: String,
    #[serde(flatten)]
    pub fit: RateFit,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub epsilon: Option<f64>,
    pub gamma: Option<f64>,
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub delta: Option<f64>,
    pub eigenvalues: Vec<f64>,
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub title: String,
    pub meta: ReportMeta,
    pub entries: Vec<AuditEntry>,
    pub fits: Vec<NamedFit>,
}

impl AuditReport {
    pub fn new(title: impl Into<String>) -> Self {
        Self { title: title.into(), ..Self::default() }
    }

    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.verdict.passed())
    }

    pub fn entry(&self, claim: &str) -> Option<&AuditEntry> {
        self.entries.iter().find(|e| e.claim == claim)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AuditEntry> {
        self.entries.iter().filter(|e| !e.verdict.passed())
    }

    /// Appends the entries and fits of `other`.
    pub fn absorb(&mut self, other: AuditReport) {
        self.entries.extend(other.entries);
        self.fits.extend(other.fits);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditOptions {
    /// Lower bounds pass only when their inf exceeds this.
    pub lower_floor: f64,
    /// Largest ratio between ladder constants still counted as stable.
    pub stability_factor: f64,
    /// Velocity decay is audited from `layer_multiple · ε` on.
    pub layer_multiple: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self { lower_floor: 1e-8, stability_factor: 3.0, layer_multiple: 10.0 }
    }
}

/// `[max(10, 100ε), min(T, ε^{-δ}/2)]`: after the layer, before the crossover.
pub fn fitting_window(epsilon: f64, delta: f64, horizon: f64) -> [f64; 2] {
    [10f64.max(100.0 * epsilon), horizon.min(0.5 * probe_time(epsilon, delta))]
}

struct Series<'a> {
    times: &'a [f64],
}

impl Series<'_> {
    fn window_of(&self, keep: &[bool]) -> [f64; 2] {
        let mut it = self.times.iter().zip(keep).filter(|(_, k)| **k).map(|(t, _)| *t);
        let lo = it.next().unwrap_or(f64::NAN);
        let hi = it.next_back().unwrap_or(lo);
        [lo, hi]
    }

    fn extremes(&self, values: &[f64], keep: &[bool]) -> (f64, f64) {
        values.iter().zip(keep).filter(|(_, k)| **k).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (v, _)| {
            // a NaN must not be swallowed by min/max
            if v.is_nan() {
                (f64::NAN, f64::NAN)
            } else {
                (lo.min(*v), hi.max(*v))
            }
        })
    }

    fn upper(&self, name: &str, id: &str, values: &[f64], keep: &[bool]) -> AuditEntry {
        let (_, hi) = self.extremes(values, keep);
        AuditEntry {
            name: name.into(),
            claim: id.into(),
            kind: BoundKind::Upper,
            constant: hi,
            lower: None,
            window: self.window_of(keep),
            verdict: Verdict::from_bool(hi.is_finite()),
            detail: None,
        }
    }

    fn lower(&self, name: &str, id: &str, values: &[f64], keep: &[bool], floor: f64) -> AuditEntry {
        let (lo, _) = self.extremes(values, keep);
        AuditEntry {
            name: name.into(),
            claim: id.into(),
            kind: BoundKind::Lower,
            constant: lo,
            lower: None,
            window: self.window_of(keep),
            verdict: Verdict::from_bool(lo > floor),
            detail: None,
        }
    }

    fn two_sided(&self, name: &str, id: &str, values: &[f64], keep: &[bool], floor: f64) -> AuditEntry {
        let (lo, hi) = self.extremes(values, keep);
        AuditEntry {
            name: name.into(),
            claim: id.into(),
            kind: BoundKind::TwoSided,
            constant: hi,
            lower: Some(lo),
            window: self.window_of(keep),
            verdict: Verdict::from_bool(hi.is_finite() && lo > floor),
            detail: None,
        }
    }
}

/// `sup_{t>0} ∫₀ᵗ f / norm(t)`.
fn running_integral_sup(times: &[f64], integrand: &[f64], norm: impl Fn(f64) -> f64) -> f64 {
    cumulative_trapezoid(times, integrand).iter().zip(times).skip(1).map(|(i, t)| i / norm(*t)).fold(0.0, f64::max)
}

fn every(times: &[f64]) -> Vec<bool> {
    vec![true; times.len()]
}

fn meta_for(profile: Option<&MuNuProfile>, epsilon: Option<f64>, gamma: f64, eig: &[f64]) -> ReportMeta {
    ReportMeta {
        epsilon,
        gamma: Some(gamma),
        mu: profile.map(|p| p.mu),
        nu: profile.and_then(|p| p.nu),
        delta: profile.map(|p| p.effective_delta()),
        eigenvalues: eig.to_vec(),
        tolerances: BTreeMap::new(),
    }
}

/// Forcing term `g_ε = -(c_ε - c) A u - ε u''` of the equation for `ρ_ε`.
#[derive(Debug, Clone)]
pub struct GSeries {
    pub epsilon: f64,
    pub times: Vec<f64>,
    pub g: Vec<SpectralVector>,
    /// `|g_ε|²`
    pub g_sq: Vec<f64>,
    /// `|A^{1/2}g_ε|²`
    pub g_half_sq: Vec<f64>,
}

pub fn compute_g(par: &ParabolicTrajectory, hyp: &HyperbolicTrajectory) -> Result<GSeries> {
    check_pair(hyp, par)?;
    let eig = par.op.eigenvalues();
    let eps = hyp.epsilon;
    let mut out = GSeries {
        epsilon: eps,
        times: par.times.clone(),
        g: Vec::with_capacity(par.len()),
        g_sq: Vec::with_capacity(par.len()),
        g_half_sq: Vec::with_capacity(par.len()),
    };
    for i in 0..par.len() {
        let (_, ddu) = par.derivatives(i);
        let dc = hyp.c[i] - par.c[i];
        let g = SpectralVector(
            eig.iter().zip(par.u[i].iter().zip(ddu.iter())).map(|(l, (u, a))| -dc * l * u - eps * a).collect(),
        );
        out.g_sq.push(weighted_norm_sq_raw(eig, 0.0, &g.0));
        out.g_half_sq.push(weighted_norm_sq_raw(eig, 0.5, &g.0));
        out.g.push(g);
    }
    Ok(out)
}

/// Decay estimates for both problems, the basic error estimates and the
/// pointwise monotonicity inequality. The integral estimates use the decay
/// exponent stored in `rem` (1 when absent).
pub fn audit_decay(
    par: &ParabolicTrajectory,
    hyp: &HyperbolicTrajectory,
    rem: &RemainderSeries,
    opts: &AuditOptions,
) -> Result<AuditReport> {
    check_pair(hyp, par)?;
    if rem.times != par.times {
        return Err(Error::GridMismatch);
    }
    let t = &par.times;
    let s = Series { times: t };
    let all = every(t);
    let g = par.gamma;
    let eps = hyp.epsilon;
    let delta = rem.delta.unwrap_or(1.0);
    let w = |p: f64| -> Vec<f64> { t.iter().map(|t| (1.0 + t).powf(p)).collect() };
    let (w_inv_g, w1) = (w(1.0 / g), w(1.0));
    let times_w =
        |weights: &[f64], f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..t.len()).map(|i| weights[i] * f(i)).collect() };

    let mut report = AuditReport::new("decay estimates");
    report.meta = meta_for(None, Some(eps), g, par.op.eigenvalues());
    report.meta.delta = Some(delta);

    // parabolic problem
    report.entries.push(s.upper(
        "(1+t)^{1/γ} |A^{1/2}u|²",
        "parabolic-half-norm-decay",
        &times_w(&w_inv_g, &|i| par.norm_sq(0.5, i)),
        &all,
    ));
    report.entries.push(s.upper(
        "(1+t)^{1/γ} |Au|²",
        "parabolic-norm-decay",
        &times_w(&w_inv_g, &|i| par.norm_sq(1.0, i)),
        &all,
    ));
    report.entries.push(s.upper("(1+t) c", "parabolic-coefficient-decay", &times_w(&w1, &|i| par.c[i]), &all));
    report.entries.push(s.upper(
        "(1+t)^{1/γ} |A^{3/2}u|²",
        "parabolic-three-halves-decay",
        &times_w(&w_inv_g, &|i| par.norm_sq(1.5, i)),
        &all,
    ));
    let ddu: Vec<SpectralVector> = (0..t.len()).map(|i| par.derivatives(i).1).collect();
    let eig = par.op.eigenvalues();
    let acc = |alpha: f64| -> Vec<f64> {
        let wt = w(1.0 + 2.0 * delta / g);
        (0..t.len()).map(|i| wt[i] * weighted_norm_sq_raw(eig, alpha, &ddu[i].0)).collect()
    };
    let norm = |t: f64| (1.0 + t).powf(delta / g);
    for (alpha, name, id) in [
        (0.0, "sup_t ∫₀ᵗ (1+s)^{1+2δ/γ} |u''|² ds / (1+t)^{δ/γ}", "parabolic-acceleration-integral"),
        (0.5, "sup_t ∫₀ᵗ (1+s)^{1+2δ/γ} |A^{1/2}u''|² ds / (1+t)^{δ/γ}", "parabolic-half-acceleration-integral"),
    ] {
        let sup = running_integral_sup(t, &acc(alpha), norm);
        report.entries.push(AuditEntry {
            name: name.into(),
            claim: id.into(),
            kind: BoundKind::Upper,
            constant: sup,
            lower: None,
            window: [t[0], *t.last().unwrap()],
            verdict: Verdict::from_bool(sup.is_finite()),
            detail: Some(format!("delta = {delta}")),
        });
    }
    let w_acc = w(4.0 + 1.0 / g);
    report.entries.push(s.upper(
        "(1+t)^{4+1/γ} |u''|²",
        "parabolic-acceleration-decay",
        &times_w(&w_acc, &|i| weighted_norm_sq_raw(eig, 0.0, &ddu[i].0)),
        &all,
    ));

    // damped problem
    report.entries.push(s.two_sided(
        "(1+t)^{1/γ} |A^{1/2}u_ε|²",
        "hyperbolic-half-norm-two-sided",
        &times_w(&w_inv_g, &|i| hyp.norm_sq(0.5, i)),
        &all,
        opts.lower_floor,
    ));
    report.entries.push(s.upper(
        "(1+t)^{1/γ} |Au_ε|²",
        "hyperbolic-norm-decay",
        &times_w(&w_inv_g, &|i| hyp.norm_sq(1.0, i)),
        &all,
    ));
    let after_layer: Vec<bool> = t.iter().map(|t| *t >= opts.layer_multiple * eps).collect();
    report.entries.push(s.upper(
        "(1+t)^{2+1/γ} |u_ε'|²",
        "hyperbolic-velocity-decay",
        &times_w(&w(2.0 + 1.0 / g), &|i| hyp.velocity_norm_sq(0.0, i)),
        &after_layer,
    ));
    report.entries.push(s.two_sided(
        "(1+t) c_ε",
        "hyperbolic-coefficient-two-sided",
        &times_w(&w1, &|i| hyp.c[i]),
        &all,
        opts.lower_floor,
    ));
    report.entries.push(s.upper(
        "(1+t) |c_ε'| / c_ε",
        "hyperbolic-log-derivative",
        &times_w(&w1, &|i| hyp.c_derivative(i).abs() / hyp.c[i]),
        &all,
    ));

    // basic error estimates
    let eps2 = eps * eps;
    report.entries.push(s.upper(
        "|ρ|² / ε²",
        "rho-uniform-bound",
        &times_w(&vec![1.0 / eps2; t.len()], &|i| rem.rho_sq[i]),
        &all,
    ));
    let integrand: Vec<f64> = (0..t.len()).map(|i| w1[i] * rem.r_prime_sq[i] / eps2).collect();
    let integral = improper_integral(t, &integrand);
    report.entries.push(AuditEntry {
        name: "∫₀^∞ (1+t) |r'|² dt / ε²".into(),
        claim: "r-prime-dissipation-integral".into(),
        kind: BoundKind::Upper,
        constant: integral.total(),
        lower: None,
        window: [t[0], *t.last().unwrap()],
        verdict: Verdict::from_bool(integral.total().is_finite()),
        detail: Some(format!(
            "truncated = {:e}, tail = {:e}, tail exponent = {}",
            integral.truncated,
            integral.tail,
            integral.exponent.map_or("n/a".into(), |p| format!("{p:.4}"))
        )),
    });

    // monotonicity
    let mono = monotonicity_samples(hyp, par)?;
    let violations = mono.iter().filter(|m| !m.holds()).count();
    let worst = mono.iter().map(|m| m.violation()).fold(0.0, f64::max);
    report.entries.push(AuditEntry {
        name: "⟨c_ε Au_ε - c Au, ρ⟩ - ½(c_ε + c)|A^{1/2}ρ|² ≥ 0".into(),
        claim: "monotonicity".into(),
        kind: BoundKind::NoViolation,
        constant: worst,
        lower: None,
        window: [t[0], *t.last().unwrap()],
        verdict: Verdict::from_bool(violations == 0),
        detail: Some(format!("violations = {violations} of {}", mono.len())),
    });

    let horizon = *t.last().unwrap();
    let late = [10f64.max(100.0 * eps), horizon];
    let half_u: Vec<f64> = (0..t.len()).map(|i| par.norm_sq(0.5, i)).collect();
    let half_ue: Vec<f64> = (0..t.len()).map(|i| hyp.norm_sq(0.5, i)).collect();
    for (q, v) in [("norm_half_u", &half_u), ("norm_half_u_eps", &half_ue)] {
        if let Ok(fit) = fit_rate(t, v, late) {
            report.fits.push(NamedFit { quantity: q.into(), fit });
        }
    }
    Ok(report)
}

fn has_kernel_component(profile: &MuNuProfile, eig: &[f64]) -> bool {
    let u0 = profile.v0.add(&profile.w0);
    let u1 = profile.v1.add(&profile.w1);
    eig.iter().enumerate().any(|(k, l)| *l == 0.0 && (u0.0[k] != 0.0 || u1.0[k] != 0.0))
}

/// Linear growth of `e^{2γμC}`, `e^{2γνC_ε}`, `e^{2γμC_ε}` and the bounds on
/// the solution and its components in terms of `C_ε`. Here `ν` stands for
/// `min(ν, μ)`; the bound on the `ν`-component uses its own frequency.
pub fn audit_growth(
    par: &ParabolicTrajectory,
    hyp: &HyperbolicTrajectory,
    profile: &MuNuProfile,
    opts: &AuditOptions,
) -> Result<AuditReport> {
    check_pair(hyp, par)?;
    if has_kernel_component(profile, par.op.eigenvalues()) {
        return Err(Error::InvalidData("growth estimates need data without kernel components".into()));
    }
    let t = &par.times;
    let s = Series { times: t };
    let all = every(t);
    let g = par.gamma;
    let (mu, nu) = (profile.mu, profile.nu_or_mu());
    let per_time = |x: f64, t: f64| x / (1.0 + t);
    let exp_over = |rate: f64, big_c: &[f64]| -> Vec<f64> {
        t.iter().zip(big_c).map(|(t, c)| per_time((rate * c).exp(), *t)).collect()
    };

    let mut report = AuditReport::new("growth estimates");
    report.meta = meta_for(Some(profile), Some(hyp.epsilon), g, par.op.eigenvalues());

    let par_mu = exp_over(2.0 * mu * g, &par.c_integral);
    report.entries.push(s.upper("e^{2μγC} / (1+t)", "parabolic-primitive-growth-upper", &par_mu, &all));
    report.entries.push(s.upper(
        "e^{2νγC_ε} / (1+t)",
        "hyperbolic-primitive-growth-upper",
        &exp_over(2.0 * nu * g, &hyp.c_integral),
        &all,
    ));
    report.entries.push(s.lower(
        "e^{2μγC} / (1+t)",
        "parabolic-primitive-growth-lower",
        &par_mu,
        &all,
        opts.lower_floor,
    ));
    report.entries.push(s.lower(
        "e^{2μγC_ε} / (1+t)",
        "hyperbolic-primitive-growth-lower",
        &exp_over(2.0 * mu * g, &hyp.c_integral),
        &all,
        opts.lower_floor,
    ));

    let weight = |rate: f64| -> Vec<f64> { hyp.c_integral.iter().map(|c| (2.0 * rate * c).exp()).collect() };
    let w_nu = weight(nu);
    report.entries.push(s.upper(
        "|A^{1/2}u_ε|² e^{2νC_ε}",
        "hyperbolic-half-norm-exponential",
        &(0..t.len()).map(|i| hyp.norm_sq(0.5, i) * w_nu[i]).collect::<Vec<_>>(),
        &all,
    ));
    let comp = components(hyp, profile)?;
    let track_bound = |track: &crate::hyperbolic::ComponentTrack| -> Vec<f64> {
        let wt = weight(track.frequency);
        (0..t.len()).map(|i| (track.value[i].powi(2) + (track.derivative[i] / hyp.c[i]).powi(2)) * wt[i]).collect()
    };
    if let Ok(track) = comp.nu() {
        report.entries.push(s.upper(
            "(|u_{ε,ν}|² + |u_{ε,ν}'|²/c_ε²) e^{2νC_ε}",
            "nu-component-exponential",
            &track_bound(track),
            &all,
        ));
    }
    report.entries.push(s.upper(
        "(|u_{ε,μ}|² + |u_{ε,μ}'|²/c_ε²) e^{2μC_ε}",
        "mu-component-exponential",
        &track_bound(&comp.mu),
        &all,
    ));
    Ok(report)
}

fn require_deteriorated(profile: &MuNuProfile) -> Result<f64> {
    profile.delta.ok_or_else(|| {
        Error::WrongRegime(format!(
            "decay-error estimates need ν ≤ μ, data is in the {} regime",
            profile.regime.as_str()
        ))
    })
}

/// The decay-error estimates with `δ = ν/μ`, plus (when `g` is given) the
/// bounds on the forcing term that feed the linear argument.
pub fn audit_decay_error(
    rem: &RemainderSeries,
    g: Option<&GSeries>,
    profile: &MuNuProfile,
    opts: &AuditOptions,
) -> Result<AuditReport> {
    let delta = require_deteriorated(profile)?;
    if let Some(g) = g {
        if g.times != rem.times {
            return Err(Error::GridMismatch);
        }
    }
    let t = &rem.times;
    let s = Series { times: t };
    let all = every(t);
    let (gamma, eps) = (rem.gamma, rem.epsilon);
    let eps2 = eps * eps;
    let k = delta / gamma;
    let norm = |t: f64| eps2 * (1.0 + t).powf(k);

    let mut report = AuditReport::new("decay-error estimates");
    report.meta = meta_for(Some(profile), Some(eps), gamma, &[]);
    report.meta.delta = Some(delta);

    let pointwise = |f: &dyn Fn(usize, f64) -> f64| -> Vec<f64> {
        t.iter().enumerate().map(|(i, t)| (1.0 + t).powf(k) * f(i, *t) / eps2).collect()
    };
    report.entries.push(s.upper(
        "(1+t)^{δ/γ} [|ρ|² + |A^{1/2}ρ|² + ε(1+t)|r'|²] / ε²",
        "decay-error-low-order",
        &pointwise(&|i, t| rem.rho_sq[i] + rem.rho_half_sq[i] + eps * (1.0 + t) * rem.r_prime_sq[i]),
        &all,
    ));
    let integral = |f: &dyn Fn(usize, f64) -> f64| -> f64 {
        let integrand: Vec<f64> = t.iter().enumerate().map(|(i, t)| (1.0 + t).powf(2.0 * k) * f(i, *t)).collect();
        running_integral_sup(t, &integrand, norm)
    };
    let window = [t[0], *t.last().unwrap()];
    let integral_entry = |name: &str, id: &str, sup: f64| AuditEntry {
        name: name.into(),
        claim: id.into(),
        kind: BoundKind::Upper,
        constant: sup,
        lower: None,
        window,
        verdict: Verdict::from_bool(sup.is_finite()),
        detail: None,
    };
    report.entries.push(integral_entry(
        "sup_t ∫₀ᵗ (1+s)^{2δ/γ} [(1+s)|r'|² + |A^{1/2}ρ|²/(1+s)] ds / (ε²(1+t)^{δ/γ})",
        "decay-error-low-order-integral",
        integral(&|i, t| (1.0 + t) * rem.r_prime_sq[i] + rem.rho_half_sq[i] / (1.0 + t)),
    ));
    report.entries.push(s.upper(
        "(1+t)^{δ/γ} [|Aρ|² + (1+t)²|r'|²] / ε²",
        "decay-error-high-order",
        &pointwise(&|i, t| rem.rho_one_sq[i] + (1.0 + t).powi(2) * rem.r_prime_sq[i]),
        &all,
    ));
    report.entries.push(integral_entry(
        "sup_t ∫₀ᵗ (1+s)^{2δ/γ} [(1+s)|A^{1/2}r'|² + |Aρ|²/(1+s)] ds / (ε²(1+t)^{δ/γ})",
        "decay-error-high-order-integral",
        integral(&|i, t| (1.0 + t) * rem.r_prime_half_sq[i] + rem.rho_one_sq[i] / (1.0 + t)),
    ));
    report.entries.push(s.upper("(1+t)^{δ/γ} |ρ|² / ε²", "rho-decay-error", &pointwise(&|i, _| rem.rho_sq[i]), &all));

    if let Some(g) = g {
        let forcing = |sq: &[f64]| -> f64 {
            let integrand: Vec<f64> = t.iter().zip(sq).map(|(t, v)| (1.0 + t).powf(1.0 + 2.0 * k) * v).collect();
            running_integral_sup(t, &integrand, norm)
        };
        report.entries.push(integral_entry(
            "sup_t ∫₀ᵗ (1+s)^{1+2δ/γ} |g_ε|² ds / (ε²(1+t)^{δ/γ})",
            "forcing-integral",
            forcing(&g.g_sq),
        ));
        report.entries.push(integral_entry(
            "sup_t ∫₀ᵗ (1+s)^{1+2δ/γ} |A^{1/2}g_ε|² ds / (ε²(1+t)^{δ/γ})",
            "forcing-half-integral",
            forcing(&g.g_half_sq),
        ));
        report.entries.push(s.upper(
            "(1+t)^{2+δ/γ} |g_ε|² / ε²",
            "forcing-pointwise",
            &t.iter().zip(&g.g_sq).map(|(t, v)| (1.0 + t).powf(2.0 + k) * v / eps2).collect::<Vec<_>>(),
            &all,
        ));
    }

    let horizon = *t.last().unwrap();
    if let Ok(fit) = fit_rate(t, &rem.rho_sq, fitting_window(eps, delta, horizon)) {
        report.fits.push(NamedFit { quantity: "norm2_rho".into(), fit });
    }
    let _ = opts;
    Ok(report)
}

/// `(1+t)^{δ/γ}|ρ(t)|²` at every sample.
pub fn weighted_rho(rem: &RemainderSeries, delta: f64) -> Vec<f64> {
    rem.times.iter().zip(&rem.rho_sq).map(|(t, r)| (1.0 + t).powf(delta / rem.gamma) * r).collect()
}

fn probe_index(times: &[f64], probe: f64) -> Result<usize> {
    times.iter().position(|t| (t - probe).abs() <= 1e-12 * probe).ok_or(Error::MissingSample(probe))
}

/// `max_t (1+t)^{δ/γ}|ρ(t)|²` over a grid that must contain `t = ε^{-δ}`.
pub fn optimality_statistic(rem: &RemainderSeries, profile: &MuNuProfile) -> Result<f64> {
    let delta = require_deteriorated(profile)?;
    probe_index(&rem.times, probe_time(rem.epsilon, delta))?;
    Ok(weighted_rho(rem, delta).into_iter().fold(0.0, f64::max))
}

/// `sup_t (1+t)^{δ'/γ}|ρ|²/ε²` with the improved exponent `δ'`.
pub fn improved_statistic(rem: &RemainderSeries, profile: &MuNuProfile) -> Result<f64> {
    let delta = profile
        .delta_improved
        .ok_or_else(|| Error::WrongRegime(format!("data is in the {} regime", profile.regime.as_str())))?;
    let eps2 = rem.epsilon * rem.epsilon;
    Ok(weighted_rho(rem, delta).into_iter().fold(0.0, f64::max) / eps2)
}

/// Quantities along the lower-bound argument for orthogonal eigenvector data,
/// evaluated at the probe time `T = ε^{-δ}` with `ψ_ε = e^{-νC_ε}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalityProbe {
    pub probe_time: f64,
    /// `sup_t (1+t)^{δ/γ} u_{ε,ν}² / ε²`.
    pub component_sup: f64,
    /// `sup_t |u_{ε,ν}| e^{νC_ε} / ε`.
    pub upper_ratio: f64,
    /// `u_{ε,ν}(T) / (ε ψ_ε(T))`.
    pub braces: f64,
    /// `|u1| / 2`, the floor for `braces` once ε is small.
    pub half_u1: f64,
    /// `ψ_ε(T) / ε^{δ²/(2γ)}`.
    pub psi_scaled: f64,
}

pub fn optimality_probe(hyp: &HyperbolicTrajectory, profile: &MuNuProfile) -> Result<OptimalityProbe> {
    let delta = require_deteriorated(profile)?;
    let nu = profile.nu.ok_or(Error::MissingV1)?;
    let comp = components(hyp, profile)?;
    let track = comp.nu()?;
    let (eps, gamma) = (hyp.epsilon, hyp.gamma);
    let probe = probe_time(eps, delta);
    let i = probe_index(&hyp.times, probe)?;
    let psi = (-nu * hyp.c_integral[i]).exp();
    let component_sup = hyp
        .times
        .iter()
        .zip(&track.value)
        .map(|(t, v)| (1.0 + t).powf(delta / gamma) * v * v / (eps * eps))
        .fold(0.0, f64::max);
    let upper_ratio =
        track.value.iter().zip(&hyp.c_integral).map(|(v, c)| v.abs() * (nu * c).exp() / eps).fold(0.0, f64::max);
    Ok(OptimalityProbe {
        probe_time: probe,
        component_sup,
        upper_ratio,
        braces: track.value[i] / (eps * psi),
        half_u1: profile.v1.norm() / 2.0,
        psi_scaled: psi / eps.powf(delta * delta / (2.0 * gamma)),
    })
}

/// Spread of one entry's constant across a ladder of reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRecord {
    pub claim: String,
    pub name: String,
    pub constants: Vec<f64>,
    pub spread: f64,
    pub verdict: Verdict,
}

/// Compares every bound entry that appears in all reports. Pointwise
/// inequalities are skipped: their constant is a violation size, not a rate
/// constant. Lower constants of two-sided bounds are compared separately.
pub fn ladder_stability(reports: &[AuditReport], factor: f64) -> Vec<StabilityRecord> {
    let Some(first) = reports.first() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for entry in first.entries.iter().filter(|e| e.kind != BoundKind::NoViolation) {
        let found: Option<Vec<&AuditEntry>> = reports.iter().map(|r| r.entry(&entry.claim)).collect();
        let Some(found) = found else { continue };
        let mut push = |suffix: &str, constants: Vec<f64>| {
            let spread = if constants.iter().all(|c| *c == 0.0) { 1.0 } else { spread(&constants) };
            out.push(StabilityRecord {
                claim: format!("{}{suffix}", entry.claim),
                name: entry.name.clone(),
                constants,
                spread,
                verdict: Verdict::from_bool(spread <= factor),
            });
        };
        push("", found.iter().map(|e| e.constant).collect());
        if entry.kind == BoundKind::TwoSided {
            push(":lower", found.iter().map(|e| e.lower.unwrap_or(f64::NAN)).collect());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::run_grid;
    use crate::hyperbolic::{solve_hyperbolic, HyperbolicOptions};
    use crate::parabolic::solve_profile;
    use crate::remainder::build_remainders;
    use crate::spectral::{InitialData, SpectralOperator};

    struct Run {
        par: ParabolicTrajectory,
        hyp: HyperbolicTrajectory,
        rem: RemainderSeries,
        profile: MuNuProfile,
    }

    fn run(eig: Vec<f64>, u0: Vec<f64>, u1: Vec<f64>, eps: f64, horizon: f64) -> Run {
        let op = SpectralOperator::new(eig).unwrap();
        let data = InitialData::new(&op, u0.into(), u1.into(), 1.0).unwrap();
        let profile = op.classify(&data).unwrap();
        let delta = profile.effective_delta();
        let times = run_grid(eps, horizon, 12, profile.delta).unwrap();
        let par = solve_profile(&op, &data, &times, 1e-11).unwrap();
        let hyp = solve_hyperbolic(&op, &data, eps, &times, &HyperbolicOptions::default()).unwrap();
        let rem = build_remainders(&hyp, &par, &op.theta0(&data).unwrap()).unwrap().with_delta(delta);
        Run { par, hyp, rem, profile }
    }

    #[test]
    fn single_mode_coefficient_entry_matches_closed_form() {
        let r = run(vec![1.0], vec![1.0], vec![0.0], 1e-2, 1e3);
        let rep = audit_decay(&r.par, &r.hyp, &r.rem, &AuditOptions::default()).unwrap();
        // (1+t)/(1+2t) is largest at t = 0
        let e = rep.entry("parabolic-coefficient-decay").unwrap();
        assert!((e.constant - 1.0).abs() < 1e-12);
        assert!(rep.entry("monotonicity").unwrap().verdict.passed());
        assert!(rep.passed(), "{:?}", rep.failures().collect::<Vec<_>>());
        let v = rep.entry("hyperbolic-velocity-decay").unwrap();
        assert!(v.window[0] >= 10.0 * 1e-2);
    }

    #[test]
    fn single_mode_growth_band() {
        let r = run(vec![1.0], vec![1.0], vec![0.0], 1e-2, 1e3);
        let rep = audit_growth(&r.par, &r.hyp, &r.profile, &AuditOptions::default()).unwrap();
        // e^{2C} = 1 + 2t, so e^{2C}/(1+t) ∈ [1, 2)
        let up = rep.entry("parabolic-primitive-growth-upper").unwrap();
        let lo = rep.entry("parabolic-primitive-growth-lower").unwrap();
        assert!(up.constant < 2.0 && up.constant > 1.99);
        assert!((lo.constant - 1.0).abs() < 1e-9);
        assert!(rep.passed());
    }

    #[test]
    fn growth_rejects_kernel_data() {
        let r = run(vec![0.0, 1.0], vec![1.0, 1.0], vec![0.0, 0.0], 1e-2, 10.0);
        assert!(matches!(
            audit_growth(&r.par, &r.hyp, &r.profile, &AuditOptions::default()),
            Err(Error::InvalidData(_))
        ));
    }

    #[test]
    fn decay_error_needs_deteriorated_data() {
        let r = run(vec![1.0, 2.0], vec![1.0, 0.0], vec![0.0, 1.0], 1e-2, 10.0);
        assert!(matches!(
            audit_decay_error(&r.rem, None, &r.profile, &AuditOptions::default()),
            Err(Error::WrongRegime(_))
        ));
        assert!(optimality_statistic(&r.rem, &r.profile).is_err());
    }

    #[test]
    fn g_reduces_to_acceleration_at_the_origin() {
        let r = run(vec![1.0], vec![1.0], vec![0.0], 1e-2, 10.0);
        let g = compute_g(&r.par, &r.hyp).unwrap();
        let (_, ddu) = r.par.derivatives(0);
        assert_eq!(g.g[0].0[0], -1e-2 * ddu.0[0]);
    }

    #[test]
    fn decay_error_entries_on_deteriorated_data() {
        let eps = 1e-2;
        let r = run(vec![1.0, 2.0], vec![0.0, 1.0], vec![1.0, 0.0], eps, 1e3);
        let g = compute_g(&r.par, &r.hyp).unwrap();
        let rep = audit_decay_error(&r.rem, Some(&g), &r.profile, &AuditOptions::default()).unwrap();
        assert_eq!(rep.entries.len(), 8);
        assert!(rep.passed());
        let stat = optimality_statistic(&r.rem, &r.profile).unwrap();
        assert!(stat > 0.0);
        // the t = 0 sample contributes nothing
        assert_eq!(weighted_rho(&r.rem, 0.5)[0], 0.0);
        let probe = optimality_probe(&r.hyp, &r.profile).unwrap();
        assert!(probe.braces >= probe.half_u1, "{probe:?}");
        // the pointwise sup dominates the statistic at any sample
        let e = rep.entry("rho-decay-error").unwrap();
        assert!((e.constant - stat / (eps * eps)).abs() <= 1e-12 * e.constant);
    }

    #[test]
    fn statistic_needs_the_probe_time() {
        let r = run(vec![1.0, 2.0], vec![0.0, 1.0], vec![1.0, 0.0], 1e-2, 1e3);
        let mut rem = r.rem.clone();
        let probe = probe_time(1e-2, 0.5);
        let i = rem.times.iter().position(|t| *t == probe).unwrap();
        rem.times.remove(i);
        rem.rho_sq.remove(i);
        assert_eq!(optimality_statistic(&rem, &r.profile), Err(Error::MissingSample(probe)));
    }

    #[test]
    fn statistic_is_monotone_in_the_horizon() {
        let a = run(vec![1.0, 2.0], vec![0.0, 1.0], vec![1.0, 0.0], 1e-2, 1e2);
        let b = run(vec![1.0, 2.0], vec![0.0, 1.0], vec![1.0, 0.0], 1e-2, 1e3);
        let sa = optimality_statistic(&a.rem, &a.profile).unwrap();
        let sb = optimality_statistic(&b.rem, &b.profile).unwrap();
        assert!(sb >= sa * (1.0 - 1e-9));
    }

    #[test]
    fn stability_compares_matching_entries() {
        let mk = |c: f64| {
            let mut r = AuditReport::new("x");
            r.entries.push(AuditEntry {
                name: "q".into(),
                claim: "q".into(),
                kind: BoundKind::TwoSided,
                constant: c,
                lower: Some(1.0),
                window: [0.0, 1.0],
                verdict: Verdict::Pass,
                detail: None,
            });
            r
        };
        let recs = ladder_stability(&[mk(1.0), mk(2.5)], 3.0);
        assert_eq!(recs.len(), 2);
        assert!(recs.iter().all(|r| r.verdict.passed()));
        let recs = ladder_stability(&[mk(1.0), mk(4.0)], 3.0);
        assert!(!recs[0].verdict.passed());
    }

    #[test]
    fn report_round_trips_through_json() {
        let r = run(vec![1.0], vec![1.0], vec![0.0], 1e-2, 10.0);
        let rep = audit_decay(&r.par, &r.hyp, &r.rem, &AuditOptions::default()).unwrap();
        let json = serde_json::to_string(&rep).unwrap();
        let back: AuditReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.entries.len(), rep.entries.len());
        assert_eq!(back.entries[0].claim, rep.entries[0].claim);
    }
}
