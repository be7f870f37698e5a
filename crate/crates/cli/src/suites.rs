//! Named verification suites with bundled configurations and thresholds.

use std::collections::BTreeMap;

use kirchhoff_core::audit::{
    audit_decay, audit_decay_error, compute_g, improved_statistic, optimality_statistic, AuditOptions,
};
use kirchhoff_core::fit::{fit_rate, spread, sweep_convergence};
use kirchhoff_core::grid::{log_grid, probe_time};
use kirchhoff_core::heuristic::{solve_toy, verify_supersolution_bound};
use kirchhoff_core::hyperbolic::{solve_hyperbolic, HyperbolicOptions};
use kirchhoff_core::numeric::log_space;
use kirchhoff_core::ode::DormandPrince;
use kirchhoff_core::parabolic::{solve_direct, solve_profile};
use kirchhoff_core::remainder::{corrector, monotonicity_samples};
use kirchhoff_core::spectral::{InitialData, SpectralOperator, SpectralVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::experiment::{convergence_statistic, simulate, PointRun, CONVERGENCE_SLOPE};

pub const SUITES: [&str; 11] = [
    "parabolic",
    "corrector",
    "kernel",
    "energy",
    "decay",
    "rate",
    "optimality",
    "sharpness",
    "improved",
    "lemma",
    "monotonicity",
];

/// Bundled configurations, by name.
pub const CONFIGS: [(&str, &str); 6] = [
    ("smoke", include_str!("../configs/smoke.toml")),
    ("coercive", include_str!("../configs/coercive.toml")),
    ("rate", include_str!("../configs/rate.toml")),
    ("lower-bound", include_str!("../configs/lower-bound.toml")),
    ("sharpness", include_str!("../configs/sharpness.toml")),
    ("improved", include_str!("../configs/improved.toml")),
];

const ACCEPTANCE_CONFIGS: [&str; 5] = ["coercive", "rate", "lower-bound", "sharpness", "improved"];

#[derive(Debug, Clone, Serialize)]
pub struct SuiteVerdict {
    pub suite: String,
    pub pass: bool,
    pub measured: BTreeMap<String, f64>,
    pub threshold: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub suites: Vec<SuiteVerdict>,
}

pub fn bundled(name: &str) -> Result<Experiment> {
    let (_, text) = CONFIGS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| CliError::Config(format!("no bundled config named {name}")))?;
    ExperimentConfig::from_toml(text)?.validate()
}

fn ladder(name: &str) -> Result<(Experiment, Vec<PointRun>)> {
    let exp = bundled(name)?;
    let runs = exp.config.run.epsilons.par_iter().map(|e| simulate(&exp, *e)).collect::<Result<Vec<_>>>()?;
    Ok((exp, runs))
}

fn core_err(source: kirchhoff_core::error::Error) -> CliError {
    CliError::Solver { epsilon: f64::NAN, source }
}

struct Measured(BTreeMap<String, f64>);

impl Measured {
    fn new() -> Self {
        Self(BTreeMap::new())
    }

    fn put(&mut self, key: impl Into<String>, v: f64) -> &mut Self {
        self.0.insert(key.into(), v);
        self
    }

    fn verdict(self, suite: &str, pass: bool, threshold: &str) -> SuiteVerdict {
        SuiteVerdict { suite: suite.into(), pass, measured: self.0, threshold: threshold.into() }
    }
}

fn parabolic() -> Result<SuiteVerdict> {
    let op = SpectralOperator::new(vec![1.0, 4.0]).map_err(core_err)?;
    let data = InitialData::new(&op, vec![1.0, 1.0].into(), vec![0.0, 0.0].into(), 1.0).map_err(core_err)?;
    let times = log_grid(1e-3, 1e4, 20, &[]).map_err(core_err)?;
    let a = solve_profile(&op, &data, &times, 1e-9).map_err(core_err)?;
    let b = solve_direct(&op, &data, &times, 1e-9).map_err(core_err)?;
    let gap = (0..times.len())
        .map(|i| {
            let (x, y) = (a.norm_sq(0.5, i).sqrt(), b.norm_sq(0.5, i).sqrt());
            (x - y).abs() / y
        })
        .fold(0.0, f64::max);
    let mut m = Measured::new();
    m.put("max_relative_gap", gap);
    Ok(m.verdict("parabolic", gap <= 1e-6, "profile vs direct |A^(1/2)u| relative gap <= 1e-6"))
}

fn corrector_suite() -> Result<SuiteVerdict> {
    let eps = 1e-3;
    let mut times = vec![0.0];
    times.extend(log_space(1e-6, 1.0, 40));
    let sol = DormandPrince::new(1e-13, 1e-16)
        .solve(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[1] / eps;
            },
            &[0.0, 1.0],
            &times,
        )
        .map_err(core_err)?;
    let e1 = SpectralVector::unit(1, 0);
    let err = times
        .iter()
        .zip(&sol.states)
        .map(|(t, y)| {
            let (th, dth) = corrector(&e1, eps, *t);
            (th.0[0] - y[0]).abs().max((dth.0[0] - y[1]).abs())
        })
        .fold(0.0, f64::max);
    let mut m = Measured::new();
    m.put("max_abs_error", err);
    Ok(m.verdict("corrector", err <= 1e-10, "closed form vs numerical integration <= 1e-10"))
}

fn kernel() -> Result<SuiteVerdict> {
    let eps = 1e-2;
    let op = SpectralOperator::new(vec![0.0, 1.0]).map_err(core_err)?;
    let data = InitialData::new(&op, vec![1.0, 1.0].into(), vec![1.0, 0.0].into(), 1.0).map_err(core_err)?;
    let mut times = vec![0.0];
    times.extend(log_space(1e-4, 10.0, 40));
    let hyp = solve_hyperbolic(&op, &data, eps, &times, &HyperbolicOptions::with_rel_tol(1e-12)).map_err(core_err)?;
    let err =
        times.iter().zip(&hyp.u).map(|(t, u)| (u.0[0] - (1.0 - eps * (-t / eps).exp_m1())).abs()).fold(0.0, f64::max);
    let mut m = Measured::new();
    m.put("max_abs_error", err);
    Ok(m.verdict("kernel", err <= 1e-8, "kernel mode vs a + eps b (1 - e^(-t/eps)) <= 1e-8 on [0, 10]"))
}

fn energy() -> Result<SuiteVerdict> {
    let mut m = Measured::new();
    let mut pass = true;
    for name in ACCEPTANCE_CONFIGS {
        let (exp, runs) = ladder(name)?;
        let tol = exp.config.run.tol_energy;
        for run in &runs {
            let e = &run.hyp.energy;
            let n = e.windows(2).filter(|w| w[1] > w[0] + tol * e[0]).count();
            m.put(format!("{name}_eps_{:e}_violations", run.epsilon), n as f64);
            pass &= n == 0;
        }
    }
    Ok(m.verdict("energy", pass, "E(t_{i+1}) <= E(t_i) + tol_E E(0) at every sample"))
}

fn decay() -> Result<SuiteVerdict> {
    let (exp, runs) = ladder("coercive")?;
    let run = &runs[0];
    let (lo, hi) = (0..run.hyp.len())
        .filter(|i| run.hyp.times[*i] >= 1.0)
        .map(|i| (1.0 + run.hyp.times[i]) * run.hyp.norm_sq(0.5, i))
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let report = audit_decay(&run.par, &run.hyp, &run.rem, &AuditOptions::default()).map_err(core_err)?;
    let mut m = Measured::new();
    m.put("band_lower", lo).put("band_upper", hi).put("failed_entries", report.failures().count() as f64);
    let pass = lo > exp.config.run.lower_floor && hi.is_finite() && report.passed();
    Ok(m.verdict("decay", pass, "(1+t)|A^(1/2)u_eps|^2 in a positive band on [1, T]; decay audit passes"))
}

const STATEMENT_REFS: [&str; 4] = [
    "decay-error-low-order",
    "decay-error-low-order-integral",
    "decay-error-high-order",
    "decay-error-high-order-integral",
];

fn rate() -> Result<SuiteVerdict> {
    let (exp, runs) = ladder("rate")?;
    let pts: Vec<(f64, f64)> = runs.iter().map(|r| (r.epsilon, convergence_statistic(r))).collect();
    let slope = sweep_convergence(&pts).map_err(core_err)?.exponent;
    let tol = exp.config.run.slope_tolerance;
    let mut m = Measured::new();
    m.put("slope", slope);
    let mut pass = (slope - CONVERGENCE_SLOPE).abs() <= tol;
    let reports = runs
        .iter()
        .map(|r| {
            let g = compute_g(&r.par, &r.hyp).map_err(core_err)?;
            audit_decay_error(&r.rem, Some(&g), &exp.profile, &AuditOptions::default()).map_err(core_err)
        })
        .collect::<Result<Vec<_>>>()?;
    for id in STATEMENT_REFS {
        let c: Vec<f64> = reports.iter().filter_map(|r| r.entry(id)).map(|e| e.constant).collect();
        let s = spread(&c);
        m.put(format!("{id}_spread"), s);
        pass &= s <= 3.0;
    }
    Ok(m.verdict("rate", pass, "slope 2 +- 0.15; statement constants within factor 3"))
}

fn optimality() -> Result<SuiteVerdict> {
    let (exp, runs) = ladder("lower-bound")?;
    let mut m = Measured::new();
    let mut scaled = Vec::new();
    for r in &runs {
        let v = optimality_statistic(&r.rem, &exp.profile).map_err(core_err)? / (r.epsilon * r.epsilon);
        m.put(format!("scaled_eps_{:e}", r.epsilon), v);
        scaled.push(v);
    }
    let s = spread(&scaled);
    m.put("spread", s);
    let floor = exp.config.run.lower_floor;
    let pass = scaled.iter().all(|v| *v > floor) && s <= 3.0;
    Ok(m.verdict("optimality", pass, "max_t (1+t)^(delta/gamma)|rho|^2/eps^2 above the floor, within factor 3"))
}

fn sharpness() -> Result<SuiteVerdict> {
    let (exp, runs) = ladder("sharpness")?;
    let r = &runs[0];
    let delta = exp.profile.effective_delta();
    let window = [10.0, 0.5 * probe_time(r.epsilon, delta)];
    let fit = fit_rate(&r.rem.times, &r.rem.rho_sq, window).map_err(core_err)?;
    let target = -delta / exp.data.gamma;
    let mut m = Measured::new();
    m.put("exponent", fit.exponent).put("target", target);
    Ok(m.verdict("sharpness", (fit.exponent - target).abs() <= 0.1, "fitted exponent of |rho|^2 = -delta/gamma +- 0.1"))
}

fn improved() -> Result<SuiteVerdict> {
    let (exp, runs) = ladder("improved")?;
    let mut m = Measured::new();
    let mut stats = Vec::new();
    for r in &runs {
        let v = improved_statistic(&r.rem, &exp.profile).map_err(core_err)?;
        m.put(format!("stat_eps_{:e}", r.epsilon), v);
        stats.push(v);
    }
    let s = spread(&stats);
    m.put("spread", s);
    let pass = stats.iter().all(|v| v.is_finite()) && s <= 5.0;
    Ok(m.verdict("improved", pass, "sup (1+t)^(delta'/gamma)|rho|^2/eps^2 finite, within factor 5"))
}

fn lemma() -> Result<SuiteVerdict> {
    let ladder = [1e-2, 1e-3, 1e-4];
    let check = verify_supersolution_bound(0.5, 1.0, 1.0, &ladder, 1e-11, 2.0).map_err(core_err)?;
    let mut m = Measured::new();
    let mut pass = check.spread <= 2.0;
    for p in &check.points {
        m.put(format!("scaled_eps_{:e}", p.epsilon), p.scaled);
        pass &= p.psi >= p.z - 1e-8;
    }
    m.put("spread", check.spread);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for eps in ladder {
        let end = 0.5 * probe_time(eps, 0.5);
        let mut times = vec![0.0];
        times.extend(log_space(1e-3, end, 20));
        let toy = solve_toy(2.0, 1.0, 1.0, eps, &times, 1e-11).map_err(core_err)?;
        let (a, b) = toy.band([1.0, end]).map_err(core_err)?;
        lo = lo.min(a);
        hi = hi.max(b);
    }
    m.put("band_lower", lo).put("band_upper", hi);
    pass &= lo > 0.0 && hi.is_finite();
    Ok(m.verdict("lemma", pass, "psi >= z - 1e-8; scaled psi within factor 2; toy band positive"))
}

fn monotonicity() -> Result<SuiteVerdict> {
    let mut m = Measured::new();
    let mut total = 0;
    for name in ACCEPTANCE_CONFIGS {
        let (_, runs) = ladder(name)?;
        for run in &runs {
            let n = monotonicity_samples(&run.hyp, &run.par).map_err(core_err)?.iter().filter(|s| !s.holds()).count();
            total += n;
            m.put(format!("{name}_eps_{:e}_violations", run.epsilon), n as f64);
        }
    }
    Ok(m.verdict("monotonicity", total == 0, "zero violations on every bundled acceptance run"))
}

fn run_one(name: &str) -> Result<SuiteVerdict> {
    match name {
        "parabolic" => parabolic(),
        "corrector" => corrector_suite(),
        "kernel" => kernel(),
        "energy" => energy(),
        "decay" => decay(),
        "rate" => rate(),
        "optimality" => optimality(),
        "sharpness" => sharpness(),
        "improved" => improved(),
        "lemma" => lemma(),
        "monotonicity" => monotonicity(),
        other => Err(CliError::UnknownSuite { name: other.into(), known: format!("{}, all", SUITES.join(", ")) }),
    }
}

/// Runs one suite, or every suite for `all`.
pub fn verify(name: &str) -> Result<VerifyReport> {
    let names: Vec<&str> = if name == "all" { SUITES.to_vec() } else { vec![name] };
    let suites = names.iter().map(|n| run_one(n)).collect::<Result<Vec<_>>>()?;
    Ok(VerifyReport { pass: suites.iter().all(|s| s.pass), suites })
}
