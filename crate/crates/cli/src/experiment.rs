//! Per-ε runs, their audits and artifacts, and the ladder summary.

use std::path::Path;

use kirchhoff_core::audit::{
    audit_decay, audit_decay_error, audit_growth, compute_g, improved_statistic, ladder_stability,
    optimality_statistic, AuditEntry, AuditOptions, AuditReport, BoundKind, GSeries, StabilityRecord, Verdict,
};
use kirchhoff_core::fit::{sweep_convergence, RateFit};
use kirchhoff_core::grid::run_grid;
use kirchhoff_core::hyperbolic::{solve_hyperbolic, HyperbolicOptions, HyperbolicTrajectory};
use kirchhoff_core::parabolic::{solve_profile, ParabolicTrajectory};
use kirchhoff_core::remainder::{build_remainders, RemainderSeries};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AuditKind, Experiment, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::output::{ensure_dir, write_json, Table};

/// Target slope of the convergence statistic against ε.
pub const CONVERGENCE_SLOPE: f64 = 2.0;

pub struct PointRun {
    pub epsilon: f64,
    pub par: ParabolicTrajectory,
    pub hyp: HyperbolicTrajectory,
    pub rem: RemainderSeries,
}

pub fn simulate(exp: &Experiment, epsilon: f64) -> Result<PointRun> {
    let run = &exp.config.run;
    let solver = |source| CliError::Solver { epsilon, source };
    let times = run_grid(epsilon, run.horizon, run.samples_per_decade, exp.profile.delta)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let par = solve_profile(&exp.op, &exp.data, &times, run.rel_tol_parabolic).map_err(solver)?;
    let opts = HyperbolicOptions {
        rel_tol: run.rel_tol_hyperbolic,
        eps_max: run.eps_max,
        blowup_horizon: run.blowup_horizon,
        energy_tol: run.tol_energy,
        ..HyperbolicOptions::default()
    };
    let hyp = solve_hyperbolic(&exp.op, &exp.data, epsilon, &times, &opts).map_err(solver)?;
    let theta0 = exp.op.theta0(&exp.data).map_err(solver)?;
    let rem = build_remainders(&hyp, &par, &theta0).map_err(solver)?.with_delta(exp.profile.effective_delta());
    Ok(PointRun { epsilon, par, hyp, rem })
}

/// `max_t (1+t)^{δ/γ}|ρ(t)|²` over the whole grid.
pub fn convergence_statistic(run: &PointRun) -> f64 {
    let k = run.rem.delta.unwrap_or(1.0) / run.rem.gamma;
    run.rem.times.iter().zip(&run.rem.rho_sq).map(|(t, r)| (1.0 + t).powf(k) * r).fold(0.0, f64::max)
}

fn energy_entry(hyp: &HyperbolicTrajectory, tol: f64) -> AuditEntry {
    let e = &hyp.energy;
    let slack = tol * e[0];
    let worst = e.windows(2).map(|w| (w[1] - w[0]) / e[0]).fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let violations = e.windows(2).filter(|w| w[1] > w[0] + slack).count();
    AuditEntry {
        name: "E(t_{i+1}) - E(t_i) <= tol_E · E(0)".into(),
        claim: "energy-dissipation".into(),
        kind: BoundKind::NoViolation,
        constant: worst,
        lower: None,
        window: [hyp.times[0], *hyp.times.last().unwrap()],
        verdict: Verdict::from_bool(violations == 0),
        detail: Some(format!("violations = {violations}")),
    }
}

pub fn audit_point(exp: &Experiment, run: &PointRun, g: Option<&GSeries>) -> Result<AuditReport> {
    let cfg = &exp.config.run;
    let opts = AuditOptions {
        lower_floor: cfg.lower_floor,
        stability_factor: cfg.stability_factor,
        ..AuditOptions::default()
    };
    let analysis = |source| CliError::Solver { epsilon: run.epsilon, source };
    let mut report = AuditReport::new(format!("epsilon = {:e}", run.epsilon));
    report.meta.epsilon = Some(run.epsilon);
    report.meta.gamma = Some(exp.data.gamma);
    report.meta.mu = Some(exp.profile.mu);
    report.meta.nu = exp.profile.nu;
    report.meta.delta = Some(exp.profile.effective_delta());
    report.meta.eigenvalues = exp.op.eigenvalues().to_vec();
    for (k, v) in [
        ("rel_tol_parabolic", cfg.rel_tol_parabolic),
        ("rel_tol_hyperbolic", cfg.rel_tol_hyperbolic),
        ("tol_energy", cfg.tol_energy),
    ] {
        report.meta.tolerances.insert(k.into(), v);
    }
    report.entries.push(energy_entry(&run.hyp, cfg.tol_energy));
    let eps2 = run.epsilon * run.epsilon;
    let window = [run.rem.times[0], *run.rem.times.last().unwrap()];
    for kind in &exp.audits {
        match kind {
            AuditKind::Decay => report.absorb(audit_decay(&run.par, &run.hyp, &run.rem, &opts).map_err(analysis)?),
            AuditKind::Growth => {
                report.absorb(audit_growth(&run.par, &run.hyp, &exp.profile, &opts).map_err(analysis)?)
            }
            AuditKind::DecayError => {
                report.absorb(audit_decay_error(&run.rem, g, &exp.profile, &opts).map_err(analysis)?)
            }
            AuditKind::Optimality => {
                let scaled = optimality_statistic(&run.rem, &exp.profile).map_err(analysis)? / eps2;
                report.entries.push(AuditEntry {
                    name: "max_t (1+t)^{δ/γ} |ρ|² / ε²".into(),
                    claim: "optimality-lower-bound".into(),
                    kind: BoundKind::Lower,
                    constant: scaled,
                    lower: None,
                    window,
                    verdict: Verdict::from_bool(scaled > cfg.lower_floor),
                    detail: None,
                });
            }
            AuditKind::Improved => {
                let stat = improved_statistic(&run.rem, &exp.profile).map_err(analysis)?;
                report.entries.push(AuditEntry {
                    name: "sup_t (1+t)^{δ'/γ} |ρ|² / ε²".into(),
                    claim: "improved-decay-error".into(),
                    kind: BoundKind::Upper,
                    constant: stat,
                    lower: None,
                    window,
                    verdict: Verdict::from_bool(stat.is_finite()),
                    detail: Some(format!("delta' = {}", exp.profile.delta_improved.unwrap_or(f64::NAN))),
                });
            }
        }
    }
    Ok(report)
}

/// The three trajectory tables. Columns depend only on the audit list.
pub fn tables(exp: &Experiment, run: &PointRun, g: Option<&GSeries>) -> [Table; 3] {
    let n = run.par.len();
    let col = |f: &dyn Fn(usize) -> f64| (0..n).map(f).collect::<Vec<f64>>();

    let mut par = Table::new(&run.par.times);
    par.push("s", col(&|i| run.par.norm_sq(0.5, i)));
    par.push("c", run.par.c.clone());
    par.push("C", run.par.c_integral.clone());
    par.push("norm2_u", col(&|i| run.par.norm_sq(0.0, i)));
    par.push("norm2_Au", col(&|i| run.par.norm_sq(1.0, i)));

    let mut hyp = Table::new(&run.hyp.times);
    hyp.push("s_eps", col(&|i| run.hyp.norm_sq(0.5, i)));
    hyp.push("c_eps", run.hyp.c.clone());
    hyp.push("C_eps", run.hyp.c_integral.clone());
    hyp.push("energy", run.hyp.energy.clone());
    hyp.push("norm2_u_eps", col(&|i| run.hyp.norm_sq(0.0, i)));
    hyp.push("norm2_du_eps", col(&|i| run.hyp.velocity_norm_sq(0.0, i)));

    let r = &run.rem;
    let mut rem = Table::new(&r.times);
    rem.push("norm2_rho", r.rho_sq.clone());
    rem.push("norm2_half_rho", r.rho_half_sq.clone());
    rem.push("norm2_A_rho", r.rho_one_sq.clone());
    rem.push("norm2_r_prime", r.r_prime_sq.clone());
    rem.push("norm2_half_r_prime", r.r_prime_half_sq.clone());
    let eps2 = run.epsilon * run.epsilon;
    let weighted = |delta: f64| -> Vec<f64> {
        r.times.iter().zip(&r.rho_sq).map(|(t, v)| (1.0 + t).powf(delta / r.gamma) * v / eps2).collect()
    };
    if exp.has(AuditKind::DecayError) || exp.has(AuditKind::Optimality) {
        rem.push("weighted_rho", weighted(exp.profile.delta.unwrap_or(1.0)));
    }
    if exp.has(AuditKind::Improved) {
        rem.push("weighted_rho_improved", weighted(exp.profile.delta_improved.unwrap_or(1.0)));
    }
    if let Some(g) = g {
        rem.push("norm2_g", g.g_sq.clone());
        rem.push("norm2_half_g", g.g_half_sq.clone());
    }
    [par, hyp, rem]
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileEcho {
    pub mu: f64,
    pub nu: Option<f64>,
    pub delta: f64,
    pub regime: &'static str,
}

impl ProfileEcho {
    fn of(exp: &Experiment) -> Self {
        Self {
            mu: exp.profile.mu,
            nu: exp.profile.nu,
            delta: exp.profile.effective_delta(),
            regime: exp.profile.regime.as_str(),
        }
    }
}

#[derive(Serialize)]
struct RunDocument<'a> {
    config_echo: &'a ExperimentConfig,
    profile: ProfileEcho,
    epsilon: f64,
    verdict: Verdict,
    #[serde(flatten)]
    report: &'a AuditReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderSummary {
    pub command: &'static str,
    pub profile: ProfileEcho,
    pub epsilons: Vec<f64>,
    /// `max_t (1+t)^{δ/γ}|ρ|²` per ε.
    pub statistics: Vec<f64>,
    pub scaled_statistics: Vec<f64>,
    pub convergence: Option<RateFit>,
    pub slope_target: Option<[f64; 2]>,
    pub reports_passed: Vec<bool>,
    pub stability: Vec<StabilityRecord>,
    pub verdict: Verdict,
}

impl LadderSummary {
    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }
}

pub struct PointOutcome {
    pub epsilon: f64,
    pub statistic: f64,
    pub report: Option<AuditReport>,
}

fn ladder_points<F>(exp: &Experiment, work: F) -> Result<Vec<PointOutcome>>
where
    F: Fn(usize, &PointRun) -> Result<Option<AuditReport>> + Sync,
{
    exp.config
        .run
        .epsilons
        .par_iter()
        .enumerate()
        .map(|(i, &eps)| {
            let run = simulate(exp, eps)?;
            let report = work(i, &run)?;
            Ok(PointOutcome { epsilon: eps, statistic: convergence_statistic(&run), report })
        })
        .collect()
}

fn convergence(exp: &Experiment, points: &[PointOutcome]) -> Option<RateFit> {
    exp.profile.delta?;
    let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.epsilon, p.statistic)).collect();
    sweep_convergence(&pts).ok()
}

fn summary(exp: &Experiment, command: &'static str, points: &[PointOutcome]) -> LadderSummary {
    let reports: Vec<AuditReport> = points.iter().filter_map(|p| p.report.clone()).collect();
    let stability =
        if reports.len() >= 2 { ladder_stability(&reports, exp.config.run.stability_factor) } else { Vec::new() };
    LadderSummary {
        command,
        profile: ProfileEcho::of(exp),
        epsilons: points.iter().map(|p| p.epsilon).collect(),
        statistics: points.iter().map(|p| p.statistic).collect(),
        scaled_statistics: points.iter().map(|p| p.statistic / (p.epsilon * p.epsilon)).collect(),
        convergence: convergence(exp, points),
        slope_target: None,
        reports_passed: reports.iter().map(AuditReport::passed).collect(),
        stability,
        verdict: Verdict::Pass,
    }
}

/// Solves, audits and writes artifacts for every ε of the ladder.
pub fn run_experiment(exp: &Experiment) -> Result<LadderSummary> {
    let dir = exp.output_dir();
    ensure_dir(&dir)?;
    let points = ladder_points(exp, |i, run| {
        let g = if exp.has(AuditKind::DecayError) {
            Some(compute_g(&run.par, &run.hyp).map_err(|source| CliError::Solver { epsilon: run.epsilon, source })?)
        } else {
            None
        };
        let report = audit_point(exp, run, g.as_ref())?;
        write_point(exp, &dir, i, run, g.as_ref(), &report)?;
        Ok(Some(report))
    })?;
    let mut s = summary(exp, "run", &points);
    let ok = s.reports_passed.iter().all(|p| *p) && s.stability.iter().all(|r| r.verdict.passed());
    s.verdict = Verdict::from_bool(ok);
    write_json(&dir.join("ladder_summary.json"), &s)?;
    Ok(s)
}

fn write_point(
    exp: &Experiment,
    dir: &Path,
    i: usize,
    run: &PointRun,
    g: Option<&GSeries>,
    report: &AuditReport,
) -> Result<()> {
    let [par, hyp, rem] = tables(exp, run, g);
    par.write(&dir.join(format!("parabolic_e{i}.csv")))?;
    hyp.write(&dir.join(format!("hyperbolic_e{i}.csv")))?;
    rem.write(&dir.join(format!("remainders_e{i}.csv")))?;
    let doc = RunDocument {
        config_echo: &exp.config,
        profile: ProfileEcho::of(exp),
        epsilon: run.epsilon,
        verdict: Verdict::from_bool(report.passed()),
        report,
    };
    write_json(&dir.join(format!("report_e{i}.json")), &doc)
}

/// Fits the convergence statistic against ε and gates on the slope.
pub fn sweep_experiment(exp: &Experiment) -> Result<LadderSummary> {
    if exp.profile.delta.is_none() {
        return Err(CliError::Config(format!("sweep needs ν ≤ μ, data is {}", exp.profile.regime.as_str())));
    }
    if exp.config.run.epsilons.len() < 3 {
        return Err(CliError::Config("sweep needs at least three epsilons".into()));
    }
    let dir = exp.output_dir();
    ensure_dir(&dir)?;
    let points = ladder_points(exp, |_, _| Ok(None))?;
    let mut s = summary(exp, "sweep", &points);
    let tol = exp.config.run.slope_tolerance;
    s.slope_target = Some([CONVERGENCE_SLOPE - tol, CONVERGENCE_SLOPE + tol]);
    let ok = s.convergence.is_some_and(|f| (f.exponent - CONVERGENCE_SLOPE).abs() <= tol);
    s.verdict = Verdict::from_bool(ok);
    let mut table = Table { headers: vec!["epsilon".into()], columns: vec![s.epsilons.clone()] };
    table.push("statistic", s.statistics.clone());
    table.push("scaled_statistic", s.scaled_statistics.clone());
    table.write(&dir.join("sweep.csv"))?;
    write_json(&dir.join("ladder_summary.json"), &s)?;
    Ok(s)
}
