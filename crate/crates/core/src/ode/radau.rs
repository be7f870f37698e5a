use nalgebra::{DMatrix, DVector};

use super::{check_output_times, error_norm, min_step, Solution, StepStats};
use crate::error::{Error, Result};

/// A first-order system `y' = f(t, y)` with an analytic Jacobian.
pub trait StiffSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
    /// Writes `∂f/∂y` into `jac` (already sized `dim × dim`, zero-filled).
    fn jacobian(&self, t: f64, y: &[f64], jac: &mut DMatrix<f64>);
    /// Upper bound on the step that starts at `t`.
    fn max_step(&self, _t: f64) -> f64 {
        f64::INFINITY
    }
}

struct Tableau {
    a: [[f64; 3]; 3],
    c: [f64; 3],
}

fn tableau() -> Tableau {
    let s6 = 6f64.sqrt();
    Tableau {
        a: [
            [(88.0 - 7.0 * s6) / 360.0, (296.0 - 169.0 * s6) / 1800.0, (-2.0 + 3.0 * s6) / 225.0],
            [(296.0 + 169.0 * s6) / 1800.0, (88.0 + 7.0 * s6) / 360.0, (-2.0 - 3.0 * s6) / 225.0],
            [(16.0 - s6) / 36.0, (16.0 + s6) / 36.0, 1.0 / 9.0],
        ],
        c: [(4.0 - s6) / 10.0, (4.0 + s6) / 10.0, 1.0],
    }
}

/// Three-stage Radau IIA (order 5, stiffly accurate, L-stable).
///
/// Stage equations are solved by simplified Newton iterations with the
/// Jacobian frozen at the start of the step. The local error is estimated by
/// step doubling: each step of size `h` is also taken as two steps of `h/2`,
/// the latter is kept, and `(y_half - y_full) / 31` measures its error.
#[derive(Debug, Clone)]
pub struct Radau5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub max_steps: usize,
    pub max_newton: usize,
    /// Newton stops once the scaled increment drops below this.
    pub newton_tol: f64,
}

impl Radau5 {
    pub fn new(rtol: f64, atol: f64, h_init: f64) -> Self {
        Self { rtol, atol, h_init, max_steps: 500_000, max_newton: 12, newton_tol: 1e-3 }
    }

    pub fn solve<S: StiffSystem>(&self, sys: &S, y0: &[f64], times: &[f64]) -> Result<Solution> {
        self.solve_inspect(sys, y0, times, |_, _| Ok(()))
    }

    /// Like [`solve`](Self::solve), calling `inspect` on every output sample as
    /// soon as it is reached; an error from `inspect` aborts the integration.
    pub fn solve_inspect<S, F>(&self, sys: &S, y0: &[f64], times: &[f64], mut inspect: F) -> Result<Solution>
    where
        S: StiffSystem,
        F: FnMut(f64, &[f64]) -> Result<()>,
    {
        check_output_times(times)?;
        let n = sys.dim();
        if y0.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: y0.len() });
        }
        let tab = tableau();
        let mut stepper = Stepper::new(sys, &tab, n, self);
        let mut stats = StepStats::default();
        let mut states = Vec::with_capacity(times.len());
        inspect(times[0], y0)?;
        states.push(y0.to_vec());

        let mut t = times[0];
        let mut y = y0.to_vec();
        let mut h = self.h_init;
        let mut next_out = 1;
        let mut last_rejected = false;

        while next_out < times.len() {
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(Error::TooManySteps(self.max_steps));
            }
            let target = times[next_out];
            let h_cap = h.min(sys.max_step(t));
            let clipped = t + h_cap >= target || (target - (t + h_cap)) < min_step(target);
            let h_step = if clipped { target - t } else { h_cap };
            if h_step < min_step(t) || h_step <= 0.0 {
                return Err(Error::ToleranceNotMet { t, h: h_step });
            }

            let outcome = stepper.doubled_step(t, &y, h_step);
            stats.rhs_evals = stepper.rhs_evals;
            let (y_new, err) = match outcome {
                Some(v) => v,
                None => {
                    // Newton failed to converge
                    stats.rejected += 1;
                    h = h_step * 0.25;
                    last_rejected = true;
                    continue;
                }
            };
            let e = error_norm(&err, &y, &y_new, self.rtol, self.atol);
            if !e.is_finite() {
                stats.rejected += 1;
                h = h_step * 0.25;
                last_rejected = true;
                continue;
            }
            let fac = 0.9 * e.max(1e-12).powf(-1.0 / 6.0);
            if e <= 1.0 {
                stats.accepted += 1;
                t = if clipped { target } else { t + h_step };
                y = y_new;
                stats.step_ends.push(t);
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(t));
                }
                if clipped {
                    inspect(t, &y)?;
                    states.push(y.clone());
                    next_out += 1;
                }
                let fac = if last_rejected { fac.min(1.0) } else { fac.clamp(0.2, 4.0) };
                h = if clipped { h.max(h_step * fac) } else { h_step * fac };
                last_rejected = false;
            } else {
                stats.rejected += 1;
                h = h_step * fac.clamp(0.1, 0.9);
                last_rejected = true;
            }
        }
        stats.rhs_evals = stepper.rhs_evals;
        Ok(Solution { times: times.to_vec(), states, stats })
    }
}

struct Stepper<'a, S> {
    sys: &'a S,
    tab: &'a Tableau,
    n: usize,
    cfg: &'a Radau5,
    jac: DMatrix<f64>,
    f: Vec<f64>,
    stage: Vec<f64>,
    rhs_evals: usize,
}

impl<'a, S: StiffSystem> Stepper<'a, S> {
    fn new(sys: &'a S, tab: &'a Tableau, n: usize, cfg: &'a Radau5) -> Self {
        Self { sys, tab, n, cfg, jac: DMatrix::zeros(n, n), f: vec![0.0; n], stage: vec![0.0; n], rhs_evals: 0 }
    }

    fn refresh_jacobian(&mut self, t: f64, y: &[f64]) {
        self.jac.fill(0.0);
        self.sys.jacobian(t, y, &mut self.jac);
    }

    /// One step of size `h` and two of size `h/2`. Returns the half-step
    /// result and the error estimate.
    fn doubled_step(&mut self, t: f64, y: &[f64], h: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        self.refresh_jacobian(t, y);
        let full = self.single(t, y, h)?;
        let half = self.single(t, y, 0.5 * h)?;
        self.refresh_jacobian(t + 0.5 * h, &half);
        let two_halves = self.single(t + 0.5 * h, &half, 0.5 * h)?;
        let err = two_halves.iter().zip(&full).map(|(a, b)| (a - b) / 31.0).collect();
        Some((two_halves, err))
    }

    /// One Radau IIA step with the current Jacobian.
    fn single(&mut self, t: f64, y: &[f64], h: f64) -> Option<Vec<f64>> {
        let n = self.n;
        let a = &self.tab.a;
        let mut m = DMatrix::<f64>::identity(3 * n, 3 * n);
        for i in 0..3 {
            for j in 0..3 {
                let coef = -h * a[i][j];
                for r in 0..n {
                    for c in 0..n {
                        let v = self.jac[(r, c)];
                        if v != 0.0 {
                            m[(i * n + r, j * n + c)] += coef * v;
                        }
                    }
                }
            }
        }
        let lu = m.lu();

        let scale: Vec<f64> = y.iter().map(|v| self.cfg.atol + self.cfg.rtol * v.abs()).collect();
        let mut z = vec![0.0; 3 * n];
        let mut fz = vec![0.0; 3 * n];
        let mut prev_norm = f64::INFINITY;
        for iter in 0..self.cfg.max_newton {
            for j in 0..3 {
                for r in 0..n {
                    self.stage[r] = y[r] + z[j * n + r];
                }
                self.sys.rhs(t + self.tab.c[j] * h, &self.stage, &mut self.f);
                fz[j * n..(j + 1) * n].copy_from_slice(&self.f);
            }
            self.rhs_evals += 3;
            let mut g = DVector::<f64>::zeros(3 * n);
            for i in 0..3 {
                for r in 0..n {
                    let mut acc = 0.0;
                    for j in 0..3 {
                        acc += a[i][j] * fz[j * n + r];
                    }
                    g[i * n + r] = h * acc - z[i * n + r];
                }
            }
            let dz = lu.solve(&g)?;
            let norm = {
                let s: f64 = (0..3 * n).map(|k| (dz[k] / scale[k % n]).powi(2)).sum();
                (s / (3 * n) as f64).sqrt()
            };
            if !norm.is_finite() {
                return None;
            }
            for k in 0..3 * n {
                z[k] += dz[k];
            }
            if norm <= self.cfg.newton_tol {
                return Some((0..n).map(|r| y[r] + z[2 * n + r]).collect());
            }
            if iter > 0 && norm >= 0.99 * prev_norm {
                return None;
            }
            prev_norm = norm;
        }
        None
    }
}
