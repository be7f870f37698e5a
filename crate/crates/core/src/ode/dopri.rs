use super::{check_output_times, error_norm, min_step, Solution, StepStats};
use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

/// Difference between the 5th and the embedded 4th order weights.
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

/// Dormand–Prince 5(4) with PI step-size control and FSAL.
#[derive(Debug, Clone)]
pub struct DormandPrince {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl DormandPrince {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, h_init: None, h_max: f64::INFINITY, max_steps: 2_000_000 }
    }

    pub fn with_initial_step(mut self, h: f64) -> Self {
        self.h_init = Some(h);
        self
    }

    /// Integrates `y' = f(t, y)` from `times[0]` with `y(times[0]) = y0` and
    /// returns the state at every entry of `times`.
    pub fn solve<F>(&self, mut f: F, y0: &[f64], times: &[f64]) -> Result<Solution>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        check_output_times(times)?;
        let n = y0.len();
        let mut stats = StepStats::default();
        let mut states = Vec::with_capacity(times.len());
        states.push(y0.to_vec());

        let mut t = times[0];
        let mut y = y0.to_vec();
        let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
        let mut stage = vec![0.0; n];
        let mut y_new = vec![0.0; n];
        let mut err = vec![0.0; n];

        f(t, &y, &mut k[0]);
        stats.rhs_evals += 1;

        let t_end = *times.last().unwrap();
        let mut h = match self.h_init {
            Some(h) => h,
            None => self.initial_step(&mut f, t, &y, &k[0], &mut stats),
        }
        .min(self.h_max)
        .min(t_end - t);
        let mut err_prev: f64 = 1e-4;
        let mut next_out = 1;

        const SAFETY: f64 = 0.9;
        const BETA: f64 = 0.04;
        const ALPHA: f64 = 0.2 - BETA * 0.75;

        while next_out < times.len() {
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(Error::TooManySteps(self.max_steps));
            }
            let target = times[next_out];
            let clipped = t + h >= target || (target - (t + h)) < min_step(target);
            let h_step = if clipped { target - t } else { h };
            if h_step < min_step(t) {
                return Err(Error::ToleranceNotMet { t, h: h_step });
            }

            for s in 1..7 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += A[s][j] * kj[i];
                    }
                    stage[i] = y[i] + h_step * acc;
                }
                f(t + C[s] * h_step, &stage, &mut k[s]);
            }
            stats.rhs_evals += 6;
            // stage 7 is evaluated at the 5th order solution (FSAL)
            y_new.copy_from_slice(&stage);
            for i in 0..n {
                err[i] = h_step * (0..7).map(|s| E[s] * k[s][i]).sum::<f64>();
            }
            let e = error_norm(&err, &y, &y_new, self.rtol, self.atol);
            if !e.is_finite() {
                stats.rejected += 1;
                h = h_step * 0.2;
                continue;
            }

            if e <= 1.0 {
                stats.accepted += 1;
                t = if clipped { target } else { t + h_step };
                std::mem::swap(&mut y, &mut y_new);
                let last = k.pop().unwrap();
                k.insert(0, last);
                stats.step_ends.push(t);
                if clipped {
                    states.push(y.clone());
                    next_out += 1;
                }
                let fac = (SAFETY * e.max(1e-10).powf(-ALPHA) * err_prev.powf(BETA)).clamp(0.2, 10.0);
                // a clipped step must not shrink the proposal for the next one
                h = if clipped { h.max(h_step * fac) } else { h_step * fac }.min(self.h_max);
                err_prev = e.max(1e-4);
            } else {
                stats.rejected += 1;
                let fac = (SAFETY * e.powf(-ALPHA)).clamp(0.2, 1.0);
                h = h_step * fac;
            }
        }

        Ok(Solution { times: times.to_vec(), states, stats })
    }

    fn initial_step<F>(&self, f: &mut F, t: f64, y: &[f64], f0: &[f64], stats: &mut StepStats) -> f64
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let sc: Vec<f64> = y.iter().map(|v| self.atol + self.rtol * v.abs()).collect();
        let rms =
            |v: &[f64]| (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / v.len().max(1) as f64).sqrt();
        let d0 = rms(y);
        let d1 = rms(f0);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
        let mut f1 = vec![0.0; y.len()];
        f(t + h0, &y1, &mut f1);
        stats.rhs_evals += 1;
        let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
        let d2 = rms(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        (100.0 * h0).min(h1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tableau_rows_sum_to_nodes() {
        for s in 0..7 {
            let row: f64 = A[s].iter().sum();
            assert!((row - C[s]).abs() < 1e-14, "row {s}");
        }
        assert!(E.iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn exponential_decay_hits_output_times() {
        let solver = DormandPrince::new(1e-10, 1e-14);
        let times = [0.0, 0.1, 0.5, 1.0, 3.0];
        let sol = solver.solve(|_, y, dy| dy[0] = -2.0 * y[0], &[1.0], &times).unwrap();
        for (t, y) in times.iter().zip(&sol.states) {
            assert!((y[0] - (-2.0 * t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn harmonic_oscillator_long_run() {
        let solver = DormandPrince::new(1e-11, 1e-13);
        let times: Vec<f64> = (0..=20).map(|i| i as f64).collect();
        let sol = solver
            .solve(
                |_, y, dy| {
                    dy[0] = y[1];
                    dy[1] = -y[0];
                },
                &[1.0, 0.0],
                &times,
            )
            .unwrap();
        for (t, y) in times.iter().zip(&sol.states) {
            assert!((y[0] - t.cos()).abs() < 1e-8);
            assert!((y[1] + t.sin()).abs() < 1e-8);
        }
    }

    #[test]
    fn fifth_order_convergence_with_fixed_steps() {
        // y' = y cos t, y = exp(sin t)
        let run = |h: f64| {
            let mut s = DormandPrince::new(1.0, 1.0).with_initial_step(h);
            s.h_max = h;
            let sol = s.solve(|t, y, dy| dy[0] = y[0] * t.cos(), &[1.0], &[0.0, 2.0]).unwrap();
            (sol.states[1][0] - 2f64.sin().exp()).abs()
        };
        let (e1, e2) = (run(0.1), run(0.05));
        let order = (e1 / e2).log2();
        assert!(order > 4.6 && order < 5.6, "observed order {order}");
    }

    #[test]
    fn rejects_bad_output_times() {
        let s = DormandPrince::new(1e-6, 1e-9);
        assert!(s.solve(|_, _, _| {}, &[1.0], &[0.0, 1.0, 1.0]).is_err());
        assert!(s.solve(|_, _, _| {}, &[1.0], &[]).is_err());
    }
}
