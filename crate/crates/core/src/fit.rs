//! Log-log regressions and truncated improper integrals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, trapezoid};

/// Minimum number of samples a fit needs.
pub const MIN_FIT_SAMPLES: usize = 5;

/// Least-squares line `log value ≈ intercept + exponent · x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    pub window: [f64; 2],
    pub samples: usize,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = compensated_sum(xs.iter().copied()) / n;
    let my = compensated_sum(ys.iter().copied()) / n;
    let sxx = compensated_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let sxy = compensated_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = compensated_sum(xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)));
    (slope, intercept, (rss / n).sqrt())
}

/// Fits `value ~ (1+t)^exponent` over the samples with `t` in `window`.
pub fn fit_rate(times: &[f64], values: &[f64], window: [f64; 2]) -> Result<RateFit> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), got: values.len() });
    }
    let [lo, hi] = window;
    let picked: Vec<(f64, f64)> =
        times.iter().zip(values).filter(|(t, _)| **t >= lo && **t <= hi).map(|(t, v)| (*t, *v)).collect();
    if picked.len() < MIN_FIT_SAMPLES {
        return Err(Error::EmptyWindow { lo, hi, count: picked.len(), need: MIN_FIT_SAMPLES });
    }
    if let Some((t, v)) = picked.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::NonPositive { t: *t, value: *v });
    }
    let xs: Vec<f64> = picked.iter().map(|(t, _)| t.ln_1p()).collect();
    let ys: Vec<f64> = picked.iter().map(|(_, v)| v.ln()).collect();
    let (exponent, intercept, residual) = least_squares(&xs, &ys);
    Ok(RateFit { exponent, intercept, residual, window, samples: picked.len() })
}

/// Slope of `log statistic` against `log ε` over a ladder of at least three points.
pub fn sweep_convergence(points: &[(f64, f64)]) -> Result<RateFit> {
    const NEED: usize = 3;
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(0.0, f64::max);
    if points.len() < NEED {
        return Err(Error::EmptyWindow { lo, hi, count: points.len(), need: NEED });
    }
    if let Some((e, v)) = points.iter().find(|(e, v)| !(*e > 0.0 && *v > 0.0)) {
        return Err(Error::NonPositive { t: *e, value: *v });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (exponent, intercept, residual) = least_squares(&xs, &ys);
    Ok(RateFit { exponent, intercept, residual, window: [lo, hi], samples: points.len() })
}

/// `max / min` of a set of positive constants; infinite if any is not positive.
pub fn spread(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo > 0.0) || !hi.is_finite() {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// `∫₀^∞ f` split into the trapezoidal part up to the last sample `T` and a
/// tail extrapolated from the decay exponent `p` of `f` on `[T/10, T]`:
/// `∫_T^∞ f(T) ((1+t)/(1+T))^p dt = f(T)(1+T)/(-p-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImproperIntegral {
    pub truncated: f64,
    /// Infinite when the integrand does not decay faster than `1/t` (or the
    /// decay could not be fitted).
    pub tail: f64,
    pub exponent: Option<f64>,
}

impl ImproperIntegral {
    pub fn total(&self) -> f64 {
        self.truncated + self.tail
    }
}

pub fn improper_integral(times: &[f64], integrand: &[f64]) -> ImproperIntegral {
    let truncated = trapezoid(times, integrand);
    let Some(&t_end) = times.last() else {
        return ImproperIntegral { truncated, tail: 0.0, exponent: None };
    };
    let f_end = *integrand.last().unwrap();
    let window = [t_end / 10.0, t_end];
    let in_window = || times.iter().zip(integrand).filter(|(t, _)| **t >= window[0]);
    if in_window().all(|(_, f)| *f == 0.0) {
        return ImproperIntegral { truncated, tail: 0.0, exponent: None };
    }
    match fit_rate(times, integrand, window) {
        Ok(fit) if fit.exponent < -1.0 => ImproperIntegral {
            truncated,
            tail: f_end * (1.0 + t_end) / (-fit.exponent - 1.0),
            exponent: Some(fit.exponent),
        },
        Ok(fit) => ImproperIntegral { truncated, tail: f64::INFINITY, exponent: Some(fit.exponent) },
        Err(_) => ImproperIntegral { truncated, tail: f64::INFINITY, exponent: None },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::log_space;
    use proptest::prelude::*;

    #[test]
    fn exact_power_law() {
        let t = log_space(1.0, 1e4, 10);
        let v: Vec<f64> = t.iter().map(|t| (1.0 + t).powf(-0.5)).collect();
        let fit = fit_rate(&t, &v, [1.0, 1e4]).unwrap();
        assert!((fit.exponent + 0.5).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        assert_eq!(fit.samples, t.len());
    }

    #[test]
    fn closed_form_parabolic_decay() {
        let t = log_space(1e2, 1e4, 20);
        let v: Vec<f64> = t.iter().map(|t| 1.0 / (1.0 + 2.0 * t)).collect();
        let fit = fit_rate(&t, &v, [1e2, 1e4]).unwrap();
        assert!((fit.exponent + 1.0).abs() < 0.02, "{}", fit.exponent);
    }

    #[test]
    fn window_and_sign_errors() {
        let t = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let v = [1.0, 0.5, 0.3, 0.0, 0.1, 0.1];
        assert!(matches!(fit_rate(&t, &v, [10.0, 20.0]), Err(Error::EmptyWindow { count: 0, .. })));
        assert!(matches!(fit_rate(&t, &v, [1.0, 6.0]), Err(Error::NonPositive { t, .. }) if t == 4.0));
    }

    #[test]
    fn sweep_recovers_quadratic_rate() {
        let pts: Vec<(f64, f64)> = [1e-2, 3e-3, 1e-3].iter().map(|e| (*e, e * e)).collect();
        let fit = sweep_convergence(&pts).unwrap();
        assert!((fit.exponent - 2.0).abs() < 1e-12);
        assert!(sweep_convergence(&pts[..2]).is_err());
    }

    #[test]
    fn spread_of_constants() {
        assert_eq!(spread(&[1.0, 2.0, 4.0]), 4.0);
        assert_eq!(spread(&[1.0, 0.0]), f64::INFINITY);
    }

    #[test]
    fn tail_of_inverse_square() {
        // ∫₀^∞ (1+t)^{-2} dt = 1
        let mut t = vec![0.0];
        t.extend(log_space(1e-3, 1e3, 200));
        let f: Vec<f64> = t.iter().map(|t| (1.0 + t).powi(-2)).collect();
        let integral = improper_integral(&t, &f);
        assert!((integral.tail - 1.0 / 1001.0).abs() < 1e-9);
        assert!((integral.total() - 1.0).abs() < 1e-4, "{integral:?}");
    }

    #[test]
    fn slowly_decaying_integrand_has_infinite_tail() {
        let t = log_space(1.0, 1e3, 20);
        let f: Vec<f64> = t.iter().map(|t| 1.0 / (1.0 + t)).collect();
        assert_eq!(improper_integral(&t, &f).tail, f64::INFINITY);
        let z = vec![0.0; t.len()];
        assert_eq!(improper_integral(&t, &z).tail, 0.0);
    }

    proptest! {
        #[test]
        fn recovers_any_power_law(p in -4.0f64..2.0, a in 1e-6f64..1e6) {
            let t = log_space(1e-1, 1e5, 8);
            let v: Vec<f64> = t.iter().map(|t| a * (1.0 + t).powf(p)).collect();
            let fit = fit_rate(&t, &v, [0.0, 1e6]).unwrap();
            prop_assert!((fit.exponent - p).abs() <= 1e-6);
            prop_assert!((fit.intercept - a.ln()).abs() <= 1e-6);
        }
    }
}
