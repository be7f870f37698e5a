//! Shared sample grids.
//!
//! Both solvers of a run are sampled on the same grid so remainders are formed
//! without interpolation. The grid starts at 0, is geometric afterwards, and is
//! augmented with the layer points `ε/10, ε, 5ε` and the probe time `ε^{-δ}`.

use crate::error::{Error, Result};
use crate::numeric::log_space;

/// Base points closer than this (relative) to an inserted point are dropped.
const MERGE_TOL: f64 = 1e-9;

/// The time `1/ε^δ` at which the lower bound on the remainder is probed.
pub fn probe_time(epsilon: f64, delta: f64) -> f64 {
    epsilon.powf(-delta)
}

/// `0`, then `per_decade` geometric points per decade from `t_min` to
/// `horizon`, with `extra` points inserted exactly (those outside
/// `(0, horizon]` are ignored).
pub fn log_grid(t_min: f64, horizon: f64, per_decade: usize, extra: &[f64]) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && horizon > t_min && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "grid needs 0 < t_min < horizon, got t_min = {t_min}, horizon = {horizon}"
        )));
    }
    if per_decade == 0 {
        return Err(Error::InvalidArgument("samples per decade must be positive".into()));
    }
    let extra: Vec<f64> = extra.iter().copied().filter(|t| *t > 0.0 && *t <= horizon).collect();
    let mut grid: Vec<f64> = log_space(t_min, horizon, per_decade)
        .into_iter()
        .filter(|t| !extra.iter().any(|e| (t - e).abs() <= MERGE_TOL * e))
        .chain(extra.iter().copied())
        .collect();
    grid.push(0.0);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    Ok(grid)
}

/// Grid for a hyperbolic/parabolic pair at a given ε. With `delta` set, the
/// probe time `ε^{-δ}` is included when it lies within the horizon.
pub fn run_grid(epsilon: f64, horizon: f64, per_decade: usize, delta: Option<f64>) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} must be positive")));
    }
    let mut extra = vec![epsilon / 10.0, epsilon, 5.0 * epsilon];
    if let Some(d) = delta {
        extra.push(probe_time(epsilon, d));
    }
    log_grid(epsilon / 10.0, horizon, per_decade, &extra)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_grid_contains_layer_and_probe_points() {
        let eps = 1e-3;
        let g = run_grid(eps, 1e4, 20, Some(0.5)).unwrap();
        assert_eq!(g[0], 0.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        for t in [eps / 10.0, eps, 5.0 * eps, probe_time(eps, 0.5), 1e4] {
            assert!(g.contains(&t), "missing {t}");
        }
    }

    #[test]
    fn probe_beyond_horizon_is_skipped() {
        let g = run_grid(1e-6, 100.0, 10, Some(0.5)).unwrap();
        assert_eq!(*g.last().unwrap(), 100.0);
    }

    #[test]
    fn no_near_duplicates_after_merge() {
        let g = log_grid(1e-2, 1e2, 10, &[1.0 + 1e-12, 0.5]).unwrap();
        assert!(g.contains(&(1.0 + 1e-12)));
        assert!(!g.contains(&1.0));
        assert!(g.contains(&0.5));
    }

    #[test]
    fn invalid_grids() {
        assert!(log_grid(0.0, 1.0, 10, &[]).is_err());
        assert!(log_grid(1.0, 1.0, 10, &[]).is_err());
        assert!(log_grid(0.1, 1.0, 0, &[]).is_err());
        assert!(run_grid(0.0, 1.0, 10, None).is_err());
    }
}
