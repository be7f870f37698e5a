//! Small numerical helpers shared by the solvers and auditors.

/// Neumaier-compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    compensated_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

pub fn norm_sq(a: &[f64]) -> f64 {
    compensated_sum(a.iter().map(|x| x * x))
}

/// Cumulative trapezoidal integral of `values` over `times`; the first entry is 0.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    assert_eq!(times.len(), values.len());
    let mut out = Vec::with_capacity(times.len());
    let mut acc = CompensatedSum::new();
    if !times.is_empty() {
        out.push(0.0);
    }
    for i in 1..times.len() {
        acc.add(0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]));
        out.push(acc.value());
    }
    out
}

pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    cumulative_trapezoid(times, values).last().copied().unwrap_or(0.0)
}

/// `n` points per decade between `lo` and `hi` (both included), geometric spacing.
pub fn log_space(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && per_decade > 0);
    let decades = (hi / lo).log10();
    let n = ((decades * per_decade as f64).ceil() as usize).max(1);
    let (l0, l1) = (lo.log10(), hi.log10());
    (0..=n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n {
                hi
            } else {
                10f64.powf(l0 + (l1 - l0) * i as f64 / n as f64)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancelled_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
        assert_ne!(xs.iter().sum::<f64>(), 2.0);
    }

    #[test]
    fn trapezoid_is_exact_on_linear_data() {
        let t = [0.0, 0.5, 2.0, 3.0];
        let v: Vec<f64> = t.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((trapezoid(&t, &v) - 12.0).abs() < 1e-14);
        let cum = cumulative_trapezoid(&t, &v);
        assert_eq!(cum[0], 0.0);
        assert!((cum[2] - 6.0).abs() < 1e-14);
    }

    #[test]
    fn log_space_endpoints_and_density() {
        let g = log_space(1e-2, 1e2, 10);
        assert_eq!(g.len(), 41);
        assert_eq!(g[0], 1e-2);
        assert_eq!(*g.last().unwrap(), 1e2);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
