//! Diagonal spectral model of the operator `A`.
//!
//! `A` is represented by its eigenvalues `λ_k²` on an orthonormal eigenbasis, and
//! every vector of the Hilbert space by its coefficients in that basis. Powers
//! `A^α` act componentwise, so all the weighted norms used by the audits reduce
//! to compensated sums over modes.

use std::ops::RangeBounds;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, dot, norm_sq};

/// Nonnegative eigenvalues `λ_k²`, sorted ascending. Mode `k` is the `k`-th entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralOperator {
    eigenvalues: Vec<f64>,
}

impl SpectralOperator {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidOperator("at least one mode is required".into()));
        }
        if let Some(bad) = eigenvalues.iter().find(|l| !l.is_finite() || **l < 0.0) {
            return Err(Error::InvalidOperator(format!("eigenvalue {bad} is not a finite nonnegative number")));
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidOperator("eigenvalues must be sorted ascending".into()));
        }
        Ok(Self { eigenvalues })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, mode: usize) -> f64 {
        self.eigenvalues[mode]
    }

    /// Modes whose eigenvalue lies in `range` (the subspace `H_J` for an interval `J`).
    pub fn modes_in<R: RangeBounds<f64>>(&self, range: R) -> Vec<usize> {
        self.eigenvalues.iter().enumerate().filter(|(_, l)| range.contains(l)).map(|(k, _)| k).collect()
    }

    pub fn kernel_modes(&self) -> Vec<usize> {
        self.modes_in(0.0..=0.0)
    }

    fn check(&self, v: &SpectralVector) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        Ok(())
    }

    /// `A^α v`. For `α = 0` this is the identity, including on kernel modes.
    pub fn apply_power(&self, alpha: f64, v: &SpectralVector) -> Result<SpectralVector> {
        self.check(v)?;
        if !(alpha >= 0.0) {
            return Err(Error::InvalidArgument(format!("power {alpha} must be nonnegative")));
        }
        Ok(SpectralVector(self.eigenvalues.iter().zip(&v.0).map(|(l, c)| mode_power(*l, alpha) * c).collect()))
    }

    /// `|A^α v|`.
    pub fn weighted_norm(&self, alpha: f64, v: &SpectralVector) -> Result<f64> {
        Ok(self.weighted_norm_sq(alpha, v)?.sqrt())
    }

    /// `|A^α v|²`.
    pub fn weighted_norm_sq(&self, alpha: f64, v: &SpectralVector) -> Result<f64> {
        self.check(v)?;
        if !(alpha >= 0.0) {
            return Err(Error::InvalidArgument(format!("power {alpha} must be nonnegative")));
        }
        Ok(weighted_norm_sq_raw(&self.eigenvalues, alpha, &v.0))
    }

    /// Validates the pair, then derives the `(μ, ν)` profile of the data.
    pub fn classify(&self, data: &InitialData) -> Result<MuNuProfile> {
        self.classify_with_threshold(data, 0.0)
    }

    /// As [`classify`](Self::classify) but a coefficient counts as nonzero only
    /// when its magnitude exceeds `threshold`.
    pub fn classify_with_threshold(&self, data: &InitialData, threshold: f64) -> Result<MuNuProfile> {
        self.check(&data.u0)?;
        self.check(&data.u1)?;
        MuNuProfile::build(self, data, threshold)
    }

    /// `θ₀ = u1 + |A^{1/2}u0|^{2γ} A u0`, the initial velocity of the corrector.
    pub fn theta0(&self, data: &InitialData) -> Result<SpectralVector> {
        self.check(&data.u0)?;
        self.check(&data.u1)?;
        let c0 = self.weighted_norm_sq(0.5, &data.u0)?.powf(data.gamma);
        Ok(SpectralVector(
            self.eigenvalues.iter().zip(data.u0.iter().zip(data.u1.iter())).map(|(l, (a, b))| b + c0 * l * a).collect(),
        ))
    }
}

pub(crate) fn mode_power(eigenvalue: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else if eigenvalue == 0.0 {
        0.0
    } else {
        eigenvalue.powf(alpha)
    }
}

pub(crate) fn weighted_norm_sq_raw(eigenvalues: &[f64], alpha: f64, coeffs: &[f64]) -> f64 {
    if alpha == 0.0 {
        return norm_sq(coeffs);
    }
    compensated_sum(eigenvalues.iter().zip(coeffs).map(|(l, c)| mode_power(*l, 2.0 * alpha) * c * c))
}

/// Coefficients of a vector of `H` in the eigenbasis of the operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpectralVector(pub Vec<f64>);

impl SpectralVector {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self(coeffs)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// Unit vector along mode `k` in an `n`-mode space.
    pub fn unit(n: usize, k: usize) -> Self {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm_sq(&self.0).sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.0)
    }

    pub fn dot(&self, other: &SpectralVector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| *c == 0.0)
    }

    pub fn sub(&self, other: &SpectralVector) -> SpectralVector {
        SpectralVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &SpectralVector) -> SpectralVector {
        SpectralVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, s: f64) -> SpectralVector {
        SpectralVector(self.0.iter().map(|a| a * s).collect())
    }

    /// Keeps only the listed modes.
    pub fn restrict(&self, modes: &[usize]) -> SpectralVector {
        let mut out = vec![0.0; self.len()];
        for &k in modes {
            out[k] = self.0[k];
        }
        SpectralVector(out)
    }
}

impl From<Vec<f64>> for SpectralVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Initial data `(u0, u1)` and the exponent `γ ≥ 1`.
///
/// Construction enforces `|A^{1/2}u0| > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub u0: SpectralVector,
    pub u1: SpectralVector,
    pub gamma: f64,
}

impl InitialData {
    pub fn new(op: &SpectralOperator, u0: SpectralVector, u1: SpectralVector, gamma: f64) -> Result<Self> {
        op.check(&u0)?;
        op.check(&u1)?;
        if !(gamma >= 1.0) || !gamma.is_finite() {
            return Err(Error::InvalidData(format!("gamma = {gamma} must be a finite real >= 1")));
        }
        if u0.iter().chain(u1.iter()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidData("coefficients must be finite".into()));
        }
        if op.weighted_norm_sq(0.5, &u0)? <= 0.0 {
            return Err(Error::InvalidData("degenerate data: |A^{1/2} u0| = 0".into()));
        }
        Ok(Self { u0, u1, gamma })
    }
}

/// How the lowest frequencies of `u0` and `u1` compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `ν < μ`, or `ν = μ` with `v0`, `v1` linearly independent.
    Deteriorated,
    /// `ν > μ`, or `u1 = 0`.
    Improved,
    /// `ν = μ` and `v1` is a multiple of `v0`.
    ImprovedCollinear,
    /// `u1 ≠ 0` but only on the kernel of `A`.
    KernelOnlyU1,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Deteriorated => "deteriorated",
            Regime::Improved => "improved",
            Regime::ImprovedCollinear => "improved-collinear",
            Regime::KernelOnlyU1 => "kernel-only-u1",
        }
    }

    /// Whether the slower rate `ν/μ ≤ 1` governs the difference.
    pub fn is_deteriorated(&self) -> bool {
        matches!(self, Regime::Deteriorated)
    }
}

/// Lowest frequencies carried by the initial data and the split
/// `u0 = v0 + w0`, `u1 = v1 + w1`. Kernel modes are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuNuProfile {
    pub mu: f64,
    pub nu: Option<f64>,
    pub v0: SpectralVector,
    pub w0: SpectralVector,
    pub v1: SpectralVector,
    pub w1: SpectralVector,
    /// `ν/μ` when `ν ≤ μ`.
    pub delta: Option<f64>,
    /// `min{2γ+1, ν*/μ}` in the improved regimes, where `ν*` is the smallest
    /// eigenvalue above `μ` carried by either datum (`2γ+1` if there is none).
    pub delta_improved: Option<f64>,
    pub regime: Regime,
    pub gamma: f64,
}

impl MuNuProfile {
    fn build(op: &SpectralOperator, data: &InitialData, threshold: f64) -> Result<Self> {
        let n = op.dim();
        let nonzero = |c: f64| c.abs() > threshold;
        let lowest = |v: &SpectralVector| {
            (0..n).filter(|&k| op.eigenvalue(k) > 0.0 && nonzero(v.0[k])).map(|k| op.eigenvalue(k)).next()
        };

        let mu = lowest(&data.u0)
            .ok_or_else(|| Error::InvalidData("u0 has no component outside the kernel above the threshold".into()))?;
        let nu = lowest(&data.u1);

        let split = |v: &SpectralVector, lambda: Option<f64>| -> (SpectralVector, SpectralVector) {
            let Some(lambda) = lambda else {
                return (SpectralVector::zeros(n), v.clone());
            };
            let at = op.modes_in(lambda..=lambda);
            let head = v.restrict(&at);
            (head.clone(), v.sub(&head))
        };
        let (v0, w0) = split(&data.u0, Some(mu));
        let (v1, w1) = split(&data.u1, nu);

        let u1_on_kernel = op.kernel_modes().iter().any(|&k| nonzero(data.u1.0[k]));
        let regime = match nu {
            None if u1_on_kernel => Regime::KernelOnlyU1,
            None => Regime::Improved,
            Some(nu) if nu > mu => Regime::Improved,
            Some(nu) if nu < mu => Regime::Deteriorated,
            Some(_) => {
                if collinear(&v0, &v1) {
                    Regime::ImprovedCollinear
                } else {
                    Regime::Deteriorated
                }
            }
        };

        let delta = nu.filter(|nu| *nu <= mu).map(|nu| nu / mu);
        let delta_improved = if regime.is_deteriorated() {
            None
        } else {
            let cap = 2.0 * data.gamma + 1.0;
            let next = (0..n)
                .filter(|&k| op.eigenvalue(k) > mu)
                .find(|&k| nonzero(data.u0.0[k]) || nonzero(data.u1.0[k]))
                .map(|k| op.eigenvalue(k));
            Some(next.map_or(cap, |nu_star| cap.min(nu_star / mu)))
        };

        Ok(Self { mu, nu, v0, w0, v1, w1, delta, delta_improved, regime, gamma: data.gamma })
    }

    /// The decay exponent `δ` of the difference: `ν/μ` when deteriorated, the
    /// improved exponent otherwise.
    pub fn effective_delta(&self) -> f64 {
        if self.regime.is_deteriorated() {
            self.delta.expect("deteriorated regime always has ν ≤ μ")
        } else {
            self.delta_improved.expect("improved regimes carry an improved exponent")
        }
    }

    /// The lower frequency that bounds the decay from below: `min(ν, μ)`, or `μ`
    /// when `ν` is undefined.
    pub fn nu_or_mu(&self) -> f64 {
        self.nu.map_or(self.mu, |nu| nu.min(self.mu))
    }
}

fn collinear(a: &SpectralVector, b: &SpectralVector) -> bool {
    let (aa, bb, ab) = (a.norm_sq(), b.norm_sq(), a.dot(b));
    // Gram determinant vanishes for dependent vectors.
    aa * bb - ab * ab <= 1e-12 * aa * bb
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn op(e: &[f64]) -> SpectralOperator {
        SpectralOperator::new(e.to_vec()).unwrap()
    }

    fn v(c: &[f64]) -> SpectralVector {
        SpectralVector::new(c.to_vec())
    }

    #[test]
    fn rejects_bad_operators() {
        assert!(SpectralOperator::new(vec![]).is_err());
        assert!(SpectralOperator::new(vec![-1.0]).is_err());
        assert!(SpectralOperator::new(vec![2.0, 1.0]).is_err());
        assert!(SpectralOperator::new(vec![f64::NAN]).is_err());
        assert!(SpectralOperator::new(vec![0.0, 0.0, 3.0]).is_ok());
    }

    #[test]
    fn apply_power_examples() {
        let any = op(&[0.0, 3.0]);
        assert_eq!(any.apply_power(0.0, &v(&[5.0, -2.0])).unwrap(), v(&[5.0, -2.0]));
        assert_eq!(op(&[4.0]).apply_power(0.5, &v(&[1.0])).unwrap(), v(&[2.0]));
        assert_eq!(op(&[1.0, 9.0]).apply_power(1.0, &v(&[2.0, 1.0])).unwrap(), v(&[2.0, 9.0]));
        // 0^α = 0 on kernel modes for α > 0
        assert_eq!(any.apply_power(0.5, &v(&[5.0, 0.0])).unwrap(), v(&[0.0, 0.0]));
    }

    #[test]
    fn apply_power_errors() {
        let o = op(&[1.0, 2.0]);
        assert_eq!(o.apply_power(1.0, &v(&[1.0])), Err(Error::DimensionMismatch { expected: 2, got: 1 }));
        assert!(o.apply_power(-1.0, &v(&[1.0, 1.0])).is_err());
        assert!(o.weighted_norm(0.5, &v(&[1.0, 1.0, 1.0])).is_err());
    }

    #[test]
    fn weighted_norm_examples() {
        assert_eq!(op(&[1.0, 1.0]).weighted_norm(0.0, &v(&[3.0, 4.0])).unwrap(), 5.0);
        assert_eq!(op(&[4.0]).weighted_norm(0.5, &v(&[1.0])).unwrap(), 2.0);
        let n = op(&[1.0, 4.0]).weighted_norm(0.5, &v(&[1.0, 1.0])).unwrap();
        assert!((n - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn initial_data_validation() {
        let o = op(&[0.0, 1.0]);
        assert!(InitialData::new(&o, v(&[1.0, 0.0]), v(&[0.0, 0.0]), 1.0).is_err());
        assert!(InitialData::new(&o, v(&[1.0, 1.0]), v(&[0.0, 0.0]), 0.5).is_err());
        assert!(InitialData::new(&o, v(&[1.0, 1.0]), v(&[0.0]), 1.0).is_err());
        assert!(InitialData::new(&o, v(&[1.0, 1.0]), v(&[0.0, 0.0]), 1.0).is_ok());
    }

    #[test]
    fn classify_deteriorated() {
        let o = op(&[1.0, 2.0]);
        let d = InitialData::new(&o, v(&[0.0, 1.0]), v(&[1.0, 0.0]), 1.0).unwrap();
        let p = o.classify(&d).unwrap();
        assert_eq!(p.mu, 2.0);
        assert_eq!(p.nu, Some(1.0));
        assert_eq!(p.delta, Some(0.5));
        assert_eq!(p.regime, Regime::Deteriorated);
        assert_eq!(p.v0, v(&[0.0, 1.0]));
        assert_eq!(p.v1, v(&[1.0, 0.0]));
        assert!(p.w0.is_zero() && p.w1.is_zero());
    }

    #[test]
    fn classify_improved_without_u1() {
        let o = op(&[1.0, 2.0]);
        let d = InitialData::new(&o, v(&[1.0, 1.0]), v(&[0.0, 0.0]), 1.0).unwrap();
        let p = o.classify(&d).unwrap();
        assert_eq!(p.regime, Regime::Improved);
        assert_eq!(p.nu, None);
        assert_eq!(p.delta, None);
        assert_eq!(p.delta_improved, Some(2.0));
    }

    #[test]
    fn classify_collinear_and_independent() {
        let o = op(&[1.0, 1.0, 5.0]);
        let d = InitialData::new(&o, v(&[1.0, 0.0, 0.0]), v(&[3.0, 0.0, 0.0]), 1.0).unwrap();
        let p = o.classify(&d).unwrap();
        assert_eq!(p.nu, Some(p.mu));
        assert_eq!(p.regime, Regime::ImprovedCollinear);
        assert_eq!(p.delta_improved, Some(3.0));

        // same eigenvalue, orthogonal directions of a double eigenspace
        let d = InitialData::new(&o, v(&[1.0, 0.0, 0.0]), v(&[0.0, 2.0, 0.0]), 1.0).unwrap();
        let p = o.classify(&d).unwrap();
        assert_eq!(p.regime, Regime::Deteriorated);
        assert_eq!(p.delta, Some(1.0));
    }

    #[test]
    fn classify_ignores_kernel() {
        let o = op(&[0.0, 1.0, 3.0]);
        let d = InitialData::new(&o, v(&[7.0, 0.0, 1.0]), v(&[1.0, 0.0, 0.0]), 1.0).unwrap();
        let p = o.classify(&d).unwrap();
        assert_eq!(p.mu, 3.0);
        assert_eq!(p.nu, None);
        assert_eq!(p.regime, Regime::KernelOnlyU1);
        assert_eq!(p.v0, v(&[0.0, 0.0, 1.0]));
        assert_eq!(p.w0, v(&[7.0, 0.0, 0.0]));
    }

    #[test]
    fn improved_delta_uses_next_frequency() {
        let o = op(&[1.0, 2.0, 10.0]);
        let d = InitialData::new(&o, v(&[1.0, 0.0, 1.0]), v(&[0.0, 1.0, 0.0]), 1.0).unwrap();
        let p = o.classify(&d).unwrap();
        assert_eq!(p.regime, Regime::Improved);
        assert_eq!(p.delta_improved, Some(2.0));
        let d = InitialData::new(&o, v(&[1.0, 0.0, 0.0]), v(&[0.0, 0.0, 1.0]), 1.0).unwrap();
        assert_eq!(o.classify(&d).unwrap().delta_improved, Some(3.0));
    }

    #[test]
    fn threshold_filters_small_components() {
        let o = op(&[1.0, 2.0]);
        let d = InitialData::new(&o, v(&[1e-9, 1.0]), v(&[0.0, 0.0]), 1.0).unwrap();
        assert_eq!(o.classify(&d).unwrap().mu, 1.0);
        assert_eq!(o.classify_with_threshold(&d, 1e-6).unwrap().mu, 2.0);
    }

    #[test]
    fn theta0_examples() {
        let o = op(&[1.0]);
        let d = InitialData::new(&o, v(&[1.0]), v(&[0.0]), 1.0).unwrap();
        assert_eq!(o.theta0(&d).unwrap(), v(&[1.0]));

        let o = op(&[2.0]);
        let d = InitialData::new(&o, v(&[1.0]), v(&[1.0]), 1.0).unwrap();
        assert_eq!(o.theta0(&d).unwrap(), v(&[5.0]));

        // well-prepared data: u1 = -|A^{1/2}u0|^{2γ} A u0
        let o = op(&[1.0, 3.0]);
        let u0 = v(&[0.5, 0.25]);
        let s: f64 = 0.25 + 3.0 * 0.0625;
        let c0 = s.powf(1.5);
        let u1 = v(&[-c0 * 0.5, -c0 * 3.0 * 0.25]);
        let d = InitialData::new(&o, u0, u1, 1.5).unwrap();
        assert!(o.theta0(&d).unwrap().iter().all(|x| x.abs() < 1e-15));
    }

    fn op_and_vec() -> impl Strategy<Value = (SpectralOperator, SpectralVector)> {
        (1usize..6).prop_flat_map(|n| {
            (prop::collection::vec(0.0f64..20.0, n), prop::collection::vec(-5.0f64..5.0, n)).prop_map(|(mut e, c)| {
                e.sort_by(|a, b| a.partial_cmp(b).unwrap());
                (SpectralOperator::new(e).unwrap(), SpectralVector::new(c))
            })
        })
    }

    proptest! {
        #[test]
        fn powers_compose((o, x) in op_and_vec(), a in 0.0f64..2.0, b in 0.0f64..2.0) {
            let lhs = o.apply_power(a, &o.apply_power(b, &x).unwrap()).unwrap();
            let rhs = o.apply_power(a + b, &x).unwrap();
            for k in o.modes_in(1e-12..) {
                let scale = 1.0 + rhs.0[k].abs();
                prop_assert!((lhs.0[k] - rhs.0[k]).abs() <= 1e-10 * scale);
            }
        }

        #[test]
        fn coercivity_above_nu((o, x) in op_and_vec(), pick in 0usize..6) {
            let nu = o.eigenvalue(pick % o.dim());
            let y = x.restrict(&o.modes_in(nu..));
            let lhs = o.weighted_norm_sq(0.5, &y).unwrap();
            prop_assert!(lhs >= nu * y.norm_sq() * (1.0 - 1e-12));
        }

        #[test]
        fn classify_invariant_under_equal_mode_permutation(
            a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, d in -3.0f64..3.0, top in 0.1f64..4.0,
        ) {
            prop_assume!(top.abs() > 1e-6);
            let o = SpectralOperator::new(vec![1.0, 1.0, 2.0]).unwrap();
            let make = |x: [f64; 3], y: [f64; 3]| InitialData::new(&o, v(&x), v(&y), 1.0).unwrap();
            let p = o.classify(&make([a, b, top], [c, d, 0.0])).unwrap();
            let q = o.classify(&make([b, a, top], [d, c, 0.0])).unwrap();
            prop_assert_eq!(p.mu, q.mu);
            prop_assert_eq!(p.nu, q.nu);
            prop_assert_eq!(p.regime, q.regime);
            prop_assert_eq!(p.delta, q.delta);
        }
    }
}
