//! Lower bounds on group errors of fair regressors, and certificates that
//! compare each bound against measured quantities.
//!
//! Conventions:
//! - `ε_{p,a}` is the ℓ_p error `(E_a |ŷ − y|^p)^{1/p}` on group `a`.
//! - `alpha` is `Pr(A = 0)`.
//! - The joint error is `alpha·ε_0 + (1 − alpha)·ε_1`, linear in the ℓ_p errors
//!   themselves rather than their p-th powers.

use serde::{Deserialize, Serialize};

use crate::dist1d::EmpiricalDist1D;
use crate::error::{Error, Result};
use crate::metrics::{barycenter_1d, wasserstein_p, zero_one_entropy};

/// Per-group ℓ_p errors of one predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupErrors {
    pub eps0: f64,
    pub eps1: f64,
    pub p: f64,
    /// `Pr(A = 0)`.
    pub alpha: f64,
}

impl GroupErrors {
    pub fn sum(&self) -> f64 {
        self.eps0 + self.eps1
    }

    /// `alpha·ε_0 + (1 − alpha)·ε_1`.
    pub fn joint(&self) -> f64 {
        self.alpha * self.eps0 + (1.0 - self.alpha) * self.eps1
    }

    pub fn disparity(&self) -> f64 {
        (self.eps0 - self.eps1).abs()
    }
}

/// Balanced error rate, the unweighted mean of the two group errors.
pub fn balanced_error(g: &GroupErrors) -> f64 {
    0.5 * (g.eps0 + g.eps1)
}

fn check_p(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::OrderBelowOne(p));
    }
    Ok(())
}

/// Measures `ε_{p,0}` and `ε_{p,1}` of `predictions` against `targets`.
pub fn measure_group_errors(
    predictions: &[f64],
    targets: &[f64],
    groups: &[u8],
    p: f64,
) -> Result<GroupErrors> {
    check_p(p)?;
    if predictions.len() != targets.len() || targets.len() != groups.len() {
        return Err(Error::LengthMismatch(format!(
            "{} predictions, {} targets, {} groups",
            predictions.len(),
            targets.len(),
            groups.len()
        )));
    }
    let mut acc = [0.0f64; 2];
    let mut count = [0usize; 2];
    for ((yh, y), &a) in predictions.iter().zip(targets).zip(groups) {
        if a > 1 {
            return Err(Error::InvalidArgument(format!("group label {a} is not 0 or 1")));
        }
        acc[a as usize] += (yh - y).abs().powf(p);
        count[a as usize] += 1;
    }
    for a in 0..2 {
        if count[a] == 0 {
            return Err(Error::EmptyGroup(a as u8));
        }
    }
    let eps = |a: usize| (acc[a] / count[a] as f64).powf(1.0 / p);
    Ok(GroupErrors {
        eps0: eps(0),
        eps1: eps(1),
        p,
        alpha: count[0] as f64 / groups.len() as f64,
    })
}

/// Floor on `ε_{p,0} + ε_{p,1}` for any predictor satisfying statistical
/// parity: `W_p` between the group target distributions.
pub fn parity_error_floor(y0: &EmpiricalDist1D, y1: &EmpiricalDist1D, p: f64) -> Result<f64> {
    wasserstein_p(y0, y1, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanGapBounds {
    /// Floor on the sum of group mean absolute errors.
    pub mae: f64,
    /// Floor on `ε²_{2,0} + ε²_{2,1}`.
    pub mse: f64,
}

/// Mean-gap floors for parity-satisfying predictors: MAE sum is at least the
/// group mean gap, MSE sum at least half its square.
pub fn mean_gap_bounds(y0: &EmpiricalDist1D, y1: &EmpiricalDist1D) -> MeanGapBounds {
    let gap = (y0.mean() - y1.mean()).abs();
    MeanGapBounds {
        mae: gap,
        mse: 0.5 * gap * gap,
    }
}

/// Floor on the joint error: `H₀₋₁(A) · W_p(y0, y1)`.
pub fn joint_error_floor(
    y0: &EmpiricalDist1D,
    y1: &EmpiricalDist1D,
    alpha: f64,
    p: f64,
) -> Result<f64> {
    Ok(zero_one_entropy(alpha)? * wasserstein_p(y0, y1, p)?)
}

/// High-probability floor on the population ℓ_1 error sum from samples of size `n`:
/// `W_1(ŷ0, ŷ1) − (2·c1 + √(2 ln(2/δ)))·√(1/n)`.
///
/// The result is not clamped; a non-positive value is a vacuous certificate.
pub fn finite_sample_floor(
    y0_hat: &EmpiricalDist1D,
    y1_hat: &EmpiricalDist1D,
    n: usize,
    delta: f64,
    c1: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    if !(c1 > 0.0) {
        return Err(Error::InvalidArgument(format!("c1 must be positive, got {c1}")));
    }
    Ok(wasserstein_p(y0_hat, y1_hat, 1.0)? - finite_sample_correction(n, delta, c1))
}

/// `(2·c1 + √(2 ln(2/δ)))·√(1/n)`.
pub fn finite_sample_correction(n: usize, delta: f64, c1: f64) -> f64 {
    (2.0 * c1 + (2.0 * (2.0 / delta).ln()).sqrt()) * (1.0 / n as f64).sqrt()
}

/// Inputs to the excess-risk floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessRiskInputs {
    /// Error of the reference (optimal) predictor on group 0.
    pub opt_err0: f64,
    pub opt_err1: f64,
    /// `W_p` between the reference predictors' output distributions.
    pub opt_pred_dist: f64,
    /// `W_p` between the fair predictor's group output distributions.
    pub eps_sp: f64,
}

/// Floor on the excess-risk sum `r_0 + r_1` of a predictor whose group
/// outputs are within `eps_sp` in `W_p`:
/// `opt_pred_dist − 2(opt_err0 + opt_err1) − eps_sp`.
pub fn excess_risk_floor(inputs: &ExcessRiskInputs) -> Result<f64> {
    let ExcessRiskInputs {
        opt_err0,
        opt_err1,
        opt_pred_dist,
        eps_sp,
    } = *inputs;
    if [opt_err0, opt_err1, opt_pred_dist, eps_sp]
        .iter()
        .any(|v| !v.is_finite() || *v < 0.0)
    {
        return Err(Error::InvalidArgument(format!("{inputs:?} has a negative field")));
    }
    Ok(opt_pred_dist - 2.0 * (opt_err0 + opt_err1) - eps_sp)
}

/// Statistical-parity level implied by a `W_p` gap of `eps_sp` between
/// predictor outputs with density bound `c`: `2√(c·eps_sp)`.
pub fn excess_risk_sp_level(eps_sp: f64, density_bound_c: f64) -> Result<f64> {
    ks_from_w1(eps_sp, density_bound_c)
}

/// KS distance ceiling from `W_1` when one side has density at most `c`:
/// `2√(c·w1)`.
pub fn ks_from_w1(w1: f64, density_bound_c: f64) -> Result<f64> {
    if !(density_bound_c > 0.0) {
        return Err(Error::NonPositiveDensityBound(density_bound_c));
    }
    if !(w1 >= 0.0) {
        return Err(Error::InvalidArgument(format!("W1 must be nonnegative, got {w1}")));
    }
    Ok(2.0 * (density_bound_c * w1).sqrt())
}

/// Accuracy-disparity ceiling for a `rho`-Lipschitz predictor:
/// `√(ρ² + 1) · W_1` between the joint `(X, Y)` group distributions.
pub fn accuracy_parity_ceiling(rho: f64, w1_joint: f64) -> Result<f64> {
    if !(rho >= 0.0) || !(w1_joint >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rho and W1 must be nonnegative, got {rho}, {w1_joint}"
        )));
    }
    Ok((rho * rho + 1.0).sqrt() * w1_joint)
}

/// Statistical-parity level of `h ∘ g` when the group representations are
/// within `w1_repr` in `W_1` and `h` is `rho`-Lipschitz: `2√(C·ρ·ε)`.
pub fn representation_sp_level(w1_repr: f64, rho: f64, density_bound_c: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::InvalidArgument(format!("rho must be nonnegative, got {rho}")));
    }
    ks_from_w1(w1_repr * rho, density_bound_c)
}

/// Price of fairness under ℓ_2 with and without access to the protected attribute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceComparison {
    /// `H₀₋₁(A) · W_2(y0, y1)`.
    pub price_without_a: f64,
    /// `√(α·W₂²(y0, ν*) + (1 − α)·W₂²(y1, ν*))` with `ν*` the barycenter.
    pub price_with_a: f64,
}

/// Compares the two prices of fairness; `price_with_a >= price_without_a` always.
pub fn fair_price_comparison(
    y0: &EmpiricalDist1D,
    y1: &EmpiricalDist1D,
    alpha: f64,
) -> Result<PriceComparison> {
    let entropy = zero_one_entropy(alpha)?;
    let price_without_a = entropy * wasserstein_p(y0, y1, 2.0)?;
    let nu = barycenter_1d(&[y0.clone(), y1.clone()], &[alpha, 1.0 - alpha])?;
    let d0 = wasserstein_p(y0, &nu, 2.0)?;
    let d1 = wasserstein_p(y1, &nu, 2.0)?;
    let price_with_a = (alpha * d0 * d0 + (1.0 - alpha) * d1 * d1).sqrt();
    Ok(PriceComparison {
        price_without_a,
        price_with_a,
    })
}

/// Heuristic density bound for a sample: the tallest bar of a
/// Freedman–Diaconis histogram. Not a guarantee.
pub fn estimate_density_bound(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::EmptySample);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let q = |t: f64| sorted[((t * (n - 1.0)).round() as usize).min(sorted.len() - 1)];
    let iqr = q(0.75) - q(0.25);
    let range = sorted[sorted.len() - 1] - sorted[0];
    if range == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mut width = 2.0 * iqr / n.cbrt();
    if !(width > 0.0) {
        width = range / n.sqrt().ceil();
    }
    let bins = ((range / width).ceil() as usize).max(1);
    let mut counts = vec![0usize; bins];
    for v in &sorted {
        let idx = (((v - sorted[0]) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let tallest = *counts.iter().max().unwrap() as f64;
    Ok(tallest / (n * width))
}

/// Outcome of checking one inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateStatus {
    Satisfied,
    Violated,
    /// The bound is at most zero and says nothing.
    Vacuous,
    /// The premise of the inequality (e.g. exact statistical parity) does not
    /// hold for this predictor, so a negative slack is not a contradiction.
    NotApplicable,
}

/// One instance of a bound: `measured_lhs >= lower_bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub name: String,
    pub lower_bound: f64,
    pub measured_lhs: f64,
    pub slack: f64,
    pub vacuous: bool,
    pub status: CertificateStatus,
    pub inputs_digest: String,
    /// `lower_bound` converted to the target's original units, when meaningful.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bound_original: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured_lhs_original: Option<f64>,
}

impl BoundCertificate {
    /// Builds a certificate. `premise_holds = false` turns a would-be
    /// violation into [`CertificateStatus::NotApplicable`]; `tolerance`
    /// absorbs float noise.
    pub fn new(
        name: impl Into<String>,
        lower_bound: f64,
        measured_lhs: f64,
        premise_holds: bool,
        tolerance: f64,
        inputs_digest: impl Into<String>,
    ) -> Self {
        let slack = measured_lhs - lower_bound;
        let vacuous = lower_bound <= 0.0;
        let status = if vacuous {
            CertificateStatus::Vacuous
        } else if slack >= -tolerance {
            CertificateStatus::Satisfied
        } else if premise_holds {
            CertificateStatus::Violated
        } else {
            CertificateStatus::NotApplicable
        };
        Self {
            name: name.into(),
            lower_bound,
            measured_lhs,
            slack,
            vacuous,
            status,
            inputs_digest: inputs_digest.into(),
            lower_bound_original: None,
            measured_lhs_original: None,
        }
    }

    /// Certificate for an upper bound `measured <= ceiling`, stored with
    /// `lower_bound = measured` and `measured_lhs = ceiling`. It is vacuous
    /// when the ceiling reaches `trivial_ceiling`, the value that holds for free.
    pub fn ceiling(
        name: impl Into<String>,
        ceiling: f64,
        measured: f64,
        trivial_ceiling: f64,
        premise_holds: bool,
        tolerance: f64,
        inputs_digest: impl Into<String>,
    ) -> Self {
        let mut cert = Self::new(name, measured, ceiling, premise_holds, tolerance, inputs_digest);
        cert.vacuous = ceiling >= trivial_ceiling;
        cert.status = if cert.vacuous {
            CertificateStatus::Vacuous
        } else if cert.slack >= -tolerance {
            CertificateStatus::Satisfied
        } else if premise_holds {
            CertificateStatus::Violated
        } else {
            CertificateStatus::NotApplicable
        };
        cert
    }

    /// Fills the original-unit fields by multiplying with `factor`.
    pub fn with_original_units(mut self, factor: f64) -> Self {
        self.lower_bound_original = Some(self.lower_bound * factor);
        self.measured_lhs_original = Some(self.measured_lhs * factor);
        self
    }

    pub fn is_violated(&self) -> bool {
        self.status == CertificateStatus::Violated
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ks_distance;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn delta(x: f64) -> EmpiricalDist1D {
        EmpiricalDist1D::point_mass(x).unwrap()
    }

    fn uniform(values: &[f64]) -> EmpiricalDist1D {
        EmpiricalDist1D::from_samples(values).unwrap()
    }

    #[test]
    fn parity_floor_examples() {
        assert_eq!(parity_error_floor(&delta(0.0), &delta(1.0), 1.0).unwrap(), 1.0);
        let d = uniform(&[0.2, -0.4, 0.9]);
        for p in [1.0, 2.0, 3.5] {
            assert_eq!(parity_error_floor(&d, &d, p).unwrap(), 0.0);
        }
        // Y = c·A with c = 3
        assert_abs_diff_eq!(
            parity_error_floor(&delta(0.0), &delta(3.0), 2.0).unwrap(),
            3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn mean_gap_examples() {
        let b = mean_gap_bounds(&delta(0.0), &delta(1.0));
        assert_eq!((b.mae, b.mse), (1.0, 0.5));
        let d = uniform(&[1.0, 2.0]);
        let b = mean_gap_bounds(&d, &d);
        assert_eq!((b.mae, b.mse), (0.0, 0.0));

        let g0 = crate::GaussianDist1D::new(-1.0, 1.0).unwrap();
        let g1 = crate::GaussianDist1D::new(1.0, 1.0).unwrap();
        let y0 = uniform(&g0.sample(100_000, 11).unwrap());
        let y1 = uniform(&g1.sample(100_000, 12).unwrap());
        assert!((mean_gap_bounds(&y0, &y1).mae - 2.0).abs() < 0.05);
    }

    #[test]
    fn joint_floor_examples() {
        assert_eq!(joint_error_floor(&delta(0.0), &delta(1.0), 0.5, 1.0).unwrap(), 0.5);
        assert_abs_diff_eq!(
            joint_error_floor(&delta(0.0), &delta(1.0), 0.99, 1.0).unwrap(),
            0.01,
            epsilon = 1e-12
        );
        let floor = joint_error_floor(&delta(0.0), &delta(2.0), 0.25, 2.0).unwrap();
        assert_abs_diff_eq!(floor, 0.5, epsilon = 1e-12);

        // Oracle: minimize α·ε0 + (1−α)·ε1 over a grid with ε0 + ε1 >= W = 2.
        let alpha = 0.25;
        let mut best = f64::INFINITY;
        for i in 0..=400 {
            for j in 0..=400 {
                let (e0, e1) = (i as f64 / 100.0, j as f64 / 100.0);
                if e0 + e1 >= 2.0 - 1e-12 {
                    best = best.min(alpha * e0 + (1.0 - alpha) * e1);
                }
            }
        }
        assert_abs_diff_eq!(best, floor, epsilon = 1e-12);
    }

    #[test]
    fn finite_sample_examples() {
        let big = finite_sample_floor(&delta(0.0), &delta(1.0), 1_000_000_000_000, 0.05, 1.0).unwrap();
        assert!((big - 1.0).abs() < 1e-5);

        let d = uniform(&[0.1, 0.5]);
        assert!(finite_sample_floor(&d, &d, 500, 0.1, 1.0).unwrap() < 0.0);

        let expected = 1.0 - (2.0 + (2.0 * 40f64.ln()).sqrt()) * 0.1;
        assert_abs_diff_eq!(expected, 0.5284, epsilon = 1e-4);
        assert_abs_diff_eq!(
            finite_sample_floor(&delta(0.0), &delta(1.0), 100, 0.05, 1.0).unwrap(),
            expected,
            epsilon = 1e-12
        );

        for bad in [0.0, 1.0, -0.5, 2.0] {
            assert!(finite_sample_floor(&delta(0.0), &delta(1.0), 100, bad, 1.0).is_err());
        }
    }

    #[test]
    fn excess_risk_examples() {
        let f = |e0, e1, w, eps| {
            excess_risk_floor(&ExcessRiskInputs {
                opt_err0: e0,
                opt_err1: e1,
                opt_pred_dist: w,
                eps_sp: eps,
            })
            .unwrap()
        };
        assert_eq!(f(0.0, 0.0, 1.7, 0.0), 1.7);
        assert_abs_diff_eq!(f(0.1, 0.1, 2.0, 0.2), 1.4, epsilon = 1e-12);
        assert_eq!(f(0.0, 0.0, 0.0, 0.0), 0.0);
        assert!(excess_risk_floor(&ExcessRiskInputs {
            opt_err0: -1.0,
            opt_err1: 0.0,
            opt_pred_dist: 0.0,
            eps_sp: 0.0
        })
        .is_err());
        assert_abs_diff_eq!(excess_risk_sp_level(0.25, 1.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    /// Noisy two-group instance: with f_a* the group means, the excess-risk
    /// sum of a constant (exactly fair) predictor clears the floor.
    #[test]
    fn excess_risk_floor_on_noisy_instance() {
        let g = crate::GaussianDist1D::new(0.0, 0.04).unwrap();
        let noise0 = g.sample(4000, 1).unwrap();
        let noise1 = g.sample(4000, 2).unwrap();
        let (m0, m1) = (-0.3, 0.4);
        let y0: Vec<f64> = noise0.iter().map(|e| m0 + e).collect();
        let y1: Vec<f64> = noise1.iter().map(|e| m1 + e).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (mu0, mu1) = (mean(&y0), mean(&y1));
        let err = |v: &[f64], c: f64| (v.iter().map(|y| (y - c).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
        let (opt0, opt1) = (err(&y0, mu0), err(&y1, mu1));
        let constant = 0.5 * (mu0 + mu1);
        let r = err(&y0, constant) - opt0 + err(&y1, constant) - opt1;
        let floor = excess_risk_floor(&ExcessRiskInputs {
            opt_err0: opt0,
            opt_err1: opt1,
            opt_pred_dist: (mu0 - mu1).abs(),
            eps_sp: 0.0,
        })
        .unwrap();
        assert!(r >= floor, "r = {r}, floor = {floor}");
    }

    #[test]
    fn ks_from_w1_examples() {
        assert_eq!(ks_from_w1(0.0, 3.0).unwrap(), 0.0);
        assert_eq!(ks_from_w1(1.0, 1.0).unwrap(), 2.0);
        assert_eq!(ks_from_w1(0.25, 1.0).unwrap(), 1.0);
        assert!(matches!(ks_from_w1(1.0, 0.0), Err(Error::NonPositiveDensityBound(_))));

        // Uniform[0,1] vs Uniform[0.25,1.25] on a fine grid: KS = 0.25 <= 1.
        let n = 10_000;
        let u0: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let u1: Vec<f64> = u0.iter().map(|x| x + 0.25).collect();
        let ks = ks_distance(&uniform(&u0), &uniform(&u1));
        assert_abs_diff_eq!(ks, 0.25, epsilon = 1e-3);
        assert!(ks <= 1.0);
    }

    #[test]
    fn accuracy_parity_examples() {
        assert_eq!(accuracy_parity_ceiling(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(accuracy_parity_ceiling(7.0, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            accuracy_parity_ceiling(1.0, 2.0).unwrap(),
            2.0 * 2f64.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn representation_sp_examples() {
        assert_eq!(representation_sp_level(0.0, 5.0, 2.0).unwrap(), 0.0);
        assert_eq!(representation_sp_level(1.0, 1.0, 1.0).unwrap(), 2.0);
        assert_abs_diff_eq!(representation_sp_level(0.09, 4.0, 1.0).unwrap(), 1.2, epsilon = 1e-12);
        assert!(representation_sp_level(0.1, 1.0, -1.0).is_err());
    }

    #[test]
    fn price_examples() {
        let pc = fair_price_comparison(&delta(0.0), &delta(2.0), 0.5).unwrap();
        assert_abs_diff_eq!(pc.price_without_a, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pc.price_with_a, 1.0, epsilon = 1e-12);

        let d = uniform(&[0.1, 0.3]);
        let pc = fair_price_comparison(&d, &d, 0.3).unwrap();
        assert_eq!(pc.price_without_a, 0.0);
        assert_abs_diff_eq!(pc.price_with_a, 0.0, epsilon = 1e-12);

        let pc = fair_price_comparison(&delta(0.0), &delta(2.0), 0.9).unwrap();
        assert_abs_diff_eq!(pc.price_without_a, 0.2, epsilon = 1e-12);
        let expected = (0.9f64 * 0.04 + 0.1 * 3.24).sqrt();
        assert_abs_diff_eq!(expected, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(pc.price_with_a, expected, epsilon = 1e-12);
    }

    #[test]
    fn group_error_examples() {
        let g = measure_group_errors(&[0.0, 0.0], &[0.0, 1.0], &[0, 1], 1.0).unwrap();
        assert_eq!((g.eps0, g.eps1, g.alpha), (0.0, 1.0, 0.5));

        let y = [0.3, -0.2, 0.9, 0.1];
        let g = measure_group_errors(&y, &y, &[0, 1, 1, 0], 2.0).unwrap();
        assert_eq!((g.eps0, g.eps1), (0.0, 0.0));

        // Y = A, X uniform on {0,1} per group, constant predictor 0.5
        let targets = [0.0, 0.0, 1.0, 1.0];
        let groups = [0, 0, 1, 1];
        let g = measure_group_errors(&[0.5; 4], &targets, &groups, 1.0).unwrap();
        assert_eq!(g.sum(), 1.0);

        assert!(matches!(
            measure_group_errors(&[0.0, 1.0], &[0.0, 1.0], &[0, 0], 1.0),
            Err(Error::EmptyGroup(1))
        ));
        assert!(measure_group_errors(&[0.0], &[0.0, 1.0], &[0, 1], 1.0).is_err());
    }

    #[test]
    fn balanced_error_examples() {
        let g = |e0, e1| GroupErrors { eps0: e0, eps1: e1, p: 1.0, alpha: 0.5 };
        assert_eq!(balanced_error(&g(1.0, 0.0)), 0.5);
        assert_eq!(balanced_error(&g(0.0, 0.0)), 0.0);
        assert_abs_diff_eq!(balanced_error(&g(0.6, 0.2)), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn certificate_status_and_json() {
        let ok = BoundCertificate::new("floor", 1.0, 1.2, true, 1e-9, "toy");
        assert_eq!(ok.status, CertificateStatus::Satisfied);
        assert_abs_diff_eq!(ok.slack, 0.2, epsilon = 1e-15);
        let bad = BoundCertificate::new("floor", 1.0, 0.5, true, 1e-9, "toy");
        assert!(bad.is_violated());
        let na = BoundCertificate::new("floor", 1.0, 0.5, false, 1e-9, "toy");
        assert_eq!(na.status, CertificateStatus::NotApplicable);
        let vac = BoundCertificate::new("floor", -0.1, 0.0, true, 1e-9, "toy");
        assert!(vac.vacuous);
        assert_eq!(vac.status, CertificateStatus::Vacuous);

        let json = serde_json::to_value(&ok).unwrap();
        for key in ["name", "lower_bound", "measured_lhs", "slack", "vacuous", "inputs_digest"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn density_bound_heuristic_is_reasonable_for_uniform() {
        let n = 20_000;
        let u: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let c = estimate_density_bound(&u).unwrap();
        assert!((c - 1.0).abs() < 0.1, "estimated {c}");
    }

    fn arb_dist() -> impl Strategy<Value = EmpiricalDist1D> {
        prop::collection::vec(-1.0f64..1.0, 1..25)
            .prop_map(|v| EmpiricalDist1D::from_samples(&v).unwrap())
    }

    proptest! {
        #[test]
        fn mean_gap_never_exceeds_w1(a in arb_dist(), b in arb_dist()) {
            let w1 = parity_error_floor(&a, &b, 1.0).unwrap();
            prop_assert!(mean_gap_bounds(&a, &b).mae <= w1 + 1e-10);
        }

        #[test]
        fn joint_floor_matches_case_analysis(a in arb_dist(), b in arb_dist(), alpha in 0.0f64..=1.0, p in 1.0f64..3.0) {
            // The joint error α·ε0 + (1−α)·ε1 under ε0 + ε1 >= W is minimized at a
            // vertex: all error on the lighter group.
            let w = wasserstein_p(&a, &b, p).unwrap();
            let vertex_min = (alpha * w).min((1.0 - alpha) * w);
            let floor = joint_error_floor(&a, &b, alpha, p).unwrap();
            prop_assert!((floor - vertex_min).abs() <= 1e-10);
        }

        #[test]
        fn price_with_access_dominates(a in arb_dist(), b in arb_dist(), alpha in 0.0f64..=1.0) {
            let pc = fair_price_comparison(&a, &b, alpha).unwrap();
            prop_assert!(pc.price_with_a >= pc.price_without_a - 1e-9);
        }
    }
}
