//! One-dimensional distributions: weighted empirical measures and Gaussians.
//!
//! [`EmpiricalDist1D`] is the canonical form used everywhere else in the
//! crate. Points are sorted and unique, weights are strictly positive and sum
//! to one, so two distributions are equal exactly when their point and weight
//! vectors are equal.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sums within this distance of one are renormalized; anything further off is rejected.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// A finitely supported probability measure on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDist", into = "RawDist")]
pub struct EmpiricalDist1D {
    points: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDist {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawDist> for EmpiricalDist1D {
    type Error = Error;

    fn try_from(raw: RawDist) -> Result<Self> {
        Self::from_weighted(&raw.points, &raw.weights)
    }
}

impl From<EmpiricalDist1D> for RawDist {
    fn from(d: EmpiricalDist1D) -> Self {
        Self {
            points: d.points,
            weights: d.weights,
        }
    }
}

impl EmpiricalDist1D {
    /// Uniform-weight distribution over `values`; repeated values merge into one point.
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        let w = 1.0 / values.len() as f64;
        Self::from_weighted(values, &vec![w; values.len()])
    }

    /// Builds a distribution from arbitrary (point, weight) pairs.
    ///
    /// Points are sorted, duplicates merged and zero-weight points dropped.
    /// The weight sum must lie within [`NORMALIZATION_TOLERANCE`] of one and is
    /// then renormalized exactly.
    pub fn from_weighted(points: &[f64], weights: &[f64]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySample);
        }
        if points.len() != weights.len() {
            return Err(Error::LengthMismatch(format!(
                "{} points vs {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points.iter().chain(weights).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if let Some(w) = weights.iter().find(|w| **w < 0.0) {
            return Err(Error::InvalidWeights(format!("negative weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::WeightsNotNormalized(total));
        }

        let mut pairs: Vec<(f64, f64)> = points
            .iter()
            .copied()
            .zip(weights.iter().copied())
            .filter(|(_, w)| *w > 0.0)
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut merged_points: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut merged_weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (x, w) in pairs {
            match merged_points.last() {
                // -0.0 and 0.0 are the same point
                Some(last) if *last == x => *merged_weights.last_mut().unwrap() += w,
                _ => {
                    merged_points.push(x);
                    merged_weights.push(w);
                }
            }
        }
        let total: f64 = merged_weights.iter().sum();
        merged_weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self::from_canonical(merged_points, merged_weights))
    }

    /// Same support and weights within `tol` of each other.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.points == other.points
            && self
                .weights
                .iter()
                .zip(&other.weights)
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    /// Dirac mass at `x`.
    pub fn point_mass(x: f64) -> Result<Self> {
        Self::from_samples(&[x])
    }

    fn from_canonical(points: Vec<f64>, weights: Vec<f64>) -> Self {
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        // The last level is exactly one so that quantile(1) is always the maximum.
        *cumulative.last_mut().unwrap() = 1.0;
        Self {
            points,
            weights,
            cumulative,
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Cumulative weights `F(points[i])`, ending at exactly 1.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| x * w)
            .sum()
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        *self.points.last().unwrap()
    }

    /// Right-continuous CDF: total weight of points `<= z`.
    pub fn cdf(&self, z: f64) -> f64 {
        let idx = self.points.partition_point(|x| *x <= z);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    /// Generalized inverse CDF, `inf { z : F(z) >= t }`, for `t` in `(0, 1]`.
    pub fn quantile(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::QuantileOutOfRange(t));
        }
        Ok(self.quantile_unchecked(t))
    }

    pub(crate) fn quantile_unchecked(&self, t: f64) -> f64 {
        let idx = self.cumulative.partition_point(|c| *c < t);
        self.points[idx.min(self.points.len() - 1)]
    }

    /// Draws `n` points with probability equal to their weights.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::EmptyDraw);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..n)
            .map(|_| {
                // random() is in [0, 1); flip it into (0, 1]
                let t = 1.0 - rng.random::<f64>();
                self.quantile_unchecked(t)
            })
            .collect())
    }
}

/// Normal distribution `N(mean, variance)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianDist1D {
    mean: f64,
    variance: f64,
}

impl GaussianDist1D {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() {
            return Err(Error::NonFinite);
        }
        if variance <= 0.0 {
            return Err(Error::NonPositiveVariance(variance));
        }
        Ok(Self { mean, variance })
    }

    pub fn standard() -> Self {
        Self {
            mean: 0.0,
            variance: 1.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::EmptyDraw);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = self.std_dev();
        Ok((0..n)
            .map(|_| self.mean + sd * rng.sample::<f64, _>(StandardNormal))
            .collect())
    }
}
