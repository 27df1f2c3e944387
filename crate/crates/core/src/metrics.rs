//! Distances between one-dimensional distributions.
//!
//! All transport distances are computed exactly: between two step quantile
//! functions the integrand is piecewise constant, so the integral is a finite
//! sum over the merged breakpoints. The LP-based oracle is kept for testing.

use serde::{Deserialize, Serialize};

use crate::dist1d::{EmpiricalDist1D, GaussianDist1D};
use crate::error::{Error, Result};
use crate::lp;

/// Largest support size accepted by the transport oracle.
pub const ORACLE_SUPPORT_LIMIT: usize = 64;

fn check_order(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::OrderBelowOne(p));
    }
    Ok(())
}

/// `W_p` through the quantile representation `(∫₀¹ |F_a⁻¹(t) − F_b⁻¹(t)|^p dt)^{1/p}`.
pub fn wasserstein_p(a: &EmpiricalDist1D, b: &EmpiricalDist1D, p: f64) -> Result<f64> {
    check_order(p)?;
    Ok(wasserstein_p_pow(a, b, p).powf(1.0 / p))
}

/// `W_p^p`, the integral before the final root.
pub(crate) fn wasserstein_p_pow(a: &EmpiricalDist1D, b: &EmpiricalDist1D, p: f64) -> f64 {
    let (ca, cb) = (a.cumulative(), b.cumulative());
    let (xa, xb) = (a.points(), b.points());
    let (mut i, mut j) = (0, 0);
    let mut prev = 0.0;
    let mut acc = 0.0;
    while i < xa.len() && j < xb.len() {
        let next = ca[i].min(cb[j]);
        let d = (xa[i] - xb[j]).abs();
        if d > 0.0 {
            acc += (next - prev) * d.powf(p);
        }
        prev = next;
        if ca[i] == next {
            i += 1;
        }
        if cb[j] == next {
            j += 1;
        }
    }
    acc
}

/// Walks the union of both supports in increasing order, yielding
/// `(z, F_a(z), F_b(z))` at every support point.
fn merged_cdf_walk(a: &EmpiricalDist1D, b: &EmpiricalDist1D) -> Vec<(f64, f64, f64)> {
    let (xa, xb) = (a.points(), b.points());
    let (ca, cb) = (a.cumulative(), b.cumulative());
    let mut out = Vec::with_capacity(xa.len() + xb.len());
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0, 0.0);
    while i < xa.len() || j < xb.len() {
        let z = match (xa.get(i), xb.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        if i < xa.len() && xa[i] == z {
            fa = ca[i];
            i += 1;
        }
        if j < xb.len() && xb[j] == z {
            fb = cb[j];
            j += 1;
        }
        out.push((z, fa, fb));
    }
    out
}

/// `W_1 = ∫ |F_a(z) − F_b(z)| dz`, integrated over the merged breakpoints.
pub fn wasserstein_1_cdf(a: &EmpiricalDist1D, b: &EmpiricalDist1D) -> f64 {
    merged_cdf_walk(a, b)
        .windows(2)
        .map(|w| (w[0].1 - w[0].2).abs() * (w[1].0 - w[0].0))
        .sum()
}

/// Kolmogorov–Smirnov distance `sup_z |F_a(z) − F_b(z)|`.
///
/// The CDF difference is a right-continuous step function that only jumps at
/// support points, so its left limits coincide with values at the previous
/// breakpoint and checking every breakpoint is exact.
pub fn ks_distance(a: &EmpiricalDist1D, b: &EmpiricalDist1D) -> f64 {
    merged_cdf_walk(a, b)
        .into_iter()
        .map(|(_, fa, fb)| (fa - fb).abs())
        .fold(0.0, f64::max)
}

/// Sorted union of both supports.
pub fn breakpoint_grid(a: &EmpiricalDist1D, b: &EmpiricalDist1D) -> Vec<f64> {
    merged_cdf_walk(a, b).into_iter().map(|(z, _, _)| z).collect()
}

/// Lower estimate of `W_1` from its Kantorovich dual with `grid` evenly spaced
/// nodes spanning the merged support.
pub fn wasserstein_1_dual_estimate(
    a: &EmpiricalDist1D,
    b: &EmpiricalDist1D,
    grid: usize,
) -> Result<f64> {
    if grid < 2 {
        return Err(Error::DegenerateGrid(grid));
    }
    let lo = a.min().min(b.min());
    let hi = a.max().max(b.max());
    let nodes: Vec<f64> = (0..grid)
        .map(|k| lo + (hi - lo) * k as f64 / (grid - 1) as f64)
        .collect();
    wasserstein_1_dual_on_nodes(a, b, &nodes)
}

/// Dual estimate over potentials that are piecewise linear on `nodes`.
///
/// A potential with slopes `s_k ∈ [−1, 1]` between consecutive nodes (and flat
/// outside them) is 1-Lipschitz; its mean gap is linear in the slopes, so the
/// optimum takes `s_k = sign(c_k)` where `c_k` is the gap contributed by the
/// ramp over segment `k`. The ramp expectations are computed directly from the
/// support points, independently of the CDF route.
pub fn wasserstein_1_dual_on_nodes(
    a: &EmpiricalDist1D,
    b: &EmpiricalDist1D,
    nodes: &[f64],
) -> Result<f64> {
    if nodes.len() < 2 {
        return Err(Error::DegenerateGrid(nodes.len()));
    }
    if nodes.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut nodes = nodes.to_vec();
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let ramp_mean = |d: &EmpiricalDist1D, left: f64, width: f64| -> f64 {
        d.points()
            .iter()
            .zip(d.weights())
            .map(|(x, w)| w * (x - left).clamp(0.0, width))
            .sum::<f64>()
    };
    Ok(nodes
        .windows(2)
        .map(|seg| {
            let width = seg[1] - seg[0];
            (ramp_mean(a, seg[0], width) - ramp_mean(b, seg[0], width)).abs()
        })
        .sum())
}

/// Closed-form `W_2` between two univariate Gaussians: `√((m_a − m_b)² + (σ_a − σ_b)²)`.
pub fn gaussian_w2(a: &GaussianDist1D, b: &GaussianDist1D) -> f64 {
    let dm = a.mean() - b.mean();
    let ds = a.std_dev() - b.std_dev();
    (dm * dm + ds * ds).sqrt()
}

/// `W_2` barycenter: its quantile function is the weighted average of the
/// input quantile functions.
pub fn barycenter_1d(dists: &[EmpiricalDist1D], weights: &[f64]) -> Result<EmpiricalDist1D> {
    if dists.is_empty() {
        return Err(Error::EmptySample);
    }
    if dists.len() != weights.len() {
        return Err(Error::LengthMismatch(format!(
            "{} distributions vs {} weights",
            dists.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidWeights(format!("{weights:?}")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::WeightsNotNormalized(total));
    }

    let mut levels: Vec<f64> = dists
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .flat_map(|(d, _)| d.cumulative().iter().copied())
        .collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();

    let mut points = Vec::with_capacity(levels.len());
    let mut masses = Vec::with_capacity(levels.len());
    let mut prev = 0.0;
    for t in levels {
        let x: f64 = dists
            .iter()
            .zip(weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(d, w)| w * d.quantile_unchecked(t))
            .sum();
        points.push(x);
        masses.push(t - prev);
        prev = t;
    }
    EmpiricalDist1D::from_weighted(&points, &masses)
}

/// `H₀₋₁(A) = 1 − max_a Pr(A = a) = min(α, 1 − α)` for binary `A`, with `α = Pr(A = 0)`.
pub fn zero_one_entropy(alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::NotAProbability(alpha));
    }
    Ok(alpha.min(1.0 - alpha))
}

/// A transport plan between two finitely supported distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub source: Vec<f64>,
    pub target: Vec<f64>,
    /// `mass[i][j]` moves from `source[i]` to `target[j]`.
    pub mass: Vec<Vec<f64>>,
}

impl Coupling {
    pub fn row_sums(&self) -> Vec<f64> {
        self.mass.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.target.len())
            .map(|j| self.mass.iter().map(|r| r[j]).sum())
            .collect()
    }

    /// `Σ γ_ij |x_i − y_j|^p`.
    pub fn cost(&self, p: f64) -> f64 {
        let mut acc = 0.0;
        for (i, row) in self.mass.iter().enumerate() {
            for (j, m) in row.iter().enumerate() {
                acc += m * (self.source[i] - self.target[j]).abs().powf(p);
            }
        }
        acc
    }

    /// Whether the marginals match `a` and `b` within `tol`.
    pub fn has_marginals(&self, a: &EmpiricalDist1D, b: &EmpiricalDist1D, tol: f64) -> bool {
        let rows_ok = self
            .row_sums()
            .iter()
            .zip(a.weights())
            .all(|(s, w)| (s - w).abs() <= tol);
        let cols_ok = self
            .column_sums()
            .iter()
            .zip(b.weights())
            .all(|(s, w)| (s - w).abs() <= tol);
        rows_ok && cols_ok && self.mass.iter().flatten().all(|m| *m >= -tol)
    }
}

/// How [`transport_lp_oracle`] finds its coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleMethod {
    /// North-west-corner matching of the sorted supports; optimal in 1D for convex costs.
    #[default]
    MonotoneMatching,
    /// Dense simplex on the full transportation LP.
    DenseLp,
    /// Monotone matching, verified against the dense LP (errors on mismatch above 1e-8).
    CrossChecked,
}

/// Optimal transport by explicit coupling search. Test-scale only.
///
/// Returns `(W_p, optimal coupling)`.
pub fn transport_lp_oracle(
    a: &EmpiricalDist1D,
    b: &EmpiricalDist1D,
    p: f64,
    method: OracleMethod,
) -> Result<(f64, Coupling)> {
    check_order(p)?;
    let biggest = a.len().max(b.len());
    if biggest > ORACLE_SUPPORT_LIMIT {
        return Err(Error::OracleTooLarge(biggest, ORACLE_SUPPORT_LIMIT));
    }
    match method {
        OracleMethod::MonotoneMatching => {
            let c = monotone_coupling(a, b);
            Ok((c.cost(p).powf(1.0 / p), c))
        }
        OracleMethod::DenseLp => dense_lp_coupling(a, b, p),
        OracleMethod::CrossChecked => {
            let c = monotone_coupling(a, b);
            let monotone = c.cost(p).powf(1.0 / p);
            let (lp, _) = dense_lp_coupling(a, b, p)?;
            if (monotone - lp).abs() > 1e-8 {
                return Err(Error::OracleMismatch { monotone, lp });
            }
            Ok((monotone, c))
        }
    }
}

fn monotone_coupling(a: &EmpiricalDist1D, b: &EmpiricalDist1D) -> Coupling {
    let mut mass = vec![vec![0.0; b.len()]; a.len()];
    let (wa, wb) = (a.weights(), b.weights());
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (wa[0], wb[0]);
    loop {
        let m = ra.min(rb);
        mass[i][j] += m;
        ra -= m;
        rb -= m;
        // Residuals below this are float dust from the subtraction.
        let a_done = ra <= 1e-15;
        let b_done = rb <= 1e-15;
        if a_done {
            i += 1;
        }
        if b_done {
            j += 1;
        }
        if i == a.len() || j == b.len() {
            break;
        }
        if a_done {
            ra = wa[i];
        }
        if b_done {
            rb = wb[j];
        }
    }
    Coupling {
        source: a.points().to_vec(),
        target: b.points().to_vec(),
        mass,
    }
}

fn dense_lp_coupling(a: &EmpiricalDist1D, b: &EmpiricalDist1D, p: f64) -> Result<(f64, Coupling)> {
    let cost: Vec<Vec<f64>> = a
        .points()
        .iter()
        .map(|x| b.points().iter().map(|y| (x - y).abs().powf(p)).collect())
        .collect();
    let sol = lp::solve_transport(a.weights(), b.weights(), &cost)?;
    let n = b.len();
    let mass = (0..a.len())
        .map(|i| sol.x[i * n..(i + 1) * n].to_vec())
        .collect();
    Ok((
        sol.objective.max(0.0).powf(1.0 / p),
        Coupling {
            source: a.points().to_vec(),
            target: b.points().to_vec(),
            mass,
        },
    ))
}

/// `W_p` between two uniform point clouds in `ℝ^d` with Euclidean ground
/// cost, solved as a dense LP. Used for joint `(X, Y)` distributions.
pub fn wasserstein_p_point_clouds(xs: &[Vec<f64>], ys: &[Vec<f64>], p: f64) -> Result<f64> {
    check_order(p)?;
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::EmptySample);
    }
    let biggest = xs.len().max(ys.len());
    if biggest > ORACLE_SUPPORT_LIMIT {
        return Err(Error::OracleTooLarge(biggest, ORACLE_SUPPORT_LIMIT));
    }
    let dim = xs[0].len();
    if xs.iter().chain(ys).any(|v| v.len() != dim) {
        return Err(Error::LengthMismatch("point dimensions differ".into()));
    }
    let cost: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| {
            ys.iter()
                .map(|y| {
                    let d2: f64 = x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum();
                    d2.sqrt().powf(p)
                })
                .collect()
        })
        .collect();
    let supply = vec![1.0 / xs.len() as f64; xs.len()];
    let demand = vec![1.0 / ys.len() as f64; ys.len()];
    let sol = lp::solve_transport(&supply, &demand, &cost)?;
    Ok(sol.objective.max(0.0).powf(1.0 / p))
}
