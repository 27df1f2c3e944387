//! Desk-scale property suites, runnable outside the test harness.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    fair_price_comparison, joint_error_floor, ks_from_w1, mean_gap_bounds, measure_group_errors,
    parity_error_floor,
};
use crate::dist1d::EmpiricalDist1D;
use crate::metrics::{
    barycenter_1d, breakpoint_grid, ks_distance, transport_lp_oracle, wasserstein_1_cdf,
    wasserstein_1_dual_on_nodes, wasserstein_p, OracleMethod,
};
use crate::nn::{finite_difference_check, Activation, FeedForwardModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Metrics,
    Bounds,
    Nn,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "metrics" => Ok(Suite::Metrics),
            "bounds" => Ok(Suite::Bounds),
            "nn" => Ok(Suite::Nn),
            "all" => Ok(Suite::All),
            other => Err(Error::InvalidArgument(format!("unknown suite {other:?}"))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::Metrics => "metrics",
            Suite::Bounds => "bounds",
            Suite::Nn => "nn",
            Suite::All => "all",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    /// Not run because the time budget ran out first.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub suite: Suite,
    pub name: String,
    pub outcome: Outcome,
    pub cases: usize,
    /// Worst observed value of the checked quantity, or the first failure.
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub seed: u64,
    pub budget_seconds: f64,
    pub elapsed_seconds: f64,
    pub properties: Vec<PropertyResult>,
}

impl VerifyReport {
    /// True when every property ran and passed.
    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| p.outcome == Outcome::Pass)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.properties {
            let tag = match p.outcome {
                Outcome::Pass => "PASS",
                Outcome::Fail => "FAIL",
                Outcome::Skipped => "SKIP",
            };
            writeln!(
                f,
                "{tag} {}::{} ({} cases, {:.2}s) {}",
                p.suite, p.name, p.cases, p.seconds, p.detail
            )?;
        }
        write!(
            f,
            "{} in {:.1}s of {:.0}s budget",
            if self.passed() { "passed" } else { "FAILED" },
            self.elapsed_seconds,
            self.budget_seconds
        )
    }
}

/// Result of one property: `Ok(detail)` or `Err(reason)`, plus case count.
type Check = (usize, std::result::Result<String, String>);

type Property = (Suite, &'static str, fn(&mut ChaCha8Rng) -> Check);

fn properties() -> Vec<Property> {
    vec![
        (Suite::Metrics, "wasserstein_matches_lp_oracle", wasserstein_matches_lp_oracle),
        (Suite::Metrics, "w1_cdf_matches_quantile_route", w1_cdf_matches_quantile_route),
        (Suite::Metrics, "metric_axioms", metric_axioms),
        (Suite::Metrics, "w1_dual_matches_primal", w1_dual_matches_primal),
        (Suite::Metrics, "barycenter_on_geodesic", barycenter_on_geodesic),
        (Suite::Bounds, "parity_floor_under_exact_parity", parity_floor_under_exact_parity),
        (Suite::Bounds, "mean_gap_floors_below_wasserstein", mean_gap_floors_below_wasserstein),
        (Suite::Bounds, "joint_floor_matches_grid_minimum", joint_floor_matches_grid_minimum),
        (Suite::Bounds, "price_with_a_dominates", price_with_a_dominates),
        (Suite::Bounds, "ks_within_w1_ceiling", ks_within_w1_ceiling),
        (Suite::Nn, "gradients_match_finite_differences", gradients_match_finite_differences),
        (Suite::Nn, "lipschitz_sandwich", lipschitz_sandwich),
        (Suite::Nn, "clipping_caps_parameters", clipping_caps_parameters),
        (Suite::Nn, "checkpoint_round_trip", checkpoint_round_trip),
    ]
}

/// Runs `suite`. Properties that would start after `budget` has elapsed are
/// reported as skipped, which counts as a failure.
pub fn run_suite(suite: Suite, budget: Duration, seed: u64) -> VerifyReport {
    let start = Instant::now();
    let mut results = Vec::new();
    for (k, (s, name, check)) in properties().into_iter().enumerate() {
        if suite != Suite::All && suite != s {
            continue;
        }
        if start.elapsed() > budget {
            results.push(PropertyResult {
                suite: s,
                name: name.into(),
                outcome: Outcome::Skipped,
                cases: 0,
                detail: "budget exhausted".into(),
                seconds: 0.0,
            });
            continue;
        }
        let t = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let (cases, res) = check(&mut rng);
        let (outcome, detail) = match res {
            Ok(d) => (Outcome::Pass, d),
            Err(d) => (Outcome::Fail, d),
        };
        results.push(PropertyResult {
            suite: s,
            name: name.into(),
            outcome,
            cases,
            detail,
            seconds: t.elapsed().as_secs_f64(),
        });
    }
    VerifyReport {
        suite,
        seed,
        budget_seconds: budget.as_secs_f64(),
        elapsed_seconds: start.elapsed().as_secs_f64(),
        properties: results,
    }
}

/// Random discrete distribution with up to `max_support` atoms. Half the
/// atoms land on a coarse grid so ties across distributions are common.
fn random_dist(rng: &mut ChaCha8Rng, max_support: usize) -> EmpiricalDist1D {
    let k = rng.random_range(1..=max_support);
    let points: Vec<f64> = (0..k)
        .map(|_| {
            let v: f64 = rng.random_range(-3.0..3.0);
            if rng.random_bool(0.5) { (v * 2.0).round() / 2.0 } else { v }
        })
        .collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    EmpiricalDist1D::from_weighted(&points, &weights).expect("valid random distribution")
}

fn worst(name: &str, worst: f64, tol: f64) -> std::result::Result<String, String> {
    if worst <= tol {
        Ok(format!("max {name} {worst:.2e} <= {tol:.0e}"))
    } else {
        Err(format!("max {name} {worst:.2e} > {tol:.0e}"))
    }
}

fn fail(e: Error) -> String {
    format!("error: {e}")
}

fn wasserstein_matches_lp_oracle(rng: &mut ChaCha8Rng) -> Check {
    let n = 200;
    let mut max_err: f64 = 0.0;
    for i in 0..n {
        let (a, b) = (random_dist(rng, 20), random_dist(rng, 20));
        let p = [1.0, 2.0, 3.0][i % 3];
        let fast = match wasserstein_p(&a, &b, p) {
            Ok(v) => v,
            Err(e) => return (i, Err(fail(e))),
        };
        let lp = match transport_lp_oracle(&a, &b, p, OracleMethod::DenseLp) {
            Ok((v, _)) => v,
            Err(e) => return (i, Err(fail(e))),
        };
        max_err = max_err.max((fast - lp).abs());
    }
    (n, worst("|W_p - LP|", max_err, 1e-8))
}

fn w1_cdf_matches_quantile_route(rng: &mut ChaCha8Rng) -> Check {
    let n = 500;
    let mut max_err: f64 = 0.0;
    for _ in 0..n {
        let (a, b) = (random_dist(rng, 20), random_dist(rng, 20));
        let q = wasserstein_p(&a, &b, 1.0).unwrap_or(f64::NAN);
        max_err = max_err.max((wasserstein_1_cdf(&a, &b) - q).abs());
    }
    (n, worst("|W1_cdf - W1|", max_err, 1e-10))
}

fn metric_axioms(rng: &mut ChaCha8Rng) -> Check {
    let n = 200;
    let tol = 1e-9;
    for i in 0..n {
        let (a, b, c) = (random_dist(rng, 12), random_dist(rng, 12), random_dist(rng, 12));
        for p in [1.0, 2.0, 3.0] {
            let d = |x: &EmpiricalDist1D, y: &EmpiricalDist1D| wasserstein_p(x, y, p).unwrap_or(f64::NAN);
            let (ab, ba, ac, cb, aa) = (d(&a, &b), d(&b, &a), d(&a, &c), d(&c, &b), d(&a, &a));
            if !(ab >= 0.0 && (ab - ba).abs() <= tol && aa <= tol && ab <= ac + cb + tol) {
                return (i, Err(format!("W_{p} axioms fail: ab {ab}, ba {ba}, aa {aa}, ac+cb {}", ac + cb)));
            }
        }
        let (ab, ba) = (ks_distance(&a, &b), ks_distance(&b, &a));
        let tri = ks_distance(&a, &c) + ks_distance(&c, &b);
        if !((0.0..=1.0).contains(&ab) && ab == ba && ks_distance(&a, &a) == 0.0 && ab <= tri + tol) {
            return (i, Err(format!("KS axioms fail: ab {ab}, ba {ba}, ac+cb {tri}")));
        }
    }
    (n, Ok("symmetry, identity, triangle hold".into()))
}

fn w1_dual_matches_primal(rng: &mut ChaCha8Rng) -> Check {
    let n = 200;
    let (mut gap_excess, mut dual_err): (f64, f64) = (f64::NEG_INFINITY, 0.0);
    for i in 0..n {
        let (a, b) = (random_dist(rng, 20), random_dist(rng, 20));
        let w1 = wasserstein_1_cdf(&a, &b);
        gap_excess = gap_excess.max((a.mean() - b.mean()).abs() - w1);
        let grid = breakpoint_grid(&a, &b);
        let dual = if grid.len() < 2 {
            0.0
        } else {
            match wasserstein_1_dual_on_nodes(&a, &b, &grid) {
                Ok(v) => v,
                Err(e) => return (i, Err(fail(e))),
            }
        };
        dual_err = dual_err.max((dual - w1).abs());
    }
    let res = worst("|mean gap| - W1", gap_excess, 1e-10)
        .and_then(|g| worst("|dual - primal|", dual_err, 1e-8).map(|d| format!("{g}; {d}")));
    (n, res)
}

fn barycenter_on_geodesic(rng: &mut ChaCha8Rng) -> Check {
    let n = 200;
    let mut max_err: f64 = 0.0;
    for i in 0..n {
        let (a, b) = (random_dist(rng, 15), random_dist(rng, 15));
        let t: f64 = rng.random_range(0.0..=1.0);
        let nu = match barycenter_1d(&[a.clone(), b.clone()], &[t, 1.0 - t]) {
            Ok(v) => v,
            Err(e) => return (i, Err(fail(e))),
        };
        let ab = wasserstein_p(&a, &b, 2.0).unwrap_or(f64::NAN);
        let an = wasserstein_p(&a, &nu, 2.0).unwrap_or(f64::NAN);
        let nb = wasserstein_p(&nu, &b, 2.0).unwrap_or(f64::NAN);
        max_err = max_err
            .max((an - (1.0 - t) * ab).abs())
            .max((nb - t * ab).abs());
    }
    (n, worst("geodesic defect", max_err, 1e-9))
}

/// Group targets plus a prediction vector with identical group output
/// multisets: a constant, or a function of features shared by both groups.
fn exact_parity_instance(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, Vec<u8>) {
    let m = rng.random_range(1..=15);
    let shared: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let constant = rng.random_bool(0.5);
    let (w, c): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let mut pred = Vec::new();
    let mut target = Vec::new();
    let mut groups = Vec::new();
    let shift: f64 = rng.random_range(-1.0..1.0);
    for g in 0..2u8 {
        for x in &shared {
            pred.push(if constant { c } else { (w * x + c).clamp(-1.0, 1.0) });
            let y: f64 = rng.random_range(-1.0..1.0) + if g == 1 { shift } else { 0.0 };
            target.push(y.clamp(-1.0, 1.0));
            groups.push(g);
        }
    }
    (pred, target, groups)
}

fn group_dist(values: &[f64], groups: &[u8], g: u8) -> EmpiricalDist1D {
    let v: Vec<f64> = values.iter().zip(groups).filter(|(_, a)| **a == g).map(|(v, _)| *v).collect();
    EmpiricalDist1D::from_samples(&v).expect("nonempty group")
}

fn parity_floor_under_exact_parity(rng: &mut ChaCha8Rng) -> Check {
    let n = 1000;
    let mut min_slack = f64::INFINITY;
    for i in 0..n {
        let (pred, target, groups) = exact_parity_instance(rng);
        let p = [1.0, 2.0, 3.0][i % 3];
        let (y0, y1) = (group_dist(&target, &groups, 0), group_dist(&target, &groups, 1));
        let floor = parity_error_floor(&y0, &y1, p);
        let errs = measure_group_errors(&pred, &target, &groups, p);
        match (floor, errs) {
            (Ok(f), Ok(e)) => min_slack = min_slack.min(e.sum() - f),
            (Err(e), _) | (_, Err(e)) => return (i, Err(fail(e))),
        }
    }
    (n, worst("negative slack", -min_slack, 1e-6))
}

fn mean_gap_floors_below_wasserstein(rng: &mut ChaCha8Rng) -> Check {
    let n = 300;
    let mut excess = f64::NEG_INFINITY;
    for _ in 0..n {
        let (a, b) = (random_dist(rng, 20), random_dist(rng, 20));
        let mg = mean_gap_bounds(&a, &b);
        let w1 = wasserstein_p(&a, &b, 1.0).unwrap_or(f64::NAN);
        let w2 = wasserstein_p(&a, &b, 2.0).unwrap_or(f64::NAN);
        // the MSE floor is implied by W_2: ε0² + ε1² ≥ (ε0 + ε1)²/2 ≥ W_2²/2
        excess = excess.max(mg.mae - w1).max(mg.mse - 0.5 * w2 * w2);
    }
    (n, worst("floor excess", excess, 1e-10))
}

fn joint_floor_matches_grid_minimum(rng: &mut ChaCha8Rng) -> Check {
    let n = 100;
    let mut max_err: f64 = 0.0;
    for i in 0..n {
        let (a, b) = (random_dist(rng, 10), random_dist(rng, 10));
        let alpha: f64 = rng.random_range(0.01..0.99);
        let w = wasserstein_p(&a, &b, 2.0).unwrap_or(f64::NAN);
        let floor = match joint_error_floor(&a, &b, alpha, 2.0) {
            Ok(v) => v,
            Err(e) => return (i, Err(fail(e))),
        };
        // minimize alpha·e0 + (1 − alpha)·e1 over e0 + e1 >= w on a grid of e0
        let steps = 2000;
        let grid_min = (0..=steps)
            .map(|k| {
                let e0 = w * k as f64 / steps as f64;
                alpha * e0 + (1.0 - alpha) * (w - e0)
            })
            .fold(f64::INFINITY, f64::min);
        max_err = max_err.max((floor - grid_min).abs());
    }
    (n, worst("|floor - grid min|", max_err, 1e-9))
}

fn price_with_a_dominates(rng: &mut ChaCha8Rng) -> Check {
    let n = 1000;
    let mut deficit = f64::NEG_INFINITY;
    for i in 0..n {
        let (a, b) = (random_dist(rng, 15), random_dist(rng, 15));
        let alpha: f64 = rng.random_range(0.01..0.99);
        match fair_price_comparison(&a, &b, alpha) {
            Ok(c) => deficit = deficit.max(c.price_without_a - c.price_with_a),
            Err(e) => return (i, Err(fail(e))),
        }
    }
    (n, worst("without - with", deficit, 1e-9))
}

/// Quantile of the triangular distribution on `[lo, hi]` with mode `mode`.
fn triangular_quantile(t: f64, lo: f64, mode: f64, hi: f64) -> f64 {
    let f = (mode - lo) / (hi - lo);
    if t < f {
        lo + (t * (hi - lo) * (mode - lo)).sqrt()
    } else {
        hi - ((1.0 - t) * (hi - lo) * (hi - mode)).sqrt()
    }
}

/// Midpoint-quantile discretization of a triangular law and its density bound.
fn fine_triangular(rng: &mut ChaCha8Rng, m: usize) -> (EmpiricalDist1D, f64) {
    let lo: f64 = rng.random_range(-1.0..0.5);
    let hi = lo + rng.random_range(0.2..1.5);
    let mode = rng.random_range(lo..=hi);
    let pts: Vec<f64> = (0..m)
        .map(|k| triangular_quantile((k as f64 + 0.5) / m as f64, lo, mode, hi))
        .collect();
    (EmpiricalDist1D::from_samples(&pts).expect("finite"), 2.0 / (hi - lo))
}

fn ks_within_w1_ceiling(rng: &mut ChaCha8Rng) -> Check {
    let n = 50;
    let mut excess = f64::NEG_INFINITY;
    for i in 0..n {
        let (a, ca) = fine_triangular(rng, 10_000);
        let (b, cb) = fine_triangular(rng, 10_000);
        let c = ca.max(cb);
        let ceiling = match ks_from_w1(wasserstein_1_cdf(&a, &b), c) {
            Ok(v) => v,
            Err(e) => return (i, Err(fail(e))),
        };
        excess = excess.max(ks_distance(&a, &b) - ceiling);
    }
    (n, worst("KS - ceiling", excess, 0.02))
}

fn random_architecture(rng: &mut ChaCha8Rng) -> Vec<usize> {
    let depth = rng.random_range(1..=4);
    let mut sizes = vec![rng.random_range(1..=6)];
    sizes.extend((0..depth).map(|_| rng.random_range(1..=8)));
    sizes
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

fn gradients_match_finite_differences(rng: &mut ChaCha8Rng) -> Check {
    let n = 20;
    let (mut max_rel, mut max_abs): (f64, f64) = (0.0, 0.0);
    for i in 0..n {
        let sizes = random_architecture(rng);
        let out = if rng.random_bool(0.5) { Activation::Relu } else { Activation::Identity };
        let model = match FeedForwardModel::init_with_output(&sizes, rng.random(), None, out) {
            Ok(m) => m,
            Err(e) => return (i, Err(fail(e))),
        };
        let batch = rng.random_range(1..=5);
        let x = random_matrix(rng, batch, sizes[0]);
        let g = random_matrix(rng, batch, *sizes.last().unwrap());
        match finite_difference_check(&model, x.view(), g.view(), 1e-5, 1e-7) {
            Ok(r) if r.passes(1e-4, 1e-7) => {
                max_rel = max_rel.max(r.max_rel_error);
                max_abs = max_abs.max(r.max_abs_error);
            }
            Ok(r) => return (i, Err(format!("{sizes:?}: {r:?}"))),
            Err(e) => return (i, Err(fail(e))),
        }
    }
    (n, Ok(format!("max relative error {max_rel:.2e}, max absolute error {max_abs:.2e}")))
}

fn lipschitz_sandwich(rng: &mut ChaCha8Rng) -> Check {
    let n = 20;
    for i in 0..n {
        let sizes = random_architecture(rng);
        let model = FeedForwardModel::init(&sizes, rng.random(), None).expect("valid sizes");
        let upper = model.lipschitz_upper();
        let lower = match model.lipschitz_lower_estimate(200, rng.random()) {
            Ok(v) => v,
            Err(e) => return (i, Err(fail(e))),
        };
        if lower > upper * (1.0 + 1e-9) {
            return (i, Err(format!("{sizes:?}: lower {lower} > upper {upper}")));
        }
    }
    (n, Ok("lower estimate <= spectral product".into()))
}

fn clipping_caps_parameters(rng: &mut ChaCha8Rng) -> Check {
    let n = 20;
    for i in 0..n {
        let sizes = random_architecture(rng);
        let c: f64 = rng.random_range(0.01..2.0);
        let mut model = FeedForwardModel::init(&sizes, rng.random(), Some(c)).expect("valid sizes");
        let mut params = model.params_flat();
        for v in &mut params {
            *v *= 10.0 * rng.random_range(0.0..1.0);
        }
        model.set_params_flat(&params).expect("same length");
        if let Err(e) = model.clip_weights() {
            return (i, Err(fail(e)));
        }
        // |w_ij| <= c bounds each spectral norm by the Frobenius norm c·√(in·out)
        let ceiling: f64 = model
            .layers()
            .iter()
            .map(|l| c * ((l.inputs() * l.outputs()) as f64).sqrt())
            .product();
        if model.max_abs_param() > c || model.lipschitz_upper() > ceiling * (1.0 + 1e-9) {
            return (i, Err(format!("{sizes:?}: clip {c} not enforced")));
        }
    }
    (n, Ok("parameters and Lipschitz ceiling capped".into()))
}

fn checkpoint_round_trip(rng: &mut ChaCha8Rng) -> Check {
    let n = 20;
    for i in 0..n {
        let sizes = random_architecture(rng);
        let model = FeedForwardModel::init(&sizes, rng.random(), Some(0.5)).expect("valid sizes");
        let json = match serde_json::to_string(&model.to_checkpoint()) {
            Ok(s) => s,
            Err(e) => return (i, Err(e.to_string())),
        };
        let back = serde_json::from_str(&json)
            .map_err(|e| e.to_string())
            .and_then(|ck| FeedForwardModel::from_checkpoint(&ck).map_err(|e| e.to_string()));
        match back {
            Ok(m) if m == model => {}
            Ok(_) => return (i, Err(format!("{sizes:?}: checkpoint changed the model"))),
            Err(e) => return (i, Err(e)),
        }
    }
    (n, Ok("bit-exact".into()))
}
