//! Training loops: a plain MLP regressor and the adversarially regularized
//! encoder/predictor trained by gradient descent-ascent, plus evaluation.
//!
//! The adversarial objective on a batch is
//! `balanced_error(h∘g) + τ·|mean_0 f(g(x)) − mean_1 f(g(x))|`,
//! where the clipped critic `f` is pushed to maximize the gap.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{balanced_error, measure_group_errors, GroupErrors};
use crate::data::GroupedDataset;
use crate::dist1d::EmpiricalDist1D;
use crate::error::{Error, Result};
use crate::metrics::ks_distance;
use crate::nn::FeedForwardModel;
use crate::optim::{Optimizer, OptimizerKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Weight of the critic gap in the objective.
    pub tau: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Box constraint for predictor and critic parameters. `None` means
    /// `tau` when `tau > 0`, and no clipping otherwise.
    pub clip_bound: Option<f64>,
    pub adversary_steps: usize,
    /// Loss order.
    pub p: f64,
    pub seed: u64,
    /// Minimize the mean of the two group errors instead of the pooled loss.
    pub balanced: bool,
    pub optimizer: OptimizerKind,
    /// Hidden widths; the last one is the representation size.
    pub hidden: Vec<usize>,
    pub adversary_hidden: usize,
}

impl TrainConfig {
    pub fn baseline(seed: u64) -> Self {
        Self {
            tau: 0.0,
            learning_rate: 1.0,
            epochs: 200,
            batch_size: 256,
            clip_bound: None,
            adversary_steps: 1,
            p: 2.0,
            seed,
            balanced: false,
            optimizer: OptimizerKind::adadelta(),
            hidden: vec![50, 20],
            adversary_hidden: 10,
        }
    }

    pub fn adversarial(tau: f64, seed: u64) -> Self {
        Self {
            tau,
            balanced: true,
            ..Self::baseline(seed)
        }
    }

    pub fn effective_clip(&self) -> Option<f64> {
        self.clip_bound
            .or(if self.tau > 0.0 { Some(self.tau) } else { None })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be >= 0, got {}", self.tau));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be > 0, got {}", self.learning_rate));
        }
        if self.batch_size == 0 || self.adversary_steps == 0 || self.adversary_hidden == 0 {
            return bad("batch size, adversary steps and adversary width must be >= 1".into());
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad(format!("hidden widths must be nonempty and positive, got {:?}", self.hidden));
        }
        if let Some(c) = self.clip_bound {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("clip bound must be > 0, got {c}"));
            }
        }
        if self.p.is_nan() || self.p < 1.0 {
            return Err(Error::OrderBelowOne(self.p));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub objective: f64,
    pub balanced_error: f64,
    /// Critic score gap on the training set; absent for the baseline.
    pub gap_estimate: Option<f64>,
    pub ks_disparity: f64,
}

#[derive(Debug, Clone)]
pub struct BaselineRun {
    pub model: FeedForwardModel,
    pub log: Vec<EpochRecord>,
}

#[derive(Debug, Clone)]
pub struct AdversarialRun {
    pub encoder: FeedForwardModel,
    pub predictor: FeedForwardModel,
    pub adversary: FeedForwardModel,
    pub log: Vec<EpochRecord>,
}

// Independent streams for model init, critic init and batching.
const STREAM_MODEL: u64 = 1;
const STREAM_ADVERSARY: u64 = 2;
const STREAM_BATCHES: u64 = 3;

fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mini-batches that each contain both groups: every group is shuffled and
/// cut into the same number of near-equal pieces.
fn stratified_batches(groups: &[Vec<usize>; 2], batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let n = groups[0].len() + groups[1].len();
    let k = n
        .div_ceil(batch_size)
        .max(1)
        .min(groups[0].len())
        .min(groups[1].len());
    let mut shuffled = groups.clone();
    for g in &mut shuffled {
        g.shuffle(rng);
    }
    (0..k)
        .map(|b| {
            shuffled
                .iter()
                .flat_map(|g| {
                    let len = g.len();
                    g[b * len / k..(b + 1) * len / k].iter().copied()
                })
                .collect()
        })
        .collect()
}

/// Loss value and its gradient with respect to each prediction.
///
/// Pooled: `mean |e|^p / p`. Balanced: `½(ε_0 + ε_1)` with `ε_a = (mean_a |e|^p)^{1/p}`.
fn loss_and_grad(pred: &[f64], target: &[f64], groups: &[u8], p: f64, balanced: bool) -> (f64, Vec<f64>) {
    let n = pred.len();
    let err: Vec<f64> = pred.iter().zip(target).map(|(a, b)| a - b).collect();
    // d|e|^p/de
    let dpow = |e: f64| p * e.abs().powf(p - 1.0) * e.signum() * (e != 0.0) as u8 as f64;
    if !balanced {
        let loss = err.iter().map(|e| e.abs().powf(p)).sum::<f64>() / (p * n as f64);
        return (loss, err.iter().map(|e| dpow(*e) / (p * n as f64)).collect());
    }
    let mut sum = [0.0f64; 2];
    let mut count = [0usize; 2];
    for (e, &a) in err.iter().zip(groups) {
        sum[a as usize] += e.abs().powf(p);
        count[a as usize] += 1;
    }
    let mean: Vec<f64> = (0..2).map(|a| sum[a] / count[a].max(1) as f64).collect();
    let loss = 0.5 * (mean[0].powf(1.0 / p) + mean[1].powf(1.0 / p));
    // d(m^{1/p})/dm = m^{1/p − 1}/p
    let outer: Vec<f64> = mean
        .iter()
        .map(|&m| if m > 0.0 { m.powf(1.0 / p - 1.0) / p } else { 0.0 })
        .collect();
    let grad = err
        .iter()
        .zip(groups)
        .map(|(e, &a)| {
            let a = a as usize;
            0.5 * outer[a] * dpow(*e) / count[a] as f64
        })
        .collect();
    (loss, grad)
}

/// `mean_0 s − mean_1 s`.
pub fn score_gap(scores: &[f64], groups: &[u8]) -> f64 {
    let mut sum = [0.0f64; 2];
    let mut count = [0usize; 2];
    for (s, &a) in scores.iter().zip(groups) {
        sum[a as usize] += s;
        count[a as usize] += 1;
    }
    sum[0] / count[0].max(1) as f64 - sum[1] / count[1].max(1) as f64
}

/// Gradient of `scale·|gap|` with respect to each score; `sign(0) = 0`.
fn abs_gap_grad(gap: f64, groups: &[u8], scale: f64) -> Array2<f64> {
    let n0 = groups.iter().filter(|a| **a == 0).count().max(1) as f64;
    let n1 = (groups.len() as f64 - n0).max(1.0);
    let s = if gap > 0.0 {
        1.0
    } else if gap < 0.0 {
        -1.0
    } else {
        0.0
    };
    Array2::from_shape_fn((groups.len(), 1), |(i, _)| {
        scale * s * if groups[i] == 0 { 1.0 / n0 } else { -1.0 / n1 }
    })
}

fn column(a: &Array2<f64>) -> Vec<f64> {
    a.column(0).to_vec()
}

fn as_column(v: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((v.len(), 1), v.to_vec()).expect("column shape")
}

/// Predictions of `predictor ∘ encoder` (or `predictor` alone).
pub fn predict(
    encoder: Option<&FeedForwardModel>,
    predictor: &FeedForwardModel,
    x: ArrayView2<f64>,
) -> Result<Vec<f64>> {
    let out = match encoder {
        Some(g) => predictor.predict_batch(g.predict_batch(x)?.view())?,
        None => predictor.predict_batch(x)?,
    };
    if out.ncols() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: out.ncols(),
        });
    }
    Ok(column(&out))
}

fn group_prediction_ks(pred: &[f64], groups: &[u8]) -> Result<f64> {
    let split = |a: u8| -> Vec<f64> {
        pred.iter()
            .zip(groups)
            .filter(|(_, g)| **g == a)
            .map(|(y, _)| *y)
            .collect()
    };
    Ok(ks_distance(
        &EmpiricalDist1D::from_samples(&split(0))?,
        &EmpiricalDist1D::from_samples(&split(1))?,
    ))
}

fn ensure_finite(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

fn group_lists(data: &GroupedDataset) -> [Vec<usize>; 2] {
    [data.group_indices(0), data.group_indices(1)]
}

/// Trains a `[d → hidden… → 1]` ReLU network by mini-batch descent.
pub fn train_baseline(data: &GroupedDataset, cfg: &TrainConfig) -> Result<BaselineRun> {
    cfg.validate()?;
    data.require_both_groups()?;
    let mut sizes = vec![data.dim()];
    sizes.extend(&cfg.hidden);
    sizes.push(1);
    let mut model = FeedForwardModel::init(&sizes, derive_seed(cfg.seed, STREAM_MODEL), None)?;
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_BATCHES));
    let groups = group_lists(data);
    let x = data.features();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        for batch in stratified_batches(&groups, cfg.batch_size, &mut rng) {
            let xb = x.select(Axis(0), &batch);
            let yb: Vec<f64> = batch.iter().map(|&i| data.target()[i]).collect();
            let gb: Vec<u8> = batch.iter().map(|&i| data.protected()[i]).collect();
            let (out, cache) = model.forward_batch(xb.view())?;
            let (_, grad) = loss_and_grad(&column(&out), &yb, &gb, cfg.p, cfg.balanced);
            let (tape, _) = model.backward(&cache, as_column(&grad).view())?;
            opt.descend(&mut model, &tape);
        }
        let pred = predict(None, &model, x.view())?;
        ensure_finite(&pred)?;
        let (objective, _) = loss_and_grad(&pred, data.target(), data.protected(), cfg.p, cfg.balanced);
        let errors = measure_group_errors(&pred, data.target(), data.protected(), cfg.p)?;
        log.push(EpochRecord {
            epoch,
            objective,
            balanced_error: balanced_error(&errors),
            gap_estimate: None,
            ks_disparity: group_prediction_ks(&pred, data.protected())?,
        });
    }
    Ok(BaselineRun { model, log })
}

/// Gradient descent-ascent on the critic-regularized objective.
///
/// The encoder and predictor start from the same weights the baseline
/// would use for the same seed, split after the hidden layers.
pub fn train_adversarial(data: &GroupedDataset, cfg: &TrainConfig) -> Result<AdversarialRun> {
    cfg.validate()?;
    data.require_both_groups()?;
    let clip = cfg.effective_clip();
    let mut sizes = vec![data.dim()];
    sizes.extend(&cfg.hidden);
    sizes.push(1);
    let full = FeedForwardModel::init(&sizes, derive_seed(cfg.seed, STREAM_MODEL), None)?;
    let (mut encoder, mut predictor) = full.split_at(cfg.hidden.len())?;
    encoder.set_clip_bound(None)?;
    predictor.set_clip_bound(clip)?;
    let repr = *cfg.hidden.last().unwrap();
    let mut adversary = FeedForwardModel::init(
        &[repr, cfg.adversary_hidden, 1],
        derive_seed(cfg.seed, STREAM_ADVERSARY),
        clip,
    )?;
    if clip.is_some() {
        predictor.clip_weights()?;
        adversary.clip_weights()?;
    }
    let mut opt_g = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut opt_h = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut opt_f = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_BATCHES));
    let groups = group_lists(data);
    let x = data.features();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        for batch in stratified_batches(&groups, cfg.batch_size, &mut rng) {
            let xb = x.select(Axis(0), &batch);
            let yb: Vec<f64> = batch.iter().map(|&i| data.target()[i]).collect();
            let gb: Vec<u8> = batch.iter().map(|&i| data.protected()[i]).collect();

            if cfg.tau > 0.0 {
                let z = encoder.predict_batch(xb.view())?;
                for _ in 0..cfg.adversary_steps {
                    let (s, cache) = adversary.forward_batch(z.view())?;
                    let gap = score_gap(&column(&s), &gb);
                    let (tape, _) = adversary.backward(&cache, abs_gap_grad(gap, &gb, 1.0).view())?;
                    opt_f.ascend(&mut adversary, &tape);
                    if clip.is_some() {
                        adversary.clip_weights()?;
                    }
                }
            }

            let (z, cache_g) = encoder.forward_batch(xb.view())?;
            let (out, cache_h) = predictor.forward_batch(z.view())?;
            let (_, grad) = loss_and_grad(&column(&out), &yb, &gb, cfg.p, cfg.balanced);
            let (tape_h, mut dz) = predictor.backward(&cache_h, as_column(&grad).view())?;
            if cfg.tau > 0.0 {
                let (s, cache_f) = adversary.forward_batch(z.view())?;
                let gap = score_gap(&column(&s), &gb);
                let (_, dz_f) = adversary.backward(&cache_f, abs_gap_grad(gap, &gb, cfg.tau).view())?;
                dz += &dz_f;
            }
            let (tape_g, _) = encoder.backward(&cache_g, dz.view())?;
            opt_g.descend(&mut encoder, &tape_g);
            opt_h.descend(&mut predictor, &tape_h);
            if clip.is_some() {
                predictor.clip_weights()?;
            }
        }
        let record = adversarial_record(epoch, &encoder, &predictor, &adversary, data, cfg)?;
        log.push(record);
    }
    Ok(AdversarialRun {
        encoder,
        predictor,
        adversary,
        log,
    })
}

/// Recomputes the full-data objective for the given models.
pub fn adversarial_record(
    epoch: usize,
    encoder: &FeedForwardModel,
    predictor: &FeedForwardModel,
    adversary: &FeedForwardModel,
    data: &GroupedDataset,
    cfg: &TrainConfig,
) -> Result<EpochRecord> {
    let z = encoder.predict_batch(data.features().view())?;
    let pred = column(&predictor.predict_batch(z.view())?);
    ensure_finite(&pred)?;
    let scores = column(&adversary.predict_batch(z.view())?);
    let gap = score_gap(&scores, data.protected());
    let fit = if cfg.balanced {
        balanced_error(&measure_group_errors(&pred, data.target(), data.protected(), cfg.p)?)
    } else {
        loss_and_grad(&pred, data.target(), data.protected(), cfg.p, false).0
    };
    let errors = measure_group_errors(&pred, data.target(), data.protected(), cfg.p)?;
    Ok(EpochRecord {
        epoch,
        objective: fit + cfg.tau * gap.abs(),
        balanced_error: balanced_error(&errors),
        gap_estimate: Some(gap),
        ks_disparity: group_prediction_ks(&pred, data.protected())?,
    })
}

/// Metrics of one trained predictor on one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Pooled ℓ_p error.
    pub overall_error: f64,
    pub group_error_sum: f64,
    pub ks_disparity: f64,
    pub accuracy_disparity: f64,
    pub group_errors: GroupErrors,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.3}±{:.3}", self.mean, self.std)
    }
}

/// Per-seed metrics with their mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub overall_error: MeanStd,
    pub group_error_sum: MeanStd,
    pub ks_disparity: MeanStd,
    pub accuracy_disparity: MeanStd,
    pub runs: Vec<RunMetrics>,
}

impl FairnessReport {
    pub fn from_runs(runs: Vec<RunMetrics>) -> Self {
        let field = |f: fn(&RunMetrics) -> f64| MeanStd::of(&runs.iter().map(f).collect::<Vec<_>>());
        Self {
            overall_error: field(|r| r.overall_error),
            group_error_sum: field(|r| r.group_error_sum),
            ks_disparity: field(|r| r.ks_disparity),
            accuracy_disparity: field(|r| r.accuracy_disparity),
            runs,
        }
    }
}

/// Evaluates `predictor ∘ encoder` on `data` with ℓ_p errors.
pub fn evaluate(
    encoder: Option<&FeedForwardModel>,
    predictor: &FeedForwardModel,
    data: &GroupedDataset,
    p: f64,
) -> Result<RunMetrics> {
    let pred = predict(encoder, predictor, data.features().view())?;
    evaluate_predictions(&pred, data, p)
}

pub fn evaluate_predictions(pred: &[f64], data: &GroupedDataset, p: f64) -> Result<RunMetrics> {
    data.require_both_groups()?;
    ensure_finite(pred)?;
    let group_errors = measure_group_errors(pred, data.target(), data.protected(), p)?;
    let overall = (pred
        .iter()
        .zip(data.target())
        .map(|(a, b)| (a - b).abs().powf(p))
        .sum::<f64>()
        / pred.len() as f64)
        .powf(1.0 / p);
    Ok(RunMetrics {
        overall_error: overall,
        group_error_sum: group_errors.sum(),
        ks_disparity: group_prediction_ks(pred, data.protected())?,
        accuracy_disparity: group_errors.disparity(),
        group_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_example1, TargetScale};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn batches_cover_both_groups_once() {
        let groups = [(0..30).collect::<Vec<_>>(), (30..100).collect::<Vec<_>>()];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batches = stratified_batches(&groups, 16, &mut rng);
        assert_eq!(batches.len(), 7);
        let mut all: Vec<usize> = batches.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        for b in &batches {
            assert!(b.iter().any(|i| *i < 30) && b.iter().any(|i| *i >= 30));
        }
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 9;
        let pred: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let target: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let groups: Vec<u8> = (0..n).map(|i| (i % 3 == 0) as u8).collect();
        for balanced in [false, true] {
            for p in [1.0, 2.0, 3.0] {
                let (_, grad) = loss_and_grad(&pred, &target, &groups, p, balanced);
                for i in 0..n {
                    let h = 1e-6;
                    let mut up = pred.clone();
                    up[i] += h;
                    let mut down = pred.clone();
                    down[i] -= h;
                    let num = (loss_and_grad(&up, &target, &groups, p, balanced).0
                        - loss_and_grad(&down, &target, &groups, p, balanced).0)
                        / (2.0 * h);
                    assert_abs_diff_eq!(num, grad[i], epsilon = 1e-6);
                }
            }
        }
    }

    #[test]
    fn balanced_loss_matches_bounds_module() {
        let pred = [0.1, 0.5, -0.2, 0.9];
        let target = [0.0, 1.0, 0.0, 0.0];
        let groups = [0, 1, 0, 1];
        let (loss, _) = loss_and_grad(&pred, &target, &groups, 2.0, true);
        let g = measure_group_errors(&pred, &target, &groups, 2.0).unwrap();
        assert_abs_diff_eq!(loss, balanced_error(&g), epsilon = 1e-15);
    }

    #[test]
    fn gap_subgradient_sign_zero() {
        assert!(abs_gap_grad(0.0, &[0, 1], 1.0).iter().all(|v| *v == 0.0));
        let g = abs_gap_grad(-0.3, &[0, 0, 1], 2.0);
        assert_eq!(g, array![[-1.0], [-1.0], [2.0]]);
    }

    #[test]
    fn evaluate_examples() {
        let data = gen_example1(40, 1).unwrap();
        // group-aware perfect predictor: output A
        let perfect: Vec<f64> = data.protected().iter().map(|a| *a as f64).collect();
        let m = evaluate_predictions(&perfect, &data, 2.0).unwrap();
        assert_eq!(m.overall_error, 0.0);
        assert_eq!(m.accuracy_disparity, 0.0);
        assert_eq!(m.ks_disparity, 1.0);
        let constant = vec![0.5; data.len()];
        let m = evaluate_predictions(&constant, &data, 1.0).unwrap();
        assert_eq!(m.ks_disparity, 0.0);
        assert_eq!(m.group_error_sum, 1.0);
    }

    #[test]
    fn evaluate_ks_against_enumeration() {
        // predictor outputs the group-conditional target mean
        let x = Array2::from_shape_vec((6, 1), vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let protected = vec![0, 0, 0, 1, 1, 1];
        let target = vec![-0.5, 0.0, 0.5, 0.2, 0.4, 0.6];
        let data = GroupedDataset::new(x, protected, target, TargetScale::IDENTITY).unwrap();
        let pred = vec![0.0, 0.0, 0.0, 0.4, 0.4, 0.4];
        let m = evaluate_predictions(&pred, &data, 1.0).unwrap();
        // CDFs: group 0 jumps to 1 at 0.0, group 1 at 0.4; sup gap 1 on [0, 0.4)
        let grid = [-1.0, 0.0, 0.2, 0.4, 1.0];
        let cdf = |vals: &[f64], t: f64| vals.iter().filter(|v| **v <= t).count() as f64 / vals.len() as f64;
        let ks = grid
            .iter()
            .map(|t| (cdf(&pred[..3], *t) - cdf(&pred[3..], *t)).abs())
            .fold(0.0, f64::max);
        assert_eq!(m.ks_disparity, ks);
    }

    #[test]
    fn report_aggregation() {
        let run = |v: f64| RunMetrics {
            overall_error: v,
            group_error_sum: 2.0 * v,
            ks_disparity: 0.1,
            accuracy_disparity: 0.0,
            group_errors: GroupErrors { eps0: v, eps1: v, p: 2.0, alpha: 0.5 },
        };
        let r = FairnessReport::from_runs(vec![run(1.0), run(3.0)]);
        assert_eq!(r.overall_error.mean, 2.0);
        assert_abs_diff_eq!(r.overall_error.std, 2f64.sqrt(), epsilon = 1e-15);
        let single = FairnessReport::from_runs(vec![run(1.0)]);
        assert_eq!(single.ks_disparity.std, 0.0);
        assert_eq!(format!("{}", r.group_error_sum), "4.000±2.828");
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::baseline(0).validate().is_ok());
        let mut c = TrainConfig::adversarial(1.0, 0);
        assert_eq!(c.effective_clip(), Some(1.0));
        c.clip_bound = Some(0.0);
        assert!(c.validate().is_err());
        c = TrainConfig::adversarial(-1.0, 0);
        assert!(c.validate().is_err());
        assert_eq!(TrainConfig::adversarial(0.0, 0).effective_clip(), None);
    }
}
