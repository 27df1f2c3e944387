//! Binds the bounds to datasets and trained predictors, producing one
//! certificate per inequality.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    estimate_density_bound, excess_risk_floor, fair_price_comparison, finite_sample_floor,
    joint_error_floor, mean_gap_bounds, measure_group_errors, parity_error_floor,
    representation_sp_level, BoundCertificate, ExcessRiskInputs,
};
use crate::data::GroupedDataset;
use crate::dist1d::EmpiricalDist1D;
use crate::error::{Error, Result};
use crate::metrics::{ks_distance, wasserstein_p, wasserstein_p_point_clouds};
use crate::nn::FeedForwardModel;
use crate::train::predict;

pub const PARITY_ERROR_FLOOR: &str = "parity_error_floor";
pub const MEAN_GAP_MAE_FLOOR: &str = "mean_gap_mae_floor";
pub const MEAN_GAP_MSE_FLOOR: &str = "mean_gap_mse_floor";
pub const JOINT_ERROR_FLOOR: &str = "joint_error_floor";
pub const FINITE_SAMPLE_FLOOR: &str = "finite_sample_floor";
pub const EXCESS_RISK_FLOOR: &str = "excess_risk_floor";
pub const REPRESENTATION_SP_LEVEL: &str = "representation_sp_level";
pub const FAIR_PRICE: &str = "fair_price_with_vs_without_a";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyParams {
    /// Loss order for the `W_p`-based floors.
    pub p: f64,
    /// Density bound `C` on the predictor's output distributions. `None`
    /// estimates it from the predictions; estimated values are heuristic and
    /// a failed check is then reported as not applicable.
    pub density_bound: Option<f64>,
    pub c1: f64,
    pub delta: f64,
    /// Overrides the empirical `Pr(A = 0)` in the joint floor and the price comparison.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Absolute float tolerance on every slack.
    pub tolerance: f64,
    /// A KS disparity at or below this counts as exact statistical parity.
    pub sp_tolerance: f64,
    /// Points per group used for the representation transport estimate.
    pub representation_sample: usize,
    pub seed: u64,
}

impl Default for CertifyParams {
    fn default() -> Self {
        Self {
            p: 2.0,
            density_bound: None,
            c1: 1.0,
            delta: 0.05,
            alpha: None,
            tolerance: 1e-6,
            sp_tolerance: 1e-12,
            representation_sample: 32,
            seed: 0,
        }
    }
}

/// FNV-1a over the bit patterns of `values`.
pub fn digest(values: &[f64]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

fn split_by_group(values: &[f64], groups: &[u8]) -> Result<[EmpiricalDist1D; 2]> {
    let part = |a: u8| -> Result<EmpiricalDist1D> {
        let v: Vec<f64> = values
            .iter()
            .zip(groups)
            .filter(|(_, g)| **g == a)
            .map(|(x, _)| *x)
            .collect();
        if v.is_empty() {
            return Err(Error::EmptyGroup(a));
        }
        EmpiricalDist1D::from_samples(&v)
    };
    Ok([part(0)?, part(1)?])
}

/// Certificates for one set of predictions on `data`.
///
/// Floors that assume exact statistical parity are reported as not
/// applicable when the predictions do not satisfy it. `representation`
/// (rows aligned with `data`) and `predictor_lipschitz` enable the
/// representation-level parity check.
pub fn certify_predictions(
    data: &GroupedDataset,
    predictions: &[f64],
    representation: Option<(&Array2<f64>, f64)>,
    params: &CertifyParams,
) -> Result<Vec<BoundCertificate>> {
    data.require_both_groups()?;
    if predictions.len() != data.len() {
        return Err(Error::LengthMismatch(format!(
            "{} predictions for {} rows",
            predictions.len(),
            data.len()
        )));
    }
    let p = params.p;
    let groups = data.protected();
    let [y0, y1] = [data.group_targets(0)?, data.group_targets(1)?];
    let [yh0, yh1] = split_by_group(predictions, groups)?;
    let ks = ks_distance(&yh0, &yh1);
    let sp = ks <= params.sp_tolerance;
    let errs = measure_group_errors(predictions, data.target(), groups, p)?;
    let l1 = measure_group_errors(predictions, data.target(), groups, 1.0)?;
    let l2 = measure_group_errors(predictions, data.target(), groups, 2.0)?;
    let unit = 1.0 / data.target_scale().scale.abs();
    let tol = params.tolerance;
    let dg = digest(
        &[data.target(), predictions, &[p, params.c1, params.delta]].concat(),
    );

    let mut certs = Vec::new();
    let floor = parity_error_floor(&y0, &y1, p)?;
    certs.push(BoundCertificate::new(PARITY_ERROR_FLOOR, floor, errs.sum(), sp, tol, &dg).with_original_units(unit));

    let gap = mean_gap_bounds(&y0, &y1);
    certs.push(BoundCertificate::new(MEAN_GAP_MAE_FLOOR, gap.mae, l1.sum(), sp, tol, &dg).with_original_units(unit));
    certs.push(
        BoundCertificate::new(MEAN_GAP_MSE_FLOOR, gap.mse, l2.eps0.powi(2) + l2.eps1.powi(2), sp, tol, &dg)
            .with_original_units(unit * unit),
    );

    let alpha = params.alpha.unwrap_or(errs.alpha);
    let joint = joint_error_floor(&y0, &y1, alpha, p)?;
    let joint_err = alpha * errs.eps0 + (1.0 - alpha) * errs.eps1;
    certs.push(BoundCertificate::new(JOINT_ERROR_FLOOR, joint, joint_err, sp, tol, &dg).with_original_units(unit));

    // The correction term assumes targets in [−1, 1], so this one stays in scaled units.
    let finite = finite_sample_floor(&y0, &y1, data.len(), params.delta, params.c1)?;
    certs.push(BoundCertificate::new(FINITE_SAMPLE_FLOOR, finite, l1.sum(), sp, tol, &dg));

    // Reference predictor: the target itself, with zero error.
    let eps_sp = wasserstein_p(&yh0, &yh1, p)?;
    let excess = excess_risk_floor(&ExcessRiskInputs {
        opt_err0: 0.0,
        opt_err1: 0.0,
        opt_pred_dist: floor,
        eps_sp,
    })?;
    certs.push(BoundCertificate::new(EXCESS_RISK_FLOOR, excess, errs.sum(), true, tol, &dg).with_original_units(unit));

    if let Some((z, rho)) = representation {
        certs.push(representation_certificate(data, predictions, z, rho, ks, params, &dg)?);
    }
    Ok(certs)
}

fn representation_certificate(
    data: &GroupedDataset,
    predictions: &[f64],
    z: &Array2<f64>,
    rho: f64,
    ks: f64,
    params: &CertifyParams,
    dg: &str,
) -> Result<BoundCertificate> {
    if z.nrows() != data.len() {
        return Err(Error::LengthMismatch(format!(
            "{} representation rows for {} data rows",
            z.nrows(),
            data.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut exact = true;
    let mut clouds = Vec::with_capacity(2);
    for a in 0..2u8 {
        let mut idx = data.group_indices(a);
        if idx.len() > params.representation_sample {
            exact = false;
            idx.shuffle(&mut rng);
            idx.truncate(params.representation_sample);
        }
        clouds.push(
            z.select(Axis(0), &idx)
                .outer_iter()
                .map(|r| r.to_vec())
                .collect::<Vec<_>>(),
        );
    }
    let w1 = wasserstein_p_point_clouds(&clouds[0], &clouds[1], 1.0)?;
    let (c, asserted) = match params.density_bound {
        Some(c) => (c, true),
        None => (estimate_density_bound(predictions)?, false),
    };
    let level = if c.is_finite() {
        representation_sp_level(w1, rho, c)?
    } else {
        f64::INFINITY
    };
    // Subsampled transport estimates carry sampling error of order 1/√m.
    let slack = if exact {
        params.tolerance
    } else {
        params.tolerance + 3.0 / (params.representation_sample as f64).sqrt()
    };
    Ok(BoundCertificate::ceiling(
        REPRESENTATION_SP_LEVEL,
        level,
        ks,
        1.0,
        asserted && exact,
        slack,
        dg,
    ))
}

/// Certificates for a dataset alone, witnessed by the constant predictor at
/// the pooled target mean (which satisfies parity exactly), plus the price
/// comparison of fair predictors with and without access to the group.
pub fn certify_dataset(data: &GroupedDataset, params: &CertifyParams) -> Result<Vec<BoundCertificate>> {
    data.require_both_groups()?;
    let mean = data.target().iter().sum::<f64>() / data.len() as f64;
    let constant = vec![mean; data.len()];
    let mut certs = certify_predictions(data, &constant, None, params)?;
    let (y0, y1) = (data.group_targets(0)?, data.group_targets(1)?);
    let alpha = params.alpha.unwrap_or_else(|| data.alpha());
    let price = fair_price_comparison(&y0, &y1, alpha)?;
    let unit = 1.0 / data.target_scale().scale.abs();
    certs.push(
        BoundCertificate::new(
            FAIR_PRICE,
            price.price_without_a,
            price.price_with_a,
            true,
            1e-9,
            digest(&[data.target(), &[alpha]].concat()),
        )
        .with_original_units(unit),
    );
    Ok(certs)
}

/// A trained predictor, optionally preceded by an encoder.
#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub encoder: Option<FeedForwardModel>,
    pub predictor: FeedForwardModel,
}

/// Certificates for every trained run on `data`.
pub fn certificate_sweep(
    data: &GroupedDataset,
    runs: &[TrainedModels],
    params: &CertifyParams,
) -> Result<Vec<Vec<BoundCertificate>>> {
    runs.iter()
        .map(|run| {
            let x = data.features().view();
            let pred = predict(run.encoder.as_ref(), &run.predictor, x)?;
            match &run.encoder {
                Some(g) => {
                    let z = g.predict_batch(x)?;
                    let rho = run.predictor.lipschitz_upper();
                    certify_predictions(data, &pred, Some((&z, rho)), params)
                }
                None => certify_predictions(data, &pred, None, params),
            }
        })
        .collect()
}
