use fairreg::bounds::{accuracy_parity_ceiling, finite_sample_floor, ks_from_w1, measure_group_errors, CertificateStatus};
use fairreg::certify::{certify_predictions, CertifyParams, FINITE_SAMPLE_FLOOR, PARITY_ERROR_FLOOR};
use fairreg::data::{gen_example1, gen_example2, gen_lawschool_like, GroupedDataset, TargetScale};
use fairreg::metrics::{ks_distance, wasserstein_1_cdf, wasserstein_p_point_clouds};
use fairreg::nn::FeedForwardModel;
use fairreg::EmpiricalDist1D;
use ndarray::Array2;
use proptest::prelude::*;

/// Features shared by both groups, group-specific targets, and a predictor
/// that only sees the features.
fn parity_instance() -> impl Strategy<Value = (GroupedDataset, Vec<f64>)> {
    (
        prop::collection::vec(-1.0f64..1.0, 1..25),
        prop::collection::vec(-1.0f64..1.0, 50),
        -0.8f64..0.8,
        prop::option::of((-3.0f64..3.0, -1.0f64..1.0)),
    )
        .prop_map(|(xs, noise, shift, blind)| {
            let m = xs.len();
            let mut target = Vec::new();
            for g in 0..2 {
                for k in 0..m {
                    let s = if g == 0 { -shift } else { shift };
                    target.push((noise[(k + 25 * g) % 50] + s).clamp(-1.0, 1.0));
                }
            }
            let feats: Vec<f64> = xs.iter().chain(&xs).copied().collect();
            let groups: Vec<u8> = (0..2 * m).map(|i| (i >= m) as u8).collect();
            let pred = match blind {
                None => vec![0.1; 2 * m],
                Some((w, c)) => feats.iter().map(|x| (w * x + c).sin()).collect(),
            };
            let x = Array2::from_shape_vec((2 * m, 1), feats).unwrap();
            (GroupedDataset::new(x, groups, target, TargetScale::IDENTITY).unwrap(), pred)
        })
}

fn group_dist(values: &[f64], groups: &[u8], g: u8) -> EmpiricalDist1D {
    let v: Vec<f64> = values.iter().zip(groups).filter(|(_, a)| **a == g).map(|(v, _)| *v).collect();
    EmpiricalDist1D::from_samples(&v).unwrap()
}

/// Midpoint quantiles of the law with density `2u` on `[lo, lo + w]`, rescaled.
fn fine_ramp(lo: f64, w: f64, m: usize, rising: bool) -> (EmpiricalDist1D, f64) {
    let pts: Vec<f64> = (0..m)
        .map(|k| {
            let t = (k as f64 + 0.5) / m as f64;
            let u = if rising { t.sqrt() } else { 1.0 - (1.0 - t).sqrt() };
            lo + w * u
        })
        .collect();
    (EmpiricalDist1D::from_samples(&pts).unwrap(), 2.0 / w)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn parity_floor_holds_for_exact_parity_predictors((data, pred) in parity_instance(), p in prop::sample::select(vec![1.0, 2.0, 3.0])) {
        let g = data.protected();
        prop_assert!(ks_distance(&group_dist(&pred, g, 0), &group_dist(&pred, g, 1)) <= 1e-9);
        let params = CertifyParams { p, ..Default::default() };
        let certs = certify_predictions(&data, &pred, None, &params).unwrap();
        let c = certs.iter().find(|c| c.name == PARITY_ERROR_FLOOR).unwrap();
        prop_assert!(c.slack >= -1e-8, "{:?}", c);
        prop_assert!(certs.iter().all(|c| !c.is_violated()));
    }

    #[test]
    fn finite_sample_floor_is_not_clamped((data, pred) in parity_instance(), delta in 0.01f64..0.5) {
        let (y0, y1) = (data.group_targets(0).unwrap(), data.group_targets(1).unwrap());
        let raw = finite_sample_floor(&y0, &y1, data.len(), delta, 1.0).unwrap();
        let params = CertifyParams { delta, ..Default::default() };
        let certs = certify_predictions(&data, &pred, None, &params).unwrap();
        let c = certs.iter().find(|c| c.name == FINITE_SAMPLE_FLOOR).unwrap();
        prop_assert_eq!(c.lower_bound, raw);
        prop_assert_eq!(c.vacuous, raw <= 0.0);
        if raw <= 0.0 {
            prop_assert_eq!(c.status, CertificateStatus::Vacuous);
        }
    }

    #[test]
    fn accuracy_gap_within_lipschitz_ceiling(
        seed in 0u64..1000,
        rows in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 4..30),
        clip in 0.05f64..1.0,
    ) {
        let n = rows.len();
        let groups: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let x = Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { rows[i].0 } else { rows[i].1 });
        let y: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let mut model = FeedForwardModel::init(&[2, 6, 1], seed, Some(clip)).unwrap();
        model.clip_weights().unwrap();
        let pred: Vec<f64> = model.predict_batch(x.view()).unwrap().column(0).to_vec();
        let errs = measure_group_errors(&pred, &y, &groups, 1.0).unwrap();
        let cloud = |g: u8| -> Vec<Vec<f64>> {
            (0..n).filter(|i| groups[*i] == g).map(|i| vec![rows[i].0, rows[i].1, rows[i].2]).collect()
        };
        let w1 = wasserstein_p_point_clouds(&cloud(0), &cloud(1), 1.0).unwrap();
        let ceiling = accuracy_parity_ceiling(model.lipschitz_upper(), w1).unwrap();
        prop_assert!(errs.disparity() <= ceiling + 1e-9, "gap {} ceiling {}", errs.disparity(), ceiling);
    }

    #[test]
    fn forward_and_backward_are_deterministic(seed in 0u64..10_000, batch in 1usize..5) {
        let a = FeedForwardModel::init(&[3, 7, 4, 2], seed, None).unwrap();
        let b = FeedForwardModel::init(&[3, 7, 4, 2], seed, None).unwrap();
        prop_assert_eq!(&a, &b);
        let x = Array2::from_shape_fn((batch, 3), |(i, j)| ((i * 3 + j) as f64 * 0.37).sin());
        let g = Array2::from_shape_fn((batch, 2), |(i, j)| ((i + 2 * j) as f64 * 0.11).cos());
        let (ya, ca) = a.forward_batch(x.view()).unwrap();
        let (yb, cb) = b.forward_batch(x.view()).unwrap();
        prop_assert_eq!(ya, yb);
        let (ta, ia) = a.backward(&ca, g.view()).unwrap();
        let (tb, ib) = b.backward(&cb, g.view()).unwrap();
        prop_assert_eq!(ta.flat(), tb.flat());
        prop_assert_eq!(ia, ib);
    }

    #[test]
    fn clip_contract_is_exact(seed in 0u64..10_000, c in 1e-3f64..2.0, scale in 1.0f64..50.0) {
        let mut m = FeedForwardModel::init(&[4, 5, 3, 1], seed, Some(c)).unwrap();
        let params: Vec<f64> = m.params_flat().iter().enumerate().map(|(i, v)| v * scale + (i as f64).sin()).collect();
        m.set_params_flat(&params).unwrap();
        m.clip_weights().unwrap();
        prop_assert!(m.max_abs_param() <= c);
    }

    #[test]
    fn generators_are_deterministic_and_bounded(seed in 0u64..1000, n in 10usize..300) {
        for (a, b) in [
            (gen_example1(n, seed).unwrap(), gen_example1(n, seed).unwrap()),
            (gen_example2(n, 3, seed).unwrap(), gen_example2(n, 3, seed).unwrap()),
            (gen_lawschool_like(n, seed).unwrap(), gen_lawschool_like(n, seed).unwrap()),
        ] {
            prop_assert_eq!(a.features(), b.features());
            prop_assert_eq!(a.protected(), b.protected());
            prop_assert_eq!(a.target(), b.target());
            prop_assert!(a.target().iter().all(|y| (-1.0..=1.0).contains(y)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn ks_within_w1_ceiling_on_fine_approximations(
        lo0 in -1.0f64..1.0, w0 in 0.1f64..2.0, r0 in any::<bool>(),
        lo1 in -1.0f64..1.0, w1 in 0.1f64..2.0, r1 in any::<bool>(),
    ) {
        let m = 10_000;
        let (a, ca) = fine_ramp(lo0, w0, m, r0);
        let (b, cb) = fine_ramp(lo1, w1, m, r1);
        let ceiling = ks_from_w1(wasserstein_1_cdf(&a, &b), ca.max(cb)).unwrap();
        prop_assert!(ks_distance(&a, &b) <= ceiling + 2.0 / (m as f64).sqrt());
    }
}
