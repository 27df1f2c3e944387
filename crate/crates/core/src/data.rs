//! Two-group regression datasets: synthetic generators, CSV ingestion,
//! snapshots and stratified splitting.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dist1d::EmpiricalDist1D;
use crate::error::{Error, Result};

const TARGET_SLACK: f64 = 1e-12;

/// Affine map from original target units into `[−1, 1]`:
/// `scaled = scale · original + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScale {
    pub scale: f64,
    pub offset: f64,
}

impl Default for TargetScale {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl TargetScale {
    pub const IDENTITY: TargetScale = TargetScale {
        scale: 1.0,
        offset: 0.0,
    };

    /// Min-max map of `[lo, hi]` onto `[−1, 1]`; a constant column maps to 0.
    pub fn min_max(lo: f64, hi: f64) -> Self {
        if hi > lo {
            let scale = 2.0 / (hi - lo);
            Self {
                scale,
                offset: -1.0 - scale * lo,
            }
        } else {
            Self {
                scale: 1.0,
                offset: -lo,
            }
        }
    }

    pub fn to_scaled(&self, y: f64) -> f64 {
        self.scale * y + self.offset
    }

    pub fn to_original(&self, y: f64) -> f64 {
        (y - self.offset) / self.scale
    }

    /// Converts a distance or ℓ_p error from scaled to original units.
    pub fn distance_to_original(&self, d: f64) -> f64 {
        d / self.scale.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupedDataset {
    features: Array2<f64>,
    protected: Vec<u8>,
    target: Vec<f64>,
    target_scale: TargetScale,
}

impl GroupedDataset {
    /// Validates alignment, binary groups, finiteness and targets in `[−1, 1]`.
    pub fn new(
        features: Array2<f64>,
        protected: Vec<u8>,
        target: Vec<f64>,
        target_scale: TargetScale,
    ) -> Result<Self> {
        let n = features.nrows();
        if protected.len() != n || target.len() != n {
            return Err(Error::LengthMismatch(format!(
                "{} feature rows, {} protected values, {} targets",
                n,
                protected.len(),
                target.len()
            )));
        }
        if let Some(a) = protected.iter().find(|a| **a > 1) {
            return Err(Error::InvalidArgument(format!("protected value {a} not in {{0,1}}")));
        }
        if features.iter().chain(&target).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if let Some(y) = target.iter().find(|y| y.abs() > 1.0 + TARGET_SLACK) {
            return Err(Error::InvalidArgument(format!("target {y} outside [-1, 1]")));
        }
        Ok(Self {
            features,
            protected,
            target,
            target_scale,
        })
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn protected(&self) -> &[u8] {
        &self.protected
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn target_scale(&self) -> TargetScale {
        self.target_scale
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn group_count(&self, a: u8) -> usize {
        self.protected.iter().filter(|g| **g == a).count()
    }

    /// `Pr(A = 0)`.
    pub fn alpha(&self) -> f64 {
        self.group_count(0) as f64 / self.len() as f64
    }

    pub fn group_indices(&self, a: u8) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.protected[i] == a).collect()
    }

    pub fn require_both_groups(&self) -> Result<()> {
        for a in 0..2 {
            if self.group_count(a) == 0 {
                return Err(Error::EmptyGroup(a));
            }
        }
        Ok(())
    }

    /// Empirical distribution of the (scaled) targets in group `a`.
    pub fn group_targets(&self, a: u8) -> Result<EmpiricalDist1D> {
        let ys: Vec<f64> = self.group_indices(a).iter().map(|&i| self.target[i]).collect();
        if ys.is_empty() {
            return Err(Error::EmptyGroup(a));
        }
        EmpiricalDist1D::from_samples(&ys)
    }

    /// Same as [`group_targets`](Self::group_targets) in original units.
    pub fn group_targets_original(&self, a: u8) -> Result<EmpiricalDist1D> {
        let ys: Vec<f64> = self
            .group_indices(a)
            .iter()
            .map(|&i| self.target_scale.to_original(self.target[i]))
            .collect();
        if ys.is_empty() {
            return Err(Error::EmptyGroup(a));
        }
        EmpiricalDist1D::from_samples(&ys)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&i) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidArgument(format!("row {i} out of range")));
        }
        Ok(Self {
            features: self.features.select(Axis(0), indices),
            protected: indices.iter().map(|&i| self.protected[i]).collect(),
            target: indices.iter().map(|&i| self.target[i]).collect(),
            target_scale: self.target_scale,
        })
    }

    /// Writes `f0..f{d-1},A,Y` to `csv_path` and the target scale to `<csv_path>.json`.
    pub fn save_snapshot(&self, csv_path: &Path) -> Result<PathBuf> {
        let io = |source| Error::Io {
            path: csv_path.to_path_buf(),
            source,
        };
        let mut out = std::io::BufWriter::new(File::create(csv_path).map_err(io)?);
        let mut header: Vec<String> = (0..self.dim()).map(|j| format!("f{j}")).collect();
        header.push("A".into());
        header.push("Y".into());
        writeln!(out, "{}", header.join(",")).map_err(io)?;
        for (i, row) in self.features.outer_iter().enumerate() {
            let mut cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            cells.push(self.protected[i].to_string());
            cells.push(format!("{:?}", self.target[i]));
            writeln!(out, "{}", cells.join(",")).map_err(io)?;
        }
        out.flush().map_err(io)?;
        let sidecar = sidecar_path(csv_path);
        std::fs::write(&sidecar, serde_json::to_vec_pretty(&self.target_scale)?).map_err(|source| {
            Error::Io {
                path: sidecar.clone(),
                source,
            }
        })?;
        Ok(sidecar)
    }

    /// Reads a snapshot written by [`save_snapshot`](Self::save_snapshot) without rescaling.
    pub fn load_snapshot(csv_path: &Path) -> Result<Self> {
        let sidecar = sidecar_path(csv_path);
        let bytes = std::fs::read(&sidecar).map_err(|source| Error::Io {
            path: sidecar.clone(),
            source,
        })?;
        let scale: TargetScale = serde_json::from_slice(&bytes)?;
        let headers = read_headers(csv_path)?;
        let features: Vec<String> = headers.iter().filter(|h| h.starts_with('f')).cloned().collect();
        let spec = CsvSpec {
            feature_columns: features,
            protected_column: "A".into(),
            target_column: "Y".into(),
            protected_positive_value: "1".into(),
            zscore: false,
        };
        let loaded = read_table(csv_path, &spec, Some(scale))?;
        if let Some(r) = loaded.rejections.first() {
            return Err(Error::InvalidArgument(format!(
                "snapshot line {}: {}",
                r.line, r.reason
            )));
        }
        Ok(loaded.dataset)
    }
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

fn sidecar_path(csv_path: &Path) -> PathBuf {
    let mut s = csv_path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Example with `Y = A`: X uniform on `{0, 1}`, groups of equal size (±1).
pub fn gen_example1(n: usize, seed: u64) -> Result<GroupedDataset> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("need n >= 4, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let protected: Vec<u8> = (0..n).map(|i| (i >= n / 2) as u8).collect();
    let features = Array2::from_shape_fn((n, 1), |_| rng.random_range(0..2) as f64);
    let target = protected.iter().map(|a| *a as f64).collect();
    GroupedDataset::new(features, protected, target, TargetScale::IDENTITY)
}

/// Gaussian example: `X ~ N(0, I_d)`, `Y = x_0 − 1` on group 0 and `x_0 + 1`
/// on group 1, then divided by `max |Y|`.
pub fn gen_example2(n: usize, d: usize, seed: u64) -> Result<GroupedDataset> {
    if n < 2 || d < 1 {
        return Err(Error::InvalidArgument(format!("need n >= 2 and d >= 1, got n={n}, d={d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let protected: Vec<u8> = (0..n).map(|i| (i >= n / 2) as u8).collect();
    let features = Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal));
    let raw: Vec<f64> = (0..n)
        .map(|i| features[[i, 0]] + if protected[i] == 1 { 1.0 } else { -1.0 })
        .collect();
    let max_abs = raw.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    let scale = TargetScale {
        scale: if max_abs > 0.0 { 1.0 / max_abs } else { 1.0 },
        offset: 0.0,
    };
    let target = raw.iter().map(|y| scale.to_scaled(*y).clamp(-1.0, 1.0)).collect();
    GroupedDataset::new(features, protected, target, scale)
}

/// Knobs for [`gen_lawschool_like_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawSchoolParams {
    /// Difference of group-conditional target means (group 1 minus group 0).
    pub shift: f64,
    /// `Pr(A = 1)`.
    pub p_a1: f64,
    /// Standard deviation of the target noise in each group.
    pub noise_sd: [f64; 2],
}

impl Default for LawSchoolParams {
    fn default() -> Self {
        Self {
            shift: 0.15,
            p_a1: 0.452,
            noise_sd: [0.06, 0.14],
        }
    }
}

pub fn gen_lawschool_like(n: usize, seed: u64) -> Result<GroupedDataset> {
    gen_lawschool_like_with(n, seed, &LawSchoolParams::default())
}

/// Synthetic admissions-style table, a stand-in for the real law school file.
///
/// Columns: two noisy views of a latent aptitude, a noisy group proxy, two
/// binary columns (one group-correlated) and a mixed column. The GPA-like
/// target is `±shift/2 + 0.22·u + noise_sd[A]·noise`, clamped to `[−1, 1]`.
pub fn gen_lawschool_like_with(
    n: usize,
    seed: u64,
    params: &LawSchoolParams,
) -> Result<GroupedDataset> {
    if n < 10 {
        return Err(Error::InvalidArgument(format!("need n >= 10, got {n}")));
    }
    if !(params.p_a1 > 0.0 && params.p_a1 < 1.0) {
        return Err(Error::NotAProbability(params.p_a1));
    }
    if !params.shift.is_finite() || params.shift.abs() > 1.0 {
        return Err(Error::InvalidArgument(format!("shift {} outside [-1, 1]", params.shift)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Array2::zeros((n, 6));
    let mut protected = Vec::with_capacity(n);
    let mut target = Vec::with_capacity(n);
    for i in 0..n {
        let a = rng.random_bool(params.p_a1) as u8;
        let af = a as f64;
        let u = normal(&mut rng);
        features[[i, 0]] = u + 0.5 * normal(&mut rng);
        features[[i, 1]] = u + 0.7 * normal(&mut rng);
        features[[i, 2]] = 1.5 * (af - 0.5) + 0.5 * normal(&mut rng);
        features[[i, 3]] = rng.random_bool(0.3 + 0.3 * af) as u8 as f64;
        features[[i, 4]] = rng.random_bool(0.5) as u8 as f64;
        features[[i, 5]] = 0.3 * u + 0.5 * af + normal(&mut rng);
        let y = (af - 0.5) * params.shift + 0.22 * u + params.noise_sd[a as usize] * normal(&mut rng);
        protected.push(a);
        target.push(y.clamp(-1.0, 1.0));
    }
    GroupedDataset::new(features, protected, target, TargetScale::IDENTITY)
}

/// Column mapping for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSpec {
    pub feature_columns: Vec<String>,
    pub protected_column: String,
    pub target_column: String,
    /// Cells equal to this string map to group 1, everything else to group 0.
    pub protected_positive_value: String,
    /// Standardize each feature column to zero mean, unit variance.
    pub zscore: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowRejection {
    /// 1-based line number in the file, header included.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct CsvLoad {
    pub dataset: GroupedDataset,
    pub rejections: Vec<RowRejection>,
}

/// Reads a headed, comma-separated file; rows with unparseable cells are
/// skipped and reported. The target is min-max rescaled into `[−1, 1]`.
pub fn load_csv(path: &Path, spec: &CsvSpec) -> Result<CsvLoad> {
    let loaded = read_table(path, spec, None)?;
    loaded.dataset.require_both_groups()?;
    Ok(loaded)
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn read_headers(path: &Path) -> Result<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err(path))?;
    Ok(reader
        .headers()
        .map_err(csv_err(path))?
        .iter()
        .map(str::to_owned)
        .collect())
}

// `fixed_scale = Some(s)` keeps targets as stored and attaches `s`.
fn read_table(path: &Path, spec: &CsvSpec, fixed_scale: Option<TargetScale>) -> Result<CsvLoad> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(csv_err(path))?;
    let headers = reader.headers().map_err(csv_err(path))?.clone();
    let position: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let column = |name: &str| {
        position
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))
    };
    let feature_idx = spec
        .feature_columns
        .iter()
        .map(|c| column(c))
        .collect::<Result<Vec<_>>>()?;
    let protected_idx = column(&spec.protected_column)?;
    let target_idx = column(&spec.target_column)?;

    let d = feature_idx.len();
    let mut flat = Vec::new();
    let mut protected = Vec::new();
    let mut raw_target = Vec::new();
    let mut rejections = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err(path))?;
        let line = record.position().map_or(0, |p| p.line());
        let parse = |idx: usize, name: &str| -> std::result::Result<f64, String> {
            let cell = record.get(idx).ok_or_else(|| format!("missing cell for {name}"))?;
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(format!("column {name}: cannot parse {cell:?}")),
            }
        };
        let row: std::result::Result<Vec<f64>, String> = feature_idx
            .iter()
            .zip(&spec.feature_columns)
            .map(|(&i, name)| parse(i, name))
            .collect();
        let y = parse(target_idx, &spec.target_column);
        let a = record.get(protected_idx);
        match (row, y, a) {
            (Ok(row), Ok(y), Some(a)) => {
                flat.extend(row);
                protected.push((a == spec.protected_positive_value) as u8);
                raw_target.push(y);
            }
            (Err(reason), _, _) | (_, Err(reason), _) => rejections.push(RowRejection { line, reason }),
            (_, _, None) => rejections.push(RowRejection {
                line,
                reason: format!("missing cell for {}", spec.protected_column),
            }),
        }
    }
    if raw_target.is_empty() {
        return Err(Error::NoUsableRows(path.to_path_buf()));
    }
    let n = raw_target.len();
    let mut features = Array2::from_shape_vec((n, d), flat)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    if spec.zscore {
        zscore_columns(&mut features);
    }
    let (scale, target) = match fixed_scale {
        Some(s) => (s, raw_target),
        None => {
            let lo = raw_target.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = raw_target.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s = TargetScale::min_max(lo, hi);
            let t = raw_target
                .iter()
                .map(|y| s.to_scaled(*y).clamp(-1.0, 1.0))
                .collect();
            (s, t)
        }
    };
    Ok(CsvLoad {
        dataset: GroupedDataset::new(features, protected, target, scale)?,
        rejections,
    })
}

fn zscore_columns(features: &mut Array2<f64>) {
    for mut col in features.columns_mut() {
        let (mean, sd) = mean_sd(col.view());
        col.mapv_inplace(|v| if sd > 0.0 { (v - mean) / sd } else { v - mean });
    }
}

fn mean_sd(v: ArrayView1<f64>) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.sum() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

/// Seeded, group-stratified train/test split. The train side gets
/// `round(fraction · n)` rows; each group contributes in proportion.
pub fn split(data: &GroupedDataset, spec: &SplitSpec) -> Result<(GroupedDataset, GroupedDataset)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {} not in (0, 1)",
            spec.train_fraction
        )));
    }
    data.require_both_groups()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = data.len();
    let total_train = (spec.train_fraction * n as f64).round() as usize;
    let mut g0 = data.group_indices(0);
    let mut g1 = data.group_indices(1);
    g0.shuffle(&mut rng);
    g1.shuffle(&mut rng);
    let take0 = ((spec.train_fraction * g0.len() as f64).round() as usize).min(total_train);
    let take1 = total_train - take0;
    if take0 == 0 || take0 >= g0.len() || take1 == 0 || take1 >= g1.len() {
        return Err(Error::InvalidArgument(format!(
            "split of {}+{} rows at fraction {} would lose a group",
            g0.len(),
            g1.len(),
            spec.train_fraction
        )));
    }
    let mut train: Vec<usize> = g0[..take0].iter().chain(&g1[..take1]).copied().collect();
    let mut test: Vec<usize> = g0[take0..].iter().chain(&g1[take1..]).copied().collect();
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.subset(&train)?, data.subset(&test)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::mean_gap_bounds;
    use crate::metrics::wasserstein_p;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn spec(features: &[&str]) -> CsvSpec {
        CsvSpec {
            feature_columns: features.iter().map(|s| s.to_string()).collect(),
            protected_column: "sex".into(),
            target_column: "gpa".into(),
            protected_positive_value: "F".into(),
            zscore: false,
        }
    }

    #[test]
    fn example1_target_is_group() {
        let d = gen_example1(101, 7).unwrap();
        assert!(d.target().iter().zip(d.protected()).all(|(y, a)| *y == *a as f64));
        assert_eq!(d.group_count(0), 50);
        assert_eq!(d.group_count(1), 51);
        assert!(d.features().iter().all(|x| *x == 0.0 || *x == 1.0));
        let gap = mean_gap_bounds(&d.group_targets(0).unwrap(), &d.group_targets(1).unwrap());
        assert_eq!(gap.mae, 1.0);
        assert_eq!(gen_example1(4, 3).unwrap(), gen_example1(4, 3).unwrap());
        assert!(gen_example1(3, 0).is_err());
    }

    #[test]
    fn example1_admits_perfect_group_aware_predictor() {
        let d = gen_example1(200, 1).unwrap();
        let err: f64 = d
            .protected()
            .iter()
            .zip(d.target())
            .map(|(a, y)| (*a as f64 - y).abs())
            .sum();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn example2_group_targets() {
        let d = gen_example2(100_000, 3, 5).unwrap();
        let s = d.target_scale();
        assert!(d.target().iter().all(|y| y.abs() <= 1.0));
        assert_eq!(s.offset, 0.0);
        let y0 = d.group_targets_original(0).unwrap();
        let y1 = d.group_targets_original(1).unwrap();
        assert_abs_diff_eq!(y0.mean(), -1.0, epsilon = 0.02);
        assert_abs_diff_eq!(y1.mean(), 1.0, epsilon = 0.02);
        assert_abs_diff_eq!(y1.mean() - y0.mean(), 2.0, epsilon = 0.05);
        // blind predictor x_0 has squared error 1 in each group
        for a in 0..2u8 {
            let idx = d.group_indices(a);
            let mse = idx
                .iter()
                .map(|&i| (d.features()[[i, 0]] - s.to_original(d.target()[i])).powi(2))
                .sum::<f64>()
                / idx.len() as f64;
            assert_abs_diff_eq!(mse, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn lawschool_like_defaults() {
        let d = gen_lawschool_like(1823, 0).unwrap();
        assert_eq!(d.dim(), 6);
        assert_abs_diff_eq!(1.0 - d.alpha(), 0.452, epsilon = 0.03);
        assert!(d.target().iter().all(|y| y.abs() <= 1.0));
        assert_eq!(d, gen_lawschool_like(1823, 0).unwrap());
        assert!(gen_lawschool_like(9, 0).is_err());
    }

    #[test]
    fn lawschool_like_shift_controls_gap() {
        let n = 100_000;
        let d = gen_lawschool_like(n, 3).unwrap();
        let gap = mean_gap_bounds(&d.group_targets(0).unwrap(), &d.group_targets(1).unwrap());
        assert_abs_diff_eq!(gap.mae, 0.15, epsilon = 0.02);

        let n = 4000;
        let flat = gen_lawschool_like_with(n, 3, &LawSchoolParams { shift: 0.0, ..Default::default() }).unwrap();
        let w = wasserstein_p(&flat.group_targets(0).unwrap(), &flat.group_targets(1).unwrap(), 1.0)
            .unwrap();
        assert!(w <= 3.0 / (n as f64).sqrt(), "{w}");
    }

    #[test]
    fn csv_toy_round_trip() {
        let f = write_tmp("x1,x2,sex,gpa\n1.5,2,F,0\n-3,0.25,M,4\n7,8,F,2\n");
        let load = load_csv(f.path(), &spec(&["x1", "x2"])).unwrap();
        assert!(load.rejections.is_empty());
        let d = load.dataset;
        assert_eq!(d.features(), &array![[1.5, 2.0], [-3.0, 0.25], [7.0, 8.0]]);
        assert_eq!(d.protected(), &[1, 0, 1]);
        assert_eq!(d.target(), &[-1.0, 1.0, 0.0]);
        assert_eq!(d.target_scale(), TargetScale { scale: 0.5, offset: -1.0 });
        assert_eq!(d.target_scale().to_original(1.0), 4.0);
    }

    #[test]
    fn csv_rejects_malformed_rows() {
        let f = write_tmp("x1,sex,gpa\n1,F,1\nbad,M,2\n3,M,3\n");
        let load = load_csv(f.path(), &spec(&["x1"])).unwrap();
        assert_eq!(load.dataset.len(), 2);
        assert_eq!(load.rejections.len(), 1);
        assert_eq!(load.rejections[0].line, 3);
        assert!(load.rejections[0].reason.contains("x1"));
    }

    #[test]
    fn csv_errors() {
        let f = write_tmp("x1,sex,gpa\n1,F,1\n");
        match load_csv(f.path(), &spec(&["nope"])) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "nope"),
            other => panic!("{other:?}"),
        }
        let f = write_tmp("x1,sex,gpa\nq,F,1\n");
        assert!(matches!(load_csv(f.path(), &spec(&["x1"])), Err(Error::NoUsableRows(_))));
        let f = write_tmp("x1,sex,gpa\n1,F,1\n2,F,3\n");
        assert!(matches!(load_csv(f.path(), &spec(&["x1"])), Err(Error::EmptyGroup(0))));
    }

    #[test]
    fn csv_zscore() {
        let f = write_tmp("x1,sex,gpa\n1,F,1\n3,M,2\n");
        let mut s = spec(&["x1"]);
        s.zscore = true;
        let d = load_csv(f.path(), &s).unwrap().dataset;
        assert_eq!(d.features().column(0).to_vec(), vec![-1.0, 1.0]);
    }

    #[test]
    fn snapshot_round_trip_is_exact() {
        let d = gen_example2(50, 3, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.csv");
        d.save_snapshot(&path).unwrap();
        assert_eq!(GroupedDataset::load_snapshot(&path).unwrap(), d);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = gen_lawschool_like(100, 2).unwrap();
        let (tr, te) = split(&d, &SplitSpec { train_fraction: 0.8, seed: 1 }).unwrap();
        assert_eq!((tr.len(), te.len()), (80, 20));
        for part in [&tr, &te] {
            assert!((part.alpha() - d.alpha()).abs() <= 0.02 + 1.0 / part.len() as f64);
        }
        let again = split(&d, &SplitSpec { train_fraction: 0.8, seed: 1 }).unwrap();
        assert_eq!((tr, te), again);
    }

    #[test]
    fn split_stratification_on_large_data() {
        let d = gen_lawschool_like(1823, 4).unwrap();
        let (tr, te) = split(&d, &SplitSpec::default()).unwrap();
        assert!((tr.alpha() - d.alpha()).abs() <= 0.02);
        assert!((te.alpha() - d.alpha()).abs() <= 0.02);
    }

    #[test]
    fn split_single_group_fails() {
        let d = GroupedDataset::new(Array2::zeros((5, 1)), vec![0; 5], vec![0.0; 5], TargetScale::IDENTITY)
            .unwrap();
        assert!(split(&d, &SplitSpec::default()).is_err());
    }

    #[test]
    fn dataset_validation() {
        assert!(GroupedDataset::new(Array2::zeros((2, 1)), vec![0, 1], vec![0.0], TargetScale::IDENTITY).is_err());
        assert!(GroupedDataset::new(Array2::zeros((1, 1)), vec![2], vec![0.0], TargetScale::IDENTITY).is_err());
        assert!(GroupedDataset::new(Array2::zeros((1, 1)), vec![0], vec![1.5], TargetScale::IDENTITY).is_err());
    }
}
