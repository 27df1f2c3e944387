//! Dataset specs: `gen:<name>[:key=value,...]` or a CSV path.

use std::path::{Path, PathBuf};

use clap::Args;
use fairreg::certify::digest;
use fairreg::data::{
    gen_example1, gen_example2, gen_lawschool_like_with, load_csv, CsvSpec, GroupedDataset, LawSchoolParams,
    RowRejection,
};
use serde::Serialize;

use crate::failure::Failure;

/// Column mapping for CSV inputs. Without `--protected` the path is read as
/// a dataset snapshot (`f0..,A,Y` plus its JSON sidecar).
#[derive(Args, Debug, Clone, Serialize)]
pub struct CsvFlags {
    /// Feature columns, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<String>,
    #[arg(long)]
    pub protected: Option<String>,
    #[arg(long)]
    pub target: Option<String>,
    /// Value of the protected column that maps to A = 1.
    #[arg(long, default_value = "1")]
    pub positive: String,
    /// Standardize feature columns.
    #[arg(long)]
    pub zscore: bool,
}

pub struct Loaded {
    pub data: GroupedDataset,
    pub digest: String,
    pub rejections: Vec<RowRejection>,
}

pub fn load(spec: &str, csv: &CsvFlags) -> Result<Loaded, Failure> {
    let (data, rejections) = match spec.strip_prefix("gen:") {
        Some(rest) => (generate(rest)?, Vec::new()),
        None => read_file(Path::new(spec), csv)?,
    };
    let digest = dataset_digest(&data);
    Ok(Loaded {
        data,
        digest,
        rejections,
    })
}

pub fn dataset_digest(data: &GroupedDataset) -> String {
    let s = data.target_scale();
    let groups: Vec<f64> = data.protected().iter().map(|a| *a as f64).collect();
    let shape = [data.len() as f64, data.dim() as f64, s.scale, s.offset];
    let feats: Vec<f64> = data.features().iter().copied().collect();
    digest(&[&shape[..], &feats, &groups, data.target()].concat())
}

fn read_file(path: &Path, csv: &CsvFlags) -> Result<(GroupedDataset, Vec<RowRejection>), Failure> {
    if !path.exists() {
        return Err(Failure::Data(format!("{}: no such file", path.display())));
    }
    match (&csv.protected, &csv.target) {
        (None, None) => Ok((GroupedDataset::load_snapshot(path)?, Vec::new())),
        (Some(protected), Some(target)) => {
            if csv.features.is_empty() {
                return Err(Failure::usage("--features is required with --protected"));
            }
            let spec = CsvSpec {
                feature_columns: csv.features.clone(),
                protected_column: protected.clone(),
                target_column: target.clone(),
                protected_positive_value: csv.positive.clone(),
                zscore: csv.zscore,
            };
            let load = load_csv(path, &spec)?;
            Ok((load.dataset, load.rejections))
        }
        _ => Err(Failure::usage("--protected and --target go together")),
    }
}

struct GenArgs {
    pairs: Vec<(String, String)>,
}

impl GenArgs {
    fn parse(s: &str) -> Result<Self, Failure> {
        let mut pairs = Vec::new();
        for kv in s.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Failure::usage(format!("expected key=value in generator spec, got {kv:?}")))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(Self { pairs })
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<(), Failure> {
        match self.pairs.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            Some((k, _)) => Err(Failure::usage(format!("unknown generator key {k:?}; expected one of {allowed:?}"))),
            None => Ok(()),
        }
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, Failure> {
        match self.pairs.iter().rev().find(|(k, _)| k == key) {
            None => Ok(default),
            Some((_, v)) => v
                .parse()
                .map_err(|_| Failure::usage(format!("bad value {v:?} for generator key {key:?}"))),
        }
    }
}

fn generate(rest: &str) -> Result<GroupedDataset, Failure> {
    let (name, args) = rest.split_once(':').unwrap_or((rest, ""));
    let args = GenArgs::parse(args)?;
    let data = match name {
        "example1" => {
            args.check_keys(&["n", "seed"])?;
            gen_example1(args.get("n", 1000)?, args.get("seed", 0)?)
        }
        "example2" => {
            args.check_keys(&["n", "d", "seed"])?;
            gen_example2(args.get("n", 100_000)?, args.get("d", 10)?, args.get("seed", 0)?)
        }
        "lawschool" => {
            args.check_keys(&["n", "seed", "shift", "p_a1"])?;
            let d = LawSchoolParams::default();
            let params = LawSchoolParams {
                shift: args.get("shift", d.shift)?,
                p_a1: args.get("p_a1", d.p_a1)?,
                ..d
            };
            gen_lawschool_like_with(args.get("n", 1823)?, args.get("seed", 0)?, &params)
        }
        other => {
            return Err(Failure::usage(format!(
                "unknown generator {other:?}; expected example1, example2 or lawschool"
            )))
        }
    };
    // generator preconditions are argument errors
    data.map_err(Failure::usage)
}

/// Reads one number per line; blank lines and `#` comments are skipped.
pub fn read_samples(path: &PathBuf) -> Result<Vec<f64>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| Failure::Data(format!("{}:{}: not a number: {line:?}", path.display(), i + 1)))?;
        if !v.is_finite() {
            return Err(Failure::Data(format!("{}:{}: non-finite value", path.display(), i + 1)));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Failure::Data(format!("{}: no samples", path.display())));
    }
    Ok(out)
}
