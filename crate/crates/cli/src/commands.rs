use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Duration;

use fairreg::bounds::BoundCertificate;
use fairreg::certify::{certificate_sweep, certify_dataset, digest, CertifyParams, TrainedModels};
use fairreg::data::{split, GroupedDataset, SplitSpec};
use fairreg::metrics::{ks_distance, wasserstein_1_cdf, wasserstein_p};
use fairreg::optim::OptimizerKind;
use fairreg::train::{
    evaluate, train_adversarial, train_baseline, EpochRecord, FairnessReport, RunMetrics, TrainConfig,
};
use fairreg::verify::{run_suite, Suite};
use fairreg::EmpiricalDist1D;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::dataset::{self, read_samples, Loaded};
use crate::failure::Failure;
use crate::output::{display, RunDir};
use crate::{
    BoundsArgs, CertFlags, Cli, Command, Loss, MetricsArgs, Mode, OptimizerChoice, SuiteArg, SweepArgs, TrainArgs,
    TrainFlags, VerifyArgs,
};

pub fn run(cli: &Cli, argv: Vec<String>) -> Result<(), Failure> {
    let config = serde_json::to_value(&cli.command).map_err(|e| Failure::Data(e.to_string()))?;
    let args = argv[1..].to_vec();
    match &cli.command {
        Command::Metrics(a) => metrics(a, Invocation::new("metrics", a.name.as_deref(), argv, args, config)?),
        Command::Bounds(a) => bounds(a, Invocation::new("bounds", a.name.as_deref(), argv, args, config)?),
        Command::Train(a) => train(a, Invocation::new("train", a.name.as_deref(), argv, args, config)?),
        Command::Sweep(a) => sweep(a, Invocation::new("sweep", a.name.as_deref(), argv, args, config)?),
        Command::Verify(a) => verify(a, Invocation::new("verify", a.name.as_deref(), argv, args, config)?),
    }
}

/// Everything a command needs to write its manifest.
struct Invocation {
    command: &'static str,
    argv: Vec<String>,
    config: Value,
    dir: RunDir,
    seeds: Vec<u64>,
    digests: BTreeMap<String, String>,
    notes: BTreeMap<String, Value>,
}

impl Invocation {
    fn new(
        command: &'static str,
        name: Option<&str>,
        argv: Vec<String>,
        args: Vec<String>,
        config: Value,
    ) -> Result<Self, Failure> {
        Ok(Self {
            command,
            argv,
            config,
            dir: RunDir::create(command, name, &args)?,
            seeds: Vec::new(),
            digests: BTreeMap::new(),
            notes: BTreeMap::new(),
        })
    }

    fn add_dataset(&mut self, loaded: &Loaded) -> Result<(), Failure> {
        self.digests.insert("data".into(), loaded.digest.clone());
        if !loaded.rejections.is_empty() {
            eprintln!("fairreg: {} rows rejected, see rejections.json", loaded.rejections.len());
            self.dir.write_json("rejections.json", &loaded.rejections)?;
        }
        Ok(())
    }

    fn finish(self) -> Result<(), Failure> {
        let path = self
            .dir
            .finish(self.command, self.argv, self.config, self.seeds, self.digests, self.notes)?;
        println!("manifest: {}", display(&path));
        Ok(())
    }
}

#[derive(Serialize)]
struct MetricsReport {
    p: f64,
    w_p: f64,
    w1_cdf: f64,
    ks: f64,
    n0: usize,
    n1: usize,
}

fn check_order(p: f64) -> Result<(), Failure> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Failure::usage(format!("p must be at least 1, got {p}")))
    }
}

fn by_group(values: &[f64], groups: &[u8]) -> [Vec<f64>; 2] {
    let pick = |g: u8| values.iter().zip(groups).filter(|(_, a)| **a == g).map(|(v, _)| *v).collect();
    [pick(0), pick(1)]
}

fn metrics(a: &MetricsArgs, mut inv: Invocation) -> Result<(), Failure> {
    check_order(a.p)?;
    let [s0, s1] = match (&a.data, a.samples.as_slice()) {
        (Some(spec), _) => {
            let loaded = dataset::load(spec, &a.csv)?;
            inv.add_dataset(&loaded)?;
            let d = &loaded.data;
            d.require_both_groups()?;
            let column: Vec<f64> = if a.column == "y" {
                let s = d.target_scale();
                d.target().iter().map(|v| s.to_original(*v)).collect()
            } else {
                match a.column.strip_prefix('f').and_then(|k| k.parse::<usize>().ok()) {
                    Some(k) if k < d.dim() => d.features().column(k).to_vec(),
                    _ => return Err(Failure::usage(format!("--column must be y or f0..f{}", d.dim() - 1))),
                }
            };
            by_group(&column, d.protected())
        }
        (None, [x, y]) => {
            let (s0, s1) = (read_samples(x)?, read_samples(y)?);
            inv.digests.insert("a".into(), digest(&s0));
            inv.digests.insert("b".into(), digest(&s1));
            [s0, s1]
        }
        _ => return Err(Failure::usage("give two sample files or --data")),
    };
    let (d0, d1) = (EmpiricalDist1D::from_samples(&s0)?, EmpiricalDist1D::from_samples(&s1)?);
    let report = MetricsReport {
        p: a.p,
        w_p: wasserstein_p(&d0, &d1, a.p)?,
        w1_cdf: wasserstein_1_cdf(&d0, &d1),
        ks: ks_distance(&d0, &d1),
        n0: s0.len(),
        n1: s1.len(),
    };
    println!("W_p (p = {})  {:.6}", report.p, report.w_p);
    println!("W_1 (CDF)     {:.6}", report.w1_cdf);
    println!("KS            {:.6}", report.ks);
    println!("n0 = {}, n1 = {}", report.n0, report.n1);
    inv.dir.write_json("metrics.json", &report)?;
    inv.finish()
}

fn cert_params(c: &CertFlags, p: f64, alpha: Option<f64>) -> Result<CertifyParams, Failure> {
    check_order(p)?;
    if !(c.delta > 0.0 && c.delta < 1.0) {
        return Err(Failure::usage(format!("--delta must lie in (0, 1), got {}", c.delta)));
    }
    if !(c.c1 > 0.0) {
        return Err(Failure::usage(format!("--c1 must be positive, got {}", c.c1)));
    }
    if let Some(cb) = c.density_bound {
        if !(cb > 0.0 && cb.is_finite()) {
            return Err(Failure::usage(format!("--density-bound must be positive, got {cb}")));
        }
    }
    if let Some(al) = alpha {
        if !(al > 0.0 && al < 1.0) {
            return Err(Failure::usage(format!("--alpha must lie in (0, 1), got {al}")));
        }
    }
    Ok(CertifyParams {
        p,
        density_bound: c.density_bound,
        c1: c.c1,
        delta: c.delta,
        alpha,
        ..Default::default()
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into())
}

fn certificate_table(certs: &[BoundCertificate]) -> String {
    let mut s = format!(
        "{:<30} {:>12} {:>12} {:>12} {:<15} {:>12} {:>12}\n",
        "certificate", "bound", "measured", "slack", "status", "bound(orig)", "meas.(orig)"
    );
    for c in certs {
        let status = serde_json::to_value(c.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let _ = writeln!(
            s,
            "{:<30} {:>12.6} {:>12.6} {:>12.6} {:<15} {:>12} {:>12}",
            c.name,
            c.lower_bound,
            c.measured_lhs,
            c.slack,
            status,
            opt(c.lower_bound_original),
            opt(c.measured_lhs_original)
        );
    }
    s
}

fn violations<'a>(certs: impl IntoIterator<Item = &'a BoundCertificate>) -> Vec<String> {
    certs.into_iter().filter(|c| c.is_violated()).map(|c| c.name.clone()).collect()
}

fn bounds(a: &BoundsArgs, mut inv: Invocation) -> Result<(), Failure> {
    let params = cert_params(&a.cert, a.p, a.alpha)?;
    let loaded = dataset::load(&a.data, &a.csv)?;
    inv.add_dataset(&loaded)?;
    let certs = certify_dataset(&loaded.data, &params)?;
    let table = certificate_table(&certs);
    print!("{table}");
    inv.dir.write_json("certificates.json", &certs)?;
    inv.dir.write_text("table.txt", &table)?;
    let bad = violations(&certs);
    inv.finish()?;
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!("violated: {}", bad.join(", "))))
    }
}

impl TrainFlags {
    fn seed_list(&self) -> Result<Vec<u64>, Failure> {
        let seeds = match (self.seed, self.seeds.is_empty()) {
            (Some(s), _) => vec![s],
            (None, true) => vec![0],
            (None, false) => self.seeds.clone(),
        };
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(Failure::usage("duplicate seeds"));
        }
        Ok(seeds)
    }

    fn config(&self, mode: Mode, tau: f64, seed: u64) -> Result<TrainConfig, Failure> {
        let mut cfg = match mode {
            Mode::Baseline => TrainConfig::baseline(seed),
            Mode::Adversarial => TrainConfig::adversarial(tau, seed),
        };
        cfg.learning_rate = self.lr;
        cfg.epochs = self.epochs;
        cfg.batch_size = self.batch_size;
        cfg.clip_bound = self.clip;
        cfg.adversary_steps = self.adversary_steps;
        cfg.p = self.p;
        if let Some(loss) = self.loss {
            cfg.balanced = loss == Loss::Balanced;
        }
        cfg.optimizer = match self.optimizer {
            OptimizerChoice::Adadelta => OptimizerKind::adadelta(),
            OptimizerChoice::Sgd => OptimizerKind::Sgd,
        };
        cfg.hidden = self.hidden.clone();
        cfg.adversary_hidden = self.adversary_hidden;
        cfg.validate().map_err(Failure::usage)?;
        Ok(cfg)
    }

    /// Training and evaluation sets, and which one the metrics describe.
    fn split(&self, data: &GroupedDataset) -> Result<(GroupedDataset, GroupedDataset, &'static str), Failure> {
        if self.no_split {
            return Ok((data.clone(), data.clone(), "train"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Failure::usage(format!(
                "--train-fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        let (train, test) = split(
            data,
            &SplitSpec {
                train_fraction: self.train_fraction,
                seed: self.split_seed,
            },
        )?;
        Ok((train, test, "test"))
    }
}

struct RunOutcome {
    seed: u64,
    log: Vec<EpochRecord>,
    checkpoints: Value,
    models: TrainedModels,
    metrics: RunMetrics,
}

fn train_one(train: &GroupedDataset, eval: &GroupedDataset, mode: Mode, cfg: &TrainConfig) -> fairreg::Result<RunOutcome> {
    match mode {
        Mode::Baseline => {
            let r = train_baseline(train, cfg)?;
            let metrics = evaluate(None, &r.model, eval, cfg.p)?;
            Ok(RunOutcome {
                seed: cfg.seed,
                checkpoints: json!({ "model": r.model.to_checkpoint() }),
                log: r.log,
                models: TrainedModels {
                    encoder: None,
                    predictor: r.model,
                },
                metrics,
            })
        }
        Mode::Adversarial => {
            let r = train_adversarial(train, cfg)?;
            let metrics = evaluate(Some(&r.encoder), &r.predictor, eval, cfg.p)?;
            Ok(RunOutcome {
                seed: cfg.seed,
                checkpoints: json!({
                    "encoder": r.encoder.to_checkpoint(),
                    "predictor": r.predictor.to_checkpoint(),
                    "adversary": r.adversary.to_checkpoint(),
                }),
                log: r.log,
                models: TrainedModels {
                    encoder: Some(r.encoder),
                    predictor: r.predictor,
                },
                metrics,
            })
        }
    }
}

const PANEL_HEADER: [&str; 5] = ["setting", "overall error", "error sum", "KS disparity", "accuracy disparity"];

fn panel_row(label: &str, r: &FairnessReport) -> String {
    format!(
        "{:<12} {:>16} {:>16} {:>16} {:>18}\n",
        label,
        r.overall_error.to_string(),
        r.group_error_sum.to_string(),
        r.ks_disparity.to_string(),
        r.accuracy_disparity.to_string()
    )
}

fn panel_header() -> String {
    let h = PANEL_HEADER;
    format!("{:<12} {:>16} {:>16} {:>16} {:>18}\n", h[0], h[1], h[2], h[3], h[4])
}

#[derive(Serialize)]
struct TrainReport {
    mode: Mode,
    tau: f64,
    evaluated_on: &'static str,
    n_train: usize,
    n_eval: usize,
    seeds: Vec<u64>,
    config: TrainConfig,
    #[serde(flatten)]
    report: FairnessReport,
    /// One certificate list per seed, on the evaluation set.
    certificates: Vec<Vec<BoundCertificate>>,
}

fn write_run(dir: &mut RunDir, prefix: &str, run: &RunOutcome) -> Result<(), Failure> {
    dir.write_jsonl(&format!("{prefix}seed-{}/epochs.jsonl", run.seed), &run.log)?;
    dir.write_json(&format!("{prefix}seed-{}/model.json", run.seed), &run.checkpoints)
}

fn train(a: &TrainArgs, mut inv: Invocation) -> Result<(), Failure> {
    let tau = match (a.mode, a.tau) {
        (Mode::Baseline, Some(_)) => return Err(Failure::usage("--tau applies to adversarial mode only")),
        (Mode::Baseline, None) => 0.0,
        (Mode::Adversarial, t) => t.unwrap_or(1.0),
    };
    let seeds = a.train.seed_list()?;
    let configs = seeds
        .iter()
        .map(|s| a.train.config(a.mode, tau, *s))
        .collect::<Result<Vec<_>, _>>()?;
    let params = cert_params(&a.cert, a.train.p, None)?;
    let loaded = dataset::load(&a.data, &a.csv)?;
    inv.add_dataset(&loaded)?;
    let (train_set, eval_set, evaluated_on) = a.train.split(&loaded.data)?;

    let runs = configs
        .par_iter()
        .map(|cfg| train_one(&train_set, &eval_set, a.mode, cfg))
        .collect::<fairreg::Result<Vec<_>>>()?;
    let models: Vec<TrainedModels> = runs.iter().map(|r| r.models.clone()).collect();
    let certificates = certificate_sweep(&eval_set, &models, &params)?;
    for run in &runs {
        write_run(&mut inv.dir, "", run)?;
    }
    let report = TrainReport {
        mode: a.mode,
        tau,
        evaluated_on,
        n_train: train_set.len(),
        n_eval: eval_set.len(),
        seeds: seeds.clone(),
        config: configs[0].clone(),
        report: FairnessReport::from_runs(runs.iter().map(|r| r.metrics).collect()),
        certificates,
    };
    let label = match a.mode {
        Mode::Baseline => "baseline".to_string(),
        Mode::Adversarial => format!("tau={tau}"),
    };
    let table = panel_header() + &panel_row(&label, &report.report);
    print!("{table}");
    println!("evaluated on {evaluated_on} ({} rows), {} seed(s)", eval_set.len(), seeds.len());
    inv.dir.write_json("report.json", &report)?;
    inv.dir.write_text("table.txt", &table)?;
    let bad = violations(report.certificates.iter().flatten());
    inv.seeds = seeds;
    inv.finish()?;
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!("violated: {}", bad.join(", "))))
    }
}

#[derive(Serialize)]
struct SweepRow {
    setting: String,
    tau: Option<f64>,
    #[serde(flatten)]
    report: FairnessReport,
    certificates: Vec<Vec<BoundCertificate>>,
}

#[derive(Serialize)]
struct Trend {
    /// Mean KS disparity strictly decreases along increasing tau.
    ks_decreasing: bool,
    /// Mean accuracy disparity strictly decreases along increasing tau.
    accuracy_disparity_decreasing: bool,
    /// Mean accuracy disparity at the largest tau is at most that at the smallest.
    accuracy_disparity_endpoints_nonincreasing: bool,
}

#[derive(Serialize)]
struct SweepReport {
    evaluated_on: &'static str,
    n_train: usize,
    n_eval: usize,
    seeds: Vec<u64>,
    rows: Vec<SweepRow>,
    trend: Trend,
}

fn trend(rows: &[&SweepRow]) -> Trend {
    let ks: Vec<f64> = rows.iter().map(|r| r.report.ks_disparity.mean).collect();
    let acc: Vec<f64> = rows.iter().map(|r| r.report.accuracy_disparity.mean).collect();
    let strictly = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    Trend {
        ks_decreasing: strictly(&ks),
        accuracy_disparity_decreasing: strictly(&acc),
        accuracy_disparity_endpoints_nonincreasing: acc.last() <= acc.first(),
    }
}

fn sweep(a: &SweepArgs, mut inv: Invocation) -> Result<(), Failure> {
    if a.taus.len() < 2 {
        return Err(Failure::usage("a sweep needs at least two taus"));
    }
    if a.taus.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Failure::usage("taus must be finite and nonnegative"));
    }
    let seeds = a.train.seed_list()?;
    let mut jobs: Vec<(Option<usize>, TrainConfig)> = Vec::new();
    for s in &seeds {
        jobs.push((None, a.train.config(Mode::Baseline, 0.0, *s)?));
    }
    for (k, tau) in a.taus.iter().enumerate() {
        for s in &seeds {
            jobs.push((Some(k), a.train.config(Mode::Adversarial, *tau, *s)?));
        }
    }
    let params = cert_params(&a.cert, a.train.p, None)?;
    let loaded = dataset::load(&a.data, &a.csv)?;
    inv.add_dataset(&loaded)?;
    let (train_set, eval_set, evaluated_on) = a.train.split(&loaded.data)?;

    let results = jobs
        .par_iter()
        .map(|(k, cfg)| {
            let mode = if k.is_some() { Mode::Adversarial } else { Mode::Baseline };
            train_one(&train_set, &eval_set, mode, cfg)
        })
        .collect::<fairreg::Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let settings = std::iter::once(None).chain((0..a.taus.len()).map(Some));
    for setting in settings {
        let runs: Vec<&RunOutcome> = jobs
            .iter()
            .zip(&results)
            .filter(|((k, _), _)| *k == setting)
            .map(|(_, r)| r)
            .collect();
        let (label, prefix, tau) = match setting {
            None => ("baseline".to_string(), "baseline/".to_string(), None),
            Some(k) => (format!("tau={}", a.taus[k]), format!("tau-{}-{}/", k, a.taus[k]), Some(a.taus[k])),
        };
        for r in &runs {
            write_run(&mut inv.dir, &prefix, r)?;
        }
        let models: Vec<TrainedModels> = runs.iter().map(|r| r.models.clone()).collect();
        rows.push(SweepRow {
            setting: label,
            tau,
            report: FairnessReport::from_runs(runs.iter().map(|r| r.metrics).collect()),
            certificates: certificate_sweep(&eval_set, &models, &params)?,
        });
    }
    let mut by_tau: Vec<&SweepRow> = rows.iter().filter(|r| r.tau.is_some()).collect();
    by_tau.sort_by(|x, y| x.tau.partial_cmp(&y.tau).unwrap_or(std::cmp::Ordering::Equal));
    let trend = trend(&by_tau);

    let mut table = panel_header();
    for r in &rows {
        table += &panel_row(&r.setting, &r.report);
    }
    let _ = writeln!(
        table,
        "trend: ks decreasing in tau: {}; accuracy disparity decreasing: {}; accuracy disparity at max tau <= at min tau: {}",
        trend.ks_decreasing, trend.accuracy_disparity_decreasing, trend.accuracy_disparity_endpoints_nonincreasing
    );
    print!("{table}");
    println!("evaluated on {evaluated_on} ({} rows), {} seed(s)", eval_set.len(), seeds.len());
    let report = SweepReport {
        evaluated_on,
        n_train: train_set.len(),
        n_eval: eval_set.len(),
        seeds: seeds.clone(),
        rows,
        trend,
    };
    inv.dir.write_json("sweep.json", &report)?;
    inv.dir.write_text("table.txt", &table)?;
    let bad = violations(report.rows.iter().flat_map(|r| r.certificates.iter().flatten()));
    inv.seeds = seeds;
    inv.finish()?;
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!("violated: {}", bad.join(", "))))
    }
}

fn verify(a: &VerifyArgs, mut inv: Invocation) -> Result<(), Failure> {
    if !(a.budget.is_finite() && a.budget >= 0.0) {
        return Err(Failure::usage(format!("--budget must be a nonnegative number of seconds, got {}", a.budget)));
    }
    let suite = match a.suite {
        SuiteArg::Metrics => Suite::Metrics,
        SuiteArg::Bounds => Suite::Bounds,
        SuiteArg::Nn => Suite::Nn,
        SuiteArg::All => Suite::All,
    };
    let report = run_suite(suite, Duration::from_secs_f64(a.budget), a.seed);
    println!("{report}");
    // timings live in the manifest so the report itself is reproducible
    let mut value = serde_json::to_value(&report).map_err(|e| Failure::Data(e.to_string()))?;
    let mut timings = serde_json::Map::new();
    if let Some(obj) = value.as_object_mut() {
        obj.remove("elapsed_seconds");
        if let Some(Value::Array(props)) = obj.get_mut("properties") {
            for p in props {
                if let Some(po) = p.as_object_mut() {
                    let name = po.get("name").and_then(Value::as_str).unwrap_or_default().to_string();
                    if let Some(t) = po.remove("seconds") {
                        timings.insert(name, t);
                    }
                }
            }
        }
    }
    inv.dir.write_json("verify.json", &value)?;
    inv.notes.insert("elapsed_seconds".into(), json!(report.elapsed_seconds));
    inv.notes.insert("property_seconds".into(), Value::Object(timings));
    inv.seeds = vec![a.seed];
    let passed = report.passed();
    inv.finish()?;
    if passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .properties
            .iter()
            .filter(|p| p.outcome != fairreg::verify::Outcome::Pass)
            .map(|p| p.name.as_str())
            .collect();
        Err(Failure::Verification(failed.join(", ")))
    }
}
