use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fairreg::GaussianDist1D;
use serde_json::Value;
use tempfile::TempDir;

struct Env {
    out: TempDir,
    files: TempDir,
}

impl Env {
    fn new() -> Self {
        Self {
            out: TempDir::new().unwrap(),
            files: TempDir::new().unwrap(),
        }
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_fairreg"))
            .args(args)
            .env("FAIRREG_OUT", self.out.path())
            .output()
            .unwrap()
    }

    /// Runs with a fixed run name and returns the run directory.
    fn run_ok(&self, args: &[&str], name: &str) -> PathBuf {
        let mut all = args.to_vec();
        all.extend(["--name", name]);
        let out = self.run(&all);
        assert!(
            out.status.success(),
            "{args:?}: {}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
        self.out.path().join(args[0]).join(name)
    }

    fn file(&self, name: &str, text: &str) -> String {
        let p = self.files.path().join(name);
        fs::write(&p, text).unwrap();
        p.to_string_lossy().into_owned()
    }
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

fn cert<'a>(certs: &'a Value, name: &str) -> &'a Value {
    certs.as_array().unwrap().iter().find(|c| c["name"] == name).unwrap()
}

#[test]
fn metrics_of_identical_and_point_mass_files() {
    let env = Env::new();
    let a = env.file("a.txt", "# sample\n0.5\n-1\n2\n");
    let dir = env.run_ok(&["metrics", &a, &a], "same");
    let m = json(&dir.join("metrics.json"));
    for k in ["w_p", "w1_cdf", "ks"] {
        assert_eq!(f(&m[k]), 0.0);
    }
    let (z, o) = (env.file("z.txt", "0\n"), env.file("o.txt", "1\n"));
    let m = json(&env.run_ok(&["metrics", &z, &o, "--p", "1"], "unit").join("metrics.json"));
    assert_eq!((f(&m["w_p"]), f(&m["w1_cdf"]), f(&m["ks"])), (1.0, 1.0, 1.0));
    assert_eq!((m["n0"].as_u64(), m["n1"].as_u64()), (Some(1), Some(1)));
}

#[test]
fn metrics_of_shifted_gaussian_samples() {
    let env = Env::new();
    let write = |name: &str, mean: f64, seed: u64| {
        let s = GaussianDist1D::new(mean, 1.0).unwrap().sample(100_000, seed).unwrap();
        let text: String = s.iter().map(|v| format!("{v:?}\n")).collect();
        env.file(name, &text)
    };
    let (a, b) = (write("a.txt", -1.0, 1), write("b.txt", 1.0, 2));
    let m = json(&env.run_ok(&["metrics", &a, &b], "gauss").join("metrics.json"));
    assert!((f(&m["w_p"]) - 2.0).abs() <= 0.05, "{m}");
}

#[test]
fn bounds_on_example1() {
    let env = Env::new();
    let dir = env.run_ok(&["bounds", "gen:example1:n=1000,seed=3", "--p", "1"], "ex1");
    let certs = json(&dir.join("certificates.json"));
    let lb = f(&cert(&certs, "parity_error_floor")["lower_bound"]);
    assert!((lb - 1.0).abs() <= 2.0 / 1000f64.sqrt());
    assert!(fs::read_to_string(dir.join("table.txt")).unwrap().contains("parity_error_floor"));
}

#[test]
fn bounds_on_identical_groups_are_zero() {
    let env = Env::new();
    let mut csv = String::from("x,g,y\n");
    for (i, y) in [0.1, 0.7, -0.3, 0.2, 0.9].iter().enumerate() {
        for g in ["m", "f"] {
            csv += &format!("{i},{g},{y}\n");
        }
    }
    let path = env.file("same.csv", &csv);
    let dir = env.run_ok(
        &["bounds", &path, "--features", "x", "--protected", "g", "--target", "y", "--positive", "f"],
        "same",
    );
    for c in json(&dir.join("certificates.json")).as_array().unwrap() {
        let lb = f(&c["lower_bound"]);
        if c["name"] == "finite_sample_floor" {
            assert!(lb < 0.0);
        } else {
            assert!(lb.abs() <= 1e-12, "{c}");
        }
        assert_eq!(c["status"], "vacuous");
    }
}

#[test]
fn bounds_price_comparison_on_example2() {
    let env = Env::new();
    let dir = env.run_ok(&["bounds", "gen:example2:n=100000,d=10"], "ex2");
    let c = cert(&json(&dir.join("certificates.json")), "fair_price_with_vs_without_a").clone();
    // stored as bound = price without A, measured = price with A
    assert!(f(&c["measured_lhs"]) >= f(&c["lower_bound"]));
    assert_eq!(c["status"], "satisfied");
}

fn linear_csv(env: &Env) -> String {
    let mut csv = String::from("a,b,c,grp,y\n");
    let mut state: u64 = 7;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    for i in 0..1000 {
        let (a, b, c) = (next(), next(), next());
        let y = 0.3 * a - 0.2 * b + 0.25 * c;
        csv += &format!("{a:?},{b:?},{c:?},{},{y:?}\n", i % 2);
    }
    env.file("linear.csv", &csv)
}

#[test]
fn baseline_fits_linear_csv() {
    let env = Env::new();
    let path = linear_csv(&env);
    let dir = env.run_ok(
        &[
            "train", &path, "--mode", "baseline", "--features", "a,b,c", "--protected", "grp", "--target", "y",
            "--batch-size", "32",
        ],
        "lin",
    );
    let r = json(&dir.join("report.json"));
    assert_eq!(r["evaluated_on"], "test");
    assert!(f(&r["overall_error"]["mean"]) <= 1e-2, "{}", r["overall_error"]);
    let log = fs::read_to_string(dir.join("seed-0/epochs.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 200);
    let first: Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    for k in ["epoch", "objective", "balanced_error", "gap_estimate", "ks_disparity"] {
        assert!(first.get(k).is_some(), "missing {k}");
    }
}

#[test]
fn adversarial_training_on_example1() {
    let env = Env::new();
    let dir = env.run_ok(&["train", "gen:example1:n=1000", "--tau", "10", "--p", "1"], "ex1");
    let r = json(&dir.join("report.json"));
    assert!(f(&r["ks_disparity"]["mean"]) <= 0.1, "{}", r["ks_disparity"]);
    let certs = r["certificates"][0].as_array().unwrap();
    assert_eq!(certs.len(), 7);
    assert!(certs.iter().all(|c| c["status"] != "violated"));
    let model = json(&dir.join("seed-0/model.json"));
    assert!(model.get("encoder").is_some() && model.get("adversary").is_some());
}

#[test]
fn repeated_runs_give_identical_reports() {
    let env = Env::new();
    let args = ["train", "gen:lawschool:n=400", "--seeds", "1,2,3,4,5", "--epochs", "20", "--tau", "1"];
    let a = fs::read(env.run_ok(&args, "first").join("report.json")).unwrap();
    let b = fs::read(env.run_ok(&args, "second").join("report.json")).unwrap();
    assert_eq!(a, b);

    // the manifest's argv reproduces the run
    let manifest = json(&env.out.path().join("train/first/manifest.json"));
    let argv: Vec<String> = manifest["argv"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    let mut replay: Vec<&str> = argv[1..].iter().map(String::as_str).collect();
    let k = replay.iter().position(|a| *a == "--name").unwrap();
    replay[k + 1] = "replay";
    let out = env.run(&replay);
    assert!(out.status.success());
    assert_eq!(fs::read(env.out.path().join("train/replay/report.json")).unwrap(), a);
    assert_eq!(manifest["seeds"], serde_json::json!([1, 2, 3, 4, 5]));
    for artifact in manifest["artifacts"].as_array().unwrap() {
        assert!(env.out.path().join("train/first").join(artifact.as_str().unwrap()).exists());
    }
}

#[test]
fn sweep_reports_trend() {
    let env = Env::new();
    let dir = env.run_ok(&["sweep", "gen:lawschool", "--taus", "0.1,1,5,10", "--seeds", "0,1,2,3,4"], "trend");
    let r = json(&dir.join("sweep.json"));
    let rows = r["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0]["setting"], "baseline");
    assert_eq!(r["trend"]["ks_decreasing"], true);
    let table = fs::read_to_string(dir.join("table.txt")).unwrap();
    assert!(table.contains("±") && table.contains("tau=10"));
}

#[test]
fn sweep_with_repeated_tau_and_single_seed() {
    let env = Env::new();
    let dir = env.run_ok(&["sweep", "gen:lawschool:n=300", "--taus", "0,0", "--seeds", "0,1,2", "--epochs", "20"], "zero");
    let rows = json(&dir.join("sweep.json"))["rows"].as_array().unwrap().clone();
    for k in ["overall_error", "group_error_sum", "ks_disparity", "accuracy_disparity"] {
        let (a, b) = (&rows[1][k], &rows[2][k]);
        let spread = 2.0 * f(&a["std"]).max(f(&b["std"]));
        assert!((f(&a["mean"]) - f(&b["mean"])).abs() <= spread, "{k}");
    }
    let dir = env.run_ok(&["sweep", "gen:lawschool:n=300", "--taus", "1,5", "--seed", "3", "--epochs", "10"], "single");
    for row in json(&dir.join("sweep.json"))["rows"].as_array().unwrap() {
        assert_eq!(f(&row["ks_disparity"]["std"]), 0.0);
        assert_eq!(f(&row["group_error_sum"]["std"]), 0.0);
    }
}

#[test]
fn verify_suites() {
    let env = Env::new();
    for suite in ["metrics", "nn", "all"] {
        let dir = env.run_ok(&["verify", "--suite", suite, "--budget", "300"], suite);
        let v = json(&dir.join("verify.json"));
        let props = v["properties"].as_array().unwrap();
        assert!(!props.is_empty());
        assert!(props.iter().all(|p| p["outcome"] == "pass"));
    }
}

#[test]
fn exit_codes() {
    let env = Env::new();
    assert_eq!(env.run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(env.run(&["sweep", "gen:example1", "--taus", "1"]).status.code(), Some(1));
    assert_eq!(env.run(&["bounds", "gen:example1:n=2"]).status.code(), Some(1));
    assert_eq!(env.run(&["train", "gen:example1", "--mode", "baseline", "--tau", "1"]).status.code(), Some(1));
    assert_eq!(env.run(&["bounds", "gen:example1", "--delta", "2"]).status.code(), Some(1));
    assert_eq!(env.run(&["bounds", "/nonexistent/file.csv"]).status.code(), Some(2));
    let bad = env.file("bad.txt", "1\n2\nthree\n");
    let out = env.run(&["metrics", &bad, &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.txt:3"));
    let one_group = env.file("one.csv", "x,g,y\n1,a,0\n2,a,1\n");
    let out = env.run(&["bounds", &one_group, "--features", "x", "--protected", "g", "--target", "y"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(env.run(&["verify", "--suite", "nn", "--budget", "0"]).status.code(), Some(3));
    assert_eq!(env.run(&["--help"]).status.code(), Some(0));
}

#[test]
fn csv_rejections_are_reported() {
    let env = Env::new();
    let path = env.file("rows.csv", "x,g,y\n1,0,0.5\n2,1,0.1\noops,1,0.2\n3,0,0.9\n4,1,0.4\n");
    let dir = env.run_ok(&["bounds", &path, "--features", "x", "--protected", "g", "--target", "y"], "rej");
    let rej = json(&dir.join("rejections.json"));
    assert_eq!(rej.as_array().unwrap().len(), 1);
    let manifest = json(&dir.join("manifest.json"));
    assert!(manifest["artifacts"].as_array().unwrap().iter().any(|a| a == "rejections.json"));
}
