use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fpca(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpca"))
        .args(args)
        .current_dir(dir)
        .env_remove("FPCA_SEED")
        .env_remove("FPCA_CONFIG")
        .env_remove("FPCA_OUT")
        .output()
        .expect("spawn fpca")
}

fn ok(args: &[&str], dir: &Path) -> Vec<u8> {
    let out = fpca(args, dir);
    assert!(
        out.status.success(),
        "fpca {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("valid json")
}

fn error_kind(out: &Output) -> String {
    let v: Value = serde_json::from_slice(&out.stderr).expect("error json on stderr");
    v["error"]["kind"].as_str().expect("kind").to_string()
}

fn gen_ica(dir: &Path, source: &str, samples: usize) {
    ok(
        &[
            "gen", "ica", "--n", "3", "--source", source, "--samples", &samples.to_string(),
            "--model-out", "model.json", "--out", "x.csv", "--seed", "5",
        ],
        dir,
    );
}

#[test]
fn ica_recovers_rademacher_sources() {
    let dir = TempDir::new().unwrap();
    gen_ica(dir.path(), "rademacher", 100_000);
    let r = json(&ok(&["ica", "--input", "x.csv", "--truth", "model.json", "--seed", "1"], dir.path()));
    assert_eq!(r["method"], "fourier_pca");
    let err = r["matching"]["max_error"].as_f64().unwrap();
    assert!(err <= 0.05, "max error {err}");
}

#[test]
fn ica_from_model_and_config_file() {
    let dir = TempDir::new().unwrap();
    gen_ica(dir.path(), "uniform", 10);
    std::fs::write(
        dir.path().join("run.toml"),
        "seed = 2\nreplicas = 3\n\n[data]\nmodel = \"model.json\"\nsamples = 100000\n\n[params]\nsigma = { mode = \"scaled\", target = 0.7 }\n",
    )
    .unwrap();
    let r = json(&ok(&["--config", "run.toml", "ica"], dir.path()));
    assert_eq!(r["seed"], 2);
    assert_eq!(r["diagnostics"]["replicas"]["requested"], 3);
    assert!(r["matching"]["max_error"].as_f64().unwrap() <= 0.1);
}

#[test]
fn gaussian_sources_exit_with_spectrum_code() {
    let dir = TempDir::new().unwrap();
    gen_ica(dir.path(), "gaussian", 50_000);
    let out = fpca(&["ica", "--input", "x.csv", "--out", "report.json"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_kind(&out), "spectrum");
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn missing_input_exits_with_io_code_and_no_report() {
    let dir = TempDir::new().unwrap();
    let out = fpca(&["ica", "--input", "absent.csv", "--out", "report.json"], dir.path());
    assert_eq!(out.status.code(), Some(5));
    assert_eq!(error_kind(&out), "io");
    assert!(out.stdout.is_empty());
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn config_errors_exit_with_config_code() {
    let dir = TempDir::new().unwrap();
    gen_ica(dir.path(), "rademacher", 1000);
    for args in [
        &["-P", "no_such_key=1", "ica", "--input", "x.csv"][..],
        &["-P", "resolvability=-1", "ica", "--input", "x.csv"][..],
        &["ica"][..],
        &["--replicas", "2", "gmm", "--input", "x.csv", "--k", "2"][..],
        &["tensor", "--input", "x.csv", "--rank", "lots"][..],
    ] {
        let out = fpca(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(error_kind(&out), "config");
    }
    std::fs::write(dir.path().join("bad.toml"), "seed = 1\ncolour = \"red\"\n").unwrap();
    let out = fpca(&["--config", "bad.toml", "ica", "--input", "x.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exact_tensor_pair_decomposes() {
    let dir = TempDir::new().unwrap();
    ok(&["gen", "tensor", "--n", "3", "--d", "4", "--m", "5", "--out", "t.json", "--seed", "9"], dir.path());
    for rank in ["auto", "5"] {
        let r = json(&ok(&["tensor", "--input", "t.json", "--rank", rank], dir.path()));
        assert_eq!(r["m"], 5);
        let err = r["matching"]["max_error"].as_f64().unwrap();
        assert!(err <= 1e-6, "rank {rank}: max error {err}");
    }
}

#[test]
fn bench_kr_writes_one_row_per_trial() {
    let dir = TempDir::new().unwrap();
    let csv = String::from_utf8(ok(&["bench-kr", "--n", "10", "--d", "3", "--trials", "5"], dir.path())).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[0].starts_with("trial,sigma_min"));
}

#[test]
fn gmm_single_component_from_population_moments() {
    let dir = TempDir::new().unwrap();
    ok(&["gen", "gmm", "--n", "4", "--k", "1", "--out", "g.json", "--seed", "4"], dir.path());
    let truth = json(&std::fs::read(dir.path().join("g.json")).unwrap());
    let r = json(&ok(&["gmm", "--model", "g.json", "--analytic"], dir.path()));
    let got = r["model"]["mixture"]["variances"][0].as_f64().unwrap();
    let want = truth["variances"][0].as_f64().unwrap();
    assert!((got - want).abs() <= 1e-3, "variance {got} vs {want}");
}

#[test]
fn gmm_from_samples() {
    let dir = TempDir::new().unwrap();
    ok(
        &[
            "gen", "gmm", "--n", "5", "--k", "3", "--samples", "200000", "--model-out", "g.json", "--out",
            "x.csv", "--seed", "7",
        ],
        dir.path(),
    );
    let r = json(&ok(&["gmm", "--input", "x.csv", "--truth", "g.json"], dir.path()));
    let m = &r["model"]["matching"];
    assert!(m["max_mean_error"].as_f64().unwrap() <= 0.15);
    assert!(m["max_weight_error"].as_f64().unwrap() <= 0.05);
}

#[test]
fn runs_are_reproducible() {
    let dir = TempDir::new().unwrap();
    gen_ica(dir.path(), "rademacher", 20_000);
    let run = |threads: &str| {
        let mut r = json(&ok(
            &["ica", "--input", "x.csv", "--seed", "11", "--threads", threads, "--replicas", "2"],
            dir.path(),
        ));
        r.as_object_mut().unwrap().remove("timings");
        r
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn generated_samples_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = ok(&["gen", "ica", "--n", "2", "--samples", "3000", "--seed", "3"], dir.path());
    let b = ok(&["gen", "ica", "--n", "2", "--samples", "3000", "--seed", "3"], dir.path());
    let c = ok(&["gen", "ica", "--n", "2", "--samples", "3000", "--seed", "4"], dir.path());
    assert_eq!(a, b);
    assert_ne!(a, c);
}
