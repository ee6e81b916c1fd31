#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::{mean_and_cov, min_distance_to_outliers, outlier_fixture, pm10_samples};
use nalgebra::DVector;
use rgess_cli::config::ExperimentConfig;
use rgess_cli::experiment::Experiment;
use rgess_cli::presets::{load_preset, PRESETS};
use rgess_core::diagnostics::{read_mixtures_csv, read_trace_csv, write_mixtures_csv};
use rgess_core::distributions::Mixture;

fn rgess(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rgess"));
    cmd.args(args).env_remove("RGESS_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn rgess")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SMALL: &str = r#"
output = "unused"
target.kind = "gauss_mix"
run.kernel = "tmrgess"
run.chains = 8
run.iterations = 30
run.burn_in = 10
init.mean = [5.0, 5.0]
init.variance = 5.0
adaptation.scheme = "em_tmm"
adaptation.components = 2
adaptation.interval = 10
report.window = 10
"#;

fn run_small(tmp: &Path, name: &str, set: &[&str], envs: &[(&str, &str)]) -> (Output, PathBuf) {
    let cfg = tmp.join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out_dir = tmp.join(name);
    let mut args = vec![
        "run",
        cfg.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
    ];
    for kv in set {
        args.extend(["--set", kv]);
    }
    let out = rgess(&args, envs);
    (out, out_dir)
}

#[test]
fn presets_round_trip_and_validate() {
    for (name, _) in PRESETS {
        let cfg = load_preset(name, &[]).unwrap();
        let again = ExperimentConfig::parse(&cfg.to_toml(), &[]).unwrap();
        assert_eq!(cfg, again, "{name}");
        Experiment::prepare(cfg, None).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn overrides() {
    let cfg = ExperimentConfig::parse(
        SMALL,
        &[
            "run.iterations=200".into(),
            "run.kernel=gmrgess".into(),
            "adaptation.scheme = \"vi_gmm\"".into(),
            "adaptation.vi.nu0=4.5".into(),
            "init.mean=[1.0, 2.0]".into(),
        ],
    )
    .unwrap();
    assert_eq!(cfg.run.iterations, 200);
    assert_eq!(cfg.run.kernel.as_str(), "gmrgess");
    assert_eq!(cfg.adaptation.scheme.as_str(), "vi_gmm");
    assert_eq!(cfg.adaptation.vi.nu0, Some(4.5));
    assert_eq!(cfg.init.mean, vec![1.0, 2.0]);
    assert!(ExperimentConfig::parse(SMALL, &["run.iterations".into()]).is_err());
    assert!(ExperimentConfig::parse(SMALL, &["run.kernel=nope".into()]).is_err());
    assert!(ExperimentConfig::parse(SMALL, &["init.mean.x=1".into()]).is_err());
}

#[test]
fn run_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let (out, dir) = run_small(tmp.path(), "run", &[], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for f in ["trace.csv", "mixtures.csv", "summary.csv", "config.toml"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let traces = read_trace_csv(dir.join("trace.csv")).unwrap();
    assert_eq!(traces.len(), 8);
    assert!(traces.iter().all(|c| c.len() == 30));

    let d = dir.to_str().unwrap();
    assert_eq!(code(&rgess(&["report", d], &[])), 0);
    let summary = fs::read(dir.join("summary.csv")).unwrap();
    let first = fs::read(dir.join("report.csv")).unwrap();
    assert_eq!(summary, first);
    assert_eq!(code(&rgess(&["report", d], &[])), 0);
    assert_eq!(first, fs::read(dir.join("report.csv")).unwrap());

    // 30 iterations: windows of 7 give 7,7,7,7,2
    assert_eq!(code(&rgess(&["report", d, "--window", "7"], &[])), 0);
    let text = fs::read_to_string(dir.join("report.csv")).unwrap();
    assert_eq!(
        text.lines()
            .filter(|l| l.starts_with("rejection_rate,"))
            .count(),
        5
    );
    let summary = String::from_utf8(summary).unwrap();
    assert_eq!(
        summary
            .lines()
            .filter(|l| l.starts_with("rejection_rate,"))
            .count(),
        3
    );
    assert_eq!(
        summary
            .lines()
            .filter(|l| l.starts_with("mode_coverage,"))
            .count(),
        4
    );
    assert_eq!(
        summary
            .lines()
            .filter(|l| l.starts_with("posterior_mean,"))
            .count(),
        2
    );
}

#[test]
fn report_window_arithmetic() {
    let tmp = tempfile::tempdir().unwrap();
    let (out, dir) = run_small(tmp.path(), "run", &[], &[]);
    assert_eq!(code(&out), 0);
    let traces = read_trace_csv(dir.join("trace.csv")).unwrap();
    assert_eq!(
        code(&rgess(
            &["report", dir.to_str().unwrap(), "--window", "30"],
            &[]
        )),
        0
    );
    let text = fs::read_to_string(dir.join("report.csv")).unwrap();
    let line = text
        .lines()
        .find(|l| l.starts_with("rejection_rate,0,"))
        .unwrap();
    let value: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
    let total: usize = traces.iter().flatten().map(|r| r.rejections).sum();
    assert_eq!(value, total as f64 / 240.0);
}

#[test]
fn validation_failures_write_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    for (extra, needle) in [
        ("run.kernel=gmrgess", "Gaussian scheme"),
        ("run.chains=1", "chains"),
        ("run.burn_in=30", "burn_in"),
        ("init.mean=[1.0, 2.0, 3.0]", "dimension"),
    ] {
        let (out, dir) = run_small(tmp.path(), "bad", &[extra], &[]);
        assert_eq!(code(&out), 1, "{extra}: {}", stderr(&out));
        assert!(stderr(&out).contains(needle), "{extra}: {}", stderr(&out));
        assert!(!dir.exists(), "{extra}");
    }
    let (out, dir) = run_small(tmp.path(), "bad", &[], &[("RGESS_THREADS", "zero")]);
    assert_eq!(code(&out), 1);
    assert!(!dir.exists());

    let missing = tmp.path().join("nope.toml");
    let out = rgess(&["run", missing.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("nope.toml"));

    let covtype = format!(
        "{SMALL}target = {{ kind = \"covtype\", path = \"{}\" }}\n",
        tmp.path().join("covtype.data").display()
    )
    .replace("target.kind = \"gauss_mix\"\n", "");
    let cfg = tmp.path().join("cov.toml");
    fs::write(&cfg, covtype).unwrap();
    let out = rgess(
        &[
            "run",
            cfg.to_str().unwrap(),
            "--output",
            tmp.path().join("c").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("covtype.data"), "{}", stderr(&out));
    assert!(!tmp.path().join("c").exists());
}

#[test]
fn runtime_failure_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    // the squared distance to every mode overflows, so the starting log
    // density is -inf
    let (out, _) = run_small(
        tmp.path(),
        "boom",
        &["init.mean=[5e154, 0.0]", "init.variance=1.0"],
        &[],
    );
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("chain"), "{}", stderr(&out));
}

#[test]
fn report_errors_name_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rgess(&["report", tmp.path().to_str().unwrap()], &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("config.toml"));

    let (out, dir) = run_small(tmp.path(), "run", &[], &[]);
    assert_eq!(code(&out), 0);
    let trace = dir.join("trace.csv");
    let mut text = fs::read_to_string(&trace).unwrap();
    text.push_str("0,31,0,zero,1.0,2.0\n");
    fs::write(&trace, text).unwrap();
    let out = rgess(&["report", dir.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("trace.csv"), "{}", stderr(&out));
}

#[test]
fn thread_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, da) = run_small(tmp.path(), "t1", &[], &[("RGESS_THREADS", "1")]);
    let (b, db) = run_small(tmp.path(), "t3", &[], &[("RGESS_THREADS", "3")]);
    assert_eq!(code(&a), 0);
    assert_eq!(code(&b), 0);
    for f in ["trace.csv", "mixtures.csv", "summary.csv"] {
        assert_eq!(
            fs::read(da.join(f)).unwrap(),
            fs::read(db.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn presets_command() {
    let out = rgess(&["presets"], &[]);
    assert_eq!(code(&out), 0);
    let listed = String::from_utf8(out.stdout).unwrap();
    assert_eq!(listed.lines().count(), PRESETS.len());
    let out = rgess(&["presets", "litter-em-tmrgess"], &[]);
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("steps_per_iteration = 4"));
    assert_eq!(code(&rgess(&["presets", "missing"], &[])), 1);
    assert_eq!(code(&rgess(&["frobnicate"], &[])), 1);
}

fn write_samples(path: &Path, samples: &[DVector<f64>], header: bool) {
    let mut s = String::new();
    if header {
        let names: Vec<String> = (0..samples[0].len()).map(|i| format!("x{i}")).collect();
        s.push_str(&names.join(","));
        s.push('\n');
    }
    for x in samples {
        let cols: Vec<String> = x.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(s, "{}", cols.join(",")).unwrap();
    }
    fs::write(path, s).unwrap();
}

fn fit_cli(samples: &Path, out: &Path, args: &[&str]) -> Vec<(usize, Mixture)> {
    let mut all = vec![
        "fit",
        samples.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ];
    all.extend_from_slice(args);
    let o = rgess(&all, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    read_mixtures_csv(out, false).unwrap()
}

#[test]
fn fit_two_clusters() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("pm10.csv");
    write_samples(&csv, &pm10_samples(3), true);
    let out = tmp.path().join("fit.csv");
    for scheme in ["em_gmm", "vi_gmm", "em_tmm"] {
        let hist = fit_cli(&csv, &out, &["--scheme", scheme, "--components", "2"]);
        assert_eq!(hist.len(), 1);
        let m = &hist[0].1;
        let mut means: Vec<f64> = (0..2).map(|j| m.mean(j)[0]).collect();
        means.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(
            (means[0] + 10.0).abs() < 0.5 && (means[1] - 10.0).abs() < 0.5,
            "{scheme}: {means:?}"
        );
    }
}

#[test]
fn fit_single_component_is_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("xs.csv");
    let xs: Vec<DVector<f64>> = (0..37)
        .map(|i| {
            let t = i as f64;
            DVector::from_vec(vec![t.sin() * 3.0 + 1.0, (t * 0.7).cos() - 2.0 + 0.01 * t])
        })
        .collect();
    write_samples(&csv, &xs, false);
    let out = tmp.path().join("fit.csv");
    let hist = fit_cli(
        &csv,
        &out,
        &[
            "--scheme",
            "em_gmm",
            "--components",
            "1",
            "--reg-radius",
            "0.25",
        ],
    );
    let (mean, cov) = mean_and_cov(&xs);
    let mle = cov * (36.0 / 37.0);
    let m = &hist[0].1;
    assert!((m.mean(0) - &mean).amax() < 1e-12);
    let expected = mle + nalgebra::DMatrix::identity(2, 2) * 0.25;
    assert!((m.shape_matrix(0) - expected).amax() < 1e-10);
}

#[test]
fn fit_outliers_em_versus_sa() {
    let tmp = tempfile::tempdir().unwrap();
    let (samples, truth, outliers) = outlier_fixture(0);
    let csv = tmp.path().join("outliers.csv");
    write_samples(&csv, &samples, false);

    let em_out = tmp.path().join("em.csv");
    let em = fit_cli(
        &csv,
        &em_out,
        &[
            "--scheme",
            "em_gmm",
            "--components",
            "3",
            "--reg-radius",
            "0",
        ],
    );
    let Mixture::Gaussian(em) = &em[0].1 else {
        panic!("gaussian")
    };
    assert!(min_distance_to_outliers(em, &outliers) < 1.0);

    let init = tmp.path().join("init.csv");
    write_mixtures_csv(&init, &[(0, Mixture::Gaussian(truth))]).unwrap();
    let sa_out = tmp.path().join("sa.csv");
    let sa = fit_cli(
        &csv,
        &sa_out,
        &[
            "--scheme",
            "sa_gmm",
            "--components",
            "3",
            "--init",
            init.to_str().unwrap(),
            "--steps",
            "50",
        ],
    );
    assert_eq!(sa.len(), 51);
    let Mixture::Gaussian(last) = &sa[50].1 else {
        panic!("gaussian")
    };
    assert!(min_distance_to_outliers(last, &outliers) >= 1.0);
    assert!(last
        .components()
        .iter()
        .all(|c| c.mean().iter().all(|v| v.is_finite())));
}

#[test]
fn fit_rejects_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("bad.csv");
    fs::write(&csv, "1.0,2.0\n3.0\n").unwrap();
    let out = tmp.path().join("fit.csv");
    let o = rgess(
        &[
            "fit",
            csv.to_str().unwrap(),
            "--scheme",
            "em_gmm",
            "--components",
            "1",
            "--output",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    assert!(!out.exists());
    let o = rgess(
        &[
            "fit",
            csv.to_str().unwrap(),
            "--scheme",
            "kmeans",
            "--components",
            "1",
        ],
        &[],
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn covtype_checksum_and_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("covtype.data");
    let mut text = String::new();
    for i in 0..300usize {
        let class = [1, 2, 2, 5][i % 4];
        let cols: Vec<String> = (0..54)
            .map(|j| ((i * 7 + j * 13) % 17).to_string())
            .collect();
        writeln!(text, "{},{class}", cols.join(",")).unwrap();
    }
    fs::write(&data, &text).unwrap();
    let sha = {
        use sha2::{Digest, Sha256};
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>()
    };
    let body = |expected: &str| {
        format!(
            r#"output = "unused"
target = {{ kind = "covtype", path = "{}", n_select = 120, sha256 = "{expected}" }}
run.kernel = "tmrgess"
run.chains = 8
run.iterations = 20
init.mean = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
init.variance = 1.0
adaptation.scheme = "em_tmm"
adaptation.components = 2
"#,
            data.display()
        )
    };
    let cfg = ExperimentConfig::parse(&body(&sha), &[]).unwrap();
    let exp = Experiment::prepare(cfg, None).unwrap();
    assert!(exp.notes[0].contains(&sha));
    assert!(exp.notes[0].contains("225 rows"), "{}", exp.notes[0]);

    let cfg = ExperimentConfig::parse(&body(&"0".repeat(64)), &[]).unwrap();
    let err = Experiment::prepare(cfg, None).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains(&sha));

    let path = tmp.path().join("cov.toml");
    fs::write(&path, body(&sha)).unwrap();
    let out_dir = tmp.path().join("out");
    let out = rgess(
        &[
            "run",
            path.to_str().unwrap(),
            "--output",
            out_dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains(&sha));
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(summary.lines().any(|l| l.starts_with("accuracy,0,")));
}
