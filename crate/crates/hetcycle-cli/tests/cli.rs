use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.toml"))
}

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetcycle"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("HETCYCLE_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn cfg(name: &str) -> String {
    config(name).display().to_string()
}

#[test]
fn classify_prints_case_and_condition() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["classify", &cfg("case5")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("Case5 / Regular / δ=1.2>1 PASS"), "{}", stdout(&o));
    assert!(dir.path().join("classify.json").exists());

    let o = run(dir.path(), &["classify", &cfg("case1")]);
    assert!(stdout(&o).contains("Case1 / isolated"));
}

#[test]
fn classify_rejects_zero_a21() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("case5")).unwrap().replace("a21 = 1.0", "a21 = 0.0");
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, text).unwrap();
    let o = run(&dir.path().join("out"), &["classify", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("a21 must be nonzero"), "{}", stderr(&o));
}

#[test]
fn certify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["certify", &cfg("case5")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    let outputs: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for f in &outputs {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert!(outputs.contains(&"horseshoe.json") && outputs.contains(&"cone.json"));
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);

    let o = run(dir.path(), &["certify", &cfg("case2")]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("certification failed"));

    for sigma in ["1.5", "0.01"] {
        let o = run(dir.path(), &["certify", &cfg("case5"), "--sigma", sigma]);
        assert_eq!(o.status.code(), Some(2), "sigma {sigma}: {}", stderr(&o));
    }
}

#[test]
fn curves_kinds_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["curves", &cfg("case5_curves"), "--kinds", "home", "--n-range", "5:12"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let tips = std::fs::read_to_string(dir.path().join("home_tips.csv")).unwrap();
    assert_eq!(tips.lines().count(), 2 + 8);
    let curves: std::collections::BTreeSet<String> = std::fs::read_to_string(dir.path().join("home.csv"))
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    assert_eq!(curves.len(), 8);

    let o = run(dir.path(), &["curves", &cfg("case4"), "--kinds", "homp"]);
    assert_eq!(o.status.code(), Some(0));
    let fit = std::fs::read_to_string(dir.path().join("homp_fit.csv")).unwrap();
    let exponent: f64 = fit.lines().nth(2).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((exponent - 0.5).abs() <= 0.01, "{exponent}");

    let o = run(dir.path(), &["curves", &cfg("case4"), "--kinds", ""]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(dir.path(), &["curves", &cfg("case1"), "--kinds", "home", "--n-range", "1:2"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn sweep_is_identical_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let grid = ["--alpha-grid=-0.1:0.1:100", "--beta-grid=-0.1:0.1:100"];
    let mut files = Vec::new();
    for jobs in ["1", "8"] {
        let out = dir.path().join(jobs);
        let o = run(&out, &["--jobs", jobs, "sweep", &cfg("case4"), grid[0], grid[1]]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        files.push(out);
    }
    for name in ["sweep.csv", "overlay_home.csv", "overlay_homp.csv"] {
        let a = std::fs::read(files[0].join(name)).unwrap();
        let b = std::fs::read(files[1].join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
    let text = std::fs::read_to_string(files[0].join("sweep.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "# hetcycle sweep schema v1");
    assert_eq!(text.lines().count(), 2 + 100 * 100);
    for line in text.lines().skip(2).take(50) {
        let alpha = line.split(',').next().unwrap();
        let x: f64 = alpha.parse().unwrap();
        assert_eq!(hetcycle::export::fmt_f64(x), alpha);
    }
}

#[test]
fn sweep_single_cell_and_malformed_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["sweep", &cfg("case4"), "--alpha-grid", "0.01:0.01:1", "--beta-grid", "0.02:0.02:1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);

    for bad in ["1:0:3", "0:1", "0:1:0", "a:1:3"] {
        let o = run(dir.path(), &["sweep", &cfg("case4"), "--alpha-grid", bad, "--beta-grid", "0:1:3"]);
        assert_eq!(o.status.code(), Some(2), "{bad}");
    }
}

#[test]
fn case1_sweep_escapes_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["sweep", &cfg("case1"), "--alpha-grid=-0.1:0.1:20", "--beta-grid=-0.1:0.1:20"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(text.lines().skip(2).all(|l| l.ends_with(",escapes")));
}

#[test]
fn trace_exports_strips_and_rejects_wrong_sign_pattern() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["trace", &cfg("case5"), "--object", "strips", "--samples", "9"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(dir.path().join("strips.csv")).unwrap().lines().count(), 2 + 4 * 2 * 9);
    let o = run(dir.path(), &["trace", &cfg("case5"), "--object", "double-helix"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["curves", &cfg("case4"), "--kinds", "home,homp", "--n-range", "2:4"];
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&a, &args).status.code(), Some(0));
    assert_eq!(run(&b, &args).status.code(), Some(0));
    for name in ["home.csv", "home_tips.csv", "homp.csv", "homp_fit.csv", "diagram.csv"] {
        assert!(std::fs::read(a.join(name)).unwrap() == std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}
