use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_spatial-anc");

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("presets").join(name)
}

fn cli(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

/// Benchmark preset with `edit` applied to its TOML text.
fn edited_config(dir: &Path, edit: impl Fn(String) -> String) -> PathBuf {
    let src = fs::read_to_string(preset("benchmark_400hz.toml")).unwrap();
    let path = dir.join("edited.toml");
    fs::write(&path, edit(src)).unwrap();
    path
}

fn tables(root: &Path) -> Vec<(PathBuf, String)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read_to_string(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn single_nlms_iteration_gives_zero_db() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("res");
    let o = cli(&[
        "run",
        "--config",
        preset("benchmark_400hz.toml").to_str().unwrap(),
        "--iterations",
        "1",
        "--algorithm",
        "nlms",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let t = fs::read_to_string(out.join("trajectories/400hz_nlms.csv")).unwrap();
    let rows: Vec<&str> = t.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    let v: f64 = rows[0].split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(v, 0.0);
    assert!(out.join("manifest.json").is_file());
}

#[test]
fn validate_reports_conditioning_per_frequency() {
    let o = cli(&["validate", "--config", preset("sweep_100_500hz.toml").to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let s = text(&o.stdout);
    assert!(s.contains("cond(A_yy)"));
    let rows = s.lines().filter(|l| l.trim_start().starts_with(|c: char| c.is_ascii_digit())).count();
    assert_eq!(rows, 41);
    assert!(s.contains("invertible at all 41 frequencies"));
}

#[test]
fn mic_inside_scatterer_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited_config(dir.path(), |s| s.replace("error_mics = [[0.3, 0.0]", "error_mics = [[0.1, 0.0]"));
    let o = cli(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let e = text(&o.stderr);
    assert!(e.contains("error_mics[0]") && e.contains("inside the scatterer"), "{e}");
}

fn duplicated_reference_mics(s: String) -> String {
    let start = s.find("[scene.reference_mics]").unwrap();
    let end = s.find("[kernel]").unwrap();
    let mics = "[scene.reference_mics]\nlayout = \"points\"\npoints = [[2.0, 0.0], [2.0, 0.0], [0.0, 2.0], [-2.0, 0.0]]\n\n";
    let s = format!("{}{}{}", &s[..start], mics, &s[end..]);
    s.replace("trace_relative = 0.001", "fixed = 0.0")
}

#[test]
fn unregularized_duplicate_mics_report_singular_gram() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited_config(dir.path(), duplicated_reference_mics);
    let o = cli(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stdout).contains("singular matrix"), "{}", text(&o.stdout));
    assert!(text(&o.stderr).contains("1 of 1 frequencies"));

    // The same scene fails at run time too, with a per-frequency summary.
    let out = dir.path().join("res");
    let o = cli(&["run", "--config", cfg.to_str().unwrap(), "--iterations", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("400 Hz"));
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"failed\""));
}

#[test]
fn malformed_config_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited_config(dir.path(), |s| s.replace("beta = 6.0", "beta = 6.0\nbogus_key = 1"));
    let o = cli(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let e = text(&o.stderr);
    assert!(e.contains("bogus_key") && e.contains("line"), "{e}");

    let o = cli(&["validate", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn archived_config_reproduces_identical_tables() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let o = cli(&[
        "run",
        "--config",
        preset("benchmark_400hz.toml").to_str().unwrap(),
        "--frequency",
        "250",
        "--frequency",
        "400",
        "--iterations",
        "50",
        "--seed",
        "9",
        "--no-scatterer",
        "--jobs",
        "2",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let archived = first.join("config.toml");
    let o = cli(&["run", "--config", archived.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let (a, b) = (tables(&first), tables(&second));
    assert_eq!(a.len(), b.len());
    assert!(a.len() > 10);
    assert_eq!(a, b);
    let cfg = fs::read_to_string(&archived).unwrap();
    assert!(!cfg.contains("[scene.scatterer]"));
    assert!(cfg.contains("seed = 9"));
}

#[test]
fn zero_drive_fieldmap_averages_to_unity() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&[
        "fieldmap",
        "--config",
        preset("benchmark_400hz.toml").to_str().unwrap(),
        "--algorithm",
        "nlms",
        "--iterations",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let t = fs::read_to_string(dir.path().join("fieldmap_400hz_nlms.csv")).unwrap();
    let linear: Vec<f64> = t
        .lines()
        .filter(|l| l.starts_with("grid,"))
        .map(|l| 10f64.powf(l.rsplit(',').next().unwrap().parse::<f64>().unwrap() / 10.0))
        .collect();
    assert!(linear.len() > 1000);
    let mean = linear.iter().sum::<f64>() / linear.len() as f64;
    assert!((mean - 1.0).abs() < 1e-12, "mean {mean}");
    assert!(t.lines().any(|l| l.starts_with("region_boundary,")));
}

#[test]
fn fieldmap_needs_one_algorithm() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&[
        "fieldmap",
        "--config",
        preset("benchmark_400hz.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("exactly one algorithm"));
}
