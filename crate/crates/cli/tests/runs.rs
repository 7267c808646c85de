//! End-to-end runs of small plans through the library entry point and the binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use otoc_cli::{execute_loaded, parse_plan, Analysis, RunOptions, RunOutcome, RunStatus, TaskStatus};
use tempfile::TempDir;

const SERIES: &str = r#"
kind = "SeriesRun"
name = "small"

[model]
kind = "ANNNI"
L = 6
lambda = 0.5

[operators]
form = "LocalPauli"
w_site = 2

[params]
r_list = [2]

[grid]
t_max = 4.0
dt = 0.1
"#;

const CONE: &str = r#"
kind = "LightCone"
name = "cone"

[model]
kind = "ANNNI"
delta = -0.3
lambda = 0.47

[params]
L_list = [8]
T_list = [0.0, 0.3]
r_list = [1, 2, 3, 4]

[operators]
form = "LocalPauli"

[grid]
t_max = 6.0
dt = 0.1
"#;

const TMIN: &str = r#"
kind = "TminScan"
name = "tmin"

[model]
kind = "LMG"
lambda = 1.0

[params]
L_list = [50, 100, 200]

[operators]
form = "CollectiveNormalized"

[grid]
t_max = 16.0
dt = 0.02
"#;

fn run(text: &str, out: &Path, cache: Option<&Path>, threads: usize) -> RunOutcome {
    let loaded = parse_plan(text, Path::new("plan.toml")).unwrap();
    let opts = RunOptions {
        cache_dir: cache.map(Path::to_path_buf),
        threads: Some(threads),
        output_dir: Some(out.to_path_buf()),
    };
    execute_loaded(&loaded, &opts).unwrap()
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

/// Every artifact except the manifest, which records timings and cache state.
fn assert_same_artifacts(a: &Path, b: &Path) {
    let fa: Vec<_> = files(a).into_iter().filter(|p| !p.ends_with("manifest.json")).collect();
    let fb: Vec<_> = files(b).into_iter().filter(|p| !p.ends_with("manifest.json")).collect();
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.file_name(), y.file_name());
        assert!(fs::read(x).unwrap() == fs::read(y).unwrap(), "{} differs", x.display());
    }
}

#[test]
fn minimal_plan_writes_series_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = run(SERIES, &out, None, 1);
    assert_eq!(o.manifest.status, RunStatus::Success);
    assert_eq!(o.manifest.exit_code, 0);
    let names: Vec<String> = files(&out)
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.iter().filter(|n| n.ends_with(".csv")).count(), 1);
    assert_eq!(names.iter().filter(|n| n.ends_with(".meta.json")).count(), 1);
    assert!(names.contains(&"report.json".to_string()));
    assert!(names.contains(&"manifest.json".to_string()));
    let s = &o.report.series[0];
    assert!((s.f0.0 - 1.0).abs() < 1e-12 && s.f0.1.abs() < 1e-12);
    assert!(s.max_abs_f <= 1.0 + 1e-12);
    assert_eq!(s.separation, Some(2));
}

#[test]
fn reruns_are_identical_and_hit_the_cache() {
    let tmp = TempDir::new().unwrap();
    let cache = tmp.path().join("cache");
    let a = run(CONE, &tmp.path().join("a"), Some(&cache), 1);
    assert_eq!(a.manifest.cache.stats.computed, 1);
    let b = run(CONE, &tmp.path().join("b"), Some(&cache), 1);
    assert_eq!(b.manifest.cache.stats.computed, 0);
    assert!(b.manifest.cache.stats.disk_hits > 0);
    assert_same_artifacts(&tmp.path().join("a"), &tmp.path().join("b"));

    let c = run(CONE, &tmp.path().join("c"), None, 1);
    assert!(!c.manifest.cache.enabled);
    assert_same_artifacts(&tmp.path().join("a"), &tmp.path().join("c"));
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = TempDir::new().unwrap();
    let one = run(CONE, &tmp.path().join("one"), None, 1);
    let four = run(CONE, &tmp.path().join("four"), None, 4);
    assert_eq!(four.manifest.threads, 4);
    assert_eq!(one.report, four.report);
    assert_same_artifacts(&tmp.path().join("one"), &tmp.path().join("four"));
    let Analysis::LightCone { cones } = &one.report.analysis else {
        panic!("wrong analysis kind")
    };
    assert_eq!(cones.len(), 2);
    assert!(cones.iter().all(|c| c.fit.is_some() && c.points.iter().all(|p| p.sensitivity.len() == 3)));
}

#[test]
fn corrupted_cache_entry_is_recomputed_with_warning() {
    let tmp = TempDir::new().unwrap();
    let cache = tmp.path().join("cache");
    run(SERIES, &tmp.path().join("a"), Some(&cache), 1);
    let entry = files(&cache).into_iter().find(|p| p.extension().is_some_and(|e| e == "bin")).unwrap();
    let mut bytes = fs::read(&entry).unwrap();
    let n = bytes.len();
    bytes[n - 9] ^= 0x40;
    fs::write(&entry, bytes).unwrap();

    let b = run(SERIES, &tmp.path().join("b"), Some(&cache), 1);
    assert_eq!(b.manifest.cache.stats.recomputed, 1);
    assert_eq!(b.manifest.warnings.len(), 1, "{:?}", b.manifest.warnings);
    assert_same_artifacts(&tmp.path().join("a"), &tmp.path().join("b"));

    let c = run(SERIES, &tmp.path().join("c"), Some(&cache), 1);
    assert!(c.manifest.warnings.is_empty());
    assert_eq!(c.manifest.cache.stats.disk_hits, 1);
}

#[test]
fn tmin_scan_reports_dynamical_exponent() {
    let tmp = TempDir::new().unwrap();
    let o = run(TMIN, tmp.path(), None, 1);
    let Analysis::TminScan { points, fit } = &o.report.analysis else {
        panic!("wrong analysis kind")
    };
    assert_eq!(points.len(), 3);
    assert!(points.windows(2).all(|w| w[1].t_min > w[0].t_min));
    let z = fit.as_ref().unwrap().exponent;
    assert!(z > 0.0 && z < 1.0, "z = {z}");
    let json = fs::read_to_string(tmp.path().join("report.json")).unwrap();
    assert!(json.contains("\"exponent\""));
}

fn otoc(args: &[&str], cache: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_otoc"))
        .args(args)
        .env("OTOC_CACHE_DIR", cache)
        .output()
        .unwrap()
}

#[test]
fn invalid_plan_exits_with_code_one() {
    let tmp = TempDir::new().unwrap();
    let plan = tmp.path().join("bad.toml");
    fs::write(&plan, SERIES.replace("dt = 0.1", "dt = 0.1\nstep = 2")).unwrap();
    for cmd in ["validate", "run"] {
        let out = otoc(&[cmd, plan.to_str().unwrap()], tmp.path());
        assert_eq!(out.status.code(), Some(1));
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains("step") && err.contains("line 20"), "{err}");
    }

    fs::write(&plan, SERIES.replace("lambda = 0.5", "lambda = 0.5\ngamma = 0.5")).unwrap();
    let out = otoc(&["validate", plan.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.gamma"));
}

#[test]
fn over_budget_size_is_skipped_with_partial_failure() {
    let tmp = TempDir::new().unwrap();
    let plan = tmp.path().join("budget.toml");
    let text = SERIES.replace("L = 6\n", "") .replace("r_list = [2]", "r_list = [2]\nL_list = [6, 10]")
        + "\n[budgets]\nmax_chain_sites = 8\n";
    fs::write(&plan, &text).unwrap();
    let out_dir = tmp.path().join("out");
    let out = otoc(
        &["run", plan.to_str().unwrap(), "--output-dir", out_dir.to_str().unwrap(), "--no-cache"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    let o = run(&text, &tmp.path().join("lib"), None, 1);
    assert_eq!(o.manifest.status, RunStatus::PartialFailure);
    let status: Vec<(usize, TaskStatus)> = o.manifest.tasks.iter().map(|t| (t.sites, t.status)).collect();
    assert_eq!(status, vec![(6, TaskStatus::Ok), (10, TaskStatus::Skipped)]);
    assert!(o.manifest.tasks[1].message.as_ref().unwrap().contains("10"));
}
