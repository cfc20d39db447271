//! End-to-end checks of the `losplan` binary: exit codes, stdout/stderr
//! conventions, report artifacts, and the sweep-equals-single-runs contract.

use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 5

[area]
dx = 80.0
dy = 80.0
nx = 40
ny = 40
nux = 10
nuy = 10

[[blocks]]
center = [30.0, 30.0]
height = 25.0
size = [16.0, 12.0]
theta_deg = 20.0

[[blocks]]
center = [60.0, 55.0]
height = 18.0
size = [14.0, 14.0]

[uav]
count = 2
altitude = 40.0
h_max = 60.0

[search]
algorithm = "greedy"
n_starts = 3
"#;

const WALL: &str = r#"
seed = 1

[area]
dx = 100.0
dy = 100.0
nx = 20
ny = 20
nux = 8
nuy = 8

[[blocks]]
center = [50.0, 50.0]
height = 30.0
size = [300.0, 4.0]

[nodes]
positions = [[50.0, 10.0], [50.0, 90.0]]

[uav]
count = 1
altitude = 20.0
h_max = 25.0

[search]
algorithm = "geokmeans"
restarts = 2
"#;

fn losplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_losplan"))
        .args(args)
        .env_remove("LOS_PLANNER_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

fn kv(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("missing {key} in:\n{text}"))
        .to_string()
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn coverage_on_the_demo_preset_writes_a_verified_report() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("report");
    let out = losplan(&[
        "coverage",
        "--preset",
        "demo",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let pct: f64 = kv(&text, "coverage_percent").parse().unwrap();
    assert!((0.0..=100.0).contains(&pct));
    for name in ["coverage.pgm", "coverage.csv", "positions.txt", "manifest.txt"] {
        assert!(out_dir.join(name).is_file(), "{name} missing");
    }
    let report = losplan_core::report::read_manifest(&out_dir).unwrap();
    assert!(report.digest_of("coverage.pgm").is_some());
    assert!(losplan_core::report::verify_report(&out_dir).unwrap().is_empty());
    let positions = std::fs::read_to_string(out_dir.join("positions.txt")).unwrap();
    assert_eq!(kv(&positions, "uav_0"), "53 343 80");
}

#[test]
fn place_prints_positions_and_progress() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "small.toml", SMALL);
    let out_dir = dir.path().join("report");
    let out = losplan(&["place", "--scenario", &scenario, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let objective: f64 = kv(&text, "objective").parse().unwrap();
    assert!(objective > 50.0, "{objective}");
    let evals: u64 = kv(&text, "eval_count").parse().unwrap();
    assert!(evals > 0);
    assert_eq!(kv(&text, "uav_0").split_whitespace().count(), 3);
    assert!(stderr(&out).lines().any(|l| l.starts_with("progress evals=")));
    assert!(out_dir.join("convergence.csv").is_file());
    let manifest = std::fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("convergence.csv volatile"));
}

#[test]
fn reruns_with_one_seed_are_byte_identical_and_seeds_matter() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "small.toml", SMALL);
    let mut manifests = Vec::new();
    for (sub, seed) in [("a", "9"), ("b", "9"), ("c", "10")] {
        let out_dir = dir.path().join(sub);
        let out = losplan(&[
            "place",
            "--scenario",
            &scenario,
            "--seed",
            seed,
            "--algorithm",
            "hybrid",
            "--budget",
            "300",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "stderr: {}", stderr(&out));
        manifests.push(std::fs::read(out_dir.join("manifest.txt")).unwrap());
    }
    assert_eq!(manifests[0], manifests[1], "same seed, same bytes");
    assert_ne!(manifests[0], manifests[2], "different seed, different report");
}

#[test]
fn sweep_rows_match_individually_run_placements() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "small.toml", SMALL);
    let out_dir = dir.path().join("sweep");
    let sweep = losplan(&[
        "sweep",
        "--scenario",
        &scenario,
        "--axis",
        "uavs",
        "--values",
        "1,2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(sweep.status.success(), "stderr: {}", stderr(&sweep));
    let csv_text = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv_text.lines().collect();
    assert_eq!(rows[0], "axis,value,objective,nlos_percent,eval_count");
    assert_eq!(rows.len(), 3);

    for (row, count) in rows[1..].iter().zip(["1", "2"]) {
        let single = losplan(&["place", "--scenario", &scenario, "--uavs", count]);
        assert!(single.status.success());
        let text = stdout(&single);
        let expected = format!(
            "uavs,{count},{},{},{}",
            kv(&text, "objective"),
            kv(&text, "nlos_percent"),
            kv(&text, "eval_count")
        );
        assert_eq!(*row, expected);
    }
}

#[test]
fn plan_exit_status_tracks_the_required_feasibility() {
    let dir = tempfile::tempdir().unwrap();
    let blocked = write_scenario(dir.path(), "wall.toml", WALL);
    let out = losplan(&["plan", "--scenario", &blocked]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    assert_eq!(kv(&stdout(&out), "all_los"), "false");

    let relaxed = write_scenario(
        dir.path(),
        "wall_relaxed.toml",
        &format!("{WALL}require_all_los = false\n"),
    );
    let out = losplan(&["plan", "--scenario", &relaxed]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    // A plan the single UAV can fully serve exits 0 with all_los true.
    let open = write_scenario(
        dir.path(),
        "open.toml",
        r#"
seed = 2
[nodes]
count = 6
[uav]
count = 1
altitude = 60.0
h_max = 100.0
[search]
algorithm = "geokmeans"
restarts = 2
"#,
    );
    let out = losplan(&["plan", "--scenario", &open]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert_eq!(kv(&stdout(&out), "all_los"), "true");
}

#[test]
fn plan_reports_regions_assignment_and_grid_passes() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        "plan.toml",
        &format!("{}\n[nodes]\ncount = 8\n", SMALL.replace("algorithm = \"greedy\"", "algorithm = \"geokmeans\"")),
    );
    let out_dir = dir.path().join("report");
    let out = losplan(&["plan", "--scenario", &scenario, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let passes: u64 = kv(&text, "grid_passes").parse().unwrap();
    assert!(passes > 0);
    let positions = std::fs::read_to_string(out_dir.join("positions.txt")).unwrap();
    assert_eq!(kv(&positions, "node_count"), "8");
    assert!(out_dir.join("region_0.pgm").is_file());
    assert!(out_dir.join("region_1.pgm").is_file());
}

#[test]
fn bad_inputs_exit_with_status_one() {
    let out = losplan(&["coverage", "--preset", "nosuch"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("unknown preset"));

    let out = losplan(&["place", "--scenario", "/nonexistent/path.toml"]);
    assert_eq!(out.status.code(), Some(1));

    let out = losplan(&["place", "--preset", "demo", "--threads", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("thread count"));

    // Coverage needs pinned positions; urban has none.
    let out = losplan(&["coverage", "--preset", "urban"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("pins no UAV positions"));
}

#[test]
fn thread_settings_come_from_flag_or_environment() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "small.toml", SMALL);
    let out = losplan(&["place", "--scenario", &scenario, "--threads", "1"]);
    assert!(out.status.success());

    let env_run = Command::new(env!("CARGO_BIN_EXE_losplan"))
        .args(["place", "--scenario", &scenario])
        .env("LOS_PLANNER_THREADS", "2")
        .output()
        .unwrap();
    assert!(env_run.status.success());
    assert_eq!(stdout(&out), stdout(&env_run), "thread count never changes results");

    let bad_env = Command::new(env!("CARGO_BIN_EXE_losplan"))
        .args(["place", "--scenario", &scenario])
        .env("LOS_PLANNER_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(bad_env.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_env.stderr).contains("LOS_PLANNER_THREADS"));
}
