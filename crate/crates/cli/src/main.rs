//! Command-line driver for coverage maps, UAV placement search, node
//! network planning, and parameter sweeps.
//!
//! Output conventions: results go to stdout as `key = value` lines, progress
//! and warnings go to stderr one record per line, and `--out DIR` writes the
//! full artifact report. Exit status is 0 for a completed run, 2 when a plan
//! run completes but misses a required all-line-of-sight deployment, and 1
//! for any error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use losplan_core::geometry::{Point3, Scene};
use losplan_core::los::{coverage_matrix, union_coverage, CoverageGrid};
use losplan_core::placement::{
    ga_search, greedy_multistart, hybrid_search, CoverageObjective, SearchOutcome,
    TracePoint,
};
use losplan_core::planner::{geo_kmeans_plan, per_node_capacity, ClusterPlan, RepairObjective};
use losplan_core::report::{write_file_atomic, write_report, ReportContent};
use losplan_core::scenario::{
    load_scenario, preset, Algorithm, Scenario, PRESET_NAMES, SEED_SEARCH,
};
use losplan_core::seed;

#[derive(Parser)]
#[command(
    name = "losplan",
    version,
    about = "Line-of-sight coverage maps, UAV placement, and THz network planning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coverage map and percentage for the scenario's fixed UAV positions.
    Coverage(CommonArgs),
    /// Search UAV positions that maximize ground coverage.
    Place(CommonArgs),
    /// Cluster the scenario's nodes and position one UAV per cluster.
    Plan(CommonArgs),
    /// Rerun placement along one swept parameter and tabulate the results.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scenario: urban, suburban, or demo.
    #[arg(long)]
    preset: Option<String>,
    /// Directory for report artifacts; omit to skip writing files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the scenario's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the search algorithm.
    #[arg(long)]
    algorithm: Option<Algorithm>,
    /// Override the UAV count; drops any positions pinned in the scenario.
    #[arg(long)]
    uavs: Option<usize>,
    /// Override the hover altitude, meters.
    #[arg(long)]
    altitude: Option<f64>,
    /// Override the objective evaluation budget.
    #[arg(long)]
    budget: Option<u64>,
    /// Worker threads; defaults to LOS_PLANNER_THREADS, then all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Swept parameter.
    #[arg(long, value_enum)]
    axis: Axis,
    /// Comma-separated values for the swept parameter.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Axis {
    Uavs,
    Altitude,
}

impl Axis {
    fn as_str(self) -> &'static str {
        match self {
            Axis::Uavs => "uavs",
            Axis::Altitude => "altitude",
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Coverage(args) => cmd_coverage(&args),
        Command::Place(args) => cmd_place(&args),
        Command::Plan(args) => cmd_plan(&args),
        Command::Sweep(args) => cmd_sweep(&args),
    }
}

/// Resolves the scenario, applies command-line overrides, and re-validates.
fn resolve_scenario(args: &CommonArgs) -> Result<Scenario> {
    init_threads(args.threads)?;
    let mut sc = match (&args.scenario, &args.preset) {
        (Some(path), None) => load_scenario(path)?,
        (None, Some(name)) => preset(name).ok_or_else(|| {
            anyhow!("unknown preset {name:?}; available: {}", PRESET_NAMES.join(", "))
        })?,
        _ => bail!("give exactly one of --scenario FILE or --preset NAME"),
    };
    if let Some(s) = args.seed {
        sc.seed = s;
    }
    if let Some(a) = args.algorithm {
        sc.search.algorithm = a;
    }
    if let Some(n) = args.uavs {
        if n != sc.uav.count {
            sc.uav.positions = None;
        }
        sc.uav.count = n;
    }
    if let Some(h) = args.altitude {
        sc.uav.altitude = h;
    }
    if let Some(b) = args.budget {
        sc.search.budget = Some(b);
    }
    sc.validate()?;
    for w in sc.warnings() {
        eprintln!("warning {w}");
    }
    Ok(sc)
}

fn init_threads(requested: Option<usize>) -> Result<()> {
    let n = match requested {
        Some(n) => Some(n),
        None => match std::env::var("LOS_PLANNER_THREADS") {
            Ok(v) => Some(
                v.parse::<usize>()
                    .with_context(|| format!("LOS_PLANNER_THREADS={v:?} is not a thread count"))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            bail!("thread count must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("worker thread pool is already running")?;
    }
    Ok(())
}

fn emit_progress(trace: &[TracePoint]) {
    for p in trace {
        eprintln!("progress evals={} best={} wall={}", p.eval_count, p.best_objective, p.wall_seconds);
    }
}

/// Union coverage of the fleet, plus the NLoS share under the scenario's
/// footprint accounting.
fn fleet_coverage(sc: &Scenario, scene: &Scene, fleet: &[Point3]) -> Result<(CoverageGrid, f64)> {
    let per_uav = fleet
        .iter()
        .map(|&p| coverage_matrix(scene, p))
        .collect::<Result<Vec<_>, _>>()?;
    let union = union_coverage(&per_uav)?;
    let nlos = if sc.coverage.exclude_footprints {
        100.0 - union.coverage_percent_masked(&scene.footprint_mask())
    } else {
        union.nlos_percent()
    };
    Ok((union, nlos))
}

fn cmd_coverage(args: &CommonArgs) -> Result<ExitCode> {
    let sc = resolve_scenario(args)?;
    let scene = sc.build_scene()?;
    let fleet = sc.uav_positions().ok_or_else(|| {
        anyhow!("scenario pins no UAV positions; set [uav] positions or run place")
    })?;
    let (union, nlos) = fleet_coverage(&sc, &scene, &fleet)?;
    let objective = 100.0 - nlos;
    println!("coverage_percent = {objective}");
    println!("nlos_percent = {nlos}");
    if let Some(dir) = &args.out {
        let content = ReportContent {
            coverage: Some(union),
            uav_positions: fleet,
            objective: Some(objective),
            nlos_percent: Some(nlos),
            extra: vec![("seed".into(), sc.seed.to_string())],
            ..ReportContent::default()
        };
        write_report(dir, &content)?;
    }
    Ok(ExitCode::SUCCESS)
}

struct PlaceOutcome {
    positions: Vec<Point3>,
    objective: f64,
    nlos_percent: f64,
    eval_count: u64,
    trace: Vec<TracePoint>,
    union: CoverageGrid,
}

fn run_place(sc: &Scenario) -> Result<PlaceOutcome> {
    let scene = sc.build_scene()?;
    let objective = if sc.coverage.exclude_footprints {
        CoverageObjective::excluding_footprints(&scene)
    } else {
        CoverageObjective::new(&scene)
    };
    let n = sc.uav.count;
    let alt = sc.uav.altitude;
    let budget = sc.search.budget;
    let outcome: SearchOutcome = match sc.search.algorithm {
        Algorithm::Greedy => {
            let mut rng = seed::stream(sc.seed, SEED_SEARCH);
            greedy_multistart(&objective, &scene, n, alt, sc.search.n_starts, &mut rng, budget)?
        }
        Algorithm::Ga => {
            let mut cfg = sc.search.ga.clone();
            cfg.rng_seed = sc.search_seed();
            ga_search(&cfg, &objective, &scene, n, alt, budget)?
        }
        Algorithm::Hybrid => {
            let mut cfg = sc.search.ga.clone();
            cfg.rng_seed = sc.search_seed();
            hybrid_search(&cfg, &objective, &scene, n, alt, budget)?
        }
        other => bail!("{} plans a node network; use the plan command", other.as_str()),
    };
    let (union, nlos) = fleet_coverage(sc, &scene, &outcome.state.positions)?;
    Ok(PlaceOutcome {
        positions: outcome.state.positions,
        objective: outcome.state.objective,
        nlos_percent: nlos,
        eval_count: outcome.state.eval_count,
        trace: outcome.trace,
        union,
    })
}

fn cmd_place(args: &CommonArgs) -> Result<ExitCode> {
    let sc = resolve_scenario(args)?;
    let result = run_place(&sc)?;
    emit_progress(&result.trace);
    println!("objective = {}", result.objective);
    println!("nlos_percent = {}", result.nlos_percent);
    println!("eval_count = {}", result.eval_count);
    for (i, p) in result.positions.iter().enumerate() {
        println!("uav_{i} = {} {} {}", p.x, p.y, p.z);
    }
    if let Some(dir) = &args.out {
        let content = ReportContent {
            coverage: Some(result.union),
            uav_positions: result.positions,
            objective: Some(result.objective),
            nlos_percent: Some(result.nlos_percent),
            eval_count: Some(result.eval_count),
            trace: Some(result.trace),
            extra: vec![
                ("seed".into(), sc.seed.to_string()),
                ("algorithm".into(), sc.search.algorithm.as_str().into()),
            ],
            ..ReportContent::default()
        };
        write_report(dir, &content)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_plan(args: &CommonArgs) -> Result<ExitCode> {
    let sc = resolve_scenario(args)?;
    let scene = sc.build_scene()?;
    let nodes = sc
        .build_nodes(&scene)?
        .ok_or_else(|| anyhow!("scenario has no nodes; add a [nodes] section"))?;
    let link = sc.link_params();
    let atm = sc.atmosphere();
    let n = sc.uav.count;
    let alt = sc.uav.altitude;

    let (plan, grid_passes, trace): (ClusterPlan, u64, Option<Vec<TracePoint>>) =
        match sc.search.algorithm {
            Algorithm::Geokmeans => {
                let mut rng = seed::stream(sc.seed, SEED_SEARCH);
                let mut grids = 0u64;
                let plan = geo_kmeans_plan(
                    &nodes,
                    &scene,
                    &link,
                    &atm,
                    n,
                    alt,
                    sc.search.restarts,
                    &mut rng,
                    &mut grids,
                )?;
                (plan, grids, None)
            }
            driver => {
                // The clustering planner runs inside the objective; any
                // placement driver can steer it. `geo` uses the hybrid.
                let objective = RepairObjective::new(&nodes, &scene, link, atm, sc.repair_seed());
                let budget = sc.search.budget;
                let outcome = match driver {
                    Algorithm::Greedy => {
                        let mut rng = seed::stream(sc.seed, SEED_SEARCH);
                        greedy_multistart(
                            &objective,
                            &scene,
                            n,
                            alt,
                            sc.search.n_starts,
                            &mut rng,
                            budget,
                        )?
                    }
                    Algorithm::Ga => {
                        let mut cfg = sc.search.ga.clone();
                        cfg.rng_seed = sc.search_seed();
                        ga_search(&cfg, &objective, &scene, n, alt, budget)?
                    }
                    _ => {
                        let mut cfg = sc.search.ga.clone();
                        cfg.rng_seed = sc.search_seed();
                        hybrid_search(&cfg, &objective, &scene, n, alt, budget)?
                    }
                };
                let plan = objective
                    .best_plan()
                    .ok_or_else(|| anyhow!("search finished without producing a plan"))?;
                (plan, objective.grids_computed(), Some(outcome.trace))
            }
        };

    if let Some(trace) = &trace {
        emit_progress(trace);
    }
    let capacities = per_node_capacity(&nodes, &plan.assignment, &plan.uav_positions, &scene, &sc.link_params(), &sc.atmosphere())?;
    println!("avg_capacity = {}", plan.avg_capacity);
    println!("all_los = {}", plan.all_los);
    println!("grid_passes = {grid_passes}");
    for (i, p) in plan.uav_positions.iter().enumerate() {
        println!("uav_{i} = {} {} {}", p.x, p.y, p.z);
    }
    if let Some(dir) = &args.out {
        let content = ReportContent {
            uav_positions: plan.uav_positions.clone(),
            objective: Some(plan.avg_capacity),
            assignment: Some(plan.assignment.clone()),
            node_capacity: Some(capacities),
            all_los: Some(plan.all_los),
            eval_count: Some(grid_passes),
            trace,
            regions: plan.feasible_regions.clone(),
            extra: vec![
                ("seed".into(), sc.seed.to_string()),
                ("algorithm".into(), sc.search.algorithm.as_str().into()),
            ],
            ..ReportContent::default()
        };
        write_report(dir, &content)?;
    }
    if sc.search.require_all_los && !plan.all_los {
        eprintln!("error plan leaves nodes without line of sight and the scenario requires all_los");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: &SweepArgs) -> Result<ExitCode> {
    let base = resolve_scenario(&args.common)?;
    if matches!(base.search.algorithm, Algorithm::Geo | Algorithm::Geokmeans) {
        bail!("sweep drives placement; pick greedy, ga, or hybrid");
    }
    let mut rows: Vec<[String; 5]> = Vec::new();
    for raw in &args.values {
        let mut sc = base.clone();
        match args.axis {
            Axis::Uavs => {
                let v: usize =
                    raw.parse().with_context(|| format!("{raw:?} is not a UAV count"))?;
                if v != sc.uav.count {
                    sc.uav.positions = None;
                }
                sc.uav.count = v;
            }
            Axis::Altitude => {
                let v: f64 =
                    raw.parse().with_context(|| format!("{raw:?} is not an altitude"))?;
                sc.uav.altitude = v;
            }
        }
        sc.validate()?;
        let result = run_place(&sc)?;
        println!(
            "row {}={} objective={} nlos_percent={} eval_count={}",
            args.axis.as_str(),
            raw,
            result.objective,
            result.nlos_percent,
            result.eval_count
        );
        rows.push([
            args.axis.as_str().into(),
            raw.clone(),
            result.objective.to_string(),
            result.nlos_percent.to_string(),
            result.eval_count.to_string(),
        ]);
    }
    if let Some(dir) = &args.common.out {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["axis", "value", "objective", "nlos_percent", "eval_count"])?;
        for row in &rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().expect("vec writer never fails");
        write_file_atomic(dir, "sweep.csv", &bytes)?;
    }
    Ok(ExitCode::SUCCESS)
}
