//! UAV placement search over a discrete hover plane.
//!
//! Three drivers share one evaluation engine: steepest-ascent greedy descent
//! over single-UAV grid moves, a genetic algorithm with elitism, roulette
//! selection, uniform per-UAV crossover and single-slot mutation, and a
//! hybrid that refines the fittest individuals with greedy descents each
//! generation. Objectives are pluggable, so the same drivers can maximize
//! area coverage or network capacity. An objective may hand back repaired
//! positions alongside its score; the engine adopts them in place of the
//! candidate it asked about, letting search-and-repair objectives steer the
//! population directly.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point3, Scene};
use crate::grid::Grid;
use crate::los::{coverage_matrix, union_coverage, CoverageGrid, LosError};
use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum PlacementError {
    #[error("need at least one UAV")]
    NoUavs,
    #[error("need at least one start")]
    NoStarts,
    #[error("hover altitude {altitude} outside (0, {ceiling}]")]
    BadAltitude { altitude: f64, ceiling: f64 },
    #[error("start positions mix altitudes")]
    MixedAltitudes,
    #[error("start position ({x}, {y}) outside the hover plane")]
    OffPlane { x: f64, y: f64 },
    #[error("population and iteration counts must be positive")]
    EmptyConfig,
    #[error("elite {elite} + crossover {crossover} + mutation {mutation} != population {population}")]
    BadSplit { elite: usize, crossover: usize, mutation: usize, population: usize },
    #[error("greedy pool {pool} must lie in [elite {elite}, population {population}]")]
    BadPool { pool: usize, elite: usize, population: usize },
    #[error("gaussian mutation needs positive sigma and step cap, got {sigma_m} and {max_step_m}")]
    BadGaussian { sigma_m: f64, max_step_m: f64 },
    #[error("budget exhausted before any evaluation")]
    NothingEvaluated,
}

/// Zero-based (row, col) index of a hover-plane cell.
pub type PlaneCell = (usize, usize);

/// The discrete grid of candidate hover positions at a fixed altitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidatePlane {
    cells_x: usize,
    cells_y: usize,
    pitch_x: f64,
    pitch_y: f64,
    altitude: f64,
}

impl CandidatePlane {
    pub fn from_scene(scene: &Scene, altitude: f64) -> Result<Self, PlacementError> {
        if !(altitude > 0.0 && altitude <= scene.h_max) {
            return Err(PlacementError::BadAltitude { altitude, ceiling: scene.h_max });
        }
        Ok(Self {
            cells_x: scene.nux,
            cells_y: scene.nuy,
            pitch_x: scene.plane_dx(),
            pitch_y: scene.plane_dy(),
            altitude,
        })
    }

    pub fn altitude(&self) -> f64 {
        self.altitude
    }

    pub fn cell_count(&self) -> (usize, usize) {
        (self.cells_x, self.cells_y)
    }

    pub fn pitch(&self) -> (f64, f64) {
        (self.pitch_x, self.pitch_y)
    }

    pub fn position(&self, cell: PlaneCell) -> Point3 {
        Point3::new(
            (cell.0 + 1) as f64 * self.pitch_x,
            (cell.1 + 1) as f64 * self.pitch_y,
            self.altitude,
        )
    }

    pub fn nearest_cell(&self, p: Point3) -> PlaneCell {
        let r = (p.x / self.pitch_x - 1.0).round().clamp(0.0, (self.cells_x - 1) as f64);
        let c = (p.y / self.pitch_y - 1.0).round().clamp(0.0, (self.cells_y - 1) as f64);
        (r as usize, c as usize)
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> PlaneCell {
        (rng.random_range(0..self.cells_x), rng.random_range(0..self.cells_y))
    }
}

/// Objective outcome: the score to maximize plus, for search-and-repair
/// objectives, the positions the score actually belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub score: f64,
    pub repaired: Option<Vec<Point3>>,
}

impl Evaluation {
    pub fn plain(score: f64) -> Self {
        Self { score, repaired: None }
    }
}

pub trait Objective: Sync {
    fn evaluate(&self, positions: &[Point3]) -> Evaluation;
}

impl<F: Fn(&[Point3]) -> Evaluation + Sync> Objective for F {
    fn evaluate(&self, positions: &[Point3]) -> Evaluation {
        self(positions)
    }
}

/// Percentage of ground cells in LoS of at least one UAV.
pub struct CoverageObjective<'a> {
    scene: &'a Scene,
    exclude: Option<Grid<bool>>,
}

impl<'a> CoverageObjective<'a> {
    pub fn new(scene: &'a Scene) -> Self {
        Self { scene, exclude: None }
    }

    /// Score only cells outside block footprints, which can never gain LoS.
    pub fn excluding_footprints(scene: &'a Scene) -> Self {
        Self { scene, exclude: Some(scene.footprint_mask()) }
    }
}

impl Objective for CoverageObjective<'_> {
    fn evaluate(&self, positions: &[Point3]) -> Evaluation {
        let grids: Vec<_> = positions
            .iter()
            .map(|&p| match coverage_matrix(self.scene, p) {
                Ok(g) => g,
                // A hover cell swallowed by a tall block covers nothing;
                // the search walks out of it instead of failing.
                Err(LosError::SourceInsideBlock { .. } | LosError::BelowGround { .. }) => {
                    CoverageGrid {
                        bits: Grid::filled(self.scene.nx, self.scene.ny, false),
                        source: Some(p),
                    }
                }
                Err(e) => panic!("hover position rejected: {e}"),
            })
            .collect();
        let union = union_coverage(&grids).expect("grids share one scene");
        let score = match &self.exclude {
            Some(mask) => union.coverage_percent_masked(mask),
            None => union.coverage_percent(),
        };
        Evaluation::plain(score)
    }
}

/// Final hover positions, their objective value, and the number of
/// objective evaluations consumed reaching them.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementState {
    pub positions: Vec<Point3>,
    pub objective: f64,
    pub eval_count: u64,
}

/// One convergence sample: elapsed wall time, budget consumed so far, and
/// the best objective seen so far.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub wall_seconds: f64,
    pub eval_count: u64,
    pub best_objective: f64,
}

/// Search result plus its convergence trace (per step for greedy, per
/// descent for multistart, per generation for the evolutionary drivers).
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub state: PlacementState,
    pub trace: Vec<TracePoint>,
}

/// How mutation rewrites the single UAV slot it picks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MutationKind {
    /// Replace the slot with a uniform draw over the whole plane.
    Resample,
    /// Nudge the slot by a Gaussian step, clamped to `max_step_m` per axis
    /// and to the plane bounds.
    Gaussian { sigma_m: f64, max_step_m: f64 },
}

/// Evolutionary search settings shared by the GA and hybrid drivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub elite: usize,
    pub crossover_count: usize,
    pub mutation_count: usize,
    pub iterations: usize,
    pub greedy_descents_per_iter: usize,
    pub greedy_pool: usize,
    pub mutation: MutationKind,
    pub rng_seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 40,
            elite: 4,
            crossover_count: 24,
            mutation_count: 12,
            iterations: 50,
            greedy_descents_per_iter: 2,
            greedy_pool: 8,
            mutation: MutationKind::Resample,
            rng_seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), PlacementError> {
        if self.population == 0 || self.iterations == 0 {
            return Err(PlacementError::EmptyConfig);
        }
        if self.elite + self.crossover_count + self.mutation_count != self.population {
            return Err(PlacementError::BadSplit {
                elite: self.elite,
                crossover: self.crossover_count,
                mutation: self.mutation_count,
                population: self.population,
            });
        }
        if self.greedy_pool < self.elite || self.greedy_pool > self.population {
            return Err(PlacementError::BadPool {
                pool: self.greedy_pool,
                elite: self.elite,
                population: self.population,
            });
        }
        if let MutationKind::Gaussian { sigma_m, max_step_m } = self.mutation {
            if !(sigma_m > 0.0 && sigma_m.is_finite() && max_step_m > 0.0 && max_step_m.is_finite())
            {
                return Err(PlacementError::BadGaussian { sigma_m, max_step_m });
            }
        }
        Ok(())
    }
}

const MOVES_PER_UAV: usize = 5;
const ROULETTE_EPS: f64 = 1e-9;

/// All single-UAV moves considered in one descent step, in evaluation
/// order: for each UAV by index, stay, +x, -x, +y, -y. The all-zero vector
/// therefore appears once per UAV and the list has exactly 5 * n entries.
pub fn greedy_actions(n_uav: usize, step_x: f64, step_y: f64) -> Vec<Vec<(f64, f64)>> {
    assert!(n_uav >= 1, "need at least one UAV");
    let moves = [(0.0, 0.0), (step_x, 0.0), (-step_x, 0.0), (0.0, step_y), (0.0, -step_y)];
    let mut out = Vec::with_capacity(MOVES_PER_UAV * n_uav);
    for uav in 0..n_uav {
        for &mv in &moves {
            let mut action = vec![(0.0, 0.0); n_uav];
            action[uav] = mv;
            out.push(action);
        }
    }
    out
}

/// Apply move 1..=4 ({+x, -x, +y, -y} by one cell) to one UAV, or None if
/// it would leave the plane.
fn shifted(plane: &CandidatePlane, cells: &[PlaneCell], uav: usize, move_ix: usize) -> Option<Vec<PlaneCell>> {
    let (r, c) = cells[uav];
    let (cx, cy) = plane.cell_count();
    let stepped = match move_ix {
        1 => (r + 1 < cx).then_some((r + 1, c)),
        2 => r.checked_sub(1).map(|r| (r, c)),
        3 => (c + 1 < cy).then_some((r, c + 1)),
        4 => c.checked_sub(1).map(|c| (r, c)),
        _ => unreachable!("move index"),
    }?;
    let mut out = cells.to_vec();
    out[uav] = stepped;
    Some(out)
}

struct Descent {
    cells: Vec<PlaneCell>,
    score: f64,
    exhausted: bool,
}

struct Engine<'a> {
    plane: CandidatePlane,
    obj: &'a dyn Objective,
    evals: u64,
    cap: u64,
    started: Instant,
    trace: Vec<TracePoint>,
    best_cells: Vec<PlaneCell>,
    best_score: f64,
}

impl<'a> Engine<'a> {
    fn new(plane: CandidatePlane, obj: &'a dyn Objective, budget: Option<u64>) -> Self {
        Self {
            plane,
            obj,
            evals: 0,
            cap: budget.unwrap_or(u64::MAX),
            started: Instant::now(),
            trace: Vec::new(),
            best_cells: Vec::new(),
            best_score: f64::NEG_INFINITY,
        }
    }

    fn spent(&self) -> bool {
        self.evals >= self.cap
    }

    /// Consume one unit of budget; false once the cap is hit.
    fn charge(&mut self) -> bool {
        if self.evals >= self.cap {
            return false;
        }
        self.evals += 1;
        true
    }

    /// Evaluate one candidate, adopting repaired positions when offered.
    fn eval_cells(&mut self, cells: &[PlaneCell]) -> (Vec<PlaneCell>, f64) {
        let positions: Vec<Point3> = cells.iter().map(|&c| self.plane.position(c)).collect();
        let outcome = self.obj.evaluate(&positions);
        assert!(outcome.score.is_finite(), "objective must return a finite score");
        let cells = match outcome.repaired {
            Some(rep) => rep.iter().map(|&p| self.plane.nearest_cell(p)).collect(),
            None => cells.to_vec(),
        };
        if outcome.score > self.best_score {
            self.best_score = outcome.score;
            self.best_cells = cells.clone();
        }
        (cells, outcome.score)
    }

    fn push_trace(&mut self) {
        self.trace.push(TracePoint {
            wall_seconds: self.started.elapsed().as_secs_f64(),
            eval_count: self.evals,
            best_objective: self.best_score,
        });
    }

    /// Steepest-ascent sweep loop. Every one of the 5n action slots per
    /// step is budgeted, including cached stays and off-plane moves, so a
    /// full descent costs exactly 5n evaluations per step.
    fn descend(&mut self, mut cells: Vec<PlaneCell>, trace_steps: bool) -> Descent {
        let n = cells.len();
        let mut bar = f64::NEG_INFINITY;
        loop {
            let mut stay: Option<(Vec<PlaneCell>, f64)> = None;
            let mut winner: Option<(Vec<PlaneCell>, f64, bool)> = None;
            let mut top = f64::NEG_INFINITY;
            let mut exhausted = false;
            'sweep: for uav in 0..n {
                for move_ix in 0..MOVES_PER_UAV {
                    if !self.charge() {
                        exhausted = true;
                        break 'sweep;
                    }
                    let (cand, score, is_stay) = if move_ix == 0 {
                        let (c, s) = match &stay {
                            Some((c, s)) => (c.clone(), *s),
                            None => {
                                let out = self.eval_cells(&cells);
                                stay = Some(out.clone());
                                out
                            }
                        };
                        (c, s, true)
                    } else {
                        match shifted(&self.plane, &cells, uav, move_ix) {
                            // off the plane: unimprovable, but still budgeted
                            None => continue,
                            Some(m) => {
                                let (c, s) = self.eval_cells(&m);
                                (c, s, false)
                            }
                        }
                    };
                    if score > top {
                        top = score;
                        winner = Some((cand, score, is_stay));
                    }
                }
            }
            if trace_steps {
                self.push_trace();
            }
            if exhausted {
                return Descent { cells, score: bar, exhausted: true };
            }
            let (wc, ws, is_stay) = winner.expect("the stay slot always scores");
            if is_stay {
                if ws > bar {
                    // adopt the stay evaluation: with a repairing objective
                    // it can land on better positions than the incumbent
                    return Descent { cells: wc, score: ws, exhausted: false };
                }
                return Descent { cells, score: bar, exhausted: false };
            }
            if ws <= bar {
                // a repairing objective can re-book the incumbent below the
                // bar; refusing sideways moves keeps the descent finite
                return Descent { cells, score: bar, exhausted: false };
            }
            cells = wc;
            bar = ws;
        }
    }

    fn finish(mut self) -> Result<SearchOutcome, PlacementError> {
        if self.best_cells.is_empty() {
            return Err(PlacementError::NothingEvaluated);
        }
        if self.trace.last().map(|t| t.eval_count) != Some(self.evals) {
            self.push_trace();
        }
        let positions = self.best_cells.iter().map(|&c| self.plane.position(c)).collect();
        Ok(SearchOutcome {
            state: PlacementState {
                positions,
                objective: self.best_score,
                eval_count: self.evals,
            },
            trace: self.trace,
        })
    }
}

/// Greedy local search from explicit start positions (all at one altitude).
/// Terminates when no single-UAV move beats staying put, so the result is a
/// local maximum over its 5n-action neighborhood.
pub fn greedy_descend(
    start: &[Point3],
    obj: &dyn Objective,
    scene: &Scene,
    budget: Option<u64>,
) -> Result<SearchOutcome, PlacementError> {
    if start.is_empty() {
        return Err(PlacementError::NoUavs);
    }
    let altitude = start[0].z;
    if start.iter().any(|p| p.z != altitude) {
        return Err(PlacementError::MixedAltitudes);
    }
    let plane = CandidatePlane::from_scene(scene, altitude)?;
    let cells = start
        .iter()
        .map(|&p| {
            if !(p.x >= 0.0 && p.x <= scene.dx && p.y >= 0.0 && p.y <= scene.dy) {
                return Err(PlacementError::OffPlane { x: p.x, y: p.y });
            }
            Ok(plane.nearest_cell(p))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut engine = Engine::new(plane, obj, budget);
    engine.descend(cells, true);
    engine.finish()
}

/// Best greedy local optimum over seeded uniform-random starts.
pub fn greedy_multistart(
    obj: &dyn Objective,
    scene: &Scene,
    n_uav: usize,
    altitude: f64,
    n_starts: usize,
    rng: &mut ChaCha8Rng,
    budget: Option<u64>,
) -> Result<SearchOutcome, PlacementError> {
    if n_uav == 0 {
        return Err(PlacementError::NoUavs);
    }
    if n_starts == 0 {
        return Err(PlacementError::NoStarts);
    }
    let plane = CandidatePlane::from_scene(scene, altitude)?;
    let mut engine = Engine::new(plane, obj, budget);
    for _ in 0..n_starts {
        if engine.spent() {
            break;
        }
        let cells = (0..n_uav).map(|_| plane.sample(rng)).collect();
        let d = engine.descend(cells, false);
        engine.push_trace();
        if d.exhausted {
            break;
        }
    }
    engine.finish()
}

/// Genetic search: elitism, roulette parent selection, uniform per-UAV
/// crossover, and single-slot mutation.
pub fn ga_search(
    cfg: &GaConfig,
    obj: &dyn Objective,
    scene: &Scene,
    n_uav: usize,
    altitude: f64,
    budget: Option<u64>,
) -> Result<SearchOutcome, PlacementError> {
    let plane = CandidatePlane::from_scene(scene, altitude)?;
    let mut engine = Engine::new(plane, obj, budget);
    evolve(&mut engine, cfg, 0, n_uav)?;
    engine.finish()
}

/// Genetic search that additionally greedy-descends a few of the fittest
/// individuals each generation, reinserting the refined states in place.
pub fn hybrid_search(
    cfg: &GaConfig,
    obj: &dyn Objective,
    scene: &Scene,
    n_uav: usize,
    altitude: f64,
    budget: Option<u64>,
) -> Result<SearchOutcome, PlacementError> {
    let plane = CandidatePlane::from_scene(scene, altitude)?;
    let mut engine = Engine::new(plane, obj, budget);
    evolve(&mut engine, cfg, cfg.greedy_descents_per_iter, n_uav)?;
    engine.finish()
}

/// Shared evolutionary loop. `injections = 0` is the plain GA; the two
/// drivers are otherwise identical, down to the RNG trajectory (greedy
/// injections draw from their own sub-stream).
fn evolve(
    engine: &mut Engine<'_>,
    cfg: &GaConfig,
    injections: usize,
    n_uav: usize,
) -> Result<(), PlacementError> {
    cfg.validate()?;
    if n_uav == 0 {
        return Err(PlacementError::NoUavs);
    }
    let mut ops = seed::stream(cfg.rng_seed, "ga-ops");
    let mut inject = seed::stream(cfg.rng_seed, "ga-greedy");
    let plane = engine.plane;
    let mut population: Vec<Vec<PlaneCell>> = (0..cfg.population)
        .map(|_| (0..n_uav).map(|_| plane.sample(&mut ops)).collect())
        .collect();
    let pool = cfg.greedy_pool.min(cfg.population);
    for gen in 0..cfg.iterations {
        let mut scored: Vec<(Vec<PlaneCell>, f64)> = Vec::with_capacity(cfg.population);
        let mut out_of_budget = false;
        for column in &population {
            if !engine.charge() {
                out_of_budget = true;
                break;
            }
            scored.push(engine.eval_cells(column));
        }
        if out_of_budget {
            break;
        }
        // fittest first; stable, so equal scores keep their column order
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite scores"));
        for _ in 0..injections {
            if engine.spent() {
                break;
            }
            let j = inject.random_range(0..pool);
            let d = engine.descend(scored[j].0.clone(), false);
            if d.score >= scored[j].1 {
                scored[j] = (d.cells, d.score);
            }
            if d.exhausted {
                break;
            }
        }
        if injections > 0 {
            scored.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite scores"));
        }
        engine.push_trace();
        if gen + 1 == cfg.iterations || engine.spent() {
            break;
        }
        let min = scored.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = scored.iter().map(|s| s.1 - min + ROULETTE_EPS).collect();
        let total: f64 = weights.iter().sum();
        let mut next: Vec<Vec<PlaneCell>> =
            scored[..cfg.elite].iter().map(|s| s.0.clone()).collect();
        for _ in 0..cfg.crossover_count {
            let a = roulette(&weights, total, &mut ops);
            let b = roulette(&weights, total, &mut ops);
            let child = (0..n_uav)
                .map(|u| if ops.random_bool(0.5) { scored[a].0[u] } else { scored[b].0[u] })
                .collect();
            next.push(child);
        }
        for _ in 0..cfg.mutation_count {
            let parent = roulette(&weights, total, &mut ops);
            let mut child = scored[parent].0.clone();
            let slot = ops.random_range(0..n_uav);
            child[slot] = match cfg.mutation {
                MutationKind::Resample => plane.sample(&mut ops),
                MutationKind::Gaussian { sigma_m, max_step_m } => {
                    gaussian_step(&plane, child[slot], sigma_m, max_step_m, &mut ops)
                }
            };
            next.push(child);
        }
        population = next;
    }
    Ok(())
}

/// Fitness-proportional draw over min-shifted weights.
fn roulette(weights: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
    let mut x = rng.random_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

fn gaussian_step(
    plane: &CandidatePlane,
    cell: PlaneCell,
    sigma_m: f64,
    max_step_m: f64,
    rng: &mut ChaCha8Rng,
) -> PlaneCell {
    let normal = rand_distr::Normal::new(0.0, sigma_m).expect("validated sigma");
    let dx = rng.sample(normal).clamp(-max_step_m, max_step_m);
    let dy = rng.sample(normal).clamp(-max_step_m, max_step_m);
    let (px, py) = plane.pitch();
    let (cx, cy) = plane.cell_count();
    let r = (cell.0 as f64 + dx / px).round().clamp(0.0, (cx - 1) as f64);
    let c = (cell.1 as f64 + dy / py).round().clamp(0.0, (cy - 1) as f64);
    (r as usize, c as usize)
}
