//! Declarative scenario files, seeded environment generation, and presets.
//!
//! Scenario files are TOML and use field-friendly units at the boundary:
//! meters for lengths, degrees for angles, GHz for frequency, dBm for powers.
//! Everything handed to the rest of the library is SI (meters, radians, Hz,
//! watts, linear gains). Serialization is canonical: loading a file and
//! serializing it back yields a value-identical scenario.
//!
//! A scenario fans its single master seed out into independent sub-streams,
//! one per concern (scene generation, node placement, search, repair), so
//! regenerating the environment never perturbs the search randomness and
//! vice versa.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{dbi_to_linear, dbm_to_watts, watts_to_dbm, Atmosphere, LinkParams};
use crate::geometry::{GeometryError, Point3, PrismBlock, Scene};
use crate::placement::GaConfig;
use crate::planner::{GroundNodeSet, PlanFailure};
use crate::seed;

/// Sub-stream label for random block generation.
pub const SEED_SCENE: &str = "scene";
/// Sub-stream label for random node placement.
pub const SEED_NODES: &str = "nodes";
/// Sub-stream label for placement search randomness.
pub const SEED_SEARCH: &str = "search";
/// Sub-stream label for cluster repositioning draws.
pub const SEED_REPAIR: &str = "repair";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("area: {0}")]
    BadArea(&'static str),
    #[error("block {index}: {reason}")]
    BadBlock { index: usize, reason: String },
    #[error("random_blocks: {0}")]
    BadRandomBlocks(&'static str),
    #[error("nodes: {0}")]
    BadNodes(String),
    #[error("uav: {0}")]
    BadUav(String),
    #[error("search: {0}")]
    BadSearch(String),
    #[error("channel: {0}")]
    BadChannel(String),
    #[error("could not place {placed} of {wanted} nodes outside footprints after {attempts} draws")]
    NodesDontFit {
        placed: usize,
        wanted: usize,
        attempts: usize,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    NodeSet(#[from] PlanFailure),
}

/// Placement algorithm selector used by scenario files and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Multi-start steepest-ascent descent on the hover plane.
    Greedy,
    /// Genetic search over UAV position vectors.
    Ga,
    /// Genetic search with interleaved greedy descents.
    Hybrid,
    /// Clustering plus per-cluster repositioning, driven by the hybrid search.
    Geo,
    /// K-means clustering with feasible-cell snapping.
    Geokmeans,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Greedy => "greedy",
            Algorithm::Ga => "ga",
            Algorithm::Hybrid => "hybrid",
            Algorithm::Geo => "geo",
            Algorithm::Geokmeans => "geokmeans",
        }
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "greedy" => Ok(Algorithm::Greedy),
            "ga" => Ok(Algorithm::Ga),
            "hybrid" => Ok(Algorithm::Hybrid),
            "geo" => Ok(Algorithm::Geo),
            "geokmeans" => Ok(Algorithm::Geokmeans),
            other => Err(format!(
                "unknown algorithm {other:?}; expected greedy, ga, hybrid, geo, or geokmeans"
            )),
        }
    }
}

/// Ground extent and the two discretization grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AreaSpec {
    /// Area side along x, meters.
    pub dx: f64,
    /// Area side along y, meters.
    pub dy: f64,
    /// Coverage grid rows (x direction).
    pub nx: usize,
    /// Coverage grid columns (y direction).
    pub ny: usize,
    /// Hover plane rows (x direction).
    pub nux: usize,
    /// Hover plane columns (y direction).
    pub nuy: usize,
}

impl Default for AreaSpec {
    fn default() -> Self {
        Self { dx: 100.0, dy: 100.0, nx: 100, ny: 100, nux: 20, nuy: 20 }
    }
}

/// One explicit obstacle. Give `size` for a rectangular footprint, or
/// `sides` plus `circumradius` for a regular polygon. `height` is the
/// extent above `base`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    /// Footprint center, meters.
    pub center: [f64; 2],
    /// Base elevation, meters. Blocks normally sit on the ground.
    #[serde(default)]
    pub base: f64,
    /// Vertical extent above the base, meters.
    pub height: f64,
    /// Footprint rotation, degrees counterclockwise.
    #[serde(default)]
    pub theta_deg: f64,
    /// Full side lengths of a rectangular footprint, meters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<[f64; 2]>,
    /// Vertex count of a regular polygon footprint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sides: Option<u32>,
    /// Center-to-vertex distance of a regular polygon footprint, meters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circumradius: Option<f64>,
}

/// Random obstacle population: centers uniform over the area, side lengths
/// and heights uniform over their ranges, rotation uniform in [0, 90) deg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomBlocks {
    /// Number of blocks to generate.
    pub count: usize,
    /// Inclusive-exclusive range for each rectangle side, meters.
    pub side_range: [f64; 2],
    /// Inclusive-exclusive range for block height, meters.
    pub height_range: [f64; 2],
}

/// Ground node population, either explicit or randomly drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NodeSpec {
    /// Number of nodes to draw uniformly over the area, outside footprints.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    /// Explicit node ground coordinates, meters. Mutually exclusive with
    /// `count`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 2]>>,
    /// Allow nodes on block roofs. Random draws then land anywhere, and a
    /// node inside a footprint sits at that block's roof elevation.
    pub on_roofs: bool,
}

impl Default for NodeSpec {
    fn default() -> Self {
        Self { count: None, positions: None, on_roofs: false }
    }
}

/// UAV fleet description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UavSpec {
    /// Fleet size.
    pub count: usize,
    /// Hover altitude, meters.
    pub altitude: f64,
    /// Altitude ceiling, meters.
    pub h_max: f64,
    /// Optional fixed horizontal positions, meters. Length must equal
    /// `count`. When absent, positions come from the placement search.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 2]>>,
}

impl Default for UavSpec {
    fn default() -> Self {
        Self { count: 1, altitude: 80.0, h_max: 150.0, positions: None }
    }
}

/// Link and atmosphere parameters in file units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSpec {
    pub frequency_ghz: f64,
    pub tx_power_dbm: f64,
    pub noise_dbm: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub temperature_c: f64,
    pub pressure_hpa: f64,
    pub relative_humidity_pct: f64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self {
            frequency_ghz: 188.0,
            tx_power_dbm: watts_to_dbm(5e-3),
            noise_dbm: -85.0,
            tx_gain_dbi: 30.0,
            rx_gain_dbi: 30.0,
            temperature_c: 25.0,
            pressure_hpa: 1013.25,
            relative_humidity_pct: 20.0,
        }
    }
}

/// Search configuration. The genetic settings' `rng_seed` is ignored here:
/// runs driven by a scenario always reseed it from the master seed's
/// search sub-stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpec {
    pub algorithm: Algorithm,
    /// Optional evaluation budget cap.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    /// Restarts for the multi-start greedy descent.
    pub n_starts: usize,
    /// Restarts for k-means planning.
    pub restarts: usize,
    /// Whether a plan must serve every node over line-of-sight links for
    /// the run to count as successful.
    pub require_all_los: bool,
    pub ga: GaConfig,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Hybrid,
            budget: None,
            n_starts: 50,
            restarts: 20,
            require_all_los: true,
            ga: GaConfig::default(),
        }
    }
}

/// Coverage accounting switches.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageSpec {
    /// Score coverage over open ground only, ignoring cells under blocks.
    pub exclude_footprints: bool,
    /// Evaluate coverage at roof height where blocks stand.
    pub raise_ground_to_roofs: bool,
}

/// A complete declarative run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    /// Master seed; every random concern derives its own stream from it.
    pub seed: u64,
    pub area: AreaSpec,
    /// Explicit obstacles, placed before any random ones.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub blocks: Vec<BlockSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random_blocks: Option<RandomBlocks>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<NodeSpec>,
    pub uav: UavSpec,
    pub channel: ChannelSpec,
    pub search: SearchSpec,
    pub coverage: CoverageSpec,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            seed: 0,
            area: AreaSpec::default(),
            blocks: Vec::new(),
            random_blocks: None,
            nodes: None,
            uav: UavSpec::default(),
            channel: ChannelSpec::default(),
            search: SearchSpec::default(),
            coverage: CoverageSpec::default(),
        }
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let sc: Scenario =
        toml::from_str(&text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    sc.validate()?;
    Ok(sc)
}

/// Generates the random portion of a scene. Per block the draws are, in
/// order: center x, center y, side x, side y, height, rotation.
pub fn generate_blocks(
    area: &AreaSpec,
    spec: &RandomBlocks,
    master_seed: u64,
) -> Result<Vec<PrismBlock>, ScenarioError> {
    let mut rng = seed::stream(master_seed, SEED_SCENE);
    let mut blocks = Vec::with_capacity(spec.count);
    for index in 0..spec.count {
        let cx = rng.random_range(0.0..area.dx);
        let cy = rng.random_range(0.0..area.dy);
        let sx = range_sample(&mut rng, spec.side_range);
        let sy = range_sample(&mut rng, spec.side_range);
        let h = range_sample(&mut rng, spec.height_range);
        let theta = rng.random_range(0.0..FRAC_PI_2);
        let block = PrismBlock::cuboid(cx, cy, 0.0, h, theta, sx, sy)
            .map_err(|e| ScenarioError::BadBlock { index, reason: e.to_string() })?;
        blocks.push(block);
    }
    Ok(blocks)
}

/// Builds a full scene from a random block spec alone.
pub fn generate_scene(
    area: &AreaSpec,
    spec: &RandomBlocks,
    h_max: f64,
    master_seed: u64,
) -> Result<Scene, ScenarioError> {
    let blocks = generate_blocks(area, spec, master_seed)?;
    Ok(Scene::flat(area.dx, area.dy, area.nx, area.ny, area.nux, area.nuy, blocks, h_max)?)
}

fn range_sample(rng: &mut impl Rng, range: [f64; 2]) -> f64 {
    // A degenerate range is a constant, not an empty sampling interval.
    if range[0] == range[1] {
        range[0]
    } else {
        rng.random_range(range[0]..range[1])
    }
}

fn block_from_spec(index: usize, spec: &BlockSpec) -> Result<PrismBlock, ScenarioError> {
    let bad = |reason: String| ScenarioError::BadBlock { index, reason };
    if !spec.height.is_finite() || spec.height <= 0.0 {
        return Err(bad(format!("height must be positive, got {}", spec.height)));
    }
    if !spec.base.is_finite() || spec.base < 0.0 {
        return Err(bad(format!("base must be nonnegative, got {}", spec.base)));
    }
    if !spec.theta_deg.is_finite() {
        return Err(bad("rotation must be finite".into()));
    }
    let theta = spec.theta_deg.to_radians();
    let roof = spec.base + spec.height;
    match (spec.size, spec.sides, spec.circumradius) {
        (Some([sx, sy]), None, None) => {
            PrismBlock::cuboid(spec.center[0], spec.center[1], spec.base, roof, theta, sx, sy)
                .map_err(|e| bad(e.to_string()))
        }
        (None, Some(sides), Some(r)) => {
            PrismBlock::polygon(spec.center[0], spec.center[1], spec.base, roof, theta, sides, r)
                .map_err(|e| bad(e.to_string()))
        }
        _ => Err(bad("give either size or sides plus circumradius".into())),
    }
}

impl Scenario {
    /// Canonical TOML form of this scenario.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    /// Checks every invariant and names the first violated one.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let a = &self.area;
        if !(a.dx.is_finite() && a.dy.is_finite() && a.dx > 0.0 && a.dy > 0.0) {
            return Err(ScenarioError::BadArea("dx and dy must be positive and finite"));
        }
        if a.nx == 0 || a.ny == 0 {
            return Err(ScenarioError::BadArea("coverage grid needs at least one cell per axis"));
        }
        if a.nux == 0 || a.nuy == 0 {
            return Err(ScenarioError::BadArea("hover plane needs at least one cell per axis"));
        }
        for (index, spec) in self.blocks.iter().enumerate() {
            block_from_spec(index, spec)?;
        }
        if let Some(rb) = &self.random_blocks {
            for (range, what) in [(rb.side_range, "side"), (rb.height_range, "height")] {
                if !(range[0].is_finite() && range[1].is_finite() && range[0] > 0.0) {
                    return Err(ScenarioError::BadRandomBlocks(match what {
                        "side" => "side_range must be positive and finite",
                        _ => "height_range must be positive and finite",
                    }));
                }
                if range[0] > range[1] {
                    return Err(ScenarioError::BadRandomBlocks(match what {
                        "side" => "side_range low end exceeds high end",
                        _ => "height_range low end exceeds high end",
                    }));
                }
            }
        }
        if let Some(nodes) = &self.nodes {
            match (&nodes.positions, nodes.count) {
                (Some(p), None) => {
                    if p.is_empty() {
                        return Err(ScenarioError::BadNodes(
                            "explicit positions must be nonempty".into(),
                        ));
                    }
                    for (i, &[x, y]) in p.iter().enumerate() {
                        let inside =
                            x.is_finite() && y.is_finite() && (0.0..=a.dx).contains(&x) && (0.0..=a.dy).contains(&y);
                        if !inside {
                            return Err(ScenarioError::BadNodes(format!(
                                "node {i} at ({x}, {y}) is outside the area"
                            )));
                        }
                    }
                }
                (None, Some(count)) => {
                    if count == 0 {
                        return Err(ScenarioError::BadNodes("count must be at least 1".into()));
                    }
                }
                _ => {
                    return Err(ScenarioError::BadNodes(
                        "give exactly one of count or positions".into(),
                    ))
                }
            }
        }
        let u = &self.uav;
        if u.count == 0 {
            return Err(ScenarioError::BadUav("count must be at least 1".into()));
        }
        if !(u.altitude.is_finite() && u.altitude > 0.0) {
            return Err(ScenarioError::BadUav(format!(
                "altitude must be positive, got {}",
                u.altitude
            )));
        }
        if !(u.h_max.is_finite() && u.altitude <= u.h_max) {
            return Err(ScenarioError::BadUav(format!(
                "altitude {} exceeds the ceiling {}",
                u.altitude, u.h_max
            )));
        }
        if let Some(p) = &u.positions {
            if p.len() != u.count {
                return Err(ScenarioError::BadUav(format!(
                    "{} fixed positions given for {} UAVs",
                    p.len(),
                    u.count
                )));
            }
            for (i, &[x, y]) in p.iter().enumerate() {
                let inside =
                    x.is_finite() && y.is_finite() && (0.0..=a.dx).contains(&x) && (0.0..=a.dy).contains(&y);
                if !inside {
                    return Err(ScenarioError::BadUav(format!(
                        "UAV {i} at ({x}, {y}) is outside the area"
                    )));
                }
            }
        }
        let s = &self.search;
        if s.budget == Some(0) {
            return Err(ScenarioError::BadSearch("budget must be at least 1".into()));
        }
        if s.n_starts == 0 {
            return Err(ScenarioError::BadSearch("n_starts must be at least 1".into()));
        }
        if s.restarts == 0 {
            return Err(ScenarioError::BadSearch("restarts must be at least 1".into()));
        }
        s.ga.validate().map_err(|e| ScenarioError::BadSearch(e.to_string()))?;
        self.link_params()
            .validate()
            .map_err(|e| ScenarioError::BadChannel(e.to_string()))?;
        let atm = self.atmosphere();
        if !(atm.temperature_c.is_finite()
            && atm.pressure_hpa.is_finite()
            && atm.pressure_hpa > 0.0
            && (0.0..=100.0).contains(&atm.relative_humidity_pct))
        {
            return Err(ScenarioError::BadChannel(
                "atmosphere needs positive pressure and humidity in [0, 100]".into(),
            ));
        }
        Ok(())
    }

    /// Non-fatal advisories, e.g. a carrier outside the supported band.
    pub fn warnings(&self) -> Vec<String> {
        self.link_params().warnings()
    }

    /// Builds the scene: explicit blocks first, then the random population,
    /// then the optional roof-height ground modification.
    pub fn build_scene(&self) -> Result<Scene, ScenarioError> {
        let mut blocks = Vec::with_capacity(
            self.blocks.len() + self.random_blocks.map_or(0, |rb| rb.count),
        );
        for (index, spec) in self.blocks.iter().enumerate() {
            blocks.push(block_from_spec(index, spec)?);
        }
        if let Some(rb) = &self.random_blocks {
            blocks.extend(generate_blocks(&self.area, rb, self.seed)?);
        }
        let a = &self.area;
        let mut scene =
            Scene::flat(a.dx, a.dy, a.nx, a.ny, a.nux, a.nuy, blocks, self.uav.h_max)?;
        if self.coverage.raise_ground_to_roofs {
            scene.raise_ground_to_roofs();
        }
        Ok(scene)
    }

    /// Materializes the node set, if the scenario has one. Random nodes are
    /// drawn uniformly over the area and, unless roofs are allowed,
    /// rejection-sampled until they fall outside every footprint.
    pub fn build_nodes(&self, scene: &Scene) -> Result<Option<GroundNodeSet>, ScenarioError> {
        let Some(spec) = &self.nodes else {
            return Ok(None);
        };
        let positions: Vec<Point3> = if let Some(xy) = &spec.positions {
            xy.iter()
                .map(|&[x, y]| Point3::new(x, y, node_height(scene, x, y, spec.on_roofs)))
                .collect()
        } else {
            let wanted = spec.count.unwrap_or(0);
            let mut rng = seed::stream(self.seed, SEED_NODES);
            let mut out = Vec::with_capacity(wanted);
            let cap = 10_000 * wanted.max(1);
            let mut attempts = 0;
            while out.len() < wanted {
                attempts += 1;
                if attempts > cap {
                    return Err(ScenarioError::NodesDontFit {
                        placed: out.len(),
                        wanted,
                        attempts: cap,
                    });
                }
                let x = rng.random_range(0.0..scene.dx);
                let y = rng.random_range(0.0..scene.dy);
                if !spec.on_roofs
                    && scene.blocks.iter().any(|b| b.footprint_contains_strict(x, y))
                {
                    continue;
                }
                out.push(Point3::new(x, y, node_height(scene, x, y, spec.on_roofs)));
            }
            out
        };
        Ok(Some(GroundNodeSet::new(positions, scene)?))
    }

    /// Link parameters in SI units.
    pub fn link_params(&self) -> LinkParams {
        LinkParams {
            frequency_hz: self.channel.frequency_ghz * 1e9,
            tx_power_w: dbm_to_watts(self.channel.tx_power_dbm),
            noise_power_w: dbm_to_watts(self.channel.noise_dbm),
            tx_gain: dbi_to_linear(self.channel.tx_gain_dbi),
            rx_gain: dbi_to_linear(self.channel.rx_gain_dbi),
        }
    }

    pub fn atmosphere(&self) -> Atmosphere {
        Atmosphere {
            temperature_c: self.channel.temperature_c,
            pressure_hpa: self.channel.pressure_hpa,
            relative_humidity_pct: self.channel.relative_humidity_pct,
        }
    }

    /// Fixed fleet positions at hover altitude, when the file pins them.
    pub fn uav_positions(&self) -> Option<Vec<Point3>> {
        self.uav.positions.as_ref().map(|v| {
            v.iter().map(|&[x, y]| Point3::new(x, y, self.uav.altitude)).collect()
        })
    }

    /// Seed for the placement search sub-stream.
    pub fn search_seed(&self) -> u64 {
        seed::mix(self.seed, SEED_SEARCH)
    }

    /// Seed for the cluster repositioning sub-stream.
    pub fn repair_seed(&self) -> u64 {
        seed::mix(self.seed, SEED_REPAIR)
    }
}

/// Node elevation under the roof-placement rule: on a roof when allowed and
/// covered by a block, otherwise the local ground.
fn node_height(scene: &Scene, x: f64, y: f64, on_roofs: bool) -> f64 {
    if on_roofs {
        let roof = scene
            .blocks
            .iter()
            .filter(|b| b.footprint_contains_strict(x, y))
            .map(|b| b.roof_z)
            .fold(f64::NEG_INFINITY, f64::max);
        if roof.is_finite() {
            return roof;
        }
    }
    scene.ground_at(x, y)
}

/// Named built-in scenarios: `urban`, `suburban`, and `demo`.
pub fn preset(name: &str) -> Option<Scenario> {
    match name {
        "urban" => Some(urban()),
        "suburban" => Some(suburban()),
        "demo" => Some(demo()),
        _ => None,
    }
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 3] = ["urban", "suburban", "demo"];

/// Dense city block: 45 obstacles averaging 40 m tall on a 250 m square.
fn urban() -> Scenario {
    Scenario {
        area: AreaSpec { dx: 250.0, dy: 250.0, nx: 125, ny: 125, nux: 50, nuy: 50 },
        random_blocks: Some(RandomBlocks {
            count: 45,
            side_range: [10.0, 25.0],
            height_range: [20.0, 60.0],
        }),
        uav: UavSpec { count: 4, altitude: 100.0, h_max: 150.0, positions: None },
        ..Scenario::default()
    }
}

/// Low-rise sprawl: 35 obstacles averaging 12 m tall. Coverage is scored
/// over open ground only, since rooftops are not service targets here.
fn suburban() -> Scenario {
    Scenario {
        area: AreaSpec { dx: 250.0, dy: 250.0, nx: 125, ny: 125, nux: 50, nuy: 50 },
        random_blocks: Some(RandomBlocks {
            count: 35,
            side_range: [8.0, 14.0],
            height_range: [6.0, 18.0],
        }),
        uav: UavSpec { count: 3, altitude: 100.0, h_max: 150.0, positions: None },
        coverage: CoverageSpec { exclude_footprints: true, raise_ground_to_roofs: false },
        ..Scenario::default()
    }
}

/// Single fixed UAV over a 500 m square with 25 large blocks; handy for
/// eyeballing a coverage map.
fn demo() -> Scenario {
    Scenario {
        area: AreaSpec { dx: 500.0, dy: 500.0, nx: 100, ny: 100, nux: 50, nuy: 50 },
        random_blocks: Some(RandomBlocks {
            count: 25,
            side_range: [20.0, 50.0],
            height_range: [20.0, 60.0],
        }),
        uav: UavSpec {
            count: 1,
            altitude: 80.0,
            h_max: 150.0,
            positions: Some(vec![[53.0, 343.0]]),
        },
        ..Scenario::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        let sc: Scenario = toml::from_str("").unwrap();
        assert_eq!(sc, Scenario::default());
        sc.validate().unwrap();
        let scene = sc.build_scene().unwrap();
        assert!(scene.blocks.is_empty());
        assert_eq!(scene.nx, 100);
        assert!(sc.build_nodes(&scene).unwrap().is_none());
    }

    #[test]
    fn units_convert_at_the_boundary() {
        let sc: Scenario = toml::from_str(
            r#"
            [[blocks]]
            center = [50.0, 50.0]
            height = 30.0
            theta_deg = 90.0
            size = [20.0, 10.0]

            [channel]
            frequency_ghz = 200.0
            tx_power_dbm = 0.0
            noise_dbm = -90.0
            tx_gain_dbi = 20.0
            "#,
        )
        .unwrap();
        sc.validate().unwrap();
        let link = sc.link_params();
        assert_eq!(link.frequency_hz, 200e9);
        assert!((link.tx_power_w - 1e-3).abs() < 1e-18);
        assert!((link.noise_power_w - 1e-12).abs() < 1e-24);
        assert!((link.tx_gain - 100.0).abs() < 1e-10);
        let scene = sc.build_scene().unwrap();
        assert!((scene.blocks[0].theta - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        // A quarter turn swaps the rectangle's axes.
        assert!(scene.blocks[0].footprint_contains_strict(50.0, 58.0));
        assert!(!scene.blocks[0].footprint_contains_strict(58.0, 50.0));
    }

    #[test]
    fn canonical_form_round_trips() {
        for name in PRESET_NAMES {
            let sc = preset(name).unwrap();
            let text = sc.to_toml();
            let back: Scenario = toml::from_str(&text).unwrap();
            assert_eq!(back, sc, "{name} round trip");
        }
        let mut sc = preset("urban").unwrap();
        sc.seed = 99;
        sc.nodes = Some(NodeSpec { count: Some(25), positions: None, on_roofs: false });
        sc.blocks.push(BlockSpec {
            center: [10.0, 20.0],
            base: 0.0,
            height: 12.0,
            theta_deg: 15.0,
            size: None,
            sides: Some(6),
            circumradius: Some(4.0),
        });
        sc.search.budget = Some(500);
        let back: Scenario = toml::from_str(&sc.to_toml()).unwrap();
        assert_eq!(back, sc);
    }

    #[test]
    fn bad_block_errors_name_the_block() {
        let sc: Scenario = toml::from_str(
            r#"
            [[blocks]]
            center = [10.0, 10.0]
            height = 5.0
            size = [4.0, 4.0]

            [[blocks]]
            center = [40.0, 40.0]
            height = -3.0
            size = [4.0, 4.0]
            "#,
        )
        .unwrap();
        let err = sc.validate().unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("block 1:"), "{msg}");
        assert!(msg.contains("height"), "{msg}");
    }

    #[test]
    fn shape_must_be_exactly_one_of_rect_or_polygon() {
        let sc: Scenario = toml::from_str(
            r#"
            [[blocks]]
            center = [10.0, 10.0]
            height = 5.0
            "#,
        )
        .unwrap();
        assert!(matches!(sc.validate(), Err(ScenarioError::BadBlock { index: 0, .. })));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = toml::from_str::<Scenario>("frobnicate = 3\n").unwrap_err();
        assert!(err.to_string().contains("frobnicate"));
    }

    #[test]
    fn altitude_above_ceiling_is_named() {
        let sc: Scenario = toml::from_str(
            r#"
            [uav]
            count = 2
            altitude = 200.0
            h_max = 150.0
            "#,
        )
        .unwrap();
        let msg = sc.validate().unwrap_err().to_string();
        assert!(msg.contains("altitude 200 exceeds the ceiling 150"), "{msg}");
    }

    #[test]
    fn generation_is_deterministic_in_the_master_seed() {
        let mut sc = preset("urban").unwrap();
        sc.seed = 7;
        let a = sc.build_scene().unwrap();
        let b = sc.build_scene().unwrap();
        assert_eq!(a.blocks.len(), 45);
        for (x, y) in a.blocks.iter().zip(b.blocks.iter()) {
            assert_eq!(x, y);
        }
        sc.seed = 8;
        let c = sc.build_scene().unwrap();
        assert!(a.blocks.iter().zip(c.blocks.iter()).any(|(x, y)| x != y));
    }

    #[test]
    fn zero_random_blocks_is_an_empty_scene() {
        let mut sc = preset("urban").unwrap();
        sc.random_blocks = Some(RandomBlocks {
            count: 0,
            side_range: [10.0, 25.0],
            height_range: [20.0, 60.0],
        });
        let scene = sc.build_scene().unwrap();
        assert!(scene.blocks.is_empty());
    }

    #[test]
    fn generated_heights_match_the_configured_distribution() {
        let sc = Scenario {
            seed: 3,
            random_blocks: Some(RandomBlocks {
                count: 500,
                side_range: [10.0, 25.0],
                height_range: [20.0, 60.0],
            }),
            ..Scenario::default()
        };
        let scene = sc.build_scene().unwrap();
        assert_eq!(scene.blocks.len(), 500);
        let mean = scene.blocks.iter().map(|b| b.roof_z).sum::<f64>() / 500.0;
        // Uniform [20, 60) has mean 40; a 500-sample average stays well
        // within ten percent of it.
        assert!((mean - 40.0).abs() < 4.0, "mean height {mean}");
        let theta_max =
            scene.blocks.iter().map(|b| b.theta).fold(f64::NEG_INFINITY, f64::max);
        let theta_min = scene.blocks.iter().map(|b| b.theta).fold(f64::INFINITY, f64::min);
        assert!(theta_min >= 0.0 && theta_max < FRAC_PI_2);
    }

    #[test]
    fn random_nodes_avoid_footprints_and_are_deterministic() {
        let sc = Scenario {
            seed: 11,
            random_blocks: Some(RandomBlocks {
                count: 30,
                side_range: [10.0, 20.0],
                height_range: [10.0, 30.0],
            }),
            nodes: Some(NodeSpec { count: Some(40), positions: None, on_roofs: false }),
            ..Scenario::default()
        };
        let scene = sc.build_scene().unwrap();
        let nodes = sc.build_nodes(&scene).unwrap().unwrap();
        assert_eq!(nodes.len(), 40);
        for p in nodes.positions() {
            assert!(!scene.blocks.iter().any(|b| b.footprint_contains_strict(p.x, p.y)));
            assert_eq!(p.z, 0.0);
        }
        let again = sc.build_nodes(&scene).unwrap().unwrap();
        assert_eq!(nodes.positions(), again.positions());
    }

    #[test]
    fn roof_nodes_take_the_roof_elevation() {
        // One block covering the middle; explicit node on it.
        let sc = Scenario {
            blocks: vec![BlockSpec {
                center: [50.0, 50.0],
                base: 0.0,
                height: 25.0,
                theta_deg: 0.0,
                size: Some([40.0, 40.0]),
                sides: None,
                circumradius: None,
            }],
            nodes: Some(NodeSpec {
                count: None,
                positions: Some(vec![[50.0, 50.0], [5.0, 5.0]]),
                on_roofs: true,
            }),
            ..Scenario::default()
        };
        let scene = sc.build_scene().unwrap();
        let nodes = sc.build_nodes(&scene).unwrap().unwrap();
        assert_eq!(nodes.positions()[0].z, 25.0);
        assert_eq!(nodes.positions()[1].z, 0.0);
        // Without the flag the same explicit node sits at ground level.
        let mut flat = sc.clone();
        flat.nodes.as_mut().unwrap().on_roofs = false;
        let grounded = flat.build_nodes(&scene).unwrap().unwrap();
        assert_eq!(grounded.positions()[0].z, 0.0);
    }

    #[test]
    fn nodes_that_cannot_fit_report_the_attempt_budget() {
        // A block blanketing the whole area leaves no open ground.
        let sc = Scenario {
            blocks: vec![BlockSpec {
                center: [50.0, 50.0],
                base: 0.0,
                height: 10.0,
                theta_deg: 0.0,
                size: Some([300.0, 300.0]),
                sides: None,
                circumradius: None,
            }],
            nodes: Some(NodeSpec { count: Some(3), positions: None, on_roofs: false }),
            ..Scenario::default()
        };
        let scene = sc.build_scene().unwrap();
        match sc.build_nodes(&scene) {
            Err(ScenarioError::NodesDontFit { placed: 0, wanted: 3, .. }) => {}
            other => panic!("expected NodesDontFit, got {other:?}"),
        }
    }

    #[test]
    fn presets_have_their_documented_shapes() {
        let urban = preset("urban").unwrap();
        assert_eq!(urban.random_blocks.unwrap().count, 45);
        let h = urban.random_blocks.unwrap().height_range;
        assert_eq!((h[0] + h[1]) / 2.0, 40.0);
        assert_eq!(urban.uav.count, 4);

        let suburban = preset("suburban").unwrap();
        assert_eq!(suburban.random_blocks.unwrap().count, 35);
        assert!(suburban.coverage.exclude_footprints);

        let demo = preset("demo").unwrap();
        assert_eq!(demo.uav_positions().unwrap(), vec![Point3::new(53.0, 343.0, 80.0)]);
        assert!(preset("rural").is_none());
    }

    #[test]
    fn seed_fanout_streams_are_distinct() {
        let sc = Scenario { seed: 42, ..Scenario::default() };
        assert_ne!(sc.search_seed(), sc.repair_seed());
        assert_ne!(sc.search_seed(), seed::mix(42, SEED_SCENE));
    }

    #[test]
    fn deserialized_blocks_have_live_rotation_caches() {
        // The trig cache is skipped by serde, so loading must rebuild it.
        let sc: Scenario = toml::from_str(
            r#"
            [[blocks]]
            center = [50.0, 50.0]
            height = 30.0
            theta_deg = 45.0
            size = [20.0, 10.0]
            "#,
        )
        .unwrap();
        let scene = sc.build_scene().unwrap();
        let (c, s) = scene.blocks[0].frame_cos_sin();
        assert!(c.is_finite() && s.is_finite());
        assert!((c - s).abs() < 1e-15);
    }
}
