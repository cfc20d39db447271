//! Joint clustering of ground nodes and UAV positioning for all-LoS
//! capacity: capacity-greedy clustering, cluster-and-reposition repair via
//! acceptable regions, and a k-means planner that snaps centroids onto
//! feasible hover cells.
//!
//! Planners count full-grid visibility passes (the dominant cost) into a
//! caller-supplied meter so budgets of different algorithms compare in the
//! same units.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::channel::{link_capacity, Atmosphere, ChannelError, LinkParams};
use crate::geometry::{Point3, Scene};
use crate::grid::Grid;
use crate::los::{acceptable_region, los_vector, LosError};
use crate::placement::{CandidatePlane, Evaluation, Objective, PlacementError};
use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum PlanFailure {
    #[error("no ground nodes")]
    NoNodes,
    #[error("node {node} lies outside the scene")]
    NodeOutsideScene { node: usize },
    #[error("no UAVs given")]
    NoUavs,
    #[error("need at least one restart")]
    NoRestarts,
    #[error("node {node} is in NLoS of every UAV")]
    StrandedNode { node: usize },
    #[error("cluster {cluster} has no hover cell seeing all of its nodes")]
    InfeasibleCluster { cluster: usize },
    #[error(transparent)]
    Los(#[from] LosError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
}

/// Validated ground-node positions (z = local ground or roof height).
#[derive(Debug, Clone, PartialEq)]
pub struct GroundNodeSet {
    positions: Vec<Point3>,
}

impl GroundNodeSet {
    pub fn new(positions: Vec<Point3>, scene: &Scene) -> Result<Self, PlanFailure> {
        if positions.is_empty() {
            return Err(PlanFailure::NoNodes);
        }
        for (i, p) in positions.iter().enumerate() {
            if !p.is_finite() || !scene.contains_xy(p.x, p.y) {
                return Err(PlanFailure::NodeOutsideScene { node: i });
            }
        }
        Ok(Self { positions })
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty sets
    }
}

/// A complete deployment: node-to-UAV assignment, hover positions, and the
/// capacity the deployment delivers.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPlan {
    /// Node index -> UAV index; every node appears in exactly one cluster.
    pub assignment: Vec<usize>,
    pub uav_positions: Vec<Point3>,
    /// Average spectral efficiency over all nodes; NLoS links contribute 0.
    pub avg_capacity: f64,
    /// True iff every node has LoS to its assigned UAV.
    pub all_los: bool,
    /// Acceptable hover cells per cluster, when the planner computed them.
    pub feasible_regions: Option<Vec<Grid<bool>>>,
}

/// Per-node capacity toward an assigned UAV set; NLoS links score 0.
/// LoS flags from `uav` to `points` for planning purposes: a hover position
/// that is not a legal source (inside a block, or below the local ground)
/// sees nothing instead of being an error, so partial plans stay scoreable.
fn los_or_blind(
    points: &[Point3],
    uav: Point3,
    scene: &Scene,
) -> Result<Vec<bool>, LosError> {
    match los_vector(points, uav, scene) {
        Err(LosError::SourceInsideBlock { .. } | LosError::BelowGround { .. }) => {
            Ok(vec![false; points.len()])
        }
        other => other,
    }
}

pub fn per_node_capacity(
    nodes: &GroundNodeSet,
    assignment: &[usize],
    uavs: &[Point3],
    scene: &Scene,
    link: &LinkParams,
    atm: &Atmosphere,
) -> Result<Vec<f64>, PlanFailure> {
    let mu = atm.mixing_ratio();
    let mut capacity = vec![0.0; nodes.len()];
    for (uav_ix, &uav) in uavs.iter().enumerate() {
        let members: Vec<usize> =
            (0..nodes.len()).filter(|&k| assignment[k] == uav_ix).collect();
        if members.is_empty() {
            continue;
        }
        let points: Vec<Point3> = members.iter().map(|&k| nodes.positions[k]).collect();
        let visible = los_or_blind(&points, uav, scene)?;
        for (&k, &vis) in members.iter().zip(visible.iter()) {
            if vis {
                capacity[k] = link_capacity(link, mu, nodes.positions[k].distance(uav))?;
            }
        }
    }
    Ok(capacity)
}

/// Mean over all nodes of the per-node capacity under `assignment`.
pub fn avg_network_capacity(
    nodes: &GroundNodeSet,
    assignment: &[usize],
    uavs: &[Point3],
    scene: &Scene,
    link: &LinkParams,
    atm: &Atmosphere,
) -> Result<f64, PlanFailure> {
    let per_node = per_node_capacity(nodes, assignment, uavs, scene, link, atm)?;
    Ok(per_node.iter().sum::<f64>() / per_node.len() as f64)
}

struct Assignment {
    cluster: Vec<usize>,
    capacity: Vec<f64>,
    first_stranded: Option<usize>,
}

/// Per node: the best-capacity LoS UAV (ties to the lowest index) or, for
/// nodes no UAV can see, the nearest UAV.
fn assign_nodes(
    nodes: &GroundNodeSet,
    uavs: &[Point3],
    scene: &Scene,
    link: &LinkParams,
    atm: &Atmosphere,
) -> Result<Assignment, PlanFailure> {
    if uavs.is_empty() {
        return Err(PlanFailure::NoUavs);
    }
    let mu = atm.mixing_ratio();
    let n = nodes.len();
    let mut best_cap = vec![0.0; n];
    let mut cluster = vec![usize::MAX; n];
    for (uav_ix, &uav) in uavs.iter().enumerate() {
        let visible = los_or_blind(nodes.positions(), uav, scene)?;
        for (k, &vis) in visible.iter().enumerate() {
            if !vis {
                continue;
            }
            let cap = link_capacity(link, mu, nodes.positions[k].distance(uav))?;
            if cap > best_cap[k] {
                best_cap[k] = cap;
                cluster[k] = uav_ix;
            }
        }
    }
    let mut first_stranded = None;
    for k in 0..n {
        if cluster[k] != usize::MAX {
            continue;
        }
        if first_stranded.is_none() {
            first_stranded = Some(k);
        }
        let nearest = uavs
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                nodes.positions[k]
                    .distance(**a)
                    .partial_cmp(&nodes.positions[k].distance(**b))
                    .expect("finite distances")
            })
            .map(|(i, _)| i)
            .expect("uavs nonempty");
        cluster[k] = nearest;
    }
    Ok(Assignment { cluster, capacity: best_cap, first_stranded })
}

/// Assign each node to the UAV giving it the highest LoS capacity. Fails on
/// the first node no UAV can see.
pub fn cluster_by_capacity(
    nodes: &GroundNodeSet,
    uavs: &[Point3],
    scene: &Scene,
    link: &LinkParams,
    atm: &Atmosphere,
) -> Result<ClusterPlan, PlanFailure> {
    let assigned = assign_nodes(nodes, uavs, scene, link, atm)?;
    if let Some(node) = assigned.first_stranded {
        return Err(PlanFailure::StrandedNode { node });
    }
    let avg = assigned.capacity.iter().sum::<f64>() / nodes.len() as f64;
    Ok(ClusterPlan {
        assignment: assigned.cluster,
        uav_positions: uavs.to_vec(),
        avg_capacity: avg,
        all_los: true,
        feasible_regions: None,
    })
}

/// Capacity clustering that tolerates blocked nodes: NLoS nodes join their
/// nearest UAV, contribute zero capacity, and clear the all-LoS flag.
pub fn cluster_allowing_nlos(
    nodes: &GroundNodeSet,
    uavs: &[Point3],
    scene: &Scene,
    link: &LinkParams,
    atm: &Atmosphere,
) -> Result<ClusterPlan, PlanFailure> {
    let assigned = assign_nodes(nodes, uavs, scene, link, atm)?;
    let avg = assigned.capacity.iter().sum::<f64>() / nodes.len() as f64;
    Ok(ClusterPlan {
        assignment: assigned.cluster,
        uav_positions: uavs.to_vec(),
        avg_capacity: avg,
        all_los: assigned.first_stranded.is_none(),
        feasible_regions: None,
    })
}

/// Cluster as above, then move each UAV to a uniformly random cell of its
/// cluster's acceptable region and recompute capacity. Every node of a
/// nonempty cluster is guaranteed LoS afterwards; an empty region fails the
/// plan with the offending cluster index. Each region costs one visibility
/// pass per cluster member, charged to `grids`.
pub fn geo_cluster_and_reposition(
    nodes: &GroundNodeSet,
    uavs: &[Point3],
    scene: &Scene,
    link: &LinkParams,
    atm: &Atmosphere,
    rng: &mut ChaCha8Rng,
    grids: &mut u64,
) -> Result<ClusterPlan, PlanFailure> {
    let assigned = assign_nodes(nodes, uavs, scene, link, atm)?;
    let mut positions = uavs.to_vec();
    let mut regions = Vec::with_capacity(uavs.len());
    for (uav_ix, &uav) in uavs.iter().enumerate() {
        let members: Vec<Point3> = (0..nodes.len())
            .filter(|&k| assigned.cluster[k] == uav_ix)
            .map(|k| nodes.positions[k])
            .collect();
        if members.is_empty() {
            // no nodes to serve: the UAV stays put, any cell is acceptable
            regions.push(Grid::filled(scene.nux, scene.nuy, true));
            continue;
        }
        let region = acceptable_region(&members, scene, uav.z);
        *grids += members.len() as u64;
        let open: Vec<usize> = region
            .as_slice()
            .iter()
            .enumerate()
            .filter_map(|(i, &ok)| ok.then_some(i))
            .collect();
        if open.is_empty() {
            return Err(PlanFailure::InfeasibleCluster { cluster: uav_ix });
        }
        let pick = open[rng.random_range(0..open.len())];
        positions[uav_ix] =
            scene.plane_position(pick / scene.nuy, pick % scene.nuy, uav.z);
        regions.push(region);
    }
    let per_node = per_node_capacity(nodes, &assigned.cluster, &positions, scene, link, atm)?;
    let all_los = per_node.iter().all(|&c| c > 0.0);
    Ok(ClusterPlan {
        assignment: assigned.cluster,
        uav_positions: positions,
        avg_capacity: per_node.iter().sum::<f64>() / nodes.len() as f64,
        all_los,
        feasible_regions: Some(regions),
    })
}

/// Row-major first cell of `region` minimizing xy distance to `target`.
fn closest_true_cell(
    region: &Grid<bool>,
    plane: &CandidatePlane,
    target: (f64, f64),
) -> Option<(usize, usize)> {
    let mut best: Option<((usize, usize), f64)> = None;
    for r in 0..region.rows() {
        for c in 0..region.cols() {
            if !region[(r, c)] {
                continue;
            }
            let p = plane.position((r, c));
            let d2 = (p.x - target.0).powi(2) + (p.y - target.1).powi(2);
            if best.map_or(true, |(_, bd)| d2 < bd) {
                best = Some(((r, c), d2));
            }
        }
    }
    best.map(|(cell, _)| cell)
}

/// One k-means restart: xy assignment to the nearest UAV until the
/// assignment repeats; empty clusters reseed at the node farthest from its
/// own UAV.
fn kmeans(nodes: &GroundNodeSet, mut uav_xy: Vec<(f64, f64)>) -> Vec<usize> {
    let n_uav = uav_xy.len();
    let d2 = |p: Point3, q: (f64, f64)| (p.x - q.0).powi(2) + (p.y - q.1).powi(2);
    let mut prev: Option<Vec<usize>> = None;
    for _ in 0..500 {
        let mut assignment: Vec<usize> = nodes
            .positions
            .iter()
            .map(|&p| {
                (0..n_uav)
                    .min_by(|&a, &b| {
                        d2(p, uav_xy[a]).partial_cmp(&d2(p, uav_xy[b])).expect("finite")
                    })
                    .expect("at least one UAV")
            })
            .collect();
        let mut reseeded = false;
        for n in 0..n_uav {
            if assignment.iter().any(|&a| a == n) {
                continue;
            }
            let far = (0..nodes.len())
                .max_by(|&a, &b| {
                    d2(nodes.positions[a], uav_xy[assignment[a]])
                        .partial_cmp(&d2(nodes.positions[b], uav_xy[assignment[b]]))
                        .expect("finite")
                })
                .expect("nodes nonempty");
            uav_xy[n] = (nodes.positions[far].x, nodes.positions[far].y);
            assignment[far] = n;
            reseeded = true;
        }
        let converged = !reseeded && prev.as_deref() == Some(&assignment);
        for n in 0..n_uav {
            let members: Vec<&Point3> = nodes
                .positions
                .iter()
                .zip(assignment.iter())
                .filter_map(|(p, &a)| (a == n).then_some(p))
                .collect();
            if !members.is_empty() {
                let inv = 1.0 / members.len() as f64;
                uav_xy[n] = (
                    members.iter().map(|p| p.x).sum::<f64>() * inv,
                    members.iter().map(|p| p.y).sum::<f64>() * inv,
                );
            }
        }
        if converged {
            return assignment;
        }
        prev = Some(assignment);
    }
    prev.expect("at least one round")
}

/// Restarted k-means planning: cluster in the xy plane, snap each UAV to the
/// acceptable-region cell closest to its centroid, and keep the feasible
/// restart with the highest capacity. When every restart leaves some
/// cluster infeasible, the best partial plan is returned with `all_los`
/// false instead of an error.
pub fn geo_kmeans_plan(
    nodes: &GroundNodeSet,
    scene: &Scene,
    link: &LinkParams,
    atm: &Atmosphere,
    n_uav: usize,
    altitude: f64,
    n_restarts: usize,
    rng: &mut ChaCha8Rng,
    grids: &mut u64,
) -> Result<ClusterPlan, PlanFailure> {
    if n_uav == 0 {
        return Err(PlanFailure::NoUavs);
    }
    if n_restarts == 0 {
        return Err(PlanFailure::NoRestarts);
    }
    let plane = CandidatePlane::from_scene(scene, altitude)?;
    let mut best_feasible: Option<ClusterPlan> = None;
    let mut best_effort: Option<ClusterPlan> = None;
    for _ in 0..n_restarts {
        let start_xy: Vec<(f64, f64)> = (0..n_uav)
            .map(|_| {
                let p = plane.position(plane.sample(rng));
                (p.x, p.y)
            })
            .collect();
        let assignment = kmeans(nodes, start_xy.clone());
        // recompute the converged centroids for the snap targets
        let mut centroids = start_xy;
        for n in 0..n_uav {
            let members: Vec<&Point3> = nodes
                .positions
                .iter()
                .zip(assignment.iter())
                .filter_map(|(p, &a)| (a == n).then_some(p))
                .collect();
            if !members.is_empty() {
                let inv = 1.0 / members.len() as f64;
                centroids[n] = (
                    members.iter().map(|p| p.x).sum::<f64>() * inv,
                    members.iter().map(|p| p.y).sum::<f64>() * inv,
                );
            }
        }
        let mut positions = Vec::with_capacity(n_uav);
        let mut regions = Vec::with_capacity(n_uav);
        let mut feasible = true;
        for n in 0..n_uav {
            let members: Vec<Point3> = nodes
                .positions
                .iter()
                .zip(assignment.iter())
                .filter_map(|(&p, &a)| (a == n).then_some(p))
                .collect();
            if members.is_empty() {
                regions.push(Grid::filled(scene.nux, scene.nuy, true));
                positions.push(Point3::new(centroids[n].0, centroids[n].1, altitude));
                continue;
            }
            let region = acceptable_region(&members, scene, altitude);
            *grids += members.len() as u64;
            match closest_true_cell(&region, &plane, centroids[n]) {
                Some(cell) => positions.push(plane.position(cell)),
                None => {
                    feasible = false;
                    positions.push(Point3::new(centroids[n].0, centroids[n].1, altitude));
                }
            }
            regions.push(region);
        }
        let per_node = per_node_capacity(nodes, &assignment, &positions, scene, link, atm)?;
        let plan = ClusterPlan {
            assignment,
            uav_positions: positions,
            avg_capacity: per_node.iter().sum::<f64>() / nodes.len() as f64,
            all_los: per_node.iter().all(|&c| c > 0.0),
            feasible_regions: Some(regions),
        };
        let slot = if feasible && plan.all_los { &mut best_feasible } else { &mut best_effort };
        if slot.as_ref().map_or(true, |b| plan.avg_capacity > b.avg_capacity) {
            *slot = Some(plan);
        }
    }
    Ok(best_feasible.or(best_effort).expect("at least one restart ran"))
}

/// Snapshot of the best plans an objective adapter has scored.
#[derive(Debug, Default)]
struct BestPlans {
    any: Option<ClusterPlan>,
    feasible: Option<ClusterPlan>,
}

/// Adapter that plugs cluster-and-reposition planning into the placement
/// search drivers: the score is the repaired plan's average capacity and
/// the repaired hover positions ride back to the search, which adopts them.
/// Repair randomness is derived from the candidate positions, so equal
/// candidates always evaluate identically.
pub struct RepairObjective<'a> {
    nodes: &'a GroundNodeSet,
    scene: &'a Scene,
    link: LinkParams,
    atm: Atmosphere,
    seed: u64,
    grids: AtomicU64,
    best: Mutex<BestPlans>,
}

impl<'a> RepairObjective<'a> {
    pub fn new(
        nodes: &'a GroundNodeSet,
        scene: &'a Scene,
        link: LinkParams,
        atm: Atmosphere,
        seed: u64,
    ) -> Self {
        Self {
            nodes,
            scene,
            link,
            atm,
            seed,
            grids: AtomicU64::new(0),
            best: Mutex::new(BestPlans::default()),
        }
    }

    /// Visibility passes consumed by all evaluations so far.
    pub fn grids_computed(&self) -> u64 {
        self.grids.load(Ordering::Relaxed)
    }

    /// Best all-LoS plan seen, falling back to the best partial plan.
    pub fn best_plan(&self) -> Option<ClusterPlan> {
        let best = self.best.lock().expect("no poisoned lock");
        best.feasible.clone().or_else(|| best.any.clone())
    }

    fn note(&self, plan: ClusterPlan) {
        let mut best = self.best.lock().expect("no poisoned lock");
        if plan.all_los
            && best
                .feasible
                .as_ref()
                .map_or(true, |b| plan.avg_capacity > b.avg_capacity)
        {
            best.feasible = Some(plan.clone());
        }
        if best.any.as_ref().map_or(true, |b| plan.avg_capacity > b.avg_capacity) {
            best.any = Some(plan);
        }
    }
}

impl Objective for RepairObjective<'_> {
    fn evaluate(&self, positions: &[Point3]) -> Evaluation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::mix_positions(self.seed, positions));
        let mut grids = 0u64;
        let result = geo_cluster_and_reposition(
            self.nodes,
            positions,
            self.scene,
            &self.link,
            &self.atm,
            &mut rng,
            &mut grids,
        );
        let evaluation = match result {
            Ok(plan) => {
                let out = Evaluation {
                    score: plan.avg_capacity,
                    repaired: Some(plan.uav_positions.clone()),
                };
                self.note(plan);
                out
            }
            Err(_) => {
                // infeasible clustering: score what the candidate delivers
                // as-is so the search can still climb toward feasibility
                let plan = cluster_allowing_nlos(
                    self.nodes,
                    positions,
                    self.scene,
                    &self.link,
                    &self.atm,
                )
                .expect("candidate positions are valid hover cells");
                let out = Evaluation::plain(plan.avg_capacity);
                self.note(plan);
                out
            }
        };
        self.grids.fetch_add(grids, Ordering::Relaxed);
        evaluation
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PrismBlock;

    fn open_scene() -> Scene {
        Scene::flat(100.0, 100.0, 20, 20, 10, 10, Vec::new(), 150.0).unwrap()
    }

    fn link() -> LinkParams {
        LinkParams::default()
    }

    fn atm() -> Atmosphere {
        Atmosphere::default()
    }

    #[test]
    fn single_uav_takes_every_node() {
        let scene = open_scene();
        let nodes = GroundNodeSet::new(
            vec![
                Point3::new(10.0, 10.0, 0.0),
                Point3::new(50.0, 80.0, 0.0),
                Point3::new(90.0, 20.0, 0.0),
            ],
            &scene,
        )
        .unwrap();
        let uav = Point3::new(50.0, 50.0, 100.0);
        let plan = cluster_by_capacity(&nodes, &[uav], &scene, &link(), &atm()).unwrap();
        assert_eq!(plan.assignment, vec![0, 0, 0]);
        assert!(plan.all_los);
        let mu = atm().mixing_ratio();
        let direct: f64 = nodes
            .positions()
            .iter()
            .map(|p| link_capacity(&link(), mu, p.distance(uav)).unwrap())
            .sum::<f64>()
            / 3.0;
        assert_eq!(plan.avg_capacity, direct);
    }

    #[test]
    fn fully_blocked_node_is_reported_by_index() {
        // a wide slab hides the second node from the low UAV
        let slab = PrismBlock::cuboid(50.0, 50.0, 0.0, 60.0, 0.0, 60.0, 8.0).unwrap();
        let scene = Scene::flat(100.0, 100.0, 20, 20, 10, 10, vec![slab], 150.0).unwrap();
        let nodes = GroundNodeSet::new(
            vec![Point3::new(50.0, 20.0, 0.0), Point3::new(50.0, 80.0, 0.0)],
            &scene,
        )
        .unwrap();
        let uav = Point3::new(50.0, 10.0, 30.0);
        let err = cluster_by_capacity(&nodes, &[uav], &scene, &link(), &atm()).unwrap_err();
        assert_eq!(err, PlanFailure::StrandedNode { node: 1 });
        let partial = cluster_allowing_nlos(&nodes, &[uav], &scene, &link(), &atm()).unwrap();
        assert!(!partial.all_los);
        let mu = atm().mixing_ratio();
        let visible_only =
            link_capacity(&link(), mu, nodes.positions()[0].distance(uav)).unwrap() / 2.0;
        assert_eq!(partial.avg_capacity, visible_only);
    }

    #[test]
    fn open_air_assignment_matches_nearest_uav() {
        let scene = open_scene();
        let mut rng = seed::stream(5, "nodes");
        let points: Vec<Point3> = (0..30)
            .map(|_| {
                Point3::new(rng.random_range(1.0..99.0), rng.random_range(1.0..99.0), 0.0)
            })
            .collect();
        let nodes = GroundNodeSet::new(points, &scene).unwrap();
        let uavs = [Point3::new(25.0, 25.0, 90.0), Point3::new(75.0, 75.0, 90.0)];
        let plan = cluster_by_capacity(&nodes, &uavs, &scene, &link(), &atm()).unwrap();
        for (k, p) in nodes.positions().iter().enumerate() {
            let nearer = if p.distance(uavs[0]) <= p.distance(uavs[1]) { 0 } else { 1 };
            assert_eq!(plan.assignment[k], nearer, "node {k}");
        }
    }

    #[test]
    fn repositioning_restores_los_for_blocked_nodes() {
        let tower = PrismBlock::cuboid(50.0, 50.0, 0.0, 90.0, 0.0, 20.0, 20.0).unwrap();
        let scene = Scene::flat(100.0, 100.0, 20, 20, 20, 20, vec![tower], 150.0).unwrap();
        let nodes = GroundNodeSet::new(
            vec![Point3::new(80.0, 50.0, 0.0), Point3::new(85.0, 60.0, 0.0)],
            &scene,
        )
        .unwrap();
        // the tower hides both nodes from a low UAV on the far side
        let uav = Point3::new(15.0, 50.0, 40.0);
        let mut rng = seed::stream(9, "repair");
        let mut grids = 0;
        let plan = geo_cluster_and_reposition(
            &nodes,
            &[uav],
            &scene,
            &link(),
            &atm(),
            &mut rng,
            &mut grids,
        )
        .unwrap();
        assert!(plan.all_los);
        assert!(plan.avg_capacity > 0.0);
        assert_eq!(grids, 2);
        // independent re-verification of the all-LoS certificate
        let visible =
            los_vector(nodes.positions(), plan.uav_positions[0], &scene).unwrap();
        assert!(visible.iter().all(|&v| v));
    }

    #[test]
    fn spanning_wall_below_hover_height_fails_the_cluster() {
        let wall = PrismBlock::cuboid(50.0, 50.0, 0.0, 80.0, 0.0, 400.0, 6.0).unwrap();
        let scene = Scene::flat(100.0, 100.0, 20, 20, 10, 10, vec![wall], 40.0).unwrap();
        let nodes = GroundNodeSet::new(
            vec![Point3::new(50.0, 20.0, 0.0), Point3::new(50.0, 80.0, 0.0)],
            &scene,
        )
        .unwrap();
        let uav = Point3::new(50.0, 25.0, 30.0);
        let mut rng = seed::stream(1, "repair");
        let mut grids = 0;
        let err = geo_cluster_and_reposition(
            &nodes,
            &[uav],
            &scene,
            &link(),
            &atm(),
            &mut rng,
            &mut grids,
        )
        .unwrap_err();
        assert_eq!(err, PlanFailure::InfeasibleCluster { cluster: 0 });
    }

    #[test]
    fn capacity_equals_direct_resummation() {
        let scene = open_scene();
        let mut rng = seed::stream(3, "nodes");
        let points: Vec<Point3> = (0..10)
            .map(|_| {
                Point3::new(rng.random_range(1.0..99.0), rng.random_range(1.0..99.0), 0.0)
            })
            .collect();
        let nodes = GroundNodeSet::new(points, &scene).unwrap();
        let uavs =
            [Point3::new(20.0, 30.0, 80.0), Point3::new(70.0, 60.0, 80.0), Point3::new(50.0, 90.0, 80.0)];
        let assignment: Vec<usize> = (0..10).map(|k| k % 3).collect();
        let avg =
            avg_network_capacity(&nodes, &assignment, &uavs, &scene, &link(), &atm()).unwrap();
        let mu = atm().mixing_ratio();
        let direct: f64 = nodes
            .positions()
            .iter()
            .zip(assignment.iter())
            .map(|(p, &a)| link_capacity(&link(), mu, p.distance(uavs[a])).unwrap())
            .sum::<f64>()
            / 10.0;
        assert!((avg - direct).abs() < 1e-12);
    }

    #[test]
    fn kmeans_recovers_separated_clouds() {
        let scene = open_scene();
        let mut points = Vec::new();
        for i in 0..6 {
            points.push(Point3::new(20.0 + i as f64, 20.0, 0.0));
            points.push(Point3::new(80.0 - i as f64, 80.0, 0.0));
        }
        let nodes = GroundNodeSet::new(points, &scene).unwrap();
        let mut rng = seed::stream(4, "kmeans");
        let mut grids = 0;
        let plan = geo_kmeans_plan(
            &nodes, &scene, &link(), &atm(), 2, 90.0, 4, &mut rng, &mut grids,
        )
        .unwrap();
        assert!(plan.all_los);
        assert!(grids > 0);
        // nodes of one cloud share a cluster, and the clouds differ
        for k in (0..12).step_by(2) {
            assert_eq!(plan.assignment[k], plan.assignment[0]);
            assert_eq!(plan.assignment[k + 1], plan.assignment[1]);
        }
        assert_ne!(plan.assignment[0], plan.assignment[1]);
        // open air: the assignment is a k-means fixed point under one more
        // assignment round against the snapped positions
        for (k, p) in nodes.positions().iter().enumerate() {
            let a = plan.assignment[k];
            let other = 1 - a;
            assert!(
                p.distance_xy(plan.uav_positions[a]) <= p.distance_xy(plan.uav_positions[other])
            );
        }
    }

    #[test]
    fn snap_picks_the_row_major_first_closest_cell() {
        let scene = Scene::flat(100.0, 100.0, 10, 10, 5, 5, Vec::new(), 150.0).unwrap();
        let plane = CandidatePlane::from_scene(&scene, 50.0).unwrap();
        let mut region = Grid::filled(5, 5, false);
        region[(1, 3)] = true;
        region[(3, 1)] = true;
        // equidistant from (2, 2): ties resolve to the first row-major cell
        let target = plane.position((2, 2));
        let cell = closest_true_cell(&region, &plane, (target.x, target.y)).unwrap();
        assert_eq!(cell, (1, 3));
        let mut exhaustive: Option<((usize, usize), f64)> = None;
        for r in 0..5 {
            for c in 0..5 {
                if !region[(r, c)] {
                    continue;
                }
                let p = plane.position((r, c));
                let d2 = (p.x - target.x).powi(2) + (p.y - target.y).powi(2);
                if exhaustive.map_or(true, |(_, bd)| d2 < bd) {
                    exhaustive = Some(((r, c), d2));
                }
            }
        }
        assert_eq!(cell, exhaustive.unwrap().0);
        assert_eq!(closest_true_cell(&Grid::filled(5, 5, false), &plane, (0.0, 0.0)), None);
    }

    #[test]
    fn kmeans_capacity_is_monotone_in_restarts() {
        let tower = PrismBlock::cuboid(40.0, 60.0, 0.0, 70.0, 0.4, 18.0, 14.0).unwrap();
        let scene = Scene::flat(100.0, 100.0, 20, 20, 10, 10, vec![tower], 150.0).unwrap();
        let mut rng_nodes = seed::stream(8, "nodes");
        let points: Vec<Point3> = (0..12)
            .map(|_| {
                loop {
                    let p = Point3::new(
                        rng_nodes.random_range(1.0..99.0),
                        rng_nodes.random_range(1.0..99.0),
                        0.0,
                    );
                    if !scene.blocks[0].footprint_contains_strict(p.x, p.y) {
                        return p;
                    }
                }
            })
            .collect();
        let nodes = GroundNodeSet::new(points, &scene).unwrap();
        let mut best = f64::NEG_INFINITY;
        for restarts in [1, 2, 4] {
            let mut rng = seed::stream(2, "kmeans");
            let mut grids = 0;
            let plan = geo_kmeans_plan(
                &nodes, &scene, &link(), &atm(), 3, 90.0, restarts, &mut rng, &mut grids,
            )
            .unwrap();
            assert!(plan.avg_capacity >= best);
            best = plan.avg_capacity;
        }
    }

    #[test]
    fn repair_objective_is_deterministic_and_meters_grids() {
        let tower = PrismBlock::cuboid(50.0, 50.0, 0.0, 80.0, 0.0, 20.0, 20.0).unwrap();
        let scene = Scene::flat(100.0, 100.0, 20, 20, 10, 10, vec![tower], 150.0).unwrap();
        let nodes = GroundNodeSet::new(
            vec![Point3::new(15.0, 15.0, 0.0), Point3::new(85.0, 80.0, 0.0)],
            &scene,
        )
        .unwrap();
        let obj = RepairObjective::new(&nodes, &scene, link(), atm(), 42);
        let candidate = [Point3::new(30.0, 30.0, 90.0), Point3::new(70.0, 70.0, 90.0)];
        let first = obj.evaluate(&candidate);
        let second = obj.evaluate(&candidate);
        assert_eq!(first, second);
        assert!(first.repaired.is_some());
        assert!(obj.grids_computed() > 0);
        let best = obj.best_plan().unwrap();
        assert!(best.all_los);
        assert_eq!(best.avg_capacity, first.score);
    }

    #[test]
    fn an_embedded_uav_serves_its_members_at_zero() {
        let block = PrismBlock::cuboid(50.0, 50.0, 0.0, 40.0, 0.0, 30.0, 30.0).unwrap();
        let scene = Scene::flat(100.0, 100.0, 20, 20, 10, 10, vec![block], 150.0).unwrap();
        let nodes = GroundNodeSet::new(
            vec![Point3::new(10.0, 10.0, 0.0), Point3::new(90.0, 90.0, 0.0)],
            &scene,
        )
        .unwrap();
        // One UAV inside the block at 20 m, one legal UAV in the open.
        let uavs = [Point3::new(50.0, 50.0, 20.0), Point3::new(85.0, 85.0, 30.0)];
        let caps =
            per_node_capacity(&nodes, &[0, 1], &uavs, &scene, &link(), &atm()).unwrap();
        assert_eq!(caps[0], 0.0);
        assert!(caps[1] > 0.0);
        // Assignment routes around the blind UAV instead of erroring.
        let plan = cluster_allowing_nlos(&nodes, &uavs, &scene, &link(), &atm()).unwrap();
        assert!(!plan.all_los || plan.assignment.iter().all(|&u| u == 1));
    }
}
