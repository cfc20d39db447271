//! Exact line-of-sight coverage over block scenes.
//!
//! A segment is occluded by a prism iff it crosses a lateral face plane
//! strictly inside the face rectangle and strictly between its endpoints, or
//! crosses the roof plane strictly inside the footprint. Every comparison is
//! strict, so grazing contact along an edge, roof, or face still counts as
//! line of sight. The grid path ([`coverage_matrix`], [`acceptable_region`])
//! evaluates whole lattice rows against per-frame displacement batches but
//! shares the scalar crossing kernel with [`segment_blocked`], so both paths
//! return bit-identical answers for the same endpoints.

pub mod export;

use crate::geometry::{CrossSection, Face, Point3, PrismBlock, Scene};
use crate::grid::Grid;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LosError {
    #[error("segment endpoints must be finite")]
    NonFinite,
    #[error("segment endpoints coincide")]
    DegenerateSegment,
    #[error("source endpoint is inside block {block}")]
    SourceInsideBlock { block: usize },
    #[error("source altitude {z} is not above ground height {ground}")]
    BelowGround { z: f64, ground: f64 },
    #[error("source altitude {z} exceeds the ceiling {h_max}")]
    AboveCeiling { z: f64, h_max: f64 },
    #[error("coverage grids must share one shape")]
    ShapeMismatch,
    #[error("union of zero coverage grids")]
    EmptyUnion,
}

/// Boolean LoS map over a lattice: `true` means the cell sees the source.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageGrid {
    pub bits: Grid<bool>,
    /// Endpoint the map was computed for; `None` for unions.
    pub source: Option<Point3>,
}

impl CoverageGrid {
    /// Percentage of cells with line of sight.
    pub fn coverage_percent(&self) -> f64 {
        100.0 * self.bits.count_true() as f64 / self.bits.len() as f64
    }

    pub fn nlos_percent(&self) -> f64 {
        100.0 - self.coverage_percent()
    }

    /// Coverage percentage over cells not excluded by the mask.
    pub fn coverage_percent_masked(&self, exclude: &Grid<bool>) -> f64 {
        assert!(self.bits.same_shape(exclude), "mask shape mismatch");
        let mut seen = 0usize;
        let mut total = 0usize;
        for (&bit, &skip) in self.bits.iter().zip(exclude.iter()) {
            if !skip {
                total += 1;
                seen += usize::from(bit);
            }
        }
        if total == 0 {
            return 100.0;
        }
        100.0 * seen as f64 / total as f64
    }
}

/// Cell-wise OR of several coverage maps.
pub fn union_coverage(grids: &[CoverageGrid]) -> Result<CoverageGrid, LosError> {
    let first = grids.first().ok_or(LosError::EmptyUnion)?;
    let mut bits = first.bits.clone();
    for g in &grids[1..] {
        if !g.bits.same_shape(&bits) {
            return Err(LosError::ShapeMismatch);
        }
        for (acc, &b) in bits.as_mut_slice().iter_mut().zip(g.bits.iter()) {
            *acc |= b;
        }
    }
    Ok(CoverageGrid { bits, source: None })
}

/// Source-minus-cell displacement components for a batch of lattice cells in
/// one face frame. `vx_inv` holds reciprocals of the plane-normal component;
/// parallel segments yield an infinite sentinel there, which the strict
/// comparisons in [`face_hit`] reject.
#[derive(Debug, Default)]
pub struct SpatialVectorBatch {
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    pub vz: Vec<f64>,
    pub vx_inv: Vec<f64>,
}

impl SpatialVectorBatch {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            vx: Vec::with_capacity(n),
            vy: Vec::with_capacity(n),
            vz: Vec::with_capacity(n),
            vx_inv: Vec::with_capacity(n),
        }
    }

    /// Fills the batch from a source point and cell coordinates, all already
    /// expressed in the face frame.
    pub fn fill(&mut self, source: (f64, f64, f64), cx: &[f64], cy: &[f64], cz: CellZ<'_>) {
        let n = cx.len();
        debug_assert_eq!(cy.len(), n);
        self.vx.clear();
        self.vy.clear();
        self.vz.clear();
        self.vx_inv.clear();
        self.vx.extend(cx.iter().map(|&x| source.0 - x));
        self.vy.extend(cy.iter().map(|&y| source.1 - y));
        match cz {
            CellZ::Const(z) => self.vz.extend(std::iter::repeat_n(source.2 - z, n)),
            CellZ::Slice(zs) => self.vz.extend(zs.iter().map(|&z| source.2 - z)),
        }
        self.vx_inv.extend(self.vx.iter().map(|&v| 1.0 / v));
    }

    /// Rebuilds this batch as `other` rotated a further quarter turn about z
    /// (x -> y, y -> -x), which is exact in floating point. The z components
    /// are unchanged by the turn, so `other.vz` keeps serving both frames and
    /// this batch's `vz` stays empty.
    fn fill_quarter_turn(&mut self, other: &SpatialVectorBatch) {
        self.vx.clear();
        self.vy.clear();
        self.vx.extend_from_slice(&other.vy);
        self.vy.extend(other.vx.iter().map(|&v| -v));
        self.vx_inv.clear();
        self.vx_inv.extend(other.vy.iter().map(|&v| 1.0 / v));
    }
}

/// Cell altitude source for a lattice: constant plane or per-cell terrain.
#[derive(Clone, Copy)]
pub enum CellZ<'a> {
    Const(f64),
    Slice(&'a [f64]),
}

/// Strict crossing test of one face by the segment from the anchored source
/// (`ax, ay, az` in the face frame) toward a cell, where `(vx_inv, vy, vz)`
/// are the reciprocal normal component and the displacement components of
/// source minus cell. Every flow through NaN or infinity reports no hit.
#[inline]
fn face_hit(
    face: &Face,
    ax: f64,
    ay: f64,
    az: f64,
    vx_inv: f64,
    vy: f64,
    vz: f64,
) -> bool {
    let k = face.plane_x - ax;
    let u = -(k * vx_inv);
    if !(u > 0.0 && u < 1.0) {
        return false;
    }
    let y = k * vy * vx_inv + ay;
    if !(y > face.lat_min && y < face.lat_max) {
        return false;
    }
    let z = k * vz * vx_inv + az;
    z > face.z_min && z < face.z_max
}

/// Strict roof-plane crossing: the segment spans the roof elevation and the
/// crossing point lies strictly inside the footprint.
#[inline]
fn roof_hit(block: &PrismBlock, a: Point3, b: Point3) -> bool {
    let da = a.z - block.roof_z;
    let db = b.z - block.roof_z;
    if !(da * db < 0.0) {
        return false;
    }
    let t = da / (a.z - b.z);
    let x = a.x + t * (b.x - a.x);
    let y = a.y + t * (b.y - a.y);
    block.footprint_contains_strict(x, y)
}

struct FacedBlock {
    block: PrismBlock,
    faces: Vec<Face>,
}

fn faced_blocks(blocks: &[PrismBlock]) -> Vec<FacedBlock> {
    blocks.iter().map(|b| FacedBlock { block: *b, faces: b.faces() }).collect()
}

fn blocked_by(fb: &FacedBlock, a: Point3, b: Point3) -> bool {
    for f in &fb.faces {
        let (ax, ay) = f.to_frame_xy(a.x, a.y);
        let (bx, by) = f.to_frame_xy(b.x, b.y);
        let vx = ax - bx;
        let vx_inv = 1.0 / vx;
        if face_hit(f, ax, ay, a.z, vx_inv, ay - by, a.z - b.z) {
            return true;
        }
    }
    roof_hit(&fb.block, a, b)
}

/// True when the open segment between `a` and `b` passes through the prism.
pub fn segment_blocked(a: Point3, b: Point3, block: &PrismBlock) -> Result<bool, LosError> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(LosError::NonFinite);
    }
    if a == b {
        return Err(LosError::DegenerateSegment);
    }
    Ok(blocked_by(&FacedBlock { block: *block, faces: block.faces() }, a, b))
}

fn validate_source(scene: &Scene, source: Point3) -> Result<(), LosError> {
    if !source.is_finite() {
        return Err(LosError::NonFinite);
    }
    if source.z > scene.h_max {
        return Err(LosError::AboveCeiling { z: source.z, h_max: scene.h_max });
    }
    if scene.contains_xy(source.x, source.y) {
        let ground = scene.ground_at(source.x, source.y);
        if source.z <= ground {
            return Err(LosError::BelowGround { z: source.z, ground });
        }
    }
    if let Some(block) = scene.blocks.iter().position(|b| b.contains_strict(source)) {
        return Err(LosError::SourceInsideBlock { block });
    }
    Ok(())
}

/// Target lattice of an occlusion sweep: `rows * cols` cells with reference
/// points `((r + 1) * step_x, (c + 1) * step_y)` at the given altitudes.
struct Lattice<'a> {
    rows: usize,
    cols: usize,
    step_x: f64,
    step_y: f64,
    z: LatticeZ<'a>,
}

enum LatticeZ<'a> {
    Const(f64),
    Ground(&'a Grid<f64>),
}

struct RowScratch {
    cx: Vec<f64>,
    cy: Vec<f64>,
    batch: SpatialVectorBatch,
    swap: SpatialVectorBatch,
}

impl RowScratch {
    fn new(cols: usize) -> Self {
        Self {
            cx: Vec::with_capacity(cols),
            cy: Vec::with_capacity(cols),
            batch: SpatialVectorBatch::with_capacity(cols),
            swap: SpatialVectorBatch::with_capacity(cols),
        }
    }
}

/// NLoS bits of every lattice cell as seen from `source`, which is the
/// anchored first endpoint of every segment, exactly as in
/// [`segment_blocked`]`(source, cell, block)`.
fn lattice_nlos(blocks: &[FacedBlock], source: Point3, lat: &Lattice) -> Grid<bool> {
    let cols = lat.cols;
    let ys: Vec<f64> = (0..cols).map(|c| (c + 1) as f64 * lat.step_y).collect();
    let mut nlos = Grid::filled(lat.rows, cols, false);
    let rows: Vec<(usize, &mut [bool])> =
        nlos.as_mut_slice().chunks_mut(cols).enumerate().collect();
    rows.into_par_iter().for_each_init(
        || RowScratch::new(cols),
        |scratch, (r, row)| {
            let zs = match lat.z {
                LatticeZ::Const(h) => CellZ::Const(h),
                LatticeZ::Ground(g) => CellZ::Slice(g.row(r)),
            };
            fill_row_nlos(blocks, source, lat, r, &ys, zs, row, scratch);
        },
    );
    nlos
}

fn fill_row_nlos(
    blocks: &[FacedBlock],
    source: Point3,
    lat: &Lattice,
    r: usize,
    ys: &[f64],
    zs: CellZ<'_>,
    row: &mut [bool],
    scratch: &mut RowScratch,
) {
    let cols = row.len();
    let xw = (r + 1) as f64 * lat.step_x;
    let (z_lo, z_hi) = match zs {
        CellZ::Const(h) => (h, h),
        CellZ::Slice(s) => s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &z| {
            (lo.min(z), hi.max(z))
        }),
    };
    // Inflated so skipping can never disagree with the strict kernels, whose
    // hit coordinates may wobble a few ulps around exact geometry.
    const SLACK: f64 = 1e-6;
    let sweep_x = [xw.min(source.x) - SLACK, xw.max(source.x) + SLACK];
    let sweep_y = [ys[0].min(source.y) - SLACK, ys[cols - 1].max(source.y) + SLACK];
    let sweep_z = [z_lo.min(source.z) - SLACK, z_hi.max(source.z) + SLACK];
    let mut remaining = cols;

    for fb in blocks {
        if remaining == 0 {
            return;
        }
        let radius = fb.block.footprint_radius();
        if fb.block.center_x + radius < sweep_x[0]
            || fb.block.center_x - radius > sweep_x[1]
            || fb.block.center_y + radius < sweep_y[0]
            || fb.block.center_y - radius > sweep_y[1]
            || fb.block.roof_z <= sweep_z[0]
            || fb.block.base_z >= sweep_z[1]
        {
            continue;
        }
        match fb.block.section {
            CrossSection::Rect { .. } => {
                let f0 = &fb.faces[0];
                frame_coords(&mut scratch.cx, &mut scratch.cy, xw, ys, f0.cos, f0.sin);
                let (sx, sy) = f0.to_frame_xy(source.x, source.y);
                scratch.batch.fill((sx, sy, source.z), &scratch.cx, &scratch.cy, zs);
                let b = &scratch.batch;
                apply_face(f0, sx, sy, source.z, &b.vx_inv, &b.vy, &b.vz, row, &mut remaining);
                apply_face(
                    &fb.faces[2],
                    sx,
                    sy,
                    source.z,
                    &b.vx_inv,
                    &b.vy,
                    &b.vz,
                    row,
                    &mut remaining,
                );
                // The two y-faces live in the frame a quarter turn further;
                // coordinates there are (y', -x') of the first frame, exactly.
                let (qx, qy) = (sy, -sx);
                scratch.swap.fill_quarter_turn(&scratch.batch);
                for face in [&fb.faces[1], &fb.faces[3]] {
                    apply_face(
                        face,
                        qx,
                        qy,
                        source.z,
                        &scratch.swap.vx_inv,
                        &scratch.swap.vy,
                        &scratch.batch.vz,
                        row,
                        &mut remaining,
                    );
                }
            }
            CrossSection::Polygon { .. } => {
                for f in &fb.faces {
                    frame_coords(&mut scratch.cx, &mut scratch.cy, xw, ys, f.cos, f.sin);
                    let (sx, sy) = f.to_frame_xy(source.x, source.y);
                    scratch.batch.fill((sx, sy, source.z), &scratch.cx, &scratch.cy, zs);
                    let b = &scratch.batch;
                    apply_face(f, sx, sy, source.z, &b.vx_inv, &b.vy, &b.vz, row, &mut remaining);
                }
            }
        }
        if remaining == 0 {
            return;
        }
        for (c, cell) in row.iter_mut().enumerate() {
            if *cell {
                continue;
            }
            let z = match zs {
                CellZ::Const(h) => h,
                CellZ::Slice(s) => s[c],
            };
            if roof_hit(&fb.block, source, Point3::new(xw, ys[c], z)) {
                *cell = true;
                remaining -= 1;
            }
        }
    }
}

/// Cell reference points of one lattice row, rotated into a face frame.
fn frame_coords(cx: &mut Vec<f64>, cy: &mut Vec<f64>, xw: f64, ys: &[f64], cos: f64, sin: f64) {
    cx.clear();
    cy.clear();
    cx.extend(ys.iter().map(|&y| xw * cos + y * sin));
    cy.extend(ys.iter().map(|&y| y * cos - xw * sin));
}

#[allow(clippy::too_many_arguments)]
fn apply_face(
    face: &Face,
    ax: f64,
    ay: f64,
    az: f64,
    vx_inv: &[f64],
    vy: &[f64],
    vz: &[f64],
    row: &mut [bool],
    remaining: &mut usize,
) {
    for (c, cell) in row.iter_mut().enumerate() {
        if *cell {
            continue;
        }
        if face_hit(face, ax, ay, az, vx_inv[c], vy[c], vz[c]) {
            *cell = true;
            *remaining -= 1;
        }
    }
}

/// LoS map of every ground cell as seen from the UAV.
pub fn coverage_matrix(scene: &Scene, uav: Point3) -> Result<CoverageGrid, LosError> {
    validate_source(scene, uav)?;
    let faced = faced_blocks(&scene.blocks);
    let lat = Lattice {
        rows: scene.nx,
        cols: scene.ny,
        step_x: scene.cell_dx(),
        step_y: scene.cell_dy(),
        z: LatticeZ::Ground(&scene.ground),
    };
    let nlos = lattice_nlos(&faced, uav, &lat);
    let bits = Grid::from_vec(
        scene.nx,
        scene.ny,
        nlos.iter().map(|&b| !b).collect(),
    )
    .expect("shape preserved");
    Ok(CoverageGrid { bits, source: Some(uav) })
}

/// Per-point LoS flags for arbitrary targets as seen from the UAV.
pub fn los_vector(points: &[Point3], uav: Point3, scene: &Scene) -> Result<Vec<bool>, LosError> {
    validate_source(scene, uav)?;
    let faced = faced_blocks(&scene.blocks);
    points
        .iter()
        .map(|&p| {
            if !p.is_finite() {
                return Err(LosError::NonFinite);
            }
            if p == uav {
                return Err(LosError::DegenerateSegment);
            }
            Ok(!faced.iter().any(|fb| blocked_by(fb, uav, p)))
        })
        .collect()
}

/// Candidate-plane cells at altitude `h_u` that have LoS to every point of the
/// cluster. Cells whose hover position sits inside an obstacle are never
/// acceptable, because the obstacle's own faces occlude them.
pub fn acceptable_region(cluster: &[Point3], scene: &Scene, h_u: f64) -> Grid<bool> {
    assert!(!cluster.is_empty(), "acceptable region of an empty cluster");
    debug_assert!(h_u <= scene.h_max);
    let faced = faced_blocks(&scene.blocks);
    let lat = Lattice {
        rows: scene.nux,
        cols: scene.nuy,
        step_x: scene.plane_dx(),
        step_y: scene.plane_dy(),
        z: LatticeZ::Const(h_u),
    };
    let mut region = Grid::filled(scene.nux, scene.nuy, true);
    for &node in cluster {
        let nlos = lattice_nlos(&faced, node, &lat);
        for (acc, &blocked) in region.as_mut_slice().iter_mut().zip(nlos.iter()) {
            *acc &= !blocked;
        }
    }
    region
}
