//! World/block coordinate frames, prism obstacles, and the scene layout.
//!
//! The ground area is a `dx` by `dy` rectangle partitioned into `nx * ny`
//! cells; cell `(r, c)` (zero-based storage) has its reference point at
//! `((r + 1) * dx / nx, (c + 1) * dy / ny)`, so the last cell sits on the far
//! boundary. Obstacles are vertical prisms with an axis-aligned rectangular or
//! regular polygonal footprint, rotated about z by a per-block angle.

use crate::grid::Grid;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("block parameters must all be finite")]
    NonFinite,
    #[error("block roof elevation {roof_z} must exceed base elevation {base_z}")]
    RoofBelowBase { base_z: f64, roof_z: f64 },
    #[error("block footprint extents must be positive")]
    BadExtents,
    #[error("regular prism needs at least 3 sides, got {0}")]
    TooFewSides(u32),
    #[error("scene area and grid shape must be positive")]
    BadDimensions,
    #[error("ground grid is {got_rows}x{got_cols}, scene expects {want_rows}x{want_cols}")]
    GroundShape { got_rows: usize, got_cols: usize, want_rows: usize, want_cols: usize },
    #[error("ground height at the reference cell must be 0, got {0}")]
    NonzeroReference(f64),
    #[error("ceiling altitude must be positive and finite")]
    BadCeiling,
}

/// A point (or displacement) in world coordinates, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance(&self, other: Point3) -> f64 {
        (*self - other).norm()
    }

    pub fn distance_xy(&self, other: Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

impl std::ops::Sub for Point3 {
    type Output = Point3;

    fn sub(self, rhs: Point3) -> Point3 {
        Point3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl std::ops::Add for Point3 {
    type Output = Point3;

    fn add(self, rhs: Point3) -> Point3 {
        Point3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

/// Planar rotation by precomputed cosine/sine. Shared by every frame change so
/// equal inputs give bit-equal outputs on all code paths.
#[inline]
pub(crate) fn rotate_xy(x: f64, y: f64, cos: f64, sin: f64) -> (f64, f64) {
    (x * cos + y * sin, y * cos - x * sin)
}

/// World point expressed in the frame of a block rotated by `theta` about z.
pub fn to_block_frame(p: Point3, theta: f64) -> Point3 {
    let (sin, cos) = theta.sin_cos();
    let (x, y) = rotate_xy(p.x, p.y, cos, sin);
    Point3::new(x, y, p.z)
}

/// Inverse of [`to_block_frame`]: block-frame point back in world coordinates.
pub fn from_block_frame(p: Point3, theta: f64) -> Point3 {
    let (sin, cos) = theta.sin_cos();
    Point3::new(p.x * cos - p.y * sin, p.y * cos + p.x * sin, p.z)
}

/// Applies the standard rotations about z, then y, then x, in that order.
pub fn rotate_zyx(p: Point3, theta_z: f64, theta_y: f64, theta_x: f64) -> Point3 {
    let (sz, cz) = theta_z.sin_cos();
    let (sy, cy) = theta_y.sin_cos();
    let (sx, cx) = theta_x.sin_cos();
    let (x1, y1, z1) = (cz * p.x - sz * p.y, sz * p.x + cz * p.y, p.z);
    let (x2, y2, z2) = (cy * x1 + sy * z1, y1, cy * z1 - sy * x1);
    Point3::new(x2, cx * y2 - sx * z2, sx * y2 + cx * z2)
}

/// Footprint shape of a prism in its own (rotated) frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CrossSection {
    /// Rectangle with the given half side lengths along the frame axes.
    Rect { half_x: f64, half_y: f64 },
    /// Regular polygon with `sides` vertices on a circle of `circumradius`.
    Polygon { sides: u32, circumradius: f64 },
}

/// One vertical lateral face of a prism: the plane `x' = plane_x` in the frame
/// rotated by `frame` about z, bounded laterally by `y'` in
/// `(lat_min, lat_max)` and vertically by `z` in `(z_min, z_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub frame: f64,
    pub cos: f64,
    pub sin: f64,
    pub plane_x: f64,
    pub lat_min: f64,
    pub lat_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Face {
    #[inline]
    pub fn to_frame_xy(&self, x: f64, y: f64) -> (f64, f64) {
        rotate_xy(x, y, self.cos, self.sin)
    }

    pub fn from_frame_xy(&self, x: f64, y: f64) -> (f64, f64) {
        (x * self.cos - y * self.sin, y * self.cos + x * self.sin)
    }
}

/// Vertical prism obstacle. `roof_z` is the absolute roof elevation, not a
/// height above the base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrismBlock {
    pub center_x: f64,
    pub center_y: f64,
    pub base_z: f64,
    pub roof_z: f64,
    pub theta: f64,
    pub section: CrossSection,
    #[serde(skip_serializing)]
    cos_theta: f64,
    #[serde(skip_serializing)]
    sin_theta: f64,
}

// The rotation cache never travels; deserialization rebuilds it so a loaded
// block is indistinguishable from a constructed one.
impl<'de> Deserialize<'de> for PrismBlock {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        struct Raw {
            center_x: f64,
            center_y: f64,
            base_z: f64,
            roof_z: f64,
            theta: f64,
            section: CrossSection,
        }
        let raw = Raw::deserialize(deserializer)?;
        let mut block = PrismBlock {
            center_x: raw.center_x,
            center_y: raw.center_y,
            base_z: raw.base_z,
            roof_z: raw.roof_z,
            theta: raw.theta,
            section: raw.section,
            cos_theta: f64::NAN,
            sin_theta: f64::NAN,
        };
        block.rehydrate();
        Ok(block)
    }
}

impl PrismBlock {
    /// Rectangular prism from full side lengths `side_x`, `side_y`.
    pub fn cuboid(
        center_x: f64,
        center_y: f64,
        base_z: f64,
        roof_z: f64,
        theta: f64,
        side_x: f64,
        side_y: f64,
    ) -> Result<Self, GeometryError> {
        let section = CrossSection::Rect { half_x: side_x / 2.0, half_y: side_y / 2.0 };
        Self::new(center_x, center_y, base_z, roof_z, theta, section)
    }

    /// Regular polygonal prism from circumradius.
    pub fn polygon(
        center_x: f64,
        center_y: f64,
        base_z: f64,
        roof_z: f64,
        theta: f64,
        sides: u32,
        circumradius: f64,
    ) -> Result<Self, GeometryError> {
        let section = CrossSection::Polygon { sides, circumradius };
        Self::new(center_x, center_y, base_z, roof_z, theta, section)
    }

    pub fn new(
        center_x: f64,
        center_y: f64,
        base_z: f64,
        roof_z: f64,
        theta: f64,
        section: CrossSection,
    ) -> Result<Self, GeometryError> {
        if ![center_x, center_y, base_z, roof_z, theta].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if roof_z <= base_z {
            return Err(GeometryError::RoofBelowBase { base_z, roof_z });
        }
        match section {
            CrossSection::Rect { half_x, half_y } => {
                if !(half_x > 0.0 && half_y > 0.0 && half_x.is_finite() && half_y.is_finite()) {
                    return Err(GeometryError::BadExtents);
                }
            }
            CrossSection::Polygon { sides, circumradius } => {
                if sides < 3 {
                    return Err(GeometryError::TooFewSides(sides));
                }
                if !(circumradius > 0.0 && circumradius.is_finite()) {
                    return Err(GeometryError::BadExtents);
                }
            }
        }
        let (sin_theta, cos_theta) = theta.sin_cos();
        Ok(Self { center_x, center_y, base_z, roof_z, theta, section, cos_theta, sin_theta })
    }

    /// Restores the cached frame trig after deserialization.
    pub(crate) fn rehydrate(&mut self) {
        let (s, c) = self.theta.sin_cos();
        self.sin_theta = s;
        self.cos_theta = c;
    }

    pub fn frame_cos_sin(&self) -> (f64, f64) {
        (self.cos_theta, self.sin_theta)
    }

    /// Distance from the footprint center to the farthest footprint point.
    pub fn footprint_radius(&self) -> f64 {
        match self.section {
            CrossSection::Rect { half_x, half_y } => (half_x * half_x + half_y * half_y).sqrt(),
            CrossSection::Polygon { circumradius, .. } => circumradius,
        }
    }

    /// Lateral faces in footprint-boundary order. For rectangles these are the
    /// planes `x' = cx' - hx`, `y' = cy' + hy`, `x' = cx' + hx`, `y' = cy' - hy`
    /// in the block frame; the two `y'` faces are expressed in the frame
    /// rotated a further 90 degrees so every face is an `x = const` plane in
    /// its own frame.
    pub fn faces(&self) -> Vec<Face> {
        let (c, s) = (self.cos_theta, self.sin_theta);
        let (z_min, z_max) = (self.base_z, self.roof_z);
        match self.section {
            CrossSection::Rect { half_x: hx, half_y: hy } => {
                let (cx, cy) = rotate_xy(self.center_x, self.center_y, c, s);
                let x_frame = self.theta;
                let y_frame = self.theta + std::f64::consts::FRAC_PI_2;
                vec![
                    Face {
                        frame: x_frame,
                        cos: c,
                        sin: s,
                        plane_x: cx - hx,
                        lat_min: cy - hy,
                        lat_max: cy + hy,
                        z_min,
                        z_max,
                    },
                    Face {
                        frame: y_frame,
                        cos: -s,
                        sin: c,
                        plane_x: cy + hy,
                        lat_min: -cx - hx,
                        lat_max: -cx + hx,
                        z_min,
                        z_max,
                    },
                    Face {
                        frame: x_frame,
                        cos: c,
                        sin: s,
                        plane_x: cx + hx,
                        lat_min: cy - hy,
                        lat_max: cy + hy,
                        z_min,
                        z_max,
                    },
                    Face {
                        frame: y_frame,
                        cos: -s,
                        sin: c,
                        plane_x: cy - hy,
                        lat_min: -cx - hx,
                        lat_max: -cx + hx,
                        z_min,
                        z_max,
                    },
                ]
            }
            CrossSection::Polygon { sides, circumradius } => {
                let n = f64::from(sides);
                let apothem = circumradius * (std::f64::consts::PI / n).cos();
                let half_side = circumradius * (std::f64::consts::PI / n).sin();
                (0..sides)
                    .map(|k| {
                        let frame = self.theta
                            + std::f64::consts::TAU * (f64::from(k) + 0.5) / n;
                        let (sin, cos) = frame.sin_cos();
                        let (cx, cy) = rotate_xy(self.center_x, self.center_y, cos, sin);
                        Face {
                            frame,
                            cos,
                            sin,
                            plane_x: cx + apothem,
                            lat_min: cy - half_side,
                            lat_max: cy + half_side,
                            z_min,
                            z_max,
                        }
                    })
                    .collect()
            }
        }
    }

    /// True when `(x, y)` lies strictly inside the footprint.
    pub fn footprint_contains_strict(&self, x: f64, y: f64) -> bool {
        self.footprint_margin(x, y) > 0.0
    }

    /// Signed clearance of `(x, y)` relative to the footprint boundary:
    /// positive inside, negative outside. Exact for rectangles; for polygons a
    /// lower bound on the true distance outside the footprint.
    pub fn footprint_margin(&self, x: f64, y: f64) -> f64 {
        let (px, py) = rotate_xy(x, y, self.cos_theta, self.sin_theta);
        let (cx, cy) = rotate_xy(self.center_x, self.center_y, self.cos_theta, self.sin_theta);
        match self.section {
            CrossSection::Rect { half_x, half_y } => {
                let qx = (px - cx).abs() - half_x;
                let qy = (py - cy).abs() - half_y;
                if qx <= 0.0 && qy <= 0.0 {
                    -qx.max(qy)
                } else {
                    -(qx.max(0.0).hypot(qy.max(0.0)))
                }
            }
            CrossSection::Polygon { sides, circumradius } => {
                let n = f64::from(sides);
                let apothem = circumradius * (std::f64::consts::PI / n).cos();
                let (dx, dy) = (px - cx, py - cy);
                let mut worst = f64::INFINITY;
                for k in 0..sides {
                    let normal = std::f64::consts::TAU * (f64::from(k) + 0.5) / n;
                    let proj = dx * normal.cos() + dy * normal.sin();
                    worst = worst.min(apothem - proj);
                }
                worst
            }
        }
    }

    /// True when the point lies strictly inside the solid prism.
    pub fn contains_strict(&self, p: Point3) -> bool {
        p.z > self.base_z && p.z < self.roof_z && self.footprint_contains_strict(p.x, p.y)
    }
}

/// Ground area, grid resolution, UAV candidate plane resolution, terrain
/// heights, obstacles, and the UAV ceiling.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
    pub nux: usize,
    pub nuy: usize,
    pub ground: Grid<f64>,
    pub blocks: Vec<PrismBlock>,
    pub h_max: f64,
}

impl Scene {
    pub fn new(
        dx: f64,
        dy: f64,
        nx: usize,
        ny: usize,
        nux: usize,
        nuy: usize,
        ground: Grid<f64>,
        blocks: Vec<PrismBlock>,
        h_max: f64,
    ) -> Result<Self, GeometryError> {
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite())
            || nx == 0
            || ny == 0
            || nux == 0
            || nuy == 0
        {
            return Err(GeometryError::BadDimensions);
        }
        if ground.rows() != nx || ground.cols() != ny {
            return Err(GeometryError::GroundShape {
                got_rows: ground.rows(),
                got_cols: ground.cols(),
                want_rows: nx,
                want_cols: ny,
            });
        }
        if ground[(0, 0)] != 0.0 {
            return Err(GeometryError::NonzeroReference(ground[(0, 0)]));
        }
        if !(h_max > 0.0 && h_max.is_finite()) {
            return Err(GeometryError::BadCeiling);
        }
        Ok(Self { dx, dy, nx, ny, nux, nuy, ground, blocks, h_max })
    }

    /// Flat scene with zero ground everywhere.
    pub fn flat(
        dx: f64,
        dy: f64,
        nx: usize,
        ny: usize,
        nux: usize,
        nuy: usize,
        blocks: Vec<PrismBlock>,
        h_max: f64,
    ) -> Result<Self, GeometryError> {
        Self::new(dx, dy, nx, ny, nux, nuy, Grid::filled(nx, ny, 0.0), blocks, h_max)
    }

    pub fn cell_dx(&self) -> f64 {
        self.dx / self.nx as f64
    }

    pub fn cell_dy(&self) -> f64 {
        self.dy / self.ny as f64
    }

    pub fn plane_dx(&self) -> f64 {
        self.dx / self.nux as f64
    }

    pub fn plane_dy(&self) -> f64 {
        self.dy / self.nuy as f64
    }

    /// Reference point of ground cell `(r, c)`, zero-based storage indices.
    pub fn cell_position(&self, r: usize, c: usize) -> Point3 {
        Point3::new(
            (r + 1) as f64 * self.cell_dx(),
            (c + 1) as f64 * self.cell_dy(),
            self.ground[(r, c)],
        )
    }

    /// Reference point of candidate-plane cell `(r, c)` at altitude `h`.
    pub fn plane_position(&self, r: usize, c: usize, h: f64) -> Point3 {
        Point3::new((r + 1) as f64 * self.plane_dx(), (c + 1) as f64 * self.plane_dy(), h)
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        (0.0..=self.dx).contains(&x) && (0.0..=self.dy).contains(&y)
    }

    /// Ground height at an arbitrary position, from the nearest cell.
    pub fn ground_at(&self, x: f64, y: f64) -> f64 {
        let r = ((x / self.cell_dx() - 1.0).round().max(0.0) as usize).min(self.nx - 1);
        let c = ((y / self.cell_dy() - 1.0).round().max(0.0) as usize).min(self.ny - 1);
        self.ground[(r, c)]
    }

    /// Cells whose reference point lies strictly inside some block footprint.
    pub fn footprint_mask(&self) -> Grid<bool> {
        let mut mask = Grid::filled(self.nx, self.ny, false);
        for r in 0..self.nx {
            for c in 0..self.ny {
                let p = self.cell_position(r, c);
                if self.blocks.iter().any(|b| b.footprint_contains_strict(p.x, p.y)) {
                    mask[(r, c)] = true;
                }
            }
        }
        mask
    }

    /// Raises ground cells under a footprint to that block's roof elevation,
    /// modelling receivers on rooftops. The reference cell stays at zero.
    pub fn raise_ground_to_roofs(&mut self) {
        for r in 0..self.nx {
            for c in 0..self.ny {
                if r == 0 && c == 0 {
                    continue;
                }
                let p = self.cell_position(r, c);
                let roof = self
                    .blocks
                    .iter()
                    .filter(|b| b.footprint_contains_strict(p.x, p.y))
                    .map(|b| b.roof_z)
                    .fold(f64::NEG_INFINITY, f64::max);
                if roof.is_finite() {
                    self.ground[(r, c)] = self.ground[(r, c)].max(roof);
                }
            }
        }
    }
}
