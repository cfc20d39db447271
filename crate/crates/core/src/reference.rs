//! Brute-force reference implementations used to validate the fast LoS path.
//!
//! Occlusion here is decided by dense point sampling along the segment with a
//! containment test written directly against the cross-section definition,
//! not by the face-plane machinery in [`crate::los`]. The module also measures
//! how far a segment is from any occlusion decision boundary, so comparisons
//! can skip knife-edge cases that sampling cannot classify reliably.

use crate::geometry::{CrossSection, Point3, PrismBlock};
use std::f64::consts::{PI, TAU};

/// True when `p` lies strictly inside the solid prism.
pub fn point_in_prism(block: &PrismBlock, p: Point3) -> bool {
    if p.z <= block.base_z || p.z >= block.roof_z {
        return false;
    }
    let (sin, cos) = block.theta.sin_cos();
    let dx = p.x - block.center_x;
    let dy = p.y - block.center_y;
    let u = dx * cos + dy * sin;
    let v = dy * cos - dx * sin;
    match block.section {
        CrossSection::Rect { half_x, half_y } => u.abs() < half_x && v.abs() < half_y,
        CrossSection::Polygon { sides, circumradius } => {
            let n = f64::from(sides);
            let apothem = circumradius * (PI / n).cos();
            (0..sides).all(|k| {
                let a = TAU * (f64::from(k) + 0.5) / n;
                u * a.cos() + v * a.sin() < apothem
            })
        }
    }
}

/// Axis-aligned bounds that enclose the block.
fn block_aabb(b: &PrismBlock) -> ([f64; 2], [f64; 2], [f64; 2]) {
    let r = b.footprint_radius();
    (
        [b.center_x - r, b.center_x + r],
        [b.center_y - r, b.center_y + r],
        [b.base_z, b.roof_z],
    )
}

fn ranges_overlap(a: [f64; 2], b: [f64; 2]) -> bool {
    a[0] <= b[1] && b[0] <= a[1]
}

/// Occlusion by dense sampling: `samples` interior points of the open segment
/// are tested for prism containment.
pub fn segment_blocked_sampled(
    a: Point3,
    b: Point3,
    blocks: &[PrismBlock],
    samples: u32,
) -> bool {
    let seg_x = [a.x.min(b.x), a.x.max(b.x)];
    let seg_y = [a.y.min(b.y), a.y.max(b.y)];
    let seg_z = [a.z.min(b.z), a.z.max(b.z)];
    blocks.iter().any(|block| {
        let (bx, by, bz) = block_aabb(block);
        if !(ranges_overlap(seg_x, bx) && ranges_overlap(seg_y, by) && ranges_overlap(seg_z, bz))
        {
            return false;
        }
        (0..samples).any(|i| {
            let t = (f64::from(i) + 0.5) / f64::from(samples);
            let p = Point3::new(
                a.x + t * (b.x - a.x),
                a.y + t * (b.y - a.y),
                a.z + t * (b.z - a.z),
            );
            point_in_prism(block, p)
        })
    })
}

/// Minimum over all of the block's occlusion decision boundaries of the
/// signed-slack magnitude of the segment. A small value means a tiny
/// perturbation could change some intermediate strict comparison, so the
/// blocked/clear outcome should not be trusted to match a sampled oracle.
pub fn segment_boundary_margin(a: Point3, b: Point3, block: &PrismBlock) -> f64 {
    let mut margin = f64::INFINITY;
    let len = a.distance(b);
    for f in block.faces() {
        let (ax, ay) = f.to_frame_xy(a.x, a.y);
        let (bx, by) = f.to_frame_xy(b.x, b.y);
        let vx = ax - bx;
        if vx == 0.0 {
            margin = margin.min((ax - f.plane_x).abs());
            continue;
        }
        let u = (ax - f.plane_x) / vx;
        let on_segment_slack = u.min(1.0 - u) * len;
        let y_hit = (f.plane_x - ax) * (ay - by) / vx + ay;
        let z_hit = (f.plane_x - ax) * (a.z - b.z) / vx + a.z;
        let lat_slack = (y_hit - f.lat_min).min(f.lat_max - y_hit);
        let z_slack = (z_hit - f.z_min).min(f.z_max - z_hit);
        // The face blocks iff all three slacks are positive; the smallest
        // |slack| bounds the perturbation needed to flip that face's verdict.
        margin = margin.min(on_segment_slack.min(lat_slack).min(z_slack).abs());
    }
    let da = a.z - block.roof_z;
    let db = b.z - block.roof_z;
    let span_slack = if da * db < 0.0 {
        da.abs().min(db.abs())
    } else {
        -da.abs().min(db.abs())
    };
    if da * db < 0.0 {
        let t = da / (a.z - b.z);
        let hx = a.x + t * (b.x - a.x);
        let hy = a.y + t * (b.y - a.y);
        let fp_slack = block.footprint_margin(hx, hy);
        margin = margin.min(span_slack.min(fp_slack).abs());
    } else {
        margin = margin.min(span_slack.abs());
    }
    margin
}

/// Smallest boundary margin across all blocks.
pub fn scene_boundary_margin(a: Point3, b: Point3, blocks: &[PrismBlock]) -> f64 {
    blocks
        .iter()
        .map(|blk| segment_boundary_margin(a, b, blk))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wall() -> PrismBlock {
        PrismBlock::cuboid(100.0, 0.0, 0.0, 120.0, 0.0, 20.0, 20.0).unwrap()
    }

    #[test]
    fn containment_basics() {
        let b = wall();
        assert!(point_in_prism(&b, Point3::new(100.0, 0.0, 60.0)));
        assert!(!point_in_prism(&b, Point3::new(100.0, 0.0, 120.0)));
        assert!(!point_in_prism(&b, Point3::new(100.0, 10.0, 60.0)));
        assert!(!point_in_prism(&b, Point3::new(85.0, 0.0, 60.0)));
    }

    #[test]
    fn sampling_detects_pass_through() {
        let blocks = [wall()];
        let a = Point3::new(0.0, 0.0, 100.0);
        let b = Point3::new(200.0, 0.0, 0.0);
        assert!(segment_blocked_sampled(a, b, &blocks, 2048));
        // Over the roof: clear.
        let high = Point3::new(0.0, 0.0, 130.0);
        let far = Point3::new(200.0, 0.0, 125.0);
        assert!(!segment_blocked_sampled(high, far, &blocks, 2048));
    }

    #[test]
    fn margin_is_small_near_roof_graze() {
        let b = wall();
        // Crosses the lateral faces exactly at roof level.
        let a = Point3::new(0.0, 0.0, 120.0);
        let p = Point3::new(200.0, 0.0, 120.0);
        assert!(segment_boundary_margin(a, p, &b) < 1e-9);
        // Deep pass-through has a healthy margin.
        let q = Point3::new(200.0, 0.0, 0.0);
        let a2 = Point3::new(0.0, 0.0, 100.0);
        assert!(segment_boundary_margin(a2, q, &b) > 1.0);
    }
}
