//! Line-of-sight coverage, terahertz link budgets, and UAV placement search
//! over 3D block environments.
//!
//! A rectangular ground area with prism-shaped obstacles is observed by one or
//! more hovering UAVs. The crate computes exact geometric LoS coverage maps,
//! models the sub-THz air-to-ground channel (spreading plus molecular
//! absorption), searches for UAV placements that maximize covered area, and
//! plans all-LoS multi-UAV networks that maximize average link capacity.

pub mod channel;
pub mod geometry;
pub mod grid;
pub mod los;
pub mod placement;
pub mod planner;
pub mod reference;
pub mod report;
pub mod scenario;
pub mod seed;
