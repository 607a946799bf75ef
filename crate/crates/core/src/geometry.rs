//! Discretized serving area, BS/STAR-RIS placement and the blocking
//! indicators that decide which received-signal case applies.
//!
//! Coordinates are meters. The origin sits at one corner of the serving
//! square, the two BSs sit on the `x = Rs` edge at `y = 0` and `y = Rs`,
//! and every surface lies in a plane of constant `x` (panels run along the
//! y-axis).

use serde::{Deserialize, Serialize};

use crate::error::{CcoError, Result};

pub type Point3 = [f64; 3];

/// One STAR-RIS panel. Thickness is ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RisPlacement {
    pub x: f64,
    pub y: f64,
    /// Panel height `h_ns`; the panel spans `z in [0, height]`.
    pub height: f64,
    /// Panel width `w_ns`; the panel spans `y in [y - width/2, y + width/2]`.
    pub width: f64,
}

impl RisPlacement {
    /// Reference point used for channel geometry: panel center at its top edge.
    pub fn anchor(&self) -> Point3 {
        [self.x, self.y, self.height]
    }
}

/// Height/width blocking indicators of one surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkIndicators {
    pub height: bool,
    pub width: bool,
    pub any: bool,
}

impl LinkIndicators {
    pub fn new(height: bool, width: bool) -> Self {
        Self {
            height,
            width,
            any: link_indicator(height, width),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    pub side_length: f64,
    pub grid_side: f64,
    pub bs_height: f64,
    pub n_per_side: usize,
    pub sample_points: Vec<Point3>,
    pub bs_positions: [Point3; 2],
    pub ris_placements: Vec<RisPlacement>,
}

impl GridMap {
    pub fn n_points(&self) -> usize {
        self.sample_points.len()
    }

    pub fn n_ris(&self) -> usize {
        self.ris_placements.len()
    }

    /// Indicators shared by every surface (all panels have the same size in
    /// the scenarios we build, but each is evaluated on its own).
    pub fn indicators(&self, ris: usize) -> Result<LinkIndicators> {
        let p = &self.ris_placements[ris];
        let h = height_indicator(p.height, self.grid_side, self.bs_height, self.side_length)?;
        let w = width_indicator(p.width, self.grid_side, self.side_length)?;
        Ok(LinkIndicators::new(h, w))
    }

    /// True when the straight segment from BS `bs` to sample point `point`
    /// passes through the panel of any surface.
    pub fn direct_path_blocked(&self, bs: usize, point: usize) -> bool {
        let src = self.bs_positions[bs];
        let dst = self.sample_points[point];
        self.ris_placements
            .iter()
            .any(|p| segment_hits_panel(src, dst, p))
    }
}

/// Builds the grid. Points are grid centers enumerated row-major:
/// point `row * n + col` sits at `((row + 0.5) Rg, (col + 0.5) Rg, 0)`.
pub fn build_grid(
    side_length: f64,
    grid_side: f64,
    bs_height: f64,
    placements: Vec<RisPlacement>,
) -> Result<GridMap> {
    if !(side_length > 0.0) {
        return Err(CcoError::Geometry(format!("Rs must be > 0, got {side_length}")));
    }
    if !(grid_side > 0.0) || grid_side > side_length {
        return Err(CcoError::Geometry(format!(
            "Rg must satisfy 0 < Rg <= Rs, got Rg={grid_side}, Rs={side_length}"
        )));
    }
    if !(bs_height > 0.0) {
        return Err(CcoError::Geometry(format!("h_b must be > 0, got {bs_height}")));
    }
    for (i, p) in placements.iter().enumerate() {
        if !(p.height > 0.0 && p.width > 0.0) {
            return Err(CcoError::Geometry(format!(
                "surface {i}: height and width must be > 0"
            )));
        }
        if !(p.x > 0.0 && p.x < side_length && p.y > 0.0 && p.y < side_length) {
            return Err(CcoError::Geometry(format!(
                "surface {i} at ({}, {}) lies outside the open serving square",
                p.x, p.y
            )));
        }
        for (j, q) in placements.iter().enumerate().take(i) {
            if p.x == q.x && p.y == q.y {
                return Err(CcoError::Geometry(format!(
                    "surfaces {j} and {i} share coordinates ({}, {})",
                    p.x, p.y
                )));
            }
        }
    }

    let n = (side_length / grid_side).ceil() as usize;
    let mut sample_points = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            sample_points.push([
                (row as f64 + 0.5) * grid_side,
                (col as f64 + 0.5) * grid_side,
                0.0,
            ]);
        }
    }
    Ok(GridMap {
        side_length,
        grid_side,
        bs_height,
        n_per_side: n,
        sample_points,
        bs_positions: [
            [side_length, 0.0, bs_height],
            [side_length, side_length, bs_height],
        ],
        ris_placements: placements,
    })
}

fn threshold_denominator(grid_side: f64, side_length: f64) -> Result<f64> {
    if !(grid_side > 0.0 && side_length > 0.0) {
        return Err(CcoError::Geometry("Rg and Rs must be > 0".into()));
    }
    let den = 2.0 * side_length - grid_side;
    if !(den > 0.0) {
        return Err(CcoError::Geometry(format!(
            "degenerate threshold: 2Rs - Rg = {den}"
        )));
    }
    Ok(den)
}

/// Largest panel height that still lets every BS reach every grid over the top.
pub fn height_threshold(grid_side: f64, bs_height: f64, side_length: f64) -> Result<f64> {
    Ok(grid_side * bs_height / threshold_denominator(grid_side, side_length)?)
}

/// Largest panel width that still lets every BS reach every grid around the side.
pub fn width_threshold(grid_side: f64, side_length: f64) -> Result<f64> {
    Ok(grid_side * side_length / threshold_denominator(grid_side, side_length)?)
}

pub fn height_indicator(
    height: f64,
    grid_side: f64,
    bs_height: f64,
    side_length: f64,
) -> Result<bool> {
    if !(height > 0.0 && bs_height > 0.0) {
        return Err(CcoError::Geometry("heights must be > 0".into()));
    }
    Ok(height <= height_threshold(grid_side, bs_height, side_length)?)
}

pub fn width_indicator(width: f64, grid_side: f64, side_length: f64) -> Result<bool> {
    if !(width > 0.0) {
        return Err(CcoError::Geometry("width must be > 0".into()));
    }
    Ok(width <= width_threshold(grid_side, side_length)?)
}

pub fn link_indicator(height: bool, width: bool) -> bool {
    height || width
}

/// Position of element `k` (1-based) on a surface with `per_row` elements
/// per row: `[0, mod(k-1, K_H) M_H, floor((k-1)/K_H) M_V]`.
pub fn element_position(
    k: usize,
    per_row: usize,
    per_col: usize,
    elem_width: f64,
    elem_height: f64,
) -> Result<Point3> {
    if per_row == 0 || k == 0 || k > per_row * per_col {
        return Err(CcoError::Geometry(format!(
            "element index {k} outside 1..={}",
            per_row * per_col
        )));
    }
    let x = (k - 1) % per_row;
    let y = (k - 1) / per_row;
    Ok([0.0, x as f64 * elem_width, y as f64 * elem_height])
}

pub fn distance(a: Point3, b: Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn segment_hits_panel(src: Point3, dst: Point3, p: &RisPlacement) -> bool {
    let dx = dst[0] - src[0];
    if dx == 0.0 {
        return false;
    }
    let t = (p.x - src[0]) / dx;
    if !(t > 0.0 && t < 1.0) {
        return false;
    }
    let y = src[1] + t * (dst[1] - src[1]);
    let z = src[2] + t * (dst[2] - src[2]);
    (y - p.y).abs() <= p.width / 2.0 && z <= p.height
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ris(x: f64, y: f64) -> RisPlacement {
        RisPlacement { x, y, height: 1.0, width: 0.5 }
    }

    #[test]
    fn grid_counts() {
        assert_eq!(build_grid(4.0, 1.0, 7.0, vec![]).unwrap().n_points(), 16);
        assert_eq!(build_grid(3.0, 1.0, 7.0, vec![]).unwrap().n_points(), 9);
        assert_eq!(build_grid(5.0, 2.0, 7.0, vec![]).unwrap().n_points(), 9);
    }

    #[test]
    fn grid_layout_is_row_major_centers() {
        let g = build_grid(3.0, 1.0, 7.0, vec![ris(1.2, 1.7)]).unwrap();
        assert_eq!(g.sample_points[0], [0.5, 0.5, 0.0]);
        assert_eq!(g.sample_points[1], [0.5, 1.5, 0.0]);
        assert_eq!(g.sample_points[3], [1.5, 0.5, 0.0]);
        assert_eq!(g.bs_positions, [[3.0, 0.0, 7.0], [3.0, 3.0, 7.0]]);
    }

    #[test]
    fn padded_grid_keeps_full_cells() {
        let g = build_grid(5.0, 2.0, 7.0, vec![]).unwrap();
        assert_eq!(g.sample_points.last().unwrap(), &[5.0, 5.0, 0.0]);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(build_grid(0.0, 1.0, 7.0, vec![]).is_err());
        assert!(build_grid(3.0, 0.0, 7.0, vec![]).is_err());
        assert!(build_grid(3.0, -1.0, 7.0, vec![]).is_err());
        assert!(build_grid(3.0, 1.0, 7.0, vec![ris(1.0, 1.0), ris(1.0, 1.0)]).is_err());
        assert!(build_grid(3.0, 1.0, 7.0, vec![ris(3.0, 1.0)]).is_err());
    }

    #[test]
    fn height_indicator_examples() {
        assert!(height_indicator(1.0, 1.0, 7.0, 4.0).unwrap());
        assert!(!height_indicator(1.5, 1.0, 7.0, 4.0).unwrap());
        assert!(height_indicator(1e-9, 1.0, 7.0, 4.0).unwrap());
        assert!((height_threshold(1.0, 7.0, 4.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn width_indicator_examples() {
        assert!(width_indicator(0.5, 1.0, 4.0).unwrap());
        assert!(!width_indicator(1.0, 1.0, 4.0).unwrap());
        assert!(width_indicator(1e-9, 1.0, 4.0).unwrap());
        assert!((width_threshold(1.0, 4.0).unwrap() - 4.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_threshold_rejected() {
        assert!(height_indicator(1.0, 2.0, 7.0, 1.0).is_err());
        assert!(width_indicator(1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn or_truth_table() {
        for h in [false, true] {
            for w in [false, true] {
                assert_eq!(link_indicator(h, w), h || w);
                assert_eq!(LinkIndicators::new(h, w).any, h || w);
            }
        }
    }

    #[test]
    fn element_positions() {
        assert_eq!(element_position(1, 4, 4, 0.025, 0.025).unwrap(), [0.0, 0.0, 0.0]);
        assert_eq!(element_position(2, 4, 4, 0.025, 0.025).unwrap(), [0.0, 0.025, 0.0]);
        assert_eq!(element_position(5, 4, 4, 0.025, 0.025).unwrap(), [0.0, 0.0, 0.025]);
        assert!(element_position(0, 4, 4, 0.025, 0.025).is_err());
        assert!(element_position(17, 4, 4, 0.025, 0.025).is_err());
    }

    #[test]
    fn tall_panel_blocks_segment_behind_it() {
        let tall = RisPlacement { x: 1.5, y: 0.5, height: 6.0, width: 0.5 };
        let g = build_grid(3.0, 1.0, 7.0, vec![tall]).unwrap();
        // point (0.5, 0.5): the BS1 ray crosses x = 1.5 at y = 0.3, z = 2.8
        assert!(g.direct_path_blocked(0, 0));
        // point (2.5, 0.5) is in front of the panel
        assert!(!g.direct_path_blocked(0, 6));
    }
}
