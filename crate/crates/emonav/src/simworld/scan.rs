use std::f64::consts::TAU;

use crate::{Error, Result};

use super::grid::{OccupancyGrid, Pose};

/// One LiDAR sweep: `ranges[i]` is the hit distance of the beam at
/// `start_angle + i·angular_increment` relative to the emitting pose's
/// heading. Ranges are clamped to `(0, max_range]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanFrame {
    pub ranges: Vec<f64>,
    pub start_angle: f64,
    pub angular_increment: f64,
    pub max_range: f64,
}

impl ScanFrame {
    pub fn n_beams(&self) -> usize {
        self.ranges.len()
    }

    /// World angle of beam `i` for a scanner with heading `heading`.
    pub fn beam_angle(&self, i: usize, heading: f64) -> f64 {
        heading + self.start_angle + i as f64 * self.angular_increment
    }
}

const MIN_RANGE: f64 = 1e-6;

/// Casts `n_beams` rays spread uniformly over the full circle from `pose`,
/// returning the distance to the first occupied cell boundary per beam
/// (grid traversal; exact to the cell boundary). Unobstructed beams report
/// `max_range`; leaving the grid counts as unobstructed.
pub fn raycast_scan(
    grid: &OccupancyGrid,
    pose: Pose,
    n_beams: usize,
    max_range: f64,
) -> Result<ScanFrame> {
    if n_beams == 0 {
        return Err(Error::config("raycast needs at least one beam"));
    }
    if max_range <= 0.0 {
        return Err(Error::config("raycast max_range must be positive"));
    }
    if !grid.in_bounds(pose.x, pose.y) {
        return Err(Error::config(format!(
            "raycast pose ({}, {}) outside the grid",
            pose.x, pose.y
        )));
    }
    let increment = TAU / n_beams as f64;
    let mut ranges = Vec::with_capacity(n_beams);
    for i in 0..n_beams {
        let angle = pose.theta + i as f64 * increment;
        ranges.push(cast_ray(grid, (pose.x, pose.y), angle, max_range));
    }
    Ok(ScanFrame { ranges, start_angle: 0.0, angular_increment: increment, max_range })
}

/// Distance from `from` along `angle` to the first occupied cell, clamped
/// to `(MIN_RANGE, max_range]`. Amanatides–Woo traversal.
pub fn cast_ray(grid: &OccupancyGrid, from: (f64, f64), angle: f64, max_range: f64) -> f64 {
    let (dx, dy) = (angle.cos(), angle.sin());
    let res = grid.resolution();
    let origin = grid.origin();

    let Some((cx, cy)) = grid.cell_of(from.0, from.1) else {
        return max_range;
    };
    let (mut ix, mut iy) = (cx as isize, cy as isize);

    let step_x: isize = if dx > 0.0 { 1 } else { -1 };
    let step_y: isize = if dy > 0.0 { 1 } else { -1 };
    let t_delta_x = if dx == 0.0 { f64::INFINITY } else { res / dx.abs() };
    let t_delta_y = if dy == 0.0 { f64::INFINITY } else { res / dy.abs() };

    // Distance to the first vertical/horizontal cell boundary.
    let cell_x0 = origin.0 + ix as f64 * res;
    let cell_y0 = origin.1 + iy as f64 * res;
    let mut t_max_x = if dx > 0.0 {
        (cell_x0 + res - from.0) / dx
    } else if dx < 0.0 {
        (cell_x0 - from.0) / dx
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dy > 0.0 {
        (cell_y0 + res - from.1) / dy
    } else if dy < 0.0 {
        (cell_y0 - from.1) / dy
    } else {
        f64::INFINITY
    };

    let mut t_entry: f64 = 0.0;
    loop {
        if ix >= 0 && iy >= 0 && grid.is_occupied_cell(ix as usize, iy as usize) {
            return t_entry.clamp(MIN_RANGE, max_range);
        }
        if t_max_x < t_max_y {
            t_entry = t_max_x;
            t_max_x += t_delta_x;
            ix += step_x;
        } else {
            t_entry = t_max_y;
            t_max_y += t_delta_y;
            iy += step_y;
        }
        if t_entry > max_range {
            return max_range;
        }
        if ix < 0 || iy < 0 || ix >= grid.width() as isize || iy >= grid.height() as isize {
            return max_range;
        }
    }
}

/// Distance along a ray to a circle of radius `r` at `center`, if it hits
/// within `max_range`.
pub fn ray_circle(from: (f64, f64), angle: f64, center: (f64, f64), r: f64, max_range: f64) -> Option<f64> {
    let (dx, dy) = (angle.cos(), angle.sin());
    let (ox, oy) = (from.0 - center.0, from.1 - center.1);
    // |o + t·d|² = r², with |d| = 1.
    let b = ox * dx + oy * dy;
    let c = ox * ox + oy * oy - r * r;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sqrt_disc = disc.sqrt();
    let t = if -b - sqrt_disc > 0.0 {
        -b - sqrt_disc
    } else if -b + sqrt_disc > 0.0 {
        // Ray starts inside the circle.
        MIN_RANGE
    } else {
        return None;
    };
    (t <= max_range).then_some(t.max(MIN_RANGE))
}
