use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// A planar pose: position in meters, heading in radians `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Pose {
        Pose { x, y, theta: theta.rem_euclid(TAU) }
    }

    pub fn distance_to(&self, p: (f64, f64)) -> f64 {
        ((self.x - p.0).powi(2) + (self.y - p.1).powi(2)).sqrt()
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    theta.rem_euclid(TAU)
}

/// Boolean occupancy grid over an axis-aligned world rectangle.
/// Cell `(ix, iy)` covers `[origin + ix·res, origin + (ix+1)·res)` on each
/// axis; queries outside the grid report *free* (the world may extend past
/// walls only if a scenario chooses not to enclose itself).
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    origin: (f64, f64),
    resolution: f64,
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(origin: (f64, f64), resolution: f64, width: usize, height: usize) -> OccupancyGrid {
        assert!(resolution > 0.0, "resolution must be positive");
        OccupancyGrid { origin, resolution, width, height, cells: vec![false; width * height] }
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// World extent covered by the grid: `(x0, y0, x1, y1)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        (
            self.origin.0,
            self.origin.1,
            self.origin.0 + self.width as f64 * self.resolution,
            self.origin.1 + self.height as f64 * self.resolution,
        )
    }

    pub fn in_bounds(&self, x: f64, y: f64) -> bool {
        let (x0, y0, x1, y1) = self.bounds();
        x >= x0 && x < x1 && y >= y0 && y < y1
    }

    /// Cell index containing a world point, if inside the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if !self.in_bounds(x, y) {
            return None;
        }
        let ix = ((x - self.origin.0) / self.resolution) as usize;
        let iy = ((y - self.origin.1) / self.resolution) as usize;
        Some((ix.min(self.width - 1), iy.min(self.height - 1)))
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.origin.0 + (ix as f64 + 0.5) * self.resolution,
            self.origin.1 + (iy as f64 + 0.5) * self.resolution,
        )
    }

    pub fn is_occupied_cell(&self, ix: usize, iy: usize) -> bool {
        ix < self.width && iy < self.height && self.cells[iy * self.width + ix]
    }

    /// Occupancy at a world point (outside the grid counts as free).
    pub fn occupied_at(&self, x: f64, y: f64) -> bool {
        self.cell_of(x, y).map(|(ix, iy)| self.cells[iy * self.width + ix]).unwrap_or(false)
    }

    pub fn set_cell(&mut self, ix: usize, iy: usize, occupied: bool) {
        if ix < self.width && iy < self.height {
            self.cells[iy * self.width + ix] = occupied;
        }
    }

    /// Marks every cell whose center lies inside the rectangle.
    pub fn fill_rect(&mut self, x: f64, y: f64, w: f64, h: f64) {
        for iy in 0..self.height {
            for ix in 0..self.width {
                let (cx, cy) = self.cell_center(ix, iy);
                if cx >= x && cx <= x + w && cy >= y && cy <= y + h {
                    self.cells[iy * self.width + ix] = true;
                }
            }
        }
    }

    /// Marks every cell whose center lies inside the disc.
    pub fn fill_circle(&mut self, x: f64, y: f64, r: f64) {
        for iy in 0..self.height {
            for ix in 0..self.width {
                let (cx, cy) = self.cell_center(ix, iy);
                if (cx - x).powi(2) + (cy - y).powi(2) <= r * r {
                    self.cells[iy * self.width + ix] = true;
                }
            }
        }
    }

    /// True when any occupied cell center lies within `radius` of the
    /// point (a disc-footprint collision test at grid resolution).
    pub fn disc_collides(&self, x: f64, y: f64, radius: f64) -> bool {
        if self.occupied_at(x, y) {
            return true;
        }
        let r_cells = (radius / self.resolution).ceil() as isize + 1;
        let (cx, cy) = match self.cell_of(
            x.clamp(self.origin.0, self.origin.0 + (self.width as f64 - 0.5) * self.resolution),
            y.clamp(self.origin.1, self.origin.1 + (self.height as f64 - 0.5) * self.resolution),
        ) {
            Some(c) => c,
            None => return false,
        };
        let r2 = radius * radius;
        for dy in -r_cells..=r_cells {
            for dx in -r_cells..=r_cells {
                let ix = cx as isize + dx;
                let iy = cy as isize + dy;
                if ix < 0 || iy < 0 || ix >= self.width as isize || iy >= self.height as isize {
                    continue;
                }
                if self.cells[iy as usize * self.width + ix as usize] {
                    let (ox, oy) = self.cell_center(ix as usize, iy as usize);
                    if (ox - x).powi(2) + (oy - y).powi(2) <= r2 {
                        return true;
                    }
                }
            }
        }
        false
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_indexing_roundtrip() {
        let g = OccupancyGrid::new((0.0, 0.0), 0.5, 10, 8);
        assert_eq!(g.cell_of(0.0, 0.0), Some((0, 0)));
        assert_eq!(g.cell_of(4.99, 3.99), Some((9, 7)));
        assert_eq!(g.cell_of(5.0, 0.0), None);
        let (cx, cy) = g.cell_center(3, 2);
        assert_eq!(g.cell_of(cx, cy), Some((3, 2)));
    }

    #[test]
    fn rect_fill_and_disc_collision() {
        let mut g = OccupancyGrid::new((0.0, 0.0), 0.1, 100, 100);
        g.fill_rect(4.0, 4.0, 1.0, 1.0);
        assert!(g.occupied_at(4.5, 4.5));
        assert!(!g.occupied_at(2.0, 2.0));
        assert!(g.disc_collides(3.9, 4.5, 0.3));
        assert!(!g.disc_collides(3.0, 4.5, 0.3));
    }

    #[test]
    fn pose_wraps_heading() {
        let p = Pose::new(0.0, 0.0, -1.0);
        assert!(p.theta > 5.0 && p.theta < TAU);
    }
}
