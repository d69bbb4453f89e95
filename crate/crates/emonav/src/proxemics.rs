//! Adaptive spatial profiles: emotion-scaled comfort radii, oriented
//! anisotropic Gaussian personal-space fields, costmap rasterization,
//! camera→LiDAR frame mapping, and proxemic processing of LiDAR scans.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::emotionctx::EmotionContext;
use crate::gaitlab::Emotion;
use crate::simworld::{OccupancyGrid, Pose, ScanFrame};
use crate::{Error, Result};

/// How the comfort-multiplier denominator aggregates the context scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComfortDenominator {
    /// Sum of per-emotion best-group scores (the default reading; makes the
    /// multiplier a convex combination of the comfort constants).
    PerEmotionMax,
    /// Sum of all 16 scores.
    AllScores,
}

/// Proxemics constants. Comfort radii are meters (converted from the
/// centimeter-scale psychology constants at this boundary).
#[derive(Clone, Copy, Debug)]
pub struct ProxemicsConfig {
    /// Comfort radius per emotion, ordered (happy, sad, angry, neutral).
    pub comfort_constants: [f64; 4],
    /// View-group scaling, ordered by group.
    pub view_constants: [f64; 4],
    /// Forward std-dev as a multiple of the comfort radius.
    pub sigma_ratio: f64,
    /// Side std-dev as a multiple of the comfort radius.
    pub sigma_side_ratio: f64,
    /// Field threshold at which a LiDAR beam is clipped.
    pub tau: f64,
    /// Sampling step along beams when processing scans, meters.
    pub scan_step: f64,
    pub denominator: ComfortDenominator,
}

impl Default for ProxemicsConfig {
    fn default() -> Self {
        let comfort = [0.9004, 1.1271, 0.9975, 0.9203];
        ProxemicsConfig {
            comfort_constants: comfort,
            view_constants: [1.0, 0.5, 0.0, 0.5],
            sigma_ratio: 1.0,
            sigma_side_ratio: 2.0 / 3.0,
            tau: 0.2 * 1.1271,
            scan_step: 0.05,
            denominator: ComfortDenominator::PerEmotionMax,
        }
    }
}

/// A human as the planner sees it: planar pose plus comfort radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HumanState {
    pub x: f64,
    pub y: f64,
    /// Orientation, radians `[0, 2π)`.
    pub theta: f64,
    /// Comfort radius, meters (≥ 0).
    pub comfort: f64,
}

impl HumanState {
    pub fn new(x: f64, y: f64, theta: f64, comfort: f64) -> Result<HumanState> {
        if comfort < 0.0 || !comfort.is_finite() {
            return Err(Error::config(format!("comfort radius must be >= 0, got {comfort}")));
        }
        Ok(HumanState { x, y, theta: theta.rem_euclid(std::f64::consts::TAU), comfort })
    }
}

/// Emotion- and view-scaled comfort radius:
/// `C = (Σ_j c_j·max_g e_{j,g}) / (Σ_j max_g e_{j,g}) · v_{g*}` with `g*`
/// the context's predicted view group.
pub fn comfort_multiplier(ctx: &EmotionContext, cfg: &ProxemicsConfig) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for e in Emotion::ALL {
        let m = ctx.max_over_groups(e);
        num += cfg.comfort_constants[e.index()] * m;
        den += match cfg.denominator {
            ComfortDenominator::PerEmotionMax => m,
            ComfortDenominator::AllScores => ctx.rows()[e.index()].iter().sum::<f64>(),
        };
    }
    if den <= 0.0 {
        return Err(Error::config("comfort multiplier undefined for all-zero emotion scores"));
    }
    Ok(num / den * cfg.view_constants[ctx.predicted_view_group()])
}

/// Quadratic-form coefficients of the oriented Gaussian with forward
/// std-dev `sigma` along `theta` and side std-dev `sigma_s`:
/// the exponent is `k1·Δx² + k2·Δx·Δy + k3·Δy²`.
pub fn gauss_coeffs(theta: f64, sigma: f64, sigma_s: f64) -> Result<(f64, f64, f64)> {
    if sigma <= 0.0 || sigma_s <= 0.0 {
        return Err(Error::config(format!(
            "gaussian std-devs must be positive, got sigma={sigma} sigma_s={sigma_s}"
        )));
    }
    let (s, c) = theta.sin_cos();
    let a = 1.0 / (2.0 * sigma * sigma);
    let b = 1.0 / (2.0 * sigma_s * sigma_s);
    let k1 = c * c * a + s * s * b;
    let k2 = (2.0 * theta).sin() * (a - b);
    let k3 = s * s * a + c * c * b;
    Ok((k1, k2, k3))
}

/// An oriented Gaussian personal-space field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpatialProfile {
    pub center: (f64, f64),
    pub theta: f64,
    pub sigma: f64,
    pub sigma_s: f64,
    /// Peak value at the center (the comfort radius).
    pub amplitude: f64,
}

impl SpatialProfile {
    pub fn new(center: (f64, f64), theta: f64, sigma: f64, sigma_s: f64, amplitude: f64) -> Result<Self> {
        if sigma <= 0.0 || sigma_s <= 0.0 {
            return Err(Error::config("profile std-devs must be positive"));
        }
        if amplitude < 0.0 {
            return Err(Error::config("profile amplitude must be >= 0"));
        }
        Ok(SpatialProfile { center, theta, sigma, sigma_s, amplitude })
    }

    /// Builds the profile for a human, `σ = ratio·C`, `σ_s = side_ratio·C`.
    /// Humans with zero comfort radius project no field.
    pub fn from_human(h: &HumanState, cfg: &ProxemicsConfig) -> Option<SpatialProfile> {
        if h.comfort <= 0.0 {
            return None;
        }
        Some(SpatialProfile {
            center: (h.x, h.y),
            theta: h.theta,
            sigma: cfg.sigma_ratio * h.comfort,
            sigma_s: cfg.sigma_side_ratio * h.comfort,
            amplitude: h.comfort,
        })
    }
}

/// Field value of one profile at a point:
/// `C · exp(−(k1·Δx² + k2·Δx·Δy + k3·Δy²))`.
pub fn profile_value(p: &SpatialProfile, x: f64, y: f64) -> f64 {
    let (k1, k2, k3) = gauss_coeffs(p.theta, p.sigma, p.sigma_s).expect("validated profile");
    let dx = x - p.center.0;
    let dy = y - p.center.1;
    p.amplitude * (-(k1 * dx * dx + k2 * dx * dy + k3 * dy * dy)).exp()
}

/// Max-fused field of several profiles at a point.
pub fn field_value(profiles: &[SpatialProfile], x: f64, y: f64) -> f64 {
    profiles.iter().map(|p| profile_value(p, x, y)).fold(0.0, f64::max)
}

// ── Costmap ─────────────────────────────────────────────────────────

/// Personal-space field rasterized onto the obstacle grid: per cell the
/// max-fused profile value, with obstacle occupancy carried alongside.
#[derive(Clone, Debug, PartialEq)]
pub struct Costmap {
    origin: (f64, f64),
    resolution: f64,
    width: usize,
    height: usize,
    values: Vec<f64>,
    occupied: Vec<bool>,
}

impl Costmap {
    /// Empty costmap aligned with a grid.
    pub fn aligned_with(grid: &OccupancyGrid) -> Costmap {
        Costmap {
            origin: grid.origin(),
            resolution: grid.resolution(),
            width: grid.width(),
            height: grid.height(),
            values: vec![0.0; grid.width() * grid.height()],
            occupied: vec![false; grid.width() * grid.height()],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.width + ix]
    }

    pub fn is_occupied(&self, ix: usize, iy: usize) -> bool {
        self.occupied[iy * self.width + ix]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.origin.0 + (ix as f64 + 0.5) * self.resolution,
            self.origin.1 + (iy as f64 + 0.5) * self.resolution,
        )
    }

    /// Cell indices of the maximal value (ties toward lower flat index).
    pub fn argmax_cell(&self) -> (usize, usize) {
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > best {
                best = v;
                arg = i;
            }
        }
        (arg % self.width, arg / self.width)
    }

    /// Writes the portable grid file: a text header (origin, resolution,
    /// dims) followed by row-major values, one row per line.
    pub fn export(&self, path: &Path) -> Result<()> {
        let mut buf = String::new();
        buf.push_str("costmap v1\n");
        buf.push_str(&format!("origin {} {}\n", self.origin.0, self.origin.1));
        buf.push_str(&format!("resolution {}\n", self.resolution));
        buf.push_str(&format!("dims {} {}\n", self.width, self.height));
        for iy in 0..self.height {
            let row: Vec<String> = (0..self.width)
                .map(|ix| {
                    let v = self.values[iy * self.width + ix];
                    if self.occupied[iy * self.width + ix] {
                        format!("#{v}")
                    } else {
                        format!("{v}")
                    }
                })
                .collect();
            buf.push_str(&row.join(" "));
            buf.push('\n');
        }
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(buf.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

/// Rasterizes profiles over the obstacle grid: every cell takes the
/// max-fused field value at its center; occupied cells are flagged.
pub fn rasterize(profiles: &[SpatialProfile], obstacles: &OccupancyGrid) -> Costmap {
    let mut out = Costmap::aligned_with(obstacles);
    rasterize_into(profiles, obstacles, &mut out).expect("aligned by construction");
    out
}

/// Rasterizes into an existing costmap, which must be aligned with the
/// obstacle grid.
pub fn rasterize_into(profiles: &[SpatialProfile], obstacles: &OccupancyGrid, out: &mut Costmap) -> Result<()> {
    if out.origin != obstacles.origin()
        || out.resolution != obstacles.resolution()
        || out.width != obstacles.width()
        || out.height != obstacles.height()
    {
        return Err(Error::config("costmap is not aligned with the obstacle grid"));
    }
    for iy in 0..out.height {
        for ix in 0..out.width {
            let (cx, cy) = out.cell_center(ix, iy);
            out.values[iy * out.width + ix] = field_value(profiles, cx, cy);
            out.occupied[iy * out.width + ix] = obstacles.is_occupied_cell(ix, iy);
        }
    }
    Ok(())
}

// ── Frame mapping ───────────────────────────────────────────────────

/// Planar rigid transform from the camera frame into the LiDAR frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extrinsics {
    pub tx: f64,
    pub ty: f64,
    pub rotation: f64,
}

impl Extrinsics {
    pub fn identity() -> Extrinsics {
        Extrinsics { tx: 0.0, ty: 0.0, rotation: 0.0 }
    }
}

/// Maps a pose detected in the camera frame into the LiDAR frame:
/// position rotated then translated, heading rotated and wrapped.
pub fn cam_to_lidar(pose: Pose, ext: Extrinsics) -> Pose {
    let (s, c) = ext.rotation.sin_cos();
    Pose::new(
        c * pose.x - s * pose.y + ext.tx,
        s * pose.x + c * pose.y + ext.ty,
        pose.theta + ext.rotation,
    )
}

// ── Scan processing ─────────────────────────────────────────────────

/// Clips each beam at the first sample (stepping `step` meters along the
/// beam) where the max-fused comfort field reaches `tau`; output ranges
/// never exceed the raw ones, so comfort space acts as a soft obstacle.
pub fn process_scan(
    scan: &ScanFrame,
    profiles: &[SpatialProfile],
    tau: f64,
    step: f64,
    robot_pose: Pose,
) -> Result<ScanFrame> {
    if tau <= 0.0 {
        return Err(Error::config("scan threshold tau must be positive"));
    }
    if step <= 0.0 {
        return Err(Error::config("scan sampling step must be positive"));
    }
    if profiles.is_empty() {
        return Ok(scan.clone());
    }
    // Profiles whose peak cannot reach tau can never clip a beam.
    let active: Vec<&SpatialProfile> = profiles.iter().filter(|p| p.amplitude >= tau).collect();
    if active.is_empty() {
        return Ok(scan.clone());
    }
    let mut out = scan.clone();
    for (i, range) in out.ranges.iter_mut().enumerate() {
        let angle = scan.beam_angle(i, robot_pose.theta);
        let (dx, dy) = (angle.cos(), angle.sin());
        let mut s = step;
        while s < *range {
            let x = robot_pose.x + s * dx;
            let y = robot_pose.y + s * dy;
            let v = active.iter().map(|p| profile_value(p, x, y)).fold(0.0, f64::max);
            if v >= tau {
                *range = s;
                break;
            }
            s += step;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::raycast_scan;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn cfg() -> ProxemicsConfig {
        ProxemicsConfig::default()
    }

    #[test]
    fn comfort_one_hot_happy_group0() {
        let ctx = EmotionContext::one_hot(Emotion::Happy, 0);
        let c = comfort_multiplier(&ctx, &cfg()).unwrap();
        assert_abs_diff_eq!(c, 0.9004, epsilon = 1e-12);
    }

    #[test]
    fn comfort_uniform_maxima_is_mean_of_constants() {
        // Equal per-emotion maxima with the global max in group 0.
        let mut scores = [[0.0; 4]; 4];
        for e in 0..4 {
            scores[e][0] = 0.25;
        }
        let ctx = EmotionContext::new(scores).unwrap();
        let c = comfort_multiplier(&ctx, &cfg()).unwrap();
        assert_abs_diff_eq!(c, 0.986325, epsilon = 1e-12);
    }

    #[test]
    fn comfort_vanishes_for_group2() {
        let ctx = EmotionContext::one_hot(Emotion::Sad, 2);
        assert_abs_diff_eq!(comfort_multiplier(&ctx, &cfg()).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn comfort_stays_in_constant_range() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let c = cfg();
        let (lo, hi) = (0.9004, 1.1271);
        for _ in 0..200 {
            let mut scores = [[0.0; 4]; 4];
            for row in scores.iter_mut() {
                for v in row.iter_mut() {
                    *v = rng.gen_range(0.0..1.0);
                }
            }
            let ctx = EmotionContext::new(scores).unwrap();
            let v = comfort_multiplier(&ctx, &c).unwrap();
            let vg = c.view_constants[ctx.predicted_view_group()];
            assert!(v >= lo * vg - 1e-12 && v <= hi * vg + 1e-12);
        }
    }

    #[test]
    fn gauss_coeffs_axis_aligned_and_isotropic() {
        let (k1, k2, k3) = gauss_coeffs(0.0, 2.0, 0.5).unwrap();
        assert_abs_diff_eq!(k1, 1.0 / 8.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k2, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k3, 2.0, epsilon = 1e-15);

        for theta in [0.0, 0.7, 2.1, 5.5] {
            let (k1, k2, k3) = gauss_coeffs(theta, 1.3, 1.3).unwrap();
            assert_abs_diff_eq!(k2, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(k1, 1.0 / (2.0 * 1.3 * 1.3), epsilon = 1e-12);
            assert_abs_diff_eq!(k3, k1, epsilon = 1e-15);
        }
    }

    #[test]
    fn gauss_coeffs_hand_case_at_45_degrees() {
        let (_, k2, _) = gauss_coeffs(PI / 4.0, 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(k2, -1.5, epsilon = 1e-12);
    }

    #[test]
    fn gauss_rejects_nonpositive_sigma() {
        assert!(gauss_coeffs(0.0, 0.0, 1.0).is_err());
        assert!(gauss_coeffs(0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn profile_center_and_one_sigma_point() {
        let p = SpatialProfile::new((2.0, -1.0), 0.0, 0.8, 0.5, 1.1).unwrap();
        assert_abs_diff_eq!(profile_value(&p, 2.0, -1.0), 1.1, epsilon = 1e-15);
        let v = profile_value(&p, 2.0 + 0.8, -1.0);
        assert_abs_diff_eq!(v, 1.1 * (-0.5f64).exp(), epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn rotation_equivariance(
            theta in 0.0..std::f64::consts::TAU,
            d in 0.05f64..3.0,
            phi in 0.0..std::f64::consts::TAU,
            sigma in 0.3f64..2.0,
            sigma_s in 0.3f64..2.0,
        ) {
            // Value at R_theta·offset from a theta-oriented profile equals
            // the value at offset from the axis-aligned profile.
            let (ox, oy) = (d * phi.cos(), d * phi.sin());
            let rotated = SpatialProfile::new((0.0, 0.0), theta, sigma, sigma_s, 1.0).unwrap();
            let aligned = SpatialProfile::new((0.0, 0.0), 0.0, sigma, sigma_s, 1.0).unwrap();
            let (rx, ry) = (theta.cos() * ox - theta.sin() * oy, theta.sin() * ox + theta.cos() * oy);
            let a = profile_value(&rotated, rx, ry);
            let b = profile_value(&aligned, ox, oy);
            prop_assert!((a - b).abs() < 1e-9, "a={a} b={b}");
        }

        #[test]
        fn profile_below_amplitude_everywhere(
            theta in 0.0..std::f64::consts::TAU,
            x in -5.0f64..5.0,
            y in -5.0f64..5.0,
        ) {
            let p = SpatialProfile::new((0.3, -0.4), theta, 0.9, 0.6, 1.2).unwrap();
            let v = profile_value(&p, x, y);
            prop_assert!(v <= 1.2 + 1e-15);
            let off_center = (x - 0.3).abs() > 1e-9 || (y + 0.4).abs() > 1e-9;
            if off_center {
                prop_assert!(v < 1.2);
            }
        }

        #[test]
        fn isotropic_field_is_radial(theta in 0.0..std::f64::consts::TAU, phi in 0.0..std::f64::consts::TAU, d in 0.0f64..3.0) {
            let p = SpatialProfile::new((0.0, 0.0), theta, 0.7, 0.7, 1.0).unwrap();
            let a = profile_value(&p, d * phi.cos(), d * phi.sin());
            let b = profile_value(&p, d, 0.0);
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn coeffs_positive_definite_over_many_angles() {
        for i in 0..10_000 {
            let theta = i as f64 / 10_000.0 * std::f64::consts::TAU;
            let (k1, k2, k3) = gauss_coeffs(theta, 0.9, 0.6).unwrap();
            assert!(k1 > 0.0);
            assert!(4.0 * k1 * k3 - k2 * k2 > 0.0, "not positive definite at {theta}");
        }
    }

    #[test]
    fn rasterize_empty_profiles_gives_zero_map() {
        let grid = OccupancyGrid::new((0.0, 0.0), 0.1, 30, 20);
        let cm = rasterize(&[], &grid);
        assert!(cm.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rasterize_argmax_is_center_cell() {
        let grid = OccupancyGrid::new((0.0, 0.0), 0.1, 40, 40);
        let p = SpatialProfile::new((2.03, 1.57), 1.0, 0.8, 0.5, 1.0).unwrap();
        let cm = rasterize(&[p], &grid);
        let (ix, iy) = cm.argmax_cell();
        assert_eq!((ix, iy), (20, 15));
    }

    #[test]
    fn rasterize_matches_per_cell_brute_force_for_disjoint_profiles() {
        let grid = OccupancyGrid::new((0.0, 0.0), 0.25, 40, 24);
        let a = SpatialProfile::new((2.0, 2.0), 0.3, 0.6, 0.4, 1.0).unwrap();
        let b = SpatialProfile::new((8.0, 4.0), 2.1, 0.7, 0.5, 0.9).unwrap();
        let cm = rasterize(&[a, b], &grid);
        for iy in 0..cm.height() {
            for ix in 0..cm.width() {
                let (cx, cy) = cm.cell_center(ix, iy);
                let want = profile_value(&a, cx, cy).max(profile_value(&b, cx, cy));
                assert_abs_diff_eq!(cm.value(ix, iy), want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rasterize_flags_occupied_cells() {
        let mut grid = OccupancyGrid::new((0.0, 0.0), 0.1, 20, 20);
        grid.fill_rect(0.5, 0.5, 0.3, 0.3);
        let cm = rasterize(&[], &grid);
        let (ix, iy) = grid.cell_of(0.65, 0.65).unwrap();
        assert!(cm.is_occupied(ix, iy));
        assert!(!cm.is_occupied(0, 0));
    }

    #[test]
    fn rasterize_into_rejects_misaligned_costmap() {
        let grid = OccupancyGrid::new((0.0, 0.0), 0.1, 20, 20);
        let other = OccupancyGrid::new((0.0, 0.0), 0.2, 20, 20);
        let mut cm = Costmap::aligned_with(&other);
        assert!(rasterize_into(&[], &grid, &mut cm).is_err());
    }

    #[test]
    fn costmap_export_writes_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cm.grid");
        let grid = OccupancyGrid::new((1.0, 2.0), 0.5, 4, 3);
        let cm = rasterize(&[], &grid);
        cm.export(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "costmap v1");
        assert_eq!(lines.next().unwrap(), "origin 1 2");
        assert_eq!(lines.next().unwrap(), "resolution 0.5");
        assert_eq!(lines.next().unwrap(), "dims 4 3");
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn cam_to_lidar_cases() {
        let p = cam_to_lidar(Pose::new(2.0, 3.0, 0.0), Extrinsics::identity());
        assert_eq!((p.x, p.y, p.theta), (2.0, 3.0, 0.0));

        let p = cam_to_lidar(Pose::new(2.0, 3.0, 0.0), Extrinsics { tx: 1.0, ty: 0.0, rotation: 0.0 });
        assert_eq!((p.x, p.y, p.theta), (3.0, 3.0, 0.0));

        let p = cam_to_lidar(Pose::new(1.0, 0.0, 0.0), Extrinsics { tx: 0.0, ty: 0.0, rotation: PI / 2.0 });
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.theta, PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn process_scan_no_profiles_unchanged() {
        let grid = OccupancyGrid::new((0.0, 0.0), 0.1, 60, 60);
        let scan = raycast_scan(&grid, Pose::new(3.0, 3.0, 0.0), 18, 5.0).unwrap();
        let out = process_scan(&scan, &[], 0.2, 0.05, Pose::new(3.0, 3.0, 0.0)).unwrap();
        assert_eq!(scan, out);
    }

    #[test]
    fn process_scan_weak_profile_unchanged() {
        let grid = OccupancyGrid::new((0.0, 0.0), 0.1, 60, 60);
        let pose = Pose::new(3.0, 3.0, 0.0);
        let scan = raycast_scan(&grid, pose, 18, 5.0).unwrap();
        let weak = SpatialProfile::new((4.0, 3.0), 0.0, 0.5, 0.4, 0.15).unwrap();
        let out = process_scan(&scan, &[weak], 0.2, 0.05, pose).unwrap();
        assert_eq!(scan, out);
    }

    #[test]
    fn process_scan_clips_at_threshold_radius() {
        // Isotropic profile 3 m ahead on beam 0; the field reaches tau at
        // r* = sigma·sqrt(2·ln(C/tau)), so the beam clips at 3 − r*.
        let grid = OccupancyGrid::new((0.0, 0.0), 0.05, 200, 200);
        let pose = Pose::new(2.0, 5.0, 0.0);
        let scan = raycast_scan(&grid, pose, 4, 6.0).unwrap();
        let (c, tau, sigma) = (1.0, 0.3, 0.6);
        let p = SpatialProfile::new((5.0, 5.0), 0.0, sigma, sigma, c).unwrap();
        let step = 0.05;
        let out = process_scan(&scan, &[p], tau, step, pose).unwrap();
        let r_star = sigma * (2.0 * (c / tau).ln()).sqrt();
        assert_abs_diff_eq!(out.ranges[0], 3.0 - r_star, epsilon = step + 1e-9);
        // Beams pointing away stay at max range.
        assert_eq!(out.ranges[2], 6.0);
    }

    #[test]
    fn processed_ranges_never_exceed_raw() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let grid = OccupancyGrid::new((0.0, 0.0), 0.1, 80, 80);
        let pose = Pose::new(4.0, 4.0, 1.3);
        let scan = raycast_scan(&grid, pose, 36, 6.0).unwrap();
        for _ in 0..20 {
            let p = SpatialProfile::new(
                (rng.gen_range(1.0..7.0), rng.gen_range(1.0..7.0)),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.3..1.2),
                rng.gen_range(0.3..1.2),
                rng.gen_range(0.0..1.3),
            )
            .unwrap();
            let out = process_scan(&scan, &[p], 0.22542, 0.05, pose).unwrap();
            for (a, b) in out.ranges.iter().zip(&scan.ranges) {
                assert!(a <= b);
            }
        }
    }

    #[test]
    fn process_scan_rejects_bad_threshold() {
        let scan = ScanFrame { ranges: vec![1.0], start_angle: 0.0, angular_increment: 1.0, max_range: 5.0 };
        assert!(process_scan(&scan, &[], 0.0, 0.05, Pose::new(0.0, 0.0, 0.0)).is_err());
    }
}
