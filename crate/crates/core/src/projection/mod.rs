//! Range-view projection: angular mapping, depth rasterization, min-max
//! normalization, and RGB conversion.
//!
//! Two angular mappings are supported. Planar is the conventional LiDAR
//! layout, azimuth atan2(x, y) and elevation arcsin(z/‖p‖). Spherical maps
//! onto a reference sphere of radius R centred at height z_r, arccos(y/R)
//! horizontally and atan2(z − z_r, R) vertically, which reallocates image
//! area toward fast-moving body parts. Both share one rasterization and
//! normalization path; the fill value at a pixel is always D = √(x² + y²).

mod png;

pub use png::{load_gray, save_gray, save_rgb};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointcloud::{compute_stats, BodyLabel, Frame, Point3, Sequence, SequenceStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    Planar,
    Spherical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionPolicy {
    /// Keep the smallest fill value D: the closest return occludes.
    #[default]
    NearestWins,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    pub mode: ProjectionMode,
    /// Horizontal radians per pixel. None fits the subject's angular extent
    /// to the image width.
    pub delta_theta: Option<f64>,
    /// Vertical radians per pixel. None fits the extent to the image height.
    pub delta_phi: Option<f64>,
    /// Reference sphere radius in metres, Spherical mode only. None falls
    /// back to the sequence mean radius r.
    #[serde(rename = "R")]
    pub r_sphere: Option<f64>,
    /// Sphere centre height in metres, Spherical mode only. None falls back
    /// to the sequence centre height c.
    pub z_r: Option<f64>,
    pub width: usize,
    pub height: usize,
    /// Pixel column where recentred angular coordinate 0 lands. None = width/2.
    pub h_center: Option<usize>,
    /// Pixel row where recentred angular coordinate 0 lands. None = height/2.
    pub v_center: Option<usize>,
    pub collision_policy: CollisionPolicy,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            mode: ProjectionMode::Spherical,
            delta_theta: None,
            delta_phi: None,
            r_sphere: None,
            z_r: None,
            width: 64,
            height: 64,
            h_center: None,
            v_center: None,
            collision_policy: CollisionPolicy::NearestWins,
        }
    }
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(Error::InvalidParam(
                "image must be at least 2x2 pixels".into(),
            ));
        }
        for (name, v) in [("delta_theta", self.delta_theta), ("delta_phi", self.delta_phi)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidParam(format!("{name} must be positive")));
                }
            }
        }
        if let Some(r) = self.r_sphere {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidParam("R must be positive".into()));
            }
        }
        if let Some(z) = self.z_r {
            if !z.is_finite() {
                return Err(Error::InvalidParam("z_r must be finite".into()));
            }
        }
        if self.h_center.is_some_and(|c| c >= self.width) {
            return Err(Error::InvalidParam("h_center must lie inside width".into()));
        }
        if self.v_center.is_some_and(|c| c >= self.height) {
            return Err(Error::InvalidParam("v_center must lie inside height".into()));
        }
        Ok(())
    }

    /// Concrete (z_r, R) for Spherical mode, falling back to sequence stats.
    /// None in Planar mode.
    pub fn sphere_for(&self, stats: &SequenceStats) -> Option<(f64, f64)> {
        match self.mode {
            ProjectionMode::Planar => None,
            ProjectionMode::Spherical => Some((
                self.z_r.unwrap_or(stats.center_height),
                self.r_sphere.unwrap_or(stats.mean_radius),
            )),
        }
    }

    fn h_center_px(&self) -> usize {
        self.h_center.unwrap_or(self.width / 2)
    }

    fn v_center_px(&self) -> usize {
        self.v_center.unwrap_or(self.height / 2)
    }

    /// (z_r, R) that rasterize uses directly; bare rasterization has no
    /// sequence stats to fall back on, so Spherical mode requires both.
    fn sphere_explicit(&self) -> Result<(f64, f64)> {
        match (self.z_r, self.r_sphere) {
            (Some(z), Some(r)) => Ok((z, r)),
            _ => Err(Error::InvalidParam(
                "Spherical mode needs explicit z_r and R here (project_sequence fills them from stats)".into(),
            )),
        }
    }
}

/// Planar range-view angles: azimuth atan2(x, y), elevation arcsin(z/‖p‖).
pub fn planar_project(p: &Point3) -> Result<(f64, f64)> {
    let norm = p.norm();
    if norm == 0.0 {
        return Err(Error::UndefinedDirection);
    }
    Ok((p.x.atan2(p.y), (p.z / norm).asin()))
}

/// Reference-sphere angles: h = arccos(y/R), v = atan2(z − z_r, R).
pub fn spherical_project(p: &Point3, r_sphere: f64, z_r: f64) -> Result<(f64, f64)> {
    if !(r_sphere.is_finite() && r_sphere > 0.0) {
        return Err(Error::InvalidParam("R must be positive".into()));
    }
    if p.y.abs() > r_sphere {
        return Err(Error::OutOfSphereDomain {
            y_abs: p.y.abs(),
            radius: r_sphere,
        });
    }
    Ok(((p.y / r_sphere).acos(), (p.z - z_r).atan2(r_sphere)))
}

/// Range image in metres with validity mask and winning-point labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, row = vertical pixel v; meaningful only where valid.
    pub depth: Vec<f64>,
    pub valid: Vec<bool>,
    pub label: Vec<BodyLabel>,
    /// Points that fell outside the image bounds, outside the sphere
    /// domain, or on the sensor's vertical axis (D = 0).
    pub dropped_points: usize,
}

impl DepthImage {
    pub fn idx(&self, h: usize, v: usize) -> usize {
        v * self.width + h
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// 8-bit image; `rgb` is empty until `to_rgb` populates it by replication.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedImage {
    pub width: usize,
    pub height: usize,
    /// Row-major; invalid pixels are 0.
    pub gray: Vec<u8>,
    /// Row-major interleaved r,g,b; empty or 3x gray's length.
    pub rgb: Vec<u8>,
}

/// Pixelization parameters shared by every frame of a projection run:
/// radians per pixel and the recentring offsets (in pixel units) that put
/// the angular bounding-box midpoint at the configured centre pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularWindow {
    pub delta_theta: f64,
    pub delta_phi: f64,
    pub h0: f64,
    pub v0: f64,
}

#[derive(Debug, Clone, Copy)]
struct Bounds {
    h_min: f64,
    h_max: f64,
    v_min: f64,
    v_max: f64,
}

impl Bounds {
    fn new() -> Self {
        Bounds {
            h_min: f64::INFINITY,
            h_max: f64::NEG_INFINITY,
            v_min: f64::INFINITY,
            v_max: f64::NEG_INFINITY,
        }
    }

    fn include(&mut self, (h, v): (f64, f64)) {
        self.h_min = self.h_min.min(h);
        self.h_max = self.h_max.max(h);
        self.v_min = self.v_min.min(v);
        self.v_max = self.v_max.max(v);
    }

    fn seen_any(&self) -> bool {
        self.h_min.is_finite()
    }
}

/// Angles of one point under `cfg`, or None when the point has no defined
/// pixel (origin in Planar mode, |y| > R in Spherical mode).
fn point_angles(p: &Point3, cfg: &ProjectionConfig, sphere: (f64, f64)) -> Option<(f64, f64)> {
    match cfg.mode {
        ProjectionMode::Planar => planar_project(p).ok(),
        ProjectionMode::Spherical => spherical_project(p, sphere.1, sphere.0).ok(),
    }
}

impl AngularWindow {
    /// Fits pixel deltas and recentring to an angular bounding box. Explicit
    /// deltas from the config win; fitted ones map the extent onto
    /// width−1 / height−1 pixels so extreme points stay in bounds. A
    /// degenerate (zero-extent) axis falls back to 1 radian per pixel.
    fn from_bounds(b: &Bounds, cfg: &ProjectionConfig) -> Self {
        let fit = |lo: f64, hi: f64, px: usize, explicit: Option<f64>| -> f64 {
            match explicit {
                Some(d) => d,
                None => {
                    let extent = hi - lo;
                    if extent > 0.0 {
                        extent / (px - 1) as f64
                    } else {
                        1.0
                    }
                }
            }
        };
        let delta_theta = fit(b.h_min, b.h_max, cfg.width, cfg.delta_theta);
        let delta_phi = fit(b.v_min, b.v_max, cfg.height, cfg.delta_phi);
        AngularWindow {
            delta_theta,
            delta_phi,
            h0: (b.h_min + b.h_max) / 2.0 / delta_theta,
            v0: (b.v_min + b.v_max) / 2.0 / delta_phi,
        }
    }

    /// Window for a whole sequence, pooled over every in-domain point so the
    /// subject does not jitter between frames.
    pub fn fit_sequence(seq: &Sequence, cfg: &ProjectionConfig, sphere: (f64, f64)) -> Result<Self> {
        let mut b = Bounds::new();
        for frame in &seq.frames {
            for p in &frame.points {
                if let Some(angles) = point_angles(p, cfg, sphere) {
                    b.include(angles);
                }
            }
        }
        if !b.seen_any() {
            return Err(Error::AllPointsDropped {
                dropped: seq.total_points(),
            });
        }
        Ok(AngularWindow::from_bounds(&b, cfg))
    }

    fn fit_frame(frame: &Frame, cfg: &ProjectionConfig, sphere: (f64, f64)) -> Result<Self> {
        let mut b = Bounds::new();
        for p in &frame.points {
            if let Some(angles) = point_angles(p, cfg, sphere) {
                b.include(angles);
            }
        }
        if !b.seen_any() {
            return Err(Error::AllPointsDropped {
                dropped: frame.points.len(),
            });
        }
        Ok(AngularWindow::from_bounds(&b, cfg))
    }
}

/// Rasterizes one frame with a frame-local angular window. In Spherical mode
/// the config must carry explicit z_r and R.
pub fn rasterize(frame: &Frame, cfg: &ProjectionConfig) -> Result<DepthImage> {
    cfg.validate()?;
    if frame.points.is_empty() {
        return Err(Error::EmptyFrame);
    }
    let sphere = match cfg.mode {
        ProjectionMode::Planar => (0.0, 0.0),
        ProjectionMode::Spherical => cfg.sphere_explicit()?,
    };
    let window = AngularWindow::fit_frame(frame, cfg, sphere)?;
    rasterize_with_window(frame, cfg, sphere, &window)
}

/// Rasterizes one frame with a caller-provided window (shared across a
/// sequence by `project_sequence`).
pub fn rasterize_with_window(
    frame: &Frame,
    cfg: &ProjectionConfig,
    sphere: (f64, f64),
    window: &AngularWindow,
) -> Result<DepthImage> {
    if frame.points.is_empty() {
        return Err(Error::EmptyFrame);
    }
    let (w, h) = (cfg.width, cfg.height);
    let (hc, vc) = (cfg.h_center_px() as i64, cfg.v_center_px() as i64);
    let mut img = DepthImage {
        width: w,
        height: h,
        depth: vec![f64::INFINITY; w * h],
        valid: vec![false; w * h],
        label: vec![BodyLabel::Unlabeled; w * h],
        dropped_points: 0,
    };

    for (i, p) in frame.points.iter().enumerate() {
        let d = p.ground_range();
        let angles = point_angles(p, cfg, sphere);
        // d = 0 would break the positive-depth invariant of the image.
        let Some((h_ang, v_ang)) = angles.filter(|_| d > 0.0) else {
            img.dropped_points += 1;
            continue;
        };
        let h_px = (h_ang / window.delta_theta - window.h0).floor() as i64 + hc;
        let v_px = (v_ang / window.delta_phi - window.v0).floor() as i64 + vc;
        if h_px < 0 || h_px >= w as i64 || v_px < 0 || v_px >= h as i64 {
            img.dropped_points += 1;
            continue;
        }
        let idx = v_px as usize * w + h_px as usize;
        let lbl = frame.label(i);
        // NearestWins; ties broken by label rank so the result is a pure
        // min-reduction, independent of point order.
        let CollisionPolicy::NearestWins = cfg.collision_policy;
        let wins = !img.valid[idx]
            || d < img.depth[idx]
            || (d == img.depth[idx] && lbl.rank() < img.label[idx].rank());
        if wins {
            img.depth[idx] = d;
            img.valid[idx] = true;
            img.label[idx] = lbl;
        }
    }

    if img.valid.iter().all(|&v| !v) {
        return Err(Error::AllPointsDropped {
            dropped: img.dropped_points,
        });
    }
    Ok(img)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeScope {
    PerFrame,
    #[default]
    PerSequence,
}

/// Min-max maps valid depths to [0, 255], rounding half-up; invalid pixels
/// become 0. A degenerate range (max = min) maps valid pixels to 255.
pub fn normalize(stack: &[DepthImage], scope: NormalizeScope) -> Result<Vec<NormalizedImage>> {
    check_geometry(stack)?;

    let span_of = |imgs: &[&DepthImage]| -> Option<(f64, f64)> {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut any = false;
        for img in imgs {
            for (i, &ok) in img.valid.iter().enumerate() {
                if ok {
                    min = min.min(img.depth[i]);
                    max = max.max(img.depth[i]);
                    any = true;
                }
            }
        }
        any.then_some((min, max))
    };

    let map_one = |img: &DepthImage, min: f64, max: f64| -> NormalizedImage {
        let gray = img
            .valid
            .iter()
            .zip(&img.depth)
            .map(|(&ok, &d)| {
                if !ok {
                    0
                } else if max > min {
                    (((d - min) / (max - min) * 255.0).round() as i64).clamp(0, 255) as u8
                } else {
                    255
                }
            })
            .collect();
        NormalizedImage {
            width: img.width,
            height: img.height,
            gray,
            rgb: Vec::new(),
        }
    };

    match scope {
        NormalizeScope::PerSequence => {
            let all: Vec<&DepthImage> = stack.iter().collect();
            let (min, max) = span_of(&all).ok_or(Error::NoValidPixels)?;
            Ok(stack.iter().map(|img| map_one(img, min, max)).collect())
        }
        NormalizeScope::PerFrame => stack
            .iter()
            .map(|img| {
                let (min, max) = span_of(&[img]).ok_or(Error::NoValidPixels)?;
                Ok(map_one(img, min, max))
            })
            .collect(),
    }
}

fn check_geometry(stack: &[DepthImage]) -> Result<()> {
    if let Some(first) = stack.first() {
        for (t, img) in stack.iter().enumerate() {
            if img.width != first.width || img.height != first.height {
                return Err(Error::GeometryMismatch(format!(
                    "frame {t} is {}x{}, frame 0 is {}x{}",
                    img.width, img.height, first.width, first.height
                )));
            }
        }
    }
    Ok(())
}

/// Populates `rgb` by channel replication r = g = b = gray.
pub fn to_rgb(mut img: NormalizedImage) -> NormalizedImage {
    img.rgb = img.gray.iter().flat_map(|&g| [g, g, g]).collect();
    img
}

/// Depth stack for a sequence: shared angular window, per-frame rasterize.
/// Validates R ≥ max|y| up front in Spherical mode.
pub fn project_sequence_depth(seq: &Sequence, cfg: &ProjectionConfig) -> Result<Vec<DepthImage>> {
    cfg.validate()?;
    let stats = compute_stats(seq)?;
    let sphere = match cfg.sphere_for(&stats) {
        Some((z_r, r_sphere)) => {
            if !(r_sphere.is_finite() && r_sphere > 0.0) {
                return Err(Error::InvalidParam("R must be positive".into()));
            }
            let max_y = seq
                .frames
                .iter()
                .flat_map(|f| &f.points)
                .fold(0.0f64, |m, p| m.max(p.y.abs()));
            if max_y > r_sphere {
                return Err(Error::OutOfSphereDomain {
                    y_abs: max_y,
                    radius: r_sphere,
                });
            }
            (z_r, r_sphere)
        }
        None => (0.0, 0.0),
    };

    let window = AngularWindow::fit_sequence(seq, cfg, sphere)?;
    seq.frames
        .iter()
        .enumerate()
        .map(|(t, frame)| {
            rasterize_with_window(frame, cfg, sphere, &window).map_err(|e| e.at_frame(t))
        })
        .collect()
}

/// Full pipeline for one sequence: shared-window rasterization, PerSequence
/// normalization, RGB conversion. Output length equals the frame count.
pub fn project_sequence(seq: &Sequence, cfg: &ProjectionConfig) -> Result<Vec<NormalizedImage>> {
    let stack = project_sequence_depth(seq, cfg)?;
    let normalized = normalize(&stack, NormalizeScope::PerSequence)?;
    Ok(normalized.into_iter().map(to_rgb).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointcloud::{synth_walker, WalkerParams};
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    fn planar_cfg() -> ProjectionConfig {
        ProjectionConfig {
            mode: ProjectionMode::Planar,
            ..ProjectionConfig::default()
        }
    }

    fn spherical_cfg(z_r: f64, r_sphere: f64) -> ProjectionConfig {
        ProjectionConfig {
            mode: ProjectionMode::Spherical,
            z_r: Some(z_r),
            r_sphere: Some(r_sphere),
            ..ProjectionConfig::default()
        }
    }

    #[test]
    fn planar_examples() {
        let (h, v) = planar_project(&Point3::new(0.0, 5.0, 0.0)).unwrap();
        assert!(h.abs() < TOL && v.abs() < TOL);

        let (h, v) = planar_project(&Point3::new(5.0, 5.0, 0.0)).unwrap();
        assert!((h - std::f64::consts::FRAC_PI_4).abs() < TOL);
        assert!(v.abs() < TOL);

        let (_, v) = planar_project(&Point3::new(0.0, 3.0, 4.0)).unwrap();
        assert!((v - (4.0f64 / 5.0).asin()).abs() < TOL);
    }

    #[test]
    fn planar_origin_errors() {
        assert!(matches!(
            planar_project(&Point3::new(0.0, 0.0, 0.0)),
            Err(Error::UndefinedDirection)
        ));
    }

    #[test]
    fn spherical_examples() {
        let r = 2.5;
        let z_r = 1.0;
        let (h, v) = spherical_project(&Point3::new(0.3, r, z_r), r, z_r).unwrap();
        assert!(h.abs() < TOL && v.abs() < TOL);

        let (h, v) = spherical_project(&Point3::new(0.3, 0.0, z_r), r, z_r).unwrap();
        assert!((h - std::f64::consts::FRAC_PI_2).abs() < TOL);
        assert!(v.abs() < TOL);

        let (_, v) = spherical_project(&Point3::new(0.3, 0.0, z_r + r), r, z_r).unwrap();
        assert!((v - std::f64::consts::FRAC_PI_4).abs() < TOL);
    }

    #[test]
    fn spherical_domain_error() {
        let err = spherical_project(&Point3::new(0.0, 3.0, 0.0), 2.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::OutOfSphereDomain { .. }));
    }

    #[test]
    fn single_point_rasterizes_to_one_pixel() {
        // D = sqrt(9 + 16) = 5 regardless of z.
        let frame = Frame::new(0, vec![Point3::new(3.0, 4.0, 1.0)]);
        let img = rasterize(&frame, &spherical_cfg(1.0, 5.0)).unwrap();
        assert_eq!(img.valid_count(), 1);
        assert_eq!(img.dropped_points, 0);
        let i = img.valid.iter().position(|&v| v).unwrap();
        assert_eq!(img.depth[i], 5.0);
    }

    #[test]
    fn nearest_wins_on_collision() {
        // Same direction, different range: both land on one pixel.
        let frame = Frame::new(
            0,
            vec![Point3::new(0.0, 7.0, 0.0), Point3::new(0.0, 2.0, 0.0)],
        );
        let img = rasterize(&frame, &planar_cfg()).unwrap();
        assert_eq!(img.valid_count(), 1);
        let i = img.valid.iter().position(|&v| v).unwrap();
        assert_eq!(img.depth[i], 2.0);
    }

    #[test]
    fn empty_frame_rejected() {
        let frame = Frame::new(0, vec![]);
        assert!(matches!(
            rasterize(&frame, &planar_cfg()),
            Err(Error::EmptyFrame)
        ));
    }

    #[test]
    fn axis_points_are_dropped() {
        // x = y = 0 gives D = 0, which cannot be stored as a valid depth.
        let frame = Frame::new(
            0,
            vec![Point3::new(0.0, 0.0, 1.0), Point3::new(0.0, 2.0, 0.5)],
        );
        let img = rasterize(&frame, &planar_cfg()).unwrap();
        assert_eq!(img.dropped_points, 1);
        assert_eq!(img.valid_count(), 1);

        let lone = Frame::new(0, vec![Point3::new(0.0, 0.0, 1.0)]);
        assert!(matches!(
            rasterize(&lone, &planar_cfg()),
            Err(Error::AllPointsDropped { dropped: 1 })
        ));
    }

    #[test]
    fn out_of_domain_points_counted_not_fatal() {
        let frame = Frame::new(
            0,
            vec![Point3::new(0.0, 5.0, 0.0), Point3::new(0.1, 1.0, 0.2)],
        );
        // R = 2 puts the y = 5 point outside the sphere.
        let img = rasterize(&frame, &spherical_cfg(0.0, 2.0)).unwrap();
        assert_eq!(img.dropped_points, 1);
        assert_eq!(img.valid_count(), 1);
    }

    #[test]
    fn rasterize_is_permutation_invariant() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let seq = synth_walker(
            &WalkerParams {
                n_frames: 1,
                points_per_frame: 600,
                ..WalkerParams::default()
            },
            11,
        )
        .unwrap();
        let frame = &seq.frames[0];
        let cfg = spherical_cfg(0.9, 0.6);
        let base = rasterize(frame, &cfg).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut order: Vec<usize> = (0..frame.points.len()).collect();
        for _ in 0..8 {
            order.shuffle(&mut rng);
            let shuffled = Frame::with_labels(
                0,
                order.iter().map(|&i| frame.points[i]).collect(),
                order.iter().map(|&i| frame.labels[i]).collect(),
            );
            assert_eq!(rasterize(&shuffled, &cfg).unwrap(), base);
        }
    }

    #[test]
    fn normalize_examples() {
        let img = |depths: Vec<f64>| DepthImage {
            width: depths.len(),
            height: 1,
            valid: depths.iter().map(|d| d.is_finite()).collect(),
            label: vec![BodyLabel::Unlabeled; depths.len()],
            depth: depths,
            dropped_points: 0,
        };

        let out = normalize(&[img(vec![2.0, 7.0])], NormalizeScope::PerSequence).unwrap();
        assert_eq!(out[0].gray, vec![0, 255]);

        let out = normalize(&[img(vec![5.0, 5.0, 5.0])], NormalizeScope::PerSequence).unwrap();
        assert_eq!(out[0].gray, vec![255, 255, 255]);

        // 4.5 maps to 127.5, which rounds half-up to 128.
        let out = normalize(&[img(vec![2.0, 4.5, 7.0])], NormalizeScope::PerSequence).unwrap();
        assert_eq!(out[0].gray, vec![0, 128, 255]);

        // invalid pixel (INFINITY depth, valid = false) maps to 0
        let out = normalize(&[img(vec![2.0, f64::INFINITY, 7.0])], NormalizeScope::PerSequence)
            .unwrap();
        assert_eq!(out[0].gray, vec![0, 0, 255]);
    }

    #[test]
    fn normalize_scopes_differ() {
        let mk = |d: f64| DepthImage {
            width: 1,
            height: 1,
            depth: vec![d],
            valid: vec![true],
            label: vec![BodyLabel::Unlabeled],
            dropped_points: 0,
        };
        let stack = [mk(1.0), mk(3.0)];
        let per_seq = normalize(&stack, NormalizeScope::PerSequence).unwrap();
        assert_eq!((per_seq[0].gray[0], per_seq[1].gray[0]), (0, 255));
        // alone in its own scope, each frame is degenerate → 255
        let per_frame = normalize(&stack, NormalizeScope::PerFrame).unwrap();
        assert_eq!((per_frame[0].gray[0], per_frame[1].gray[0]), (255, 255));
    }

    #[test]
    fn normalize_no_valid_pixels_errors() {
        let img = DepthImage {
            width: 2,
            height: 1,
            depth: vec![f64::INFINITY; 2],
            valid: vec![false; 2],
            label: vec![BodyLabel::Unlabeled; 2],
            dropped_points: 2,
        };
        assert!(matches!(
            normalize(&[img], NormalizeScope::PerSequence),
            Err(Error::NoValidPixels)
        ));
    }

    #[test]
    fn rgb_replicates_gray() {
        let img = NormalizedImage {
            width: 2,
            height: 1,
            gray: vec![200, 0],
            rgb: Vec::new(),
        };
        let rgb = to_rgb(img);
        assert_eq!(rgb.rgb, vec![200, 200, 200, 0, 0, 0]);
        // dropping back to one channel reproduces gray
        let back: Vec<u8> = rgb.rgb.chunks(3).map(|c| c[0]).collect();
        assert_eq!(back, rgb.gray);
    }

    #[test]
    fn project_sequence_t1_matches_composition() {
        let seq = synth_walker(
            &WalkerParams {
                n_frames: 1,
                points_per_frame: 300,
                ..WalkerParams::default()
            },
            3,
        )
        .unwrap();
        let stats = compute_stats(&seq).unwrap();
        let cfg = spherical_cfg(stats.center_height, stats.mean_radius);
        let piped = project_sequence(&seq, &cfg).unwrap();
        assert_eq!(piped.len(), 1);

        let raster = rasterize(&seq.frames[0], &cfg).unwrap();
        let manual = to_rgb(
            normalize(&[raster], NormalizeScope::PerSequence)
                .unwrap()
                .remove(0),
        );
        assert_eq!(piped[0], manual);
    }

    #[test]
    fn project_sequence_rejects_small_sphere() {
        let seq = synth_walker(&WalkerParams::default(), 1).unwrap();
        let cfg = spherical_cfg(0.85, 0.05);
        assert!(matches!(
            project_sequence(&seq, &cfg),
            Err(Error::OutOfSphereDomain { .. })
        ));
    }

    #[test]
    fn project_sequence_is_deterministic() {
        let seq = synth_walker(
            &WalkerParams {
                n_frames: 4,
                points_per_frame: 400,
                ..WalkerParams::default()
            },
            8,
        )
        .unwrap();
        let cfg = ProjectionConfig::default(); // stats-derived sphere
        let a = project_sequence(&seq, &cfg).unwrap();
        let b = project_sequence(&seq, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shared_window_differs_from_frame_local() {
        // Frame-local windows re-fit each frame; the sequence window must
        // come from pooled bounds instead (no temporal jitter).
        let seq = synth_walker(
            &WalkerParams {
                n_frames: 6,
                points_per_frame: 500,
                ..WalkerParams::default()
            },
            4,
        )
        .unwrap();
        let stats = compute_stats(&seq).unwrap();
        let cfg = spherical_cfg(stats.center_height, stats.mean_radius);
        let shared = project_sequence_depth(&seq, &cfg).unwrap();
        // at least one frame must disagree with its frame-local rasterization
        let any_differs = seq
            .frames
            .iter()
            .zip(&shared)
            .any(|(f, s)| rasterize(f, &cfg).unwrap() != *s);
        assert!(any_differs);
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = spherical_cfg(1.2, 3.4);
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"R\":3.4"), "{json}");
        let back: ProjectionConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        // unknown keys are rejected
        assert!(serde_json::from_str::<ProjectionConfig>("{\"radius\":1}").is_err());
    }

    proptest! {
        #[test]
        fn spherical_monotone_in_z_and_y(
            y1 in -2.0f64..2.0, y2 in -2.0f64..2.0,
            z1 in -3.0f64..3.0, z2 in -3.0f64..3.0,
            x in -2.0f64..2.0,
        ) {
            let (r, z_r) = (2.0, 0.5);
            // v strictly increasing in z
            let (lo, hi) = if z1 < z2 { (z1, z2) } else { (z2, z1) };
            prop_assume!(lo < hi);
            let (_, v_lo) = spherical_project(&Point3::new(x, y1, lo), r, z_r).unwrap();
            let (_, v_hi) = spherical_project(&Point3::new(x, y1, hi), r, z_r).unwrap();
            prop_assert!(v_lo < v_hi);
            // h strictly decreasing in y
            let (ylo, yhi) = if y1 < y2 { (y1, y2) } else { (y2, y1) };
            prop_assume!(ylo < yhi);
            let (h_lo, _) = spherical_project(&Point3::new(x, ylo, z1), r, z_r).unwrap();
            let (h_hi, _) = spherical_project(&Point3::new(x, yhi, z1), r, z_r).unwrap();
            prop_assert!(h_lo > h_hi);
        }

        #[test]
        fn spherical_symmetric_about_center(
            x in -2.0f64..2.0, y in -2.0f64..2.0, delta in 0.001f64..3.0,
        ) {
            let (r, z_r) = (2.5, 1.0);
            let (_, v_up) = spherical_project(&Point3::new(x, y, z_r + delta), r, z_r).unwrap();
            let (_, v_dn) = spherical_project(&Point3::new(x, y, z_r - delta), r, z_r).unwrap();
            prop_assert!((v_up + v_dn).abs() < TOL);
            prop_assert!(v_up > 0.0);
        }

        #[test]
        fn fill_value_ignores_z(
            x in -5.0f64..5.0, y in -5.0f64..5.0,
            z1 in -5.0f64..5.0, z2 in -5.0f64..5.0,
        ) {
            let a = Point3::new(x, y, z1).ground_range();
            let b = Point3::new(x, y, z2).ground_range();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn normalized_ranking_matches_depth_ranking(
            depths in proptest::collection::vec(0.1f64..50.0, 2..40),
        ) {
            let img = DepthImage {
                width: depths.len(),
                height: 1,
                valid: vec![true; depths.len()],
                label: vec![BodyLabel::Unlabeled; depths.len()],
                depth: depths.clone(),
                dropped_points: 0,
            };
            let out = normalize(&[img], NormalizeScope::PerSequence).unwrap();
            for i in 0..depths.len() {
                for j in 0..depths.len() {
                    if depths[i] < depths[j] {
                        prop_assert!(out[0].gray[i] <= out[0].gray[j]);
                    }
                    if depths[i] == depths[j] {
                        prop_assert_eq!(out[0].gray[i], out[0].gray[j]);
                    }
                }
            }
        }
    }
}
