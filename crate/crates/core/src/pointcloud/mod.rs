//! Point cloud containers, file I/O, and a synthetic walking-body generator.
//!
//! Coordinate convention: the sensor sits at the origin, y points away from
//! it toward the subject, z is up. All distances are metres.

mod parse;
mod walker;

pub use parse::{load_sequence, parse_ply_ascii, parse_xyz, write_xyz};
pub use walker::{synth_walker, WalkerParams, FRAME_RATE};

use crate::error::{Error, Result};

/// A single LiDAR return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    /// Euclidean norm ‖p‖.
    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Distance from the vertical sensor axis, √(x² + y²).
    pub fn ground_range(&self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }
}

/// Which body part emitted a synthetic point. Real scans carry `Unlabeled`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum BodyLabel {
    Torso,
    Head,
    LeftArm,
    RightArm,
    LeftLeg,
    RightLeg,
    Unlabeled,
}

impl BodyLabel {
    /// Arms and legs count as limbs; torso and head do not.
    pub fn is_limb(self) -> bool {
        matches!(
            self,
            BodyLabel::LeftArm | BodyLabel::RightArm | BodyLabel::LeftLeg | BodyLabel::RightLeg
        )
    }

    /// Stable small integer used for deterministic tie-breaking.
    pub(crate) fn rank(self) -> u8 {
        match self {
            BodyLabel::Torso => 0,
            BodyLabel::Head => 1,
            BodyLabel::LeftArm => 2,
            BodyLabel::RightArm => 3,
            BodyLabel::LeftLeg => 4,
            BodyLabel::RightLeg => 5,
            BodyLabel::Unlabeled => 6,
        }
    }
}

/// One sweep of returns, with an optional per-point body label.
///
/// `labels` is either empty (unlabeled scan) or exactly as long as `points`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub points: Vec<Point3>,
    pub labels: Vec<BodyLabel>,
}

impl Frame {
    pub fn new(index: usize, points: Vec<Point3>) -> Self {
        Frame {
            index,
            points,
            labels: Vec::new(),
        }
    }

    pub fn with_labels(index: usize, points: Vec<Point3>, labels: Vec<BodyLabel>) -> Self {
        assert_eq!(points.len(), labels.len(), "one label per point");
        Frame {
            index,
            points,
            labels,
        }
    }

    pub fn is_labeled(&self) -> bool {
        !self.labels.is_empty()
    }

    /// Label for point `i`, falling back to `Unlabeled` on unlabeled frames.
    pub fn label(&self, i: usize) -> BodyLabel {
        self.labels.get(i).copied().unwrap_or(BodyLabel::Unlabeled)
    }
}

/// An ordered run of frames from one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub identity_id: String,
    pub sequence_id: String,
    /// Capture condition tag (carrying, umbrella, ...); absent for synthetic data.
    pub condition: Option<String>,
    pub frames: Vec<Frame>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn total_points(&self) -> usize {
        self.frames.iter().map(|f| f.points.len()).sum()
    }
}

/// Whole-sequence geometry summary driving spherical projection defaults.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SequenceStats {
    pub z_min: f64,
    pub z_max: f64,
    /// Vertical centre c = (z_max + z_min) / 2.
    pub center_height: f64,
    /// Mean distance r from (0, 0, c) over every point in the sequence.
    pub mean_radius: f64,
    pub point_count: usize,
}

/// Computes z extrema, the vertical centre c, and the mean radius r around
/// (0, 0, c), pooled over every point of every frame.
pub fn compute_stats(seq: &Sequence) -> Result<SequenceStats> {
    let mut z_min = f64::INFINITY;
    let mut z_max = f64::NEG_INFINITY;
    let mut count = 0usize;
    for frame in &seq.frames {
        for p in &frame.points {
            z_min = z_min.min(p.z);
            z_max = z_max.max(p.z);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::NoPoints);
    }

    let c = (z_max + z_min) / 2.0;
    let mut sum = 0.0;
    for frame in &seq.frames {
        for p in &frame.points {
            let dz = p.z - c;
            sum += (p.x * p.x + p.y * p.y + dz * dz).sqrt();
        }
    }
    let r = sum / count as f64;
    if r == 0.0 {
        return Err(Error::Degenerate(
            "all points coincide with the sequence centre".into(),
        ));
    }

    Ok(SequenceStats {
        z_min,
        z_max,
        center_height: c,
        mean_radius: r,
        point_count: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_of(points: Vec<Point3>) -> Sequence {
        Sequence {
            identity_id: "t".into(),
            sequence_id: "t-0".into(),
            condition: None,
            frames: vec![Frame::new(0, points)],
        }
    }

    #[test]
    fn stats_of_two_points() {
        // z extrema 0 and 2 give c = 1; both points sit √10 from (0,0,1).
        let seq = seq_of(vec![Point3::new(0.0, 3.0, 0.0), Point3::new(0.0, 3.0, 2.0)]);
        let s = compute_stats(&seq).unwrap();
        assert_eq!(s.z_min, 0.0);
        assert_eq!(s.z_max, 2.0);
        assert_eq!(s.center_height, 1.0);
        assert_eq!(s.mean_radius, 10.0f64.sqrt());
        assert_eq!(s.point_count, 2);
    }

    #[test]
    fn stats_pool_over_frames() {
        let seq = Sequence {
            identity_id: "t".into(),
            sequence_id: "t-0".into(),
            condition: None,
            frames: vec![
                Frame::new(0, vec![Point3::new(3.0, 0.0, 5.0)]),
                Frame::new(1, vec![Point3::new(0.0, 4.0, 5.0)]),
            ],
        };
        let s = compute_stats(&seq).unwrap();
        assert_eq!(s.center_height, 5.0);
        assert_eq!(s.mean_radius, 3.5); // (3 + 4) / 2
    }

    #[test]
    fn stats_reject_empty() {
        let seq = seq_of(vec![]);
        assert!(matches!(compute_stats(&seq), Err(Error::NoPoints)));
    }

    #[test]
    fn stats_reject_single_axis_point() {
        // c equals the lone z, so r collapses to the x-y offset: zero here.
        let seq = seq_of(vec![Point3::new(0.0, 0.0, 2.0)]);
        assert!(matches!(compute_stats(&seq), Err(Error::Degenerate(_))));
        let seq = seq_of(vec![Point3::new(0.0, 0.0, 1.5), Point3::new(0.0, 0.0, 1.5)]);
        assert!(matches!(compute_stats(&seq), Err(Error::Degenerate(_))));
    }

    #[test]
    fn z_translation_shifts_center_not_radius() {
        let base = vec![
            Point3::new(0.1, 0.2, 0.0),
            Point3::new(-0.3, 0.1, 1.2),
            Point3::new(0.05, -0.4, 1.9),
        ];
        let shifted: Vec<Point3> = base
            .iter()
            .map(|p| Point3::new(p.x, p.y, p.z + 10.0))
            .collect();
        let a = compute_stats(&seq_of(base)).unwrap();
        let b = compute_stats(&seq_of(shifted)).unwrap();
        assert!((b.center_height - (a.center_height + 10.0)).abs() < 1e-12);
        assert!((b.mean_radius - a.mean_radius).abs() < 1e-12);
    }
}
