//! Geometric proxies for how much image area a projection devotes to moving
//! body parts, and the (z_r, R) sweep grid that searches sphere placements.
//!
//! Recognition accuracy needs training; these metrics do not. The limb pixel
//! fraction measures how many valid pixels land on arms and legs, and the
//! dynamic score measures per-pixel temporal variance of normalized depth.
//! Both only make qualitative, direction-of-effect statements.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointcloud::{compute_stats, Sequence, SequenceStats};
use crate::projection::{
    project_sequence_depth, DepthImage, ProjectionConfig, ProjectionMode,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// z-axis step in metres; None derives 0.1·(z_max − z_min).
    pub l: Option<f64>,
    /// Radius step in metres; None derives 0.1·r.
    pub d: Option<f64>,
    /// Grid offsets k giving z_r = c + k·l.
    pub z_steps: Vec<i32>,
    /// Grid offsets k giving R = r + k·d.
    pub r_steps: Vec<i32>,
    /// Image geometry shared by every cell; mode fields are overridden
    /// per cell (Spherical) and for the baseline row (Planar).
    pub base: ProjectionConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            l: None,
            d: None,
            z_steps: vec![-2, -1, 0, 1, 2],
            r_steps: vec![-2, -1, 0, 1, 2],
            base: ProjectionConfig::default(),
        }
    }
}

/// One sweep grid cell, or the planar baseline when `z_r`/`r_sphere` are None.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRecord {
    pub mode: ProjectionMode,
    pub z_r: Option<f64>,
    pub r_sphere: Option<f64>,
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CellOutcome {
    Evaluated {
        limb_fraction: f64,
        dynamic_score: f64,
        valid_pixels: usize,
        dropped: usize,
    },
    /// R smaller than the sequence's max|y|: the sphere domain excludes
    /// part of the subject, so the cell is skipped rather than evaluated.
    InvalidDomain { max_abs_y: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub stats: SequenceStats,
    /// Resolved step sizes in metres.
    pub l: f64,
    pub d: f64,
    /// Grid cells ordered z outer, R inner.
    pub cells: Vec<CellRecord>,
    pub planar_baseline: CellRecord,
}

/// Fraction of valid pixels whose winning point is an arm or a leg,
/// aggregated over the whole stack.
pub fn limb_pixel_fraction(stack: &[DepthImage]) -> Result<f64> {
    let mut valid = 0usize;
    let mut limb = 0usize;
    for img in stack {
        for (i, &ok) in img.valid.iter().enumerate() {
            if !ok {
                continue;
            }
            if !img.label[i].is_limb() && img.label[i].rank() == 6 {
                return Err(Error::UnlabeledInput(
                    "limb_pixel_fraction needs body-labeled depth images; \
                     a valid pixel carries no label"
                        .into(),
                ));
            }
            valid += 1;
            if img.label[i].is_limb() {
                limb += 1;
            }
        }
    }
    if valid == 0 {
        return Err(Error::NoValidPixels);
    }
    Ok(limb as f64 / valid as f64)
}

/// Mean, over pixels valid in at least two frames, of the population
/// variance of normalized depth at that pixel. Each pixel's depth series is
/// min-max normalized over its own valid frames, so the score measures how
/// active a pixel is regardless of the absolute depth range its content
/// spans; a pixel whose depth never changes contributes exactly 0. Frames
/// where the pixel is invalid are excluded from that pixel's variance.
pub fn dynamic_score(stack: &[DepthImage]) -> Result<f64> {
    if stack.len() < 2 {
        return Err(Error::TooFewFrames {
            needed: 2,
            got: stack.len(),
        });
    }
    let first = &stack[0];
    for (t, img) in stack.iter().enumerate() {
        if img.width != first.width || img.height != first.height {
            return Err(Error::GeometryMismatch(format!(
                "frame {t} is {}x{}, frame 0 is {}x{}",
                img.width, img.height, first.width, first.height
            )));
        }
    }
    if !stack.iter().any(|img| img.valid.iter().any(|&ok| ok)) {
        return Err(Error::NoValidPixels);
    }

    let n_px = first.width * first.height;
    let mut total = 0.0;
    let mut pixels = 0usize;
    let mut series = Vec::with_capacity(stack.len());
    for i in 0..n_px {
        series.clear();
        series.extend(
            stack
                .iter()
                .filter(|img| img.valid[i])
                .map(|img| img.depth[i]),
        );
        if series.len() < 2 {
            continue;
        }
        pixels += 1;
        let pmin = series.iter().copied().fold(f64::INFINITY, f64::min);
        let pmax = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = pmax - pmin;
        if span <= 0.0 {
            continue; // constant pixel: variance is exactly 0
        }
        let n = series.len() as f64;
        let mean = series.iter().map(|d| (d - pmin) / span).sum::<f64>() / n;
        let ss: f64 = series
            .iter()
            .map(|d| {
                let dev = (d - pmin) / span - mean;
                dev * dev
            })
            .sum();
        total += ss / n;
    }
    if pixels == 0 {
        return Err(Error::Degenerate(
            "no pixel is valid in at least two frames".into(),
        ));
    }
    Ok(total / pixels as f64)
}

fn evaluate(seq: &Sequence, cfg: &ProjectionConfig) -> Result<CellOutcome> {
    let stack = project_sequence_depth(seq, cfg)?;
    Ok(CellOutcome::Evaluated {
        limb_fraction: limb_pixel_fraction(&stack)?,
        dynamic_score: dynamic_score(&stack)?,
        valid_pixels: stack.iter().map(|i| i.valid_count()).sum(),
        dropped: stack.iter().map(|i| i.dropped_points).sum(),
    })
}

/// Evaluates the (z_r, R) grid around the sequence's (c, r) plus a planar
/// baseline. Cells whose R violates the sphere domain are recorded as
/// invalid; everything else is evaluated independently.
pub fn run_sweep(seq: &Sequence, cfg: &SweepConfig) -> Result<SweepReport> {
    if cfg.z_steps.is_empty() || cfg.r_steps.is_empty() {
        return Err(Error::InvalidParam("sweep step lists must be nonempty".into()));
    }
    if seq.len() < 2 {
        return Err(Error::TooFewFrames {
            needed: 2,
            got: seq.len(),
        });
    }
    cfg.base.validate()?;
    let stats = compute_stats(seq)?;
    let l = cfg.l.unwrap_or(0.1 * (stats.z_max - stats.z_min));
    let d = cfg.d.unwrap_or(0.1 * stats.mean_radius);

    let max_abs_y = seq
        .frames
        .iter()
        .flat_map(|f| &f.points)
        .fold(0.0f64, |m, p| m.max(p.y.abs()));

    let mut cells = Vec::with_capacity(cfg.z_steps.len() * cfg.r_steps.len());
    let mut evaluated_any = false;
    for &kz in &cfg.z_steps {
        for &kr in &cfg.r_steps {
            let z_r = stats.center_height + kz as f64 * l;
            let r_sphere = stats.mean_radius + kr as f64 * d;
            if r_sphere <= 0.0 {
                return Err(Error::InvalidParam(format!(
                    "r_step {kr} gives non-positive sphere radius {r_sphere}"
                )));
            }
            let outcome = if r_sphere < max_abs_y {
                CellOutcome::InvalidDomain { max_abs_y }
            } else {
                evaluated_any = true;
                evaluate(
                    seq,
                    &ProjectionConfig {
                        mode: ProjectionMode::Spherical,
                        z_r: Some(z_r),
                        r_sphere: Some(r_sphere),
                        ..cfg.base
                    },
                )?
            };
            cells.push(CellRecord {
                mode: ProjectionMode::Spherical,
                z_r: Some(z_r),
                r_sphere: Some(r_sphere),
                outcome,
            });
        }
    }
    if !evaluated_any {
        return Err(Error::Degenerate(
            "every sweep cell violates the sphere domain".into(),
        ));
    }

    let planar_outcome = evaluate(
        seq,
        &ProjectionConfig {
            mode: ProjectionMode::Planar,
            z_r: None,
            r_sphere: None,
            ..cfg.base
        },
    )?;
    Ok(SweepReport {
        stats,
        l,
        d,
        cells,
        planar_baseline: CellRecord {
            mode: ProjectionMode::Planar,
            z_r: None,
            r_sphere: None,
            outcome: planar_outcome,
        },
    })
}

impl SweepReport {
    /// The evaluated cell with the highest limb fraction (ties to the
    /// earliest cell in grid order).
    pub fn argmax_limb_fraction(&self) -> Option<&CellRecord> {
        self.cells
            .iter()
            .filter_map(|c| match c.outcome {
                CellOutcome::Evaluated { limb_fraction, .. } => Some((c, limb_fraction)),
                CellOutcome::InvalidDomain { .. } => None,
            })
            .max_by(|a, b| {
                a.1.partial_cmp(&b.1)
                    .expect("limb fractions are never NaN")
            })
            .map(|(c, _)| c)
    }
}

fn mode_name(mode: ProjectionMode) -> &'static str {
    match mode {
        ProjectionMode::Planar => "planar",
        ProjectionMode::Spherical => "spherical",
    }
}

fn push_row(out: &mut String, rec: &CellRecord) {
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    match &rec.outcome {
        CellOutcome::Evaluated {
            limb_fraction,
            dynamic_score,
            valid_pixels,
            dropped,
        } => writeln!(
            out,
            "{},{},{},{},{},{},{}",
            mode_name(rec.mode),
            opt(rec.z_r),
            opt(rec.r_sphere),
            limb_fraction,
            dynamic_score,
            valid_pixels,
            dropped
        ),
        CellOutcome::InvalidDomain { .. } => writeln!(
            out,
            "{},{},{},nan,nan,0,0",
            mode_name(rec.mode),
            opt(rec.z_r),
            opt(rec.r_sphere),
        ),
    }
    .expect("string write cannot fail");
}

/// Report as CSV text: fixed header, one row per cell in grid order, the
/// planar baseline last. Byte-deterministic for a given report.
pub fn report_to_csv(report: &SweepReport) -> String {
    let mut out = String::from("mode,z_r,R,limb_fraction,dynamic_score,valid_pixels,dropped\n");
    for cell in &report.cells {
        push_row(&mut out, cell);
    }
    push_row(&mut out, &report.planar_baseline);
    out
}

pub fn emit_report(report: &SweepReport, path: &Path) -> Result<()> {
    if report.cells.is_empty() {
        return Err(Error::InvalidParam("cannot emit an empty report".into()));
    }
    std::fs::write(path, report_to_csv(report))?;
    Ok(())
}

/// Sphere placed at the measured centre height with the radius tightened by
/// one default radius step (R = 0.9·r).
pub fn preset_centered(stats: &SequenceStats) -> (f64, f64) {
    (stats.center_height, 0.9 * stats.mean_radius)
}

/// Sphere lifted one default z-step above the centre height, with the same
/// tightened radius as [`preset_centered`].
pub fn preset_raised(stats: &SequenceStats) -> (f64, f64) {
    (
        stats.center_height + 0.1 * (stats.z_max - stats.z_min),
        0.9 * stats.mean_radius,
    )
}
