//! Command bodies. Each computes its results before writing anything, then
//! logs the resolved job as config.json next to the artifacts, so a failed
//! validation leaves no output and a finished run can be replayed from its
//! own directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;

use rangegait::analytics::{
    dynamic_score, emit_report, limb_pixel_fraction, preset_centered, preset_raised, run_sweep,
};
use rangegait::net::{
    backbone_forward, backbone_forward_stages, conv2d, cross_entropy, daml_forward, embed_batch,
    temporal_pool, triplet_loss, Model, Tensor,
};
use rangegait::pointcloud::{
    compute_stats, load_sequence, synth_walker, write_xyz, BodyLabel, Sequence, SequenceStats,
};
use rangegait::projection::{
    load_gray, normalize, project_sequence_depth, save_rgb, to_rgb, NormalizeScope,
    ProjectionMode,
};

use crate::jobs::{AnalyzeJob, NetCheckJob, ProjectJob, SweepJob, SynthJob};

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Large flat payloads (per-point labels) go on one line.
fn write_json_compact<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn require_input(input: &Option<PathBuf>) -> Result<&Path> {
    input
        .as_deref()
        .context("config field `input` is required; pass --set input=<dir>")
}

/// Loads frame files and reattaches per-point labels from the labels.json
/// sidecar when present (synth writes one; plain scans have none).
fn load_labeled(input: &Option<PathBuf>, pattern: &str) -> Result<Sequence> {
    let dir = require_input(input)?;
    let mut seq = load_sequence(dir, pattern)?;
    let sidecar = dir.join("labels.json");
    if sidecar.exists() {
        let text = fs::read_to_string(&sidecar)
            .with_context(|| format!("reading {}", sidecar.display()))?;
        let labels: Vec<Vec<BodyLabel>> = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", sidecar.display()))?;
        ensure!(
            labels.len() == seq.frames.len(),
            "labels.json holds {} frames, sequence has {}",
            labels.len(),
            seq.frames.len()
        );
        for (frame, frame_labels) in seq.frames.iter_mut().zip(labels) {
            ensure!(
                frame_labels.len() == frame.points.len(),
                "labels.json frame {}: {} labels for {} points",
                frame.index,
                frame_labels.len(),
                frame.points.len()
            );
            frame.labels = frame_labels;
        }
    }
    Ok(seq)
}

#[derive(Serialize)]
struct SynthManifest {
    identity_id: String,
    sequence_id: String,
    frames: usize,
    points_per_frame: usize,
    seed: u64,
    stats: SequenceStats,
    frame_files: Vec<String>,
}

pub fn synth(job: SynthJob, out: &Path) -> Result<()> {
    let seq = synth_walker(&job.walker, job.seed)?;
    let stats = compute_stats(&seq)?;
    fs::create_dir_all(out)?;
    write_json(&out.join("config.json"), &job)?;
    let mut frame_files = Vec::new();
    for frame in &seq.frames {
        let name = format!("{:04}.xyz", frame.index);
        fs::write(out.join(&name), write_xyz(&frame.points))
            .with_context(|| format!("writing frame {name}"))?;
        frame_files.push(name);
    }
    let labels: Vec<&[BodyLabel]> = seq.frames.iter().map(|f| f.labels.as_slice()).collect();
    write_json_compact(&out.join("labels.json"), &labels)?;
    write_json(
        &out.join("manifest.json"),
        &SynthManifest {
            identity_id: seq.identity_id,
            sequence_id: seq.sequence_id,
            frames: frame_files.len(),
            points_per_frame: job.walker.points_per_frame,
            seed: job.seed,
            stats,
            frame_files,
        },
    )
}

#[derive(Serialize)]
struct SphereInfo {
    z_r: f64,
    #[serde(rename = "R")]
    radius: f64,
}

#[derive(Serialize)]
struct FrameSummary {
    file: String,
    valid_pixels: usize,
    dropped_points: usize,
}

#[derive(Serialize)]
struct ProjectSummary {
    identity_id: String,
    sequence_id: String,
    frames: usize,
    width: usize,
    height: usize,
    stats: SequenceStats,
    mode: ProjectionMode,
    sphere: Option<SphereInfo>,
    per_frame: Vec<FrameSummary>,
    total_dropped: usize,
}

pub fn project(job: ProjectJob, out: &Path) -> Result<()> {
    let seq = load_labeled(&job.input, &job.pattern)?;
    let stats = compute_stats(&seq)?;
    let depth = project_sequence_depth(&seq, &job.projection)?;
    let images = normalize(&depth, NormalizeScope::PerSequence)?;

    fs::create_dir_all(out)?;
    write_json(&out.join("config.json"), &job)?;
    let mut per_frame = Vec::new();
    for (i, (d, img)) in depth.iter().zip(images).enumerate() {
        let file = format!("{i:04}.png");
        save_rgb(&to_rgb(img), &out.join(&file))?;
        per_frame.push(FrameSummary {
            file,
            valid_pixels: d.valid_count(),
            dropped_points: d.dropped_points,
        });
    }
    let total_dropped = per_frame.iter().map(|f| f.dropped_points).sum();
    write_json(
        &out.join("summary.json"),
        &ProjectSummary {
            identity_id: seq.identity_id,
            sequence_id: seq.sequence_id,
            frames: per_frame.len(),
            width: job.projection.width,
            height: job.projection.height,
            stats,
            mode: job.projection.mode,
            sphere: job
                .projection
                .sphere_for(&stats)
                .map(|(z_r, radius)| SphereInfo { z_r, radius }),
            per_frame,
            total_dropped,
        },
    )
}

pub fn sweep(job: SweepJob, out: &Path) -> Result<()> {
    let seq = load_labeled(&job.input, &job.pattern)?;
    let report = run_sweep(&seq, &job.sweep)?;
    fs::create_dir_all(out)?;
    write_json(&out.join("config.json"), &job)?;
    emit_report(&report, &out.join("report.csv"))?;
    Ok(())
}

#[derive(Serialize)]
struct AnalysisReport {
    identity_id: String,
    sequence_id: String,
    frames: usize,
    mode: ProjectionMode,
    sphere: Option<SphereInfo>,
    stats: SequenceStats,
    limb_fraction: f64,
    dynamic_score: f64,
    valid_pixels: usize,
    dropped_points: usize,
    /// Named sphere placements derived from the stats, for follow-up runs.
    presets: Presets,
}

#[derive(Serialize)]
struct Presets {
    centered: SphereInfo,
    raised: SphereInfo,
}

pub fn analyze(job: AnalyzeJob, out: &Path) -> Result<()> {
    let seq = load_labeled(&job.input, &job.pattern)?;
    let stats = compute_stats(&seq)?;
    let depth = project_sequence_depth(&seq, &job.projection)?;
    let limb_fraction = limb_pixel_fraction(&depth)?;
    let score = dynamic_score(&depth)?;
    let (cz, cr) = preset_centered(&stats);
    let (rz, rr) = preset_raised(&stats);

    fs::create_dir_all(out)?;
    write_json(&out.join("config.json"), &job)?;
    write_json(
        &out.join("analysis.json"),
        &AnalysisReport {
            identity_id: seq.identity_id,
            sequence_id: seq.sequence_id,
            frames: depth.len(),
            mode: job.projection.mode,
            sphere: job
                .projection
                .sphere_for(&stats)
                .map(|(z_r, radius)| SphereInfo { z_r, radius }),
            stats,
            limb_fraction,
            dynamic_score: score,
            valid_pixels: depth.iter().map(|d| d.valid_count()).sum(),
            dropped_points: depth.iter().map(|d| d.dropped_points).sum(),
            presets: Presets {
                centered: SphereInfo { z_r: cz, radius: cr },
                raised: SphereInfo { z_r: rz, radius: rr },
            },
        },
    )
}

#[derive(Serialize)]
struct StageShape {
    name: String,
    t: usize,
    c: usize,
    h: usize,
    w: usize,
}

#[derive(Serialize)]
struct CheckResult {
    name: &'static str,
    pass: bool,
    detail: String,
}

#[derive(Serialize)]
struct Losses {
    triplet: f64,
    cross_entropy: f64,
}

#[derive(Serialize)]
struct NetCheckReport {
    samples: usize,
    identities: usize,
    frames_per_sample: Vec<usize>,
    weights: String,
    stage_shapes: Vec<StageShape>,
    checks: Vec<CheckResult>,
    losses: Losses,
}

pub fn net_check(job: NetCheckJob, out: &Path) -> Result<()> {
    let input = require_input(&job.input)?;
    let stacks = discover_stacks(input)?;
    let (samples, labels) = build_batch(&stacks)?;
    let identities = labels.iter().copied().max().unwrap_or(0) + 1;
    ensure!(
        job.model.classes >= identities,
        "model.classes = {} but the batch has {identities} identities; \
         raise it with --set model.classes={identities}",
        job.model.classes
    );

    let generated = job.weights.is_none();
    let model = match &job.weights {
        Some(path) => Model::load(path, &job.model)
            .with_context(|| format!("loading weights {}", path.display()))?,
        None => Model::seeded(&job.model, job.seed)?,
    };

    let mut checks = Vec::new();

    // 1. stage shapes follow the config arithmetic: stem halves 64 -> 32,
    //    the next two stages halve again, the last keeps 8x8
    let stages = backbone_forward_stages(&samples[0], &model.backbone)?;
    let t0 = samples[0].t;
    let expected: Vec<(usize, usize, usize, usize)> = [32usize, 16, 8, 8]
        .iter()
        .zip(job.model.channels)
        .map(|(&side, ch)| (t0, ch, side, side))
        .collect();
    let got: Vec<(usize, usize, usize, usize)> = stages.iter().map(|s| s.shape()).collect();
    checks.push(CheckResult {
        name: "stage_shapes",
        pass: got == expected,
        detail: format!("got {got:?}, expected {expected:?}"),
    });
    let stage_shapes = stages
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (t, c, h, w) = s.shape();
            StageShape {
                name: if i == 0 { "stem".into() } else { format!("stage{}", i + 1) },
                t,
                c,
                h,
                w,
            }
        })
        .collect();

    // 2. zero dynamics with the loaded weights: feeding any stage a
    //    frame-constant tensor, zeroing conv_c must not change the output
    let first = frame_slice(&samples[0], 0);
    let t1_stages = backbone_forward_stages(&first, &model.backbone)?;
    let mut zd_pass = true;
    let mut zd_detail = String::from("conv_c path exactly zero on frame-constant input");
    for (i, stage) in model.backbone.stages.iter().enumerate() {
        let daml_in = conv2d(&t1_stages[i], &stage.transition)?;
        let constant = repeat_frames(&daml_in, 3);
        let with_c = daml_forward(&constant, &stage.daml)?;
        let mut no_c = stage.daml.clone();
        no_c.conv_c.weights.iter_mut().for_each(|w| *w = 0.0);
        let without_c = daml_forward(&constant, &no_c)?;
        if with_c != without_c {
            zd_pass = false;
            zd_detail = format!("stage{} output changed when conv_c was removed", i + 2);
            break;
        }
    }
    checks.push(CheckResult {
        name: "zero_dynamics",
        pass: zd_pass,
        detail: zd_detail,
    });

    // 3. frame-permutation invariance of the set pooling
    let features = backbone_forward(&samples[0], &model.backbone)?;
    let pooled = temporal_pool(&features)?;
    let perm_pass = temporal_pool(&rotate_frames(&features))? == pooled;
    checks.push(CheckResult {
        name: "temporal_pool_permutation",
        pass: perm_pass,
        detail: "frame rotation leaves the pooled map bit-identical".into(),
    });

    // 4. embeddings, logits and losses all finite
    let set = embed_batch(&samples, &labels, &model)?;
    let logits = set.logits.clone().expect("embed_batch fills logits");
    let triplet = triplet_loss(&set, job.margin)?;
    let ce = cross_entropy(&logits, &labels)?;
    let finite = triplet.is_finite()
        && ce.is_finite()
        && set
            .embeddings
            .iter()
            .flatten()
            .flatten()
            .all(|v| v.is_finite())
        && logits.iter().flatten().all(|v| v.is_finite());
    checks.push(CheckResult {
        name: "finite_outputs",
        pass: finite,
        detail: format!("triplet = {triplet}, cross_entropy = {ce}"),
    });

    fs::create_dir_all(out)?;
    write_json(&out.join("config.json"), &job)?;
    let weights_name = if generated {
        model.save(&out.join("weights.bin"))?;
        "weights.bin".to_string()
    } else {
        job.weights.as_ref().expect("checked above").display().to_string()
    };
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    write_json(
        &out.join("report.json"),
        &NetCheckReport {
            samples: samples.len(),
            identities,
            frames_per_sample: samples.iter().map(|s| s.t).collect(),
            weights: weights_name,
            stage_shapes,
            checks,
            losses: Losses {
                triplet,
                cross_entropy: ce,
            },
        },
    )?;
    if !failed.is_empty() {
        bail!("invariant checks failed: {}", failed.join(", "));
    }
    Ok(())
}

/// PNGs directly in `dir` form one stack; otherwise each subdirectory with
/// PNGs is a stack. Stacks and frames are ordered by name.
fn discover_stacks(dir: &Path) -> Result<Vec<(String, Vec<PathBuf>)>> {
    let list_pngs = |d: &Path| -> Result<Vec<PathBuf>> {
        let mut files: Vec<PathBuf> = fs::read_dir(d)
            .with_context(|| format!("reading {}", d.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "png"))
            .collect();
        files.sort();
        Ok(files)
    };
    let own = list_pngs(dir)?;
    if !own.is_empty() {
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "stack".into());
        return Ok(vec![(name, own)]);
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    let mut stacks = Vec::new();
    for sub in subdirs {
        let files = list_pngs(&sub)?;
        if !files.is_empty() {
            stacks.push((sub.file_name().unwrap().to_string_lossy().into_owned(), files));
        }
    }
    ensure!(!stacks.is_empty(), "no PNG frames found under {}", dir.display());
    Ok(stacks)
}

/// One stack splits into four single-identity-pair samples; several stacks
/// split into two samples each, labeled by stack. Either way the batch has
/// at least two identities with two samples apiece, so both losses apply.
fn build_batch(stacks: &[(String, Vec<PathBuf>)]) -> Result<(Vec<Tensor>, Vec<usize>)> {
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    if stacks.len() == 1 {
        let (name, files) = &stacks[0];
        ensure!(
            files.len() >= 4,
            "a single stack needs at least 4 frames to form a two-identity batch; {name} has {}",
            files.len()
        );
        let frames = load_frames(files)?;
        for (i, chunk) in split_ranges(frames.len(), 4).into_iter().enumerate() {
            samples.push(stack_tensor(&frames[chunk])?);
            labels.push(i / 2);
        }
    } else {
        for (label, (name, files)) in stacks.iter().enumerate() {
            ensure!(
                files.len() >= 2,
                "stack {name} needs at least 2 frames to split into samples, has {}",
                files.len()
            );
            let frames = load_frames(files)?;
            for chunk in split_ranges(frames.len(), 2) {
                samples.push(stack_tensor(&frames[chunk])?);
                labels.push(label);
            }
        }
    }
    Ok((samples, labels))
}

/// `n` items into `k` contiguous ranges, sizes as equal as possible.
fn split_ranges(n: usize, k: usize) -> Vec<std::ops::Range<usize>> {
    let base = n / k;
    let extra = n % k;
    let mut start = 0;
    (0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let range = start..start + len;
            start += len;
            range
        })
        .collect()
}

/// Gray PNG frames scaled to [0, 1], checked to the 64x64 input contract.
fn load_frames(files: &[PathBuf]) -> Result<Vec<Vec<f32>>> {
    let mut frames = Vec::with_capacity(files.len());
    for file in files {
        let (w, h, gray) = load_gray(file)?;
        ensure!(
            w == 64 && h == 64,
            "{}: network input must be 64x64 pixels, got {w}x{h}",
            file.display()
        );
        frames.push(gray.into_iter().map(|v| v as f32).collect());
    }
    Ok(frames)
}

/// (T, 3, 64, 64) tensor with the gray plane replicated across channels,
/// matching the projection module's RGB convention.
fn stack_tensor(frames: &[Vec<f32>]) -> Result<Tensor> {
    let mut data = Vec::with_capacity(frames.len() * 3 * 64 * 64);
    for frame in frames {
        for _ in 0..3 {
            data.extend_from_slice(frame);
        }
    }
    Ok(Tensor::from_data(frames.len(), 3, 64, 64, data)?)
}

fn frame_slice(x: &Tensor, t: usize) -> Tensor {
    Tensor::from_data(1, x.c, x.h, x.w, x.frame(t).to_vec()).expect("frame is well-formed")
}

fn repeat_frames(x: &Tensor, times: usize) -> Tensor {
    Tensor::from_data(times * x.t, x.c, x.h, x.w, x.data.repeat(times))
        .expect("repetition preserves well-formedness")
}

fn rotate_frames(x: &Tensor) -> Tensor {
    let per = x.c * x.h * x.w;
    let mut data = x.data[per * (x.t - 1)..].to_vec();
    data.extend_from_slice(&x.data[..per * (x.t - 1)]);
    Tensor::from_data(x.t, x.c, x.h, x.w, data).expect("rotation preserves well-formedness")
}
