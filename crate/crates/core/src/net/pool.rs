//! Set pooling over frames and strip-wise embedding of the pooled map.

use rand::Rng;

use crate::error::{Error, Result};
use crate::net::tensor::Tensor;

/// Elementwise maximum over the frame dimension, shape (1, C, H, W).
/// Order-free, so any frame permutation pools identically.
pub fn temporal_pool(x: &Tensor) -> Result<Tensor> {
    if x.t == 0 {
        return Err(Error::shape("temporal_pool", "zero frames"));
    }
    let per_frame = x.c * x.h * x.w;
    let mut data = x.data[..per_frame].to_vec();
    for t in 1..x.t {
        for (slot, &v) in data.iter_mut().zip(&x.data[t * per_frame..(t + 1) * per_frame]) {
            if v > *slot {
                *slot = v;
            }
        }
    }
    Ok(Tensor {
        t: 1,
        c: x.c,
        h: x.h,
        w: x.w,
        data,
    })
}

/// Per-strip affine maps turning pooled C-vectors into E-dimensional
/// embeddings. Each of the S strips owns its own map.
#[derive(Debug, Clone, PartialEq)]
pub struct StripProjection {
    pub strips: usize,
    pub in_channels: usize,
    pub embed_dim: usize,
    /// strips x embed_dim x in_channels, row-major.
    pub weights: Vec<f32>,
    /// strips x embed_dim, row-major.
    pub bias: Vec<f32>,
}

impl StripProjection {
    pub fn validate(&self) -> Result<()> {
        if self.strips == 0 || self.embed_dim == 0 || self.in_channels == 0 {
            return Err(Error::shape("strip_projection", "zero dimension"));
        }
        if self.weights.len() != self.strips * self.embed_dim * self.in_channels {
            return Err(Error::shape(
                "strip_projection",
                format!(
                    "weights length {} != {}x{}x{}",
                    self.weights.len(),
                    self.strips,
                    self.embed_dim,
                    self.in_channels
                ),
            ));
        }
        if self.bias.len() != self.strips * self.embed_dim {
            return Err(Error::shape(
                "strip_projection",
                format!(
                    "bias length {} != {}x{}",
                    self.bias.len(),
                    self.strips,
                    self.embed_dim
                ),
            ));
        }
        Ok(())
    }

    pub fn random<R: Rng>(rng: &mut R, strips: usize, in_channels: usize, embed_dim: usize) -> Self {
        let s = 1.0 / (in_channels as f64).sqrt();
        StripProjection {
            strips,
            in_channels,
            embed_dim,
            weights: (0..strips * embed_dim * in_channels)
                .map(|_| rng.gen_range(-s..s) as f32)
                .collect(),
            bias: vec![0.0; strips * embed_dim],
        }
    }
}

/// Splits the pooled map into S horizontal strips, pools each strip to a
/// C-vector by max + mean over its spatial extent, and applies that strip's
/// affine map. Returns S embedding vectors of length E.
pub fn horizontal_pool(x: &Tensor, proj: &StripProjection) -> Result<Vec<Vec<f32>>> {
    proj.validate()?;
    if x.t != 1 {
        return Err(Error::shape(
            "horizontal_pool",
            format!("expects a frame-pooled (1, C, H, W) tensor, got T = {}", x.t),
        ));
    }
    if x.c != proj.in_channels {
        return Err(Error::shape(
            "horizontal_pool",
            format!("input has {} channels, projection expects {}", x.c, proj.in_channels),
        ));
    }
    if !x.h.is_multiple_of(proj.strips) {
        return Err(Error::shape(
            "horizontal_pool",
            format!("height {} not divisible into {} strips", x.h, proj.strips),
        ));
    }
    let strip_h = x.h / proj.strips;
    let mut out = Vec::with_capacity(proj.strips);
    for s in 0..proj.strips {
        // pooled strip descriptor: max + mean per channel
        let mut pooled = Vec::with_capacity(x.c);
        for c in 0..x.c {
            let mut max = f32::NEG_INFINITY;
            let mut sum = 0.0f64;
            for y in s * strip_h..(s + 1) * strip_h {
                for xx in 0..x.w {
                    let v = x.at(0, c, y, xx);
                    max = max.max(v);
                    sum += v as f64;
                }
            }
            let mean = sum / (strip_h * x.w) as f64;
            pooled.push(max as f64 + mean);
        }
        let mut embed = Vec::with_capacity(proj.embed_dim);
        for j in 0..proj.embed_dim {
            let mut acc = proj.bias[s * proj.embed_dim + j] as f64;
            let base = (s * proj.embed_dim + j) * proj.in_channels;
            for (c, &p) in pooled.iter().enumerate() {
                acc += proj.weights[base + c] as f64 * p;
            }
            embed.push(acc as f32);
        }
        out.push(embed);
    }
    Ok(out)
}

/// Embeddings for a batch of samples: one vector per (sample, strip), plus
/// identity labels and optionally classifier logits.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub strips: usize,
    pub dim: usize,
    /// embeddings[sample][strip] has length `dim`.
    pub embeddings: Vec<Vec<Vec<f32>>>,
    /// Identity class index per sample.
    pub labels: Vec<usize>,
    /// Per-sample per-class scores, once a classifier head has run.
    pub logits: Option<Vec<Vec<f64>>>,
}

impl EmbeddingSet {
    pub fn new(strips: usize, dim: usize) -> Self {
        EmbeddingSet {
            strips,
            dim,
            embeddings: Vec::new(),
            labels: Vec::new(),
            logits: None,
        }
    }

    pub fn push(&mut self, strips: Vec<Vec<f32>>, label: usize) -> Result<()> {
        if strips.len() != self.strips || strips.iter().any(|v| v.len() != self.dim) {
            return Err(Error::shape(
                "embedding_set",
                format!("expected {} strips of dim {}", self.strips, self.dim),
            ));
        }
        self.embeddings.push(strips);
        self.labels.push(label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    /// Sample embeddings concatenated across strips, length strips x dim.
    pub fn concatenated(&self, sample: usize) -> Vec<f32> {
        self.embeddings[sample]
            .iter()
            .flat_map(|v| v.iter().copied())
            .collect()
    }
}

/// Affine map from concatenated strip embeddings to per-identity scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    pub classes: usize,
    pub in_dim: usize,
    /// classes x in_dim, row-major.
    pub weights: Vec<f32>,
    /// One per class.
    pub bias: Vec<f32>,
}

impl ClassifierHead {
    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.classes * self.in_dim {
            return Err(Error::shape(
                "classifier_head",
                format!(
                    "weights length {} != {}x{}",
                    self.weights.len(),
                    self.classes,
                    self.in_dim
                ),
            ));
        }
        if self.bias.len() != self.classes {
            return Err(Error::shape(
                "classifier_head",
                format!("bias length {} != {}", self.bias.len(), self.classes),
            ));
        }
        Ok(())
    }

    pub fn random<R: Rng>(rng: &mut R, classes: usize, in_dim: usize) -> Self {
        let s = 1.0 / (in_dim as f64).sqrt();
        ClassifierHead {
            classes,
            in_dim,
            weights: (0..classes * in_dim).map(|_| rng.gen_range(-s..s) as f32).collect(),
            bias: vec![0.0; classes],
        }
    }

    /// Scores every sample of the set; stores nothing.
    pub fn logits(&self, set: &EmbeddingSet) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        if set.strips * set.dim != self.in_dim {
            return Err(Error::shape(
                "classifier_head",
                format!(
                    "embeddings are {}x{} = {}, head expects {}",
                    set.strips,
                    set.dim,
                    set.strips * set.dim,
                    self.in_dim
                ),
            ));
        }
        let mut out = Vec::with_capacity(set.len());
        for sample in 0..set.len() {
            let flat = set.concatenated(sample);
            let row = (0..self.classes)
                .map(|k| {
                    let mut acc = self.bias[k] as f64;
                    for (i, &v) in flat.iter().enumerate() {
                        acc += self.weights[k * self.in_dim + i] as f64 * v as f64;
                    }
                    acc
                })
                .collect();
            out.push(row);
        }
        Ok(out)
    }
}
