//! Forward-only gait network: residual stem, dynamic-augmentation stages,
//! set pooling, strip embeddings, and the two losses. No training machinery;
//! parameters come from fixture files or seeded draws.

pub mod backbone;
pub mod conv;
pub mod daml;
pub mod loss;
pub mod pool;
pub mod tensor;
pub mod weights;

pub use backbone::{
    backbone_forward, backbone_forward_stages, BackboneParams, ResidualStem, Stage,
    DEFAULT_CHANNELS,
};
pub use conv::{conv2d, temporal_conv, Conv2dSpec, TemporalConvSpec};
pub use daml::{daml_forward, DamlParams};
pub use loss::{cross_entropy, triplet_loss};
pub use pool::{horizontal_pool, temporal_pool, ClassifierHead, EmbeddingSet, StripProjection};
pub use tensor::{add, mean_over_frames, relu, sub_broadcast, Tensor};
pub use weights::WeightStore;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

/// Architecture hyperparameters; weights live in [`Model`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Stage widths, stem first.
    pub channels: [usize; 4],
    /// Horizontal strips in the pooled map.
    pub strips: usize,
    /// Embedding dimension per strip.
    pub embed_dim: usize,
    /// Identity classes the classifier head scores.
    pub classes: usize,
    /// Block applications per dynamic-augmentation stage, 1 or 2.
    pub daml_layers: usize,
    /// Feed the mean-subtracted map to both dynamic-branch kernels too.
    pub multi_kernel_on_centered: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            channels: DEFAULT_CHANNELS,
            strips: 8,
            embed_dim: 16,
            classes: 4,
            daml_layers: 1,
            multi_kernel_on_centered: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels.contains(&0) {
            return Err(Error::InvalidParam("model channels must be nonzero".into()));
        }
        if self.strips == 0 || self.embed_dim == 0 || self.classes == 0 {
            return Err(Error::InvalidParam(
                "strips, embed_dim and classes must be nonzero".into(),
            ));
        }
        if !(self.daml_layers == 1 || self.daml_layers == 2) {
            return Err(Error::InvalidParam(format!(
                "daml_layers must be 1 or 2, got {}",
                self.daml_layers
            )));
        }
        Ok(())
    }
}

/// Complete parameter set: backbone, strip projections, classifier head.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub backbone: BackboneParams,
    pub strip_proj: StripProjection,
    pub head: ClassifierHead,
}

impl Model {
    /// Seeded random parameters for the given architecture.
    pub fn random<R: Rng>(cfg: &ModelConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut backbone = BackboneParams::random(rng, cfg.channels, cfg.daml_layers);
        for stage in &mut backbone.stages {
            stage.daml.multi_kernel_on_centered = cfg.multi_kernel_on_centered;
        }
        let strip_proj = StripProjection::random(rng, cfg.strips, cfg.channels[3], cfg.embed_dim);
        let head = ClassifierHead::random(rng, cfg.classes, cfg.strips * cfg.embed_dim);
        Ok(Model {
            config: cfg.clone(),
            backbone,
            strip_proj,
            head,
        })
    }

    /// Random parameters drawn from a fixed-seed generator.
    pub fn seeded(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        Self::random(cfg, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_store()?.save(path)
    }

    /// Rebuilds a model from a fixture. The config fixes the architecture;
    /// the fixture must contain exactly the tensors that architecture needs.
    pub fn load(path: &Path, cfg: &ModelConfig) -> Result<Self> {
        let store = WeightStore::load(path)?;
        Self::from_store(&store, cfg)
    }

    pub fn to_store(&self) -> Result<WeightStore> {
        let mut store = WeightStore::new();
        put_conv(&mut store, "stem.conv1", &self.backbone.stem.conv1)?;
        put_conv(&mut store, "stem.conv2", &self.backbone.stem.conv2)?;
        put_conv(&mut store, "stem.proj", &self.backbone.stem.proj)?;
        for (i, stage) in self.backbone.stages.iter().enumerate() {
            let p = format!("stage{}", i + 2);
            put_conv(&mut store, &format!("{p}.transition"), &stage.transition)?;
            put_conv(&mut store, &format!("{p}.daml.conv_a"), &stage.daml.conv_a)?;
            put_conv(&mut store, &format!("{p}.daml.conv_b"), &stage.daml.conv_b)?;
            put_conv(&mut store, &format!("{p}.daml.conv_c"), &stage.daml.conv_c)?;
            put_conv(&mut store, &format!("{p}.daml.conv_s"), &stage.daml.conv_s)?;
            let t = &stage.daml.temporal;
            store.insert(
                &format!("{p}.daml.temporal.weight"),
                &[t.channels, t.kt],
                t.weights.clone(),
            )?;
            if !t.bias.is_empty() {
                store.insert(&format!("{p}.daml.temporal.bias"), &[t.channels], t.bias.clone())?;
            }
        }
        store.insert(
            "hpm.weight",
            &[self.strip_proj.strips, self.strip_proj.embed_dim, self.strip_proj.in_channels],
            self.strip_proj.weights.clone(),
        )?;
        store.insert(
            "hpm.bias",
            &[self.strip_proj.strips, self.strip_proj.embed_dim],
            self.strip_proj.bias.clone(),
        )?;
        store.insert(
            "head.weight",
            &[self.head.classes, self.head.in_dim],
            self.head.weights.clone(),
        )?;
        store.insert("head.bias", &[self.head.classes], self.head.bias.clone())?;
        Ok(store)
    }

    pub fn from_store(store: &WeightStore, cfg: &ModelConfig) -> Result<Self> {
        // geometry skeleton; every tensor below is overwritten from the store
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut model = Model::random(cfg, &mut rng)?;
        let mut used = 0usize;
        take_conv(store, "stem.conv1", &mut model.backbone.stem.conv1, &mut used)?;
        take_conv(store, "stem.conv2", &mut model.backbone.stem.conv2, &mut used)?;
        take_conv(store, "stem.proj", &mut model.backbone.stem.proj, &mut used)?;
        for (i, stage) in model.backbone.stages.iter_mut().enumerate() {
            let p = format!("stage{}", i + 2);
            take_conv(store, &format!("{p}.transition"), &mut stage.transition, &mut used)?;
            take_conv(store, &format!("{p}.daml.conv_a"), &mut stage.daml.conv_a, &mut used)?;
            take_conv(store, &format!("{p}.daml.conv_b"), &mut stage.daml.conv_b, &mut used)?;
            take_conv(store, &format!("{p}.daml.conv_c"), &mut stage.daml.conv_c, &mut used)?;
            take_conv(store, &format!("{p}.daml.conv_s"), &mut stage.daml.conv_s, &mut used)?;
            let t = &mut stage.daml.temporal;
            t.weights = store
                .get(&format!("{p}.daml.temporal.weight"), &[t.channels, t.kt])?
                .to_vec();
            used += 1;
            if !t.bias.is_empty() {
                t.bias = store.get(&format!("{p}.daml.temporal.bias"), &[t.channels])?.to_vec();
                used += 1;
            }
        }
        let sp = &mut model.strip_proj;
        sp.weights = store
            .get("hpm.weight", &[sp.strips, sp.embed_dim, sp.in_channels])?
            .to_vec();
        sp.bias = store.get("hpm.bias", &[sp.strips, sp.embed_dim])?.to_vec();
        model.head.weights = store
            .get("head.weight", &[model.head.classes, model.head.in_dim])?
            .to_vec();
        model.head.bias = store.get("head.bias", &[model.head.classes])?.to_vec();
        used += 4;
        if used != store.len() {
            return Err(Error::InvalidParam(format!(
                "weight fixture holds {} tensors but this architecture uses {used}",
                store.len()
            )));
        }
        model.backbone.validate()?;
        Ok(model)
    }
}

fn put_conv(store: &mut WeightStore, prefix: &str, spec: &Conv2dSpec) -> Result<()> {
    store.insert(
        &format!("{prefix}.weight"),
        &[spec.out_channels, spec.in_channels, spec.kernel.0, spec.kernel.1],
        spec.weights.clone(),
    )?;
    if !spec.bias.is_empty() {
        store.insert(&format!("{prefix}.bias"), &[spec.out_channels], spec.bias.clone())?;
    }
    Ok(())
}

fn take_conv(store: &WeightStore, prefix: &str, spec: &mut Conv2dSpec, used: &mut usize) -> Result<()> {
    spec.weights = store
        .get(
            &format!("{prefix}.weight"),
            &[spec.out_channels, spec.in_channels, spec.kernel.0, spec.kernel.1],
        )?
        .to_vec();
    *used += 1;
    if !spec.bias.is_empty() {
        spec.bias = store.get(&format!("{prefix}.bias"), &[spec.out_channels])?.to_vec();
        *used += 1;
    }
    Ok(())
}

/// Runs every sample through backbone, frame pooling and strip embedding,
/// then scores the batch with the classifier head. Samples are (T, 3, 64, 64)
/// tensors; labels are identity class indices.
pub fn embed_batch(samples: &[Tensor], labels: &[usize], model: &Model) -> Result<EmbeddingSet> {
    if samples.len() != labels.len() {
        return Err(Error::shape(
            "embed_batch",
            format!("{} samples but {} labels", samples.len(), labels.len()),
        ));
    }
    if samples.is_empty() {
        return Err(Error::shape("embed_batch", "empty batch"));
    }
    let mut set = EmbeddingSet::new(model.strip_proj.strips, model.strip_proj.embed_dim);
    for (sample, &label) in samples.iter().zip(labels) {
        let features = backbone_forward(sample, &model.backbone)?;
        let pooled = temporal_pool(&features)?;
        let strips = horizontal_pool(&pooled, &model.strip_proj)?;
        set.push(strips, label)?;
    }
    set.logits = Some(model.head.logits(&set)?);
    Ok(set)
}
