//! Four-stage feature extractor: a 2D residual stem followed by three
//! dynamic-augmentation stages, each entered through a channel-lift /
//! downsample transition convolution.
//!
//! Stage output shapes for (T, 3, 64, 64) input and default widths
//! (16, 32, 64, 128): (T,16,32,32) → (T,32,16,16) → (T,64,8,8) → (T,128,8,8).

use rand::Rng;

use crate::error::{Error, Result};
use crate::net::conv::{conv2d, Conv2dSpec};
use crate::net::daml::{daml_forward, DamlParams};
use crate::net::tensor::{add, relu, Tensor};

/// conv-relu-conv plus a 1x1 strided projection skip; no trailing relu.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualStem {
    pub conv1: Conv2dSpec,
    pub conv2: Conv2dSpec,
    pub proj: Conv2dSpec,
}

impl ResidualStem {
    pub fn validate(&self) -> Result<()> {
        self.conv1.validate("stem.conv1")?;
        self.conv2.validate("stem.conv2")?;
        self.proj.validate("stem.proj")?;
        if self.proj.in_channels != self.conv1.in_channels {
            return Err(Error::shape(
                "stem.proj",
                "skip projection must read the stem input",
            ));
        }
        let c1 = self.conv1.out_channels;
        if self.conv2.in_channels != c1
            || self.conv2.out_channels != c1
            || self.proj.out_channels != c1
        {
            return Err(Error::shape(
                "stem",
                "conv2 and proj must match conv1's output channels",
            ));
        }
        Ok(())
    }

    pub fn random<R: Rng>(rng: &mut R, in_channels: usize, out_channels: usize) -> Self {
        ResidualStem {
            conv1: Conv2dSpec::random(rng, in_channels, out_channels, (3, 3), 2, 1, true),
            conv2: Conv2dSpec::random(rng, out_channels, out_channels, (3, 3), 1, 1, true),
            proj: Conv2dSpec::random(rng, in_channels, out_channels, (1, 1), 2, 0, true),
        }
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let main = conv2d(&relu(&conv2d(x, &self.conv1)?), &self.conv2)?;
        let skip = conv2d(x, &self.proj)?;
        add(&main, &skip)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    /// Channel lift and optional downsample at stage entry.
    pub transition: Conv2dSpec,
    pub daml: DamlParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneParams {
    pub stem: ResidualStem,
    pub stages: Vec<Stage>,
}

/// Default stage widths.
pub const DEFAULT_CHANNELS: [usize; 4] = [16, 32, 64, 128];
/// Transition strides for stages 2 to 4: two downsamples, then none.
const STAGE_STRIDES: [usize; 3] = [2, 2, 1];

impl BackboneParams {
    pub fn validate(&self) -> Result<()> {
        self.stem.validate()?;
        let mut channels = self.stem.conv1.out_channels;
        for (i, stage) in self.stages.iter().enumerate() {
            let path = format!("stage{}", i + 2);
            stage.transition.validate(&format!("{path}.transition"))?;
            if stage.transition.in_channels != channels {
                return Err(Error::shape(
                    format!("{path}.transition"),
                    format!(
                        "expects {} input channels, previous stage emits {channels}",
                        stage.transition.in_channels
                    ),
                ));
            }
            if stage.daml.channels() != stage.transition.out_channels {
                return Err(Error::shape(
                    format!("{path}.daml"),
                    "block channels must match the transition output",
                ));
            }
            stage.daml.validate()?;
            channels = stage.transition.out_channels;
        }
        Ok(())
    }

    /// Output channel count of the final stage.
    pub fn out_channels(&self) -> usize {
        self.stages
            .last()
            .map(|s| s.transition.out_channels)
            .unwrap_or(self.stem.conv1.out_channels)
    }

    /// Random parameters for the given stage widths; `daml_layers` selects
    /// the single- or double-application block variant.
    pub fn random<R: Rng>(rng: &mut R, channels: [usize; 4], daml_layers: usize) -> Self {
        let stem = ResidualStem::random(rng, 3, channels[0]);
        let stages = (0..3)
            .map(|i| Stage {
                transition: Conv2dSpec::random(
                    rng,
                    channels[i],
                    channels[i + 1],
                    (3, 3),
                    STAGE_STRIDES[i],
                    1,
                    true,
                ),
                daml: DamlParams::random(rng, channels[i + 1], daml_layers),
            })
            .collect();
        BackboneParams { stem, stages }
    }
}

/// Forward pass returning every stage output (stem first). The last entry
/// is the backbone output.
pub fn backbone_forward_stages(x: &Tensor, p: &BackboneParams) -> Result<Vec<Tensor>> {
    p.validate()?;
    if x.c != p.stem.conv1.in_channels {
        return Err(Error::shape(
            "backbone",
            format!(
                "input has {} channels, stem expects {}",
                x.c, p.stem.conv1.in_channels
            ),
        ));
    }
    if x.h != 64 || x.w != 64 {
        return Err(Error::shape(
            "backbone",
            format!("input must be 64x64 pixels, got {}x{}", x.h, x.w),
        ));
    }
    let mut outputs = Vec::with_capacity(1 + p.stages.len());
    let mut cur = p.stem.forward(x)?;
    outputs.push(cur.clone());
    for stage in &p.stages {
        cur = daml_forward(&conv2d(&cur, &stage.transition)?, &stage.daml)?;
        outputs.push(cur.clone());
    }
    Ok(outputs)
}

pub fn backbone_forward(x: &Tensor, p: &BackboneParams) -> Result<Tensor> {
    Ok(backbone_forward_stages(x, p)?
        .pop()
        .expect("at least the stem output exists"))
}
