//! Dynamic-augmentation residual block.
//!
//! The block adds two branches onto the input skip: a dynamic branch of two
//! differently sized convolutions plus a convolution over the frame-mean-
//! subtracted map, and a static branch of one convolution. The sum then
//! passes through a depthwise temporal convolution (the pseudo-3D step).
//! For input constant over frames the mean-subtracted map is exactly zero,
//! so the conv_c path contributes nothing: motion is what it responds to.

use rand::Rng;

use crate::error::{Error, Result};
use crate::net::conv::{conv2d, temporal_conv, Conv2dSpec, TemporalConvSpec};
use crate::net::tensor::{add, mean_over_frames, sub_broadcast, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct DamlParams {
    /// Dynamic branch, larger kernel (3x3 by default).
    pub conv_a: Conv2dSpec,
    /// Dynamic branch, smaller kernel (1x1 by default).
    pub conv_b: Conv2dSpec,
    /// Dynamic branch on the mean-subtracted map; must be bias-free so the
    /// zero-dynamics invariant holds exactly.
    pub conv_c: Conv2dSpec,
    /// Static branch.
    pub conv_s: Conv2dSpec,
    /// Shared temporal convolution after the branch sum.
    pub temporal: TemporalConvSpec,
    /// 1 applies the block once, 2 repeats it (parameters shared).
    pub layers: usize,
    /// Alternative reading of the dynamic branch: conv_a and conv_b also
    /// take the mean-subtracted map instead of the raw input.
    pub multi_kernel_on_centered: bool,
}

impl DamlParams {
    pub fn validate(&self) -> Result<()> {
        let c = self.conv_a.in_channels;
        for (name, conv) in [
            ("conv_a", &self.conv_a),
            ("conv_b", &self.conv_b),
            ("conv_c", &self.conv_c),
            ("conv_s", &self.conv_s),
        ] {
            conv.validate(&format!("daml.{name}"))?;
            if conv.in_channels != c || conv.out_channels != c {
                return Err(Error::shape(
                    format!("daml.{name}"),
                    format!(
                        "block convs must map {c}->{c} channels, got {}->{}",
                        conv.in_channels, conv.out_channels
                    ),
                ));
            }
            // spatial shape must survive so the skip sum lines up
            if conv.stride != 1
                || 2 * conv.padding + 1 != conv.kernel.0
                || 2 * conv.padding + 1 != conv.kernel.1
            {
                return Err(Error::shape(
                    format!("daml.{name}"),
                    "conv must preserve spatial shape (stride 1, same padding)",
                ));
            }
        }
        if !self.conv_c.bias.iter().all(|&b| b == 0.0) {
            return Err(Error::shape(
                "daml.conv_c",
                "must be bias-free: a bias would break the zero-dynamics invariant",
            ));
        }
        self.temporal.validate("daml.temporal")?;
        if self.temporal.channels != c {
            return Err(Error::shape(
                "daml.temporal",
                format!("temporal channels {} != {c}", self.temporal.channels),
            ));
        }
        if !(self.layers == 1 || self.layers == 2) {
            return Err(Error::shape(
                "daml.layers",
                format!("layers must be 1 or 2, got {}", self.layers),
            ));
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.conv_a.in_channels
    }

    /// Random draw: 3x3 / 1x1 dynamic pair, bias-free conv_c, kt = 3.
    pub fn random<R: Rng>(rng: &mut R, channels: usize, layers: usize) -> Self {
        DamlParams {
            conv_a: Conv2dSpec::random(rng, channels, channels, (3, 3), 1, 1, true),
            conv_b: Conv2dSpec::random(rng, channels, channels, (1, 1), 1, 0, true),
            conv_c: Conv2dSpec::random(rng, channels, channels, (3, 3), 1, 1, false),
            conv_s: Conv2dSpec::random(rng, channels, channels, (3, 3), 1, 1, true),
            temporal: TemporalConvSpec::random(rng, channels, 3),
            layers,
            multi_kernel_on_centered: false,
        }
    }
}

fn at_path(e: Error, outer: &str) -> Error {
    match e {
        Error::Shape { path, msg } => Error::Shape {
            path: format!("{outer}.{path}"),
            msg,
        },
        other => other,
    }
}

fn one_layer(x: &Tensor, p: &DamlParams) -> Result<Tensor> {
    let mean = mean_over_frames(x).map_err(|e| at_path(e, "daml"))?;
    let centered = sub_broadcast(x, &mean).map_err(|e| at_path(e, "daml"))?;

    let (a_in, b_in) = if p.multi_kernel_on_centered {
        (&centered, &centered)
    } else {
        (x, x)
    };
    let dyn_a = conv2d(a_in, &p.conv_a).map_err(|e| at_path(e, "daml.conv_a"))?;
    let dyn_b = conv2d(b_in, &p.conv_b).map_err(|e| at_path(e, "daml.conv_b"))?;
    let dyn_c = conv2d(&centered, &p.conv_c).map_err(|e| at_path(e, "daml.conv_c"))?;
    let stat = conv2d(x, &p.conv_s).map_err(|e| at_path(e, "daml.conv_s"))?;

    let dynamic = add(&add(&dyn_a, &dyn_b)?, &dyn_c)?;
    let pre = add(&add(x, &dynamic)?, &stat)?;
    temporal_conv(&pre, &p.temporal).map_err(|e| at_path(e, "daml.temporal"))
}

/// Forward pass; `layers = 2` applies the whole block twice with shared
/// parameters.
pub fn daml_forward(x: &Tensor, p: &DamlParams) -> Result<Tensor> {
    p.validate()?;
    if x.c != p.channels() {
        return Err(Error::shape(
            "daml",
            format!("input has {} channels, block expects {}", x.c, p.channels()),
        ));
    }
    let mut out = one_layer(x, p)?;
    for _ in 1..p.layers {
        out = one_layer(&out, p)?;
    }
    Ok(out)
}
