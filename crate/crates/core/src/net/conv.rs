//! Spatial 2D convolution and the depthwise temporal convolution that
//! together form the pseudo-3D factorization.

use rand::Rng;

use crate::error::{Error, Result};
use crate::net::tensor::Tensor;

/// Cross-correlation layer applied independently to every frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2dSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    /// (kh, kw)
    pub kernel: (usize, usize),
    pub stride: usize,
    pub padding: usize,
    /// out x in x kh x kw, row-major.
    pub weights: Vec<f32>,
    /// One per output channel, or empty for a bias-free layer.
    pub bias: Vec<f32>,
}

impl Conv2dSpec {
    pub fn validate(&self, path: &str) -> Result<()> {
        let expect = self.out_channels * self.in_channels * self.kernel.0 * self.kernel.1;
        if self.weights.len() != expect {
            return Err(Error::shape(
                path,
                format!("weights length {} != {expect}", self.weights.len()),
            ));
        }
        if !self.bias.is_empty() && self.bias.len() != self.out_channels {
            return Err(Error::shape(
                path,
                format!("bias length {} != {}", self.bias.len(), self.out_channels),
            ));
        }
        if self.stride == 0 || self.kernel.0 == 0 || self.kernel.1 == 0 {
            return Err(Error::shape(path, "kernel and stride must be nonzero"));
        }
        Ok(())
    }

    /// 1x1 stride-1 conv passing each channel through unchanged.
    pub fn identity(channels: usize) -> Self {
        let mut weights = vec![0.0; channels * channels];
        for c in 0..channels {
            weights[c * channels + c] = 1.0;
        }
        Conv2dSpec {
            in_channels: channels,
            out_channels: channels,
            kernel: (1, 1),
            stride: 1,
            padding: 0,
            weights,
            bias: Vec::new(),
        }
    }

    pub fn zero(in_channels: usize, out_channels: usize, kernel: (usize, usize)) -> Self {
        Conv2dSpec {
            in_channels,
            out_channels,
            kernel,
            stride: 1,
            padding: (kernel.0 - 1) / 2,
            weights: vec![0.0; out_channels * in_channels * kernel.0 * kernel.1],
            bias: vec![0.0; out_channels],
        }
    }

    /// Uniform(-s, s) weights with s = 1/sqrt(fan-in), zero bias. `biased`
    /// false leaves the layer bias-free.
    pub fn random<R: Rng>(
        rng: &mut R,
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: usize,
        biased: bool,
    ) -> Self {
        let fan_in = (in_channels * kernel.0 * kernel.1) as f64;
        let s = 1.0 / fan_in.sqrt();
        let weights = (0..out_channels * in_channels * kernel.0 * kernel.1)
            .map(|_| rng.gen_range(-s..s) as f32)
            .collect();
        Conv2dSpec {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            weights,
            bias: if biased { vec![0.0; out_channels] } else { Vec::new() },
        }
    }

    pub fn out_size(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.padding - self.kernel.0) / self.stride + 1,
            (w + 2 * self.padding - self.kernel.1) / self.stride + 1,
        )
    }
}

/// Standard strided cross-correlation with zero padding, per frame.
pub fn conv2d(x: &Tensor, spec: &Conv2dSpec) -> Result<Tensor> {
    spec.validate("conv2d")?;
    if x.c != spec.in_channels {
        return Err(Error::shape(
            "conv2d",
            format!("input has {} channels, spec expects {}", x.c, spec.in_channels),
        ));
    }
    let (kh, kw) = spec.kernel;
    if x.h + 2 * spec.padding < kh || x.w + 2 * spec.padding < kw {
        return Err(Error::shape(
            "conv2d",
            format!("kernel {kh}x{kw} larger than padded input {}x{}", x.h, x.w),
        ));
    }
    let (oh, ow) = spec.out_size(x.h, x.w);
    let mut out = Tensor::zeros(x.t, spec.out_channels, oh, ow);

    for t in 0..x.t {
        for co in 0..spec.out_channels {
            let bias = spec.bias.get(co).copied().unwrap_or(0.0) as f64;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias;
                    for ci in 0..spec.in_channels {
                        let w_base = ((co * spec.in_channels + ci) * kh) * kw;
                        for ky in 0..kh {
                            let iy = (oy * spec.stride + ky) as isize - spec.padding as isize;
                            if iy < 0 || iy >= x.h as isize {
                                continue;
                            }
                            for kx in 0..kw {
                                let ix = (ox * spec.stride + kx) as isize - spec.padding as isize;
                                if ix < 0 || ix >= x.w as isize {
                                    continue;
                                }
                                acc += spec.weights[w_base + ky * kw + kx] as f64
                                    * x.at(t, ci, iy as usize, ix as usize) as f64;
                            }
                        }
                    }
                    let idx = out.idx(t, co, oy, ox);
                    out.data[idx] = acc as f32;
                }
            }
        }
    }
    Ok(out)
}

/// Depthwise 1D convolution along the frame axis with zero padding,
/// the temporal half of a pseudo-3D unit.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalConvSpec {
    pub channels: usize,
    /// Temporal kernel size, odd.
    pub kt: usize,
    /// channels x kt, row-major.
    pub weights: Vec<f32>,
    /// One per channel, or empty.
    pub bias: Vec<f32>,
}

impl TemporalConvSpec {
    pub fn validate(&self, path: &str) -> Result<()> {
        if self.kt.is_multiple_of(2) || self.kt == 0 {
            return Err(Error::shape(path, format!("kt {} must be odd", self.kt)));
        }
        if self.weights.len() != self.channels * self.kt {
            return Err(Error::shape(
                path,
                format!(
                    "weights length {} != {}",
                    self.weights.len(),
                    self.channels * self.kt
                ),
            ));
        }
        if !self.bias.is_empty() && self.bias.len() != self.channels {
            return Err(Error::shape(
                path,
                format!("bias length {} != {}", self.bias.len(), self.channels),
            ));
        }
        Ok(())
    }

    /// Passes every frame through unchanged (centre tap 1).
    pub fn identity(channels: usize, kt: usize) -> Self {
        let mut weights = vec![0.0; channels * kt];
        for c in 0..channels {
            weights[c * kt + kt / 2] = 1.0;
        }
        TemporalConvSpec {
            channels,
            kt,
            weights,
            bias: Vec::new(),
        }
    }

    pub fn random<R: Rng>(rng: &mut R, channels: usize, kt: usize) -> Self {
        let s = 1.0 / (kt as f64).sqrt();
        TemporalConvSpec {
            channels,
            kt,
            weights: (0..channels * kt).map(|_| rng.gen_range(-s..s) as f32).collect(),
            bias: vec![0.0; channels],
        }
    }
}

/// out[t] = Σ_k w[k] · x[t + k − kt/2], frames outside [0, T) read as zero.
pub fn temporal_conv(x: &Tensor, spec: &TemporalConvSpec) -> Result<Tensor> {
    spec.validate("temporal_conv")?;
    if x.c != spec.channels {
        return Err(Error::shape(
            "temporal_conv",
            format!("input has {} channels, spec expects {}", x.c, spec.channels),
        ));
    }
    let half = (spec.kt / 2) as isize;
    let mut out = Tensor::zeros(x.t, x.c, x.h, x.w);
    for t in 0..x.t {
        for c in 0..x.c {
            let bias = spec.bias.get(c).copied().unwrap_or(0.0) as f64;
            for y in 0..x.h {
                for xx in 0..x.w {
                    let mut acc = bias;
                    for k in 0..spec.kt {
                        let src = t as isize + k as isize - half;
                        if src < 0 || src >= x.t as isize {
                            continue;
                        }
                        acc += spec.weights[c * spec.kt + k] as f64
                            * x.at(src as usize, c, y, xx) as f64;
                    }
                    let idx = out.idx(t, c, y, xx);
                    out.data[idx] = acc as f32;
                }
            }
        }
    }
    Ok(out)
}
