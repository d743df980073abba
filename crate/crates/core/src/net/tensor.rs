//! Dense (T, C, H, W) tensor and the frame-dimension helpers.

use crate::error::{Error, Result};

/// Frames x channels x height x width, row-major in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub t: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(t: usize, c: usize, h: usize, w: usize) -> Self {
        Tensor {
            t,
            c,
            h,
            w,
            data: vec![0.0; t * c * h * w],
        }
    }

    pub fn from_data(t: usize, c: usize, h: usize, w: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != t * c * h * w {
            return Err(Error::shape(
                "tensor",
                format!(
                    "data length {} does not match {t}x{c}x{h}x{w}",
                    data.len()
                ),
            ));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::shape("tensor", format!("non-finite value {bad}")));
        }
        Ok(Tensor { t, c, h, w, data })
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.t, self.c, self.h, self.w)
    }

    #[inline]
    pub fn idx(&self, t: usize, c: usize, y: usize, x: usize) -> usize {
        ((t * self.c + c) * self.h + y) * self.w + x
    }

    #[inline]
    pub fn at(&self, t: usize, c: usize, y: usize, x: usize) -> f32 {
        self.data[self.idx(t, c, y, x)]
    }

    /// One frame's (C, H, W) slice.
    pub fn frame(&self, t: usize) -> &[f32] {
        let len = self.c * self.h * self.w;
        &self.data[t * len..(t + 1) * len]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

fn same_shape(a: &Tensor, b: &Tensor, path: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            path,
            format!("shape {:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

/// Elementwise sum of two same-shape tensors.
pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape(a, b, "add")?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect();
    Ok(Tensor {
        data,
        ..*a
    })
}

/// Elementwise max(0, x).
pub fn relu(x: &Tensor) -> Tensor {
    Tensor {
        data: x.data.iter().map(|&v| v.max(0.0)).collect(),
        ..*x
    }
}

/// Arithmetic mean over the frame dimension, shape (1, C, H, W).
///
/// Accumulates in f64 so that a stack of identical frames yields a mean
/// bit-equal to the frame itself (the zero-dynamics invariant depends on
/// the subsequent subtraction being exactly zero).
pub fn mean_over_frames(x: &Tensor) -> Result<Tensor> {
    if x.t == 0 {
        return Err(Error::shape("mean_over_frames", "zero frames"));
    }
    let per_frame = x.c * x.h * x.w;
    let mut out = vec![0.0f32; per_frame];
    for (i, slot) in out.iter_mut().enumerate() {
        let mut sum = 0.0f64;
        for t in 0..x.t {
            sum += x.data[t * per_frame + i] as f64;
        }
        *slot = (sum / x.t as f64) as f32;
    }
    Ok(Tensor {
        t: 1,
        c: x.c,
        h: x.h,
        w: x.w,
        data: out,
    })
}

/// x − m with m broadcast over the frame dimension; m must be (1, C, H, W).
pub fn sub_broadcast(x: &Tensor, m: &Tensor) -> Result<Tensor> {
    if m.t != 1 || (m.c, m.h, m.w) != (x.c, x.h, x.w) {
        return Err(Error::shape(
            "sub_broadcast",
            format!("mean shape {:?} does not broadcast over {:?}", m.shape(), x.shape()),
        ));
    }
    let per_frame = x.c * x.h * x.w;
    let mut data = Vec::with_capacity(x.data.len());
    for t in 0..x.t {
        for i in 0..per_frame {
            data.push(x.data[t * per_frame + i] - m.data[i]);
        }
    }
    Ok(Tensor {
        data,
        ..*x
    })
}
