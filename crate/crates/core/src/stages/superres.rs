use super::{check_superres_inputs, NovelFrame, Provenance, SuperResStage};
use crate::error::Result;
use crate::frame::FrameBuffer;

/// Keys cubic convolution kernel with `a = -0.5`.
fn cubic(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        ((A + 2.0) * t - (A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((A * t - 5.0 * A) * t + 8.0 * A) * t - 4.0 * A
    } else {
        0.0
    }
}

/// Source taps and weights for each of the `2 * len` output samples, with
/// pixel centers aligned (`src = (dst + 0.5) / 2 - 0.5`) and edge clamping.
fn taps(len: usize) -> Vec<([usize; 4], [f64; 4])> {
    (0..2 * len)
        .map(|dst| {
            let src = (dst as f64 + 0.5) / 2.0 - 0.5;
            let base = src.floor();
            let frac = src - base;
            let mut idx = [0; 4];
            let mut w = [0.0; 4];
            for k in 0..4 {
                let offset = k as f64 - 1.0;
                let i = (base + offset).clamp(0.0, len as f64 - 1.0);
                idx[k] = i as usize;
                w[k] = cubic(frac - offset);
            }
            (idx, w)
        })
        .collect()
}

/// Separable bicubic 2x upscaling.
pub fn bicubic_upscale_2x(src: &FrameBuffer) -> FrameBuffer {
    let (w, h) = src.dims();
    let cols = taps(w);
    let rows = taps(h);

    // Horizontal pass: h x 2w.
    let mut tmp = vec![0.0; h * 2 * w * 3];
    let data = src.data();
    for y in 0..h {
        for (x, (idx, wt)) in cols.iter().enumerate() {
            for c in 0..3 {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += wt[k] * data[(y * w + idx[k]) * 3 + c];
                }
                tmp[(y * 2 * w + x) * 3 + c] = acc;
            }
        }
    }

    let out_w = 2 * w;
    FrameBuffer::from_fn(out_w, 2 * h, |x, y| {
        let (idx, wt) = &rows[y];
        let mut rgb = [0.0; 3];
        for c in 0..3 {
            for k in 0..4 {
                rgb[c] += wt[k] * tmp[(idx[k] * out_w + x) * 3 + c];
            }
        }
        rgb
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BicubicUpscaler;

impl SuperResStage for BicubicUpscaler {
    fn name(&self) -> &'static str {
        "bicubic"
    }

    fn upscale(&self, frames: &[NovelFrame]) -> Result<Vec<NovelFrame>> {
        check_superres_inputs(frames)?;
        frames
            .iter()
            .map(|f| {
                let views = f.views().iter().map(bicubic_upscale_2x).collect();
                NovelFrame::new(f.timestamp(), views, Provenance::Upscaled)
            })
            .collect()
    }
}
