//! Image quality metrics and the visual training objective as an
//! evaluatable quantity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::FrameBuffer;

/// Reported for identical images (and as a ceiling for near-identical ones).
pub const PSNR_CAP_DB: f64 = 99.0;

fn check_dims(a: &FrameBuffer, b: &FrameBuffer) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::invalid(format!(
            "image sizes differ: {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// Mean squared error over all channels.
pub fn mse(a: &FrameBuffer, b: &FrameBuffer) -> Result<f64> {
    check_dims(a, b)?;
    let n = a.data().len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / n as f64)
}

/// Peak signal-to-noise ratio with peak 1.0, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &FrameBuffer, b: &FrameBuffer) -> Result<f64> {
    let e = mse(a, b)?;
    if e == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / e).log10()).min(PSNR_CAP_DB))
}

/// Arithmetic mean of per-frame PSNR.
pub fn stream_psnr(outputs: &[FrameBuffer], references: &[FrameBuffer]) -> Result<f64> {
    if outputs.len() != references.len() {
        return Err(Error::invalid(format!(
            "{} output frames vs {} references",
            outputs.len(),
            references.len()
        )));
    }
    if outputs.is_empty() {
        return Err(Error::invalid("no frames to score"));
    }
    let total = outputs
        .iter()
        .zip(references)
        .map(|(o, r)| psnr(o, r))
        .sum::<Result<f64>>()?;
    Ok(total / outputs.len() as f64)
}

const SSIM_RADIUS: usize = 3;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// Mean structural similarity over 7x7 windows (clipped at the borders),
/// averaged across channels.
pub fn ssim(a: &FrameBuffer, b: &FrameBuffer) -> Result<f64> {
    check_dims(a, b)?;
    let (w, h) = a.dims();
    if w == 0 || h == 0 {
        return Ok(1.0);
    }
    let (da, db) = (a.data(), b.data());
    let mut total = 0.0;
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(SSIM_RADIUS), (y + SSIM_RADIUS).min(h - 1));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(SSIM_RADIUS), (x + SSIM_RADIUS).min(w - 1));
            let n = ((y1 - y0 + 1) * (x1 - x0 + 1)) as f64;
            for c in 0..3 {
                let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for wy in y0..=y1 {
                    for wx in x0..=x1 {
                        let i = (wy * w + wx) * 3 + c;
                        let (p, q) = (da[i], db[i]);
                        sa += p;
                        sb += q;
                        saa += p * p;
                        sbb += q * q;
                        sab += p * q;
                    }
                }
                let (ma, mb) = (sa / n, sb / n);
                let va = (saa / n - ma * ma).max(0.0);
                let vb = (sbb / n - mb * mb).max(0.0);
                let cov = sab / n - ma * mb;
                total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                    / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
            }
        }
    }
    Ok(total / (w * h * 3) as f64)
}

/// Weights of the pixel and perceptual terms.
///
/// `perceptual_impl` names the perceptual term: `none` (always zero) or
/// `ssim` (`(1 - SSIM) / 2`). A learned perceptual network can be added
/// under another name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub lambda_mse: f64,
    pub lambda_perceptual: f64,
    pub perceptual_impl: String,
}

impl LossConfig {
    pub fn new(lambda_mse: f64, lambda_perceptual: f64, perceptual_impl: impl Into<String>) -> Result<Self> {
        let cfg = Self {
            lambda_mse,
            lambda_perceptual,
            perceptual_impl: perceptual_impl.into(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_mse >= 0.0 && self.lambda_perceptual >= 0.0) {
            return Err(Error::config("loss.lambda", "weights must be nonnegative"));
        }
        if self.lambda_mse == 0.0 && self.lambda_perceptual == 0.0 {
            return Err(Error::config("loss.lambda", "at least one weight must be positive"));
        }
        Ok(())
    }
}

fn perceptual(name: &str, pred: &FrameBuffer, target: &FrameBuffer) -> Result<f64> {
    match name {
        "none" => Ok(0.0),
        "ssim" => Ok(((1.0 - ssim(pred, target)?) / 2.0).max(0.0)),
        other => Err(Error::config(
            "loss.perceptual_impl",
            format!("unknown perceptual term `{other}` (expected none or ssim)"),
        )),
    }
}

/// `lambda_mse * MSE + lambda_perceptual * perceptual`.
pub fn loss_eval(pred: &FrameBuffer, target: &FrameBuffer, cfg: &LossConfig) -> Result<f64> {
    cfg.validate()?;
    let p = perceptual(&cfg.perceptual_impl, pred, target)?;
    Ok(cfg.lambda_mse * mse(pred, target)? + cfg.lambda_perceptual * p)
}
