use super::{check_render_target, sorted_splats, GaussianScene, ALPHA_THRESHOLD, MAX_ALPHA};
use crate::camera::CameraView;
use crate::error::Result;
use crate::frame::FrameBuffer;

/// Brute-force renderer: every splat is evaluated at every pixel, with no
/// tiling, binning or footprint culling. Single-threaded; meant as the
/// ground truth for [`super::rasterize`] on small scenes.
pub fn rasterize_reference(scene: &GaussianScene, view: &CameraView, width: usize, height: usize) -> Result<FrameBuffer> {
    check_render_target(width, height)?;
    let splats = sorted_splats(scene, view);
    let bg = scene.background;
    Ok(FrameBuffer::from_fn(width, height, |x, y| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let mut rgb = [0.0; 3];
        let mut t = 1.0;
        for s in &splats {
            let (dx, dy) = (px - s.center[0], py - s.center[1]);
            let [a, b, c] = s.conic;
            let alpha = (s.opacity * (-0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy)).exp()).min(MAX_ALPHA);
            if alpha < ALPHA_THRESHOLD {
                continue;
            }
            for ch in 0..3 {
                rgb[ch] += s.color[ch] * (alpha * t);
            }
            t *= 1.0 - alpha;
            if t < ALPHA_THRESHOLD {
                break;
            }
        }
        [rgb[0] + t * bg[0], rgb[1] + t * bg[1], rgb[2] + t * bg[2]]
    }))
}
