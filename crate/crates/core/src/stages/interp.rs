use super::{check_interpolation_inputs, InterpolationStage, NovelFrame, Provenance};
use crate::error::Result;
use crate::frame::FrameBuffer;

/// Per-pixel midpoint of the two keyframes, each view independently.
#[derive(Debug, Clone, Copy, Default)]
pub struct BlendInterpolator;

impl InterpolationStage for BlendInterpolator {
    fn name(&self) -> &'static str {
        "blend"
    }

    fn interpolate(&self, a: &NovelFrame, b: &NovelFrame) -> Result<NovelFrame> {
        check_interpolation_inputs(a, b)?;
        let views = a
            .views()
            .iter()
            .zip(b.views())
            .map(|(va, vb)| {
                let data = va.data().iter().zip(vb.data()).map(|(x, y)| 0.5 * x + 0.5 * y).collect();
                FrameBuffer::from_data(va.width(), va.height(), data)
            })
            .collect::<Result<Vec<_>>>()?;
        NovelFrame::new(a.timestamp() + 1, views, Provenance::Interpolated)
    }
}
