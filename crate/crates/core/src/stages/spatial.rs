use std::sync::Arc;

use super::{MultiViewFrame, NovelFrame, Provenance, Reconstruction, Resolution, SpatialStage};
use crate::camera::CameraView;
use crate::error::{Error, Result};
use crate::gaussian::{gaussians_from_pointmap, rasterize, GaussianScene, InitOptions, PointMap};

/// Ground-truth scene for any timestamp.
pub trait SceneSource: Send + Sync {
    fn scene_at(&self, timestamp: u64) -> Result<GaussianScene>;
}

/// Renders `scene` from every target.
pub fn render_scene(scene: &GaussianScene, targets: &[CameraView], res: Resolution, timestamp: u64) -> Result<NovelFrame> {
    let views = targets
        .iter()
        .map(|t| rasterize(scene, t, res.width, res.height))
        .collect::<Result<Vec<_>>>()?;
    NovelFrame::new(timestamp, views, Provenance::Keyframe)
}

fn render_reconstruction(recon: &Reconstruction, targets: &[CameraView], res: Resolution) -> Result<NovelFrame> {
    match recon {
        Reconstruction::Scene { timestamp, scene } => render_scene(scene, targets, res, *timestamp),
        Reconstruction::Remote { .. } => Err(Error::invalid("reconstruction belongs to an external stage")),
    }
}

/// Returns the exact scene for each timestamp, ignoring the input pixels.
pub struct SyntheticOracleStage {
    source: Arc<dyn SceneSource>,
}

impl SyntheticOracleStage {
    pub fn new(source: Arc<dyn SceneSource>) -> Self {
        Self { source }
    }
}

impl SpatialStage for SyntheticOracleStage {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn reconstruct(&self, frame: &MultiViewFrame, _rig: &[CameraView]) -> Result<Reconstruction> {
        Ok(Reconstruction::Scene {
            timestamp: frame.timestamp(),
            scene: Arc::new(self.source.scene_at(frame.timestamp())?),
        })
    }

    fn render(&self, recon: &Reconstruction, targets: &[CameraView], res: Resolution) -> Result<NovelFrame> {
        render_reconstruction(recon, targets, res)
    }
}

/// Geometry-free baseline: every pixel of the first input view becomes a
/// splat on a plane at fixed depth in front of that camera.
pub struct ConstantDepthStage {
    depth: f64,
}

impl ConstantDepthStage {
    pub const DEFAULT_DEPTH: f64 = 4.0;

    pub fn new(depth: f64) -> Result<Self> {
        if !(depth > 0.0) || !depth.is_finite() {
            return Err(Error::config("spatial.depth", format!("depth {depth} must be positive")));
        }
        Ok(Self { depth })
    }
}

impl SpatialStage for ConstantDepthStage {
    fn name(&self) -> &'static str {
        "constant_depth"
    }

    fn reconstruct(&self, frame: &MultiViewFrame, rig: &[CameraView]) -> Result<Reconstruction> {
        let cam = rig
            .first()
            .ok_or_else(|| Error::invalid("constant-depth stage needs the first input camera"))?;
        let image = &frame.views()[0];
        let (w, h) = image.dims();
        let pm = PointMap::constant_depth(cam, w, h, self.depth)?;
        let scene = gaussians_from_pointmap(&pm, image, &InitOptions::for_view(cam))?;
        Ok(Reconstruction::Scene {
            timestamp: frame.timestamp(),
            scene: Arc::new(scene),
        })
    }

    fn render(&self, recon: &Reconstruction, targets: &[CameraView], res: Resolution) -> Result<NovelFrame> {
        render_reconstruction(recon, targets, res)
    }
}
