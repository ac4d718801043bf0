//! Pluggable pipeline stages.
//!
//! * spatial: multi-view input frame to novel-view renders at the keyframe,
//! * interpolation: two keyframe renders to the frame halfway between them,
//! * super-resolution: exact 2x upscaling of every view.
//!
//! Implementations are interchangeable behind the traits and are picked by
//! name through [`StageConfig`].

mod external;
mod interp;
mod spatial;
mod superres;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::camera::CameraView;
use crate::error::{Error, Result};
use crate::frame::FrameBuffer;
use crate::gaussian::GaussianScene;

pub use external::{ExternalStage, Transport};
pub use interp::BlendInterpolator;
pub use spatial::{render_scene, ConstantDepthStage, SceneSource, SyntheticOracleStage};
pub use superres::{bicubic_upscale_2x, BicubicUpscaler};

/// The `n` synchronized input views at one timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewFrame {
    timestamp: u64,
    views: Vec<FrameBuffer>,
}

impl MultiViewFrame {
    pub fn new(timestamp: u64, views: Vec<FrameBuffer>) -> Result<Self> {
        if views.len() < 2 {
            return Err(Error::invalid(format!(
                "a multi-view frame needs at least 2 views, got {}",
                views.len()
            )));
        }
        check_uniform(&views)?;
        Ok(Self { timestamp, views })
    }

    pub fn timestamp(&self) -> u64 {
        self.timestamp
    }

    pub fn views(&self) -> &[FrameBuffer] {
        &self.views
    }

    pub fn dims(&self) -> (usize, usize) {
        self.views[0].dims()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Keyframe,
    Interpolated,
    Upscaled,
}

/// `m` novel-view images for one output timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct NovelFrame {
    timestamp: u64,
    views: Vec<FrameBuffer>,
    provenance: Provenance,
}

impl NovelFrame {
    pub fn new(timestamp: u64, views: Vec<FrameBuffer>, provenance: Provenance) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::invalid("a novel frame needs at least one view"));
        }
        check_uniform(&views)?;
        Ok(Self {
            timestamp,
            views,
            provenance,
        })
    }

    pub fn timestamp(&self) -> u64 {
        self.timestamp
    }

    pub fn views(&self) -> &[FrameBuffer] {
        &self.views
    }

    pub fn into_views(self) -> Vec<FrameBuffer> {
        self.views
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn dims(&self) -> (usize, usize) {
        self.views[0].dims()
    }

    pub fn with_timestamp(mut self, timestamp: u64) -> Self {
        self.timestamp = timestamp;
        self
    }
}

fn check_uniform(views: &[FrameBuffer]) -> Result<()> {
    let dims = views[0].dims();
    if let Some((i, v)) = views.iter().enumerate().find(|(_, v)| v.dims() != dims) {
        return Err(Error::invalid(format!(
            "view {i} is {:?}, expected {dims:?}",
            v.dims()
        )));
    }
    Ok(())
}

/// Result of the spatial stage's geometry pass for one keyframe.
#[derive(Debug, Clone)]
pub enum Reconstruction {
    Scene {
        timestamp: u64,
        scene: Arc<GaussianScene>,
    },
    /// Geometry lives out of process; the input frame is kept for rendering.
    Remote { frame: MultiViewFrame },
}

impl Reconstruction {
    pub fn timestamp(&self) -> u64 {
        match self {
            Reconstruction::Scene { timestamp, .. } => *timestamp,
            Reconstruction::Remote { frame } => frame.timestamp(),
        }
    }

    pub fn scene(&self) -> Option<&Arc<GaussianScene>> {
        match self {
            Reconstruction::Scene { scene, .. } => Some(scene),
            Reconstruction::Remote { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpatialStageOutput {
    /// `None` for out-of-process stages, which do not expose their geometry.
    pub scene: Option<Arc<GaussianScene>>,
    pub rendered: NovelFrame,
}

/// Render resolution of the keyframes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution {
    pub width: usize,
    pub height: usize,
}

impl Resolution {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("resolution {width}x{height} is empty")));
        }
        Ok(Self { width, height })
    }

    pub fn doubled(self) -> Self {
        Self {
            width: self.width * 2,
            height: self.height * 2,
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

impl FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::invalid(format!("resolution `{s}` is not WxH")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("resolution `{s}` is not WxH")))
        };
        Self::new(parse(w)?, parse(h)?)
    }
}

pub trait SpatialStage: Send + Sync {
    fn name(&self) -> &'static str;

    fn reconstruct(&self, frame: &MultiViewFrame, rig: &[CameraView]) -> Result<Reconstruction>;

    fn render(&self, recon: &Reconstruction, targets: &[CameraView], res: Resolution) -> Result<NovelFrame>;

    fn run(
        &self,
        frame: &MultiViewFrame,
        rig: &[CameraView],
        targets: &[CameraView],
        res: Resolution,
    ) -> Result<SpatialStageOutput> {
        check_spatial_inputs(frame, rig, targets)?;
        let recon = self.reconstruct(frame, rig)?;
        let rendered = self.render(&recon, targets, res)?;
        Ok(SpatialStageOutput {
            scene: recon.scene().cloned(),
            rendered,
        })
    }
}

pub fn check_spatial_inputs(frame: &MultiViewFrame, rig: &[CameraView], targets: &[CameraView]) -> Result<()> {
    if rig.len() != frame.views().len() {
        return Err(Error::invalid(format!(
            "{} rig cameras for {} input views",
            rig.len(),
            frame.views().len()
        )));
    }
    if targets.is_empty() {
        return Err(Error::invalid("no target viewpoints requested"));
    }
    Ok(())
}

pub trait InterpolationStage: Send + Sync {
    fn name(&self) -> &'static str;

    /// Frame at `a.timestamp + 1` from renders at `t` and `t + 2`.
    fn interpolate(&self, a: &NovelFrame, b: &NovelFrame) -> Result<NovelFrame>;
}

pub(crate) fn check_interpolation_inputs(a: &NovelFrame, b: &NovelFrame) -> Result<()> {
    if a.views().len() != b.views().len() || a.dims() != b.dims() {
        return Err(Error::invalid(format!(
            "cannot interpolate {} views at {:?} with {} views at {:?}",
            a.views().len(),
            a.dims(),
            b.views().len(),
            b.dims()
        )));
    }
    if a.timestamp() + 2 != b.timestamp() {
        return Err(Error::invalid(format!(
            "keyframes {} and {} are not two steps apart",
            a.timestamp(),
            b.timestamp()
        )));
    }
    Ok(())
}

pub trait SuperResStage: Send + Sync {
    fn name(&self) -> &'static str;

    /// Upscales every view of every frame exactly 2x in both dimensions.
    fn upscale(&self, frames: &[NovelFrame]) -> Result<Vec<NovelFrame>>;
}

pub(crate) fn check_superres_inputs(frames: &[NovelFrame]) -> Result<()> {
    let first = frames
        .first()
        .ok_or_else(|| Error::invalid("nothing to upscale"))?;
    if let Some(f) = frames.iter().find(|f| f.dims() != first.dims()) {
        return Err(Error::invalid(format!(
            "frame {} is {:?}, expected {:?}",
            f.timestamp(),
            f.dims(),
            first.dims()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialImpl {
    #[default]
    Oracle,
    ConstantDepth,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterImpl {
    #[default]
    Blend,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SrImpl {
    #[default]
    Bicubic,
    External,
}

macro_rules! impl_from_str {
    ($ty:ty, $key:literal, $($name:literal => $variant:expr),+) => {
        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(Error::config(
                        $key,
                        format!("unknown implementation `{other}` (expected one of: {})", [$($name),+].join(", ")),
                    )),
                }
            }
        }
    };
}

impl_from_str!(SpatialImpl, "spatial.impl", "oracle" => SpatialImpl::Oracle, "constant_depth" => SpatialImpl::ConstantDepth, "external" => SpatialImpl::External);
impl_from_str!(InterImpl, "inter.impl", "blend" => InterImpl::Blend, "external" => InterImpl::External);
impl_from_str!(SrImpl, "sr.impl", "bicubic" => SrImpl::Bicubic, "external" => SrImpl::External);

/// Stage selection, one implementation name per stage plus the endpoint of
/// any external stage (`tcp://host:port` or `exec:command args`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StageConfig {
    pub spatial: SpatialImpl,
    pub inter: InterImpl,
    pub sr: SrImpl,
    pub constant_depth: Option<f64>,
    pub spatial_endpoint: Option<String>,
    pub inter_endpoint: Option<String>,
    pub sr_endpoint: Option<String>,
}

#[derive(Clone)]
pub struct StageSet {
    pub spatial: Arc<dyn SpatialStage>,
    pub inter: Arc<dyn InterpolationStage>,
    pub sr: Arc<dyn SuperResStage>,
}

impl fmt::Debug for StageSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StageSet")
            .field("spatial", &self.spatial.name())
            .field("inter", &self.inter.name())
            .field("sr", &self.sr.name())
            .finish()
    }
}

impl StageSet {
    /// Oracle spatial stage, midpoint blend, bicubic upscaling.
    pub fn reference(source: Arc<dyn SceneSource>) -> Self {
        Self {
            spatial: Arc::new(SyntheticOracleStage::new(source)),
            inter: Arc::new(BlendInterpolator),
            sr: Arc::new(BicubicUpscaler),
        }
    }

    /// Builds the configured stages. `scenes` backs the oracle stage and is
    /// required only when it is selected.
    pub fn from_config(cfg: &StageConfig, scenes: Option<Arc<dyn SceneSource>>) -> Result<Self> {
        let endpoint = |key: &str, ep: &Option<String>| {
            ep.clone()
                .ok_or_else(|| Error::config(key, "external stage selected without an endpoint"))
        };
        let spatial: Arc<dyn SpatialStage> = match cfg.spatial {
            SpatialImpl::Oracle => {
                let scenes = scenes.ok_or_else(|| {
                    Error::config("spatial.impl", "the oracle stage needs a synthetic scene source")
                })?;
                Arc::new(SyntheticOracleStage::new(scenes))
            }
            SpatialImpl::ConstantDepth => Arc::new(ConstantDepthStage::new(cfg.constant_depth.unwrap_or(ConstantDepthStage::DEFAULT_DEPTH))?),
            SpatialImpl::External => Arc::new(ExternalStage::open(&endpoint("spatial.endpoint", &cfg.spatial_endpoint)?)?),
        };
        let inter: Arc<dyn InterpolationStage> = match cfg.inter {
            InterImpl::Blend => Arc::new(BlendInterpolator),
            InterImpl::External => Arc::new(ExternalStage::open(&endpoint("inter.endpoint", &cfg.inter_endpoint)?)?),
        };
        let sr: Arc<dyn SuperResStage> = match cfg.sr {
            SrImpl::Bicubic => Arc::new(BicubicUpscaler),
            SrImpl::External => Arc::new(ExternalStage::open(&endpoint("sr.endpoint", &cfg.sr_endpoint)?)?),
        };
        Ok(Self { spatial, inter, sr })
    }
}
