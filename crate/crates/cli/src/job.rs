//! Turns a [`Config`] into everything `run_pipeline` needs.

use std::path::PathBuf;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use splatstream::camera::{CameraView, Intrinsics};
use splatstream::scheduler::{PipelineConfig, PoseSource, PosePredictor};
use splatstream::stages::{MultiViewFrame, Resolution, SceneSource, StageSet};
use splatstream::synthetic::SyntheticScene;
use splatstream::Error;

use crate::config::{Config, PoseSourceKind};
use crate::dataset::Dataset;
use crate::error::{CliError, Result};
use crate::poses::load_poses;

pub type FrameIter = Box<dyn Iterator<Item = splatstream::Result<MultiViewFrame>> + Send>;

pub enum Input {
    Dataset(Dataset),
    /// Frames rendered on the fly from the `[synthetic]` scene.
    Synthetic,
}

pub struct Job {
    pub input: Input,
    pub scene: Option<Arc<SyntheticScene>>,
    pub rig: PoseSource,
    pub targets: Vec<CameraView>,
    pub stages: StageSet,
    pub pipeline: PipelineConfig,
    pub frame_count: usize,
    /// Camera indices of the selected input views.
    pub views: Vec<usize>,
}

/// Reports the synthetic rig, restricted to the selected views.
struct SyntheticRigPredictor {
    rig: Vec<CameraView>,
}

impl PosePredictor for SyntheticRigPredictor {
    fn name(&self) -> &'static str {
        "synthetic_rig"
    }

    fn predict(&self, _frame: &MultiViewFrame) -> splatstream::Result<Vec<CameraView>> {
        Ok(self.rig.clone())
    }
}

fn select<T: Clone>(all: &[T], views: &[usize], what: &str) -> Result<Vec<T>> {
    views
        .iter()
        .map(|&k| {
            all.get(k).cloned().ok_or_else(|| {
                CliError::from(Error::config(
                    "input.views",
                    format!("view {k} has no entry in the {what} ({} cameras)", all.len()),
                ))
            })
        })
        .collect()
}

impl Job {
    pub fn prepare(cfg: &Config) -> Result<Self> {
        let pipeline = cfg.pipeline_config()?;
        let res = pipeline.resolution;

        let (input, spec) = match &cfg.input.path {
            Some(root) => {
                let ds = Dataset::open(root, cfg.input.views.as_deref())?;
                let spec = ds.synthetic_spec()?.or_else(|| cfg.synthetic.clone());
                (Input::Dataset(ds), spec)
            }
            None => {
                let spec = cfg.synthetic.clone().ok_or_else(|| {
                    Error::config("input.path", "no input dataset and no [synthetic] scene to render")
                })?;
                (Input::Synthetic, Some(spec))
            }
        };
        let scene = spec.map(SyntheticScene::new).transpose()?.map(Arc::new);

        let (views, input_res, frame_count) = match &input {
            Input::Dataset(ds) => (ds.view_indices(), ds.resolution(), ds.frame_count()),
            Input::Synthetic => {
                let s = scene.as_ref().expect("synthetic input has a scene");
                let n = s.rig().len();
                let views = cfg.input.views.clone().unwrap_or_else(|| (0..n).collect());
                if let Some(&bad) = views.iter().find(|&&k| k >= n) {
                    return Err(Error::config("input.views", format!("view {bad} is outside the {n}-camera rig")).into());
                }
                (views, s.spec().rig.resolution()?, s.frames() as usize)
            }
        };

        let rig = match cfg.poses.source {
            PoseSourceKind::File => {
                let file = cfg
                    .poses
                    .file
                    .clone()
                    .or_else(|| match &input {
                        Input::Dataset(ds) => ds.poses_file(),
                        Input::Synthetic => None,
                    });
                match (file, &scene) {
                    (Some(f), _) => PoseSource::File(select(&load_poses(&f, input_res)?, &views, "pose file")?),
                    (None, Some(s)) => PoseSource::File(select(s.rig(), &views, "synthetic rig")?),
                    (None, None) => {
                        return Err(Error::config("poses.file", "no pose file given and none in the dataset").into())
                    }
                }
            }
            PoseSourceKind::Predictor => {
                let s = scene
                    .as_ref()
                    .ok_or_else(|| Error::config("poses.source", "the predictor needs a synthetic scene description"))?;
                PoseSource::Predictor(Arc::new(SyntheticRigPredictor {
                    rig: select(s.rig(), &views, "synthetic rig")?,
                }))
            }
        };

        let targets = Self::targets(cfg, &input, scene.as_deref(), res)?;
        let scenes = scene.clone().map(|s| s as Arc<dyn SceneSource>);
        let stages = StageSet::from_config(&cfg.stage_config(scene.is_some()), scenes)?;
        let frame_count = cfg.input.max_frames.map_or(frame_count, |m| m.min(frame_count));

        Ok(Self {
            input,
            scene,
            rig,
            targets,
            stages,
            pipeline,
            frame_count,
            views,
        })
    }

    fn targets(cfg: &Config, input: &Input, scene: Option<&SyntheticScene>, res: Resolution) -> Result<Vec<CameraView>> {
        let files: Vec<PathBuf> = if cfg.pipeline.targets.is_empty() {
            match input {
                Input::Dataset(ds) => ds.target_file().into_iter().collect(),
                Input::Synthetic => Vec::new(),
            }
        } else {
            cfg.pipeline.targets.clone()
        };
        if files.is_empty() {
            // A synthetic scene without target files is viewed from the middle
            // of its camera arc.
            let s = scene.ok_or_else(|| Error::config("pipeline.targets", "no target viewpoints given"))?;
            let ring = &s.spec().rig;
            let view = ring.view_at(0.0)?;
            let k = Intrinsics::from_normalized(ring.focal, res.width, res.height)?;
            return Ok(vec![CameraView::new(view.extrinsics, k)]);
        }
        let mut targets = Vec::new();
        for f in files {
            targets.extend(load_poses(&f, res)?);
        }
        Ok(targets)
    }

    pub fn input_resolution(&self) -> Result<Resolution> {
        match &self.input {
            Input::Dataset(ds) => Ok(ds.resolution()),
            Input::Synthetic => Ok(self.scene.as_ref().expect("scene").spec().rig.resolution()?),
        }
    }

    /// The input stream, optionally paced at the input frame rate.
    pub fn frames(&self, paced: bool) -> FrameIter {
        let n = self.frame_count;
        let it: FrameIter = match &self.input {
            Input::Dataset(ds) => Box::new(ds.frames().take(n)),
            Input::Synthetic => {
                let scene = Arc::clone(self.scene.as_ref().expect("scene"));
                let views = self.views.clone();
                Box::new((0..n as u64).map(move |t| {
                    let frame = scene.input_frame(t)?;
                    let picked = views.iter().map(|&k| frame.views()[k].clone()).collect();
                    MultiViewFrame::new(t, picked)
                }))
            }
        };
        if paced {
            Box::new(Paced::new(it, self.pipeline.input_fps))
        } else {
            it
        }
    }
}

/// Releases item `t` no earlier than `t / fps` seconds after the first.
pub struct Paced<I> {
    inner: I,
    interval: Duration,
    start: Option<Instant>,
    next: u32,
}

impl<I> Paced<I> {
    pub fn new(inner: I, fps: f64) -> Self {
        Self {
            inner,
            interval: Duration::from_secs_f64(1.0 / fps),
            start: None,
            next: 0,
        }
    }
}

impl<I: Iterator> Iterator for Paced<I> {
    type Item = I::Item;

    fn next(&mut self) -> Option<I::Item> {
        let start = *self.start.get_or_insert_with(Instant::now);
        let due = start + self.interval * self.next;
        if let Some(wait) = due.checked_duration_since(Instant::now()) {
            thread::sleep(wait);
        }
        self.next += 1;
        self.inner.next()
    }
}
