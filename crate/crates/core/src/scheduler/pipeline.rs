use std::fmt;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use super::latency::{LatencyLedger, StageKind};
use super::{SnippetPlan, StreamState, TrailingPolicy};
use crate::camera::CameraView;
use crate::error::{Error, Result};
use crate::stages::{
    check_spatial_inputs, MultiViewFrame, NovelFrame, Reconstruction, Resolution, SpatialStage, StageSet,
};

/// Estimates the rig cameras from the first multi-view frame.
pub trait PosePredictor: Send + Sync {
    fn name(&self) -> &'static str;

    fn predict(&self, frame: &MultiViewFrame) -> Result<Vec<CameraView>>;
}

/// Where the rig poses come from. Either way they are resolved once, from
/// the frame at `t = 0`, and stay fixed for the whole stream.
#[derive(Clone)]
pub enum PoseSource {
    File(Vec<CameraView>),
    Predictor(Arc<dyn PosePredictor>),
}

impl fmt::Debug for PoseSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoseSource::File(v) => f.debug_tuple("File").field(&v.len()).finish(),
            PoseSource::Predictor(p) => f.debug_tuple("Predictor").field(&p.name()).finish(),
        }
    }
}

impl PoseSource {
    fn resolve(&self, first: &MultiViewFrame) -> Result<Vec<CameraView>> {
        let rig = match self {
            PoseSource::File(v) => v.clone(),
            PoseSource::Predictor(p) => p.predict(first).map_err(|e| Error::in_stage("camera_pose", e))?,
        };
        if rig.len() != first.views().len() {
            return Err(Error::invalid(format!(
                "{} rig poses for {} input views",
                rig.len(),
                first.views().len()
            )));
        }
        Ok(rig)
    }
}

/// Receives the output stream.
pub trait StreamSink {
    fn emit(&mut self, frame: NovelFrame) -> Result<()>;

    /// Polled at every snippet boundary; a new target set replaces the old
    /// one from the next snippet on.
    fn target_update(&mut self) -> Option<Vec<CameraView>> {
        None
    }

    fn snippet_done(&mut self, _ledger: &LatencyLedger) {}
}

impl StreamSink for Vec<NovelFrame> {
    fn emit(&mut self, frame: NovelFrame) -> Result<()> {
        self.push(frame);
        Ok(())
    }
}

/// Adapts a closure into a sink.
pub struct FnSink<F>(pub F);

impl<F: FnMut(NovelFrame) -> Result<()>> StreamSink for FnSink<F> {
    fn emit(&mut self, frame: NovelFrame) -> Result<()> {
        (self.0)(frame)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Keyframe render resolution; output is twice this.
    pub resolution: Resolution,
    pub input_fps: f64,
    pub trailing: TrailingPolicy,
    pub budget_ms: f64,
    /// Drop a keyframe pair whenever a snippet takes longer than two input
    /// intervals.
    pub live: bool,
    /// Overlap the next keyframe's spatial pass with the current snippet.
    pub pipelined: bool,
}

impl PipelineConfig {
    pub fn new(resolution: Resolution) -> Self {
        Self {
            resolution,
            input_fps: 30.0,
            trailing: TrailingPolicy::Drop,
            budget_ms: super::DEFAULT_BUDGET_MS,
            live: false,
            pipelined: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub emitted: u64,
    pub snippets: u64,
    /// Keyframe reconstructions performed.
    pub spatial_passes: u64,
    /// Unpaired final input index, if the stream had one.
    pub trailing: Option<u64>,
    /// Input indices skipped by live-mode backpressure.
    pub dropped_inputs: Vec<u64>,
    pub target_updates: u64,
    pub ledger: LatencyLedger,
}

struct Keyframe {
    recon: Reconstruction,
    render: NovelFrame,
}

struct SpatialTiming {
    reconstruct: Duration,
    render: Duration,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn check_render(render: &NovelFrame, timestamp: u64, targets: usize, res: Resolution) -> Result<()> {
    if render.timestamp() != timestamp {
        return Err(Error::StreamConsistency {
            expected: timestamp,
            got: render.timestamp(),
        });
    }
    if render.views().len() != targets || render.dims() != (res.width, res.height) {
        return Err(Error::invalid(format!(
            "rendered {} views at {:?}, expected {targets} at {res}",
            render.views().len(),
            render.dims()
        )));
    }
    Ok(())
}

fn render(stage: &dyn SpatialStage, recon: &Reconstruction, targets: &[CameraView], res: Resolution) -> Result<NovelFrame> {
    let out = stage
        .render(recon, targets, res)
        .and_then(|r| check_render(&r, recon.timestamp(), targets.len(), res).map(|()| r));
    out.map_err(|e| Error::in_stage("rendering", e))
}

fn spatial_pass(
    stage: &dyn SpatialStage,
    frame: &MultiViewFrame,
    rig: &[CameraView],
    targets: &[CameraView],
    res: Resolution,
) -> Result<(Keyframe, SpatialTiming)> {
    check_spatial_inputs(frame, rig, targets)?;
    let (recon, reconstruct) = timed(|| stage.reconstruct(frame, rig));
    let recon = recon.map_err(|e| Error::in_stage("spatial", e))?;
    let (rendered, render_time) = timed(|| render(stage, &recon, targets, res));
    Ok((
        Keyframe {
            recon,
            render: rendered?,
        },
        SpatialTiming {
            reconstruct,
            render: render_time,
        },
    ))
}

struct Ready {
    plan: SnippetPlan,
    lo: NovelFrame,
    hi: NovelFrame,
}

/// Interpolation, discard rule, super-resolution and emission for one
/// snippet whose keyframes are rendered.
struct Finisher<'a> {
    stages: &'a StageSet,
    output: Resolution,
    state: StreamState,
    ledger: LatencyLedger,
    sink: &'a mut dyn StreamSink,
}

impl Finisher<'_> {
    fn upscale_and_emit(&mut self, frames: Vec<NovelFrame>) -> Result<()> {
        let (up, d) = timed(|| self.stages.sr.upscale(&frames));
        self.ledger.record(StageKind::SuperRes, d);
        let up = up.map_err(|e| Error::in_stage("superres", e))?;
        if up.len() != frames.len() {
            return Err(Error::in_stage(
                "superres",
                Error::invalid(format!("returned {} frames for {}", up.len(), frames.len())),
            ));
        }
        for (u, f) in up.into_iter().zip(&frames) {
            if u.timestamp() != f.timestamp()
                || u.views().len() != f.views().len()
                || u.dims() != (self.output.width, self.output.height)
            {
                return Err(Error::in_stage(
                    "superres",
                    Error::invalid(format!(
                        "frame {} came back as {} views at {:?}, expected {} at {}",
                        f.timestamp(),
                        u.views().len(),
                        u.dims(),
                        f.views().len(),
                        self.output
                    )),
                ));
            }
            self.sink.emit(u)?;
        }
        Ok(())
    }

    fn finish(&mut self, ready: Ready) -> Result<()> {
        let (mid, d) = timed(|| self.stages.inter.interpolate(&ready.lo, &ready.hi));
        self.ledger.record(StageKind::Interpolation, d);
        let mid = mid.map_err(|e| Error::in_stage("interpolation", e))?;
        let keep = self.state.emit_snippet(&ready.plan, [ready.lo, mid, ready.hi])?;
        self.upscale_and_emit(keep)
    }
}

/// Pulls input frames and checks that they arrive in index order.
struct Inputs<I> {
    iter: I,
    next: u64,
}

impl<I: Iterator<Item = Result<MultiViewFrame>>> Inputs<I> {
    fn pull(&mut self) -> Result<Option<MultiViewFrame>> {
        let Some(frame) = self.iter.next().transpose()? else {
            return Ok(None);
        };
        if frame.timestamp() != self.next {
            return Err(Error::StreamConsistency {
                expected: self.next,
                got: frame.timestamp(),
            });
        }
        self.next += 1;
        Ok(Some(frame))
    }
}

/// Streams `source` through the stages and hands every output frame, at
/// twice the configured resolution, to `sink` in index order.
///
/// A source that ends mid-snippet flushes the completed snippets and stops.
/// A stage error aborts the run as [`Error::Stage`].
pub fn run_pipeline<I>(
    source: I,
    poses: &PoseSource,
    targets: Vec<CameraView>,
    stages: &StageSet,
    cfg: &PipelineConfig,
    sink: &mut dyn StreamSink,
) -> Result<PipelineOutcome>
where
    I: IntoIterator<Item = Result<MultiViewFrame>>,
{
    if targets.is_empty() {
        return Err(Error::invalid("no target viewpoints requested"));
    }
    let res = cfg.resolution;
    let mut ledger = LatencyLedger::new(cfg.input_fps)?.with_budget_ms(cfg.budget_ms)?;
    let mut inputs = Inputs {
        iter: source.into_iter(),
        next: 0,
    };
    let first = inputs
        .pull()?
        .ok_or_else(|| Error::invalid("the input stream is empty"))?;

    let (rig, d) = timed(|| poses.resolve(&first));
    ledger.record(StageKind::CameraPose, d);
    let rig = rig?;

    let start = Instant::now();
    let mut targets = targets;
    let spatial = &*stages.spatial;
    let (mut lo, timing) = spatial_pass(spatial, &first, &rig, &targets, res)?;
    ledger.record(StageKind::Spatial, timing.reconstruct);
    ledger.record(StageKind::Rendering, timing.render);
    drop(first);

    let mut fin = Finisher {
        stages,
        output: res.doubled(),
        state: StreamState::new(),
        ledger,
        sink,
    };
    let budget = Duration::from_secs_f64(2.0 * fin.ledger.input_interval_ms() / 1e3);
    let mut t = 0u64;
    let mut spatial_passes = 1u64;
    let mut snippets = 0u64;
    let mut target_updates = 0u64;
    let mut segment_start = true;
    let mut overrun = false;
    let mut pending: Option<Ready> = None;
    let mut trailing = None;
    let mut dropped_inputs = Vec::new();

    loop {
        let iteration = Instant::now();
        if let Some(next) = fin.sink.target_update() {
            if next.is_empty() {
                return Err(Error::invalid("target update carries no viewpoints"));
            }
            if next != targets {
                targets = next;
                target_updates += 1;
                let (r, d) = timed(|| render(spatial, &lo.recon, &targets, res));
                fin.ledger.record(StageKind::Rendering, d);
                lo.render = r?;
            }
        }
        let Some(_middle) = inputs.pull()? else { break };
        let Some(hi_frame) = inputs.pull()? else {
            trailing = Some(t + 1);
            break;
        };

        if overrun {
            overrun = false;
            if let Some(r) = pending.take() {
                fin.finish(r)?;
            }
            log::warn!("snippet overran two input intervals; dropping keyframe pair ({t}, {})", t + 2);
            dropped_inputs.push(t + 1);
            fin.state.resync(1);
            let (kf, timing) = spatial_pass(spatial, &hi_frame, &rig, &targets, res)?;
            fin.ledger.record(StageKind::Spatial, timing.reconstruct);
            fin.ledger.record(StageKind::Rendering, timing.render);
            spatial_passes += 1;
            lo = kf;
            t += 2;
            segment_start = true;
            continue;
        }

        let plan = SnippetPlan::new(t, segment_start);
        let prev = pending.take();
        let (finished, hi) = if cfg.pipelined && prev.is_some() {
            let (rig, targets, hi_frame) = (&rig, &targets, &hi_frame);
            let fin = &mut fin;
            thread::scope(|s| {
                let worker = s.spawn(move || spatial_pass(spatial, hi_frame, rig, targets, res));
                let finished = prev.map_or(Ok(()), |r| fin.finish(r));
                let hi = worker.join().unwrap_or_else(|p| std::panic::resume_unwind(p));
                (finished, hi)
            })
        } else {
            let finished = prev.map_or(Ok(()), |r| fin.finish(r));
            (finished, spatial_pass(spatial, &hi_frame, &rig, &targets, res))
        };
        finished?;
        let (hi, timing) = hi?;
        fin.ledger.record(StageKind::Spatial, timing.reconstruct);
        fin.ledger.record(StageKind::Rendering, timing.render);
        spatial_passes += 1;
        snippets += 1;

        pending = Some(Ready {
            plan,
            lo: lo.render.clone(),
            hi: hi.render.clone(),
        });
        lo = hi;
        t += 2;
        segment_start = false;
        fin.sink.snippet_done(&fin.ledger);

        if cfg.live && iteration.elapsed() > budget {
            overrun = true;
        }
    }

    if let Some(r) = pending.take() {
        fin.finish(r)?;
    }
    if snippets == 0 && dropped_inputs.is_empty() {
        return Err(Error::invalid(format!(
            "a stream needs at least 3 input frames, got {}",
            inputs.next
        )));
    }
    if segment_start {
        // A resync keyframe that never got its partner.
        dropped_inputs.push(t);
        dropped_inputs.extend(trailing.take());
    }
    if let Some(tr) = trailing {
        match cfg.trailing {
            TrailingPolicy::Drop => log::info!("input frame {tr} has no keyframe partner and is not emitted"),
            TrailingPolicy::Passthrough => {
                let copy = lo.render.clone().with_timestamp(tr);
                let copy = fin.state.emit_single(copy)?;
                fin.upscale_and_emit(vec![copy])?;
            }
        }
    }

    let emitted = fin.state.emitted();
    fin.ledger.set_run(start.elapsed(), emitted);
    Ok(PipelineOutcome {
        emitted,
        snippets,
        spatial_passes,
        trailing,
        dropped_inputs,
        target_updates,
        ledger: fin.ledger,
    })
}
