use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use splatstream::camera::CameraView;
use splatstream::metrics::psnr;
use splatstream::scheduler::{
    run_pipeline, PipelineConfig, PoseSource, PosePredictor, StageKind, StreamSink, TrailingPolicy,
};
use splatstream::stages::{
    bicubic_upscale_2x, BicubicUpscaler, BlendInterpolator, MultiViewFrame, NovelFrame, Reconstruction, Resolution,
    SpatialStage, StageSet, SyntheticOracleStage,
};
use splatstream::synthetic::{CameraRing, MotionModel, SyntheticScene, SyntheticSceneSpec};
use splatstream::{Error, Result};

fn tiny(frames: u64, motion: MotionModel) -> Arc<SyntheticScene> {
    Arc::new(
        SyntheticScene::new(SyntheticSceneSpec {
            num_gaussians: 12,
            frames,
            motion,
            rig: CameraRing {
                num_cameras: 2,
                width: 16,
                height: 12,
                ..CameraRing::default()
            },
            ..SyntheticSceneSpec::default()
        })
        .unwrap(),
    )
}

fn targets(scene: &SyntheticScene, azimuths: &[f64]) -> Vec<CameraView> {
    azimuths.iter().map(|&a| scene.spec().rig.view_at(a).unwrap()).collect()
}

/// Counts reconstructions and records the rig each one saw.
struct Recording {
    inner: SyntheticOracleStage,
    passes: AtomicUsize,
    rigs: Mutex<Vec<Vec<CameraView>>>,
    delay: Duration,
}

impl Recording {
    fn new(scene: Arc<SyntheticScene>, delay: Duration) -> Self {
        Self {
            inner: SyntheticOracleStage::new(scene),
            passes: AtomicUsize::new(0),
            rigs: Mutex::new(Vec::new()),
            delay,
        }
    }
}

impl SpatialStage for Recording {
    fn name(&self) -> &'static str {
        "recording"
    }

    fn reconstruct(&self, frame: &MultiViewFrame, rig: &[CameraView]) -> Result<Reconstruction> {
        self.passes.fetch_add(1, Ordering::SeqCst);
        self.rigs.lock().unwrap().push(rig.to_vec());
        thread::sleep(self.delay);
        self.inner.reconstruct(frame, rig)
    }

    fn render(&self, recon: &Reconstruction, targets: &[CameraView], res: Resolution) -> Result<NovelFrame> {
        self.inner.render(recon, targets, res)
    }
}

fn stages_with(spatial: Arc<dyn SpatialStage>) -> StageSet {
    StageSet {
        spatial,
        inter: Arc::new(BlendInterpolator),
        sr: Arc::new(BicubicUpscaler),
    }
}

fn config(scene: &SyntheticScene) -> PipelineConfig {
    PipelineConfig::new(scene.spec().rig.resolution().unwrap())
}

#[test]
fn five_frames_give_five_upscaled_outputs() {
    let scene = tiny(5, MotionModel::default());
    let mut out: Vec<NovelFrame> = Vec::new();
    let res = run_pipeline(
        scene.input_frames(),
        &PoseSource::File(scene.rig().to_vec()),
        targets(&scene, &[10.0, -30.0, 45.0]),
        &StageSet::reference(scene.clone()),
        &config(&scene),
        &mut out,
    )
    .unwrap();
    assert_eq!(res.emitted, 5);
    assert_eq!(out.iter().map(NovelFrame::timestamp).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
    for f in &out {
        assert_eq!(f.views().len(), 3);
        assert_eq!(f.dims(), (32, 24));
    }
}

#[test]
fn keyframes_are_reconstructed_once() {
    let scene = tiny(300, MotionModel::default());
    let stage = Arc::new(Recording::new(scene.clone(), Duration::ZERO));
    let mut out: Vec<NovelFrame> = Vec::new();
    let res = run_pipeline(
        scene.input_frames(),
        &PoseSource::File(scene.rig().to_vec()),
        targets(&scene, &[0.0]),
        &stages_with(stage.clone()),
        &config(&scene),
        &mut out,
    )
    .unwrap();
    assert_eq!(stage.passes.load(Ordering::SeqCst), 150);
    assert_eq!(res.spatial_passes, 150);
    assert_eq!(res.snippets, 149);
    assert_eq!(res.emitted, 299);
    assert_eq!(res.trailing, Some(299));
    let rigs = stage.rigs.lock().unwrap();
    assert!(rigs.iter().all(|r| r == scene.rig()));
    assert_eq!(res.ledger.samples(StageKind::Spatial).len(), 150);
    assert_eq!(res.ledger.samples(StageKind::CameraPose).len(), 1);
}

#[test]
fn trailing_policies() {
    let scene = tiny(6, MotionModel::default());
    let run = |policy| {
        let mut out: Vec<NovelFrame> = Vec::new();
        let cfg = PipelineConfig {
            trailing: policy,
            ..config(&scene)
        };
        let res = run_pipeline(
            scene.input_frames(),
            &PoseSource::File(scene.rig().to_vec()),
            targets(&scene, &[0.0]),
            &StageSet::reference(scene.clone()),
            &cfg,
            &mut out,
        )
        .unwrap();
        (res, out)
    };
    let (res, out) = run(TrailingPolicy::Drop);
    assert_eq!((res.emitted, res.trailing), (5, Some(5)));
    assert_eq!(out.len(), 5);
    let (res, out) = run(TrailingPolicy::Passthrough);
    assert_eq!(res.emitted, 6);
    assert_eq!(out[5].timestamp(), 5);
    assert_eq!(out[5].views(), out[4].views());
}

#[test]
fn static_scene_repeats_the_keyframe() {
    let scene = tiny(7, MotionModel::still());
    let mut out: Vec<NovelFrame> = Vec::new();
    let tg = targets(&scene, &[20.0]);
    run_pipeline(
        scene.input_frames(),
        &PoseSource::File(scene.rig().to_vec()),
        tg.clone(),
        &StageSet::reference(scene.clone()),
        &config(&scene),
        &mut out,
    )
    .unwrap();
    let gt = scene.ground_truth(0, &tg, config(&scene).resolution).unwrap();
    let key = bicubic_upscale_2x(&gt.views()[0]);
    for f in &out {
        let max = f.views()[0]
            .data()
            .iter()
            .zip(key.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max <= 1e-5, "frame {} deviates by {max}", f.timestamp());
        assert_eq!(psnr(&f.views()[0], &key).unwrap(), 99.0);
    }
}

#[test]
fn pipelined_and_sequential_runs_agree() {
    let scene = tiny(9, MotionModel::default());
    let run = |pipelined| {
        let mut out: Vec<NovelFrame> = Vec::new();
        let cfg = PipelineConfig {
            pipelined,
            ..config(&scene)
        };
        run_pipeline(
            scene.input_frames(),
            &PoseSource::File(scene.rig().to_vec()),
            targets(&scene, &[5.0, 60.0]),
            &StageSet::reference(scene.clone()),
            &cfg,
            &mut out,
        )
        .unwrap();
        out
    };
    assert_eq!(run(true), run(false));
}

struct CountingPredictor {
    rig: Vec<CameraView>,
    calls: AtomicUsize,
}

impl PosePredictor for CountingPredictor {
    fn name(&self) -> &'static str {
        "counting"
    }

    fn predict(&self, frame: &MultiViewFrame) -> Result<Vec<CameraView>> {
        assert_eq!(frame.timestamp(), 0);
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(self.rig.clone())
    }
}

#[test]
fn predictor_runs_only_at_the_first_frame() {
    let scene = tiny(11, MotionModel::default());
    let predictor = Arc::new(CountingPredictor {
        rig: scene.rig().to_vec(),
        calls: AtomicUsize::new(0),
    });
    let mut out: Vec<NovelFrame> = Vec::new();
    run_pipeline(
        scene.input_frames(),
        &PoseSource::Predictor(predictor.clone()),
        targets(&scene, &[0.0]),
        &StageSet::reference(scene.clone()),
        &config(&scene),
        &mut out,
    )
    .unwrap();
    assert_eq!(predictor.calls.load(Ordering::SeqCst), 1);
    assert_eq!(out.len(), 11);
}

/// Switches targets after the first snippet has been handed over.
struct Steering {
    out: Vec<NovelFrame>,
    next: Option<Vec<CameraView>>,
    snippets: usize,
}

impl StreamSink for Steering {
    fn emit(&mut self, frame: NovelFrame) -> Result<()> {
        self.out.push(frame);
        Ok(())
    }

    fn target_update(&mut self) -> Option<Vec<CameraView>> {
        if self.snippets == 1 {
            self.next.take()
        } else {
            None
        }
    }

    fn snippet_done(&mut self, _: &splatstream::scheduler::LatencyLedger) {
        self.snippets += 1;
    }
}

#[test]
fn target_updates_take_effect_at_the_next_snippet() {
    let scene = tiny(9, MotionModel::still());
    let (a, b) = (targets(&scene, &[-40.0]), targets(&scene, &[40.0]));
    let mut sink = Steering {
        out: Vec::new(),
        next: Some(b.clone()),
        snippets: 0,
    };
    let res = run_pipeline(
        scene.input_frames(),
        &PoseSource::File(scene.rig().to_vec()),
        a.clone(),
        &StageSet::reference(scene.clone()),
        &config(&scene),
        &mut sink,
    )
    .unwrap();
    assert_eq!(res.target_updates, 1);
    let r = config(&scene).resolution;
    let up = |v: &[CameraView]| bicubic_upscale_2x(&scene.ground_truth(0, v, r).unwrap().views()[0]);
    let (ua, ub) = (up(&a), up(&b));
    assert_ne!(ua, ub);
    let ts: Vec<bool> = sink.out.iter().map(|f| f.views()[0] == ub).collect();
    // Snippet (0,1,2) is fixed before the update; (2,3,4) on use the new pose.
    assert_eq!(ts, vec![false, false, false, true, true, true, true, true, true]);
    assert!(sink.out[..3].iter().all(|f| f.views()[0] == ua));
}

struct Failing;

impl SpatialStage for Failing {
    fn name(&self) -> &'static str {
        "failing"
    }

    fn reconstruct(&self, frame: &MultiViewFrame, _: &[CameraView]) -> Result<Reconstruction> {
        Err(Error::InvalidArgument(format!("cannot reconstruct {}", frame.timestamp())))
    }

    fn render(&self, _: &Reconstruction, _: &[CameraView], _: Resolution) -> Result<NovelFrame> {
        unreachable!()
    }
}

#[test]
fn stage_failures_name_the_stage() {
    let scene = tiny(5, MotionModel::default());
    let mut out: Vec<NovelFrame> = Vec::new();
    let err = run_pipeline(
        scene.input_frames(),
        &PoseSource::File(scene.rig().to_vec()),
        targets(&scene, &[0.0]),
        &stages_with(Arc::new(Failing)),
        &config(&scene),
        &mut out,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "spatial", .. }), "{err}");
}

#[test]
fn short_and_broken_streams() {
    let scene = tiny(5, MotionModel::default());
    let mut out: Vec<NovelFrame> = Vec::new();
    let poses = PoseSource::File(scene.rig().to_vec());
    let stages = StageSet::reference(scene.clone());
    let cfg = config(&scene);
    let tg = targets(&scene, &[0.0]);
    assert!(run_pipeline(scene.input_frames().take(2), &poses, tg.clone(), &stages, &cfg, &mut out).is_err());
    assert!(run_pipeline(std::iter::empty(), &poses, tg.clone(), &stages, &cfg, &mut out).is_err());
    let shuffled = [0, 2, 1].map(|t| scene.input_frame(t));
    assert!(matches!(
        run_pipeline(shuffled, &poses, tg.clone(), &stages, &cfg, &mut out),
        Err(Error::StreamConsistency { expected: 1, got: 2 })
    ));
    assert!(run_pipeline(scene.input_frames(), &PoseSource::File(vec![]), tg, &stages, &cfg, &mut out).is_err());
    assert!(run_pipeline(scene.input_frames(), &poses, vec![], &stages, &cfg, &mut out).is_err());
}

#[test]
fn live_mode_drops_pairs_but_keeps_unit_stride() {
    let scene = tiny(13, MotionModel::default());
    let stage = Arc::new(Recording::new(scene.clone(), Duration::from_millis(30)));
    let cfg = PipelineConfig {
        live: true,
        input_fps: 1000.0,
        ..config(&scene)
    };
    let mut out: Vec<NovelFrame> = Vec::new();
    let res = run_pipeline(
        scene.input_frames(),
        &PoseSource::File(scene.rig().to_vec()),
        targets(&scene, &[0.0]),
        &stages_with(stage),
        &cfg,
        &mut out,
    )
    .unwrap();
    assert!(!res.dropped_inputs.is_empty());
    let idx: Vec<u64> = out.iter().map(NovelFrame::timestamp).collect();
    assert_eq!(idx, (0..idx.len() as u64).collect::<Vec<_>>());
    assert_eq!(res.emitted as usize + res.dropped_inputs.len() + usize::from(res.trailing.is_some()), 13);
}
