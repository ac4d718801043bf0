//! Subcommands other than `serve`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use splatstream::camera::{pose_error_metrics, CameraView, Extrinsics, Intrinsics, PairSet, PoseErrorReport};
use splatstream::metrics::psnr;
use splatstream::scheduler::{latency_report, run_pipeline, LatencyReport, PipelineOutcome, StageKind, StreamSink};
use splatstream::stages::{render_scene, NovelFrame, Resolution};
use splatstream::synthetic::{SyntheticScene, SyntheticSceneSpec};
use splatstream::Error;

use crate::config::{read_toml, Config};
use crate::dataset::Dataset;
use crate::error::{CliError, Result};
use crate::imageio::{frame_path, save_png, PngSink};
use crate::job::{FrameIter, Job};
use crate::poses::{load_poses, save_poses};

/// Machine-readable summary written next to the frames of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub input_frames: u64,
    pub emitted: u64,
    pub snippets: u64,
    pub spatial_passes: u64,
    pub trailing: Option<u64>,
    pub dropped_inputs: Vec<u64>,
    pub target_updates: u64,
    pub keyframe_resolution: String,
    pub stage_means_ms: Vec<(String, f64)>,
    pub delay_ms: f64,
    pub over_budget: bool,
    pub amortized_ms_per_frame: Option<f64>,
}

pub const SUMMARY_FILE: &str = "run.toml";
pub const REPORT_FILE: &str = "report.txt";

fn summarize(job: &Job, outcome: &PipelineOutcome, report: &LatencyReport) -> RunSummary {
    RunSummary {
        input_frames: job.frame_count as u64,
        emitted: outcome.emitted,
        snippets: outcome.snippets,
        spatial_passes: outcome.spatial_passes,
        trailing: outcome.trailing,
        dropped_inputs: outcome.dropped_inputs.clone(),
        target_updates: outcome.target_updates,
        keyframe_resolution: job.pipeline.resolution.to_string(),
        stage_means_ms: StageKind::ALL
            .iter()
            .zip(report.stage_means_ms)
            .map(|(s, ms)| (s.name().to_string(), ms))
            .collect(),
        delay_ms: report.delay_ms,
        over_budget: report.over_budget,
        amortized_ms_per_frame: report.amortized_ms_per_frame,
    }
}

/// `preload` decodes or renders every input up front so the timings cover
/// the pipeline alone.
fn execute(job: &Job, sink: &mut dyn StreamSink, preload: bool) -> Result<(PipelineOutcome, LatencyReport)> {
    let frames: FrameIter = if preload {
        Box::new(job.frames(false).collect::<Vec<_>>().into_iter())
    } else {
        job.frames(false)
    };
    let outcome = run_pipeline(frames, &job.rig, job.targets.clone(), &job.stages, &job.pipeline, sink)?;
    let report = latency_report(&outcome.ledger)?;
    Ok((outcome, report))
}

/// Streams the configured input into `out` and returns the text report.
pub fn run(cfg: &Config, out: &Path) -> Result<String> {
    let job = Job::prepare(cfg)?;
    let mut sink = PngSink::new(out);
    let (outcome, report) = execute(&job, &mut sink, false)?;
    let summary = summarize(&job, &outcome, &report);
    let mut text = format!(
        "{} input frames, {} emitted at {}, {} spatial passes\n\n{report}",
        job.frame_count,
        outcome.emitted,
        job.pipeline.resolution.doubled(),
        outcome.spatial_passes
    );
    if !outcome.dropped_inputs.is_empty() {
        let _ = writeln!(text, "dropped inputs: {:?}", outcome.dropped_inputs);
    }
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let summary_text = toml::to_string(&summary).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    fs::write(out.join(SUMMARY_FILE), summary_text).map_err(|e| CliError::io(out.join(SUMMARY_FILE), e))?;
    fs::write(out.join(REPORT_FILE), &text).map_err(|e| CliError::io(out.join(REPORT_FILE), e))?;
    Ok(text)
}

struct CountingSink(u64);

impl StreamSink for CountingSink {
    fn emit(&mut self, _frame: NovelFrame) -> splatstream::Result<()> {
        self.0 += 1;
        Ok(())
    }
}

/// One row per keyframe resolution with the stage breakdown.
pub fn bench(cfg: &Config, resolutions: &[Resolution]) -> Result<String> {
    let mut text = format!("{:<12}", "resolution");
    for s in StageKind::ALL {
        let _ = write!(text, " {:>14}", s.name());
    }
    let _ = writeln!(text, " {:>9} {:>9} {:>13} {:>8}", "total", "delay", "ms/frame", "fps");
    for &res in resolutions {
        let mut c = cfg.clone();
        c.pipeline.resolution = res.to_string();
        let job = Job::prepare(&c)?;
        let mut sink = CountingSink(0);
        let (_, r) = execute(&job, &mut sink, true)?;
        let _ = write!(text, "{:<12}", res.to_string());
        for ms in r.stage_means_ms {
            let _ = write!(text, " {ms:>14.2}");
        }
        let amortized = r.amortized_ms_per_frame.unwrap_or(f64::NAN);
        let flag = if r.over_budget { " OVER BUDGET" } else { "" };
        let _ = writeln!(
            text,
            " {:>9.2} {:>9.1} {:>13.2} {:>8.1}{flag}",
            r.component_sum_ms,
            r.delay_ms,
            amortized,
            r.fps().unwrap_or(f64::NAN)
        );
    }
    Ok(text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewScore {
    pub view: usize,
    pub frames: usize,
    pub psnr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub views: Vec<ViewScore>,
    /// Mean PSNR over every frame of every view.
    pub stream_psnr_db: f64,
    pub amortized_ms_per_frame: Option<f64>,
    pub poses: Option<PoseErrorReport>,
}

impl std::fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<8} {:>8} {:>10} {:>12}", "view", "frames", "PSNR (dB)", "ms/frame")?;
        for v in &self.views {
            writeln!(f, "{:<8} {:>8} {:>10.2} {:>12}", v.view, v.frames, v.psnr_db, "")?;
        }
        let frames: usize = self.views.iter().map(|v| v.frames).sum();
        let runtime = self
            .amortized_ms_per_frame
            .map_or_else(|| "n/a".to_string(), |ms| format!("{ms:.2}"));
        writeln!(f, "{:<8} {:>8} {:>10.2} {:>12}", "all", frames, self.stream_psnr_db, runtime)?;
        if let Some(p) = &self.poses {
            writeln!(
                f,
                "\nposes: RRA@{tau} {:.1}  RTA@{tau} {:.1}  AUC@30 {:.1}  ({} pairs)",
                p.rra,
                p.rta,
                p.auc_30,
                p.pairs.len(),
                tau = p.tau_deg
            )?;
        }
        Ok(())
    }
}

pub struct PoseComparison {
    pub pred: PathBuf,
    pub gt: PathBuf,
    pub tau_deg: f64,
    pub pairs: PairSet,
}

fn extrinsics(path: &Path) -> Result<Vec<Extrinsics>> {
    // Intrinsics play no part in the pose metrics.
    let dummy = Resolution::new(1, 1)?;
    Ok(load_poses(path, dummy)?.into_iter().map(|v| v.extrinsics).collect())
}

/// Scores predicted frames against references frame by frame. Every
/// predicted frame needs a reference; extra references are ignored.
pub fn metrics(pred: &Path, gt: &Path, poses: Option<&PoseComparison>) -> Result<MetricsReport> {
    let p = Dataset::open(pred, None)?;
    let g = Dataset::open(gt, None)?;
    if p.resolution() != g.resolution() {
        return Err(CliError::dataset(
            pred,
            format!("frames are {} but the references are {}", p.resolution(), g.resolution()),
        ));
    }
    let mut views = Vec::new();
    let (mut total, mut count) = (0.0, 0usize);
    for (slot, pv) in p.views().iter().enumerate() {
        let Some(gslot) = g.views().iter().position(|v| v.index == pv.index) else {
            return Err(CliError::dataset(gt, format!("no view_{} to compare against", pv.index)));
        };
        let n = pv.frames.len();
        if n > g.views()[gslot].frames.len() {
            return Err(CliError::dataset(
                gt,
                format!("view_{} has {} frames, fewer than the {n} predicted", pv.index, g.views()[gslot].frames.len()),
            ));
        }
        let mut sum = 0.0;
        for t in 0..n {
            sum += psnr(&p.load(slot, t)?, &g.load(gslot, t)?)?;
        }
        total += sum;
        count += n;
        views.push(ViewScore {
            view: pv.index,
            frames: n,
            psnr_db: sum / n as f64,
        });
    }
    let summary = pred.join(SUMMARY_FILE);
    let amortized_ms_per_frame = if summary.is_file() {
        read_toml::<RunSummary>(&summary)?.amortized_ms_per_frame
    } else {
        None
    };
    let poses = poses
        .map(|c| pose_error_metrics(&extrinsics(&c.pred)?, &extrinsics(&c.gt)?, c.tau_deg, c.pairs).map_err(CliError::from))
        .transpose()?;
    Ok(MetricsReport {
        views,
        stream_psnr_db: total / count as f64,
        amortized_ms_per_frame,
        poses,
    })
}

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub spec: SyntheticSceneSpec,
    /// Azimuth of the target viewpoint on the rig circle.
    pub target_azimuth_deg: f64,
    /// Size of the reference renders in `gt/`; `None` skips them.
    pub gt_resolution: Option<Resolution>,
}

/// Writes a synthetic fixture: input views, rig and target poses, the
/// scene description and reference renders from the target.
pub fn synth(opts: &SynthOptions, out: &Path) -> Result<()> {
    let scene = SyntheticScene::new(opts.spec.clone())?;
    let ring = &opts.spec.rig;
    for t in 0..scene.frames() {
        let frame = scene.input_frame(t)?;
        for (k, view) in frame.views().iter().enumerate() {
            save_png(view, &frame_path(out, k, t))?;
        }
    }
    save_poses(&out.join("poses.toml"), scene.rig(), ring.width)?;
    let target = ring.view_at(opts.target_azimuth_deg)?;
    save_poses(&out.join("target.pose"), &[target], ring.width)?;
    let spec_text = toml::to_string(&opts.spec).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    fs::write(out.join("synthetic.toml"), spec_text).map_err(|e| CliError::io(out.join("synthetic.toml"), e))?;
    if let Some(res) = opts.gt_resolution {
        let view = CameraView::new(
            target.extrinsics,
            Intrinsics::from_normalized(ring.focal, res.width, res.height)?,
        );
        for t in 0..scene.frames() {
            let fb = render_scene(&scene.scene(t), &[view], res, t)?;
            save_png(&fb.views()[0], &frame_path(&out.join("gt"), 0, t))?;
        }
    }
    Ok(())
}
