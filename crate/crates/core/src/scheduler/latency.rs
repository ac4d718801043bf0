use std::fmt;
use std::time::Duration;

use crate::error::{Error, Result};

/// Stream delay at or above this is flagged.
pub const DEFAULT_BUDGET_MS: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StageKind {
    CameraPose,
    Spatial,
    Rendering,
    Interpolation,
    SuperRes,
}

impl StageKind {
    pub const ALL: [StageKind; 5] = [
        StageKind::CameraPose,
        StageKind::Spatial,
        StageKind::Rendering,
        StageKind::Interpolation,
        StageKind::SuperRes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StageKind::CameraPose => "camera_pose",
            StageKind::Spatial => "spatial",
            StageKind::Rendering => "rendering",
            StageKind::Interpolation => "interpolation",
            StageKind::SuperRes => "superres",
        }
    }

    fn label(self) -> &'static str {
        match self {
            StageKind::CameraPose => "Camera pose",
            StageKind::Spatial => "Spatial",
            StageKind::Rendering => "Rendering",
            StageKind::Interpolation => "Interpolation",
            StageKind::SuperRes => "Super-resolution",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

/// Per-invocation stage timings plus the run totals needed for the
/// amortized runtime.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyLedger {
    samples: [Vec<f64>; 5],
    input_interval_ms: f64,
    budget_ms: f64,
    wall_ms: f64,
    emitted_frames: u64,
}

impl LatencyLedger {
    pub fn new(input_fps: f64) -> Result<Self> {
        if !(input_fps > 0.0) || !input_fps.is_finite() {
            return Err(Error::config("input.fps", format!("{input_fps} is not a positive frame rate")));
        }
        Ok(Self {
            samples: Default::default(),
            input_interval_ms: 1000.0 / input_fps,
            budget_ms: DEFAULT_BUDGET_MS,
            wall_ms: 0.0,
            emitted_frames: 0,
        })
    }

    pub fn with_budget_ms(mut self, budget_ms: f64) -> Result<Self> {
        if !(budget_ms > 0.0) {
            return Err(Error::config("latency.budget_ms", format!("{budget_ms} must be positive")));
        }
        self.budget_ms = budget_ms;
        Ok(self)
    }

    pub fn input_interval_ms(&self) -> f64 {
        self.input_interval_ms
    }

    pub fn record(&mut self, stage: StageKind, elapsed: Duration) {
        self.samples[stage.slot()].push(elapsed.as_secs_f64() * 1e3);
    }

    pub fn record_ms(&mut self, stage: StageKind, ms: f64) -> Result<()> {
        if !(ms >= 0.0) || !ms.is_finite() {
            return Err(Error::invalid(format!("{} sample {ms} ms is not a duration", stage.name())));
        }
        self.samples[stage.slot()].push(ms);
        Ok(())
    }

    /// Wall time of the streaming run (pose resolution excluded) and the
    /// number of frames it emitted.
    pub fn set_run(&mut self, wall: Duration, emitted_frames: u64) {
        self.wall_ms = wall.as_secs_f64() * 1e3;
        self.emitted_frames = emitted_frames;
    }

    pub fn samples(&self, stage: StageKind) -> &[f64] {
        &self.samples[stage.slot()]
    }

    pub fn mean_ms(&self, stage: StageKind) -> Option<f64> {
        let s = self.samples(stage);
        (!s.is_empty()).then(|| s.iter().sum::<f64>() / s.len() as f64)
    }

    pub fn wall_ms(&self) -> f64 {
        self.wall_ms
    }

    pub fn emitted_frames(&self) -> u64 {
        self.emitted_frames
    }

    /// Sum of stage means over the stages sampled so far.
    pub fn component_sum_ms(&self) -> f64 {
        StageKind::ALL.iter().filter_map(|&s| self.mean_ms(s)).sum()
    }

    /// Two input intervals of buffering plus the snippet processing time.
    pub fn delay_ms(&self) -> f64 {
        2.0 * self.input_interval_ms + self.component_sum_ms()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    pub stage_means_ms: [f64; 5],
    pub component_sum_ms: f64,
    pub input_interval_ms: f64,
    pub delay_ms: f64,
    pub budget_ms: f64,
    pub over_budget: bool,
    /// `None` before any frame was emitted.
    pub amortized_ms_per_frame: Option<f64>,
    pub emitted_frames: u64,
}

impl LatencyReport {
    pub fn fps(&self) -> Option<f64> {
        self.amortized_ms_per_frame.filter(|&ms| ms > 0.0).map(|ms| 1000.0 / ms)
    }
}

pub fn latency_report(ledger: &LatencyLedger) -> Result<LatencyReport> {
    let mut stage_means_ms = [0.0; 5];
    for stage in StageKind::ALL {
        stage_means_ms[stage.slot()] = ledger
            .mean_ms(stage)
            .ok_or_else(|| Error::invalid(format!("no {} samples in the ledger", stage.name())))?;
    }
    let delay_ms = ledger.delay_ms();
    Ok(LatencyReport {
        stage_means_ms,
        component_sum_ms: stage_means_ms.iter().sum(),
        input_interval_ms: ledger.input_interval_ms,
        delay_ms,
        budget_ms: ledger.budget_ms,
        over_budget: delay_ms >= ledger.budget_ms,
        amortized_ms_per_frame: (ledger.emitted_frames > 0).then(|| ledger.wall_ms / ledger.emitted_frames as f64),
        emitted_frames: ledger.emitted_frames,
    })
}

impl fmt::Display for LatencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<22} {:>12}", "Component", "Runtime (ms)")?;
        writeln!(f, "{:-<22} {:->12}", "", "")?;
        for stage in StageKind::ALL {
            writeln!(f, "{:<22} {:>12.1}", stage.label(), self.stage_means_ms[stage.slot()])?;
        }
        writeln!(f, "{:-<22} {:->12}", "", "")?;
        writeln!(f, "{:<22} {:>12.1}", "Total", self.component_sum_ms)?;
        writeln!(f, "{:<22} {:>12.1}", "Input interval", self.input_interval_ms)?;
        let flag = if self.over_budget { "  OVER BUDGET" } else { "" };
        writeln!(f, "{:<22} {:>12.1}{flag}", "Stream delay", self.delay_ms)?;
        match self.amortized_ms_per_frame {
            Some(ms) => writeln!(f, "{:<22} {:>12.1}  ({} frames)", "Amortized per frame", ms, self.emitted_frames),
            None => writeln!(f, "{:<22} {:>12}", "Amortized per frame", "n/a"),
        }
    }
}
