//! Keyframe cadence, snippet assembly and latency accounting.
//!
//! Keyframes are the even input indices. Each snippet covers `(t, t+1, t+2)`:
//! two keyframe renders plus the interpolated middle. Adjacent snippets share
//! a keyframe, so every snippet after the first emits only `t+1` and `t+2`.

mod latency;
mod pipeline;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stages::NovelFrame;

pub use latency::{latency_report, LatencyLedger, LatencyReport, StageKind, DEFAULT_BUDGET_MS};
pub use pipeline::{run_pipeline, FnSink, PipelineConfig, PipelineOutcome, PosePredictor, PoseSource, StreamSink};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SnippetPlan {
    pub keyframe_lo: u64,
    pub middle: u64,
    pub keyframe_hi: u64,
    pub is_first: bool,
}

impl SnippetPlan {
    pub fn new(keyframe_lo: u64, is_first: bool) -> Self {
        Self {
            keyframe_lo,
            middle: keyframe_lo + 1,
            keyframe_hi: keyframe_lo + 2,
            is_first,
        }
    }

    pub fn indices(&self) -> [u64; 3] {
        [self.keyframe_lo, self.middle, self.keyframe_hi]
    }
}

/// What happens to the last input frame when the count is even.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrailingPolicy {
    /// Report it and emit nothing for it.
    #[default]
    Drop,
    /// Emit a copy of the last keyframe render in its slot.
    Passthrough,
}

impl std::str::FromStr for TrailingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drop" => Ok(TrailingPolicy::Drop),
            "passthrough" => Ok(TrailingPolicy::Passthrough),
            other => Err(Error::config(
                "pipeline.trailing",
                format!("unknown policy `{other}` (expected drop or passthrough)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnippetSchedule {
    pub snippets: Vec<SnippetPlan>,
    /// Input index left without a keyframe partner, if any.
    pub trailing: Option<u64>,
}

impl SnippetSchedule {
    /// Number of frames the schedule emits under `policy`.
    pub fn emitted_frames(&self, policy: TrailingPolicy) -> u64 {
        let base = 1 + 2 * self.snippets.len() as u64;
        match (self.trailing, policy) {
            (Some(_), TrailingPolicy::Passthrough) => base + 1,
            _ => base,
        }
    }
}

pub fn plan_snippets(num_input_frames: u64) -> Result<SnippetSchedule> {
    if num_input_frames < 3 {
        return Err(Error::invalid(format!(
            "a stream needs at least 3 input frames, got {num_input_frames}"
        )));
    }
    let last_keyframe = (num_input_frames - 1) & !1;
    let snippets = (0..last_keyframe)
        .step_by(2)
        .map(|t| SnippetPlan::new(t, t == 0))
        .collect();
    let trailing = num_input_frames.is_multiple_of(2).then_some(num_input_frames - 1);
    Ok(SnippetSchedule { snippets, trailing })
}

/// Emission bookkeeping. Frames enter with input indices and leave with
/// output indices, which differ only after a live-mode resync.
#[derive(Debug, Clone, Default)]
pub struct StreamState {
    next_emit_index: u64,
    skipped_inputs: u64,
    segment_open: bool,
    emitted: u64,
}

impl StreamState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_emit_index(&self) -> u64 {
        self.next_emit_index
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Input frames dropped so far by resyncs.
    pub fn skipped_inputs(&self) -> u64 {
        self.skipped_inputs
    }

    /// Ends the current segment after `skipped` input frames were dropped.
    /// The next snippet must be marked first and emits all three frames.
    pub fn resync(&mut self, skipped: u64) {
        self.skipped_inputs += skipped;
        self.segment_open = false;
    }

    fn output_index(&self, input: u64) -> Result<u64> {
        input.checked_sub(self.skipped_inputs).ok_or(Error::StreamConsistency {
            expected: self.next_emit_index,
            got: input,
        })
    }

    fn accept(&mut self, frame: NovelFrame) -> Result<NovelFrame> {
        let out = self.output_index(frame.timestamp())?;
        if out != self.next_emit_index {
            return Err(Error::StreamConsistency {
                expected: self.next_emit_index,
                got: out,
            });
        }
        self.next_emit_index += 1;
        self.emitted += 1;
        Ok(frame.with_timestamp(out))
    }

    /// Applies the discard rule to a completed snippet and returns the frames
    /// to emit, renumbered onto the output timeline.
    pub fn emit_snippet(&mut self, plan: &SnippetPlan, frames: [NovelFrame; 3]) -> Result<Vec<NovelFrame>> {
        for (f, want) in frames.iter().zip(plan.indices()) {
            if f.timestamp() != want {
                return Err(Error::StreamConsistency {
                    expected: want,
                    got: f.timestamp(),
                });
            }
        }
        if plan.is_first == self.segment_open {
            return Err(Error::invalid(format!(
                "snippet at {} is {}marked first but the stream {}",
                plan.keyframe_lo,
                if plan.is_first { "" } else { "not " },
                if self.segment_open { "is mid-segment" } else { "expects a new segment" }
            )));
        }
        self.segment_open = true;
        let skip = usize::from(!plan.is_first);
        frames.into_iter().skip(skip).map(|f| self.accept(f)).collect()
    }

    /// Emits a single frame outside a snippet (trailing passthrough).
    pub fn emit_single(&mut self, frame: NovelFrame) -> Result<NovelFrame> {
        self.accept(frame)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::FrameBuffer;
    use crate::stages::Provenance;
    use proptest::prelude::*;

    fn frame(t: u64) -> NovelFrame {
        NovelFrame::new(t, vec![FrameBuffer::new(1, 1)], Provenance::Keyframe).unwrap()
    }

    fn triple(p: &SnippetPlan) -> [NovelFrame; 3] {
        p.indices().map(frame)
    }

    fn simulate(n: u64) -> (Vec<u64>, Vec<usize>) {
        let schedule = plan_snippets(n).unwrap();
        let mut state = StreamState::new();
        let mut indices = Vec::new();
        let mut per_snippet = Vec::new();
        for p in &schedule.snippets {
            let out = state.emit_snippet(p, triple(p)).unwrap();
            per_snippet.push(out.len());
            indices.extend(out.iter().map(NovelFrame::timestamp));
        }
        (indices, per_snippet)
    }

    #[test]
    fn small_plans() {
        assert!(plan_snippets(2).is_err());
        let three = plan_snippets(3).unwrap();
        assert_eq!(three.snippets, vec![SnippetPlan::new(0, true)]);
        assert_eq!(three.trailing, None);
        let five = plan_snippets(5).unwrap();
        assert_eq!(five.snippets.iter().map(SnippetPlan::indices).collect::<Vec<_>>(), vec![[0, 1, 2], [2, 3, 4]]);
        assert_eq!(plan_snippets(4).unwrap().trailing, Some(3));
        assert_eq!(simulate(3).0, vec![0, 1, 2]);
        assert_eq!(simulate(5).0, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn three_hundred_frames() {
        let s = plan_snippets(300).unwrap();
        assert_eq!(s.snippets.len(), 149);
        assert_eq!(s.snippets.last().unwrap().indices(), [296, 297, 298]);
        assert_eq!(s.trailing, Some(299));
        assert_eq!(s.emitted_frames(TrailingPolicy::Drop), 299);
        assert_eq!(s.emitted_frames(TrailingPolicy::Passthrough), 300);
        assert_eq!(simulate(300).0.len(), 299);
    }

    #[test]
    fn mismatches_are_fatal() {
        let mut state = StreamState::new();
        let p = SnippetPlan::new(0, true);
        let bad = [frame(0), frame(2), frame(2)];
        assert!(matches!(state.emit_snippet(&p, bad), Err(Error::StreamConsistency { expected: 1, got: 2 })));

        let mut state = StreamState::new();
        state.emit_snippet(&p, triple(&p)).unwrap();
        // Skipping a snippet leaves a gap.
        let p4 = SnippetPlan::new(4, false);
        assert!(matches!(state.emit_snippet(&p4, triple(&p4)), Err(Error::StreamConsistency { expected: 3, got: 5 })));
        // Replaying a snippet repeats indices.
        assert!(state.emit_snippet(&p, triple(&p)).is_err());
        assert!(StreamState::new().emit_snippet(&p4, triple(&p4)).is_err());
    }

    #[test]
    fn resync_keeps_output_unit_stride() {
        let mut state = StreamState::new();
        let p0 = SnippetPlan::new(0, true);
        state.emit_snippet(&p0, triple(&p0)).unwrap();
        // Input 3 is dropped; a new segment starts at keyframe 4.
        state.resync(1);
        let p4 = SnippetPlan::new(4, true);
        let out = state.emit_snippet(&p4, triple(&p4)).unwrap();
        assert_eq!(out.iter().map(NovelFrame::timestamp).collect::<Vec<_>>(), vec![3, 4, 5]);
        let p6 = SnippetPlan::new(6, false);
        let out = state.emit_snippet(&p6, triple(&p6)).unwrap();
        assert_eq!(out.iter().map(NovelFrame::timestamp).collect::<Vec<_>>(), vec![6, 7]);
    }

    #[test]
    fn policy_names() {
        assert_eq!("passthrough".parse::<TrailingPolicy>().unwrap(), TrailingPolicy::Passthrough);
        assert!(matches!("pad".parse::<TrailingPolicy>(), Err(Error::Config { .. })));
    }

    proptest! {
        #[test]
        fn emission_is_unit_stride(n in 3u64..=10_000) {
            let (indices, per_snippet) = simulate(n);
            let last = 2 * ((n - 1) / 2);
            prop_assert_eq!(indices, (0..=last).collect::<Vec<_>>());
            prop_assert_eq!(per_snippet[0], 3);
            prop_assert!(per_snippet[1..].iter().all(|&k| k == 2));
        }
    }
}
