//! WebAssembly bindings for the demo page in `www/`.

use splatstream::camera::{CameraView, Extrinsics, Intrinsics};
use splatstream::gaussian::rasterize;
use splatstream::scheduler::{latency_report, plan_snippets, LatencyLedger, StageKind, TrailingPolicy};
use splatstream::synthetic::{SyntheticScene, SyntheticSceneSpec};
use wasm_bindgen::prelude::*;

fn js_err(e: splatstream::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// A seeded synthetic scene that can be viewed from anywhere on its orbit.
#[wasm_bindgen]
pub struct Scene {
    inner: SyntheticScene,
}

#[wasm_bindgen]
impl Scene {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, num_gaussians: usize) -> Result<Scene, JsError> {
        let spec = SyntheticSceneSpec {
            seed,
            num_gaussians,
            frames: 600,
            ..SyntheticSceneSpec::default()
        };
        Ok(Scene {
            inner: SyntheticScene::new(spec).map_err(js_err)?,
        })
    }

    /// RGBA pixels of frame `t` seen from the given orbit position.
    pub fn render(&self, t: u64, azimuth_deg: f64, elevation_deg: f64, width: usize, height: usize) -> Result<Vec<u8>, JsError> {
        let view = CameraView::new(
            Extrinsics::orbit(azimuth_deg, elevation_deg, self.inner.spec().rig.radius).map_err(js_err)?,
            Intrinsics::from_normalized(self.inner.spec().rig.focal, width, height).map_err(js_err)?,
        );
        let fb = rasterize(&self.inner.scene(t % self.inner.frames()), &view, width, height).map_err(js_err)?;
        Ok(fb
            .to_rgb8()
            .chunks_exact(3)
            .flat_map(|p| [p[0], p[1], p[2], 255])
            .collect())
    }
}

/// Text listing of the snippets for `num_frames` inputs and the output
/// frame each input index lands on.
#[wasm_bindgen]
pub fn snippet_plan(num_frames: u64, passthrough: bool) -> Result<String, JsError> {
    let policy = if passthrough {
        TrailingPolicy::Passthrough
    } else {
        TrailingPolicy::Drop
    };
    let schedule = plan_snippets(num_frames).map_err(js_err)?;
    let mut out = String::new();
    for (i, s) in schedule.snippets.iter().enumerate() {
        let [lo, mid, hi] = s.indices();
        let emits = if s.is_first { format!("{lo} {mid} {hi}") } else { format!("{mid} {hi}") };
        out.push_str(&format!("snippet {i:>4}: keyframes {lo:>4} {hi:>4}, interpolated {mid:>4}, emits {emits}\n"));
    }
    if let Some(t) = schedule.trailing {
        let fate = if passthrough { "emitted as is" } else { "dropped" };
        out.push_str(&format!("trailing input {t}: {fate}\n"));
    }
    out.push_str(&format!(
        "{} snippets, {} spatial passes, {} of {num_frames} frames emitted\n",
        schedule.snippets.len(),
        schedule.snippets.len() + 1,
        schedule.emitted_frames(policy)
    ));
    Ok(out)
}

/// Latency table for per-stage costs in stage order (pose, spatial,
/// rendering, interpolation, super-resolution).
#[wasm_bindgen]
pub fn latency_breakdown(stage_ms: Vec<f64>, input_fps: f64, budget_ms: f64) -> Result<String, JsError> {
    if stage_ms.len() != StageKind::ALL.len() {
        return Err(JsError::new(&format!("expected {} stage costs", StageKind::ALL.len())));
    }
    let mut ledger = LatencyLedger::new(input_fps)
        .and_then(|l| l.with_budget_ms(budget_ms))
        .map_err(js_err)?;
    for (stage, ms) in StageKind::ALL.into_iter().zip(stage_ms) {
        ledger.record_ms(stage, ms).map_err(js_err)?;
    }
    Ok(latency_report(&ledger).map_err(js_err)?.to_string())
}
