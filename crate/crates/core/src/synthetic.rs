//! Deterministic moving Gaussian scenes with a ring of static cameras.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{CameraView, Extrinsics, Intrinsics, Quaternion};
use crate::error::{Error, Result};
use crate::gaussian::{rasterize, sh, GaussianPrimitive, GaussianScene};
use crate::stages::{render_scene, MultiViewFrame, NovelFrame, Resolution, SceneSource};

/// Per-primitive motion: `mean(t) = base + v t + a * sin(w t + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionModel {
    /// Upper bound on `|v|`, scene units per frame.
    pub max_speed: f64,
    /// Upper bound on each component of `a`.
    pub sin_amplitude: f64,
    /// `w`, radians per frame.
    pub sin_frequency: f64,
}

impl MotionModel {
    pub fn still() -> Self {
        Self {
            max_speed: 0.0,
            sin_amplitude: 0.0,
            sin_frequency: 0.0,
        }
    }

    pub fn is_still(&self) -> bool {
        self.max_speed == 0.0 && self.sin_amplitude == 0.0
    }
}

impl Default for MotionModel {
    fn default() -> Self {
        Self {
            max_speed: 0.002,
            sin_amplitude: 0.01,
            sin_frequency: 0.05,
        }
    }
}

/// Cameras spread evenly over an arc of a horizontal circle, all looking
/// at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraRing {
    pub num_cameras: usize,
    pub radius: f64,
    pub arc_deg: f64,
    pub elevation_deg: f64,
    /// Focal length over image width.
    pub focal: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for CameraRing {
    fn default() -> Self {
        Self {
            num_cameras: 4,
            radius: 4.0,
            arc_deg: 180.0,
            elevation_deg: 10.0,
            focal: 1.0,
            width: 128,
            height: 96,
        }
    }
}

impl CameraRing {
    /// Azimuth of camera `k`, the arc centered on azimuth 0.
    pub fn azimuth_deg(&self, k: usize) -> f64 {
        if self.num_cameras < 2 {
            return 0.0;
        }
        -self.arc_deg / 2.0 + self.arc_deg * k as f64 / (self.num_cameras - 1) as f64
    }

    /// Camera on the ring's circle at an arbitrary azimuth.
    pub fn view_at(&self, azimuth_deg: f64) -> Result<CameraView> {
        Ok(CameraView::new(
            Extrinsics::orbit(azimuth_deg, self.elevation_deg, self.radius)?,
            Intrinsics::from_normalized(self.focal, self.width, self.height)?,
        ))
    }

    pub fn cameras(&self) -> Result<Vec<CameraView>> {
        (0..self.num_cameras).map(|k| self.view_at(self.azimuth_deg(k))).collect()
    }

    pub fn resolution(&self) -> Result<Resolution> {
        Resolution::new(self.width, self.height)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSceneSpec {
    pub seed: u64,
    pub num_gaussians: usize,
    pub frames: u64,
    pub sh_degree: u8,
    /// Means are drawn uniformly from a ball of this radius.
    pub extent: f64,
    pub scale_range: [f64; 2],
    pub opacity_range: [f64; 2],
    pub background: [f64; 3],
    pub motion: MotionModel,
    pub rig: CameraRing,
}

impl Default for SyntheticSceneSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            num_gaussians: 256,
            frames: 50,
            sh_degree: 1,
            extent: 1.0,
            scale_range: [0.12, 0.3],
            opacity_range: [0.5, 0.95],
            background: [0.0; 3],
            motion: MotionModel::default(),
            rig: CameraRing::default(),
        }
    }
}

impl SyntheticSceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::config(format!("synthetic.{key}"), msg));
        if self.num_gaussians == 0 {
            return bad("num_gaussians", "must be positive".into());
        }
        if self.frames == 0 {
            return bad("frames", "must be positive".into());
        }
        if self.sh_degree > sh::MAX_SH_DEGREE {
            return bad("sh_degree", format!("{} exceeds {}", self.sh_degree, sh::MAX_SH_DEGREE));
        }
        if !(self.extent > 0.0) {
            return bad("extent", "must be positive".into());
        }
        let [s0, s1] = self.scale_range;
        if !(s0 > 0.0 && s0 <= s1 && s1.is_finite()) {
            return bad("scale_range", format!("[{s0}, {s1}] is not a positive interval"));
        }
        let [o0, o1] = self.opacity_range;
        if !(0.0 <= o0 && o0 <= o1 && o1 <= 1.0) {
            return bad("opacity_range", format!("[{o0}, {o1}] is not inside [0, 1]"));
        }
        let m = &self.motion;
        if !(m.max_speed >= 0.0 && m.sin_amplitude >= 0.0 && m.sin_frequency.is_finite()) {
            return bad("motion", "speeds and amplitudes must be nonnegative".into());
        }
        let r = &self.rig;
        if r.num_cameras == 0 || r.width == 0 || r.height == 0 {
            return bad("rig", "needs at least one camera and a nonempty image".into());
        }
        if !(r.radius > self.extent) {
            return bad("rig.radius", format!("{} must exceed the scene extent {}", r.radius, self.extent));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Mover {
    base: GaussianPrimitive,
    velocity: Vector3<f64>,
    amplitude: Vector3<f64>,
    phase: Vector3<f64>,
}

/// A seeded scene sequence and its static camera rig.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    spec: SyntheticSceneSpec,
    movers: Vec<Mover>,
    rig: Vec<CameraView>,
}

fn unit_vector(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi = rng.random_range(0.0..2.0 * PI);
    let r = (1.0 - z * z).sqrt();
    Vector3::new(r * phi.cos(), r * phi.sin(), z)
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Quaternion {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (t2, t3) = (2.0 * PI * u2, 2.0 * PI * u3);
    Quaternion::new(b * t3.cos(), a * t2.sin(), a * t2.cos(), b * t3.sin())
}

fn log_uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        return lo;
    }
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        return lo;
    }
    rng.random_range(lo..hi)
}

impl SyntheticScene {
    pub fn new(spec: SyntheticSceneSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let coeffs = sh::coeffs_len(spec.sh_degree);
        let movers = (0..spec.num_gaussians)
            .map(|_| {
                let mean = unit_vector(&mut rng) * spec.extent * rng.random::<f64>().cbrt();
                let scale = Vector3::from_fn(|_, _| log_uniform(&mut rng, spec.scale_range));
                let mut sh_coeffs = vec![0.0; coeffs];
                for c in &mut sh_coeffs[..3] {
                    *c = sh::dc_from_color(rng.random_range(0.15..0.95));
                }
                for c in &mut sh_coeffs[3..] {
                    *c = rng.random_range(-0.1..0.1);
                }
                let base = GaussianPrimitive {
                    mean,
                    rotation: random_rotation(&mut rng),
                    scale,
                    opacity: uniform(&mut rng, spec.opacity_range),
                    sh: sh_coeffs,
                };
                let velocity = unit_vector(&mut rng) * rng.random_range(0.0..=spec.motion.max_speed);
                let amplitude = Vector3::from_fn(|_, _| rng.random_range(0.0..=spec.motion.sin_amplitude));
                let phase = Vector3::from_fn(|_, _| rng.random_range(0.0..2.0 * PI));
                Mover {
                    base,
                    velocity,
                    amplitude,
                    phase,
                }
            })
            .collect();
        let rig = spec.rig.cameras()?;
        Ok(Self { spec, movers, rig })
    }

    pub fn spec(&self) -> &SyntheticSceneSpec {
        &self.spec
    }

    pub fn rig(&self) -> &[CameraView] {
        &self.rig
    }

    pub fn frames(&self) -> u64 {
        self.spec.frames
    }

    pub fn scene(&self, t: u64) -> GaussianScene {
        let tf = t as f64;
        let w = self.spec.motion.sin_frequency;
        let primitives = self
            .movers
            .iter()
            .map(|m| {
                let wobble = Vector3::from_fn(|i, _| m.amplitude[i] * (w * tf + m.phase[i]).sin());
                GaussianPrimitive {
                    mean: m.base.mean + m.velocity * tf + wobble,
                    ..m.base.clone()
                }
            })
            .collect();
        GaussianScene::new(self.spec.sh_degree, primitives)
            .expect("generated primitives are valid")
            .with_background(self.spec.background)
    }

    /// Input views at `t`, rendered from the rig at its own resolution.
    pub fn input_frame(&self, t: u64) -> Result<MultiViewFrame> {
        let scene = self.scene(t);
        let r = &self.spec.rig;
        let views = self
            .rig
            .iter()
            .map(|cam| rasterize(&scene, cam, r.width, r.height))
            .collect::<Result<Vec<_>>>()?;
        MultiViewFrame::new(t, views)
    }

    /// The full input stream, rendered lazily.
    pub fn input_frames(&self) -> impl Iterator<Item = Result<MultiViewFrame>> + '_ {
        (0..self.spec.frames).map(|t| self.input_frame(t))
    }

    /// Ground-truth novel views at `t`.
    pub fn ground_truth(&self, t: u64, targets: &[CameraView], res: Resolution) -> Result<NovelFrame> {
        render_scene(&self.scene(t), targets, res, t)
    }
}

impl SceneSource for SyntheticScene {
    fn scene_at(&self, timestamp: u64) -> Result<GaussianScene> {
        Ok(self.scene(timestamp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SyntheticSceneSpec {
        SyntheticSceneSpec {
            seed,
            num_gaussians: 16,
            frames: 10,
            rig: CameraRing {
                num_cameras: 3,
                width: 24,
                height: 16,
                ..CameraRing::default()
            },
            ..SyntheticSceneSpec::default()
        }
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let (a, b) = (SyntheticScene::new(small(3)).unwrap(), SyntheticScene::new(small(3)).unwrap());
        for t in [0, 5, 9] {
            assert_eq!(a.scene(t), b.scene(t));
        }
        assert_ne!(a.scene(0), SyntheticScene::new(small(4)).unwrap().scene(0));
    }

    #[test]
    fn still_motion_gives_identical_frames() {
        let s = SyntheticScene::new(SyntheticSceneSpec {
            motion: MotionModel::still(),
            ..small(1)
        })
        .unwrap();
        assert!(s.spec().motion.is_still());
        for t in 1..10 {
            assert_eq!(s.scene(t), s.scene(0));
        }
        assert_ne!(SyntheticScene::new(small(1)).unwrap().scene(5), s.scene(5));
    }

    #[test]
    fn inputs_match_direct_rasterization() {
        let s = SyntheticScene::new(small(2)).unwrap();
        let frames: Vec<_> = s.input_frames().collect::<Result<_>>().unwrap();
        assert_eq!(frames.len(), 10);
        for f in &frames {
            let scene = s.scene(f.timestamp());
            for (view, cam) in f.views().iter().zip(s.rig()) {
                assert_eq!(view, &rasterize(&scene, cam, 24, 16).unwrap());
            }
        }
    }

    #[test]
    fn ring_spans_the_arc() {
        let ring = CameraRing::default();
        let cams = ring.cameras().unwrap();
        assert_eq!(cams.len(), 4);
        let c0 = cams[0].extrinsics.camera_center();
        let c3 = cams[3].extrinsics.camera_center();
        // Opposite ends of a semicircle.
        assert!((c0 + c3).xz().norm() < 1e-9);
        for c in &cams {
            assert!((c.extrinsics.camera_center().norm() - ring.radius).abs() < 1e-9);
        }
    }

    #[test]
    fn validation() {
        for spec in [
            SyntheticSceneSpec { num_gaussians: 0, ..small(0) },
            SyntheticSceneSpec { scale_range: [0.3, 0.1], ..small(0) },
            SyntheticSceneSpec { opacity_range: [0.5, 1.5], ..small(0) },
            SyntheticSceneSpec { sh_degree: 4, ..small(0) },
        ] {
            assert!(matches!(SyntheticScene::new(spec), Err(Error::Config { .. })));
        }
    }
}
