//! 3D Gaussian scenes and their forward rendering.

mod init;
mod raster;
mod reference;
pub mod sh;

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector3};

use crate::camera::{CameraView, Extrinsics, Intrinsics, Quaternion, NEAR_PLANE};
use crate::error::{Error, Result};

pub use init::{gaussians_from_pointmap, InitOptions, PointMap, DEFAULT_INIT_OPACITY, DEFAULT_PIXEL_FOOTPRINT};
pub use raster::{rasterize, TILE_SIZE};
pub use reference::rasterize_reference;

/// Variance added to both screen axes of every splat, in px².
pub const LOW_PASS_VARIANCE: f64 = 0.3;
/// Contributions below this alpha are skipped; a pixel stops once its
/// transmittance falls below it.
pub const ALPHA_THRESHOLD: f64 = 1.0 / 255.0;
/// Upper bound on a single splat's alpha.
pub const MAX_ALPHA: f64 = 0.99;
pub const DEFAULT_SH_DEGREE: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrimitive {
    pub mean: Vector3<f64>,
    pub rotation: Quaternion,
    pub scale: Vector3<f64>,
    pub opacity: f64,
    /// `3 * (degree + 1)^2` coefficients, see [`sh`] for the layout.
    pub sh: Vec<f64>,
}

impl GaussianPrimitive {
    /// Degree-0 primitive with a constant color.
    pub fn solid(mean: Vector3<f64>, scale: Vector3<f64>, opacity: f64, rgb: [f64; 3], degree: u8) -> Self {
        let mut coeffs = vec![0.0; sh::coeffs_len(degree)];
        for c in 0..3 {
            coeffs[c] = sh::dc_from_color(rgb[c]);
        }
        Self {
            mean,
            rotation: Quaternion::IDENTITY,
            scale,
            opacity,
            sh: coeffs,
        }
    }

    fn validate(&self, degree: u8) -> Result<()> {
        if !self.mean.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("non-finite Gaussian mean"));
        }
        if !self.scale.iter().all(|&s| s > 0.0 && s.is_finite()) {
            return Err(Error::invalid(format!("Gaussian scale {:?} must be positive", self.scale)));
        }
        if !(0.0..=1.0).contains(&self.opacity) {
            return Err(Error::invalid(format!("opacity {} outside [0, 1]", self.opacity)));
        }
        self.rotation.normalized()?;
        if self.sh.len() != sh::coeffs_len(degree) {
            return Err(Error::invalid(format!(
                "{} SH coefficients, degree {degree} needs {}",
                self.sh.len(),
                sh::coeffs_len(degree)
            )));
        }
        if !self.sh.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("non-finite SH coefficient"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianScene {
    sh_degree: u8,
    primitives: Vec<GaussianPrimitive>,
    pub background: [f64; 3],
}

impl GaussianScene {
    pub fn new(sh_degree: u8, primitives: Vec<GaussianPrimitive>) -> Result<Self> {
        if sh_degree > sh::MAX_SH_DEGREE {
            return Err(Error::invalid(format!("SH degree {sh_degree} exceeds {}", sh::MAX_SH_DEGREE)));
        }
        for (i, g) in primitives.iter().enumerate() {
            g.validate(sh_degree)
                .map_err(|e| Error::invalid(format!("primitive {i}: {e}")))?;
        }
        Ok(Self {
            sh_degree,
            primitives,
            background: [0.0; 3],
        })
    }

    pub fn empty(sh_degree: u8) -> Self {
        Self {
            sh_degree: sh_degree.min(sh::MAX_SH_DEGREE),
            primitives: Vec::new(),
            background: [0.0; 3],
        }
    }

    pub fn with_background(mut self, rgb: [f64; 3]) -> Self {
        self.background = rgb;
        self
    }

    pub fn sh_degree(&self) -> u8 {
        self.sh_degree
    }

    pub fn primitives(&self) -> &[GaussianPrimitive] {
        &self.primitives
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }
}

/// `R diag(s)^2 R^T`.
pub fn covariance_3d(rotation: Quaternion, scale: &Vector3<f64>) -> Result<Matrix3<f64>> {
    if !scale.iter().all(|&s| s > 0.0 && s.is_finite()) {
        return Err(Error::invalid(format!("scale {scale:?} must be positive")));
    }
    let r = rotation.to_rotation()?;
    let m = r * Matrix3::from_diagonal(scale);
    Ok(m * m.transpose())
}

/// Jacobian of the pinhole projection at a camera-space point.
pub fn projection_jacobian(p_cam: &Vector3<f64>, k: &Intrinsics) -> Matrix2x3<f64> {
    let inv_z = 1.0 / p_cam.z;
    let inv_z2 = inv_z * inv_z;
    Matrix2x3::new(
        k.focal_x * inv_z,
        0.0,
        -k.focal_x * p_cam.x * inv_z2,
        0.0,
        k.focal_y * inv_z,
        -k.focal_y * p_cam.y * inv_z2,
    )
}

/// Screen-space covariance `J W Σ W^T J^T` before the low-pass dilation.
/// `None` when the mean is not in front of the near plane.
pub fn project_covariance_raw(g: &GaussianPrimitive, e: &Extrinsics, k: &Intrinsics) -> Result<Option<Matrix2<f64>>> {
    let p = e.transform_point(&g.mean);
    if p.z <= NEAR_PLANE {
        return Ok(None);
    }
    let cov = covariance_3d(g.rotation, &g.scale)?;
    let w = e.rotation();
    let jw = projection_jacobian(&p, k) * w;
    Ok(Some(jw * cov * jw.transpose()))
}

/// Screen-space covariance with [`LOW_PASS_VARIANCE`] added to the diagonal.
pub fn project_covariance(g: &GaussianPrimitive, e: &Extrinsics, k: &Intrinsics) -> Result<Option<Matrix2<f64>>> {
    Ok(project_covariance_raw(g, e, k)?.map(|c| c + Matrix2::identity() * LOW_PASS_VARIANCE))
}

/// A primitive after projection into one camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Splat {
    pub index: usize,
    pub center: [f64; 2],
    /// Upper triangle `(a, b, c)` of the inverse screen covariance.
    pub conic: [f64; 3],
    pub depth: f64,
    pub color: [f64; 3],
    pub opacity: f64,
    /// Largest eigenvalue of the screen covariance.
    pub max_variance: f64,
}

impl Splat {
    #[inline]
    pub fn alpha_at(&self, px: f64, py: f64) -> f64 {
        let dx = px - self.center[0];
        let dy = py - self.center[1];
        let [a, b, c] = self.conic;
        let power = -0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy);
        (self.opacity * power.exp()).min(MAX_ALPHA)
    }

    /// Half-width of a square outside which every alpha is below
    /// [`ALPHA_THRESHOLD`]; never less than 3σ. `None` when no pixel can
    /// reach the threshold.
    pub fn extent(&self) -> Option<f64> {
        if self.opacity.min(MAX_ALPHA) < ALPHA_THRESHOLD {
            return None;
        }
        let cutoff = (2.0 * (self.opacity / ALPHA_THRESHOLD).ln()).max(9.0).sqrt();
        Some(cutoff * self.max_variance.sqrt())
    }
}

pub(crate) fn project_splat(scene: &GaussianScene, index: usize, view: &CameraView) -> Option<Splat> {
    let g = &scene.primitives[index];
    let e = &view.extrinsics;
    let p = e.transform_point(&g.mean);
    let proj = crate::camera::project_camera_point(&p, &view.intrinsics)?;
    // Validated at scene construction, so projection cannot fail here.
    let cov = project_covariance(g, e, &view.intrinsics).ok()??;
    let det = cov[(0, 0)] * cov[(1, 1)] - cov[(0, 1)] * cov[(1, 0)];
    if !(det > 0.0) {
        return None;
    }
    let conic = [cov[(1, 1)] / det, -cov[(0, 1)] / det, cov[(0, 0)] / det];
    let mid = 0.5 * (cov[(0, 0)] + cov[(1, 1)]);
    let max_variance = mid + (mid * mid - det).max(0.0).sqrt();

    let dir = (g.mean - e.camera_center()).normalize();
    let color = sh::eval_unchecked(&g.sh, scene.sh_degree, &dir).map(|c| c.clamp(0.0, 1.0));
    Some(Splat {
        index,
        center: [proj.u, proj.v],
        conic,
        depth: proj.depth,
        color,
        opacity: g.opacity,
        max_variance,
    })
}

/// Projects every primitive and orders the survivors front to back, ties
/// broken by primitive index.
pub(crate) fn sorted_splats(scene: &GaussianScene, view: &CameraView) -> Vec<Splat> {
    let mut splats: Vec<Splat> = (0..scene.len())
        .filter_map(|i| project_splat(scene, i, view))
        .collect();
    splats.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.index.cmp(&b.index)));
    splats
}

pub(crate) fn check_render_target(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!("render target {width}x{height} is empty")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::project_point;
    use proptest::prelude::*;

    fn on_axis(depth: f64, scale: f64) -> GaussianPrimitive {
        GaussianPrimitive::solid(Vector3::new(0.0, 0.0, depth), Vector3::repeat(scale), 1.0, [1.0; 3], 0)
    }

    #[test]
    fn covariance_closed_forms() {
        let c = covariance_3d(Quaternion::IDENTITY, &Vector3::new(1.0, 1.0, 1.0)).unwrap();
        assert_eq!(c, Matrix3::identity());
        let c = covariance_3d(Quaternion::IDENTITY, &Vector3::new(2.0, 1.0, 1.0)).unwrap();
        assert_eq!(c, Matrix3::from_diagonal(&Vector3::new(4.0, 1.0, 1.0)));
        assert!(covariance_3d(Quaternion::IDENTITY, &Vector3::new(0.0, 1.0, 1.0)).is_err());
        assert!(covariance_3d(Quaternion::IDENTITY, &Vector3::new(1.0, -1.0, 1.0)).is_err());
    }

    #[test]
    fn isotropic_on_axis_projects_isotropically() {
        let k = Intrinsics::new(200.0, 200.0, 32.0, 32.0).unwrap();
        let c = project_covariance_raw(&on_axis(5.0, 0.3), &Extrinsics::identity(), &k)
            .unwrap()
            .unwrap();
        assert!(c[(0, 1)].abs() < 1e-9 && c[(1, 0)].abs() < 1e-9);
        assert!((c[(0, 0)] - c[(1, 1)]).abs() < 1e-9);
    }

    #[test]
    fn doubling_depth_quarters_variance() {
        let k = Intrinsics::new(200.0, 200.0, 32.0, 32.0).unwrap();
        let e = Extrinsics::identity();
        let near = project_covariance_raw(&on_axis(2.0, 0.1), &e, &k).unwrap().unwrap();
        let far = project_covariance_raw(&on_axis(4.0, 0.1), &e, &k).unwrap().unwrap();
        assert!((far[(0, 0)] / near[(0, 0)] - 0.25).abs() < 1e-12);
        assert!((far[(1, 1)] / near[(1, 1)] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn behind_camera_is_culled() {
        let k = Intrinsics::new(200.0, 200.0, 32.0, 32.0).unwrap();
        assert!(project_covariance(&on_axis(-1.0, 0.1), &Extrinsics::identity(), &k)
            .unwrap()
            .is_none());
    }

    #[test]
    fn dilation_adds_low_pass_floor() {
        let k = Intrinsics::new(200.0, 200.0, 32.0, 32.0).unwrap();
        let e = Extrinsics::identity();
        let g = on_axis(3.0, 0.05);
        let raw = project_covariance_raw(&g, &e, &k).unwrap().unwrap();
        let dil = project_covariance(&g, &e, &k).unwrap().unwrap();
        assert!((dil - raw - Matrix2::identity() * LOW_PASS_VARIANCE).abs().max() < 1e-12);
    }

    #[test]
    fn scene_validation() {
        let mut g = on_axis(1.0, 0.1);
        assert!(GaussianScene::new(0, vec![g.clone()]).is_ok());
        assert!(GaussianScene::new(1, vec![g.clone()]).is_err());
        assert!(GaussianScene::new(4, vec![]).is_err());
        g.opacity = 1.5;
        assert!(GaussianScene::new(0, vec![g.clone()]).is_err());
        g.opacity = 0.5;
        g.scale.x = 0.0;
        assert!(GaussianScene::new(0, vec![g]).is_err());
    }

    proptest! {
        #[test]
        fn covariance_matches_explicit_product(
            q in prop::array::uniform4(-1.0f64..1.0),
            s in prop::array::uniform3(0.01f64..3.0),
        ) {
            let q = Quaternion::from_array(q);
            prop_assume!(q.norm() > 1e-3);
            let scale = Vector3::from(s);
            let r = q.to_rotation().unwrap();
            let d = Matrix3::from_diagonal(&scale.component_mul(&scale));
            let expected = r * d * r.transpose();
            let got = covariance_3d(q, &scale).unwrap();
            prop_assert!((got - expected).abs().max() < 1e-12);
            prop_assert!((got - got.transpose()).abs().max() < 1e-12);
            prop_assert!(got.symmetric_eigenvalues().min() > 0.0);
        }

        #[test]
        fn jacobian_matches_finite_differences(
            p in prop::array::uniform3(-2.0f64..2.0),
            depth in 0.5f64..20.0,
        ) {
            let k = Intrinsics::new(350.0, 280.0, 64.0, 48.0).unwrap();
            let x = Vector3::new(p[0], p[1], depth);
            let j = projection_jacobian(&x, &k);
            let e = Extrinsics::identity();
            let h = 1e-5;
            for axis in 0..3 {
                let mut dp = Vector3::zeros();
                dp[axis] = h;
                let a = project_point(&(x + dp), &e, &k).unwrap();
                let b = project_point(&(x - dp), &e, &k).unwrap();
                let fd = [(a.u - b.u) / (2.0 * h), (a.v - b.v) / (2.0 * h)];
                for row in 0..2 {
                    let analytic = j[(row, axis)];
                    let tol = 1e-4 * analytic.abs().max(1e-3);
                    prop_assert!((fd[row] - analytic).abs() <= tol, "J[{row},{axis}] {analytic} vs {}", fd[row]);
                }
            }
        }
    }
}
