//! Pinhole camera model: world-to-camera extrinsics `[R | T]`, centered
//! intrinsics derived from a normalized focal length, the 7-component pose
//! embedding, projection and relative-pose accuracy metrics.
//!
//! Camera axes follow the usual computer-vision convention: `+x` right,
//! `+y` down, `+z` forward.

mod pose_metrics;
mod quaternion;

use nalgebra::{Matrix3, Matrix4, Vector3};

use crate::error::{Error, Result};

pub use pose_metrics::{pose_error_metrics, PairSet, PoseErrorReport};
pub use quaternion::Quaternion;

/// Points at or closer than this depth are culled.
pub const NEAR_PLANE: f64 = 1e-4;

const ORTHONORMAL_TOL: f64 = 1e-6;

/// World-to-camera rigid transform: `x_cam = R * x_world + T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrinsics {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Extrinsics {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::invalid("non-finite extrinsics"));
        }
        let det = rotation.determinant();
        if det <= 0.0 {
            return Err(Error::invalid(format!(
                "rotation determinant {det} is not positive"
            )));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if ortho > ORTHONORMAL_TOL || (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::invalid(format!(
                "rotation is not orthonormal (deviation {ortho:e}, det {det})"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_quaternion(q: Quaternion, translation: Vector3<f64>) -> Result<Self> {
        Self::new(q.to_rotation()?, translation)
    }

    /// Camera at `eye` looking at `target`, with `up` the world up direction.
    pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Result<Self> {
        let forward = target - eye;
        if forward.norm() < f64::EPSILON {
            return Err(Error::invalid("look_at eye and target coincide"));
        }
        let forward = forward.normalize();
        let right = forward.cross(&up);
        if right.norm() < 1e-9 {
            return Err(Error::invalid("look_at view direction is parallel to up"));
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        Self::new(rotation, -(rotation * eye))
    }

    /// Orbit camera looking at the origin. Zero azimuth and elevation places
    /// the camera at `(0, 0, radius)`; azimuth turns about world `+y`,
    /// which is also the up direction.
    pub fn orbit(azimuth_deg: f64, elevation_deg: f64, radius: f64) -> Result<Self> {
        if radius <= 0.0 || !radius.is_finite() {
            return Err(Error::invalid(format!("orbit radius {radius} must be positive")));
        }
        if elevation_deg.abs() >= 90.0 {
            return Err(Error::invalid("orbit elevation must lie strictly inside (-90, 90)"));
        }
        let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
        let eye = Vector3::new(el.cos() * az.sin(), el.sin(), el.cos() * az.cos()) * radius;
        Self::look_at(eye, Vector3::zeros(), Vector3::y())
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn quaternion(&self) -> Quaternion {
        // Rotation was validated at construction.
        Quaternion::from_rotation(&self.rotation).unwrap_or(Quaternion::IDENTITY)
    }

    pub fn camera_center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ rhs`: apply `rhs` first.
    pub fn compose(&self, rhs: &Extrinsics) -> Self {
        Self {
            rotation: self.rotation * rhs.rotation,
            translation: self.rotation * rhs.translation + self.translation,
        }
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub focal_x: f64,
    pub focal_y: f64,
    pub c_x: f64,
    pub c_y: f64,
}

impl Intrinsics {
    pub fn new(focal_x: f64, focal_y: f64, c_x: f64, c_y: f64) -> Result<Self> {
        if !(focal_x > 0.0 && focal_y > 0.0) || !focal_x.is_finite() || !focal_y.is_finite() {
            return Err(Error::invalid(format!(
                "focal lengths ({focal_x}, {focal_y}) must be positive"
            )));
        }
        if !c_x.is_finite() || !c_y.is_finite() {
            return Err(Error::invalid("non-finite principal point"));
        }
        Ok(Self {
            focal_x,
            focal_y,
            c_x,
            c_y,
        })
    }

    /// Centered principal point, `focal_x = focal * W`, `focal_y = focal * H`.
    pub fn from_normalized(focal: f64, width: usize, height: usize) -> Result<Self> {
        if !(focal > 0.0) || !focal.is_finite() {
            return Err(Error::invalid(format!("normalized focal {focal} must be positive")));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("image size {width}x{height} is empty")));
        }
        let (w, h) = (width as f64, height as f64);
        Self::new(focal * w, focal * h, w / 2.0, h / 2.0)
    }

    /// Intrinsics for the same camera at `factor` times the resolution.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            focal_x: self.focal_x * factor,
            focal_y: self.focal_y * factor,
            c_x: self.c_x * factor,
            c_y: self.c_y * factor,
        }
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.focal_x,
            0.0,
            self.c_x,
            0.0,
            self.focal_y,
            self.c_y,
            0.0,
            0.0,
            1.0,
        )
    }
}

/// A posed camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraView {
    pub extrinsics: Extrinsics,
    pub intrinsics: Intrinsics,
}

impl CameraView {
    pub fn new(extrinsics: Extrinsics, intrinsics: Intrinsics) -> Self {
        Self {
            extrinsics,
            intrinsics,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.extrinsics, self.intrinsics.scaled(factor))
    }
}

/// Rotation quaternion plus translation divided by a scene scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseEmbedding {
    pub quaternion: Quaternion,
    pub translation: [f64; 3],
}

impl PoseEmbedding {
    pub fn to_array(&self) -> [f64; 7] {
        let q = self.quaternion;
        let t = self.translation;
        [q.w, q.x, q.y, q.z, t[0], t[1], t[2]]
    }

    pub fn from_array(v: [f64; 7]) -> Result<Self> {
        Ok(Self {
            quaternion: Quaternion::new(v[0], v[1], v[2], v[3]).normalized()?,
            translation: [v[4], v[5], v[6]],
        })
    }
}

fn check_scale(scale: f64) -> Result<()> {
    if scale > 0.0 && scale.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("scene scale {scale} must be positive")))
    }
}

pub fn pack_pose(e: &Extrinsics, scale: f64) -> Result<PoseEmbedding> {
    check_scale(scale)?;
    let t = e.translation() / scale;
    Ok(PoseEmbedding {
        quaternion: Quaternion::from_rotation(e.rotation())?,
        translation: [t.x, t.y, t.z],
    })
}

pub fn unpack_pose(p: &PoseEmbedding, scale: f64) -> Result<Extrinsics> {
    check_scale(scale)?;
    let t = Vector3::from(p.translation) * scale;
    Extrinsics::from_quaternion(p.quaternion, t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

/// Pinhole projection to continuous pixel coordinates (pixel `i` spans
/// `[i, i + 1)`). Returns `None` when the point is not in front of the near
/// plane.
pub fn project_point(x: &Vector3<f64>, e: &Extrinsics, k: &Intrinsics) -> Option<Projection> {
    project_camera_point(&e.transform_point(x), k)
}

pub fn project_camera_point(p: &Vector3<f64>, k: &Intrinsics) -> Option<Projection> {
    if p.z <= NEAR_PLANE {
        return None;
    }
    Some(Projection {
        u: k.c_x + k.focal_x * p.x / p.z,
        v: k.c_y + k.focal_y * p.y / p.z,
        depth: p.z,
    })
}
