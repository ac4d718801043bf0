use nalgebra::Vector3;

use super::{sh, GaussianPrimitive, GaussianScene, DEFAULT_SH_DEGREE};
use crate::camera::{CameraView, Extrinsics};
use crate::error::{Error, Result};
use crate::frame::FrameBuffer;

pub const DEFAULT_INIT_OPACITY: f64 = 0.8;
/// Splat standard deviation in source-image pixels.
pub const DEFAULT_PIXEL_FOOTPRINT: f64 = 0.5;

/// Per-pixel 3D points with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMap {
    width: usize,
    height: usize,
    points: Vec<Vector3<f64>>,
    valid: Vec<bool>,
}

impl PointMap {
    pub fn new(width: usize, height: usize, points: Vec<Vector3<f64>>, valid: Vec<bool>) -> Result<Self> {
        if points.len() != width * height || valid.len() != width * height {
            return Err(Error::invalid(format!(
                "point map of {width}x{height} needs {} points and mask entries, got {} and {}",
                width * height,
                points.len(),
                valid.len()
            )));
        }
        Ok(Self {
            width,
            height,
            points,
            valid,
        })
    }

    pub fn fully_valid(width: usize, height: usize, points: Vec<Vector3<f64>>) -> Result<Self> {
        Self::new(width, height, points, vec![true; width * height])
    }

    /// Back-projects every pixel center of `view` to camera depth `depth`.
    pub fn constant_depth(view: &CameraView, width: usize, height: usize, depth: f64) -> Result<Self> {
        if !(depth > 0.0) {
            return Err(Error::invalid(format!("depth {depth} must be positive")));
        }
        let k = &view.intrinsics;
        let to_world = view.extrinsics.inverse();
        let mut points = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let cam = Vector3::new(
                    (x as f64 + 0.5 - k.c_x) / k.focal_x * depth,
                    (y as f64 + 0.5 - k.c_y) / k.focal_y * depth,
                    depth,
                );
                points.push(to_world.transform_point(&cam));
            }
        }
        Self::fully_valid(width, height, points)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitOptions {
    pub opacity: f64,
    pub sh_degree: u8,
    /// Isotropic scale per unit of depth (pixel footprint / focal length).
    pub scale_per_depth: f64,
    /// Camera whose optical axis measures depth.
    pub camera: Extrinsics,
}

impl InitOptions {
    /// Options whose splats span [`DEFAULT_PIXEL_FOOTPRINT`] pixels of `view`.
    pub fn for_view(view: &CameraView) -> Self {
        let k = &view.intrinsics;
        Self {
            opacity: DEFAULT_INIT_OPACITY,
            sh_degree: DEFAULT_SH_DEGREE,
            scale_per_depth: DEFAULT_PIXEL_FOOTPRINT / (k.focal_x * k.focal_y).sqrt(),
            camera: view.extrinsics,
        }
    }
}

/// One primitive per valid point, colored from the matching pixel.
pub fn gaussians_from_pointmap(pm: &PointMap, colors: &FrameBuffer, opts: &InitOptions) -> Result<GaussianScene> {
    if pm.dims() != colors.dims() {
        return Err(Error::invalid(format!(
            "point map is {:?} but color image is {:?}",
            pm.dims(),
            colors.dims()
        )));
    }
    if !(opts.scale_per_depth > 0.0) {
        return Err(Error::invalid("scale_per_depth must be positive"));
    }
    let mut prims = Vec::with_capacity(pm.points.len());
    for (i, (p, _)) in pm.points.iter().zip(&pm.valid).enumerate().filter(|(_, (_, v))| **v) {
        let depth = opts.camera.transform_point(p).z;
        if !(depth > 0.0) {
            continue;
        }
        let mut coeffs = vec![0.0; sh::coeffs_len(opts.sh_degree)];
        let rgb = colors.pixel(i % pm.width, i / pm.width);
        for c in 0..3 {
            coeffs[c] = sh::dc_from_color(rgb[c]);
        }
        prims.push(GaussianPrimitive {
            mean: *p,
            rotation: crate::camera::Quaternion::IDENTITY,
            scale: Vector3::repeat(depth * opts.scale_per_depth),
            opacity: opts.opacity,
            sh: coeffs,
        });
    }
    GaussianScene::new(opts.sh_degree, prims)
}
