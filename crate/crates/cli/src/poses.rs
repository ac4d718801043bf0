//! Camera pose files.
//!
//! ```toml
//! scale = 2.0          # optional; translations are stored divided by it
//!
//! [[camera]]
//! quaternion = [1.0, 0.0, 0.0, 0.0]   # world-to-camera rotation, w first
//! translation = [0.0, 0.0, 2.0]
//! focal = 1.0                         # focal length / image width
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use splatstream::camera::{pack_pose, unpack_pose, CameraView, Intrinsics, PoseEmbedding, Quaternion};
use splatstream::stages::Resolution;
use splatstream::Error;

use crate::config::read_toml;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseEntry {
    quaternion: [f64; 4],
    translation: [f64; 3],
    focal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
    camera: Vec<PoseEntry>,
}

/// Reads a pose file; intrinsics are centered on a `res` image.
pub fn load_poses(path: &Path, res: Resolution) -> Result<Vec<CameraView>> {
    let file: PoseFile = read_toml(path)?;
    let origin = path.display();
    if file.camera.is_empty() {
        return Err(Error::config("camera", format!("{origin}: no [[camera]] entries")).into());
    }
    let scale = file.scale.unwrap_or(1.0);
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::config("scale", format!("{origin}: scale {scale} must be positive")).into());
    }
    file.camera
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let embedding = PoseEmbedding {
                quaternion: Quaternion::from_array(c.quaternion),
                translation: c.translation,
            };
            let wrap = |field: &str, e: Error| -> CliError {
                Error::config(format!("camera[{i}].{field}"), format!("{origin}: {e}")).into()
            };
            let extrinsics = unpack_pose(&embedding, scale).map_err(|e| wrap("quaternion", e))?;
            let intrinsics =
                Intrinsics::from_normalized(c.focal, res.width, res.height).map_err(|e| wrap("focal", e))?;
            Ok(CameraView::new(extrinsics, intrinsics))
        })
        .collect()
}

/// Writes `views` with unit scale; `width` normalizes the focal length.
pub fn save_poses(path: &Path, views: &[CameraView], width: usize) -> Result<()> {
    let camera = views
        .iter()
        .map(|v| {
            let p = pack_pose(&v.extrinsics, 1.0)?;
            Ok(PoseEntry {
                quaternion: p.quaternion.to_array(),
                translation: p.translation,
                focal: v.intrinsics.focal_x / width as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let text = toml::to_string(&PoseFile { scale: None, camera })
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
