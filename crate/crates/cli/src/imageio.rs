//! 8-bit image files and the `view_<k>/frame_<t>.png` directory layout.

use std::fs;
use std::path::{Path, PathBuf};

use splatstream::scheduler::StreamSink;
use splatstream::stages::NovelFrame;
use splatstream::FrameBuffer;

use crate::error::{CliError, Result};

pub fn view_dir(root: &Path, view: usize) -> PathBuf {
    root.join(format!("view_{view}"))
}

pub fn frame_path(root: &Path, view: usize, index: u64) -> PathBuf {
    view_dir(root, view).join(format!("frame_{index:06}.png"))
}

pub fn load_image(path: &Path) -> Result<FrameBuffer> {
    let img = image::open(path)
        .map_err(|source| CliError::Image {
            path: path.to_owned(),
            source,
        })?
        .into_rgb8();
    let (w, h) = img.dimensions();
    Ok(FrameBuffer::from_rgb8(w as usize, h as usize, img.as_raw())?)
}

pub fn save_png(fb: &FrameBuffer, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let (w, h) = fb.dims();
    image::save_buffer_with_format(
        path,
        &fb.to_rgb8(),
        w as u32,
        h as u32,
        image::ColorType::Rgb8,
        image::ImageFormat::Png,
    )
    .map_err(|source| CliError::Image {
        path: path.to_owned(),
        source,
    })
}

/// Writes every output view of every emitted frame as a PNG.
pub struct PngSink {
    root: PathBuf,
    written: u64,
}

impl PngSink {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            written: 0,
        }
    }

    pub fn written(&self) -> u64 {
        self.written
    }
}

impl StreamSink for PngSink {
    fn emit(&mut self, frame: NovelFrame) -> splatstream::Result<()> {
        for (j, view) in frame.views().iter().enumerate() {
            save_png(view, &frame_path(&self.root, j, frame.timestamp()))?;
        }
        self.written += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_is_exact_on_8bit_values() {
        let dir = tempfile::tempdir().unwrap();
        let fb = FrameBuffer::from_fn(7, 5, |x, y| {
            [(x * 30) as f64 / 255.0, (y * 50) as f64 / 255.0, ((x + y) % 256) as f64 / 255.0]
        });
        let path = frame_path(dir.path(), 3, 12);
        assert!(path.ends_with("view_3/frame_000012.png"));
        save_png(&fb, &path).unwrap();
        assert_eq!(load_image(&path).unwrap(), fb);
        assert!(matches!(load_image(&dir.path().join("missing.png")), Err(CliError::Image { .. })));
    }
}
