//! Multi-view input datasets.
//!
//! ```text
//! root/
//!   view_0/frame_000000.png ...
//!   view_1/frame_000000.png ...
//!   poses.toml        rig poses (optional)
//!   target.pose       target viewpoints (optional)
//!   synthetic.toml    scene description for synthetic fixtures (optional)
//! ```
//!
//! Frames are decoded lazily on a background thread a few frames ahead of
//! the pipeline.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::mpsc::{sync_channel, Receiver};
use std::thread::{self, JoinHandle};

use splatstream::stages::{MultiViewFrame, Resolution};
use splatstream::synthetic::SyntheticSceneSpec;
use splatstream::FrameBuffer;

use crate::config::read_toml;
use crate::error::{CliError, Result};
use crate::imageio::load_image;

/// Frames decoded ahead of the pipeline.
pub const PREFETCH: usize = 4;

const EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Clone)]
pub struct ViewFiles {
    pub index: usize,
    pub frames: Vec<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    root: PathBuf,
    views: Vec<ViewFiles>,
    resolution: Resolution,
    lossy: bool,
}

fn parse_index(name: &str, prefix: &str) -> Option<u64> {
    name.strip_prefix(prefix)?.parse().ok()
}

fn list_frames(root: &Path, dir: &Path, view: usize) -> Result<Vec<PathBuf>> {
    let mut frames = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        let (Some(stem), Some(ext)) = (
            path.file_stem().and_then(|s| s.to_str()),
            path.extension().and_then(|s| s.to_str()),
        ) else {
            continue;
        };
        if !EXTENSIONS.contains(&ext.to_ascii_lowercase().as_str()) {
            continue;
        }
        if let Some(t) = parse_index(stem, "frame_") {
            if frames.insert(t, path.clone()).is_some() {
                return Err(CliError::dataset(root, format!("view_{view} has two files for frame {t}")));
            }
        }
    }
    for (expected, &t) in (0u64..).zip(frames.keys()) {
        if t != expected {
            return Err(CliError::dataset(root, format!("view_{view} is missing frame {expected}")));
        }
    }
    Ok(frames.into_values().collect())
}

impl Dataset {
    /// Indexes `root`, keeping only `selection` when given. Every selected
    /// view must hold the same number of equally sized frames.
    pub fn open(root: &Path, selection: Option<&[usize]>) -> Result<Self> {
        let mut available = BTreeMap::new();
        for entry in fs::read_dir(root).map_err(|e| CliError::io(root, e))? {
            let entry = entry.map_err(|e| CliError::io(root, e))?;
            let name = entry.file_name();
            if let Some(k) = name.to_str().and_then(|n| parse_index(n, "view_")) {
                if entry.path().is_dir() {
                    available.insert(k as usize, entry.path());
                }
            }
        }
        if available.is_empty() {
            return Err(CliError::dataset(root, "no view_<k> directories"));
        }
        let chosen: Vec<usize> = match selection {
            Some([]) => return Err(CliError::dataset(root, "empty view selection")),
            Some(sel) => {
                let mut seen = Vec::new();
                for &k in sel {
                    if !available.contains_key(&k) {
                        return Err(CliError::dataset(root, format!("view_{k} does not exist")));
                    }
                    if seen.contains(&k) {
                        return Err(CliError::dataset(root, format!("view_{k} selected twice")));
                    }
                    seen.push(k);
                }
                seen
            }
            None => available.keys().copied().collect(),
        };

        let mut views = Vec::with_capacity(chosen.len());
        let mut dims: Option<(usize, (u32, u32))> = None;
        let mut count: Option<(usize, usize)> = None;
        let mut lossy = false;
        for k in chosen {
            let frames = list_frames(root, &available[&k], k)?;
            if frames.is_empty() {
                return Err(CliError::dataset(root, format!("view_{k} has no frames")));
            }
            match count {
                Some((first, n)) if n != frames.len() => {
                    return Err(CliError::dataset(
                        root,
                        format!("view_{k} has {} frames but view_{first} has {n}", frames.len()),
                    ));
                }
                None => count = Some((k, frames.len())),
                _ => {}
            }
            let d = image::image_dimensions(&frames[0]).map_err(|source| CliError::Image {
                path: frames[0].clone(),
                source,
            })?;
            match dims {
                Some((first, fd)) if fd != d => {
                    return Err(CliError::dataset(
                        root,
                        format!("view_{k} frames are {}x{} but view_{first} frames are {}x{}", d.0, d.1, fd.0, fd.1),
                    ));
                }
                None => dims = Some((k, d)),
                _ => {}
            }
            lossy |= frames.iter().any(|p| p.extension().is_some_and(|e| e != "png"));
            views.push(ViewFiles { index: k, frames });
        }
        let (_, (w, h)) = dims.expect("at least one view");
        if lossy {
            log::warn!("{}: JPEG frames are lossy; PSNR against them is biased", root.display());
        }
        Ok(Self {
            root: root.to_owned(),
            views,
            resolution: Resolution::new(w as usize, h as usize)?,
            lossy,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn views(&self) -> &[ViewFiles] {
        &self.views
    }

    pub fn view_indices(&self) -> Vec<usize> {
        self.views.iter().map(|v| v.index).collect()
    }

    pub fn frame_count(&self) -> usize {
        self.views[0].frames.len()
    }

    /// Size of the input frames.
    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn is_lossy(&self) -> bool {
        self.lossy
    }

    fn optional(&self, name: &str) -> Option<PathBuf> {
        let p = self.root.join(name);
        p.is_file().then_some(p)
    }

    pub fn poses_file(&self) -> Option<PathBuf> {
        self.optional("poses.toml")
    }

    pub fn target_file(&self) -> Option<PathBuf> {
        self.optional("target.pose")
    }

    pub fn synthetic_spec(&self) -> Result<Option<SyntheticSceneSpec>> {
        self.optional("synthetic.toml").map(|p| read_toml(&p)).transpose()
    }

    /// Decodes one frame of one selected view, checking its size.
    pub fn load(&self, slot: usize, t: usize) -> Result<FrameBuffer> {
        let path = &self.views[slot].frames[t];
        let fb = load_image(path)?;
        let expect = (self.resolution.width, self.resolution.height);
        if fb.dims() != expect {
            return Err(CliError::dataset(
                &self.root,
                format!(
                    "view_{} frame {t} is {}x{}, expected {}x{}",
                    self.views[slot].index,
                    fb.width(),
                    fb.height(),
                    expect.0,
                    expect.1
                ),
            ));
        }
        Ok(fb)
    }

    pub fn load_frame(&self, t: usize) -> Result<MultiViewFrame> {
        let views = (0..self.views.len()).map(|slot| self.load(slot, t)).collect::<Result<Vec<_>>>()?;
        Ok(MultiViewFrame::new(t as u64, views)?)
    }

    /// Every frame in order, decoded on a background thread.
    pub fn frames(&self) -> FrameReader {
        let (tx, rx) = sync_channel(PREFETCH);
        let ds = self.clone();
        let worker = thread::spawn(move || {
            for t in 0..ds.frame_count() {
                let item = ds.load_frame(t).map_err(splatstream::Error::from);
                let failed = item.is_err();
                if tx.send(item).is_err() || failed {
                    break;
                }
            }
        });
        FrameReader {
            rx: Some(rx),
            worker: Some(worker),
        }
    }
}

pub struct FrameReader {
    rx: Option<Receiver<splatstream::Result<MultiViewFrame>>>,
    worker: Option<JoinHandle<()>>,
}

impl Iterator for FrameReader {
    type Item = splatstream::Result<MultiViewFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        self.rx.as_ref()?.recv().ok()
    }
}

impl Drop for FrameReader {
    fn drop(&mut self) {
        // Closing the channel stops the worker at its next send.
        self.rx.take();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}
