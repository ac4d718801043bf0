//! Run configuration: one TOML file with namespaced sections, overridable
//! from the command line with `--set section.key=value`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use splatstream::scheduler::{PipelineConfig, TrailingPolicy, DEFAULT_BUDGET_MS};
use splatstream::stages::{InterImpl, Resolution, SpatialImpl, SrImpl, StageConfig};
use splatstream::synthetic::SyntheticSceneSpec;
use splatstream::Error;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    /// Dataset root; without one the `[synthetic]` scene is rendered live.
    pub path: Option<PathBuf>,
    pub fps: f64,
    /// Camera indices to use, `None` for all.
    pub views: Option<Vec<usize>>,
    /// Stop after this many input frames.
    pub max_frames: Option<usize>,
}

impl Default for InputSection {
    fn default() -> Self {
        Self {
            path: None,
            fps: 30.0,
            views: None,
            max_frames: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    /// Keyframe render resolution, `WxH`.
    pub resolution: String,
    /// Pose files with the target viewpoints.
    pub targets: Vec<PathBuf>,
    pub trailing: TrailingPolicy,
    pub live: bool,
    pub pipelined: bool,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            resolution: "128x96".into(),
            targets: Vec::new(),
            trailing: TrailingPolicy::Drop,
            live: false,
            pipelined: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StagesSection {
    /// Defaults to `oracle` when a synthetic scene is available and
    /// `constant_depth` otherwise.
    pub spatial: Option<SpatialImpl>,
    pub inter: InterImpl,
    pub sr: SrImpl,
    pub constant_depth: Option<f64>,
    pub spatial_endpoint: Option<String>,
    pub inter_endpoint: Option<String>,
    pub sr_endpoint: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseSourceKind {
    #[default]
    File,
    /// Recover the rig from the synthetic scene description.
    Predictor,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PosesSection {
    pub source: PoseSourceKind,
    /// Rig pose file; defaults to `poses.toml` in the dataset.
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencySection {
    pub budget_ms: f64,
}

impl Default for LatencySection {
    fn default() -> Self {
        Self {
            budget_ms: DEFAULT_BUDGET_MS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSection {
    pub addr: String,
    pub websocket: bool,
    pub stats_hz: f64,
    /// Restart the stream when the source runs out.
    pub repeat: bool,
}

impl Default for ServeSection {
    fn default() -> Self {
        Self {
            addr: "127.0.0.1:7878".into(),
            websocket: false,
            stats_hz: 1.0,
            repeat: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub input: InputSection,
    pub pipeline: PipelineSection,
    pub stages: StagesSection,
    pub poses: PosesSection,
    pub latency: LatencySection,
    pub serve: ServeSection,
    pub synthetic: Option<SyntheticSceneSpec>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}

fn key_of(path: &serde_path_to_error::Path) -> String {
    let s = path.to_string();
    if s == "." { "<root>".into() } else { s }
}

/// Deserializes TOML text; errors name the offending key and its
/// `origin:line:col`.
pub fn parse_toml<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    let de = toml::Deserializer::parse(text).map_err(|e| {
        let at = e.span().map(|s| line_col(text, s.start));
        let loc = at.map_or(origin.to_string(), |(l, c)| format!("{origin}:{l}:{c}"));
        Error::config("<syntax>", format!("{loc}: {}", e.message().trim()))
    })?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let key = key_of(e.path());
        let inner = e.inner();
        let loc = inner
            .span()
            .map(|s| line_col(text, s.start))
            .map_or(origin.to_string(), |(l, c)| format!("{origin}:{l}:{c}"));
        CliError::from(Error::config(key, format!("{loc}: {}", inner.message().trim())))
    })
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_toml(&text, &path.display().to_string())
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        read_toml(path)
    }

    /// Applies `section.key=value`. The value is read as a TOML value and
    /// falls back to a plain string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let origin = format!("--set {assignment}");
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(assignment, format!("{origin}: expected key=value")))?;
        let key = key.trim();
        let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));

        let mut root = toml::Value::try_from(&*self).map_err(|e| Error::config(key, e.to_string()))?;
        let mut slot = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = slot
                .as_table_mut()
                .ok_or_else(|| Error::config(key, format!("{origin}: `{}` is not a section", parts[..i].join("."))))?;
            if i + 1 == parts.len() {
                table.insert(part.to_string(), value.clone());
                break;
            }
            slot = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
        let text = toml::to_string(&root).map_err(|e| Error::config(key, e.to_string()))?;
        *self = parse_toml::<Config>(&text, &origin).map_err(|e| match e {
            CliError::Core(Error::Config { message, .. }) => Error::config(key, message).into(),
            other => other,
        })?;
        Ok(())
    }

    pub fn resolution(&self) -> Result<Resolution> {
        self.pipeline
            .resolution
            .parse()
            .map_err(|e: Error| Error::config("pipeline.resolution", e.to_string()).into())
    }

    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        if !(self.input.fps > 0.0) || !self.input.fps.is_finite() {
            return Err(Error::config("input.fps", format!("{} is not a positive frame rate", self.input.fps)).into());
        }
        if !(self.latency.budget_ms > 0.0) {
            return Err(Error::config("latency.budget_ms", "must be positive").into());
        }
        Ok(PipelineConfig {
            resolution: self.resolution()?,
            input_fps: self.input.fps,
            trailing: self.pipeline.trailing,
            budget_ms: self.latency.budget_ms,
            live: self.pipeline.live,
            pipelined: self.pipeline.pipelined,
        })
    }

    /// Stage selection with the spatial default filled in.
    pub fn stage_config(&self, have_scene: bool) -> StageConfig {
        let s = &self.stages;
        StageConfig {
            spatial: s.spatial.unwrap_or(if have_scene {
                SpatialImpl::Oracle
            } else {
                SpatialImpl::ConstantDepth
            }),
            inter: s.inter,
            sr: s.sr,
            constant_depth: s.constant_depth,
            spatial_endpoint: s.spatial_endpoint.clone(),
            inter_endpoint: s.inter_endpoint.clone(),
            sr_endpoint: s.sr_endpoint.clone(),
        }
    }
}
