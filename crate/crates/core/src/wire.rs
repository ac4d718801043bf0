//! Length-prefixed binary messages shared by serve mode and external stages.
//!
//! Every message is `u32 length | u8 type | payload`, little-endian, where
//! `length` counts the type byte plus the payload.
//!
//! | type | name        | payload                                              |
//! |------|-------------|------------------------------------------------------|
//! | 1    | FRAME       | u32 frame_index, u16 width, u16 height, RGB8 pixels  |
//! | 2    | POSE_UPDATE | 4 x f32 quaternion (w,x,y,z), 3 x f32 translation, f32 normalized focal |
//! | 3    | STATS       | 5 x f32 stage means (ms), f32 delay (ms), f32 fps    |

use std::io::{self, Read, Write};

use nalgebra::Vector3;

use crate::camera::{CameraView, Extrinsics, Intrinsics, Quaternion};
use crate::error::{Error, Result};
use crate::frame::FrameBuffer;

pub const TYPE_FRAME: u8 = 1;
pub const TYPE_POSE_UPDATE: u8 = 2;
pub const TYPE_STATS: u8 = 3;

/// Upper bound on a message body; a 4096x4096 RGB frame fits.
pub const MAX_MESSAGE_LEN: usize = 64 << 20;

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Frame {
        index: u32,
        width: u16,
        height: u16,
        rgb: Vec<u8>,
    },
    PoseUpdate {
        quaternion: [f32; 4],
        translation: [f32; 3],
        focal: f32,
    },
    Stats {
        stage_means_ms: [f32; 5],
        delay_ms: f32,
        fps: f32,
    },
}

impl Message {
    pub fn frame(index: u32, fb: &FrameBuffer) -> Result<Self> {
        let (w, h) = fb.dims();
        let (Ok(width), Ok(height)) = (u16::try_from(w), u16::try_from(h)) else {
            return Err(Error::invalid(format!("{w}x{h} frame exceeds the wire size limit")));
        };
        Ok(Message::Frame {
            index,
            width,
            height,
            rgb: fb.to_rgb8(),
        })
    }

    /// POSE_UPDATE for `view`; the normalized focal is `focal_x / width`.
    pub fn pose_update(view: &CameraView, width: usize) -> Self {
        let q = view.extrinsics.quaternion();
        let t = view.extrinsics.translation();
        Message::PoseUpdate {
            quaternion: [q.w as f32, q.x as f32, q.y as f32, q.z as f32],
            translation: [t.x as f32, t.y as f32, t.z as f32],
            focal: (view.intrinsics.focal_x / width as f64) as f32,
        }
    }

    /// Camera described by a POSE_UPDATE, with centered intrinsics for a
    /// `width` x `height` image.
    pub fn to_camera_view(&self, width: usize, height: usize) -> Result<CameraView> {
        match self {
            Message::PoseUpdate {
                quaternion,
                translation,
                focal,
            } => {
                let q = Quaternion::from_array(quaternion.map(f64::from));
                let t = Vector3::from(translation.map(f64::from));
                Ok(CameraView::new(
                    Extrinsics::from_quaternion(q, t)?,
                    Intrinsics::from_normalized(f64::from(*focal), width, height)?,
                ))
            }
            other => Err(Error::Protocol(format!("expected POSE_UPDATE, got {}", other.kind()))),
        }
    }

    pub fn to_frame_buffer(&self) -> Result<FrameBuffer> {
        match self {
            Message::Frame { width, height, rgb, .. } => {
                FrameBuffer::from_rgb8(usize::from(*width), usize::from(*height), rgb)
            }
            other => Err(Error::Protocol(format!("expected FRAME, got {}", other.kind()))),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Message::Frame { .. } => "FRAME",
            Message::PoseUpdate { .. } => "POSE_UPDATE",
            Message::Stats { .. } => "STATS",
        }
    }

    fn type_byte(&self) -> u8 {
        match self {
            Message::Frame { .. } => TYPE_FRAME,
            Message::PoseUpdate { .. } => TYPE_POSE_UPDATE,
            Message::Stats { .. } => TYPE_STATS,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut body = vec![self.type_byte()];
        match self {
            Message::Frame {
                index,
                width,
                height,
                rgb,
            } => {
                body.extend_from_slice(&index.to_le_bytes());
                body.extend_from_slice(&width.to_le_bytes());
                body.extend_from_slice(&height.to_le_bytes());
                body.extend_from_slice(rgb);
            }
            Message::PoseUpdate {
                quaternion,
                translation,
                focal,
            } => {
                for v in quaternion.iter().chain(translation).chain([focal]) {
                    body.extend_from_slice(&v.to_le_bytes());
                }
            }
            Message::Stats {
                stage_means_ms,
                delay_ms,
                fps,
            } => {
                for v in stage_means_ms.iter().chain([delay_ms, fps]) {
                    body.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        let mut out = Vec::with_capacity(body.len() + 4);
        out.extend_from_slice(&(body.len() as u32).to_le_bytes());
        out.extend_from_slice(&body);
        out
    }

    /// Parses one message body (type byte plus payload).
    pub fn decode(body: &[u8]) -> Result<Self> {
        let (&kind, payload) = body
            .split_first()
            .ok_or_else(|| Error::Protocol("empty message".into()))?;
        let floats = |n: usize| -> Result<Vec<f32>> {
            if payload.len() != 4 * n {
                return Err(Error::Protocol(format!(
                    "type {kind} payload is {} bytes, expected {}",
                    payload.len(),
                    4 * n
                )));
            }
            Ok(payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect())
        };
        match kind {
            TYPE_FRAME => {
                if payload.len() < 8 {
                    return Err(Error::Protocol("truncated FRAME header".into()));
                }
                let index = u32::from_le_bytes([payload[0], payload[1], payload[2], payload[3]]);
                let width = u16::from_le_bytes([payload[4], payload[5]]);
                let height = u16::from_le_bytes([payload[6], payload[7]]);
                let rgb = payload[8..].to_vec();
                if rgb.len() != usize::from(width) * usize::from(height) * 3 {
                    return Err(Error::Protocol(format!(
                        "FRAME {width}x{height} carries {} payload bytes",
                        rgb.len()
                    )));
                }
                Ok(Message::Frame {
                    index,
                    width,
                    height,
                    rgb,
                })
            }
            TYPE_POSE_UPDATE => {
                let v = floats(8)?;
                Ok(Message::PoseUpdate {
                    quaternion: [v[0], v[1], v[2], v[3]],
                    translation: [v[4], v[5], v[6]],
                    focal: v[7],
                })
            }
            TYPE_STATS => {
                let v = floats(7)?;
                Ok(Message::Stats {
                    stage_means_ms: [v[0], v[1], v[2], v[3], v[4]],
                    delay_ms: v[5],
                    fps: v[6],
                })
            }
            other => Err(Error::Protocol(format!("unknown message type {other}"))),
        }
    }

    pub fn write_to<W: Write + ?Sized>(&self, w: &mut W) -> Result<()> {
        w.write_all(&self.encode())?;
        w.flush()?;
        Ok(())
    }

    /// Reads the next message; `Ok(None)` on a clean end of stream.
    pub fn read_from<R: Read + ?Sized>(r: &mut R) -> Result<Option<Self>> {
        let mut len = [0u8; 4];
        match r.read_exact(&mut len) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(e.into()),
        }
        let len = u32::from_le_bytes(len) as usize;
        if len == 0 || len > MAX_MESSAGE_LEN {
            return Err(Error::Protocol(format!("message length {len} out of range")));
        }
        let mut body = vec![0u8; len];
        r.read_exact(&mut body)?;
        Self::decode(&body).map(Some)
    }
}
