//! Out-of-process stages speaking the [`crate::wire`] protocol.
//!
//! Exchanges, as seen from the engine:
//!
//! * spatial: the `n` input views as FRAME messages, then one POSE_UPDATE per
//!   target, each answered with one rendered FRAME,
//! * interpolation: per view, FRAME `t` and FRAME `t + 2`, answered with FRAME `t + 1`,
//! * super-resolution: per view, one FRAME answered with its 2x FRAME.

use std::io::{self, Read, Write};
use std::net::TcpStream;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use super::{
    check_interpolation_inputs, check_superres_inputs, InterpolationStage, MultiViewFrame, NovelFrame, Provenance,
    Reconstruction, Resolution, SpatialStage, SuperResStage,
};
use crate::camera::CameraView;
use crate::error::{Error, Result};
use crate::frame::FrameBuffer;
use crate::wire::Message;

pub trait Transport: Read + Write + Send {}

impl<T: Read + Write + Send> Transport for T {}

struct ChildPipe {
    child: Child,
    stdin: ChildStdin,
    stdout: ChildStdout,
}

impl Read for ChildPipe {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        self.stdout.read(buf)
    }
}

impl Write for ChildPipe {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.stdin.write(buf)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.stdin.flush()
    }
}

impl Drop for ChildPipe {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct ExternalStage {
    endpoint: String,
    conn: Mutex<Box<dyn Transport>>,
}

impl std::fmt::Debug for ExternalStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalStage").field("endpoint", &self.endpoint).finish()
    }
}

impl ExternalStage {
    /// Connects to `tcp://host:port` or spawns `exec:program args...`.
    pub fn open(endpoint: &str) -> Result<Self> {
        let transport: Box<dyn Transport> = if let Some(addr) = endpoint.strip_prefix("tcp://") {
            let stream = TcpStream::connect(addr)?;
            stream.set_nodelay(true)?;
            Box::new(stream)
        } else if let Some(cmd) = endpoint.strip_prefix("exec:") {
            let mut parts = cmd.split_whitespace();
            let program = parts
                .next()
                .ok_or_else(|| Error::config("endpoint", "empty exec command"))?;
            let mut child = Command::new(program)
                .args(parts)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .spawn()?;
            let stdin = child.stdin.take().expect("piped stdin");
            let stdout = child.stdout.take().expect("piped stdout");
            Box::new(ChildPipe { child, stdin, stdout })
        } else {
            return Err(Error::config(
                "endpoint",
                format!("`{endpoint}` is neither tcp://host:port nor exec:command"),
            ));
        };
        Ok(Self::from_transport(endpoint, transport))
    }

    pub fn from_transport(endpoint: impl Into<String>, transport: Box<dyn Transport>) -> Self {
        Self {
            endpoint: endpoint.into(),
            conn: Mutex::new(transport),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn exchange<T>(&self, f: impl FnOnce(&mut dyn Transport) -> Result<T>) -> Result<T> {
        let mut conn = self
            .conn
            .lock()
            .map_err(|_| Error::Protocol(format!("connection to {} is poisoned", self.endpoint)))?;
        f(conn.as_mut())
    }
}

fn send_frame(conn: &mut dyn Transport, index: u64, fb: &FrameBuffer) -> Result<()> {
    Message::frame(index as u32, fb)?.write_to(conn)
}

fn recv_frame(conn: &mut dyn Transport, expect: (usize, usize)) -> Result<FrameBuffer> {
    let msg = Message::read_from(conn)?.ok_or_else(|| Error::Protocol("external stage closed the connection".into()))?;
    let fb = msg.to_frame_buffer()?;
    if fb.dims() != expect {
        return Err(Error::Protocol(format!(
            "external stage returned {:?}, expected {expect:?}",
            fb.dims()
        )));
    }
    Ok(fb)
}

impl SpatialStage for ExternalStage {
    fn name(&self) -> &'static str {
        "external"
    }

    fn reconstruct(&self, frame: &MultiViewFrame, _rig: &[CameraView]) -> Result<Reconstruction> {
        Ok(Reconstruction::Remote { frame: frame.clone() })
    }

    fn render(&self, recon: &Reconstruction, targets: &[CameraView], res: Resolution) -> Result<NovelFrame> {
        let Reconstruction::Remote { frame } = recon else {
            return Err(Error::invalid("external stage cannot render a local scene"));
        };
        let views = self.exchange(|conn| {
            for v in frame.views() {
                send_frame(conn, frame.timestamp(), v)?;
            }
            targets
                .iter()
                .map(|t| {
                    Message::pose_update(t, res.width).write_to(conn)?;
                    recv_frame(conn, (res.width, res.height))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        NovelFrame::new(frame.timestamp(), views, Provenance::Keyframe)
    }
}

impl InterpolationStage for ExternalStage {
    fn name(&self) -> &'static str {
        "external"
    }

    fn interpolate(&self, a: &NovelFrame, b: &NovelFrame) -> Result<NovelFrame> {
        check_interpolation_inputs(a, b)?;
        let views = self.exchange(|conn| {
            a.views()
                .iter()
                .zip(b.views())
                .map(|(va, vb)| {
                    send_frame(conn, a.timestamp(), va)?;
                    send_frame(conn, b.timestamp(), vb)?;
                    recv_frame(conn, va.dims())
                })
                .collect::<Result<Vec<_>>>()
        })?;
        NovelFrame::new(a.timestamp() + 1, views, Provenance::Interpolated)
    }
}

impl SuperResStage for ExternalStage {
    fn name(&self) -> &'static str {
        "external"
    }

    fn upscale(&self, frames: &[NovelFrame]) -> Result<Vec<NovelFrame>> {
        check_superres_inputs(frames)?;
        self.exchange(|conn| {
            frames
                .iter()
                .map(|f| {
                    let views = f
                        .views()
                        .iter()
                        .map(|v| {
                            send_frame(conn, f.timestamp(), v)?;
                            recv_frame(conn, (2 * v.width(), 2 * v.height()))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    NovelFrame::new(f.timestamp(), views, Provenance::Upscaled)
                })
                .collect()
        })
    }
}
