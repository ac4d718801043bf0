//! Live streaming over TCP or WebSocket.
//!
//! The client receives one FRAME per emitted frame (first target view) and a
//! STATS message at `serve.stats_hz`. A POSE_UPDATE from the client replaces
//! the targets from the next snippet on. Over WebSocket every binary message
//! holds exactly one encoded wire message, length prefix included.

use std::io;
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::mpsc::{self, Receiver};
use std::thread;
use std::time::{Duration, Instant};

use splatstream::camera::CameraView;
use splatstream::scheduler::{run_pipeline, LatencyLedger, StageKind, StreamSink};
use splatstream::stages::{NovelFrame, Resolution};
use splatstream::wire::Message;
use splatstream::Error;
use tungstenite::WebSocket;

use crate::config::Config;
use crate::error::Result;
use crate::job::Job;

trait Link: Send {
    fn send(&mut self, msg: &Message) -> splatstream::Result<()>;

    /// Messages received since the last call, without blocking.
    fn poll(&mut self) -> splatstream::Result<Vec<Message>>;
}

struct TcpLink {
    stream: TcpStream,
    incoming: Receiver<splatstream::Result<Message>>,
}

impl TcpLink {
    fn new(stream: TcpStream) -> io::Result<Self> {
        stream.set_nodelay(true)?;
        let mut reader = stream.try_clone()?;
        let (tx, incoming) = mpsc::channel();
        thread::spawn(move || loop {
            match Message::read_from(&mut reader) {
                Ok(Some(m)) => {
                    if tx.send(Ok(m)).is_err() {
                        break;
                    }
                }
                Ok(None) => break,
                Err(e) => {
                    let _ = tx.send(Err(e));
                    break;
                }
            }
        });
        Ok(Self { stream, incoming })
    }
}

impl Drop for TcpLink {
    fn drop(&mut self) {
        // The reader thread holds a clone; shutting down ends the session
        // for both halves.
        let _ = self.stream.shutdown(Shutdown::Both);
    }
}

impl Link for TcpLink {
    fn send(&mut self, msg: &Message) -> splatstream::Result<()> {
        msg.write_to(&mut self.stream)
    }

    fn poll(&mut self) -> splatstream::Result<Vec<Message>> {
        self.incoming.try_iter().collect()
    }
}

struct WsLink {
    ws: WebSocket<TcpStream>,
}

fn ws_err(e: tungstenite::Error) -> Error {
    match e {
        tungstenite::Error::Io(e) => Error::Io(e),
        other => Error::Protocol(other.to_string()),
    }
}

impl WsLink {
    fn accept(stream: TcpStream) -> splatstream::Result<Self> {
        stream.set_nodelay(true)?;
        let ws = tungstenite::accept(stream).map_err(|e| Error::Protocol(format!("websocket handshake: {e}")))?;
        // Short reads let `poll` return promptly; tungstenite keeps partial
        // frames buffered across timeouts.
        ws.get_ref().set_read_timeout(Some(Duration::from_millis(1)))?;
        Ok(Self { ws })
    }
}

impl Drop for WsLink {
    fn drop(&mut self) {
        let _ = self.ws.close(None);
        let _ = self.ws.flush();
    }
}

impl Link for WsLink {
    fn send(&mut self, msg: &Message) -> splatstream::Result<()> {
        self.ws
            .send(tungstenite::Message::Binary(msg.encode().into()))
            .map_err(ws_err)
    }

    fn poll(&mut self) -> splatstream::Result<Vec<Message>> {
        let mut out = Vec::new();
        loop {
            match self.ws.read() {
                Ok(tungstenite::Message::Binary(bytes)) => {
                    let msg = Message::read_from(&mut bytes.as_ref())?
                        .ok_or_else(|| Error::Protocol("empty websocket message".into()))?;
                    out.push(msg);
                }
                Ok(tungstenite::Message::Close(_)) => {
                    return Err(Error::Protocol("client closed the connection".into()))
                }
                Ok(_) => {}
                Err(tungstenite::Error::Io(e))
                    if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) =>
                {
                    return Ok(out)
                }
                Err(e) => return Err(ws_err(e)),
            }
        }
    }
}

struct ClientSink<'a> {
    link: &'a mut dyn Link,
    res: Resolution,
    stats_every: Duration,
    last_stats: Option<Instant>,
    start: Instant,
    emitted: u64,
    /// A send failure inside `snippet_done`, reported at the next emit.
    failed: Option<Error>,
}

impl StreamSink for ClientSink<'_> {
    fn emit(&mut self, frame: NovelFrame) -> splatstream::Result<()> {
        if let Some(e) = self.failed.take() {
            return Err(e);
        }
        let msg = Message::frame(frame.timestamp() as u32, &frame.views()[0])?;
        self.link.send(&msg)?;
        self.emitted += 1;
        Ok(())
    }

    fn target_update(&mut self) -> Option<Vec<CameraView>> {
        let msgs = match self.link.poll() {
            Ok(m) => m,
            Err(e) => {
                self.failed.get_or_insert(e);
                return None;
            }
        };
        // The most recent valid pose wins.
        let mut update = None;
        for m in msgs {
            match m.to_camera_view(self.res.width, self.res.height) {
                Ok(view) => update = Some(vec![view]),
                Err(e) => log::warn!("ignoring client message: {e}"),
            }
        }
        update
    }

    fn snippet_done(&mut self, ledger: &LatencyLedger) {
        if self.last_stats.is_some_and(|t| t.elapsed() < self.stats_every) {
            return;
        }
        self.last_stats = Some(Instant::now());
        let secs = self.start.elapsed().as_secs_f64();
        let msg = Message::Stats {
            stage_means_ms: StageKind::ALL.map(|s| ledger.mean_ms(s).unwrap_or(0.0) as f32),
            delay_ms: ledger.delay_ms() as f32,
            fps: if secs > 0.0 { (self.emitted as f64 / secs) as f32 } else { 0.0 },
        };
        if let Err(e) = self.link.send(&msg) {
            self.failed.get_or_insert(e);
        }
    }
}

fn stream_to(link: &mut dyn Link, cfg: &Config, job: &Job) -> Result<()> {
    let stats_every = Duration::from_secs_f64(1.0 / cfg.serve.stats_hz.max(1e-3));
    let mut targets = job.targets.clone();
    loop {
        let mut sink = ClientSink {
            link: &mut *link,
            res: job.pipeline.resolution,
            stats_every,
            last_stats: None,
            start: Instant::now(),
            emitted: 0,
            failed: None,
        };
        let outcome = run_pipeline(job.frames(true), &job.rig, targets.clone(), &job.stages, &job.pipeline, &mut sink)?;
        log::info!("streamed {} frames", outcome.emitted);
        if let Some(e) = sink.failed.take() {
            return Err(e.into());
        }
        if !cfg.serve.repeat {
            return Ok(());
        }
        // Keep the client's last viewpoint across restarts.
        if let Some(t) = sink.target_update() {
            targets = t;
        }
    }
}

/// Serves clients one at a time; `max_clients` bounds how many (for tests).
pub fn serve(cfg: &Config, listener: TcpListener, max_clients: Option<usize>) -> Result<()> {
    let job = Job::prepare(cfg)?;
    let mut served = 0;
    for conn in listener.incoming() {
        let stream = match conn {
            Ok(s) => s,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
        log::info!("client {peer} connected");
        let mut link: Box<dyn Link> = if cfg.serve.websocket {
            match WsLink::accept(stream) {
                Ok(l) => Box::new(l),
                Err(e) => {
                    log::warn!("{peer}: {e}");
                    continue;
                }
            }
        } else {
            Box::new(TcpLink::new(stream).map_err(Error::Io)?)
        };
        if let Err(e) = stream_to(link.as_mut(), cfg, &job) {
            log::warn!("client {peer}: {e}");
        }
        served += 1;
        if max_clients.is_some_and(|m| served >= m) {
            break;
        }
    }
    Ok(())
}
