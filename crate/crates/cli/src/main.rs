use std::error::Error as _;
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use splatstream::camera::PairSet;
use splatstream::stages::Resolution;
use splatstream::synthetic::{MotionModel, SyntheticSceneSpec};
use splatstream_cli::commands::{self, PoseComparison, SynthOptions};
use splatstream_cli::serve::serve;
use splatstream_cli::{CliError, Config, Result};

#[derive(Parser)]
#[command(name = "splatstream", version, about = "Live novel-view video streaming from multi-view cameras")]
struct Cli {
    /// TOML configuration file.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration key, e.g. `--set pipeline.live=true`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InputArgs {
    /// Dataset directory with view_<k>/frame_<t>.png.
    #[arg(short, long)]
    input: Option<PathBuf>,

    /// Comma-separated camera indices.
    #[arg(long, value_delimiter = ',')]
    views: Option<Vec<usize>>,

    /// Target pose file(s).
    #[arg(short, long)]
    target: Vec<PathBuf>,

    /// Keyframe resolution, WxH; output is twice this.
    #[arg(long)]
    res: Option<String>,

    /// Use at most this many input frames.
    #[arg(long)]
    frames: Option<usize>,
}

impl InputArgs {
    fn apply(&self, cfg: &mut Config) {
        if let Some(p) = &self.input {
            cfg.input.path = Some(p.clone());
        }
        if let Some(v) = &self.views {
            cfg.input.views = Some(v.clone());
        }
        if !self.target.is_empty() {
            cfg.pipeline.targets = self.target.clone();
        }
        if let Some(r) = &self.res {
            cfg.pipeline.resolution = r.clone();
        }
        if let Some(n) = self.frames {
            cfg.input.max_frames = Some(n);
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Stream a dataset to PNG frames and print the latency report.
    Run {
        #[command(flatten)]
        input: InputArgs,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
    /// Latency breakdown across keyframe resolutions.
    Bench {
        #[command(flatten)]
        input: InputArgs,
        /// Comma-separated WxH list.
        #[arg(long = "resolutions", value_delimiter = ',', default_value = "64x48,128x96,256x192")]
        resolutions: Vec<String>,
    },
    /// Stream to network clients.
    Serve {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        addr: Option<String>,
        #[arg(long)]
        websocket: bool,
        /// Exit after the first client.
        #[arg(long)]
        once: bool,
    },
    /// PSNR of predicted frames (and optionally pose accuracy).
    Metrics {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, requires = "gt_poses")]
        pred_poses: Option<PathBuf>,
        #[arg(long, requires = "pred_poses")]
        gt_poses: Option<PathBuf>,
        /// Accuracy threshold in degrees.
        #[arg(long, default_value_t = 5.0)]
        tau: f64,
        /// Score pairs against the first camera only.
        #[arg(long)]
        anchored: bool,
    },
    /// Write a synthetic fixture dataset.
    Synth {
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        views: Option<usize>,
        #[arg(long)]
        frames: Option<u64>,
        #[arg(long)]
        gaussians: Option<usize>,
        /// Input view size, WxH.
        #[arg(long)]
        res: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// No motion.
        #[arg(long)]
        still: bool,
        #[arg(long, default_value_t = 0.0)]
        target_azimuth: f64,
        /// Reference render size, WxH; defaults to twice the input size.
        #[arg(long)]
        gt_res: Option<String>,
        #[arg(long)]
        no_gt: bool,
    },
}

fn resolution(s: &str, key: &str) -> Result<Resolution> {
    s.parse()
        .map_err(|e: splatstream::Error| splatstream::Error::config(key, e.to_string()).into())
}

fn execute(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for o in &cli.overrides {
        cfg.set(o)?;
    }
    match cli.command {
        Command::Run { input, out } => {
            input.apply(&mut cfg);
            print!("{}", commands::run(&cfg, &out)?);
        }
        Command::Bench { input, resolutions } => {
            input.apply(&mut cfg);
            let res = resolutions
                .iter()
                .map(|r| resolution(r, "resolutions"))
                .collect::<Result<Vec<_>>>()?;
            print!("{}", commands::bench(&cfg, &res)?);
        }
        Command::Serve {
            input,
            addr,
            websocket,
            once,
        } => {
            input.apply(&mut cfg);
            if let Some(a) = addr {
                cfg.serve.addr = a;
            }
            cfg.serve.websocket |= websocket;
            let listener =
                TcpListener::bind(&cfg.serve.addr).map_err(splatstream::Error::Io)?;
            let scheme = if cfg.serve.websocket { "ws" } else { "tcp" };
            eprintln!("listening on {scheme}://{}", listener.local_addr().map_err(splatstream::Error::Io)?);
            serve(&cfg, listener, once.then_some(1))?;
        }
        Command::Metrics {
            pred,
            gt,
            pred_poses,
            gt_poses,
            tau,
            anchored,
        } => {
            let poses = pred_poses.zip(gt_poses).map(|(pred, gt)| PoseComparison {
                pred,
                gt,
                tau_deg: tau,
                pairs: if anchored { PairSet::Anchored } else { PairSet::All },
            });
            print!("{}", commands::metrics(&pred, &gt, poses.as_ref())?);
        }
        Command::Synth {
            out,
            views,
            frames,
            gaussians,
            res,
            seed,
            still,
            target_azimuth,
            gt_res,
            no_gt,
        } => {
            let mut spec = cfg.synthetic.clone().unwrap_or_else(SyntheticSceneSpec::default);
            if let Some(v) = views {
                spec.rig.num_cameras = v;
            }
            if let Some(f) = frames {
                spec.frames = f;
            }
            if let Some(g) = gaussians {
                spec.num_gaussians = g;
            }
            if let Some(r) = res {
                let r = resolution(&r, "res")?;
                spec.rig.width = r.width;
                spec.rig.height = r.height;
            }
            if let Some(s) = seed {
                spec.seed = s;
            }
            if still {
                spec.motion = MotionModel::still();
            }
            spec.validate()?;
            let gt_resolution = match (no_gt, gt_res) {
                (true, _) => None,
                (false, Some(r)) => Some(resolution(&r, "gt_res")?),
                (false, None) => Some(spec.rig.resolution()?.doubled()),
            };
            commands::synth(
                &SynthOptions {
                    spec,
                    target_azimuth_deg: target_azimuth,
                    gt_resolution,
                },
                &out,
            )?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = e.source();
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &CliError) -> u8 {
    e.exit_code() as u8
}
