//! `skewsplat`: fit, render, evaluate and serve skew-Gaussian splat scenes.

mod train_args;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;
use skewsplat::dataset::{save_dataset, Dataset};
use skewsplat::fit1d::{fit1d, init_kernels, square_wave, Fit1dConfig, Fit1dResult};
use skewsplat::fit2d::{edge_image, fit2d, fit2d_config, plane_view};
use skewsplat::forward::{render_image, RenderConfig};
use skewsplat::image::Image;
use skewsplat::metrics::metrics;
use skewsplat::multiview::{blob_scene, fit_multiview, orbit_dataset};
use skewsplat::ply::{load_ply, save_ply};
use skewsplat::train::{LogLine, TrainConfig};
use skewsplat::trajectory::{load_trajectory, render_trajectory};
use skewsplat::Scene32;
use skewsplat_service::{serve, ServiceConfig};

use train_args::TrainArgs;

#[derive(Parser)]
#[command(name = "skewsplat", version, about)]
struct Cli {
    /// Seed for every random choice; equal seeds give bit-identical runs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit K skew-normal kernels to a square wave on [−3, 3].
    Fit1d {
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 256)]
        samples: usize,
        #[arg(long, default_value_t = 4000)]
        steps: usize,
        /// Keep every skewness at zero.
        #[arg(long, conflicts_with = "compare")]
        no_skew: bool,
        /// Run both variants from the same start and report the MSE ratio.
        #[arg(long)]
        compare: bool,
    },
    /// Fit primitives on a plane to a single image.
    Fit2d {
        /// Target PNG; defaults to a 64×64 half-black, half-white edge.
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long, default_value_t = 32)]
        primitives: usize,
        /// Write the fitted scene.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the final render.
        #[arg(long)]
        render: Option<PathBuf>,
        /// JSON-lines training log; stderr when absent.
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Fit a scene to a posed image directory.
    Fit {
        /// Directory holding `cameras.json` and the images it names.
        #[arg(long)]
        data: PathBuf,
        /// Output scene.
        #[arg(long)]
        out: PathBuf,
        /// Random primitives in the box [−1, 1]³ to start from.
        #[arg(long, default_value_t = 200)]
        init_points: usize,
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Write the synthetic blob scene and an orbit of posed renders of it.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        views: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
    },
    /// Render one PNG per trajectory entry.
    RenderTraj {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// PSNR and SSIM between two PNGs of equal size.
    Metrics { a: PathBuf, b: PathBuf },
    /// Serve a scene over WebSocket.
    Serve {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Send PNG-compressed frames.
        #[arg(long)]
        png: bool,
        /// Largest accepted width × height.
        #[arg(long, default_value_t = 4096 * 4096)]
        max_pixels: u64,
    },
}

fn main() {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn print_json(value: &impl Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// JSON-lines sink for training logs.
fn log_sink(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(std::io::stderr()),
    })
}

fn write_line(sink: &mut dyn Write, line: &LogLine) {
    // Losing a log line must not abort a long fit.
    let _ = serde_json::to_writer(&mut *sink, line).and_then(|_| writeln!(sink).map_err(serde_json::Error::io));
}

#[derive(Serialize)]
struct Fit1dReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    skew: Option<Fit1dResult<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    symmetric: Option<Fit1dResult<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mse_ratio: Option<f64>,
}

#[derive(Serialize)]
struct FitSummary<E: Serialize> {
    n_primitives: usize,
    #[serde(flatten)]
    eval: E,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Fit1d { k, samples, steps, no_skew, compare } => {
            if k == 0 {
                bail!("--k must be at least 1");
            }
            let (xs, ys) = square_wave::<f64>(samples);
            let init = init_kernels(k, -3.0, 3.0);
            let cfg = Fit1dConfig { steps, ..Fit1dConfig::default() };
            let fit = |skew| fit1d(&init, &xs, &ys, &Fit1dConfig { skew, ..cfg.clone() });
            let skew = if no_skew { None } else { Some(fit(true)?) };
            let symmetric = if no_skew || compare { Some(fit(false)?) } else { None };
            let mse_ratio = match (&skew, &symmetric) {
                (Some(a), Some(b)) => Some(a.mse / b.mse),
                _ => None,
            };
            print_json(&Fit1dReport { skew, symmetric, mse_ratio })
        }
        Command::Fit2d { image, primitives, out, render, log, train } => {
            let target: Image<f32> = match &image {
                Some(p) => Image::load_png(p)?,
                None => edge_image(64, 64),
            };
            let cfg = train.resolve(fit2d_config(), cli.seed)?;
            let mut sink = log_sink(log.as_deref())?;
            let result = fit2d(&target, primitives, &cfg, |l| write_line(&mut *sink, l))?;
            sink.flush()?;
            if let Some(p) = &out {
                save_ply(&result.scene, p)?;
            }
            if let Some(p) = &render {
                let view = plane_view(target.width, target.height)?;
                render_image(&result.scene, &view, &cfg.render_config())?.save_png(p)?;
            }
            #[derive(Serialize)]
            struct Out {
                final_psnr: f64,
            }
            print_json(&FitSummary { n_primitives: result.scene.len(), eval: Out { final_psnr: result.final_psnr } })
        }
        Command::Fit { data, out, init_points, log, train } => {
            let dataset = Dataset::<f32>::load(&data)?;
            let cfg = train.resolve(TrainConfig::default(), cli.seed)?;
            let mut sink = log_sink(log.as_deref())?;
            let result = fit_multiview(&dataset, &cfg, init_points, |l| write_line(&mut *sink, l))?;
            sink.flush()?;
            save_ply(&result.scene, &out)?;
            print_json(&FitSummary { n_primitives: result.n_primitives, eval: result.test })
        }
        Command::Synth { out, views, size } => {
            let scene = blob_scene::<f32>();
            save_dataset(&out, &orbit_dataset(&scene, views, size, size)?)?;
            save_ply(&scene, out.join("truth.ply"))?;
            Ok(())
        }
        Command::RenderTraj { scene, trajectory, out } => {
            let scene: Scene32 = load_ply(&scene)?;
            let views = load_trajectory::<f32>(&trajectory)?;
            let paths = render_trajectory(&scene, &views, &out, &RenderConfig::default())?;
            eprintln!("wrote {} frames to {}", paths.len(), out.display());
            Ok(())
        }
        Command::Metrics { a, b } => {
            let a = Image::<f64>::load_png(&a)?;
            let b = Image::<f64>::load_png(&b)?;
            print_json(&metrics(&a, &b)?)
        }
        Command::Serve { scene, addr, png, max_pixels } => {
            let scene: Scene32 = load_ply(&scene)?;
            let cfg = ServiceConfig { max_pixels, png, ..ServiceConfig::default() };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(scene, addr, cfg))?;
            Ok(())
        }
    }
}
