use std::path::PathBuf;

use anyhow::{Context as _, Result};
use clap::{Parser, Subcommand};
use oic_cli::commands::{self, Baseline, EncodeOptions};
use oic_cli::server::{serve, Service};
use oic_core::container;
use oic_core::eval::{DEFAULT_LAMBDAS, DEFAULT_QPS};
use oic_core::geom::{Direction, ViewportSpec};
use oic_core::image::PlaneImage;
use oic_core::incremental::RateMode;
use oic_core::ordering::OrderKind;
use oic_core::placement::AccessStrategy;
use oic_core::trace::HeadTrace;

#[derive(Parser)]
#[command(name = "oic", version, about = "Interactive 360-degree image coding")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Viewport template shared by simulation, evaluation and serving.
#[derive(clap::Args, Clone)]
struct Template {
    /// Field of view in degrees, horizontal and vertical.
    #[arg(long, default_value_t = 90.0)]
    fov: f64,
    /// Viewport width and height in pixels.
    #[arg(long, default_value_t = 256)]
    vp: usize,
}

impl Template {
    fn spec(&self) -> Result<ViewportSpec> {
        let f = self.fov.to_radians();
        Ok(ViewportSpec::new(Direction::new(0.0, 0.0), f, f, self.vp, self.vp)?)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Encode an equirectangular image into one container per qp.
    Encode {
        image: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_QPS)]
        qp: Vec<u8>,
        #[arg(long, default_value = "theoretical")]
        mode: RateMode,
        /// ours, es, topt or tNxM (N tile columns by M tile rows).
        #[arg(long, default_value = "ours")]
        baseline: Baseline,
        #[arg(long, default_value = "fixed", value_parser = parse_access)]
        access: AccessStrategy,
        #[arg(long, default_value_t = 32)]
        block_size: usize,
        /// Prefer vertical moves over horizontal ones when ordering blocks.
        #[arg(long)]
        vertical: bool,
        /// Seed of the code construction.
        #[arg(long, env = "OIC_SEED")]
        seed: Option<u64>,
        #[arg(long, short, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Replay a head-movement trace against a container.
    Simulate {
        container: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Original image, for distortion.
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long, default_value = "snake")]
        order: OrderKind,
        #[command(flatten)]
        template: Template,
        /// Log file; standard output when absent.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Build S-R-D curves, BD tables and iso tables from several containers.
    Evaluate {
        /// Containers, optionally labelled as METHOD=PATH.
        #[arg(required = true)]
        inputs: Vec<String>,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value = "snake")]
        order: OrderKind,
        #[command(flatten)]
        template: Template,
        /// Reference method of the BD tables.
        #[arg(long, default_value = "ours")]
        reference: String,
        /// Storage weights of the weighted BD columns.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LAMBDAS)]
        lambda: Vec<f64>,
        #[arg(long, short, default_value = "eval")]
        out_dir: PathBuf,
    },
    /// Print the header and storage breakdown of a container.
    Info { container: PathBuf },
    /// Serve interactive sessions over length-prefixed JSON or websockets.
    Serve {
        container: PathBuf,
        #[arg(long, default_value = "127.0.0.1:7878")]
        bind: String,
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long, default_value = "snake")]
        order: OrderKind,
        #[command(flatten)]
        template: Template,
    },
}

fn parse_access(s: &str) -> Result<AccessStrategy, String> {
    match s {
        "fixed" => Ok(AccessStrategy::Fixed),
        "content" => Ok(AccessStrategy::Content),
        _ => Err(format!("unknown access strategy {s}")),
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().cmd {
        Cmd::Encode { image, qp, mode, baseline, access, block_size, vertical, seed, out_dir } => {
            let opts =
                EncodeOptions { qps: qp, mode, baseline, access, block_size, seed, prefer_horizontal: !vertical };
            println!("qp,S_bits,S_bytes,path");
            for e in commands::cmd_encode(&image, &out_dir, &opts)? {
                println!("{},{},{},{}", e.qp, e.storage.total(), e.storage.total().div_ceil(8), e.path.display());
            }
        }
        Cmd::Simulate { container, trace, image, order, template, out } => {
            let trace = HeadTrace::load(&trace)?;
            let rows = commands::cmd_simulate(&container, &trace, image.as_deref(), order, &template.spec()?)?;
            commands::write_log_to(&rows, out.as_deref())?;
        }
        Cmd::Evaluate { inputs, trace, image, order, template, reference, lambda, out_dir } => {
            let inputs: Vec<(Option<String>, PathBuf)> = inputs
                .iter()
                .map(|s| match s.split_once('=') {
                    Some((m, p)) => (Some(m.to_string()), PathBuf::from(p)),
                    None => (None, PathBuf::from(s)),
                })
                .collect();
            let trace = HeadTrace::load(&trace)?;
            let ev = commands::cmd_evaluate(
                &inputs,
                &trace,
                &image,
                order,
                &template.spec()?,
                Some(&reference),
                &lambda,
                &out_dir,
            )?;
            for r in &ev.bd {
                let l = r.result.axis.lambda().map(|l| format!(" lambda={l}")).unwrap_or_default();
                println!("{} vs {} {}{l}: {:+.2}%", r.test, r.reference, r.result.axis, r.result.delta_pct);
            }
            println!("results in {}", out_dir.display());
        }
        Cmd::Info { container } => print!("{}", commands::cmd_info(&container)?),
        Cmd::Serve { container, bind, image, order, template } => {
            let enc = container::load(&container).with_context(|| format!("loading {}", container.display()))?;
            let reference = image.map(PlaneImage::load).transpose()?;
            let service = Service::new(enc, reference, order, template.spec()?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(&bind).await?;
                log::info!("listening on {}", listener.local_addr()?);
                serve(listener, service).await
            })?;
        }
    }
    Ok(())
}
