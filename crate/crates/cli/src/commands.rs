//! The batch commands behind the `oic` binary.

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context as _, Result};
use oic_core::baselines::{es_encode, tile_encode, TileTag};
use oic_core::container::{self, StorageBreakdown};
use oic_core::encoder::{encode_analysis, EncodedImage, EncoderConfig, SourceAnalysis};
use oic_core::eval::{self, IsoAxis, SrdCurve};
use oic_core::geom::ViewportSpec;
use oic_core::image::PlaneImage;
use oic_core::incremental::{RateMode, StreamLayout};
use oic_core::ordering::OrderKind;
use oic_core::placement::AccessStrategy;
use oic_core::session::{simulate, write_log, LogRow};
use oic_core::trace::HeadTrace;

/// Which coder produces the container.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Baseline {
    Ours,
    Tiles(TileTag),
    Es,
}

impl FromStr for Baseline {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ours" => Baseline::Ours,
            "es" => Baseline::Es,
            t => Baseline::Tiles(t.parse().map_err(|_| anyhow::anyhow!("unknown baseline {s}"))?),
        })
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Baseline::Ours => f.write_str("ours"),
            Baseline::Es => f.write_str("es"),
            Baseline::Tiles(t) => write!(f, "{t}"),
        }
    }
}

/// Method label of a decoded container.
pub fn method_of(enc: &EncodedImage) -> String {
    match (&enc.tiles, enc.layout) {
        (Some(t), _) => t.tag.to_string(),
        (None, StreamLayout::Separate) => "es".into(),
        (None, StreamLayout::Nested) => "ours".into(),
    }
}

#[derive(Clone, Debug)]
pub struct EncodeOptions {
    pub qps: Vec<u8>,
    pub mode: RateMode,
    pub baseline: Baseline,
    pub access: AccessStrategy,
    pub block_size: usize,
    pub seed: Option<u64>,
    pub prefer_horizontal: bool,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        Self {
            qps: eval::DEFAULT_QPS.to_vec(),
            mode: RateMode::Theoretical,
            baseline: Baseline::Ours,
            access: AccessStrategy::Fixed,
            block_size: oic_core::blocks::DEFAULT_BLOCK_SIZE,
            seed: None,
            prefer_horizontal: true,
        }
    }
}

pub fn encode_source(src: &SourceAnalysis, opts: &EncodeOptions) -> Result<EncodedImage> {
    let mut cfg = EncoderConfig::new(src.qp, opts.mode);
    cfg.block_size = opts.block_size;
    cfg.access = opts.access;
    cfg.prefer_horizontal = opts.prefer_horizontal;
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    Ok(match opts.baseline {
        Baseline::Ours => encode_analysis(src, &cfg)?,
        Baseline::Es => es_encode(src, &cfg)?,
        Baseline::Tiles(tag) => tile_encode(src, tag, opts.mode, cfg.seed)?,
    })
}

pub struct Encoded {
    pub qp: u8,
    pub path: PathBuf,
    pub storage: StorageBreakdown,
}

/// Writes `<stem>_<baseline>_qp<qp>.oic` into `out_dir` for every qp.
pub fn cmd_encode(image: &Path, out_dir: &Path, opts: &EncodeOptions) -> Result<Vec<Encoded>> {
    let img = PlaneImage::load_equirect(image).with_context(|| format!("loading {}", image.display()))?;
    std::fs::create_dir_all(out_dir)?;
    let stem = image.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
    let mut out = Vec::new();
    for &qp in &opts.qps {
        let src = SourceAnalysis::new(&img, opts.block_size, qp)?;
        let enc = encode_source(&src, opts)?;
        let path = out_dir.join(format!("{stem}_{}_qp{qp}.oic", opts.baseline));
        container::save(&enc, &path)?;
        log::info!("wrote {}", path.display());
        out.push(Encoded { qp, path, storage: container::storage(&enc) });
    }
    Ok(out)
}

fn load_reference(image: Option<&Path>, enc: &EncodedImage) -> Result<Option<PlaneImage>> {
    let Some(p) = image else { return Ok(None) };
    let img = PlaneImage::load(p).with_context(|| format!("loading {}", p.display()))?;
    if img.width != enc.grid.width() || img.height != enc.grid.height() {
        bail!(
            "image {}x{} does not match the {}x{} container",
            img.width,
            img.height,
            enc.grid.width(),
            enc.grid.height()
        );
    }
    Ok(Some(img))
}

/// Replays `trace` against one container.
pub fn cmd_simulate(
    container_path: &Path,
    trace: &HeadTrace,
    image: Option<&Path>,
    order: OrderKind,
    template: &ViewportSpec,
) -> Result<Vec<LogRow>> {
    let enc = container::load(container_path).with_context(|| format!("loading {}", container_path.display()))?;
    let reference = load_reference(image, &enc)?;
    Ok(simulate(&enc, reference.as_ref(), trace, template, order)?)
}

pub fn write_log_to(rows: &[LogRow], out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_log(rows, File::create(p)?)?,
        None => write_log(rows, std::io::stdout().lock())?,
    }
    Ok(())
}

pub struct Evaluation {
    pub curves: Vec<SrdCurve>,
    pub bd: Vec<eval::BdRow>,
}

/// Simulates every container, groups them into one curve per method and
/// writes `curves.csv`, `bd.csv`, `iso.csv` and `accumulated.csv` into
/// `out_dir`. BD deltas are against `reference` (default: `ours`).
pub fn cmd_evaluate(
    inputs: &[(Option<String>, PathBuf)],
    trace: &HeadTrace,
    image: &Path,
    order: OrderKind,
    template: &ViewportSpec,
    reference: Option<&str>,
    lambdas: &[f64],
    out_dir: &Path,
) -> Result<Evaluation> {
    std::fs::create_dir_all(out_dir)?;
    let img = PlaneImage::load(image)?;
    let mut groups: Vec<(String, Vec<eval::SrdPoint>)> = Vec::new();
    let mut plot = csv_writer(&out_dir.join("accumulated.csv"))?;
    writeln!(plot, "method,qp,user,request_idx,bits,accum_bits,usefulness")?;
    for (name, path) in inputs {
        let enc = container::load(path).with_context(|| format!("loading {}", path.display()))?;
        let method = name.clone().unwrap_or_else(|| method_of(&enc));
        if img.width != enc.grid.width() || img.height != enc.grid.height() {
            bail!("{} does not match the reference image", path.display());
        }
        let rows = simulate(&enc, Some(&img), trace, template, order)?;
        for r in &rows {
            writeln!(
                plot,
                "{method},{},{},{},{},{},{:.6}",
                enc.qp, r.user, r.request_idx, r.bits, r.accum_bits, r.usefulness
            )?;
        }
        let point = eval::curve_point(enc.qp, container::storage(&enc).total(), &rows)?;
        match groups.iter_mut().find(|(m, _)| *m == method) {
            Some((_, v)) => v.push(point),
            None => groups.push((method, vec![point])),
        }
    }
    plot.flush()?;
    let curves: Vec<SrdCurve> =
        groups.into_iter().map(|(m, v)| SrdCurve::new(m, v)).collect::<oic_core::Result<_>>()?;
    eval::write_curves(&curves, File::create(out_dir.join("curves.csv"))?)?;

    let ref_name = reference.unwrap_or("ours");
    let Some(ref_curve) = curves.iter().find(|c| c.method == ref_name) else {
        bail!("no curve for reference method {ref_name}");
    };
    let tests: Vec<SrdCurve> = curves.iter().filter(|c| c.method != ref_name).cloned().collect();
    let bd = eval::bd_table(ref_curve, &tests, lambdas)?;
    eval::write_bd(&bd, File::create(out_dir.join("bd.csv"))?)?;
    let levels: Vec<f64> = ref_curve.points.iter().map(|p| p.psnr_db).collect();
    eval::write_iso(&curves, IsoAxis::D, &levels, File::create(out_dir.join("iso.csv"))?)?;
    Ok(Evaluation { curves, bd })
}

fn csv_writer(p: &Path) -> Result<std::io::BufWriter<File>> {
    Ok(std::io::BufWriter::new(File::create(p)?))
}

/// Human-readable header and storage summary.
pub fn cmd_info(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let i = container::info(&bytes)?;
    let enc = container::parse(&bytes)?;
    let s = i.storage;
    Ok(format!(
        "method        {}\n\
         image         {}x{}, block {}, {} blocks\n\
         qp            {}\n\
         planes        {}\n\
         mode          {:?}\n\
         code          seed {:#x}, {} steps\n\
         access        {:?}, {} blocks, {} signalling bits\n\
         preference    {}\n\
         header bits   {}\n\
         side bits     {}\n\
         chunk bits    {}\n\
         storage S     {} bits ({} bytes)\n\
         transport     {} bits (not stored)\n\
         file size     {} bytes\n",
        method_of(&enc),
        i.width,
        i.height,
        i.block_size,
        enc.grid.len(),
        i.qp,
        i.planes,
        i.mode,
        i.seed,
        i.steps,
        i.access.strategy,
        i.access.len(),
        i.access.signaling_bits,
        if i.prefer_horizontal { "horizontal" } else { "vertical" },
        s.header_bits,
        s.side_bits,
        s.chunk_bits,
        s.total(),
        s.total().div_ceil(8),
        s.transport_bits,
        bytes.len(),
    ))
}
