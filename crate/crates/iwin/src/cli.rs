use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use iwin_core::ingest::{load_image, SourceKind};
use iwin_core::pgm::{write_pgm, PgmImage};
use iwin_core::phantom::{generate, quantize_u16, PhantomSpec};
use iwin_core::suppression::{
    dice, load_external_mask, suppress_background, KeepRule, StructuringElement,
    SuppressionParams, ThresholdMode,
};
use iwin_core::windowing::{apply_window, AutoWindowStrategy};
use iwin_core::{BinaryMask, LoadedImage};
use serde_json::json;

use crate::service::ServiceConfig;
use crate::study::{builtin_mask, resolve_auto_window, WindowSummary};

#[derive(Debug, Parser)]
#[command(name = "iwin", version, about = "Background-suppressed window width/level for grayscale images")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print image metadata.
    Info {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Write the built-in foreground mask as a PGM.
    Segment(SegmentArgs),
    /// Compute an auto window and optionally render the image with it.
    Window(WindowArgs),
    /// DICE overlap between two mask PGMs.
    Dice {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Generate a synthetic phantom (16-bit PGM) and its ground-truth mask.
    Phantom(PhantomArgs),
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// `otsu` or `fixed:V`.
    #[arg(long, default_value = "otsu")]
    pub threshold: String,
    #[arg(long, default_value_t = 2)]
    pub close_radius: usize,
    #[arg(long)]
    pub no_fill_holes: bool,
    /// `largest` or `area:FRAC`.
    #[arg(long, default_value = "largest")]
    pub keep: String,
    /// Extra dilation radius applied last.
    #[arg(long)]
    pub dilate_margin: Option<usize>,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, conflicts_with = "auto_segment")]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub auto_segment: bool,
    /// `minmax`, `percentile:LO,HI` or `meanstd:K`.
    #[arg(long, default_value = "percentile:1,99")]
    pub strategy: String,
    #[arg(long)]
    pub json: bool,
    /// Write the windowed 8-bit render here.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "IWIN_PORT", default_value_t = 8080, value_parser = clap::value_parser!(u16).range(1..))]
    pub port: u16,
    #[arg(long, env = "IWIN_STORE_DIR")]
    pub store_dir: Option<PathBuf>,
    #[arg(long, env = "IWIN_UI_DIR")]
    pub ui_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 64 * 1024 * 1024)]
    pub max_body_bytes: usize,
    #[arg(long, default_value = "percentile:1,99")]
    pub default_strategy: String,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    #[arg(long, default_value_t = 256)]
    pub height: usize,
    #[arg(long, default_value_t = 80.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 800.0)]
    pub tissue_mean: f64,
    #[arg(long, default_value_t = 50.0)]
    pub tissue_sigma: f64,
    #[arg(long, default_value_t = 30.0)]
    pub background_sigma: f64,
    #[arg(long)]
    pub gradient: Option<f64>,
}

/// Failure reported as `NAME: message` on stderr with exit code 1.
#[derive(Debug)]
pub struct CliError {
    pub name: String,
    pub message: String,
}

impl CliError {
    fn new(name: &str, message: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.name, self.message)
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::new("Io", format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::new("Io", format!("{}: {e}", path.display())))
}

pub fn load(path: &Path) -> Result<LoadedImage, CliError> {
    let bytes = read(path)?;
    load_image::<f64>(&bytes, SourceKind::sniff(&bytes)).map_err(|e| CliError::new(e.name(), e.to_string()))
}

fn load_mask(path: &Path, dims: (usize, usize)) -> Result<BinaryMask, CliError> {
    let pgm = PgmImage::decode(&read(path)?).map_err(|e| CliError::new(e.name(), e.to_string()))?;
    load_external_mask(dims, &pgm).map_err(|e| CliError::new(e.name(), e.to_string()))
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string(v).expect("json value"));
}

pub fn parse_segment_params(args: &SegmentArgs, bits_allocated: u8) -> Result<SuppressionParams, CliError> {
    let bad = |what: &str, v: &str| CliError::new("InvalidArgument", format!("{what} {v:?}"));
    let threshold = match args.threshold.split_once(':') {
        None if args.threshold == "otsu" => {
            SuppressionParams::for_bits_allocated(bits_allocated).threshold
        }
        Some(("fixed", v)) => ThresholdMode::Fixed(
            v.parse().map_err(|_| bad("--threshold", &args.threshold))?,
        ),
        _ => return Err(bad("--threshold", &args.threshold)),
    };
    let keep = match args.keep.split_once(':') {
        None if args.keep == "largest" => KeepRule::LargestComponent,
        Some(("area", f)) => KeepRule::MinAreaFraction(f.parse().map_err(|_| bad("--keep", &args.keep))?),
        _ => return Err(bad("--keep", &args.keep)),
    };
    Ok(SuppressionParams {
        threshold,
        close_element: StructuringElement::Disk(args.close_radius),
        fill_holes: !args.no_fill_holes,
        keep,
        dilate_margin: args.dilate_margin.map(StructuringElement::Disk),
    })
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Info { input, json } => info(&input, json),
        Command::Segment(args) => segment(&args),
        Command::Window(args) => window(&args),
        Command::Dice { a, b, json } => dice_cmd(&a, &b, json),
        Command::Serve(args) => serve(args),
        Command::Phantom(args) => phantom(&args),
    }
}

fn info(input: &Path, as_json: bool) -> Result<(), CliError> {
    let img = load(input)?;
    let v = json!({
        "source_kind": img.source_kind,
        "width": img.real.width(),
        "height": img.real.height(),
        "bits_allocated": img.stored.layout().bits_allocated,
        "bits_stored": img.stored.layout().bits_stored,
        "signed": img.stored.layout().representation == iwin_core::imaging::PixelRepresentation::Signed,
        "photometric": img.photometric().as_str(),
        "rescale_slope": img.rescale.slope(),
        "rescale_intercept": img.rescale.intercept(),
        "value_min": img.real.value_min(),
        "value_max": img.real.value_max(),
        "embedded_window": img.embedded_window.map(WindowSummary::from),
        "warnings": img.warnings,
    });
    if as_json {
        print_json(&v);
    } else {
        println!("{}", serde_json::to_string_pretty(&v).expect("json value"));
    }
    Ok(())
}

fn segment(args: &SegmentArgs) -> Result<(), CliError> {
    let img = load(&args.input)?;
    let params = parse_segment_params(args, img.bits_allocated())?;
    let mask = suppress_background(&img.real, &params).map_err(|e| CliError::new(e.name(), e.to_string()))?;
    write(&args.output, &PgmImage::from_mask(&mask).encode())?;
    if args.json {
        print_json(&json!({
            "width": mask.width(),
            "height": mask.height(),
            "foreground_pixels": mask.count(),
            "foreground_fraction": mask.foreground_fraction(),
        }));
    } else {
        println!("{} foreground pixels of {}", mask.count(), mask.len());
    }
    Ok(())
}

fn window(args: &WindowArgs) -> Result<(), CliError> {
    let img = load(&args.input)?;
    let strategy: AutoWindowStrategy = args
        .strategy
        .parse()
        .map_err(|e: iwin_core::windowing::WindowError| CliError::new(e.name(), e.to_string()))?;
    let mut warnings = Vec::new();
    let mask = if let Some(path) = &args.mask {
        Some(load_mask(path, img.real.dims())?)
    } else if args.auto_segment {
        match builtin_mask(&img) {
            Ok(m) => Some(m),
            Err(w) => {
                warnings.push(w);
                None
            }
        }
    } else {
        None
    };
    let suppress = args.mask.is_some() || args.auto_segment;
    let outcome = resolve_auto_window(&img, mask.as_ref(), suppress, &strategy)
        .map_err(|e| CliError::new(e.name(), e.to_string()))?;
    warnings.extend(outcome.warnings);
    if let Some(out) = &args.output {
        let display = apply_window(&img.real, &outcome.settings, img.photometric(), mask.as_ref())
            .map_err(|e| CliError::new(e.name(), e.to_string()))?;
        write(out, &PgmImage::from_display(&display).encode())?;
    }
    if args.json {
        print_json(&json!({
            "ww": outcome.settings.width(),
            "wl": outcome.settings.level(),
            "strategy": strategy,
            "suppress": suppress,
            "foreground_fraction": mask.as_ref().map(BinaryMask::foreground_fraction),
            "warnings": warnings,
        }));
    } else {
        println!("WW {} WL {}", outcome.settings.width(), outcome.settings.level());
        for w in warnings {
            eprintln!("warning: {w}");
        }
    }
    Ok(())
}

fn dice_cmd(a: &Path, b: &Path, as_json: bool) -> Result<(), CliError> {
    let decode = |p: &Path| -> Result<BinaryMask, CliError> {
        Ok(PgmImage::decode(&read(p)?)
            .map_err(|e| CliError::new(e.name(), e.to_string()))?
            .to_mask())
    };
    let score = dice(&decode(a)?, &decode(b)?).map_err(|e| CliError::new(e.name(), e.to_string()))?;
    if as_json {
        print_json(&serde_json::to_value(score).expect("json value"));
    } else {
        println!("{:?}", score.value);
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    let config = ServiceConfig {
        port: args.port,
        store_dir: args.store_dir,
        max_body_bytes: args.max_body_bytes,
        default_strategy: args
            .default_strategy
            .parse()
            .map_err(|e: iwin_core::windowing::WindowError| CliError::new(e.name(), e.to_string()))?,
        ui_dir: args.ui_dir,
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::new("Io", e.to_string()))?;
    rt.block_on(crate::service::serve(config))
        .map_err(|e| CliError::new("Service", format!("{e:#}")))
}

fn phantom(args: &PhantomArgs) -> Result<(), CliError> {
    let spec = PhantomSpec {
        width: args.width,
        height: args.height,
        center: None,
        radius: args.radius,
        tissue_mean: args.tissue_mean,
        tissue_sigma: args.tissue_sigma,
        gradient: args.gradient,
        background_sigma: args.background_sigma,
        seed: args.seed,
    };
    let (img, truth) = generate::<f64>(&spec).map_err(|e| CliError::new("InvalidPhantom", e.to_string()))?;
    let stored = quantize_u16(&img);
    write(&args.output, &write_pgm(&stored).map_err(|e| CliError::new(e.name(), e.to_string()))?)?;
    if let Some(t) = &args.truth {
        write(t, &PgmImage::from_mask(&truth).encode())?;
    }
    Ok(())
}
