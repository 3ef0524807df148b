use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use drc_core::cache::{parse_cache, write_cache};
use drc_core::cnn::{blur_weights, random_weights, write_drcw, zero_weights, MapPredictor, Network, DEFAULT_K};
use drc_core::dataset::{generate_examples, parse_dataset, write_dataset, DatasetConfig};
use drc_core::image::Image;
use drc_core::integrator::{PathSettings, SamplerKind};
use drc_core::metrics::{l1_diff, png_size_proxy, ssim_rgb8};
use drc_core::render::{render, Mode, PassTelemetry, RenderConfig};
use drc_core::scene::load_scene;
use drc_core::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_INVALID: u8 = 3;

#[derive(Parser)]
#[command(name = "drc", version, about = "Radiance-map cached renderer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene to PFM or PNG.
    Render(RenderArgs),
    /// Generate training examples from a grid of camera rays.
    Dataset(DatasetArgs),
    /// Compare a test image against a reference.
    Eval(EvalArgs),
    /// Run the network on one example of a dataset file.
    Infer(InferArgs),
    /// Print a radiance cache dump as CSV.
    Cachedump(CachedumpArgs),
    /// Write a synthetic weight file (zero, random or blur).
    MakeWeights(MakeWeightsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Pt,
    Direct,
    Drc,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerArg {
    Independent,
    Stratified,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, value_enum, default_value = "pt")]
    mode: ModeArg,
    /// Samples per pixel (pt mode).
    #[arg(long, default_value_t = 16)]
    spp: u32,
    /// Samples per pixel of the direct layer (direct and drc modes).
    #[arg(long, default_value_t = 16)]
    direct_spp: u32,
    /// Progressive indirect passes (drc mode).
    #[arg(long, default_value_t = 4)]
    indirect_tasks: u32,
    /// Stop after this many passes.
    #[arg(long)]
    passes: Option<u32>,
    /// Network weights (required in drc mode).
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: logical cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value = "stratified")]
    sampler: SamplerArg,
    #[arg(long, default_value_t = 8)]
    max_depth: u32,
    #[arg(long, default_value_t = 16)]
    mis_samples: u32,
    /// Initial cache grid spacing in pixels.
    #[arg(long, default_value_t = 16)]
    r0: u32,
    /// Smallest cache grid spacing in pixels.
    #[arg(long, default_value_t = 1)]
    min_spacing: u32,
    /// Exposure in stops for PNG output.
    #[arg(long, default_value_t = 0.0)]
    exposure: f64,
    /// Also write the radiance cache entries here.
    #[arg(long)]
    cache_out: Option<PathBuf>,
    /// Output image, `.pfm` or `.png`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DatasetArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Grid of camera rays, `NxM`.
    #[arg(long, default_value = "8x8")]
    grid: String,
    #[arg(long, default_value_t = 1024)]
    ref_spp: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Identifier stored with each example (default: scene file stem).
    #[arg(long)]
    scene_id: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Comma-separated subset of l1, ssim, pngsize.
    #[arg(long, default_value = "l1,ssim,pngsize")]
    metrics: String,
    /// Exposure in stops applied before 8-bit conversion.
    #[arg(long, default_value_t = 0.0)]
    exposure: f64,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    weights: PathBuf,
    /// Dataset file holding the input stack.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// Multiply the prediction by the example's radiance scale.
    #[arg(long)]
    denormalize: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CachedumpArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// CSV output (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightKind {
    Zero,
    Random,
    Blur,
}

#[derive(Args)]
struct MakeWeightsArgs {
    #[arg(long, value_enum)]
    kind: WeightKind,
    /// Base channel width.
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

type CliResult = Result<(), Failure>;

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Error> {
    fs::read(path).map_err(|e| with_path(path, e.into()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    fs::write(path, bytes).map_err(|e| with_path(path, e.into()))
}

fn load_image(path: &Path) -> Result<Image, Error> {
    Image::parse_pfm(&read(path)?)
}

fn save_image(path: &Path, image: &Image, exposure: f64) -> CliResult {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pfm") => {
            let mut buf = Vec::new();
            image.write_pfm(&mut buf)?;
            write(path, &buf)?;
        }
        Some("png") => write(path, &image.to_rgb8(exposure).encode_png()?)?,
        _ => {
            return Err(Failure::Usage(format!(
                "--out must end in .pfm or .png: {}",
                path.display()
            )))
        }
    }
    Ok(())
}

fn init_threads(threads: Option<usize>) -> CliResult {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

fn print_pass(t: &PassTelemetry) {
    let mut line = format!("pass {}/{}", t.pass + 1, t.total_passes);
    if let Some(r) = t.spacing {
        line += &format!(" r={r} entries=+{} total={}", t.new_entries, t.total_entries);
    }
    line += &format!(" spp={} {:.2}s", t.spp, t.seconds);
    eprintln!("{line}");
}

fn cmd_render(a: RenderArgs) -> CliResult {
    let mode = match a.mode {
        ModeArg::Pt => Mode::Pt,
        ModeArg::Direct => Mode::Direct,
        ModeArg::Drc => Mode::Drc,
    };
    if mode == Mode::Drc && a.weights.is_none() {
        return Err(Failure::Usage("--weights is required with --mode drc".into()));
    }
    if !matches!(a.out.extension().and_then(|e| e.to_str()), Some("pfm" | "png")) {
        return Err(Failure::Usage(format!("--out must end in .pfm or .png: {}", a.out.display())));
    }
    init_threads(a.threads)?;
    let scene = load_scene(&a.scene).map_err(|e| with_path(&a.scene, e))?;
    let network = match &a.weights {
        Some(p) if mode == Mode::Drc => Some(Network::from_bytes(&read(p)?)?),
        _ => None,
    };
    let config = RenderConfig {
        mode,
        spp: a.spp,
        direct_spp: a.direct_spp,
        indirect_tasks: a.indirect_tasks,
        passes: a.passes,
        pass_spp: None,
        max_depth: a.max_depth,
        rr_start_depth: 5,
        mis_samples: a.mis_samples,
        r0: a.r0,
        min_spacing: a.min_spacing,
        seed: a.seed,
        sampler: match a.sampler {
            SamplerArg::Independent => SamplerKind::Independent,
            SamplerArg::Stratified => SamplerKind::Stratified,
        },
    };
    config.validate()?;

    let cancel = Arc::new(AtomicBool::new(false));
    {
        let cancel = cancel.clone();
        let _ = ctrlc::set_handler(move || {
            if !cancel.swap(true, Ordering::SeqCst) {
                eprintln!("interrupt: finishing the current pass");
            }
        });
    }
    eprintln!("seed={} mode={:?} threads={}", a.seed, mode, rayon::current_num_threads());
    let predictor = network.as_ref().map(|n| n as &dyn MapPredictor);
    let out = render(&scene, &config, predictor, Some(&cancel), print_pass)?;
    if out.cancelled {
        eprintln!("stopped after {} passes", out.passes_completed);
    }
    save_image(&a.out, &out.image, a.exposure)?;
    if let Some(p) = &a.cache_out {
        let mut buf = Vec::new();
        write_cache(&mut buf, &out.entries)?;
        write(p, &buf)?;
    }
    Ok(())
}

fn parse_grid(s: &str) -> Result<(u32, u32), Failure> {
    let bad = || Failure::Usage(format!("--grid expects NxM, got `{s}`"));
    let (n, m) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((n.trim().parse().map_err(|_| bad())?, m.trim().parse().map_err(|_| bad())?))
}

fn cmd_dataset(a: DatasetArgs) -> CliResult {
    let grid = parse_grid(&a.grid)?;
    init_threads(a.threads)?;
    let scene = load_scene(&a.scene).map_err(|e| with_path(&a.scene, e))?;
    let scene_id = a.scene_id.clone().unwrap_or_else(|| {
        a.scene
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let config = DatasetConfig {
        grid,
        ref_spp: a.ref_spp,
        seed: a.seed,
        path: PathSettings::default(),
    };
    let start = std::time::Instant::now();
    let examples = generate_examples(&scene, &scene_id, &config)?;
    let mut buf = Vec::new();
    write_dataset(&mut buf, &examples)?;
    write(&a.out, &buf)?;
    eprintln!(
        "{} examples from {} grid cells in {:.1}s",
        examples.len(),
        grid.0 * grid.1,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CliResult {
    let reference = load_image(&a.reference)?;
    let test = load_image(&a.test)?;
    if !reference.same_shape(&test) {
        return Err(Failure::Core(Error::Contract(format!(
            "image shapes differ: {}x{} vs {}x{}",
            reference.width, reference.height, test.width, test.height
        ))));
    }
    let mut rows: Vec<(String, String)> = Vec::new();
    for m in a.metrics.split(',').map(str::trim).filter(|m| !m.is_empty()) {
        match m {
            "l1" => rows.push(("l1".into(), format!("{:.6}", l1_diff(&reference, &test)?))),
            "ssim" => {
                let s = ssim_rgb8(&reference.to_rgb8(a.exposure), &test.to_rgb8(a.exposure))?;
                rows.push(("ssim".into(), format!("{s:.6}")));
            }
            "pngsize" => {
                rows.push(("pngsize_ref".into(), png_size_proxy(&reference.to_rgb8(a.exposure))?.to_string()));
                rows.push(("pngsize_test".into(), png_size_proxy(&test.to_rgb8(a.exposure))?.to_string()));
            }
            other => return Err(Failure::Usage(format!("unknown metric `{other}`"))),
        }
    }
    let record: Vec<String> = rows.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", record.join(" "))?;
    writeln!(out)?;
    writeln!(out, "{:<14} {:>14}", "metric", "value")?;
    for (k, v) in &rows {
        writeln!(out, "{k:<14} {v:>14}")?;
    }
    Ok(())
}

fn cmd_infer(a: InferArgs) -> CliResult {
    let net = Network::from_bytes(&read(&a.weights)?)?;
    let examples = parse_dataset(&read(&a.input)?)?;
    let example = examples.get(a.index).ok_or_else(|| {
        Failure::Core(Error::Config(format!(
            "--index {} out of range: {} has {} examples",
            a.index,
            a.input.display(),
            examples.len()
        )))
    })?;
    let out = net.forward(&example.input_tensor())?;
    let (c, h, w) = out.shape();
    let scale = if a.denormalize { example.s_r } else { 1.0 };
    let mut data = vec![0.0f32; c * h * w];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                data[(y * w + x) * c + ch] = out.at(ch, y, x) * scale;
            }
        }
    }
    save_image(&a.out, &Image::from_data(w, h, c, data)?, 0.0)
}

fn cmd_cachedump(a: CachedumpArgs) -> CliResult {
    let entries = parse_cache(&read(&a.input)?)?;
    let mut text = String::from("x,y,pass,px,py,pz,nx,ny,nz,r,g,b,tr,tg,tb\n");
    for e in &entries {
        let mut fields = vec![e.pixel.0.to_string(), e.pixel.1.to_string(), e.pass.to_string()];
        for v in [e.position, e.normal, e.indirect_radiance, e.specular_throughput] {
            fields.extend(v.to_array().iter().map(|c| format!("{}", *c as f32)));
        }
        text += &fields.join(",");
        text.push('\n');
    }
    match &a.out {
        Some(p) => write(p, text.as_bytes())?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_make_weights(a: MakeWeightsArgs) -> CliResult {
    let file = match a.kind {
        WeightKind::Zero => zero_weights(a.k),
        WeightKind::Random => random_weights(a.k, a.seed),
        WeightKind::Blur => blur_weights(a.k),
    }?;
    let mut buf = Vec::new();
    write_drcw(&mut buf, &file)?;
    write(&a.out, &buf)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Render(a) => cmd_render(a),
        Command::Dataset(a) => cmd_dataset(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Infer(a) => cmd_infer(a),
        Command::Cachedump(a) => cmd_cachedump(a),
        Command::MakeWeights(a) => cmd_make_weights(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Io(_) => EXIT_IO,
                _ => EXIT_INVALID,
            })
        }
    }
}
