//! The `mvrefine` command line.
//!
//! Exit status is 0 on success, 1 for usage errors (bad flags, missing
//! subcommand, out-of-range parameters) and 2 for data errors, which name the
//! offending file and, for malformed binary input, the byte offset.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mvrefine::codec::{self, NoiseRegion, DEFAULT_SEARCH_RANGE};
use mvrefine::confidence::GradientKernel;
use mvrefine::dumpio::{self, DumpHeader, FrameRecord, DEFAULT_GOP_SIZE};
use mvrefine::eval::{endpoint_error, FlowStats};
use mvrefine::flow::{read_flo, write_flo, FlowField};
use mvrefine::oracle::{lk_flow, LkConfig};
use mvrefine::pnm::{read_pgm, write_pgm, write_ppm};
use mvrefine::refine::{refine_gops_detailed, ConfidenceMode, Pooling, RefineConfig, ThresholdMode};
use mvrefine::synth::{synthesize, SceneKind, SynthSpec};
use mvrefine::viz::{render_confidence, render_flow};
use mvrefine::{GopStream, LumaPlane, RawSequence};

#[derive(Debug, Parser)]
#[command(name = "mvrefine", version, about = "Refine compressed-domain motion vectors toward dense optical flow")]
#[command(subcommand_required = true, arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode a PGM sequence into an MVD1 dump.
    Encode(EncodeArgs),
    /// Refine the motion vectors of an MVD1 dump into one .flo per P-frame.
    Refine(RefineArgs),
    /// Dense Lucas-Kanade flow between two PGMs, or from each I-frame of a dump to its P-frames.
    Lk(LkArgs),
    /// Endpoint-error statistics between two .flo files or directories.
    Eval(EvalArgs),
    /// Render a .flo file as a color-wheel PPM.
    Render(RenderArgs),
    /// Time refinement of an MVD1 dump; prints a JSON report.
    Bench(BenchArgs),
    /// Generate a synthetic sequence with ground-truth flow.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// PGM frames in display order, or a single directory of PGMs (sorted by name).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_GOP_SIZE as usize)]
    pub gop_size: usize,
    /// Integer-pel block-matching search range.
    #[arg(long, default_value_t = DEFAULT_SEARCH_RANGE)]
    pub search_range: usize,
    #[command(flatten)]
    pub noise: NoiseArgs,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// Fraction of motion vectors per GOP replaced by random vectors.
    #[arg(long, default_value_t = 0.0)]
    pub noise_fraction: f64,
    /// Largest random component, in quarter-pel.
    #[arg(long, default_value_t = 16)]
    pub noise_magnitude: u16,
    #[arg(long, default_value_t = 0)]
    pub noise_seed: u64,
    #[arg(long, value_enum, default_value_t = NoiseTarget::All)]
    pub noise_region: NoiseTarget,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NoiseTarget {
    All,
    /// Only blocks of constant intensity.
    Flat,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Fixed confidence threshold.
    #[arg(long, default_value_t = RefineConfig::default().fixed_threshold)]
    pub threshold: f64,
    #[arg(long, default_value_t = RefineConfig::default().threshold_mode)]
    pub threshold_mode: ThresholdMode,
    /// Fraction of pixels kept in percentile mode.
    #[arg(long, default_value_t = RefineConfig::default().percentile_keep)]
    pub keep: f64,
    #[arg(long, default_value_t = RefineConfig::default().confidence_mode)]
    pub confidence: ConfidenceMode,
    #[arg(long, default_value_t = RefineConfig::default().pooling)]
    pub pooling: Pooling,
    #[arg(long, default_value_t = RefineConfig::default().kernel)]
    pub kernel: GradientKernel,
    /// Pooling block edge in pixels.
    #[arg(long, default_value_t = RefineConfig::default().block)]
    pub block: usize,
    /// Median filter window (odd).
    #[arg(long, default_value_t = RefineConfig::default().median_window)]
    pub median_window: usize,
    /// Worker threads; 0 uses every core. Defaults to MVREFINE_THREADS, else 0.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl PipelineArgs {
    pub fn config(&self) -> RefineConfig {
        RefineConfig {
            block: self.block,
            median_window: self.median_window,
            threshold_mode: self.threshold_mode,
            fixed_threshold: self.threshold,
            percentile_keep: self.keep,
            confidence_mode: self.confidence,
            pooling: self.pooling,
            kernel: self.kernel,
        }
    }

    fn threads(&self) -> usize {
        self.threads.unwrap_or_else(mvrefine::threads_from_env)
    }
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    pub input: PathBuf,
    /// Directory receiving flow_NNNNN.flo, one per P-frame.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Also write the pooled confidence of each P-frame as conf_NNNNN.pgm here.
    #[arg(long)]
    pub confidence_dir: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct LkArgs {
    /// Two PGM frames, or one MVD1 dump.
    #[arg(required = true, num_args = 1..=2)]
    pub inputs: Vec<PathBuf>,
    /// Output .flo for a frame pair; output directory for a dump.
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = LkConfig::default().window)]
    pub window: usize,
    #[arg(long, default_value_t = LkConfig::default().min_eigen)]
    pub min_eigen: f64,
    #[arg(long, default_value_t = LkConfig::default().pyramid_levels)]
    pub levels: usize,
    #[arg(long, default_value_t = LkConfig::default().iterations)]
    pub iterations: usize,
}

impl LkArgs {
    pub fn config(&self) -> LkConfig {
        LkConfig { window: self.window, min_eigen: self.min_eigen, pyramid_levels: self.levels, iterations: self.iterations }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Estimated flow: a .flo file or a directory of them.
    pub estimate: PathBuf,
    /// Reference flow, matched to the estimate by sorted file order.
    pub reference: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Magnitude mapped to full saturation; defaults to the largest vector.
    #[arg(long)]
    pub max_magnitude: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub input: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub repetitions: usize,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// translate, rotate-sprite or noise-flat.
    pub scene: SceneKind,
    /// Directory receiving frame_NNNNN.pgm and gt_NNNNN.flo (P-frames only).
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    #[arg(long, default_value_t = 96)]
    pub height: usize,
    #[arg(long, default_value_t = 24)]
    pub frames: usize,
    #[arg(long, default_value_t = DEFAULT_GOP_SIZE as usize)]
    pub gop_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also encode the sequence into this MVD1 file.
    #[arg(long)]
    pub mvd1: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEARCH_RANGE)]
    pub search_range: usize,
}

/// Failure of a subcommand, carrying its exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data { path: PathBuf, source: mvrefine::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data { .. } => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Data { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Attach `path` to a library error. Parameter errors are usage errors.
fn at(path: &Path) -> impl FnOnce(mvrefine::Error) -> CliError + '_ {
    move |e| match e {
        mvrefine::Error::InvalidArgument(msg) => CliError::Usage(msg),
        source => CliError::Data { path: path.to_path_buf(), source },
    }
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Data { path: path.to_path_buf(), source: e.into() }
}

/// Parse `args` (including the program name) and run, returning the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("{}", Cli::command().render_usage());
            }
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Encode(a) => encode(&a),
        Command::Refine(a) => refine(&a),
        Command::Lk(a) => lk(&a),
        Command::Eval(a) => eval(&a),
        Command::Render(a) => render(&a),
        Command::Bench(a) => bench(&a),
        Command::Synth(a) => synth(&a),
    }
}

fn frame_name(prefix: &str, index: usize, ext: &str) -> String {
    format!("{prefix}_{index:05}.{ext}")
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_at(path))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> CliResult<()> {
    w.flush().map_err(io_at(path))
}

fn ensure_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(io_at(path))
}

/// Files in `dir` with extension `ext`, sorted by name.
fn list_dir(dir: &Path, ext: &str) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_at(dir))? {
        let path = entry.map_err(io_at(dir))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn load_pgm(path: &Path) -> CliResult<LumaPlane> {
    let file = File::open(path).map_err(io_at(path))?;
    read_pgm(BufReader::new(file)).map_err(at(path))
}

fn save_pgm(plane: &LumaPlane, path: &Path) -> CliResult<()> {
    let mut w = create(path)?;
    write_pgm(plane, &mut w).map_err(at(path))?;
    finish(w, path)
}

fn load_flo(path: &Path) -> CliResult<FlowField> {
    let file = File::open(path).map_err(io_at(path))?;
    read_flo(BufReader::new(file)).map_err(at(path))
}

fn save_flo(flow: &FlowField, path: &Path) -> CliResult<()> {
    let mut w = create(path)?;
    write_flo(flow, &mut w).map_err(at(path))?;
    finish(w, path)
}

fn load_dump(path: &Path) -> CliResult<(DumpHeader, Vec<FrameRecord>, Vec<GopStream>)> {
    let file = File::open(path).map_err(io_at(path))?;
    let (header, frames) = dumpio::read_dump(BufReader::new(file)).map_err(at(path))?;
    let gops = dumpio::split_gops(&frames).map_err(at(path))?;
    Ok((header, frames, gops))
}

fn save_dump(header: &DumpHeader, frames: &[FrameRecord], path: &Path) -> CliResult<()> {
    let mut w = create(path)?;
    dumpio::write_dump(header, frames, &mut w).map_err(at(path))?;
    finish(w, path)
}

/// Frame index within the stream of the `k`-th P-frame of the GOP starting at `start`.
fn pframe_index(start: usize, k: usize) -> usize {
    start + k + 1
}

fn encode_frames(
    frames: Vec<LumaPlane>,
    gop_size: usize,
    search_range: usize,
    noise: &NoiseArgs,
    origin: &Path,
) -> CliResult<(DumpHeader, Vec<FrameRecord>)> {
    let seq = RawSequence::new(frames).map_err(at(origin))?;
    let (header, records) = codec::encode_sequence(&seq, gop_size, search_range).map_err(at(origin))?;
    if noise.noise_fraction == 0.0 {
        return Ok((header, records));
    }
    let region = match noise.noise_region {
        NoiseTarget::All => NoiseRegion::All,
        NoiseTarget::Flat => NoiseRegion::FlatBlocks,
    };
    let mut noisy = Vec::with_capacity(records.len());
    for (g, gop) in dumpio::split_gops(&records).map_err(at(origin))?.iter().enumerate() {
        let seed = noise.noise_seed.wrapping_add(g as u64);
        let gop = codec::inject_mv_noise_in(gop, noise.noise_fraction, noise.noise_magnitude, seed, region)
            .map_err(at(origin))?;
        noisy.extend(gop.to_records());
    }
    Ok((header, noisy))
}

fn encode(a: &EncodeArgs) -> CliResult<()> {
    let paths = match a.inputs.as_slice() {
        [dir] if dir.is_dir() => list_dir(dir, "pgm")?,
        files => files.to_vec(),
    };
    if paths.is_empty() {
        return Err(CliError::Usage("no PGM frames found".into()));
    }
    let frames = paths.iter().map(|p| load_pgm(p)).collect::<CliResult<Vec<_>>>()?;
    let (header, records) = encode_frames(frames, a.gop_size, a.search_range, &a.noise, &paths[0])?;
    save_dump(&header, &records, &a.output)
}

fn refine(a: &RefineArgs) -> CliResult<()> {
    let config = a.pipeline.config();
    config.validate().map_err(at(&a.input))?;
    let (header, _, gops) = load_dump(&a.input)?;
    let refined = refine_gops_detailed(&gops, &config, a.pipeline.threads()).map_err(at(&a.input))?;
    ensure_dir(&a.output)?;
    if let Some(dir) = &a.confidence_dir {
        ensure_dir(dir)?;
    }
    let gop_size = header.gop_size as usize;
    for (g, frames) in refined.iter().enumerate() {
        for (k, frame) in frames.iter().enumerate() {
            let index = pframe_index(g * gop_size, k);
            save_flo(&frame.refined, &a.output.join(frame_name("flow", index, "flo")))?;
            if let Some(dir) = &a.confidence_dir {
                let path = dir.join(frame_name("conf", index, "pgm"));
                let image = render_confidence(&frame.block_confidence).map_err(at(&path))?;
                save_pgm(&image, &path)?;
            }
        }
    }
    Ok(())
}

fn lk(a: &LkArgs) -> CliResult<()> {
    let config = a.config();
    config.validate().map_err(at(&a.inputs[0]))?;
    match a.inputs.as_slice() {
        [first, second] => {
            let (fa, fb) = (load_pgm(first)?, load_pgm(second)?);
            let (flow, _) = lk_flow(&fa, &fb, &config).map_err(at(second))?;
            save_flo(&flow, &a.output)
        }
        [dump] => {
            let (header, _, gops) = load_dump(dump)?;
            ensure_dir(&a.output)?;
            for (g, gop) in gops.iter().enumerate() {
                let decoded = codec::decode_gop(gop).map_err(at(dump))?;
                for (k, frame) in decoded.iter().enumerate().skip(1) {
                    let (flow, _) = lk_flow(&decoded[0], frame, &config).map_err(at(dump))?;
                    let index = pframe_index(g * header.gop_size as usize, k - 1);
                    save_flo(&flow, &a.output.join(frame_name("flow", index, "flo")))?;
                }
            }
            Ok(())
        }
        _ => unreachable!("clap enforces one or two inputs"),
    }
}

#[derive(Debug, Serialize)]
struct PairStats {
    estimate: String,
    reference: String,
    #[serde(flatten)]
    stats: FlowStats,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    pairs: usize,
    /// Pixel-weighted over every pair.
    overall: FlowStats,
    frames: Vec<PairStats>,
}

fn flo_set(path: &Path) -> CliResult<Vec<PathBuf>> {
    if path.is_dir() {
        list_dir(path, "flo")
    } else {
        Ok(vec![path.to_path_buf()])
    }
}

fn eval(a: &EvalArgs) -> CliResult<()> {
    let (est, refs) = (flo_set(&a.estimate)?, flo_set(&a.reference)?);
    if est.len() != refs.len() {
        return Err(CliError::Usage(format!(
            "{} holds {} .flo files but {} holds {}",
            a.estimate.display(),
            est.len(),
            a.reference.display(),
            refs.len()
        )));
    }
    if est.is_empty() {
        return Err(CliError::Usage("no .flo files to compare".into()));
    }
    let mut frames = Vec::with_capacity(est.len());
    let (mut total, mut pixels) = (FlowStats::default(), 0usize);
    for (pe, pr) in est.iter().zip(&refs) {
        let (fe, fr) = (load_flo(pe)?, load_flo(pr)?);
        let stats = endpoint_error(&fe, &fr, None).map_err(at(pe))?;
        let n = fe.u.len();
        total.mean_epe += stats.mean_epe * n as f64;
        total.nonzero_fraction += stats.nonzero_fraction * n as f64;
        total.suppressed_fraction += stats.suppressed_fraction * n as f64;
        total.mean_magnitude += stats.mean_magnitude * n as f64;
        pixels += n;
        frames.push(PairStats { estimate: pe.display().to_string(), reference: pr.display().to_string(), stats });
    }
    let n = pixels.max(1) as f64;
    let overall = FlowStats {
        mean_epe: total.mean_epe / n,
        nonzero_fraction: total.nonzero_fraction / n,
        suppressed_fraction: total.suppressed_fraction / n,
        mean_magnitude: total.mean_magnitude / n,
    };
    print_json(&EvalReport { pairs: frames.len(), overall, frames })
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("plain data serializes");
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(io_at(Path::new("<stdout>")))
}

fn render(a: &RenderArgs) -> CliResult<()> {
    if a.max_magnitude.is_some_and(|m| !(m > 0.0)) {
        return Err(CliError::Usage("--max-magnitude must be positive".into()));
    }
    let flow = load_flo(&a.input)?;
    let image = render_flow(&flow, a.max_magnitude);
    let mut w = create(&a.output)?;
    write_ppm(&image, &mut w).map_err(at(&a.output))?;
    finish(w, &a.output)
}

fn bench(a: &BenchArgs) -> CliResult<()> {
    let config = a.pipeline.config();
    config.validate().map_err(at(&a.input))?;
    let report = mvrefine::bench::benchmark_refine(&a.input, a.repetitions, &config, a.pipeline.threads())
        .map_err(at(&a.input))?;
    print_json(&report)
}

fn synth(a: &SynthArgs) -> CliResult<()> {
    let spec = SynthSpec {
        gop_size: a.gop_size,
        seed: a.seed,
        ..SynthSpec::new(a.scene, a.width, a.height, a.frames)
    };
    let out = &a.output;
    let scene = synthesize(&spec).map_err(at(out))?;
    ensure_dir(out)?;
    for (i, frame) in scene.sequence.frames().iter().enumerate() {
        save_pgm(frame, &out.join(frame_name("frame", i, "pgm")))?;
        if i % a.gop_size != 0 {
            save_flo(&scene.ground_truth[i], &out.join(frame_name("gt", i, "flo")))?;
        }
    }
    if let Some(path) = &a.mvd1 {
        let (header, records) = codec::encode_sequence(&scene.sequence, a.gop_size, a.search_range).map_err(at(path))?;
        save_dump(&header, &records, path)?;
    }
    Ok(())
}
