//! `semlink` — command-line driver for the RoI embedding transmission
//! simulator: `sweep`, `pipeline`, `crop`, and `report` subcommands.
//!
//! Exit codes are stable for scripting: 0 success, 1 runtime failure,
//! 2 usage or input error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use semlink_core::codec::{NonFinitePolicy, QuantBits};
use semlink_core::detections;
use semlink_core::experiment::{
    self, BoundsMode, LinkConfig, PipelineConfig, PipelineMode, SchemeSpec, SourceSpec,
    SweepConfig, Timing,
};
use semlink_core::metrics::{self, LatencyMode, LatencyModel};
use semlink_core::modem::{GrayMap, ModulationScheme};
use semlink_core::ppm;
use semlink_core::roi;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "semlink",
    version,
    about = "Simulates vehicle-RoI embedding transmission over BPSK/16-QAM AWGN links",
    after_help = "Master seed resolution: --seed flag, else the SEMLINK_SEED \
                  environment variable, else 0."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a (scheme x modulation x SNR) Monte-Carlo sweep and emit CSV/JSON
    Sweep(SweepArgs),
    /// Run PPM frames + detections through the full edge-to-cloud chain
    Pipeline(PipelineArgs),
    /// Square-adjust boxes and write 224x224 crops from one frame
    Crop(CropArgs),
    /// Print per-frame memory and latency reports
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Ieee754,
    Quant8,
    Quant16,
    Quant32,
}

impl SchemeArg {
    fn to_spec(self, bounds: BoundsMode) -> SchemeSpec {
        let bits = match self {
            SchemeArg::Ieee754 => return SchemeSpec::Ieee754,
            SchemeArg::Quant8 => QuantBits::Q8,
            SchemeArg::Quant16 => QuantBits::Q16,
            SchemeArg::Quant32 => QuantBits::Q32,
        };
        SchemeSpec::Quantized { bits, bounds }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModArg {
    Bpsk,
    Qam16,
}

impl From<ModArg> for ModulationScheme {
    fn from(m: ModArg) -> Self {
        match m {
            ModArg::Bpsk => ModulationScheme::Bpsk,
            ModArg::Qam16 => ModulationScheme::Qam16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NoiseSplitArg {
    Half,
    Full,
}

impl From<NoiseSplitArg> for semlink_core::channel::NoiseSplit {
    fn from(s: NoiseSplitArg) -> Self {
        match s {
            NoiseSplitArg::Half => Self::HalfPerComponent,
            NoiseSplitArg::Full => Self::FullPerComponent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NonFiniteArg {
    Zero,
    Saturate,
}

impl From<NonFiniteArg> for NonFinitePolicy {
    fn from(p: NonFiniteArg) -> Self {
        match p {
            NonFiniteArg::Zero => Self::ZeroFill,
            NonFiniteArg::Saturate => Self::Saturate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Embedding,
    CropOnly,
}

/// Channel and codec knobs shared by sweep and pipeline.
#[derive(Args)]
struct LinkArgs {
    /// Quantizer bounds: 'per-vector' or 'MIN:MAX'
    #[arg(long, default_value = "per-vector", value_parser = parse_bounds)]
    bounds: BoundsMode,
    /// Noise power split for complex symbols
    #[arg(long, value_enum, default_value_t = NoiseSplitArg::Half)]
    noise_split: NoiseSplitArg,
    /// Replacement for NaN/Inf decoded from corrupted IEEE 754 words
    #[arg(long, value_enum, default_value_t = NonFiniteArg::Zero)]
    nonfinite: NonFiniteArg,
    /// Gray table for both 16-QAM axes, e.g. '00=-3,01=-1,11=1,10=3'
    #[arg(long, value_parser = parse_gray_map)]
    gray_map: Option<GrayMap>,
    /// Master seed; falls back to SEMLINK_SEED, then 0
    #[arg(long)]
    seed: Option<u64>,
}

impl LinkArgs {
    fn link(&self) -> LinkConfig {
        LinkConfig {
            gray_map: self.gray_map.unwrap_or_default(),
            noise_split: self.noise_split.into(),
            nonfinite_policy: self.nonfinite.into(),
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    /// Encoding scheme (repeatable)
    #[arg(long = "scheme", value_enum, default_values_t = [SchemeArg::Quant8, SchemeArg::Quant16, SchemeArg::Quant32, SchemeArg::Ieee754])]
    schemes: Vec<SchemeArg>,
    /// Modulation (repeatable)
    #[arg(long = "mod", value_enum, default_values_t = [ModArg::Bpsk, ModArg::Qam16])]
    modulations: Vec<ModArg>,
    /// SNR grid in dB: 'start:stop:step' (stop inclusive when on-grid) or one value
    #[arg(long, default_value = "0:22:1", value_parser = parse_snr_grid)]
    snr: SnrGrid,
    /// Trials per grid cell
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Embedding file (SEMB or one-value-per-line text)
    #[arg(long)]
    emb: Option<PathBuf>,
    /// Generate N deterministic stub embedding vectors instead of --emb
    #[arg(long, conflicts_with = "emb")]
    stub: Option<usize>,
    /// Worker thread count (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
    /// Fill elapsed_seconds with wall-clock times (breaks byte-reproducibility)
    #[arg(long = "timing", value_parser = ["deterministic", "wall-clock"], default_value = "deterministic")]
    timing: String,
    #[command(flatten)]
    link: LinkArgs,
    /// Output CSV path; JSON and config sidecar are written next to it
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    /// Line-delimited JSON detections: `{"frame": "<ppm>", "boxes": [[x1,y1,x2,y2],..]}`
    #[arg(long)]
    detections: PathBuf,
    /// Square scale factor applied to each box
    #[arg(long, default_value_t = 2.5)]
    scale: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Embedding)]
    mode: ModeArg,
    #[arg(long = "scheme", value_enum, default_value_t = SchemeArg::Quant8)]
    scheme: SchemeArg,
    #[arg(long = "mod", value_enum, default_value_t = ModArg::Bpsk)]
    modulation: ModArg,
    /// Channel SNR in dB ('inf' for a noiseless link)
    #[arg(long, default_value_t = 12.0)]
    snr: f64,
    /// Projector seed for stub embeddings (default: derived from master seed)
    #[arg(long)]
    stub_seed: Option<u64>,
    #[command(flatten)]
    link: LinkArgs,
    #[command(flatten)]
    latency: LatencyArgs,
    /// Output JSON path (default: stdout)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct LatencyArgs {
    /// RoI extraction seconds per vehicle
    #[arg(long, default_value_t = 0.023)]
    roi_cost: f64,
    /// Embedding seconds per vehicle
    #[arg(long, default_value_t = 0.16)]
    embed_cost: f64,
    /// Cloud decode seconds per vehicle
    #[arg(long, default_value_t = 1e-3)]
    decode_cost: f64,
    /// Count cloud decode in the latency report
    #[arg(long)]
    include_decode: bool,
}

impl LatencyArgs {
    fn model(&self) -> LatencyModel {
        LatencyModel {
            roi_seconds_per_vehicle: self.roi_cost,
            embed_seconds_per_vehicle: self.embed_cost,
            decode_seconds_per_vehicle: self.decode_cost,
            include_cloud_decode: self.include_decode,
        }
    }
}

#[derive(Args)]
struct CropArgs {
    /// Source frame (binary PPM, P6)
    #[arg(long)]
    frame: PathBuf,
    /// Detection box 'x1,y1,x2,y2' (repeatable)
    #[arg(long = "box", value_parser = parse_box, required = true)]
    boxes: Vec<[f64; 4]>,
    /// Square scale factor
    #[arg(long, default_value_t = 2.5)]
    scale: f64,
    /// Directory for the output crops
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Vehicle count to report on
    #[arg(long, conflicts_with = "detections")]
    vehicles: Option<u64>,
    /// Detections file; reports once per frame
    #[arg(long)]
    detections: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Embedding)]
    mode: ModeArg,
    #[command(flatten)]
    latency: LatencyArgs,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn runtime(msg: impl Into<String>) -> CliError {
    CliError::Runtime(msg.into())
}

#[derive(Debug, Clone)]
struct SnrGrid(Vec<f64>);

fn parse_snr_grid(s: &str) -> Result<SnrGrid, String> {
    let parse_one = |v: &str| -> Result<f64, String> {
        v.trim()
            .parse::<f64>()
            .map_err(|_| format!("bad SNR value '{v}'"))
    };
    match s.split(':').collect::<Vec<_>>()[..] {
        [single] => Ok(SnrGrid(vec![parse_one(single)?])),
        [start, stop, step] => {
            let start = parse_one(start)?;
            let stop = parse_one(stop)?;
            let step = parse_one(step)?;
            if step.is_nan() || step <= 0.0 {
                return Err("SNR step must be positive".into());
            }
            if stop < start {
                return Err("SNR stop must be >= start".into());
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize;
            Ok(SnrGrid(
                (0..=count).map(|i| start + i as f64 * step).collect(),
            ))
        }
        _ => Err("expected a single value or start:stop:step".into()),
    }
}

fn parse_bounds(s: &str) -> Result<BoundsMode, String> {
    if s.eq_ignore_ascii_case("per-vector") {
        return Ok(BoundsMode::PerVector);
    }
    let (lo, hi) = s
        .split_once(':')
        .ok_or("expected 'per-vector' or 'MIN:MAX'")?;
    let v_min: f32 = lo.trim().parse().map_err(|_| format!("bad bound '{lo}'"))?;
    let v_max: f32 = hi.trim().parse().map_err(|_| format!("bad bound '{hi}'"))?;
    if v_min.is_nan() || v_max.is_nan() || v_min >= v_max {
        return Err(format!("bounds must satisfy MIN < MAX, got {v_min}:{v_max}"));
    }
    Ok(BoundsMode::Fixed { v_min, v_max })
}

fn parse_gray_map(s: &str) -> Result<GrayMap, String> {
    GrayMap::from_axis_spec(s).map_err(|e| e.to_string())
}

fn parse_box(s: &str) -> Result<[f64; 4], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err("expected 'x1,y1,x2,y2'".into());
    }
    let mut out = [0.0; 4];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| format!("bad coordinate '{part}'"))?;
    }
    Ok(out)
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("SEMLINK_SEED") {
        Ok(text) => text
            .trim()
            .parse()
            .map_err(|_| usage(format!("SEMLINK_SEED is not a u64: '{text}'"))),
        Err(_) => Ok(0),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(args) => cmd_sweep(args),
        Command::Pipeline(args) => cmd_pipeline(args),
        Command::Crop(args) => cmd_crop(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let source = match (&args.emb, args.stub) {
        (Some(path), None) => {
            if !path.is_file() {
                return Err(usage(format!("embeddings file not found: {}", path.display())));
            }
            SourceSpec::File(path.clone())
        }
        (None, Some(count)) => {
            if count == 0 {
                return Err(usage("--stub count must be at least 1"));
            }
            SourceSpec::Stub {
                count,
                seed: resolve_seed(args.link.seed)?,
            }
        }
        (None, None) => return Err(usage("one of --emb or --stub is required")),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };

    let config = SweepConfig {
        snr_grid_db: args.snr.0.clone(),
        schemes: args
            .schemes
            .iter()
            .map(|s| s.to_spec(args.link.bounds))
            .collect(),
        modulations: args.modulations.iter().map(|&m| m.into()).collect(),
        trials: args.trials,
        master_seed: resolve_seed(args.link.seed)?,
        source,
        link: args.link.link(),
        workers: args.workers,
        timing: if args.timing == "wall-clock" {
            Timing::WallClock
        } else {
            Timing::Deterministic
        },
    };

    let records = experiment::run_sweep(&config).map_err(classify_experiment_error)?;

    let csv_path = &args.output;
    let json_path = csv_path.with_extension("json");
    let sidecar_path = csv_path.with_extension("config.json");
    write_file(csv_path, &experiment::records_to_csv(&records))?;
    write_file(&json_path, &experiment::records_to_json(&records))?;
    write_file(&sidecar_path, &experiment::sweep_sidecar_json(&config))?;
    println!(
        "wrote {} records to {} (+ {}, {})",
        records.len(),
        csv_path.display(),
        json_path.display(),
        sidecar_path.display()
    );
    Ok(())
}

fn cmd_pipeline(args: PipelineArgs) -> Result<(), CliError> {
    if !args.detections.is_file() {
        return Err(usage(format!(
            "detections file not found: {}",
            args.detections.display()
        )));
    }
    let config = PipelineConfig {
        scale: args.scale,
        mode: match args.mode {
            ModeArg::Embedding => PipelineMode::Embedding,
            ModeArg::CropOnly => PipelineMode::CropOnly,
        },
        scheme: args.scheme.to_spec(args.link.bounds),
        modulation: args.modulation.into(),
        snr_db: args.snr,
        master_seed: resolve_seed(args.link.seed)?,
        stub_seed: args.stub_seed,
        link: args.link.link(),
        latency: args.latency.model(),
    };
    let output = experiment::run_pipeline(&args.detections, &config)
        .map_err(classify_experiment_error)?;
    let json = output.to_json();
    match &args.output {
        Some(path) => {
            write_file(path, &json)?;
            println!("wrote {} frame reports to {}", output.frames.len(), path.display());
        }
        None => print!("{json}"),
    }
    Ok(())
}

fn cmd_crop(args: CropArgs) -> Result<(), CliError> {
    if !args.frame.is_file() {
        return Err(usage(format!("frame not found: {}", args.frame.display())));
    }
    let frame = ppm::read_ppm(&args.frame).map_err(|e| usage(e.to_string()))?;
    let stem = args
        .frame
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| usage("frame path has no usable stem"))?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| runtime(format!("creating {}: {e}", args.out_dir.display())))?;

    for (index, raw) in args.boxes.iter().enumerate() {
        let bbox = roi::BoundingBox::new(raw[0], raw[1], raw[2], raw[3])
            .map_err(|e| usage(format!("box {index}: {e}")))?;
        let square = roi::adjust_to_square(&bbox, frame.dims(), args.scale)
            .map_err(|e| usage(format!("box {index}: {e}")))?;
        let crop = roi::crop_and_resize(&frame, &square)
            .map_err(|e| usage(format!("box {index}: {e}")))?;
        let out_path = args.out_dir.join(format!("{stem}_{index}.ppm"));
        let side = roi::CROP_SIZE as u32;
        ppm::write_ppm(&out_path, side, side, crop.pixels())
            .map_err(|e| runtime(format!("writing {}: {e}", out_path.display())))?;
        println!(
            "wrote {} from region ({},{})-({},{})",
            out_path.display(),
            square.x1,
            square.y1,
            square.x2,
            square.y2
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct VehicleCountReport {
    memory: metrics::MemoryReport,
    latency: metrics::LatencyReport,
}

#[derive(Serialize)]
struct FrameCountReport {
    frame: String,
    n_vehicles: u64,
    memory: metrics::MemoryReport,
    latency: metrics::LatencyReport,
}

fn cmd_report(args: ReportArgs) -> Result<(), CliError> {
    let mode = match args.mode {
        ModeArg::Embedding => LatencyMode::Embedding,
        ModeArg::CropOnly => LatencyMode::CropOnly,
    };
    let model = args.latency.model();
    let json = match (&args.vehicles, &args.detections) {
        (Some(n), None) => {
            let report = VehicleCountReport {
                memory: metrics::memory_report(*n),
                latency: metrics::latency_report(*n, mode, &model),
            };
            serde_json::to_string_pretty(&report).expect("report serializes")
        }
        (None, Some(path)) => {
            if !path.is_file() {
                return Err(usage(format!("detections file not found: {}", path.display())));
            }
            let frames = detections::read_detections(path).map_err(|e| usage(e.to_string()))?;
            let reports: Vec<FrameCountReport> = frames
                .iter()
                .map(|f| {
                    let n = f.boxes.len() as u64;
                    FrameCountReport {
                        frame: f.frame.clone(),
                        n_vehicles: n,
                        memory: metrics::memory_report(n),
                        latency: metrics::latency_report(n, mode, &model),
                    }
                })
                .collect();
            serde_json::to_string_pretty(&reports).expect("reports serialize")
        }
        (None, None) => return Err(usage("one of --vehicles or --detections is required")),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    println!("{json}");
    Ok(())
}

fn classify_experiment_error(err: experiment::ExperimentError) -> CliError {
    use experiment::ExperimentError as E;
    match err {
        // Problems with what the user handed us are usage errors.
        E::BadConfig(_)
        | E::SourceEmpty
        | E::Source(_)
        | E::Detections(_)
        | E::Ppm(_)
        | E::Roi(_)
        | E::Codec(_) => usage(err.to_string()),
        E::Modem(_) | E::Channel(_) | E::Metrics(_) | E::ThreadPool(_) => {
            runtime(err.to_string())
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| runtime(format!("writing {}: {e}", path.display())))
}
