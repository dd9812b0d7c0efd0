use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sdaccel::pssa::PatchMode;

mod bench;
mod commands;
mod io;
mod report;
mod verify;

#[derive(Parser)]
#[command(name = "sdaccel", version, about = "Sparse-attention accelerator simulator toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic U12 score matrix (QTF1).
    Synth(SynthArgs),
    /// Compress a score matrix into a PSSA1 stream and report costs.
    Encode(EncodeArgs),
    /// Expand a PSSA1 stream into the dense pruned matrix (QTF1).
    Decode(DecodeArgs),
    /// Round-trip and recount checks; exits 1 on any failure.
    Verify(VerifyArgs),
    /// Spot text-relevant pixels from query/key tensors.
    Tips(TipsArgs),
    /// Bit-slice GEMM with access counters.
    Gemm(GemmArgs),
    /// Sweep flip rate and sparsity, comparing index schemes.
    Bench(BenchArgs),
    /// Off-chip traffic and energy breakdown of a UNet workload.
    Ema(EmaArgs),
    /// Render a JSON report as a table.
    Report(ReportArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dataflow {
    Is,
    Ws,
}

pub fn parse_patch(s: &str) -> Result<PatchMode, String> {
    let n: usize = s.parse().map_err(|_| format!("not a number: {s}"))?;
    PatchMode::from_size(n).map_err(|e| e.to_string())
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
    #[arg(long, default_value = "64", value_parser = parse_patch)]
    pub patch: PatchMode,
    #[arg(long, default_value_t = 0.7)]
    pub sparsity: f64,
    #[arg(long, default_value_t = 0.05)]
    pub flip_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub threshold: u16,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EncodeArgs {
    /// QTF1 score matrix.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub threshold: u16,
    #[arg(long, default_value = "64", value_parser = parse_patch)]
    pub patch: PatchMode,
    /// Zero-pad dimensions that are not a multiple of the patch size.
    #[arg(long)]
    pub pad: bool,
    #[arg(long, default_value_t = sdaccel::pssa::DEFAULT_RLE_RUN_BITS)]
    pub run_bits: u32,
    /// PSSA1 output; omit to only report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args)]
pub struct DecodeArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Scale stored in the output tensor.
    #[arg(long, default_value_t = 1.0 / 4096.0)]
    pub scale: f64,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// QTF1 score matrix to check.
    #[arg(long, short, conflicts_with = "cases")]
    pub input: Option<PathBuf>,
    /// PSSA1 stream previously produced from `--input`.
    #[arg(long, requires = "input")]
    pub stream: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub threshold: u16,
    #[arg(long, default_value = "64", value_parser = parse_patch)]
    pub patch: PatchMode,
    /// Number of synthetic cases when no input is given.
    #[arg(long)]
    pub cases: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct TipsArgs {
    /// Pixel queries, `n_pixels × d`.
    #[arg(long)]
    pub query: PathBuf,
    /// Text keys, `n_text × d`; row 0 is CLS.
    #[arg(long)]
    pub key: PathBuf,
    #[arg(long, default_value_t = sdaccel::tips::DEFAULT_DELTA)]
    pub delta: f64,
    /// Absolute CAS threshold; overrides `--delta`.
    #[arg(long)]
    pub abs_threshold: Option<f64>,
    /// Skip the 1/sqrt(d) logit scaling.
    #[arg(long)]
    pub no_scale: bool,
    /// Denoising iteration the plan is built for.
    #[arg(long, default_value_t = 0)]
    pub iteration: usize,
    /// MASK1 output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct GemmArgs {
    /// Activations, `M × K`, U12.
    #[arg(long)]
    pub a: PathBuf,
    /// Weights, `K × N`, S8.
    #[arg(long)]
    pub w: PathBuf,
    #[arg(long, value_enum, default_value_t = Dataflow::Ws)]
    pub mode: Dataflow,
    /// MASK1 selecting high-precision rows; others run at 6 bits.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// QTF1 output (S32).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 256)]
    pub rows: usize,
    #[arg(long, default_value_t = 256)]
    pub cols: usize,
    #[arg(long, value_delimiter = ',', default_value = "16,32,64", value_parser = parse_patch)]
    pub patch: Vec<PatchMode>,
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.5,0.7,0.9")]
    pub sparsity: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1,0.2,0.3,0.5")]
    pub flip_rate: Vec<f64>,
    /// Seeded instances per sweep point.
    #[arg(long, default_value_t = 4)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub threshold: u16,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EmaArgs {
    /// JSON array of layer specs; defaults to a built-in SD v1 UNet.
    #[arg(long)]
    pub workload: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub threshold: u16,
    #[arg(long, default_value = "64", value_parser = parse_patch)]
    pub patch: PatchMode,
    #[arg(long, default_value_t = 0.7)]
    pub sparsity: f64,
    #[arg(long, default_value_t = 0.05)]
    pub flip_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20.0)]
    pub ema_pj: f64,
    #[arg(long, default_value_t = 1.0)]
    pub onchip_pj: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mac_pj: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// JSON report; `-` reads standard input.
    #[arg(default_value = "-")]
    pub input: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Encode(a) => commands::encode(&a),
        Command::Decode(a) => commands::decode(&a),
        Command::Verify(a) => verify::run(&a),
        Command::Tips(a) => commands::tips(&a),
        Command::Gemm(a) => commands::gemm(&a),
        Command::Bench(a) => bench::run(&a),
        Command::Ema(a) => commands::ema(&a),
        Command::Report(a) => report::run(&a),
    };
    match res {
        Ok(code) => code,
        Err(e)
            if e.chain().any(|c| {
                c.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
            }) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
