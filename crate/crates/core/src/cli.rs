//! Command-line front end: `verify`, `simulate` and `codebook generate|inspect`.
//!
//! Exit codes: 0 success, 1 validation or verification failure, 2 I/O
//! failure, 3 bad usage.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::codebook::{generate_packing_with, simplex_bound, Codebook, PackingOptions};
use crate::config::CodeConfig;
use crate::error::{Error, Result};
use crate::simkit::{run_until, BerPoint, ExperimentSpec, OutputFormat, ResultsDocument};
use crate::verify::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

/// Environment variable that overrides the worker count from a run config.
pub const THREADS_ENV: &str = "QSTBC_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "qstbc",
    version,
    about = "Stabilizer-code noncoherent MIMO toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the algebraic invariant suite for (M, N, T, d).
    Verify(VerifyArgs),
    /// Run a BER sweep described by a TOML run config.
    Simulate(SimulateArgs),
    /// Generate or inspect codebooks.
    #[command(subcommand)]
    Codebook(CodebookCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Transmit antennas
    m: usize,
    /// Receive antennas
    n: usize,
    /// Coherence time
    t: usize,
    /// Encoded dimension
    d: usize,
    /// Seed for the random channels in the expansion check
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Report format on stdout
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    format: ReportFormat,
    /// Also write the JSON report here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Run config (TOML)
    config: PathBuf,
    /// Override the sweep seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override trials per SNR point
    #[arg(long)]
    trials: Option<u64>,
    /// Override the SNR grid in dB, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Option<Vec<f64>>,
    /// Write results here instead of the paths in the config
    #[arg(long)]
    out: Option<PathBuf>,
    /// Format for --out (default: from the extension, else csv)
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads; beats QSTBC_THREADS and the config
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum CodebookCommand {
    /// Optimize a max-min chordal packing and save it.
    Generate(GenerateArgs),
    /// Print the metrics and labeling of a codebook file.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Line dimension
    #[arg(short = 'd', long = "dim")]
    dim: usize,
    /// Number of lines (power of two)
    #[arg(short = 'K', long = "size")]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = PackingOptions::default().iterations)]
    iterations: usize,
    #[arg(long, default_value_t = PackingOptions::default().restarts)]
    restarts: usize,
    /// Output file (default: codebook_d<d>_K<K>_s<seed>.txt)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InspectArgs {
    path: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    format: ReportFormat,
}

/// Declarative experiment description, read from TOML.
///
/// ```toml
/// [code]
/// tx_antennas = 3
/// rx_antennas = 3
/// coherence_time = 9
/// dim = 3
///
/// [codebook]
/// path = "codebook.txt"            # or: generate = { size = 4, seed = 7 }
///
/// [sweep]
/// snr_db = [0, 3, 6, 9, 12, 15, 18, 21]
/// trials = 100000
/// seed = 2024
/// workers = 8                      # optional
/// stop_after_bit_errors = 500      # optional
///
/// [output]
/// csv = "results.csv"              # optional
/// json = "results.json"            # optional
/// ```
///
/// Relative paths resolve against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub code: CodeConfig,
    pub codebook: CodebookSource,
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookSource {
    pub path: Option<PathBuf>,
    pub generate: Option<GenerateParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateParams {
    pub size: usize,
    #[serde(default)]
    pub seed: u64,
    pub iterations: Option<usize>,
    pub restarts: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub snr_db: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub workers: Option<usize>,
    pub stop_after_bit_errors: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::RunConfig {
            path: origin.to_string(),
            msg: e.to_string().trim_end().to_string(),
        })?;
        match (&cfg.codebook.path, &cfg.codebook.generate) {
            (Some(_), None) | (None, Some(_)) => Ok(cfg),
            _ => Err(Error::RunConfig {
                path: origin.to_string(),
                msg: "[codebook] needs exactly one of `path` or `generate`".into(),
            }),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        RunConfig::parse(&fs::read_to_string(path)?, &path.display().to_string())
    }
}

/// Parse `args` (including the program name) and run the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Verify(a) => cmd_verify(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Codebook(CodebookCommand::Generate(a)) => cmd_generate(a),
        Command::Codebook(CodebookCommand::Inspect(a)) => cmd_inspect(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                EXIT_IO
            } else {
                EXIT_FAILURE
            }
        }
    }
}

fn cmd_verify(a: VerifyArgs) -> Result<i32> {
    let config = CodeConfig::new(a.m, a.n, a.t, a.d)?;
    let report = verify(&config, a.seed)?;
    match a.format {
        ReportFormat::Text => println!("{report}"),
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    if let Some(path) = a.out {
        write_atomic(
            &path,
            (serde_json::to_string_pretty(&report)? + "\n").as_bytes(),
        )?;
    }
    Ok(if report.passed() {
        EXIT_OK
    } else {
        EXIT_FAILURE
    })
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn env_workers() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            v.trim().parse::<usize>().map(Some).map_err(|_| {
                Error::Experiment(format!("{THREADS_ENV}={v:?} is not a worker count"))
            })
        }
        Err(_) => Ok(None),
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn format_for(path: &Path, explicit: Option<Format>) -> OutputFormat {
    let fmt = explicit.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
        _ => Format::Csv,
    });
    match fmt {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    }
}

/// Build the experiment from a run config plus command-line overrides.
fn build_spec(cfg: &RunConfig, base: &Path, a: &SimulateArgs) -> Result<ExperimentSpec> {
    let codebook = match (&cfg.codebook.path, &cfg.codebook.generate) {
        (Some(p), _) => Codebook::load(resolve(base, p))?,
        (None, Some(g)) => {
            let defaults = PackingOptions::default();
            let opts = PackingOptions {
                iterations: g.iterations.unwrap_or(defaults.iterations),
                restarts: g.restarts.unwrap_or(defaults.restarts),
            };
            generate_packing_with(cfg.code.dim(), g.size, g.seed, &opts)?.codebook
        }
        (None, None) => unreachable!("checked by RunConfig::parse"),
    };
    let workers = match a.workers {
        Some(w) => w,
        None => env_workers()?
            .or(cfg.sweep.workers)
            .unwrap_or_else(default_workers),
    };
    let spec = ExperimentSpec {
        config: cfg.code,
        codebook,
        snr_grid_db: a.snr.clone().unwrap_or_else(|| cfg.sweep.snr_db.clone()),
        trials_per_point: a.trials.unwrap_or(cfg.sweep.trials),
        seed: a.seed.unwrap_or(cfg.sweep.seed),
        workers,
        stop_after_bit_errors: cfg.sweep.stop_after_bit_errors,
    };
    spec.validate()?;
    Ok(spec)
}

fn cmd_simulate(a: SimulateArgs) -> Result<i32> {
    let cfg = RunConfig::load(&a.config)?;
    let base = a.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let spec = build_spec(&cfg, &base, &a)?;

    let outputs: Vec<(PathBuf, OutputFormat)> = match &a.out {
        Some(p) => vec![(p.clone(), format_for(p, a.format))],
        None => {
            let mut v = Vec::new();
            if let Some(p) = &cfg.output.csv {
                v.push((resolve(&base, p), OutputFormat::Csv));
            }
            if let Some(p) = &cfg.output.json {
                v.push((resolve(&base, p), OutputFormat::Json));
            }
            v
        }
    };

    let cancel = Arc::new(AtomicBool::new(false));
    {
        let flag = Arc::clone(&cancel);
        // a second registration in the same process fails; the first handler stays
        let _ = ctrlc::set_handler(move || flag.store(true, Ordering::Relaxed));
    }

    let (num, den) = spec.codebook.rate_fraction(spec.config.coherence_time());
    println!(
        "config {}  K = {}  rate = {num}/{den} bits per channel use  workers = {}",
        spec.config,
        spec.codebook.len(),
        spec.workers
    );
    let report = run_until(&spec, &cancel)?;
    print_summary(&report.points);
    if !report.complete {
        eprintln!("interrupted: results are partial and flagged incomplete");
    }
    println!("runtime {:.2} s", report.runtime_s);

    let complete = report.complete;
    let doc = ResultsDocument::new(spec, report);
    for (path, format) in outputs {
        let mut buf = Vec::new();
        match format {
            OutputFormat::Csv => crate::simkit::write_csv(&doc.points, &mut buf)?,
            OutputFormat::Json => {
                serde_json::to_writer_pretty(&mut buf, &doc)?;
                buf.push(b'\n');
            }
        }
        write_atomic(&path, &buf)?;
        println!("wrote {}", path.display());
    }
    Ok(if complete { EXIT_OK } else { EXIT_FAILURE })
}

fn print_summary(points: &[BerPoint]) {
    println!(
        "{:>8} {:>10} {:>12} {:>12} {:>25} {:>12}",
        "snr_db", "trials", "bit_errors", "ber", "ci95", "ser"
    );
    for p in points {
        println!(
            "{:>8.2} {:>10} {:>12} {:>12.4e} {:>25} {:>12.4e}",
            p.snr_db,
            p.trials,
            p.bit_errors,
            p.ber,
            format!("[{:.3e}, {:.3e}]", p.ci_low, p.ci_high),
            p.ser
        );
    }
}

/// Write through a sibling temporary file so a failed run leaves no partial
/// output behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> Result<i32> {
    let opts = PackingOptions {
        iterations: a.iterations,
        restarts: a.restarts,
    };
    let outcome = generate_packing_with(a.dim, a.size, a.seed, &opts)?;
    let path = a.out.unwrap_or_else(|| {
        PathBuf::from(format!("codebook_d{}_K{}_s{}.txt", a.dim, a.size, a.seed))
    });
    write_atomic(&path, outcome.codebook.to_text().as_bytes())?;
    let cb = &outcome.codebook;
    let bound = simplex_bound(cb.dim(), cb.len());
    println!("wrote {}", path.display());
    println!("d = {}  K = {}  seed = {}", cb.dim(), cb.len(), a.seed);
    println!("min chordal distance {:.12}", cb.min_chordal_distance());
    println!(
        "simplex bound        {:.12}  ({:.4}%)",
        bound,
        100.0 * cb.min_chordal_distance() / bound
    );
    if !outcome.converged {
        println!(
            "note: best restart ({}) was still improving at the last iteration",
            outcome.best_restart
        );
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct InspectReport<'a> {
    dim: usize,
    size: usize,
    bits_per_symbol: u32,
    min_chordal_distance: f64,
    simplex_bound: f64,
    bound_fraction: f64,
    labels: &'a [u32],
}

fn cmd_inspect(a: InspectArgs) -> Result<i32> {
    let cb = Codebook::load(&a.path)?;
    let bound = simplex_bound(cb.dim(), cb.len());
    let report = InspectReport {
        dim: cb.dim(),
        size: cb.len(),
        bits_per_symbol: cb.bits_per_symbol(),
        min_chordal_distance: cb.min_chordal_distance(),
        simplex_bound: bound,
        bound_fraction: cb.min_chordal_distance() / bound,
        labels: cb.labels(),
    };
    match a.format {
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        ReportFormat::Text => {
            println!("{}", a.path.display());
            println!(
                "d = {}  K = {}  bits/symbol = {}",
                report.dim, report.size, report.bits_per_symbol
            );
            println!("min chordal distance {:.12}", report.min_chordal_distance);
            println!(
                "simplex bound        {:.12}  ({:.4}%)",
                bound,
                100.0 * report.bound_fraction
            );
            let width = report.bits_per_symbol as usize;
            println!("{:>5}  {:>5}  {:>6}", "index", "label", "bits");
            for (i, &label) in cb.labels().iter().enumerate() {
                println!("{i:>5}  {label:>5}  {:>6}", format!("{label:0width$b}"));
            }
        }
    }
    Ok(EXIT_OK)
}
