//! Monte Carlo bit-error-rate engine.
//!
//! One trial is one coherence interval carrying one codeword: a uniformly
//! random codebook index, a fresh channel `H` and fresh noise. Trial `i` of
//! SNR point `p` draws from ChaCha8 stream `p` at word offset `i << 32`, so
//! every trial is addressable on its own and the counts do not depend on how
//! trials are split across workers.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{complex_gaussian, NoiseModel};
use crate::codebook::Codebook;
use crate::codec::{BranchDecoder, DecodeWorkspace};
use crate::config::CodeConfig;
use crate::error::{Error, Result};
use crate::stab::StabilizerCode;

/// Two-sided 95% standard normal quantile.
const Z_95: f64 = 1.959_963_984_540_054;
/// Trials per scheduling unit.
const CHUNK: u64 = 2048;
/// Chunks per batch when stopping on error count.
const CHUNKS_PER_BATCH: u64 = 64;

pub const CSV_COLUMNS: [&str; 9] = [
    "snr_db",
    "trials",
    "bits_sent",
    "bit_errors",
    "ber",
    "ci_low",
    "ci_high",
    "symbol_errors",
    "ser",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub config: CodeConfig,
    pub codebook: Codebook,
    pub snr_grid_db: Vec<f64>,
    pub trials_per_point: u64,
    pub seed: u64,
    pub workers: usize,
    /// Stop a point once this many bit errors are seen. Off by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_after_bit_errors: Option<u64>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials_per_point == 0 {
            return Err(Error::Experiment("trials_per_point must be >= 1".into()));
        }
        if self.snr_grid_db.is_empty() {
            return Err(Error::Experiment("SNR grid is empty".into()));
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Experiment("SNR grid has a non-finite value".into()));
        }
        if self.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Experiment(
                "SNR grid must be strictly increasing".into(),
            ));
        }
        if self.workers == 0 {
            return Err(Error::Experiment("workers must be >= 1".into()));
        }
        if self.trials_per_point > u32::MAX as u64 {
            return Err(Error::Experiment(format!(
                "at most {} trials per point",
                u32::MAX
            )));
        }
        if self.codebook.dim() != self.config.dim() {
            return Err(Error::Experiment(format!(
                "codebook dimension {} does not match d = {}",
                self.codebook.dim(),
                self.config.dim()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub trials: u64,
    pub bits_sent: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub symbol_errors: u64,
    pub ser: f64,
}

impl BerPoint {
    pub fn from_counts(
        snr_db: f64,
        trials: u64,
        bits_per_symbol: u32,
        bit_errors: u64,
        symbol_errors: u64,
    ) -> Self {
        let bits_sent = trials * bits_per_symbol as u64;
        let (ci_low, ci_high) = wilson_interval(bit_errors, bits_sent);
        BerPoint {
            snr_db,
            trials,
            bits_sent,
            bit_errors,
            ber: ratio(bit_errors, bits_sent),
            ci_low,
            ci_high,
            symbol_errors,
            ser: ratio(symbol_errors, trials),
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Wilson score interval at 95%. `(0, 1)` when nothing was observed.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    trials: u64,
    bit_errors: u64,
    symbol_errors: u64,
}

impl std::ops::Add for Tally {
    type Output = Tally;
    fn add(self, o: Tally) -> Tally {
        Tally {
            trials: self.trials + o.trials,
            bit_errors: self.bit_errors + o.bit_errors,
            symbol_errors: self.symbol_errors + o.symbol_errors,
        }
    }
}

/// Generator for trial `trial` of SNR point `point`.
pub fn trial_rng(seed: u64, point: usize, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(point as u64);
    rng.set_word_pos((trial as u128) << 32);
    rng
}

struct TrialRunner<'a> {
    decoder: &'a BranchDecoder,
    sigma2: f64,
}

impl TrialRunner<'_> {
    /// Returns `(sent, decoded)` codebook indices.
    fn run<R: Rng>(&self, rng: &mut R, ws: &mut DecodeWorkspace) -> (usize, usize) {
        let cfg = self.decoder.config();
        let (m, n, t) = (cfg.tx_antennas(), cfg.rx_antennas(), cfg.coherence_time());
        let sent = rng.random_range(0..self.decoder.codebook_len());

        // H column-major, same draw order as channel::sample_channel
        let mut h = [num_complex::Complex64::new(0.0, 0.0);
            crate::config::MAX_ANTENNAS * crate::config::MAX_ANTENNAS];
        for v in h[..m * n].iter_mut() {
            *v = complex_gaussian(rng, 1.0);
        }
        let x = self.decoder.codeword(sent);
        for slot in 0..t {
            let xt = &x[slot * m..(slot + 1) * m];
            let yt = &mut ws.received[slot * n..(slot + 1) * n];
            for (r, out) in yt.iter_mut().enumerate() {
                let mut acc = num_complex::Complex64::new(0.0, 0.0);
                for (c, xv) in xt.iter().enumerate() {
                    acc += h[c * n + r] * xv;
                }
                *out = acc;
            }
        }
        for v in ws.received.iter_mut() {
            *v += complex_gaussian(rng, self.sigma2);
        }
        (sent, self.decoder.decode_received(ws))
    }

    fn run_range(&self, seed: u64, point: usize, range: std::ops::Range<u64>) -> Tally {
        let mut ws = self.decoder.workspace();
        let mut tally = Tally::default();
        for trial in range {
            let mut rng = trial_rng(seed, point, trial);
            let (sent, got) = self.run(&mut rng, &mut ws);
            tally.trials += 1;
            if sent != got {
                tally.symbol_errors += 1;
                tally.bit_errors +=
                    (self.decoder.label(sent) ^ self.decoder.label(got)).count_ones() as u64;
            }
        }
        tally
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub points: Vec<BerPoint>,
    /// False if the run was cancelled before finishing every point.
    pub complete: bool,
    pub runtime_s: f64,
}

/// Run every SNR point to completion.
pub fn run(spec: &ExperimentSpec) -> Result<Vec<BerPoint>> {
    Ok(run_until(spec, &AtomicBool::new(false))?.points)
}

/// Like [`run`], but checks `cancel` between chunks. A cancelled run returns
/// the points finished so far plus the partial point, flagged incomplete.
pub fn run_until(spec: &ExperimentSpec, cancel: &AtomicBool) -> Result<RunReport> {
    spec.validate()?;
    let start = Instant::now();
    let code = StabilizerCode::new(spec.config)?;
    let decoder = BranchDecoder::new(&code, &spec.codebook)?;
    let bits = spec.codebook.bits_per_symbol();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::Experiment(format!("thread pool: {e}")))?;

    let mut points = Vec::with_capacity(spec.snr_grid_db.len());
    let mut complete = true;
    for (p, &snr_db) in spec.snr_grid_db.iter().enumerate() {
        let runner = TrialRunner {
            decoder: &decoder,
            sigma2: NoiseModel::from_snr_db(snr_db)?.sigma2(),
        };
        let chunks = spec.trials_per_point.div_ceil(CHUNK);
        let batch = match spec.stop_after_bit_errors {
            Some(_) => CHUNKS_PER_BATCH,
            None => chunks,
        };
        let mut tally = Tally::default();
        let mut first = 0;
        while first < chunks {
            let last = (first + batch).min(chunks);
            let part = pool.install(|| {
                (first..last)
                    .into_par_iter()
                    .map(|c| {
                        if cancel.load(Ordering::Relaxed) {
                            return None;
                        }
                        let lo = c * CHUNK;
                        let hi = (lo + CHUNK).min(spec.trials_per_point);
                        Some(runner.run_range(spec.seed, p, lo..hi))
                    })
                    .collect::<Vec<_>>()
            });
            if part.iter().any(Option::is_none) {
                complete = false;
            }
            tally = part.into_iter().flatten().fold(tally, |a, b| a + b);
            first = last;
            if !complete {
                break;
            }
            if let Some(target) = spec.stop_after_bit_errors {
                if tally.bit_errors >= target {
                    break;
                }
            }
        }
        points.push(BerPoint::from_counts(
            snr_db,
            tally.trials,
            bits,
            tally.bit_errors,
            tally.symbol_errors,
        ));
        if !complete {
            break;
        }
    }
    Ok(RunReport {
        points,
        complete,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Which points feed the diversity fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeWindow {
    pub min_bit_errors: u64,
    pub ber_max: f64,
    pub ber_min: f64,
}

impl Default for SlopeWindow {
    fn default() -> Self {
        SlopeWindow {
            min_bit_errors: 100,
            ber_max: 1.0,
            ber_min: 0.0,
        }
    }
}

/// Negated least-squares slope of `log10(BER)` against `SNR_dB / 10`, over
/// points inside `window`. Needs at least two such points.
pub fn estimate_diversity_slope(points: &[BerPoint], window: &SlopeWindow) -> Result<f64> {
    let used: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.bit_errors >= window.min_bit_errors && p.ber > 0.0)
        .filter(|p| p.ber <= window.ber_max && p.ber >= window.ber_min)
        .map(|p| (p.snr_db / 10.0, p.ber.log10()))
        .collect();
    if used.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} of {} points have >= {} bit errors and BER in [{:e}, {:e}]; need 2",
            used.len(),
            points.len(),
            window.min_bit_errors,
            window.ber_min,
            window.ber_max
        )));
    }
    let n = used.len() as f64;
    let mx = used.iter().map(|u| u.0).sum::<f64>() / n;
    let my = used.iter().map(|u| u.1).sum::<f64>() / n;
    let sxy: f64 = used.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = used.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData(
            "all selected points share one SNR".into(),
        ));
    }
    Ok(-sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Everything written to a JSON result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsDocument {
    pub spec: ExperimentSpec,
    pub points: Vec<BerPoint>,
    pub runtime_s: f64,
    pub version: String,
    pub complete: bool,
}

impl ResultsDocument {
    pub fn new(spec: ExperimentSpec, report: RunReport) -> Self {
        ResultsDocument {
            spec,
            points: report.points,
            runtime_s: report.runtime_s,
            version: env!("CARGO_PKG_VERSION").to_string(),
            complete: report.complete,
        }
    }
}

pub fn write_csv<W: Write>(points: &[BerPoint], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<BerPoint>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(Error::Experiment(format!(
            "unexpected CSV header {header:?}"
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

pub fn read_json(path: impl AsRef<Path>) -> Result<ResultsDocument> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Write `doc` as CSV (points only) or JSON (spec, points, runtime, version).
pub fn write_results(
    doc: &ResultsDocument,
    path: impl AsRef<Path>,
    format: OutputFormat,
) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    match format {
        OutputFormat::Csv => write_csv(&doc.points, file),
        OutputFormat::Json => {
            let mut file = file;
            serde_json::to_writer_pretty(&mut file, doc)?;
            file.write_all(b"\n")?;
            file.flush()?;
            Ok(())
        }
    }
}
