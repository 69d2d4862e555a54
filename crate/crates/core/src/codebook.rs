//! Symbol codebooks: sets of unit vectors in `C^d` with bit labels.
//!
//! Noncoherent detection only sees lines, so the quality of a codebook is its
//! minimum pairwise chordal distance `sqrt(1 - |<s_i, s_j>|^2)`.
//!
//! Text format:
//!
//! ```text
//! qstbc-codebook v1 d=<d> K=<K>
//! # comments allowed anywhere
//! re_0 im_0 re_1 im_1 ... re_{d-1} im_{d-1}
//! ...                                         (K rows)
//! ```
//!
//! Floats are written in shortest round-trip form, so save/load is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CVector;

pub const FORMAT_HEADER: &str = "qstbc-codebook v1";

/// Norm deviation tolerated without touching the vector.
const UNIT_TOL: f64 = 1e-12;
/// Norm deviation that a loaded vector may be renormalized from.
const RENORMALIZE_TOL: f64 = 1e-9;
/// Lines closer than this are treated as repeated.
const DUPLICATE_TOL: f64 = 1e-9;

/// `sqrt(1 - |<a, b>|^2)` for unit vectors.
pub fn chordal_distance(a: &CVector, b: &CVector) -> f64 {
    let overlap = a.dotc(b).norm_sqr();
    (1.0 - overlap).max(0.0).sqrt()
}

/// Rankin simplex bound on the minimum chordal distance of `k` lines in `C^d`.
pub fn simplex_bound(dim: usize, size: usize) -> f64 {
    let d = dim as f64;
    let k = size as f64;
    ((d - 1.0) / d * k / (k - 1.0)).min(1.0).sqrt()
}

fn min_chordal(vectors: &[CVector]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            best = best.min(chordal_distance(&vectors[i], &vectors[j]));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    dim: usize,
    vectors: Vec<CVector>,
    labels: Vec<u32>,
    min_chordal_distance: f64,
}

impl Codebook {
    /// Validates unit norms (to 1e-12), a power-of-two size and distinct
    /// lines. Labels default to index order.
    pub fn new(vectors: Vec<CVector>) -> Result<Self> {
        let size = vectors.len();
        if size < 2 || !size.is_power_of_two() {
            return Err(Error::Codebook(format!(
                "size {size} is not a power of two >= 2"
            )));
        }
        let dim = vectors[0].len();
        if dim < 2 {
            return Err(Error::Codebook(format!("dimension {dim} < 2")));
        }
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::Codebook(format!(
                    "vector {i} has length {}, expected {dim}",
                    v.len()
                )));
            }
            let norm = v.norm();
            if (norm - 1.0).abs() > UNIT_TOL {
                return Err(Error::Codebook(format!("vector {i} has norm {norm}")));
            }
        }
        let min_chordal_distance = min_chordal(&vectors);
        if min_chordal_distance < DUPLICATE_TOL {
            return Err(Error::Codebook(format!(
                "repeated line (min chordal distance {min_chordal_distance:e})"
            )));
        }
        Ok(Codebook {
            dim,
            labels: (0..size as u32).collect(),
            vectors,
            min_chordal_distance,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[CVector] {
        &self.vectors
    }

    pub fn vector(&self, index: usize) -> &CVector {
        &self.vectors[index]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> u32 {
        self.labels[index]
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.len().trailing_zeros()
    }

    pub fn min_chordal_distance(&self) -> f64 {
        self.min_chordal_distance
    }

    /// Bits per channel use, `log2(K) / T`.
    pub fn rate(&self, coherence_time: usize) -> f64 {
        self.bits_per_symbol() as f64 / coherence_time as f64
    }

    /// [`rate`](Self::rate) as a reduced fraction.
    pub fn rate_fraction(&self, coherence_time: usize) -> (usize, usize) {
        let num = self.bits_per_symbol() as usize;
        let g = gcd(num, coherence_time).max(1);
        (num / g, coherence_time / g)
    }

    /// Index-order binary labels: vector `i` carries the bits of `i`.
    pub fn with_natural_labels(mut self) -> Self {
        self.labels = (0..self.len() as u32).collect();
        self
    }

    /// Replace the labels with a permutation of `0..K`.
    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Self> {
        let mut sorted = labels.clone();
        sorted.sort_unstable();
        if sorted != (0..self.len() as u32).collect::<Vec<_>>() {
            return Err(Error::Codebook("labels must permute 0..K".into()));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{FORMAT_HEADER} d={} K={}\n", self.dim, self.len());
        let _ = writeln!(out, "# min chordal distance {}", self.min_chordal_distance);
        for v in &self.vectors {
            let row: Vec<String> = v
                .iter()
                .flat_map(|c| [c.re.to_string(), c.im.to_string()])
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    /// Parse the text format. Rows within 1e-9 of unit norm are renormalized;
    /// anything further off is rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty file".into(),
        })?;
        let rest = header
            .strip_prefix(FORMAT_HEADER)
            .ok_or_else(|| Error::Parse {
                line: hline,
                msg: format!("expected header `{FORMAT_HEADER} d=<d> K=<K>`"),
            })?;
        let (mut dim, mut size) = (None, None);
        for field in rest.split_whitespace() {
            let bad = || Error::Parse {
                line: hline,
                msg: format!("bad header field `{field}`"),
            };
            let (key, value) = field.split_once('=').ok_or_else(bad)?;
            let value: usize = value.parse().map_err(|_| bad())?;
            match key {
                "d" => dim = Some(value),
                "K" => size = Some(value),
                _ => return Err(bad()),
            }
        }
        let (dim, size) = match (dim, size) {
            (Some(d), Some(k)) => (d, k),
            _ => {
                return Err(Error::Parse {
                    line: hline,
                    msg: "header needs both d= and K=".into(),
                })
            }
        };

        let mut vectors = Vec::with_capacity(size);
        for (line, row) in lines {
            if vectors.len() == size {
                return Err(Error::Parse {
                    line,
                    msg: format!("more than K={size} rows"),
                });
            }
            let values = row
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map_err(|_| Error::Parse {
                        line,
                        msg: format!("`{t}` is not a number"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != 2 * dim {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {} numbers, found {}", 2 * dim, values.len()),
                });
            }
            let mut v =
                CVector::from_fn(dim, |i, _| Complex64::new(values[2 * i], values[2 * i + 1]));
            let norm = v.norm();
            if (norm - 1.0).abs() > RENORMALIZE_TOL {
                return Err(Error::Parse {
                    line,
                    msg: format!("row has norm {norm}, not unit"),
                });
            }
            if (norm - 1.0).abs() > UNIT_TOL {
                v /= Complex64::new(norm, 0.0);
            }
            vectors.push(v);
        }
        if vectors.len() != size {
            return Err(Error::Parse {
                line: text.lines().count(),
                msg: format!("expected K={size} rows, found {}", vectors.len()),
            });
        }
        Codebook::new(vectors)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Codebook::parse(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Natural index-order labeling.
pub fn label_bits(codebook: Codebook) -> Codebook {
    codebook.with_natural_labels()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodebookRecord {
    dim: usize,
    size: usize,
    min_chordal_distance: f64,
    labels: Vec<u32>,
    vectors: Vec<Vec<[f64; 2]>>,
}

impl Serialize for Codebook {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        CodebookRecord {
            dim: self.dim,
            size: self.len(),
            min_chordal_distance: self.min_chordal_distance,
            labels: self.labels.clone(),
            vectors: self
                .vectors
                .iter()
                .map(|v| v.iter().map(|c| [c.re, c.im]).collect())
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Codebook {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let rec = CodebookRecord::deserialize(deserializer)?;
        let vectors = rec
            .vectors
            .into_iter()
            .map(|v| {
                CVector::from_iterator(
                    v.len(),
                    v.into_iter().map(|[re, im]| Complex64::new(re, im)),
                )
            })
            .collect();
        Codebook::new(vectors)
            .and_then(|c| c.with_labels(rec.labels))
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PackingOptions {
    pub iterations: usize,
    pub restarts: usize,
}

impl Default for PackingOptions {
    fn default() -> Self {
        PackingOptions {
            iterations: 2000,
            restarts: 32,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PackingOutcome {
    pub codebook: Codebook,
    /// False when the best restart was still improving over its final tenth.
    pub converged: bool,
    pub best_restart: usize,
}

/// Max-min chordal packing with the default number of restarts.
pub fn generate_packing(
    dim: usize,
    size: usize,
    seed: u64,
    iterations: usize,
) -> Result<PackingOutcome> {
    generate_packing_with(
        dim,
        size,
        seed,
        &PackingOptions {
            iterations,
            ..PackingOptions::default()
        },
    )
}

/// Multi-start projected gradient descent on a log-sum-exp smoothing of the
/// largest pairwise overlap `|<s_i, s_j>|^2`, with the temperature raised
/// geometrically. Restart `r` draws from ChaCha stream `r` of `seed`; the best
/// restart wins, ties going to the lowest index, so the result does not
/// depend on the thread count.
pub fn generate_packing_with(
    dim: usize,
    size: usize,
    seed: u64,
    opts: &PackingOptions,
) -> Result<PackingOutcome> {
    if dim < 2 {
        return Err(Error::Codebook(format!("dimension {dim} < 2")));
    }
    if size < 2 || !size.is_power_of_two() {
        return Err(Error::Codebook(format!(
            "size {size} is not a power of two >= 2"
        )));
    }
    if opts.iterations == 0 || opts.restarts == 0 {
        return Err(Error::Codebook(
            "iterations and restarts must be positive".into(),
        ));
    }

    let runs: Vec<RestartResult> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| run_restart(dim, size, seed, r as u64, opts.iterations))
        .collect();

    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.min_distance > runs[best].min_distance {
            best = i;
        }
    }
    let RestartResult {
        vectors, converged, ..
    } = runs.into_iter().nth(best).expect("restarts > 0");
    Ok(PackingOutcome {
        codebook: Codebook::new(vectors)?,
        converged,
        best_restart: best,
    })
}

struct RestartResult {
    vectors: Vec<CVector>,
    min_distance: f64,
    converged: bool,
}

fn normalize(v: &mut CVector) {
    let n = v.norm();
    *v /= Complex64::new(n, 0.0);
}

fn run_restart(
    dim: usize,
    size: usize,
    seed: u64,
    stream: u64,
    iterations: usize,
) -> RestartResult {
    const BETA_START: f64 = 10.0;
    const BETA_END: f64 = 5.0e3;
    const STEP_START: f64 = 0.5;
    const STEP_END: f64 = 1.0e-3;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut vectors: Vec<CVector> = (0..size)
        .map(|_| {
            let mut v = CVector::from_fn(dim, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im)
            });
            normalize(&mut v);
            v
        })
        .collect();

    let mut best = vectors.clone();
    let mut best_dist = min_chordal(&vectors);
    let checkpoint = iterations - iterations / 10;
    let mut dist_at_checkpoint = best_dist;

    let pairs = size * (size - 1) / 2;
    let mut inner = vec![Complex64::new(0.0, 0.0); size * size];
    let mut weights = vec![0.0; pairs];
    for it in 0..iterations {
        let frac = it as f64 / iterations as f64;
        let beta = BETA_START * (BETA_END / BETA_START).powf(frac);
        let step = STEP_START * (STEP_END / STEP_START).powf(frac);

        let mut gmax = 0.0f64;
        let mut p = 0;
        for i in 0..size {
            for j in i + 1..size {
                let ip = vectors[j].dotc(&vectors[i]);
                inner[i * size + j] = ip;
                inner[j * size + i] = ip.conj();
                weights[p] = ip.norm_sqr();
                gmax = gmax.max(weights[p]);
                p += 1;
            }
        }
        let mut total = 0.0;
        for w in weights.iter_mut() {
            *w = (beta * (*w - gmax)).exp();
            total += *w;
        }

        // d|<s_j, s_i>|^2 / d conj(s_i) = s_j <s_j, s_i>
        let mut grads: Vec<CVector> = vec![CVector::zeros(dim); size];
        let mut p = 0;
        for i in 0..size {
            for j in i + 1..size {
                let w = weights[p] / total;
                p += 1;
                let ij = inner[i * size + j];
                grads[i] += &vectors[j] * (ij * w);
                grads[j] += &vectors[i] * (ij.conj() * w);
            }
        }
        for (v, g) in vectors.iter_mut().zip(&grads) {
            *v -= g * Complex64::new(step, 0.0);
            normalize(v);
        }

        let dist = min_chordal(&vectors);
        if dist > best_dist {
            best_dist = dist;
            best.clone_from(&vectors);
        }
        if it + 1 == checkpoint {
            dist_at_checkpoint = best_dist;
        }
    }

    RestartResult {
        vectors: best,
        min_distance: best_dist,
        converged: best_dist - dist_at_checkpoint < 1e-6,
    }
}
