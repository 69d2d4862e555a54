//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Expected values come from oracles written here, independent of the library
//! code they check: explicit Kronecker constructions, the Gaussian likelihood
//! of the received block, the simplex bound for line packings and the Wilson
//! score formula.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use qstbc::codebook::{generate_packing, Codebook};
use qstbc::codec::{encode, BranchDecoder};
use qstbc::gpauli::basis_for;
use qstbc::simkit::{
    estimate_diversity_slope, run, write_csv, BerPoint, ExperimentSpec, SlopeWindow,
};
use qstbc::{CodeConfig, StabilizerCode};

type M = DMatrix<Complex64>;
type V = DVector<Complex64>;

const CONFIGS: [(usize, usize, usize, usize); 6] = [
    (2, 2, 4, 2),
    (3, 3, 9, 3),
    (4, 4, 8, 2),
    (5, 5, 10, 2),
    (2, 4, 4, 2),
    (3, 6, 9, 3),
];

const CODEBOOK_SEED: u64 = 7;
const PACKING_ITERATIONS: usize = 2000;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn cfg(t: (usize, usize, usize, usize)) -> CodeConfig {
    CodeConfig::new(t.0, t.1, t.2, t.3).expect("reference configuration")
}

fn eye(n: usize) -> M {
    M::identity(n, n)
}

/// `X |j> = |j+1>`.
fn shift(m: usize) -> M {
    M::from_fn(m, m, |i, j| if i == (j + 1) % m { c(1.0) } else { c(0.0) })
}

/// `Z |j> = w^j |j>`.
fn clock(m: usize) -> M {
    M::from_fn(m, m, |i, j| {
        if i == j {
            Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * i as f64 / m as f64)
        } else {
            c(0.0)
        }
    })
}

fn max_abs(a: &M) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn dev(a: &M, b: &M) -> f64 {
    max_abs(&(a - b))
}

fn gaussian(rng: &mut ChaCha8Rng, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

fn random_h(n: usize, m: usize, rng: &mut ChaCha8Rng) -> M {
    M::from_fn(n, m, |_, _| gaussian(rng, 1.0))
}

/// `(I_T (x) H) x`, built densely.
fn through_channel(h: &M, x: &V, t: usize) -> V {
    eye(t).kronecker(h) * x
}

fn codebook(d: usize) -> Codebook {
    generate_packing(d, 4, CODEBOOK_SEED, PACKING_ITERATIONS)
        .expect("packing")
        .codebook
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = [0.0f64; 8];
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for t in CONFIGS {
        let config = cfg(t);
        let (m, n, tt, d) = t;
        let code = StabilizerCode::new(config).expect("construction");
        let (s1, s2) = code.generators();

        // generators against an explicit Kronecker construction
        let x = shift(m);
        let z = clock(m);
        let e1 = eye(d).kronecker(&x.kronecker(&x));
        let e2 = eye(d).kronecker(&z.kronecker(&z.adjoint()));
        if dev(s1, &e1) > 1e-14 || dev(s2, &e2) > 1e-14 {
            failures.push(format!(
                "{config}: generators differ from I_d (x) X (x) X, I_d (x) Z (x) Z^-1"
            ));
        }

        let comm = dev(&(s1 * s2), &(s2 * s1));
        let cm = code.code_matrix();
        let stab = dev(&(s1 * cm), cm).max(dev(&(s2 * cm), cm));
        let iso = dev(&(cm.adjoint() * cm), &eye(d));

        let dim = m * tt;
        let mut idem: f64 = 0.0;
        let mut orth: f64 = 0.0;
        let mut adj: f64 = 0.0;
        let mut total = M::zeros(dim, dim);
        let branches = code.branches();
        for (i, bi) in branches.iter().enumerate() {
            let p = &bi.projector;
            idem = idem.max(dev(&(p * p), p));
            adj = adj.max(dev(&p.adjoint(), p));
            for bj in &branches[i + 1..] {
                orth = orth.max(max_abs(&(p * &bj.projector)));
            }
            total += p;
        }
        let complete = dev(&total, &eye(dim));

        // syndrome bijectivity: measure each error image's eigenvalues directly
        let mut pairs = Vec::new();
        for a in 0..m {
            for b in 0..m {
                let e = eye(tt).kronecker(&(x.pow(a as u32) * z.pow(b as u32)));
                let img = &e * cm;
                let col = img.column(0).into_owned();
                let k = col.icamax();
                let z1 = (s1 * &col)[k] / col[k];
                let z2 = (s2 * &col)[k] / col[k];
                if dev(&(s1 * &img), &(&img * z1)) > 1e-12
                    || dev(&(s2 * &img), &(&img * z2)) > 1e-12
                {
                    failures.push(format!("{config}: E({a},{b}) C is not a joint eigenspace"));
                }
                let q = |w: Complex64| {
                    ((w.arg() / (2.0 * std::f64::consts::PI) * m as f64).round() as i64)
                        .rem_euclid(m as i64)
                };
                pairs.push((q(z1), q(z2)));
                let branch = code.branch(a, b);
                if dev(&branch.error, &e) > 1e-14 {
                    failures.push(format!("{config}: error operator ({a},{b}) differs"));
                }
                if (branch.syndrome.z1() - z1).norm() > 1e-12
                    || (branch.syndrome.z2() - z2).norm() > 1e-12
                {
                    failures.push(format!("{config}: tabulated syndrome of ({a},{b}) differs"));
                }
            }
        }
        pairs.sort();
        pairs.dedup();
        if pairs.len() != m * m {
            failures.push(format!(
                "{config}: {} distinct syndromes for {} errors",
                pairs.len(),
                m * m
            ));
        }

        // channel expansion round trip: sum_i c_i B_i == H
        let basis = basis_for(m, n).expect("basis");
        let mut exp: f64 = 0.0;
        for _ in 0..16 {
            let h = random_h(n, m, &mut rng);
            let coeffs = basis.expand(&h).expect("expand");
            let mut rebuilt = M::zeros(n, m);
            for (ci, b) in coeffs.iter().zip(basis.matrices()) {
                rebuilt += b * *ci;
            }
            exp = exp.max(dev(&rebuilt, &h));
        }

        let measured = [comm, stab, iso, idem, adj, orth, complete, exp];
        let limits = [1e-14, 1e-12, 1e-12, 1e-10, 1e-10, 1e-10, 1e-10, 1e-12];
        let names = [
            "commutation",
            "stabilization",
            "isometry",
            "idempotence",
            "self-adjoint",
            "orthogonality",
            "completeness",
            "expansion",
        ];
        for i in 0..8 {
            worst[i] = worst[i].max(measured[i]);
            if measured[i] >= limits[i] {
                failures.push(format!(
                    "{config}: {} {:.2e} >= {:.0e}",
                    names[i], measured[i], limits[i]
                ));
            }
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(10) {
        failures.push(format!("runtime {elapsed:.2?} >= 10 s"));
    }
    let detail = if failures.is_empty() {
        format!(
            "6 configs; max commutation {:.1e}, stabilization {:.1e}, projector {:.1e}, expansion {:.1e}; {elapsed:.2?}",
            worst[0],
            worst[1],
            worst[3].max(worst[4]).max(worst[5]).max(worst[6]),
            worst[7]
        )
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut errors = 0usize;
    let mut decodes = 0usize;
    let books = [codebook(2), codebook(3)];
    for t in CONFIGS {
        let config = cfg(t);
        let code = StabilizerCode::new(config).expect("construction");
        let cb = &books[config.dim() - 2];
        let decoder = BranchDecoder::new(&code, cb).expect("decoder");
        let mut ws = decoder.workspace();
        let frames: Vec<V> = (0..cb.len())
            .map(|k| encode(cb.vector(k), &code).unwrap().signal)
            .collect();
        for _ in 0..1000 {
            let h = random_h(config.rx_antennas(), config.tx_antennas(), &mut rng);
            for (k, x) in frames.iter().enumerate() {
                let y = through_channel(&h, x, config.coherence_time());
                if decoder.decode(y.as_slice(), &mut ws) != k {
                    errors += 1;
                }
                decodes += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let passed = errors == 0 && elapsed < Duration::from_secs(30);
    outcome(
        passed,
        format!("{errors} errors in {decodes} noiseless decodes; {elapsed:.2?} (limit 30 s)"),
    )
}

/// Exact ML detector from the generative model. Given `s`, `y` is zero-mean
/// Gaussian with covariance `(X^T conj(X)) (x) I_N + sigma^2 I`, where column
/// `t` of the `M x T` matrix `X` is the slot-`t` transmit vector.
struct LikelihoodOracle {
    factors: Vec<(Cholesky<Complex64, nalgebra::Dyn>, f64)>,
}

impl LikelihoodOracle {
    fn new(frames: &[V], m: usize, n: usize, t: usize, sigma2: f64) -> Self {
        let factors = frames
            .iter()
            .map(|x| {
                let xm = M::from_column_slice(m, t, x.as_slice());
                let slots = xm.transpose() * xm.map(|z| z.conj());
                let cov = slots.kronecker(&eye(n)) + eye(n * t) * c(sigma2);
                let chol = Cholesky::new(cov).expect("covariance is positive definite");
                let logdet = 2.0 * chol.l().diagonal().iter().map(|z| z.re.ln()).sum::<f64>();
                (chol, logdet)
            })
            .collect();
        LikelihoodOracle { factors }
    }

    fn decide(&self, y: &V) -> usize {
        let mut best = 0;
        let mut best_ll = f64::NEG_INFINITY;
        for (k, (chol, logdet)) in self.factors.iter().enumerate() {
            let w = chol.solve(y);
            let ll = -logdet - y.dotc(&w).re;
            if ll > best_ll {
                best = k;
                best_ll = ll;
            }
        }
        best
    }
}

fn criterion_3() -> Outcome {
    let (m, n, t) = (2, 2, 4);
    let config = cfg((m, n, t, 2));
    let code = StabilizerCode::new(config).expect("construction");
    let cb = codebook(2);
    let decoder = BranchDecoder::new(&code, &cb).expect("decoder");
    let mut ws = decoder.workspace();
    let frames: Vec<V> = (0..cb.len())
        .map(|k| encode(cb.vector(k), &code).unwrap().signal)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let trials = 10_000;
    let mut parts = Vec::new();
    let mut passed = true;
    for sigma2 in [1.0, 0.1] {
        let oracle = LikelihoodOracle::new(&frames, m, n, t, sigma2);
        let mut agree = 0;
        for _ in 0..trials {
            let k = rng.random_range(0..cb.len());
            let h = random_h(n, m, &mut rng);
            let mut y = through_channel(&h, &frames[k], t);
            for v in y.iter_mut() {
                *v += gaussian(&mut rng, sigma2);
            }
            if decoder.decode(y.as_slice(), &mut ws) == oracle.decide(&y) {
                agree += 1;
            }
        }
        let frac = agree as f64 / trials as f64;
        passed &= frac >= 0.999;
        parts.push(format!("sigma^2={sigma2}: {agree}/{trials} agree"));
    }
    outcome(passed, parts.join(", ") + " (need >= 99.9%)")
}

fn spec(
    t: (usize, usize, usize, usize),
    cb: &Codebook,
    grid: Vec<f64>,
    trials: u64,
    workers: usize,
) -> ExperimentSpec {
    ExperimentSpec {
        config: cfg(t),
        codebook: cb.clone(),
        snr_grid_db: grid,
        trials_per_point: trials,
        seed: 2024,
        workers,
        stop_after_bit_errors: None,
    }
}

fn workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let cb2 = codebook(2);
    let grid: Vec<f64> = (8..=16).map(f64::from).collect();
    let points = run(&spec((2, 2, 4, 2), &cb2, grid, 1_000_000, workers())).expect("run");
    let window = SlopeWindow {
        min_bit_errors: 100,
        ber_max: 1e-3,
        ber_min: 1e-5,
    };
    let used = points
        .iter()
        .filter(|p| p.bit_errors >= 100 && p.ber <= 1e-3 && p.ber >= 1e-5)
        .count();
    let slope = estimate_diversity_slope(&points, &window);
    let (a_ok, a_text) = match slope {
        Ok(s) => (
            s >= 3.0,
            format!("(a) slope {s:.3} over {used} points in [1e-5, 1e-3]"),
        ),
        Err(e) => (false, format!("(a) {e}")),
    };

    let cb3 = codebook(3);
    let grid: Vec<f64> = (-8..=2).step_by(2).map(f64::from).collect();
    let square = run(&spec((3, 3, 9, 3), &cb3, grid.clone(), 100_000, workers())).expect("run");
    let wide = run(&spec((3, 6, 9, 3), &cb3, grid, 100_000, workers())).expect("run");
    let mut compared = 0;
    let mut b_ok = true;
    for (s, w) in square.iter().zip(&wide) {
        if s.bit_errors >= 100 && w.bit_errors >= 100 {
            compared += 1;
            b_ok &= w.ber < s.ber;
        }
    }
    b_ok &= compared > 0;
    let elapsed = start.elapsed();
    let passed = a_ok && b_ok && elapsed <= Duration::from_secs(15 * 60);
    outcome(
        passed,
        format!("{a_text}; (b) BER(3,6,9,3) < BER(3,3,9,3) at {compared} comparable points: {b_ok}; {elapsed:.2?}"),
    )
}

/// Wilson score interval at 95%, written out independently.
fn wilson(k: u64, n: u64) -> (f64, f64) {
    let z = 1.959_963_984_540_054_f64;
    let (k, n) = (k as f64, n as f64);
    let p = k / n;
    let a = p + z * z / (2.0 * n);
    let b = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
    let den = 1.0 + z * z / n;
    ((a - b) / den, (a + b) / den)
}

fn criterion_5_grid() -> Vec<f64> {
    (-6..=8).step_by(2).map(f64::from).collect()
}

fn criterion_5(cb3: &Codebook) -> (Outcome, Vec<BerPoint>) {
    let start = Instant::now();
    let s = spec((3, 3, 9, 3), cb3, criterion_5_grid(), 100_000, workers());
    let points = run(&s).expect("run");
    let elapsed = start.elapsed();
    let monotone = points.windows(2).all(|w| w[1].ber <= w[0].ber);
    let wilson_ok = points.iter().all(|p| {
        let (lo, hi) = wilson(p.bit_errors, p.bits_sent);
        p.ci_low <= p.ber
            && p.ber <= p.ci_high
            && (p.ci_low - lo.max(0.0)).abs() < 1e-12
            && (p.ci_high - hi.min(1.0)).abs() < 1e-12
    });
    let rate = cb3.rate_fraction(s.config.coherence_time());
    let passed = points.len() == 8
        && monotone
        && wilson_ok
        && rate == (2, 9)
        && elapsed < Duration::from_secs(300);
    let curve: Vec<String> = points.iter().map(|p| format!("{:.2e}", p.ber)).collect();
    (
        outcome(
            passed,
            format!(
                "rate {}/{}, monotone {monotone}, Wilson {wilson_ok}, BER [{}]; {elapsed:.2?} (limit 5 min)",
                rate.0,
                rate.1,
                curve.join(", ")
            ),
        ),
        points,
    )
}

fn criterion_6(cb3: &Codebook, reference: &[BerPoint]) -> Outcome {
    let csv = |points: &[BerPoint]| {
        let mut buf = Vec::new();
        write_csv(points, &mut buf).expect("csv");
        buf
    };
    let want = csv(reference);
    let mut parts = Vec::new();
    let mut passed = true;
    for w in [1, 3, 8] {
        let points = run(&spec((3, 3, 9, 3), cb3, criterion_5_grid(), 100_000, w)).expect("run");
        let same = csv(&points) == want;
        passed &= same;
        parts.push(format!(
            "workers={w}: {}",
            if same { "identical" } else { "DIFFERS" }
        ));
    }
    outcome(passed, parts.join(", "))
}

fn criterion_7() -> Outcome {
    let (d, k) = (3usize, 4usize);
    // Rankin simplex bound for lines: d_c^2 <= (d-1)/d * K/(K-1)
    let bound = ((d as f64 - 1.0) / d as f64 * k as f64 / (k as f64 - 1.0)).sqrt();
    let cb = generate_packing(d, k, CODEBOOK_SEED, PACKING_ITERATIONS)
        .expect("packing")
        .codebook;
    let mut min = f64::INFINITY;
    for i in 0..k {
        for j in i + 1..k {
            let ip = cb.vector(i).dotc(cb.vector(j)).norm();
            min = min.min((1.0 - ip * ip).max(0.0).sqrt());
        }
    }
    let ratio = min / bound;
    outcome(
        ratio >= 0.97 && (min - cb.min_chordal_distance()).abs() < 1e-12,
        format!(
            "min chordal distance {min:.6}, bound {bound:.6}, ratio {:.4}% (need >= 97%)",
            100.0 * ratio
        ),
    )
}

fn report(id: &str, title: &str, o: &Outcome) -> bool {
    println!(
        "{} criterion {id} {title}: {}",
        if o.passed { "PASS" } else { "FAIL" },
        o.detail
    );
    o.passed
}

fn main() -> ExitCode {
    let total = Instant::now();
    let mut ok = true;
    ok &= report("1", "algebraic invariants", &criterion_1());
    ok &= report("2", "noiseless exactness", &criterion_2());
    ok &= report("3", "ML-oracle agreement", &criterion_3());
    ok &= report("4", "diversity behavior", &criterion_4());
    let cb3 = codebook(3);
    let (o5, points) = criterion_5(&cb3);
    ok &= report("5", "3x3 reproduction", &o5);
    ok &= report(
        "6",
        "determinism across workers",
        &criterion_6(&cb3, &points),
    );
    ok &= report("7", "packing quality", &criterion_7());
    println!(
        "acceptance: {} in {:.2?}",
        if ok { "all criteria pass" } else { "FAILURES" },
        total.elapsed()
    );
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
