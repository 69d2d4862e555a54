//! Invariant suite for a configuration: the algebraic properties the codec
//! relies on, each measured and compared against a fixed tolerance.

use std::fmt;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::sample_channel;
use crate::config::CodeConfig;
use crate::error::Result;
use crate::gpauli::basis_for;
use crate::linalg::{identity, isometry_defect, max_abs, max_abs_diff, trace_inner, CMatrix};
use crate::stab::{scalar_multiple_of_identity, StabilizerCode};

pub const COMMUTATION_TOL: f64 = 1e-14;
pub const STABILIZATION_TOL: f64 = 1e-12;
pub const PROJECTOR_TOL: f64 = 1e-10;
pub const EXPANSION_TOL: f64 = 1e-12;

/// Random channels drawn for the expansion round trip.
const EXPANSION_DRAWS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Measured deviation, or a violation count for exhaustive checks.
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    fn below(name: &str, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.to_string(),
            passed: value < tolerance,
            value,
            tolerance,
        }
    }

    fn count(name: &str, violations: usize) -> Self {
        Check {
            name: name.to_string(),
            passed: violations == 0,
            value: violations as f64,
            tolerance: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: CodeConfig,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invariant suite for {}", self.config)?;
        for c in &self.checks {
            let status = if c.passed { "ok" } else { "FAIL" };
            writeln!(
                f,
                "  {status:<4} {:<28} {:>10.3e}  (tol {:.0e})",
                c.name, c.value, c.tolerance
            )?;
        }
        let failed = self.failures().count();
        write!(f, "{} checks, {failed} failed", self.checks.len())
    }
}

/// Build the code for `config` and run every check. Construction failures are
/// returned as errors; everything after that is reported per check.
pub fn verify(config: &CodeConfig, seed: u64) -> Result<Report> {
    let code = StabilizerCode::new(*config)?;
    let mut checks = Vec::new();
    generator_checks(&code, &mut checks);
    codespace_checks(&code, &mut checks);
    projector_checks(&code, &mut checks);
    syndrome_checks(&code, &mut checks);
    recovery_checks(&code, &mut checks);
    checks.push(tiling_check(&code));
    expansion_checks(config, seed, &mut checks)?;
    Ok(Report {
        config: *config,
        checks,
    })
}

fn generator_checks(code: &StabilizerCode, out: &mut Vec<Check>) {
    let (s1, s2) = code.generators();
    out.push(Check::below(
        "generator_commutation",
        max_abs_diff(&(s1 * s2), &(s2 * s1)),
        COMMUTATION_TOL,
    ));
    let scalar = [s1, s2]
        .iter()
        .filter(|s| scalar_multiple_of_identity(s, PROJECTOR_TOL).is_some())
        .count();
    out.push(Check::count("generators_not_scalar", scalar));
    let n = code.config().signal_len();
    let defect = isometry_defect(s1).max(isometry_defect(s2));
    out.push(Check::below(
        "generators_unitary",
        defect,
        STABILIZATION_TOL,
    ));
    let order = code.config().tx_antennas();
    let mut dev: f64 = 0.0;
    for s in [s1, s2] {
        dev = dev.max(max_abs_diff(
            &crate::linalg::matrix_power(s, order),
            &identity(n),
        ));
    }
    out.push(Check::below("generator_order", dev, STABILIZATION_TOL));
    let scaled = code
        .group_elements()
        .into_iter()
        .filter(|((k, l), g)| {
            (*k, *l) != (0, 0) && scalar_multiple_of_identity(g, PROJECTOR_TOL).is_some()
        })
        .count();
    out.push(Check::count("no_scaled_identity", scaled));
}

fn codespace_checks(code: &StabilizerCode, out: &mut Vec<Check>) {
    let c = code.code_matrix();
    let (s1, s2) = code.generators();
    out.push(Check::below(
        "code_isometry",
        isometry_defect(c),
        STABILIZATION_TOL,
    ));
    let dev = max_abs_diff(&(s1 * c), c).max(max_abs_diff(&(s2 * c), c));
    out.push(Check::below(
        "codespace_stabilization",
        dev,
        STABILIZATION_TOL,
    ));
    let d = code.config().dim();
    out.push(Check::count("code_rank", c.rank(PROJECTOR_TOL).abs_diff(d)));
}

fn projector_checks(code: &StabilizerCode, out: &mut Vec<Check>) {
    let n = code.config().signal_len();
    let branches = code.branches();
    let mut idem: f64 = 0.0;
    let mut adj: f64 = 0.0;
    let mut orth: f64 = 0.0;
    let mut total = CMatrix::zeros(n, n);
    for (i, bi) in branches.iter().enumerate() {
        let p = &bi.projector;
        idem = idem.max(max_abs_diff(&(p * p), p));
        adj = adj.max(max_abs_diff(&p.adjoint(), p));
        for bj in &branches[i + 1..] {
            orth = orth.max(max_abs(&(p * &bj.projector)));
        }
        total += p;
    }
    out.push(Check::below("projector_idempotence", idem, PROJECTOR_TOL));
    out.push(Check::below("projector_self_adjoint", adj, PROJECTOR_TOL));
    out.push(Check::below("projector_orthogonality", orth, PROJECTOR_TOL));
    out.push(Check::below(
        "projector_completeness",
        max_abs_diff(&total, &identity(n)),
        PROJECTOR_TOL,
    ));
}

fn syndrome_checks(code: &StabilizerCode, out: &mut Vec<Check>) {
    let c = code.code_matrix();
    let (s1, s2) = code.generators();
    let mut dev: f64 = 0.0;
    for b in code.branches() {
        let image = &b.error * c;
        dev = dev.max(max_abs_diff(&(s1 * &image), &(&image * b.syndrome.z1())));
        dev = dev.max(max_abs_diff(&(s2 * &image), &(&image * b.syndrome.z2())));
    }
    out.push(Check::below("syndrome_eigenvalues", dev, STABILIZATION_TOL));
    let mut seen: Vec<_> = code.branches().iter().map(|b| b.syndrome).collect();
    seen.sort();
    seen.dedup();
    out.push(Check::count(
        "syndrome_bijectivity",
        code.config().syndrome_count() - seen.len(),
    ));
}

fn recovery_checks(code: &StabilizerCode, out: &mut Vec<Check>) {
    let c = code.code_matrix();
    let mut round: f64 = 0.0;
    let mut cross: f64 = 0.0;
    for bz in code.branches() {
        round = round.max(max_abs_diff(&(&bz.recovery * &bz.error * c), c));
        for bo in code.branches() {
            if bo.syndrome != bz.syndrome {
                cross = cross.max(max_abs(&(&bz.recovery * &bo.error * c)));
            }
        }
    }
    out.push(Check::below("recovery_round_trip", round, PROJECTOR_TOL));
    out.push(Check::below(
        "cross_syndrome_annihilation",
        cross,
        PROJECTOR_TOL,
    ));
}

/// The error images of the codespace, side by side, form a unitary.
fn tiling_check(code: &StabilizerCode) -> Check {
    let c = code.code_matrix();
    let d = code.config().dim();
    let mut w = CMatrix::zeros(code.config().signal_len(), code.branches().len() * d);
    for (i, b) in code.branches().iter().enumerate() {
        w.columns_mut(i * d, d).copy_from(&(&b.error * c));
    }
    let defect = if w.is_square() {
        isometry_defect(&w)
    } else {
        f64::INFINITY
    };
    Check::below("error_subspace_tiling", defect, PROJECTOR_TOL)
}

fn expansion_checks(config: &CodeConfig, seed: u64, out: &mut Vec<Check>) -> Result<()> {
    let (m, n) = (config.tx_antennas(), config.rx_antennas());
    let basis = basis_for(m, n)?;
    let energy = Complex64::new(basis.element_energy(), 0.0);
    let mats: Vec<&CMatrix> = basis.matrices().collect();
    let mut gram: f64 = 0.0;
    for (i, a) in mats.iter().enumerate() {
        for (j, b) in mats.iter().enumerate() {
            let want = if i == j {
                energy
            } else {
                Complex64::new(0.0, 0.0)
            };
            gram = gram.max((trace_inner(a, b) - want).norm());
        }
    }
    out.push(Check::below(
        "basis_trace_orthogonality",
        gram,
        EXPANSION_TOL,
    ));
    out.push(Check::count("basis_size", basis.len().abs_diff(m * n)));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dev: f64 = 0.0;
    for _ in 0..EXPANSION_DRAWS {
        let h = sample_channel(m, n, &mut rng).h;
        let coeffs = basis.expand(&h)?;
        dev = dev.max(max_abs_diff(&basis.reconstruct(&coeffs)?, &h));
    }
    out.push(Check::below(
        "channel_expansion_round_trip",
        dev,
        EXPANSION_TOL,
    ));
    Ok(())
}
