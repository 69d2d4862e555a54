//! Stabilizer code on the `M x M` core, lifted to coherence time `T`.
//!
//! The generators are
//!
//! ```text
//! S1 = I_d (x) X_M (x) X_M
//! S2 = I_d (x) Z_M (x) Z_M^{-1}
//! ```
//!
//! acting on `C^{MT}` with `d = T / M`. Errors act on the last factor only,
//! `E(a, b) = I_T (x) X^a Z^b`. The codespace is the joint +1 eigenspace,
//! spanned by `e_i (x) Phi` where `Phi = sum_j e_j (x) e_j / sqrt(M)`.
//!
//! An error `E(a, b)` moves the codespace into the joint eigenspace with
//! `S1 -> w^{-b}` and `S2 -> w^{-a}`. Those `M^2` syndromes are distinct, so
//! the `M^2` error images of the codespace are mutually orthogonal and
//! together fill `C^{MT}`.

use num_complex::Complex64;

use crate::config::CodeConfig;
use crate::error::{Error, Result};
use crate::gpauli::{clock_matrix, lift_error, pauli_element, shift_matrix};
use crate::linalg::{identity, matrix_power, max_abs_diff, root_of_unity, CMatrix, ZERO};

/// Singular values below this count towards the numerical joint eigenspace.
const NULL_SPACE_TOL: f64 = 1e-8;
/// Agreement required between the analytic and numerical codespaces, and for
/// the construction-time syndrome check.
const CONSTRUCTION_TOL: f64 = 1e-10;

/// Eigenvalue pair `(z1, z2) = (w^first, w^second)` with `w = exp(j 2 pi / M)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Syndrome {
    order: usize,
    first: usize,
    second: usize,
}

impl Syndrome {
    pub fn new(order: usize, first: usize, second: usize) -> Self {
        Syndrome {
            order,
            first: first % order,
            second: second % order,
        }
    }

    /// Exponent of `w` in the `S1` eigenvalue.
    pub fn first_power(&self) -> usize {
        self.first
    }

    /// Exponent of `w` in the `S2` eigenvalue.
    pub fn second_power(&self) -> usize {
        self.second
    }

    pub fn z1(&self) -> Complex64 {
        root_of_unity(self.first, self.order)
    }

    pub fn z2(&self) -> Complex64 {
        root_of_unity(self.second, self.order)
    }

    pub fn is_trivial(&self) -> bool {
        self.first == 0 && self.second == 0
    }
}

/// `(S1, S2)` for the configuration.
pub fn build_generators(config: &CodeConfig) -> (CMatrix, CMatrix) {
    let m = config.tx_antennas();
    let outer = identity(config.dim());
    // M >= 2 is guaranteed by CodeConfig
    let x = shift_matrix(m).expect("valid config");
    let z = clock_matrix(m).expect("valid config");
    let s1 = outer.kronecker(&x.kronecker(&x));
    let s2 = outer.kronecker(&z.kronecker(&z.adjoint()));
    (s1, s2)
}

/// Analytic code matrix: column `i` is `e_i (x) Phi_M`.
fn analytic_code_matrix(config: &CodeConfig) -> CMatrix {
    let m = config.tx_antennas();
    let core = m * m;
    let amp = Complex64::new(1.0 / (m as f64).sqrt(), 0.0);
    let mut c = CMatrix::zeros(config.signal_len(), config.dim());
    for i in 0..config.dim() {
        for j in 0..m {
            c[(i * core + j * m + j, i)] = amp;
        }
    }
    c
}

/// Orthogonal projector onto the joint +1 eigenspace, from the null space of
/// `[S1 - I; S2 - I]`. Returns the projector and the eigenspace dimension.
fn numerical_codespace(s1: &CMatrix, s2: &CMatrix) -> (CMatrix, usize) {
    let n = s1.nrows();
    let mut stacked = CMatrix::zeros(2 * n, n);
    stacked.rows_mut(0, n).copy_from(&(s1 - identity(n)));
    stacked.rows_mut(n, n).copy_from(&(s2 - identity(n)));
    let svd = stacked.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut proj = CMatrix::zeros(n, n);
    let mut dim = 0;
    for (k, sigma) in svd.singular_values.iter().enumerate() {
        if *sigma < NULL_SPACE_TOL {
            let v = v_t.row(k).adjoint();
            proj += &v * v.adjoint();
            dim += 1;
        }
    }
    (proj, dim)
}

/// `MT x d` matrix with orthonormal columns spanning the joint +1 eigenspace.
///
/// The columns are the analytic choice `e_i (x) Phi_M`; the span is checked
/// against a numerical null-space computation and construction fails if the
/// eigenspace dimension is not `d`.
pub fn build_code_matrix(config: &CodeConfig) -> Result<CMatrix> {
    let (s1, s2) = build_generators(config);
    let c = analytic_code_matrix(config);
    let (proj, dim) = numerical_codespace(&s1, &s2);
    if dim != config.dim() {
        return Err(Error::Construction(format!(
            "joint +1 eigenspace of {config} has dimension {dim}, expected {}",
            config.dim()
        )));
    }
    let dev = max_abs_diff(&proj, &(&c * c.adjoint()));
    if dev > CONSTRUCTION_TOL {
        return Err(Error::Construction(format!(
            "analytic codespace deviates from the numerical eigenspace by {dev:e}"
        )));
    }
    Ok(c)
}

/// Syndrome of the error `X^a Z^b`.
///
/// `X E = w^{-b} E X` and `Z^{-1} E = w^{-a} E Z^{-1}`, so for a codespace
/// vector `v`, `S1 E v = w^{-b} E v` and `S2 E v = w^{-a} E v`.
pub fn syndrome_of(shift: usize, clock: usize, config: &CodeConfig) -> Result<Syndrome> {
    let m = config.tx_antennas();
    for power in [shift, clock] {
        if power >= m {
            return Err(Error::PowerOutOfRange { power, dim: m });
        }
    }
    Ok(Syndrome::new(m, m - clock, m - shift))
}

/// `(1/M) sum_k (conj(z) S)^k`: projector onto the `z` eigenspace of a
/// generator of order `M`.
fn cyclic_average(s: &CMatrix, z: Complex64, order: usize) -> CMatrix {
    let step = s * z.conj();
    let mut acc = CMatrix::zeros(s.nrows(), s.ncols());
    let mut power = identity(s.nrows());
    for _ in 0..order {
        acc += &power;
        power = &power * &step;
    }
    acc / Complex64::new(order as f64, 0.0)
}

/// Projector onto the syndrome-`z` subspace, by averaging over the cyclic
/// group of each generator. For `M = 2` this is `(I + z1 S1)(I + z2 S2) / 4`.
pub fn build_projector(z: &Syndrome, config: &CodeConfig) -> CMatrix {
    let (s1, s2) = build_generators(config);
    projector_from(&s1, &s2, z, config.tx_antennas())
}

fn projector_from(s1: &CMatrix, s2: &CMatrix, z: &Syndrome, order: usize) -> CMatrix {
    cyclic_average(s1, z.z1(), order) * cyclic_average(s2, z.z2(), order)
}

/// `E(a, b) = I_T (x) X^a Z^b` on `C^{MT}`.
pub fn error_operator(shift: usize, clock: usize, config: &CodeConfig) -> Result<CMatrix> {
    let word = pauli_element(config.tx_antennas(), shift, clock)?;
    Ok(lift_error(&word, config.coherence_time()))
}

/// `R_z = E(a, b)* P_z` for the syndrome of `(a, b)`.
pub fn recovery_operator(shift: usize, clock: usize, config: &CodeConfig) -> Result<CMatrix> {
    let z = syndrome_of(shift, clock, config)?;
    let e = error_operator(shift, clock, config)?;
    Ok(e.adjoint() * build_projector(&z, config))
}

/// Per-error data: the operator, its syndrome and subspace projector, and the
/// recovery map back into the codespace.
#[derive(Debug, Clone)]
pub struct SyndromeBranch {
    pub shift: usize,
    pub clock: usize,
    pub syndrome: Syndrome,
    pub error: CMatrix,
    pub projector: CMatrix,
    pub recovery: CMatrix,
}

/// A fully built code. Immutable once constructed.
#[derive(Debug, Clone)]
pub struct StabilizerCode {
    config: CodeConfig,
    s1: CMatrix,
    s2: CMatrix,
    code_matrix: CMatrix,
    branches: Vec<SyndromeBranch>,
}

impl StabilizerCode {
    pub fn new(config: CodeConfig) -> Result<Self> {
        let m = config.tx_antennas();
        let (s1, s2) = build_generators(&config);
        let code_matrix = build_code_matrix(&config)?;

        let mut branches = Vec::with_capacity(m * m);
        for shift in 0..m {
            for clock in 0..m {
                let syndrome = syndrome_of(shift, clock, &config)?;
                let error = error_operator(shift, clock, &config)?;
                let image = &error * &code_matrix;
                for (s, z, name) in [(&s1, syndrome.z1(), "S1"), (&s2, syndrome.z2(), "S2")] {
                    let dev = max_abs_diff(&(s * &image), &(&image * z));
                    if dev > CONSTRUCTION_TOL {
                        return Err(Error::Construction(format!(
                            "{name} eigenvalue of E({shift},{clock}) off by {dev:e}"
                        )));
                    }
                }
                let projector = projector_from(&s1, &s2, &syndrome, m);
                let recovery = error.adjoint() * &projector;
                branches.push(SyndromeBranch {
                    shift,
                    clock,
                    syndrome,
                    error,
                    projector,
                    recovery,
                });
            }
        }

        let mut seen: Vec<_> = branches.iter().map(|b| b.syndrome).collect();
        seen.sort();
        seen.dedup();
        if seen.len() != m * m {
            return Err(Error::Construction(format!(
                "only {} distinct syndromes for {} errors",
                seen.len(),
                m * m
            )));
        }

        Ok(StabilizerCode {
            config,
            s1,
            s2,
            code_matrix,
            branches,
        })
    }

    pub fn config(&self) -> &CodeConfig {
        &self.config
    }

    pub fn generators(&self) -> (&CMatrix, &CMatrix) {
        (&self.s1, &self.s2)
    }

    pub fn code_matrix(&self) -> &CMatrix {
        &self.code_matrix
    }

    /// Branches in canonical `(a, b)` order, `a`-major.
    pub fn branches(&self) -> &[SyndromeBranch] {
        &self.branches
    }

    pub fn branch(&self, shift: usize, clock: usize) -> &SyndromeBranch {
        &self.branches[shift * self.config.tx_antennas() + clock]
    }

    /// Error `(a, b)` that produces syndrome `z`, if any.
    pub fn lookup(&self, z: &Syndrome) -> Option<(usize, usize)> {
        self.branches
            .iter()
            .find(|b| b.syndrome == *z)
            .map(|b| (b.shift, b.clock))
    }

    /// `S1^k S2^l` for all `k, l` in `[M]`, in row-major order.
    pub fn group_elements(&self) -> Vec<((usize, usize), CMatrix)> {
        let m = self.config.tx_antennas();
        let mut out = Vec::with_capacity(m * m);
        for k in 0..m {
            let a = matrix_power(&self.s1, k);
            for l in 0..m {
                out.push(((k, l), &a * matrix_power(&self.s2, l)));
            }
        }
        out
    }
}

/// If `a` is `lambda I` for some scalar, return `lambda`.
pub fn scalar_multiple_of_identity(a: &CMatrix, tol: f64) -> Option<Complex64> {
    if !a.is_square() {
        return None;
    }
    let lambda = a[(0, 0)];
    let n = a.nrows();
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { lambda } else { ZERO };
            if (a[(i, j)] - want).norm() > tol {
                return None;
            }
        }
    }
    Some(lambda)
}
