//! Clock and shift operators and the error bases they generate.
//!
//! `X_d e_i = e_{i+1 mod d}` and `Z_d e_i = w^i e_i` with `w = exp(j 2 pi / d)`.
//! They satisfy `Z X = w X Z`. The `d^2` words `X^a Z^b` are unitary and
//! trace-orthogonal, so they form a basis of `d x d` matrices. For `M | N`
//! the non-square basis stacks an `M x M` word in one of the `N / M` block rows
//! of an `N x M` matrix and zeros elsewhere.
//!
//! Element order is fixed: block-major, then shift power `a`, then clock power
//! `b`. Syndrome indexing and branch ordering in the decoder depend on it.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{identity, root_of_unity, trace_inner, CMatrix, ONE};

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(Error::DimensionTooSmall(d))
    } else {
        Ok(())
    }
}

/// `X_d`: column `i` is `e_{(i+1) mod d}`.
pub fn shift_matrix(d: usize) -> Result<CMatrix> {
    check_dim(d)?;
    let mut x = CMatrix::zeros(d, d);
    for i in 0..d {
        x[((i + 1) % d, i)] = ONE;
    }
    Ok(x)
}

/// `Z_d = diag(1, w, ..., w^{d-1})`.
pub fn clock_matrix(d: usize) -> Result<CMatrix> {
    check_dim(d)?;
    Ok(CMatrix::from_diagonal(&crate::linalg::CVector::from_fn(
        d,
        |i, _| root_of_unity(i, d),
    )))
}

/// A word `X_d^a Z_d^b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliElement {
    dim: usize,
    shift: usize,
    clock: usize,
}

impl PauliElement {
    pub fn new(dim: usize, shift: usize, clock: usize) -> Result<Self> {
        check_dim(dim)?;
        for power in [shift, clock] {
            if power >= dim {
                return Err(Error::PowerOutOfRange { power, dim });
            }
        }
        Ok(PauliElement { dim, shift, clock })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shift_power(&self) -> usize {
        self.shift
    }

    pub fn clock_power(&self) -> usize {
        self.clock
    }

    /// Dense matrix. `X^a Z^b e_i = w^{b i} e_{i+a}`, built entrywise so every
    /// entry is a single root of unity.
    pub fn matrix(&self) -> CMatrix {
        let d = self.dim;
        let mut m = CMatrix::zeros(d, d);
        for i in 0..d {
            m[((i + self.shift) % d, i)] = root_of_unity(self.clock * i, d);
        }
        m
    }
}

/// `X_d^a Z_d^b` as a dense matrix. Powers must lie in `[0, d)`.
pub fn pauli_element(d: usize, a: usize, b: usize) -> Result<CMatrix> {
    Ok(PauliElement::new(d, a, b)?.matrix())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Square,
    NonSquare,
}

/// One basis matrix with its labels.
#[derive(Debug, Clone)]
pub struct BasisElement {
    pub word: PauliElement,
    /// Receive block holding the word; always 0 for a square basis.
    pub block: usize,
    pub matrix: CMatrix,
}

/// Trace-orthogonal basis of `N x M` channel matrices.
#[derive(Debug, Clone)]
pub struct ErrorBasis {
    kind: BasisKind,
    tx: usize,
    rx: usize,
    elements: Vec<BasisElement>,
}

impl ErrorBasis {
    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn tx_antennas(&self) -> usize {
        self.tx
    }

    pub fn rx_antennas(&self) -> usize {
        self.rx
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[BasisElement] {
        &self.elements
    }

    pub fn matrices(&self) -> impl Iterator<Item = &CMatrix> {
        self.elements.iter().map(|e| &e.matrix)
    }

    /// Canonical index of `(block, a, b)`.
    pub fn index_of(&self, block: usize, shift: usize, clock: usize) -> usize {
        (block * self.tx + shift) * self.tx + clock
    }

    /// `Tr(B* B)` for every element. Equals `M` for both kinds (and `N = M`
    /// in the square case).
    pub fn element_energy(&self) -> f64 {
        self.tx as f64
    }

    /// Coefficients `c_i = Tr(B_i* H) / M`, so that `sum_i c_i B_i = H`.
    pub fn expand(&self, h: &CMatrix) -> Result<Vec<Complex64>> {
        if h.shape() != (self.rx, self.tx) {
            return Err(Error::mismatch(
                format!("{}x{}", self.rx, self.tx),
                format!("{}x{}", h.nrows(), h.ncols()),
            ));
        }
        let norm = self.element_energy();
        Ok(self
            .elements
            .iter()
            .map(|e| trace_inner(&e.matrix, h) / norm)
            .collect())
    }

    /// `sum_i c_i B_i`.
    pub fn reconstruct(&self, coeffs: &[Complex64]) -> Result<CMatrix> {
        if coeffs.len() != self.len() {
            return Err(Error::mismatch(self.len(), coeffs.len()));
        }
        let mut h = CMatrix::zeros(self.rx, self.tx);
        for (c, e) in coeffs.iter().zip(&self.elements) {
            h += &e.matrix * *c;
        }
        Ok(h)
    }
}

/// The `N^2` words of `P_N`, ordered `a`-major, `b`-minor.
pub fn square_basis(n: usize) -> Result<ErrorBasis> {
    check_dim(n)?;
    let mut elements = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let word = PauliElement::new(n, a, b)?;
            elements.push(BasisElement {
                word,
                block: 0,
                matrix: word.matrix(),
            });
        }
    }
    Ok(ErrorBasis {
        kind: BasisKind::Square,
        tx: n,
        rx: n,
        elements,
    })
}

/// The `MN` semi-unitary block matrices `B(a, b, l)`, ordered by block `l`,
/// then `a`, then `b`.
pub fn nonsquare_basis(m: usize, n: usize) -> Result<ErrorBasis> {
    check_dim(m)?;
    if n < m || !n.is_multiple_of(m) {
        return Err(Error::mismatch(
            format!("receive count a multiple of {m}"),
            n,
        ));
    }
    let blocks = n / m;
    let mut elements = Vec::with_capacity(m * n);
    for block in 0..blocks {
        for a in 0..m {
            for b in 0..m {
                let word = PauliElement::new(m, a, b)?;
                let mut matrix = CMatrix::zeros(n, m);
                matrix
                    .view_mut((block * m, 0), (m, m))
                    .copy_from(&word.matrix());
                elements.push(BasisElement {
                    word,
                    block,
                    matrix,
                });
            }
        }
    }
    Ok(ErrorBasis {
        kind: if blocks == 1 {
            BasisKind::Square
        } else {
            BasisKind::NonSquare
        },
        tx: m,
        rx: n,
        elements,
    })
}

/// Basis matching an `N x M` channel: square when `M = N`, block otherwise.
pub fn basis_for(m: usize, n: usize) -> Result<ErrorBasis> {
    if m == n {
        square_basis(n)
    } else {
        nonsquare_basis(m, n)
    }
}

pub fn expand_channel(h: &CMatrix, basis: &ErrorBasis) -> Result<Vec<Complex64>> {
    basis.expand(h)
}

/// `I_T (x) B`.
pub fn lift_error(b: &CMatrix, t: usize) -> CMatrix {
    identity(t).kronecker(b)
}
