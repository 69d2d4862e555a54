//! Encoder and maximum-likelihood decoder.
//!
//! A symbol `s` (unit vector in `C^d`) is sent as `x = sqrt(T) C s`. The
//! receiver splits `y` into `N / M` receive-block streams of length `MT`,
//! applies every recovery operator `R_z = E_z* P_z` and collapses with `C*`:
//!
//! ```text
//! p_z = C* R_z y_l = sqrt(T) c_z s + C* E_z* P_z n_l
//! ```
//!
//! giving `MN` independently faded copies of `s`. The ML decision is
//! `argmax_s s* G s` with `G = sum_z p_z p_z*`. Ties go to the lowest index.
//!
//! [`BranchDecoder`] is the precomposed hot path used by the simulator:
//! `C* R_z = (E_z C)*` is exactly sparse (each row has `M` nonzeros), and the
//! block de-interleaving is folded into its column indices.

use num_complex::Complex64;
use rand::Rng;

use crate::channel;
use crate::codebook::Codebook;
use crate::config::CodeConfig;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, ZERO};
use crate::stab::StabilizerCode;

/// Tolerance on `||s|| = 1` for symbols handed to the encoder.
pub const SYMBOL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedFrame {
    pub symbol: CVector,
    /// `sqrt(T) C s`, length `MT`.
    pub signal: CVector,
}

/// `sqrt(T) C s` without the unit-norm check.
pub fn spread(symbol: &CVector, code: &StabilizerCode) -> Result<CVector> {
    let c = code.code_matrix();
    if symbol.len() != c.ncols() {
        return Err(Error::mismatch(c.ncols(), symbol.len()));
    }
    let scale = (code.config().coherence_time() as f64).sqrt();
    Ok(c * symbol * Complex64::new(scale, 0.0))
}

pub fn encode(symbol: &CVector, code: &StabilizerCode) -> Result<EncodedFrame> {
    let norm = symbol.norm();
    if (norm - 1.0).abs() > SYMBOL_TOL {
        return Err(Error::NonUnitSymbol { norm });
    }
    Ok(EncodedFrame {
        symbol: symbol.clone(),
        signal: spread(symbol, code)?,
    })
}

/// Split `y` (length `NT`) into `N / M` streams of length `MT`. Stream `l`
/// holds receive antennas `lM .. (l+1)M` of every time slot.
pub fn deinterleave_blocks(y: &CVector, config: &CodeConfig) -> Result<Vec<CVector>> {
    if y.len() != config.received_len() {
        return Err(Error::mismatch(config.received_len(), y.len()));
    }
    let (m, n, t) = (
        config.tx_antennas(),
        config.rx_antennas(),
        config.coherence_time(),
    );
    Ok((0..config.receive_blocks())
        .map(|l| CVector::from_fn(m * t, |k, _| y[(k / m) * n + l * m + k % m]))
        .collect())
}

/// Inverse of [`deinterleave_blocks`].
pub fn interleave_blocks(streams: &[CVector], config: &CodeConfig) -> Result<CVector> {
    if streams.len() != config.receive_blocks() {
        return Err(Error::mismatch(config.receive_blocks(), streams.len()));
    }
    let (m, n) = (config.tx_antennas(), config.rx_antennas());
    let mut y = CVector::zeros(config.received_len());
    for (l, s) in streams.iter().enumerate() {
        if s.len() != config.signal_len() {
            return Err(Error::mismatch(config.signal_len(), s.len()));
        }
        for (k, v) in s.iter().enumerate() {
            y[(k / m) * n + l * m + k % m] = *v;
        }
    }
    Ok(y)
}

/// `C* R_z y_l` for every syndrome of one `MT`-length block stream.
fn recover_block(stream: &CVector, code: &StabilizerCode) -> Vec<CVector> {
    let c_adj = code.code_matrix().adjoint();
    code.branches()
        .iter()
        .map(|b| &c_adj * (&b.recovery * stream))
        .collect()
}

/// The `N^2` collapsed branches of a square configuration, in canonical
/// `(a, b)` order.
pub fn recover_branches_square(y: &CVector, code: &StabilizerCode) -> Result<Vec<CVector>> {
    let config = code.config();
    if !config.is_square() {
        return Err(Error::mismatch("a square configuration", config));
    }
    if y.len() != config.received_len() {
        return Err(Error::mismatch(config.received_len(), y.len()));
    }
    Ok(recover_block(y, code))
}

/// The `MN` collapsed branches: each receive block is decoded with the
/// `M x M` code. Ordered block-major, then `(a, b)`.
pub fn recover_branches_nonsquare(y: &CVector, code: &StabilizerCode) -> Result<Vec<CVector>> {
    Ok(deinterleave_blocks(y, code.config())?
        .iter()
        .flat_map(|s| recover_block(s, code))
        .collect())
}

pub fn recover_branches(y: &CVector, code: &StabilizerCode) -> Result<Vec<CVector>> {
    if code.config().is_square() {
        recover_branches_square(y, code)
    } else {
        recover_branches_nonsquare(y, code)
    }
}

/// Scale branches by `1 / sqrt(d)`. Afterwards `p = c s + n` with
/// `c ~ CN(0, 1)` and `n ~ CN(0, sigma^2 / d I_d)` under unit-variance
/// Rayleigh fading. Decisions do not change.
pub fn normalize_branches(branches: &mut [CVector], code: &StabilizerCode) {
    let scale = Complex64::new(1.0 / (code.config().dim() as f64).sqrt(), 0.0);
    for p in branches {
        *p *= scale;
    }
}

/// `G = sum_n p_n p_n*`.
pub fn branch_gram(branches: &[CVector]) -> Result<CMatrix> {
    let first = branches
        .first()
        .ok_or_else(|| Error::InsufficientData("no branches to decode".into()))?;
    let d = first.len();
    let mut g = CMatrix::zeros(d, d);
    for p in branches {
        if p.len() != d {
            return Err(Error::mismatch(d, p.len()));
        }
        g += p * p.adjoint();
    }
    Ok(g)
}

/// `s* G s`.
pub fn quadratic_form(g: &CMatrix, s: &CVector) -> f64 {
    s.dotc(&(g * s)).re
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub index: usize,
    pub label: u32,
}

/// `argmax_k s_k* G s_k` over the codebook; lowest index wins ties.
pub fn ml_decode(branches: &[CVector], codebook: &Codebook) -> Result<Decision> {
    let g = branch_gram(branches)?;
    if g.nrows() != codebook.dim() {
        return Err(Error::mismatch(codebook.dim(), g.nrows()));
    }
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (k, s) in codebook.vectors().iter().enumerate() {
        let score = quadratic_form(&g, s);
        if score > best_score {
            best = k;
            best_score = score;
        }
    }
    Ok(Decision {
        index: best,
        label: codebook.label(best),
    })
}

/// Encode codeword `index`, pass it through `H` with noise `sigma2`, and
/// decode with the reference (dense) recovery path.
pub fn end_to_end<R: Rng + ?Sized>(
    index: usize,
    code: &StabilizerCode,
    codebook: &Codebook,
    h: &CMatrix,
    sigma2: f64,
    rng: &mut R,
) -> Result<Decision> {
    check_pairing(code, codebook)?;
    let config = code.config();
    if h.shape() != (config.rx_antennas(), config.tx_antennas()) {
        return Err(Error::mismatch(
            format!("{}x{}", config.rx_antennas(), config.tx_antennas()),
            format!("{}x{}", h.nrows(), h.ncols()),
        ));
    }
    if index >= codebook.len() {
        return Err(Error::mismatch(
            format!("index < {}", codebook.len()),
            index,
        ));
    }
    let frame = encode(codebook.vector(index), code)?;
    let y = channel::transmit(&frame.signal, h, sigma2, rng)?;
    ml_decode(&recover_branches(&y, code)?, codebook)
}

fn check_pairing(code: &StabilizerCode, codebook: &Codebook) -> Result<()> {
    if code.config().dim() != codebook.dim() {
        return Err(Error::mismatch(
            format!("codebook dimension {}", code.config().dim()),
            codebook.dim(),
        ));
    }
    Ok(())
}

/// Per-worker scratch for [`BranchDecoder`].
#[derive(Debug, Clone)]
pub struct DecodeWorkspace {
    /// `MN` branch vectors of length `d`, concatenated.
    pub branches: Vec<Complex64>,
    /// Upper triangle of `G` (row-major, full `d x d` storage).
    pub gram: Vec<Complex64>,
    /// Received vector, length `NT`.
    pub received: Vec<Complex64>,
}

/// Precomposed decoder for one `(code, codebook)` pair.
#[derive(Debug, Clone)]
pub struct BranchDecoder {
    config: CodeConfig,
    /// CSR rows of the `MN * d` branch outputs; columns index directly into `y`.
    row_start: Vec<usize>,
    cols: Vec<usize>,
    coeffs: Vec<Complex64>,
    symbols: Vec<Vec<Complex64>>,
    codewords: Vec<Vec<Complex64>>,
    labels: Vec<u32>,
}

impl BranchDecoder {
    pub fn new(code: &StabilizerCode, codebook: &Codebook) -> Result<Self> {
        check_pairing(code, codebook)?;
        let config = *code.config();
        let (m, n, d) = (config.tx_antennas(), config.rx_antennas(), config.dim());
        let c = code.code_matrix();

        let mut row_start = vec![0];
        let mut cols = Vec::new();
        let mut coeffs = Vec::new();
        for l in 0..config.receive_blocks() {
            for b in code.branches() {
                // C* R_z = C* E_z* P_z = (P_z E_z C)* = (E_z C)*
                let op = (&b.error * c).adjoint();
                for r in 0..d {
                    for k in 0..op.ncols() {
                        let v = op[(r, k)];
                        if v != ZERO {
                            cols.push((k / m) * n + l * m + k % m);
                            coeffs.push(v);
                        }
                    }
                    row_start.push(cols.len());
                }
            }
        }

        let mut codewords = Vec::with_capacity(codebook.len());
        for s in codebook.vectors() {
            codewords.push(encode(s, code)?.signal.iter().copied().collect());
        }
        Ok(BranchDecoder {
            config,
            row_start,
            cols,
            coeffs,
            symbols: codebook
                .vectors()
                .iter()
                .map(|s| s.iter().copied().collect())
                .collect(),
            codewords,
            labels: codebook.labels().to_vec(),
        })
    }

    pub fn config(&self) -> &CodeConfig {
        &self.config
    }

    pub fn branch_count(&self) -> usize {
        self.config.diversity_order()
    }

    pub fn codebook_len(&self) -> usize {
        self.symbols.len()
    }

    pub fn label(&self, index: usize) -> u32 {
        self.labels[index]
    }

    /// `sqrt(T) C s_k`.
    pub fn codeword(&self, index: usize) -> &[Complex64] {
        &self.codewords[index]
    }

    pub fn workspace(&self) -> DecodeWorkspace {
        let d = self.config.dim();
        DecodeWorkspace {
            branches: vec![ZERO; self.branch_count() * d],
            gram: vec![ZERO; d * d],
            received: vec![ZERO; self.config.received_len()],
        }
    }

    /// Fill `ws.branches` from `y`.
    pub fn branches_into(&self, y: &[Complex64], ws: &mut DecodeWorkspace) {
        debug_assert_eq!(y.len(), self.config.received_len());
        for (row, out) in ws.branches.iter_mut().enumerate() {
            let mut acc = ZERO;
            for idx in self.row_start[row]..self.row_start[row + 1] {
                acc += self.coeffs[idx] * y[self.cols[idx]];
            }
            *out = acc;
        }
    }

    /// Branches as vectors, for comparison with the reference path.
    pub fn branches(&self, y: &CVector) -> Result<Vec<CVector>> {
        if y.len() != self.config.received_len() {
            return Err(Error::mismatch(self.config.received_len(), y.len()));
        }
        let mut ws = self.workspace();
        self.branches_into(y.as_slice(), &mut ws);
        let d = self.config.dim();
        Ok(ws
            .branches
            .chunks(d)
            .map(CVector::from_column_slice)
            .collect())
    }

    /// ML decision on `ws.branches`; returns the codebook index.
    pub fn decide(&self, ws: &mut DecodeWorkspace) -> usize {
        let d = self.config.dim();
        ws.gram.iter_mut().for_each(|g| *g = ZERO);
        for p in ws.branches.chunks_exact(d) {
            for (i, &pi) in p.iter().enumerate() {
                for (j, pj) in p.iter().enumerate().skip(i) {
                    ws.gram[i * d + j] += pi * pj.conj();
                }
            }
        }
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (k, s) in self.symbols.iter().enumerate() {
            // s* G s = sum_i G_ii |s_i|^2 + 2 Re sum_{i<j} conj(s_i) G_ij s_j
            let mut score = 0.0;
            for i in 0..d {
                score += ws.gram[i * d + i].re * s[i].norm_sqr();
                for j in i + 1..d {
                    score += 2.0 * (s[i].conj() * ws.gram[i * d + j] * s[j]).re;
                }
            }
            if score > best_score {
                best = k;
                best_score = score;
            }
        }
        best
    }

    pub fn decode(&self, y: &[Complex64], ws: &mut DecodeWorkspace) -> usize {
        self.branches_into(y, ws);
        self.decide(ws)
    }

    /// Decode whatever is in `ws.received`.
    pub fn decode_received(&self, ws: &mut DecodeWorkspace) -> usize {
        let received = std::mem::take(&mut ws.received);
        let k = self.decode(&received, ws);
        ws.received = received;
        k
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channel, sample_noise};
    use crate::codebook::generate_packing;
    use crate::gpauli::basis_for;
    use crate::linalg::{identity, ONE};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn code(m: usize, n: usize, t: usize, d: usize) -> StabilizerCode {
        StabilizerCode::new(CodeConfig::new(m, n, t, d).unwrap()).unwrap()
    }

    fn unit(v: Vec<Complex64>) -> CVector {
        let v = CVector::from_vec(v);
        let n = v.norm();
        v / Complex64::new(n, 0.0)
    }

    fn random_unit(d: usize, rng: &mut ChaCha8Rng) -> CVector {
        let v = sample_noise(d, 1.0, rng);
        let n = v.norm();
        v / Complex64::new(n, 0.0)
    }

    fn sqrt_t(code: &StabilizerCode) -> Complex64 {
        Complex64::new((code.config().coherence_time() as f64).sqrt(), 0.0)
    }

    #[test]
    fn encode_basics() {
        let code = code(3, 3, 9, 3);
        let e0 = unit(vec![ONE, ZERO, ZERO]);
        let frame = encode(&e0, &code).unwrap();
        let want = code.code_matrix().column(0) * sqrt_t(&code);
        assert!((frame.signal - want).camax() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let s = random_unit(3, &mut rng);
            let x = encode(&s, &code).unwrap().signal;
            assert!((x.norm_squared() - 9.0).abs() < 1e-9);
        }
        assert!(matches!(
            encode(&CVector::from_element(3, ONE), &code),
            Err(Error::NonUnitSymbol { .. })
        ));
    }

    #[test]
    fn spreading_is_linear() {
        let code = code(2, 2, 4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (s1, s2) = (random_unit(2, &mut rng), random_unit(2, &mut rng));
        let (a, b) = (Complex64::new(0.3, -1.2), Complex64::new(-0.7, 0.4));
        let lhs = spread(&(&s1 * a + &s2 * b), &code).unwrap();
        let rhs = spread(&s1, &code).unwrap() * a + spread(&s2, &code).unwrap() * b;
        assert!((lhs - rhs).camax() < 1e-14);
    }

    #[test]
    fn single_basis_channel_lights_one_branch() {
        let code = code(3, 3, 9, 3);
        let basis = basis_for(3, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_unit(3, &mut rng);
        let x = encode(&s, &code).unwrap().signal;
        for (k, elem) in basis.elements().iter().enumerate() {
            let y = channel::apply_channel(&elem.matrix, &x).unwrap();
            let branches = recover_branches_square(&y, &code).unwrap();
            // the branch ordering matches the basis ordering
            for (j, p) in branches.iter().enumerate() {
                if j == k {
                    assert!((p - &s * sqrt_t(&code)).camax() < 1e-10);
                } else {
                    assert!(p.camax() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn identity_channel_uses_identity_branch() {
        let code = code(2, 2, 4, 2);
        let s = unit(vec![ONE, Complex64::new(0.0, 1.0)]);
        let x = encode(&s, &code).unwrap().signal;
        let y = channel::apply_channel(&identity(2), &x).unwrap();
        let branches = recover_branches_square(&y, &code).unwrap();
        assert!((&branches[0] - &s * sqrt_t(&code)).camax() < 1e-12);
        assert!(branches[1..].iter().all(|p| p.camax() < 1e-12));
    }

    #[test]
    fn branch_gains_are_expansion_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (m, n, t, d) in [(3, 3, 9, 3), (2, 4, 4, 2), (3, 6, 9, 3)] {
            let code = code(m, n, t, d);
            let basis = basis_for(m, n).unwrap();
            let s = random_unit(d, &mut rng);
            let x = encode(&s, &code).unwrap().signal;
            let h = sample_channel(m, n, &mut rng).h;
            let y = channel::apply_channel(&h, &x).unwrap();
            let branches = recover_branches(&y, &code).unwrap();
            let coeffs = basis.expand(&h).unwrap();
            assert_eq!(branches.len(), m * n);
            // p_z = sqrt(T) c_z s with c_z re-indexed by syndrome (here identical order)
            for (p, c) in branches.iter().zip(&coeffs) {
                assert!((p - &s * (sqrt_t(&code) * c)).camax() < 1e-10);
            }
            let mut got: Vec<f64> = branches
                .iter()
                .map(|p| p.norm() / sqrt_t(&code).re)
                .collect();
            let mut want: Vec<f64> = coeffs.iter().map(|c| c.norm()).collect();
            got.sort_by(f64::total_cmp);
            want.sort_by(f64::total_cmp);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn single_block_nonsquare_equals_square() {
        let code = code(3, 3, 9, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y = sample_noise(27, 1.0, &mut rng);
        let a = recover_branches_square(&y, &code).unwrap();
        let b = recover_branches_nonsquare(&y, &code).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_block_row_gives_zero_branches() {
        let code = code(2, 4, 4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut h = sample_channel(2, 4, &mut rng).h;
        h.rows_mut(2, 2).fill(ZERO);
        let x = encode(&random_unit(2, &mut rng), &code).unwrap().signal;
        let y = channel::apply_channel(&h, &x).unwrap();
        let branches = recover_branches_nonsquare(&y, &code).unwrap();
        assert_eq!(branches.len(), 8);
        assert!(branches[4..].iter().all(|p| p.camax() == 0.0));
        assert!(branches[..4].iter().any(|p| p.camax() > 1e-3));
    }

    #[test]
    fn deinterleave_round_trip() {
        let code = code(3, 6, 9, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = sample_channel(3, 6, &mut rng).h;
        let x = encode(&random_unit(3, &mut rng), &code).unwrap().signal;
        let y = channel::apply_channel(&h, &x).unwrap();
        let streams = deinterleave_blocks(&y, code.config()).unwrap();
        assert_eq!(streams.len(), 2);
        // each stream is what the matching 3x3 sub-channel produces
        for (l, s) in streams.iter().enumerate() {
            let sub = h.rows(3 * l, 3).into_owned();
            assert!((channel::apply_channel(&sub, &x).unwrap() - s).camax() < 1e-13);
        }
        assert_eq!(interleave_blocks(&streams, code.config()).unwrap(), y);
        assert_eq!(recover_branches_nonsquare(&y, &code).unwrap().len(), 18);
    }

    #[test]
    fn recovery_rejects_mismatched_inputs() {
        let sq = code(2, 2, 4, 2);
        let rect = code(2, 4, 4, 2);
        assert!(recover_branches_square(&CVector::zeros(16), &rect).is_err());
        assert!(recover_branches_square(&CVector::zeros(7), &sq).is_err());
        assert!(recover_branches_nonsquare(&CVector::zeros(8), &rect).is_err());
    }

    #[test]
    fn ml_decode_edge_cases() {
        let cb = generate_packing(2, 4, 1, 300).unwrap().codebook;
        for k in 0..4 {
            let mut branches = vec![CVector::zeros(2); 4];
            branches[2] = cb.vector(k).clone();
            assert_eq!(ml_decode(&branches, &cb).unwrap().index, k);
        }
        let zero = vec![CVector::zeros(2); 4];
        assert_eq!(
            ml_decode(&zero, &cb).unwrap(),
            Decision { index: 0, label: 0 }
        );
        assert!(ml_decode(&[], &cb).is_err());
        assert!(ml_decode(&[CVector::zeros(3)], &cb).is_err());
    }

    #[test]
    fn noiseless_decoding_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (m, n, t, d) in [(2, 2, 4, 2), (3, 6, 9, 3)] {
            let code = code(m, n, t, d);
            let cb = generate_packing(d, 4, 3, 500).unwrap().codebook;
            for _ in 0..50 {
                let h = sample_channel(m, n, &mut rng).h;
                for k in 0..cb.len() {
                    assert_eq!(
                        end_to_end(k, &code, &cb, &h, 0.0, &mut rng).unwrap().index,
                        k
                    );
                }
            }
        }
    }

    #[test]
    fn zero_channel_decodes_to_first_codeword() {
        let code = code(2, 2, 4, 2);
        let cb = generate_packing(2, 4, 3, 300).unwrap().codebook;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for k in 0..4 {
            let d = end_to_end(k, &code, &cb, &CMatrix::zeros(2, 2), 0.0, &mut rng).unwrap();
            assert_eq!(d.index, 0);
        }
    }

    #[test]
    fn end_to_end_is_reproducible() {
        let code = code(3, 3, 9, 3);
        let cb = generate_packing(3, 4, 3, 300).unwrap().codebook;
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..200)
                .map(|i| {
                    let h = sample_channel(3, 3, &mut rng).h;
                    end_to_end(i % 4, &code, &cb, &h, 0.5, &mut rng)
                        .unwrap()
                        .index
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(11), run(11));
        assert!(end_to_end(
            4,
            &code,
            &cb,
            &identity(3),
            0.5,
            &mut ChaCha8Rng::seed_from_u64(0)
        )
        .is_err());
    }

    #[test]
    fn fast_path_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for (m, n, t, d) in [
            (2, 2, 4, 2),
            (3, 3, 9, 3),
            (4, 4, 8, 2),
            (2, 4, 4, 2),
            (3, 6, 9, 3),
        ] {
            let code = code(m, n, t, d);
            let cb = generate_packing(d, 4, 1, 300).unwrap().codebook;
            let fast = BranchDecoder::new(&code, &cb).unwrap();
            let mut ws = fast.workspace();
            for trial in 0..50 {
                let h = sample_channel(m, n, &mut rng).h;
                let k = trial % 4;
                let x = encode(cb.vector(k), &code).unwrap().signal;
                assert_eq!(fast.codeword(k), x.as_slice());
                let y = channel::transmit(&x, &h, 0.3, &mut rng).unwrap();
                let slow = recover_branches(&y, &code).unwrap();
                let quick = fast.branches(&y).unwrap();
                for (a, b) in slow.iter().zip(&quick) {
                    assert!((a - b).camax() < 1e-12);
                }
                let want = ml_decode(&slow, &cb).unwrap().index;
                assert_eq!(fast.decode(y.as_slice(), &mut ws), want);
            }
        }
    }

    #[test]
    fn projected_components_rebuild_the_received_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let code = code(3, 6, 9, 3);
        let h = sample_channel(3, 6, &mut rng).h;
        let x = encode(&random_unit(3, &mut rng), &code).unwrap().signal;
        let y = channel::transmit(&x, &h, 0.2, &mut rng).unwrap();
        let streams = deinterleave_blocks(&y, code.config()).unwrap();
        let rebuilt: Vec<CVector> = streams
            .iter()
            .map(|s| {
                code.branches()
                    .iter()
                    .map(|b| &b.projector * s)
                    .fold(CVector::zeros(s.len()), |a, v| a + v)
            })
            .collect();
        let back = interleave_blocks(&rebuilt, code.config()).unwrap();
        assert!((back - y).camax() < 1e-10);
    }

    #[test]
    fn collapsed_noise_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (code, sigma2, trials) = (code(2, 4, 4, 2), 0.4, 10_000);
        let d = code.config().dim();
        let nb = code.config().diversity_order();
        let mut noise_power = vec![0.0; nb * d];
        let mut gain_power = vec![0.0; nb];
        let s = unit(vec![ONE, ZERO]);
        let x = encode(&s, &code).unwrap().signal;
        for _ in 0..trials {
            let n = sample_noise(code.config().received_len(), sigma2, &mut rng);
            let mut branches = recover_branches(&n, &code).unwrap();
            normalize_branches(&mut branches, &code);
            for (i, p) in branches.iter().enumerate() {
                for (j, v) in p.iter().enumerate() {
                    noise_power[i * d + j] += v.norm_sqr();
                }
            }
            let h = sample_channel(2, 4, &mut rng).h;
            let mut gains =
                recover_branches(&channel::apply_channel(&h, &x).unwrap(), &code).unwrap();
            normalize_branches(&mut gains, &code);
            for (i, p) in gains.iter().enumerate() {
                gain_power[i] += p[0].norm_sqr();
            }
        }
        for v in noise_power {
            let var = v / trials as f64;
            assert!((var / (sigma2 / d as f64) - 1.0).abs() < 0.05, "{var}");
        }
        for g in gain_power {
            let var = g / trials as f64;
            assert!((var - 1.0).abs() < 0.05, "{var}");
        }
    }

    proptest! {
        #[test]
        fn decisions_ignore_global_phase_and_scale(seed in any::<u64>(), theta in 0.0f64..6.3, scale in 1e-3f64..1e3) {
            let code = code(2, 2, 4, 2);
            let cb = generate_packing(2, 4, 5, 200).unwrap().codebook;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = sample_channel(2, 2, &mut rng).h;
            let x = encode(cb.vector(1), &code).unwrap().signal;
            let y = channel::transmit(&x, &h, 0.5, &mut rng).unwrap();
            let branches = recover_branches(&y, &code).unwrap();
            let g = branch_gram(&branches).unwrap();
            let phase = Complex64::from_polar(1.0, theta);
            for s in cb.vectors() {
                let a = quadratic_form(&g, s);
                let b = quadratic_form(&g, &(s * phase));
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
            let base = ml_decode(&branches, &cb).unwrap();
            let scaled: Vec<CVector> = branches.iter().map(|p| p * Complex64::new(scale, 0.0)).collect();
            prop_assert_eq!(ml_decode(&scaled, &cb).unwrap(), base);
        }
    }
}
