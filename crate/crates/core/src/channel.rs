//! Block-fading Rayleigh channel with additive white Gaussian noise.
//!
//! Over one coherence interval `Y = H X + N`. Vectorizing by stacking columns
//! gives `y = (I_T (x) H) x + n`. `H` has i.i.d. `CN(0, 1)` entries and `n`
//! has i.i.d. `CN(0, sigma^2)` entries. With unit transmit power per slot,
//! `SNR = 1 / sigma^2`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{identity, CMatrix, CVector};

/// Tolerance on `x* x = T`.
pub const POWER_TOL: f64 = 1e-9;

/// One draw of a `CN(0, variance)` scalar.
#[inline]
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (0.5 * variance).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * scale, im * scale)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: CMatrix,
}

impl ChannelRealization {
    pub fn rx_antennas(&self) -> usize {
        self.h.nrows()
    }

    pub fn tx_antennas(&self) -> usize {
        self.h.ncols()
    }

    /// `I_T (x) H` as a dense matrix.
    pub fn lifted(&self, coherence_time: usize) -> CMatrix {
        identity(coherence_time).kronecker(&self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    sigma2: f64,
}

impl NoiseModel {
    pub fn new(sigma2: f64) -> Result<Self> {
        if sigma2.is_finite() && sigma2 > 0.0 {
            Ok(NoiseModel { sigma2 })
        } else {
            Err(Error::Experiment(format!(
                "noise variance {sigma2} must be positive"
            )))
        }
    }

    pub fn from_snr_db(snr_db: f64) -> Result<Self> {
        NoiseModel::new(10f64.powf(-snr_db / 10.0))
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * (1.0 / self.sigma2).log10()
    }
}

/// `N x M` matrix of i.i.d. `CN(0, 1)` entries, drawn in column-major order.
pub fn sample_channel<R: Rng + ?Sized>(tx: usize, rx: usize, rng: &mut R) -> ChannelRealization {
    let mut h = CMatrix::zeros(rx, tx);
    for entry in h.iter_mut() {
        *entry = complex_gaussian(rng, 1.0);
    }
    ChannelRealization { h }
}

pub fn sample_noise<R: Rng + ?Sized>(len: usize, sigma2: f64, rng: &mut R) -> CVector {
    CVector::from_fn(len, |_, _| complex_gaussian(rng, sigma2))
}

/// `(I_T (x) H) x`, one time slot at a time.
pub fn apply_channel(h: &CMatrix, x: &CVector) -> Result<CVector> {
    let (rx, tx) = h.shape();
    if !x.len().is_multiple_of(tx) {
        return Err(Error::mismatch(format!("a multiple of {tx}"), x.len()));
    }
    let slots = x.len() / tx;
    let mut y = CVector::zeros(rx * slots);
    for t in 0..slots {
        let xt = x.rows(t * tx, tx);
        y.rows_mut(t * rx, rx).copy_from(&(h * xt));
    }
    Ok(y)
}

/// `y = (I_T (x) H) x + n`. Requires `x* x = T` where `T = len(x) / M`;
/// `sigma2 = 0` gives the noiseless output.
pub fn transmit<R: Rng + ?Sized>(
    x: &CVector,
    h: &CMatrix,
    sigma2: f64,
    rng: &mut R,
) -> Result<CVector> {
    let tx = h.ncols();
    let expected = x.len() as f64 / tx as f64;
    let energy = x.norm_squared();
    if (energy - expected).abs() > POWER_TOL * expected.max(1.0) {
        return Err(Error::PowerConstraint { energy, expected });
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::Experiment(format!(
            "noise variance {sigma2} is invalid"
        )));
    }
    let mut y = apply_channel(h, x)?;
    if sigma2 > 0.0 {
        for v in y.iter_mut() {
            *v += complex_gaussian(rng, sigma2);
        }
    }
    Ok(y)
}
