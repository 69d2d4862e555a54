//! Code configurations `(M, N, T, d)`.
//!
//! A configuration names the transmit antenna count `M`, the receive antenna
//! count `N`, the coherence time `T` (channel uses per fading block) and the
//! encoded dimension `d`. The stabilizer machinery works on an `M x M` core,
//! so the validity rules are:
//!
//! * `M >= 2`, `N >= M`, `M | N`
//! * `M | T` and `d = T / M >= 2`
//!
//! These cover both the square family (`M = N`) and the rectangular family
//! with more receive than transmit antennas.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest antenna count accepted. Matrices are dense, so this keeps the
/// `MT x MT` operators small.
pub const MAX_ANTENNAS: usize = 16;

/// The rule a rejected configuration broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigRule {
    TooFewTransmitAntennas,
    FewerReceiveThanTransmit,
    TransmitDoesNotDivideReceive,
    TransmitDoesNotDivideCoherence,
    DimensionNotCoherenceOverTransmit { expected: usize },
    DimensionTooSmall,
    TooManyAntennas,
}

impl fmt::Display for ConfigRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigRule::TooFewTransmitAntennas => write!(f, "need at least 2 transmit antennas"),
            ConfigRule::FewerReceiveThanTransmit => write!(
                f,
                "N < M is unsupported: every error operator I_T (x) E has rank at most NT, \
                 so no recovery operator can restore the MT-dimensional transmit space"
            ),
            ConfigRule::TransmitDoesNotDivideReceive => {
                write!(
                    f,
                    "M must divide N so the receive antennas split into M-sized blocks"
                )
            }
            ConfigRule::TransmitDoesNotDivideCoherence => write!(f, "M must divide T"),
            ConfigRule::DimensionNotCoherenceOverTransmit { expected } => {
                write!(f, "d must equal T / M = {expected}")
            }
            ConfigRule::DimensionTooSmall => {
                write!(
                    f,
                    "d must be at least 2 (unit-power scalars carry no phase-free information)"
                )
            }
            ConfigRule::TooManyAntennas => {
                write!(f, "antenna counts above {MAX_ANTENNAS} are not supported")
            }
        }
    }
}

/// A validated `(M, N, T, d)` tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawConfig", into = "RawConfig")]
pub struct CodeConfig {
    tx: usize,
    rx: usize,
    coherence: usize,
    dim: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    tx_antennas: usize,
    rx_antennas: usize,
    coherence_time: usize,
    dim: usize,
}

impl TryFrom<RawConfig> for CodeConfig {
    type Error = Error;

    fn try_from(raw: RawConfig) -> Result<Self> {
        CodeConfig::new(
            raw.tx_antennas,
            raw.rx_antennas,
            raw.coherence_time,
            raw.dim,
        )
    }
}

impl From<CodeConfig> for RawConfig {
    fn from(c: CodeConfig) -> Self {
        RawConfig {
            tx_antennas: c.tx,
            rx_antennas: c.rx,
            coherence_time: c.coherence,
            dim: c.dim,
        }
    }
}

impl CodeConfig {
    pub fn new(tx: usize, rx: usize, coherence: usize, dim: usize) -> Result<Self> {
        let reject = |rule| Error::InvalidConfig {
            tx,
            rx,
            coherence,
            dim,
            rule,
        };
        if tx < 2 {
            return Err(reject(ConfigRule::TooFewTransmitAntennas));
        }
        if tx > MAX_ANTENNAS || rx > MAX_ANTENNAS {
            return Err(reject(ConfigRule::TooManyAntennas));
        }
        if rx < tx {
            return Err(reject(ConfigRule::FewerReceiveThanTransmit));
        }
        if !rx.is_multiple_of(tx) {
            return Err(reject(ConfigRule::TransmitDoesNotDivideReceive));
        }
        if !coherence.is_multiple_of(tx) || coherence == 0 {
            return Err(reject(ConfigRule::TransmitDoesNotDivideCoherence));
        }
        if dim < 2 {
            return Err(reject(ConfigRule::DimensionTooSmall));
        }
        if dim != coherence / tx {
            return Err(reject(ConfigRule::DimensionNotCoherenceOverTransmit {
                expected: coherence / tx,
            }));
        }
        Ok(CodeConfig {
            tx,
            rx,
            coherence,
            dim,
        })
    }

    /// Transmit antennas `M`.
    pub fn tx_antennas(&self) -> usize {
        self.tx
    }

    /// Receive antennas `N`.
    pub fn rx_antennas(&self) -> usize {
        self.rx
    }

    /// Coherence time `T`.
    pub fn coherence_time(&self) -> usize {
        self.coherence
    }

    /// Encoded dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_square(&self) -> bool {
        self.tx == self.rx
    }

    /// Number of `M`-antenna receive blocks, `N / M`.
    pub fn receive_blocks(&self) -> usize {
        self.rx / self.tx
    }

    pub fn diversity_order(&self) -> usize {
        self.tx * self.rx
    }

    /// Length of the vectorized transmit signal, `MT`.
    pub fn signal_len(&self) -> usize {
        self.tx * self.coherence
    }

    /// Length of the vectorized received signal, `NT`.
    pub fn received_len(&self) -> usize {
        self.rx * self.coherence
    }

    /// Syndromes per receive block, `M^2`.
    pub fn syndrome_count(&self) -> usize {
        self.tx * self.tx
    }
}

impl fmt::Display for CodeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(M={}, N={}, T={}, d={})",
            self.tx, self.rx, self.coherence, self.dim
        )
    }
}
