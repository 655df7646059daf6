//! Anthropomorphic model observer for 3D image stacks viewed in stack-browsing
//! mode.
//!
//! A stack is rendered on a display (`stackgen`), filtered through a
//! spatiotemporal contrast sensitivity function of the human visual system
//! (`csf`, `percept`), read by a multi-slice channelized Hotelling observer
//! (`observer`), and summarised as an AUC with a multi-reader multi-case
//! variance and a detectability index (`stats`). `sweep` ties these together
//! into parameter sweeps over viewing conditions.

pub mod csf;
pub mod fft;
pub mod observer;
pub mod percept;
pub mod seed;
pub mod stackgen;
pub mod stats;
pub mod sweep;

use thiserror::Error;

/// Lesion peak amplitude, in units of the unnormalized background range,
/// used by default corpora. Chosen so the PM observer at the default viewing
/// conditions lands at a detectability of roughly 1.5.
pub const CALIBRATED_LESION_AMPLITUDE: f64 = 0.14;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Csf(#[from] csf::CsfError),
    #[error(transparent)]
    Stack(#[from] stackgen::StackError),
    #[error(transparent)]
    Percept(#[from] percept::PerceptError),
    #[error(transparent)]
    Observer(#[from] observer::ObserverError),
    #[error(transparent)]
    Stats(#[from] stats::StatsError),
    #[error(transparent)]
    Config(#[from] sweep::ConfigError),
}

impl Error {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Csf(_) => "csf",
            Error::Stack(_) => "stack",
            Error::Percept(_) => "percept",
            Error::Observer(_) => "observer",
            Error::Stats(_) => "stats",
            Error::Config(_) => "config",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
