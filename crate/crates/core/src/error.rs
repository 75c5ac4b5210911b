// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised by the numerical kernels.
///
/// Variants split into two families: parameter problems the caller can fix
/// (`InvalidParameter`, `Unsupported`, `ResourceLimit`, `EmptyGrid`) and
/// numerical failures detected while running (`Integrator`, `Physicality`,
/// `ZeroSensitivity`, `NoInteriorMinimum`, `LinearizationBreakdown`).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unsupported parameter `{name}`: {reason}")]
    Unsupported { name: &'static str, reason: String },

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("grid `{0}` is empty")]
    EmptyGrid(&'static str),

    #[error("integrator failure at t = {t:e} (step {steps}, h = {h:e}): {reason}")]
    Integrator {
        t: f64,
        h: f64,
        steps: usize,
        reason: String,
    },

    #[error("physicality violated at t = {t:e}: {reason}")]
    Physicality { t: f64, reason: String },

    #[error("zero phase sensitivity at phi = {phi} (|d<Jz>/dphi| = {slope:e})")]
    ZeroSensitivity { phi: f64, slope: f64 },

    #[error("trajectory has no interior minimum of the tracked variance")]
    NoInteriorMinimum,

    #[error("linearization breakdown at t = {t:e}: {excitations:.3} excitations exceed limit {limit:.3}")]
    LinearizationBreakdown {
        t: f64,
        excitations: f64,
        limit: f64,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures that arise during a computation rather than from
    /// bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Integrator { .. }
                | Error::Physicality { .. }
                | Error::ZeroSensitivity { .. }
                | Error::NoInteriorMinimum
                | Error::LinearizationBreakdown { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
