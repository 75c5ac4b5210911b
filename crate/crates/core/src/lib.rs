// SPDX-License-Identifier: Apache-2.0

pub mod closure;
pub mod dicke;
pub mod error;
pub mod ode;
pub mod polariton;
pub mod ramsey;
pub mod twist;
pub mod wigner;

pub use dicke::{Axis, DickeState, MomentSummary, SpinOperators};
pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
