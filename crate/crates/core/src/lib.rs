//! Covariant quantum measurements for finite symmetry groups.
//!
//! The crate builds positive operator valued measures, instruments and
//! channels that are equivariant under a finite group acting on an outcome
//! set, normalizes and dilates them, and decides extremality.

pub mod covinstr;
pub mod covobs;
pub mod error;
pub mod groups;
pub mod linalg;
pub mod linrep;
pub mod naimark;
pub mod symfam;
pub mod tol;

pub use error::{CovError, Result};
pub use tol::{Tolerances, DEFAULT_SEED};
