//! Hard instances for proximal first-order methods on affinely constrained
//! composite problems, with metered oracles, span-verified reference drivers,
//! and computable stationarity certificates.
//!
//! The problem family chains `m = 3*m1*m2` coordinate blocks through a
//! difference operator split into two row groups. Information propagates
//! along the chain one separator at a time, which caps how fast any method
//! built from the published oracle outputs can activate new coordinates.
//! Everything needed to observe that behaviour numerically lives here:
//!
//! - [`instance`]: problem data, smooth/nonsmooth values and gradients
//! - [`linops`]: matrix-free operators, norms, spectra, condition numbers
//! - [`prox`]: closed-form proximal maps and their optimality residuals
//! - [`oracle`]: the two metered oracle bundles plus call transcripts
//! - [`stationarity`]: residual and certificate computations
//! - [`algorithms`]: reference drivers and span-compliance verification
//! - [`bruteforce`]: slow independent re-computations used as test oracles
//! - [`harness`]: acceptance checks, run orchestration, file outputs

pub mod algorithms;
pub mod bruteforce;
pub mod error;
pub mod harness;
pub mod instance;
pub mod linops;
pub mod oracle;
pub mod prox;
pub mod stationarity;

pub use error::{Error, Result};
pub use instance::{BlockVector, InstanceConfig, InstanceParams, YVector};
