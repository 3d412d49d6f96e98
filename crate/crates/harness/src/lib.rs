//! Randomized verification of the relspec-core bounds: seeded instance
//! ensembles, per-suite checks against the eigensolver, and reports.

pub mod ensemble;
pub mod error;
pub mod report;
pub mod suites;
pub mod verify;

pub use ensemble::{EnsembleSpec, Generator, Instance};
pub use error::{HarnessError, Result};
pub use report::{Check, TrialOutcome, VerificationReport};
pub use suites::Suite;
pub use verify::{replay, verify, VerifyOptions};
