//! Deterministic simulator and exact verifier for a mediated semi-quantum
//! key distribution protocol.
//!
//! Two classical participants, Alice and Bob, each apply either
//! measure-then-Hadamard (MH) or Hadamard-then-measure (HM) to qubits that
//! an untrusted quantum third party (TP) prepares in `|+⟩` and finally
//! measures in the X basis. Public discussion sorts each round into one of
//! four situations: one yields raw key, the others test the TP's honesty.
//!
//! * [`qubit`] exact state-vector algebra;
//! * [`protocol`] round execution, classification and sifting;
//! * [`adversary`] every attack strategy, as hooks into the round pipeline;
//! * [`analysis`] exhaustive branch enumeration and Monte-Carlo reports.

pub mod adversary;
pub mod analysis;
pub mod error;
pub mod protocol;
pub mod qubit;
pub mod rng;

pub use error::{Error, Result};
