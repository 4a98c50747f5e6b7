//! Completion-time minimization for federated learning over a fog radio
//! access network with rate-splitting uplink and finite-capacity fronthaul.
//!
//! The crate is layered bottom-up:
//!
//! - [`matrixcore`]: small Hermitian matrix algebra (log-det, square root, solves).
//! - [`scenario`]: configuration parsing and seeded topology/channel generation.
//! - [`phymodel`]: rates, compression rate and the true completion-time evaluator.
//! - [`subsolver`]: the convexified subproblem and its log-barrier Newton solver.
//! - [`sca`]: closed-form auxiliary updates and the alternating outer loop.
//! - [`harness`]: baselines, parameter sweeps, CSV output and the grid oracle.

pub mod error;
pub mod harness;
pub mod matrixcore;
pub mod phymodel;
pub mod sca;
pub mod scenario;
pub mod subsolver;
