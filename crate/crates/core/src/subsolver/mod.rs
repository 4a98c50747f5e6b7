//! Convexified subproblem with the auxiliary variables held fixed, and the
//! interior-point solver for it.

pub mod barrier;
pub mod kkt;
pub mod layout;
pub mod program;

use crate::phymodel::{BitSplit, QuantizerCovariances, TransmitCovariances};

pub use barrier::{solve, SolveOutcome, SolverSettings};
pub use kkt::{check_kkt, gradient_check, KktReport};
pub use layout::Layout;
pub use program::{
    assemble_subproblem, Constraint, ConvexProgram, Family, Lmi, SubproblemOptions, Term, ETA_FLOOR, MU_FLOOR,
    OMEGA_FLOOR_REL, RATE_FLOOR, TAU_FLOOR,
};

/// Every optimization variable of the completion-time problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalPoint {
    pub q: TransmitCovariances,
    pub w: QuantizerCovariances,
    pub bits: BitSplit,
    /// Edge and cloud rates, bits/s.
    pub r_e: Vec<f64>,
    pub r_c: Vec<f64>,
    /// Fronthaul rate per AP, bits per symbol.
    pub r_f: Vec<f64>,
    /// `tau_W R_F,i`.
    pub mu_f: Vec<f64>,
    pub tau_c: f64,
    pub tau_w: f64,
    pub tau_f: f64,
    pub tau_total: f64,
    pub eta_l: f64,
    pub n_l: f64,
    pub n_g: f64,
}
