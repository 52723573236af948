//! Beamformer designs for the SWIPT downlink and Monte-Carlo sweeps.

pub mod sca;
pub mod sweep;
pub mod wmmse;
pub mod zf;

use serde::{Deserialize, Serialize};

use crate::linalg::CMat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverId {
    Zf,
    Wmmse,
    Sca,
}

impl SolverId {
    pub fn label(self) -> &'static str {
        match self {
            SolverId::Zf => "zf",
            SolverId::Wmmse => "wmmse",
            SolverId::Sca => "sca",
        }
    }
}

/// Output of a beamformer design for one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSolution {
    pub solver: SolverId,
    /// Per-user precoders, M x d each.
    pub precoders: Vec<CMat>,
    pub iterations: usize,
    /// Objective value after each iteration (solver-specific objective).
    pub objective_trace: Vec<f64>,
    /// Whether every energy receiver meets the harvest target.
    pub feasible_eh: bool,
}

pub use sca::{penalized_gradient, penalized_objective, sca_swipt};
pub use sweep::{sweep_antennas, sweep_power, SolverStat, SweepAxis, SweepPoint, SweepResult};
pub use wmmse::wmmse;
pub use zf::zf_bd;
