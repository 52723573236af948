//! Physical-layer testbed for multi-user MIMO downlinks with simultaneous
//! wireless information and power transfer (SWIPT).
//!
//! The crate covers scenario configuration, geometric channel sampling
//! (path loss, lognormal shadowing, Rician fading, ULA steering), link
//! metrics (sum rate, harvested energy), three beamformer designs
//! (zero-forcing block diagonalization, WMMSE, penalized SCA), and
//! Monte-Carlo sweeps over transmit power and array size.

pub mod channel;
pub mod config;
pub mod gainmap;
pub mod linalg;
pub mod metrics;
pub mod solvers;

mod errors;

pub use channel::{sample_channel, steering_vector, ChannelSet, Scenario};
pub use config::{dbm_to_watts, watts_to_dbm, ScenarioConfig};
pub use errors::{ChannelError, ConfigError, MetricError, SolverError};
pub use gainmap::GainMap;
pub use metrics::{harvested_energy, sum_rate, total_power};
pub use solvers::{BeamformerSolution, SolverId};
