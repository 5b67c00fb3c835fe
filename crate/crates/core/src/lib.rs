pub mod config;
pub mod error;
pub mod matrix;
pub mod model;
pub mod network;
pub mod phase_type;
pub mod sim;
pub mod sparse;
pub mod stability;
pub mod stats;

pub use config::Tolerances;
pub use error::{Error, Result};
pub use matrix::{Matrix, Vector};
pub use model::GenesisModel;
pub use network::{Network, NetworkKind};
pub use phase_type::{PhaseType, PhaseTypeKind};
pub use sim::{EventLog, PrevalenceSeries};
pub use stability::{StabilityReport, Verdict};
