//! Semi-blind tensor receivers for an RIS-aided fluid-antenna uplink.

pub mod channel;
pub mod config;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod modulation;
pub mod oracle;
pub mod protocols;
pub mod receivers;
pub mod rng;

pub use channel::{ChannelSet, Scenario, Schedule, SymbolMatrix};
pub use config::{PhaseDesign, Protocol, SystemConfig};
pub use error::{Error, FieldError, Result};
pub use linalg::{CMatrix, CTensor3, C64};
pub use modulation::Modulation;
pub use protocols::ObservationTensor;
pub use receivers::{Init, KnownSideInfo, ReceiverOutput, TalsOptions};
