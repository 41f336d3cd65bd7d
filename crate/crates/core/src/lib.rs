//! Data-driven synthesis of control barrier certificates for black-box
//! systems, with posterior confidence bounds.

pub mod error;
pub mod geometry;
pub mod io;
pub mod bounds;
pub mod config;
pub mod lp;
pub mod pipeline;
pub mod plant;
pub mod polynomial;
pub mod scp;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{HyperRect, RegionUnion, SampleSpace};
pub use plant::{Dataset, DatasetRole, RoomTemperature, Sample, System};
pub use polynomial::{PolyBasis, Polynomial};
pub use config::{SampleCount, SynthesisConfig};
pub use pipeline::{
    prior_synthesize, repeat_experiment, synthesize, synthesize_with_retries, CertificateReport, RepeatSummary,
    Verdict,
};
pub use verify::Certificate;
