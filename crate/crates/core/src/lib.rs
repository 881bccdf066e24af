//! Decentralized multi-agent active search and tracking.
//!
//! Agents keep a particle PHD over an unknown number of moving targets, choose
//! sensing regions by Thompson sampling from that intensity, and share
//! timestamped observations over a lossy asynchronous channel.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod kmeans;
pub mod phd;
pub mod policy;
pub mod rng;
pub mod runtime;
pub mod sampling;
pub mod world;

pub use error::{Error, Result};
pub use geometry::{
    action_contains, build_action_space, ActionSpace, SearchSpace, SensingAction, TargetSet,
    TargetState,
};
pub use phd::{BirthConfig, FilterConfig, Particle, ParticlePhd};
pub use policy::{ospa, OspaParams, PolicyKind, PolicyVariant, RolloutConfig};
pub use rng::{RngStream, StreamId};
pub use harness::{run_and_write, run_experiment, ExperimentConfig, SweepPoint};
pub use runtime::{run_trial, ChannelConfig, ObservationRecord, TrialConfig, TrialTrace};
pub use sampling::{TsConfig, TsMethod};
pub use world::{MeasurementSet, MotionModel, SensorModel};
