//! Federated planning: manifests, speaker-disjoint partitions, round
//! schedules and wall-clock / communication estimates.

pub mod manifest;
pub mod partition;
pub mod schedule;
pub mod wallclock;

pub use manifest::{load_manifest, read_manifest, write_manifest, SyntheticCorpus, UtteranceRecord};
pub use partition::{partition_by_speaker, ClientData, Partition};
pub use schedule::{schedule_rounds, Round, RoundSchedule};
pub use wallclock::{
    estimate_communication, estimate_wall_clock, CommunicationEstimate, PlanSettings, WallClockEstimate,
};
