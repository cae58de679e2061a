//! Group-meeting detection and group-aware opportunistic forwarding over
//! pairwise contact traces.
//!
//! The pipeline runs bottom-up: [`trace`] ingestion, [`slicing`] into
//! per-window social graphs, [`cpm`] community detection, [`tracking`] of
//! groups across windows, [`regularity`] statistics, [`routing`] over the
//! group graph, and [`replay`] of messages under GROUPS-NET or the
//! [`baselines`]. [`experiment`] ties those together into seeded runs.

pub mod baselines;
pub mod cli;
pub mod cpm;
pub mod error;
pub mod experiment;
pub mod regularity;
pub mod replay;
pub mod routing;
pub mod slicing;
pub mod synth;
pub mod trace;
pub mod tracking;

pub use error::{Error, Result};
pub use trace::{ContactEvent, DurationMode, NodeId, Time, Trace, DAY, HOUR};
