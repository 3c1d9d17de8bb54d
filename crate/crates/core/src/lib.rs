//! Inter-chiplet interconnect (ICI) topologies for organic and glass
//! substrates, evaluated with closed-form technology models and a cycle-based
//! flit-level network simulator.
//!
//! The crate is organized bottom-up:
//!
//! - [`placement`]: chiplet layouts, kinds, link lengths and link-ranges.
//! - [`topology`]: topology generators (including FoldedHexaTorus) and graph metrics.
//! - [`techmodel`]: substrate parameters, rate-vs-length tables, bandwidth, area, power.
//! - [`routing`]: deadlock-free shortest-path routing via turn restrictions.
//! - [`sim`]: the flit-level simulator, traffic patterns and trace replay.
//! - [`harness`]: experiment configs, sweeps and CSV output.

pub mod error;
pub mod harness;
pub mod placement;
pub mod routing;
pub mod sim;
pub mod techmodel;
pub mod topology;

pub use error::{Error, Result};
