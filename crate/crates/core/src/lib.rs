//! Citation-network harm analysis for papers that cite retracted work.
//!
//! The pipeline cleans publication, citation, retraction and impact-factor
//! snapshots ([`ingest`]), builds a citation graph ([`graph`]), finds the
//! papers at each citation distance from a retraction ([`frontier`]), compares
//! each one with its venue/year/field cohort ([`comparator`], [`harm`]) and
//! summarizes the resulting harm ratios in quartile tables ([`stats`]).
//! [`synth`] generates test corpora together with a brute-force oracle, and
//! [`pipeline`] ties the stages to on-disk artifacts.

pub mod comparator;
pub mod error;
pub mod frontier;
pub mod graph;
pub mod harm;
pub mod ingest;
pub mod manifest;
pub mod pipeline;
pub mod stats;
pub mod synth;
pub mod verify;

pub use error::{Error, ErrorKind, Result};
