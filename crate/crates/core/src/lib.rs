//! Behavioral simulator for content-addressable-memory (CAM) arrays used as
//! Hamming-distance fixed-radius search engines.
//!
//! Each stored row discharges its matchline at a rate set by the number of
//! mismatching cells; a latch clock placed between the delays of `L` and
//! `L + 1` mismatches turns the array into a radius-`L` filter. Searchline
//! RC delay and IR drop skew those delays across rows, which lets far rows
//! slip past the clock and degrades precision as arrays grow.
//!
//! * [`techmodel`]: technology profiles, delay and energy laws, variation
//! * [`camarray`]: banked arrays, clock placement, search
//! * [`metrics`]: precision/recall, minimum detectable distance
//! * [`encode`]: one-hot and random-hyperplane LSH encoders
//! * [`experiments`]: end-to-end studies and calibration
//! * [`report`], [`config`], [`io`]: run configuration and output

pub mod bits;
pub mod camarray;
pub mod config;
pub mod encode;
pub mod error;
pub mod experiments;
pub mod io;
pub mod metrics;
pub mod report;
pub mod stats;
pub mod techmodel;

pub use bits::BitVector;
pub use camarray::{
    build_banks, clock_threshold, row_delay, search, ArrayConfig, CamBankSet, ClockKind,
    ClockPolicy, SearchOutcome,
};
pub use error::{Error, Result};
pub use metrics::{mdd, retrieval_metrics, separation_curve, MddTable, RetrievalMetrics};
pub use techmodel::{MitigationConfig, MitigationKind, TechProfile, Technology, VariationConfig};
