//! Distribution-drift analysis for timestamped tabular streams.
//!
//! A stream is ingested against a declared schema, discretized into integer
//! codes, and compared across time windows with total variation or Hellinger
//! distance. Drift can be measured for a single pair of windows, swept over
//! time as a series, or laid out over attribute pairs as a heat map.

pub mod cli;
pub mod config;
pub mod discretize;
pub mod distance;
pub mod estimate;
pub mod ingest;
pub mod maps;
pub mod measures;
pub mod render;
pub mod schema;
pub mod temporal;

pub use discretize::{Code, Discretizer, EncodedDataset};
pub use distance::DistanceKind;
pub use estimate::{AttributeSubset, DistributionEstimate, TimeInterval};
pub use measures::{DriftMeasurement, DriftValue, MeasureKind};
pub use schema::AttributeSchema;
