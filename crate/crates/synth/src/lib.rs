//! Synthetic corpora with planted funder assignments, plus an independent
//! brute-force oracle for every aggregate the pipeline reports.

pub mod error;
pub mod generate;
pub mod names;
pub mod oracle;
pub mod spec;

pub use error::SynthError;
pub use generate::{generate, FunderKind, GroundTruth, Mention, Record, SynthCorpus, TruthFunder};
pub use oracle::{oracle_metrics, Direction, OracleMetrics, OracleNum, OracleParams};
pub use spec::{NameStyle, SynthSpec};

pub type OracleMetricsF64 = OracleMetrics<f64>;
pub type OracleMetricsExact = OracleMetrics<num_rational::BigRational>;
