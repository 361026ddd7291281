//! Attribution of research funding to countries from acknowledgement records.
//!
//! The analysis runs over any [`Scalar`]: `f64`, `f32`, or exact
//! [`BigRational`]. Aliases at the crate root fix the scalar for common uses.

pub mod attribution;
pub mod corpus;
pub mod counterfactual;
pub mod country;
pub mod error;
pub mod portfolio;
pub mod reliance;
pub mod resolver;
pub mod scalar;

pub use num_rational::BigRational;

pub use attribution::{
    expand_instances, funding_fraction, funding_incidence_tables, funding_shares, international_shares,
    FundedCorpus, FundedPublication, FundingAttribution, FundingCounts, FundingInstance, FundingShareRow,
    IncidenceRow, ShareTable, Subset,
};
pub use corpus::{
    filter_corpus, ingest_corpus, ingest_str, normalize_name, write_jsonl, Corpus, CorpusConfig, EuMode, EuPolicy,
    FunderAck, IngestReport, Publication,
};
pub use counterfactual::{
    international_removal_table, kl_divergence, per_funder_impact, scenario_matrix, ImpactMatrix, ImpactRow,
    ResearchProfile, Scenario,
};
pub use country::{CountryAliasTable, CountryCode, CountryTable, FundingLabel};
pub use error::{Error, Result};
pub use portfolio::{
    box_summary, classify, continent_rollup, country_portfolio_stats, portfolio_table, BoxSummary,
    ContinentRollup, CountryPortfolioStats, PortfolioClass,
};
pub use reliance::{
    build_network, disparity_filter, top_funder_per_country, Backbone, BackboneParams, DirectionRule,
    RelianceEdge, RelianceNetwork,
};
pub use resolver::{resolve_all, Assignment, CuratedMap, Method, ResolutionReport, ResolutionTable};
pub use scalar::Scalar;

/// Exact rational scalar.
pub type Exact = BigRational;

pub type FundingAttributionF64 = FundingAttribution<f64>;
pub type FundingAttributionExact = FundingAttribution<Exact>;
pub type ShareTableF64 = ShareTable<f64>;
pub type ShareTableExact = ShareTable<Exact>;
pub type PortfolioStatsF64 = CountryPortfolioStats<f64>;
pub type PortfolioStatsF32 = CountryPortfolioStats<f32>;
pub type PortfolioStatsExact = CountryPortfolioStats<Exact>;
pub type ImpactMatrixF64 = ImpactMatrix<f64>;
pub type ImpactMatrixF32 = ImpactMatrix<f32>;
pub type ImpactMatrixExact = ImpactMatrix<Exact>;
pub type RelianceNetworkF64 = RelianceNetwork<f64>;
pub type RelianceNetworkExact = RelianceNetwork<Exact>;
pub type BackboneF64 = Backbone<f64>;
pub type BackboneExact = Backbone<Exact>;
