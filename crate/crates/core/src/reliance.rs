//! Funding-reliance network and its disparity-filter backbone.
//!
//! An edge funder -> recipient carries the fraction of the recipient's
//! publications lost if the funder stopped funding internationally. The
//! backbone keeps an edge when its normalized weight p = w / s within a node
//! neighborhood of degree k is improbably large under a uniform null, i.e.
//! when (1 - p)^(k - 1) < alpha. Degree-one neighborhoods keep their edge.

use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;

use rayon::prelude::*;

use crate::counterfactual::ImpactMatrix;
use crate::country::{CountryCode, FundingLabel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct RelianceEdge<S> {
    pub source: FundingLabel,
    pub target: CountryCode,
    pub weight: S,
}

/// Directed weighted edges, sorted by (source, target).
#[derive(Debug, Clone, PartialEq)]
pub struct RelianceNetwork<S> {
    edges: Vec<RelianceEdge<S>>,
}

impl<S: Scalar> RelianceNetwork<S> {
    /// Rejects self-edges, non-positive weights and repeated pairs.
    pub fn from_edges(mut edges: Vec<RelianceEdge<S>>) -> Result<Self> {
        edges.sort_by(|a, b| (a.source, a.target).cmp(&(b.source, b.target)));
        for pair in edges.windows(2) {
            if (pair[0].source, pair[0].target) == (pair[1].source, pair[1].target) {
                return Err(Error::Config(format!("duplicate edge {} -> {}", pair[0].source, pair[0].target)));
            }
        }
        for e in &edges {
            if e.source == FundingLabel::Country(e.target) {
                return Err(Error::Config(format!("self-edge on {}", e.target)));
            }
            if e.weight <= S::zero() {
                return Err(Error::Config(format!("non-positive weight on {} -> {}", e.source, e.target)));
            }
        }
        Ok(Self { edges })
    }

    pub fn edges(&self) -> &[RelianceEdge<S>] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Distinct nodes, counting a country once whether it funds or receives.
    pub fn node_count(&self) -> usize {
        let mut nodes: Vec<FundingLabel> = self
            .edges
            .iter()
            .flat_map(|e| [e.source, FundingLabel::Country(e.target)])
            .collect();
        nodes.sort();
        nodes.dedup();
        nodes.len()
    }
}

/// One edge per (funder, recipient) with a positive reduction; self rows are dropped.
pub fn build_network<S: Scalar>(matrix: &ImpactMatrix<S>) -> RelianceNetwork<S> {
    let edges = matrix
        .rows
        .iter()
        .filter(|r| !r.self_row && r.reduction > S::zero())
        .filter_map(|r| {
            r.scenario.funder().map(|source| RelianceEdge {
                source,
                target: r.recipient,
                weight: r.reduction.clone(),
            })
        })
        .collect();
    RelianceNetwork::from_edges(edges).expect("matrix rows are unique, positive and non-self")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionRule {
    /// Significant within the source's out-neighborhood.
    Out,
    /// Significant within the target's in-neighborhood.
    In,
    /// Significant in either neighborhood.
    Either,
}

impl FromStr for DirectionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "out" => Ok(DirectionRule::Out),
            "in" => Ok(DirectionRule::In),
            "either" => Ok(DirectionRule::Either),
            other => Err(Error::Config(format!("direction must be out, in or either, got {other:?}"))),
        }
    }
}

impl std::fmt::Display for DirectionRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DirectionRule::Out => "out",
            DirectionRule::In => "in",
            DirectionRule::Either => "either",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneParams<S> {
    pub alpha: S,
    pub direction: DirectionRule,
}

impl<S: Scalar> BackboneParams<S> {
    pub const DEFAULT_ALPHA: f64 = 0.05;

    pub fn new(alpha: S, direction: DirectionRule) -> Result<Self> {
        if !(alpha > S::zero() && alpha < S::one()) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha:?}")));
        }
        Ok(Self { alpha, direction })
    }
}

impl<S: Scalar> Default for BackboneParams<S> {
    fn default() -> Self {
        Self {
            alpha: S::from_ratio(1, 20),
            direction: DirectionRule::Either,
        }
    }
}

/// (1 - w / strength)^(k - 1): probability under the uniform null of a normalized weight at least this large.
pub fn edge_significance<S: Scalar>(weight: &S, strength: &S, degree: usize) -> S {
    debug_assert!(degree >= 1);
    (S::one() - weight.clone() / strength.clone()).powu(degree - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSignificance<S> {
    pub edge: RelianceEdge<S>,
    pub k_out: usize,
    pub k_in: usize,
    pub alpha_out: S,
    pub alpha_in: S,
    pub kept: bool,
}

/// Every edge of the network with its significance and keep decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Backbone<S> {
    pub edges: Vec<EdgeSignificance<S>>,
}

impl<S: Scalar> Backbone<S> {
    pub fn kept(&self) -> impl Iterator<Item = &EdgeSignificance<S>> {
        self.edges.iter().filter(|e| e.kept)
    }

    pub fn kept_network(&self) -> RelianceNetwork<S> {
        RelianceNetwork {
            edges: self.kept().map(|e| e.edge.clone()).collect(),
        }
    }
}

struct Neighborhood<S> {
    degree: usize,
    strength: Option<S>,
}

impl<S> Default for Neighborhood<S> {
    fn default() -> Self {
        Self { degree: 0, strength: None }
    }
}

impl<S: Scalar> Neighborhood<S> {
    fn add(&mut self, w: &S) {
        self.degree += 1;
        self.strength = Some(match self.strength.take() {
            Some(s) => s + w.clone(),
            None => w.clone(),
        });
    }

    fn keeps(&self, alpha_ij: &S, alpha: &S) -> bool {
        self.degree == 1 || alpha_ij < alpha
    }
}

pub fn disparity_filter<S: Scalar>(network: &RelianceNetwork<S>, params: &BackboneParams<S>) -> Result<Backbone<S>> {
    let params = BackboneParams::new(params.alpha.clone(), params.direction)?;
    let mut outgoing: HashMap<FundingLabel, Neighborhood<S>> = HashMap::new();
    let mut incoming: HashMap<CountryCode, Neighborhood<S>> = HashMap::new();
    // Edges are sorted, so every strength is summed in the same order.
    for e in network.edges() {
        outgoing.entry(e.source).or_default().add(&e.weight);
        incoming.entry(e.target).or_default().add(&e.weight);
    }
    let edges = network
        .edges()
        .par_iter()
        .map(|e| {
            let out = &outgoing[&e.source];
            let inn = &incoming[&e.target];
            let alpha_out = edge_significance(&e.weight, out.strength.as_ref().unwrap(), out.degree);
            let alpha_in = edge_significance(&e.weight, inn.strength.as_ref().unwrap(), inn.degree);
            let keep_out = out.keeps(&alpha_out, &params.alpha);
            let keep_in = inn.keeps(&alpha_in, &params.alpha);
            let kept = match params.direction {
                DirectionRule::Out => keep_out,
                DirectionRule::In => keep_in,
                DirectionRule::Either => keep_out || keep_in,
            };
            EdgeSignificance {
                edge: e.clone(),
                k_out: out.degree,
                k_in: inn.degree,
                alpha_out,
                alpha_in,
                kept,
            }
        })
        .collect();
    Ok(Backbone { edges })
}

/// Heaviest in-edge per recipient; equal weights go to the lexicographically first funder.
pub fn top_funder_per_country<'a, S, I>(edges: I) -> BTreeMap<CountryCode, FundingLabel>
where
    S: Scalar,
    I: IntoIterator<Item = &'a RelianceEdge<S>>,
{
    let mut best: BTreeMap<CountryCode, &RelianceEdge<S>> = BTreeMap::new();
    for e in edges {
        match best.get(&e.target) {
            Some(current) if current.weight > e.weight => {}
            Some(current) if current.weight == e.weight && current.source <= e.source => {}
            _ => {
                best.insert(e.target, e);
            }
        }
    }
    best.into_iter().map(|(c, e)| (c, e.source)).collect()
}
