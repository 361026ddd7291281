//! Funding portfolio of author countries: not funded, domestic, co-funded, foreign.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::attribution::{FundedCorpus, FundedPublication};
use crate::corpus::EuPolicy;
use crate::country::CountryCode;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PortfolioClass {
    NotFunded,
    Domestic,
    CoFunded,
    Foreign,
}

impl PortfolioClass {
    pub const ALL: [PortfolioClass; 4] = [
        PortfolioClass::NotFunded,
        PortfolioClass::Domestic,
        PortfolioClass::CoFunded,
        PortfolioClass::Foreign,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Portfolio class of `publication` from the perspective of author country `country`.
pub fn classify(publication: &FundedPublication, country: CountryCode, eu: &EuPolicy) -> Result<PortfolioClass> {
    if !publication.has_author(country) {
        return Err(Error::NotAnAuthor(country));
    }
    Ok(classify_author(publication, country, eu))
}

pub(crate) fn classify_author(publication: &FundedPublication, country: CountryCode, eu: &EuPolicy) -> PortfolioClass {
    let mut own = false;
    let mut other = false;
    for label in publication.funding.labels() {
        if eu.is_own(label, country) {
            own = true;
        } else {
            other = true;
        }
    }
    match (own, other) {
        (false, false) => PortfolioClass::NotFunded,
        (true, false) => PortfolioClass::Domestic,
        (true, true) => PortfolioClass::CoFunded,
        (false, true) => PortfolioClass::Foreign,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountryPortfolioStats<S> {
    pub country: CountryCode,
    /// M_c: publications with the country among the authors.
    pub m_c: u64,
    /// Per-class publication counts, indexed by [`PortfolioClass::index`].
    pub class_counts: [u64; 4],
    /// False when M_c = 0; every value below is then zero.
    pub defined: bool,
    /// I_c: share of the country's publications acknowledging any funding.
    pub intensity: S,
    /// C_c over all of the country's publications.
    pub exclusive_all: S,
    /// C_c over the country's funded publications; absent when none is funded.
    pub exclusive_funded: Option<S>,
    pub class_fractions: [S; 4],
}

impl<S: Scalar> CountryPortfolioStats<S> {
    pub fn from_counts(country: CountryCode, class_counts: [u64; 4]) -> Self {
        let m_c: u64 = class_counts.iter().sum();
        if m_c == 0 {
            return Self {
                country,
                m_c,
                class_counts,
                defined: false,
                intensity: S::zero(),
                exclusive_all: S::zero(),
                exclusive_funded: None,
                class_fractions: std::array::from_fn(|_| S::zero()),
            };
        }
        let funded = m_c - class_counts[PortfolioClass::NotFunded.index()];
        let domestic = class_counts[PortfolioClass::Domestic.index()];
        Self {
            country,
            m_c,
            class_counts,
            defined: true,
            intensity: S::from_ratio(funded, m_c),
            exclusive_all: S::from_ratio(domestic, m_c),
            exclusive_funded: (funded > 0).then(|| S::from_ratio(domestic, funded)),
            class_fractions: class_counts.map(|n| S::from_ratio(n, m_c)),
        }
    }
}

type ClassCounts = BTreeMap<CountryCode, [u64; 4]>;

fn count_classes(corpus: &FundedCorpus, eu: &EuPolicy) -> ClassCounts {
    corpus
        .publications()
        .par_iter()
        .fold(ClassCounts::new, |mut acc, p| {
            for c in &p.authors {
                acc.entry(*c).or_default()[classify_author(p, *c, eu).index()] += 1;
            }
            acc
        })
        .reduce(ClassCounts::new, |mut a, b| {
            for (c, counts) in b {
                let into = a.entry(c).or_default();
                for i in 0..4 {
                    into[i] += counts[i];
                }
            }
            a
        })
}

/// Portfolio statistics of one country under full counting.
pub fn country_portfolio_stats<S: Scalar>(
    corpus: &FundedCorpus,
    country: CountryCode,
    eu: &EuPolicy,
) -> CountryPortfolioStats<S> {
    let mut counts = [0u64; 4];
    for p in corpus.publications().iter().filter(|p| p.has_author(country)) {
        counts[classify_author(p, country, eu).index()] += 1;
    }
    CountryPortfolioStats::from_counts(country, counts)
}

/// Portfolio statistics of every author country, sorted by country.
pub fn portfolio_table<S: Scalar>(corpus: &FundedCorpus, eu: &EuPolicy) -> Vec<CountryPortfolioStats<S>> {
    count_classes(corpus, eu)
        .into_iter()
        .map(|(c, counts)| CountryPortfolioStats::from_counts(c, counts))
        .collect()
}

/// Box-plot summary with whiskers at 1.5 times the interquartile range.
///
/// Quartiles use linear interpolation between order statistics at rank (n - 1) p.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSummary<S> {
    pub n: usize,
    pub q1: S,
    pub median: S,
    pub q3: S,
    /// Smallest value not below q1 - 1.5 IQR.
    pub lower_whisker: S,
    /// Largest value not above q3 + 1.5 IQR.
    pub upper_whisker: S,
    pub outliers: Vec<(CountryCode, S)>,
}

fn quantile<S: Scalar>(sorted: &[S], num: u64, den: u64) -> S {
    let rank_num = (sorted.len() as u64 - 1) * num;
    let lo = (rank_num / den) as usize;
    let rem = rank_num % den;
    if rem == 0 || lo + 1 >= sorted.len() {
        return sorted[lo].clone();
    }
    let gap = sorted[lo + 1].clone() - sorted[lo].clone();
    sorted[lo].clone() + S::from_ratio(rem, den) * gap
}

pub fn box_summary<S: Scalar>(values: &[(CountryCode, S)]) -> Option<BoxSummary<S>> {
    if values.is_empty() {
        return None;
    }
    let mut sorted: Vec<S> = values.iter().map(|(_, v)| v.clone()).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("comparable values"));
    let q1 = quantile(&sorted, 1, 4);
    let median = quantile(&sorted, 1, 2);
    let q3 = quantile(&sorted, 3, 4);
    let reach = S::from_ratio(3, 2) * (q3.clone() - q1.clone());
    let low_fence = q1.clone() - reach.clone();
    let high_fence = q3.clone() + reach;
    let inside = |v: &S| *v >= low_fence && *v <= high_fence;
    let lower_whisker = sorted.iter().find(|v| inside(v)).cloned().unwrap_or_else(|| q1.clone());
    let upper_whisker = sorted.iter().rev().find(|v| inside(v)).cloned().unwrap_or_else(|| q3.clone());
    let outliers = values.iter().filter(|(_, v)| !inside(v)).cloned().collect();
    Some(BoxSummary {
        n: values.len(),
        q1,
        median,
        q3,
        lower_whisker,
        upper_whisker,
        outliers,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinentDistribution<S> {
    pub continent: String,
    /// Per-country values, sorted by country.
    pub values: Vec<(CountryCode, S)>,
    pub summary: BoxSummary<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinentRollup<S> {
    pub continents: Vec<ContinentDistribution<S>>,
    /// Countries absent from the continent map; left out of the rollup.
    pub unmapped: Vec<CountryCode>,
}

/// Groups per-country values by continent and summarizes each group.
pub fn continent_rollup<S: Scalar>(
    values: &[(CountryCode, S)],
    continents: &BTreeMap<CountryCode, String>,
) -> ContinentRollup<S> {
    let mut groups: BTreeMap<&str, Vec<(CountryCode, S)>> = BTreeMap::new();
    let mut unmapped = Vec::new();
    for (country, value) in values {
        match continents.get(country) {
            Some(continent) => groups.entry(continent).or_default().push((*country, value.clone())),
            None => unmapped.push(*country),
        }
    }
    unmapped.sort();
    let continents = groups
        .into_iter()
        .filter_map(|(continent, mut values)| {
            values.sort_by_key(|(c, _)| *c);
            box_summary(&values).map(|summary| ContinentDistribution {
                continent: continent.to_owned(),
                values,
                summary,
            })
        })
        .collect();
    ContinentRollup { continents, unmapped }
}
