//! Funding instances, fractional attribution and funding-share tables.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::corpus::{Corpus, Publication};
use crate::country::{CountryCode, FundingLabel};
use crate::error::{Error, Result};
use crate::resolver::{Assignment, ResolutionTable};
use crate::scalar::Scalar;

/// One distinct (funder, grant) acknowledgement of a publication.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FundingInstance {
    pub funder: String,
    pub grant_id: Option<String>,
    pub assignment: Assignment,
}

impl FundingInstance {
    pub fn label(&self) -> Option<FundingLabel> {
        self.assignment.countable_label()
    }
}

/// Expands acknowledgements into instances, deduplicated on (funder, trimmed grant).
///
/// A funder without grant numbers yields one instance. Excluded funders yield nothing.
pub fn expand_instances(publication: &Publication, table: &ResolutionTable) -> Result<Vec<FundingInstance>> {
    let mut instances = BTreeSet::new();
    for ack in &publication.funder_acks {
        let record = table
            .get(&ack.norm_name)
            .ok_or_else(|| Error::MissingFunder(ack.norm_name.clone()))?;
        if record.assignment == Assignment::Excluded {
            continue;
        }
        let grants: Vec<&str> = ack
            .grant_ids
            .iter()
            .map(|g| g.trim())
            .filter(|g| !g.is_empty())
            .collect();
        if grants.is_empty() {
            instances.insert(FundingInstance {
                funder: ack.norm_name.clone(),
                grant_id: None,
                assignment: record.assignment,
            });
        }
        for grant in grants {
            instances.insert(FundingInstance {
                funder: ack.norm_name.clone(),
                grant_id: Some(grant.to_owned()),
                assignment: record.assignment,
            });
        }
    }
    Ok(instances.into_iter().collect())
}

/// Instance counts per countable label of one publication.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FundingCounts {
    /// Sorted by label, counts > 0.
    labels: Vec<(FundingLabel, u32)>,
    countable: u32,
    non_countable: u32,
}

impl FundingCounts {
    pub fn from_instances(instances: &[FundingInstance]) -> Self {
        let mut per_label: BTreeMap<FundingLabel, u32> = BTreeMap::new();
        let mut non_countable = 0;
        for instance in instances {
            match instance.label() {
                Some(label) => *per_label.entry(label).or_default() += 1,
                None => non_countable += 1,
            }
        }
        let countable = per_label.values().sum();
        Self {
            labels: per_label.into_iter().collect(),
            countable,
            non_countable,
        }
    }

    /// Builds counts directly from `(label, N_{c,p})` pairs.
    pub fn from_label_counts<I: IntoIterator<Item = (FundingLabel, u32)>>(counts: I) -> Self {
        let mut per_label: BTreeMap<FundingLabel, u32> = BTreeMap::new();
        for (label, n) in counts {
            *per_label.entry(label).or_default() += n;
        }
        per_label.retain(|_, n| *n > 0);
        let countable = per_label.values().sum();
        Self {
            labels: per_label.into_iter().collect(),
            countable,
            non_countable: 0,
        }
    }

    /// N_p: number of countable instances.
    pub fn total(&self) -> u32 {
        self.countable
    }

    pub fn non_countable(&self) -> u32 {
        self.non_countable
    }

    pub fn is_funded(&self) -> bool {
        self.countable > 0
    }

    pub fn label_counts(&self) -> &[(FundingLabel, u32)] {
        &self.labels
    }

    pub fn labels(&self) -> impl Iterator<Item = FundingLabel> + '_ {
        self.labels.iter().map(|(l, _)| *l)
    }

    pub fn count(&self, label: FundingLabel) -> u32 {
        self.labels
            .binary_search_by(|(l, _)| l.cmp(&label))
            .map(|i| self.labels[i].1)
            .unwrap_or(0)
    }
}

/// Per-label fractions f_{c,p} = N_{c,p} / N_p of one publication.
#[derive(Debug, Clone, PartialEq)]
pub struct FundingAttribution<S> {
    pub pub_id: String,
    pub total: u32,
    pub counts: Vec<(FundingLabel, u32)>,
    pub fractions: Vec<(FundingLabel, S)>,
}

impl<S: Scalar> FundingAttribution<S> {
    pub fn is_funded(&self) -> bool {
        self.total > 0
    }

    pub fn fraction(&self, label: FundingLabel) -> S {
        self.fractions
            .iter()
            .find(|(l, _)| *l == label)
            .map(|(_, f)| f.clone())
            .unwrap_or_else(S::zero)
    }
}

pub fn funding_fraction<S: Scalar>(pub_id: &str, instances: &[FundingInstance]) -> FundingAttribution<S> {
    let counts = FundingCounts::from_instances(instances);
    let total = counts.total();
    let fractions = counts
        .label_counts()
        .iter()
        .map(|(l, n)| (*l, S::from_ratio(u64::from(*n), u64::from(total))))
        .collect();
    FundingAttribution {
        pub_id: pub_id.to_owned(),
        total,
        counts: counts.label_counts().to_vec(),
        fractions,
    }
}

/// A publication reduced to what the metrics need.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FundedPublication {
    pub year: i32,
    /// Index into [`FundedCorpus::disciplines`].
    pub discipline: usize,
    /// Sorted, distinct.
    pub authors: Vec<CountryCode>,
    pub funding: FundingCounts,
}

impl FundedPublication {
    pub fn is_international(&self) -> bool {
        self.authors.len() >= 2
    }

    pub fn has_author(&self, country: CountryCode) -> bool {
        self.authors.binary_search(&country).is_ok()
    }
}

/// Resolved corpus: every publication with its countable funding counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FundedCorpus {
    publications: Vec<FundedPublication>,
    disciplines: Vec<String>,
}

impl FundedCorpus {
    pub fn build(corpus: &Corpus, table: &ResolutionTable) -> Result<Self> {
        let disciplines: Vec<String> = corpus
            .iter()
            .map(|p| p.discipline.trim().to_owned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let publications = corpus
            .publications()
            .par_iter()
            .map(|p| {
                let instances = expand_instances(p, table)?;
                Ok(FundedPublication {
                    year: p.year,
                    discipline: disciplines
                        .binary_search_by(|d| d.as_str().cmp(p.discipline.trim()))
                        .expect("discipline indexed above"),
                    authors: p.author_countries.clone(),
                    funding: FundingCounts::from_instances(&instances),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            publications,
            disciplines,
        })
    }

    /// Assembles a corpus from parts; discipline indices must be in range.
    pub fn from_parts(publications: Vec<FundedPublication>, disciplines: Vec<String>) -> Self {
        assert!(publications.iter().all(|p| p.discipline < disciplines.len()));
        Self {
            publications,
            disciplines,
        }
    }

    pub fn publications(&self) -> &[FundedPublication] {
        &self.publications
    }

    pub fn disciplines(&self) -> &[String] {
        &self.disciplines
    }

    pub fn years(&self) -> BTreeSet<i32> {
        self.publications.iter().map(|p| p.year).collect()
    }

    /// Author countries present in the corpus.
    pub fn countries(&self) -> BTreeSet<CountryCode> {
        self.publications
            .iter()
            .flat_map(|p| p.authors.iter().copied())
            .collect()
    }

    /// Countable funding labels present in the corpus.
    pub fn funding_labels(&self) -> BTreeSet<FundingLabel> {
        self.publications.iter().flat_map(|p| p.funding.labels()).collect()
    }

    pub fn len(&self) -> usize {
        self.publications.len()
    }

    pub fn is_empty(&self) -> bool {
        self.publications.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FundingShareRow<S> {
    pub year: i32,
    pub label: FundingLabel,
    /// F_c = Σ_p f_{c,p} / F.
    pub share: S,
    /// F: number of funded publications that year.
    pub funded: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShareTable<S> {
    pub rows: Vec<FundingShareRow<S>>,
    /// Years with publications but no funded publication; their rows are undefined.
    pub unfunded_years: Vec<i32>,
}

// Σ_p N_{c,p}/N_p kept exact as integer sums grouped by N_p.
type FractionSums = BTreeMap<u32, u64>;

#[derive(Default)]
struct ShareAccumulator {
    sums: BTreeMap<(i32, FundingLabel), FractionSums>,
    funded: BTreeMap<i32, u64>,
    years: BTreeSet<i32>,
}

impl ShareAccumulator {
    fn add(mut self, p: &FundedPublication) -> Self {
        self.years.insert(p.year);
        if p.funding.is_funded() {
            *self.funded.entry(p.year).or_default() += 1;
            let denominator = p.funding.total();
            for (label, n) in p.funding.label_counts() {
                *self
                    .sums
                    .entry((p.year, *label))
                    .or_default()
                    .entry(denominator)
                    .or_default() += u64::from(*n);
            }
        }
        self
    }

    fn merge(mut self, other: Self) -> Self {
        for (key, sums) in other.sums {
            let into = self.sums.entry(key).or_default();
            for (d, n) in sums {
                *into.entry(d).or_default() += n;
            }
        }
        for (year, n) in other.funded {
            *self.funded.entry(year).or_default() += n;
        }
        self.years.extend(other.years);
        self
    }

    fn finish<S: Scalar>(self) -> ShareTable<S> {
        let rows = self
            .sums
            .into_iter()
            .map(|((year, label), sums)| {
                let funded = self.funded[&year];
                let total = sums
                    .into_iter()
                    .fold(S::zero(), |acc, (d, n)| acc + S::from_ratio(n, u64::from(d)));
                FundingShareRow {
                    year,
                    label,
                    share: total / S::from_count(funded),
                    funded,
                }
            })
            .collect();
        let unfunded_years = self
            .years
            .into_iter()
            .filter(|y| !self.funded.contains_key(y))
            .collect();
        ShareTable { rows, unfunded_years }
    }
}

fn share_table<S, F>(corpus: &FundedCorpus, keep: F) -> ShareTable<S>
where
    S: Scalar,
    F: Fn(&FundedPublication) -> bool + Sync,
{
    corpus
        .publications()
        .par_iter()
        .filter(|p| keep(p))
        .fold(ShareAccumulator::default, ShareAccumulator::add)
        .reduce(ShareAccumulator::default, ShareAccumulator::merge)
        .finish()
}

/// F_c for every label and year, sorted by (year, label).
pub fn funding_shares<S: Scalar>(corpus: &FundedCorpus) -> ShareTable<S> {
    share_table(corpus, |_| true)
}

/// F_c for one year. Empty when the year has no funded publication.
pub fn country_funding_share<S: Scalar>(corpus: &FundedCorpus, year: i32) -> Vec<FundingShareRow<S>> {
    share_table(corpus, |p| p.year == year).rows
}

/// Funding shares over internationally coauthored publications only.
pub fn international_shares<S: Scalar>(corpus: &FundedCorpus) -> ShareTable<S> {
    share_table(corpus, FundedPublication::is_international)
}

pub fn international_share_table<S: Scalar>(corpus: &FundedCorpus, year: i32) -> Vec<FundingShareRow<S>> {
    share_table(corpus, |p| p.year == year && p.is_international()).rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Subset {
    All,
    International,
    Domestic,
}

impl Subset {
    pub const ALL: [Subset; 3] = [Subset::All, Subset::International, Subset::Domestic];

    pub fn as_str(&self) -> &'static str {
        match self {
            Subset::All => "all",
            Subset::International => "international",
            Subset::Domestic => "domestic",
        }
    }

    pub fn contains(&self, p: &FundedPublication) -> bool {
        match self {
            Subset::All => true,
            Subset::International => p.authors.len() >= 2,
            Subset::Domestic => p.authors.len() == 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceRow<S> {
    pub year: i32,
    pub subset: Subset,
    pub publications: u64,
    pub funded_frac: S,
    pub single_country_frac: S,
    pub multi_country_frac: S,
}

/// Per year and subset: share of publications funded at all, by one label, by two or more.
///
/// Subsets without publications report zero fractions.
pub fn funding_incidence_tables<S: Scalar>(corpus: &FundedCorpus) -> Vec<IncidenceRow<S>> {
    // [total, funded, single, multi]
    type Counts = BTreeMap<(i32, Subset), [u64; 4]>;
    let counts: Counts = corpus
        .publications()
        .par_iter()
        .fold(Counts::new, |mut acc, p| {
            let labels = p.funding.label_counts().len();
            for subset in Subset::ALL {
                if subset.contains(p) {
                    let c = acc.entry((p.year, subset)).or_default();
                    c[0] += 1;
                    c[1] += u64::from(labels >= 1);
                    c[2] += u64::from(labels == 1);
                    c[3] += u64::from(labels >= 2);
                }
            }
            acc
        })
        .reduce(Counts::new, |mut a, b| {
            for (k, v) in b {
                let into = a.entry(k).or_default();
                for i in 0..4 {
                    into[i] += v[i];
                }
            }
            a
        });
    let frac = |n: u64, d: u64| if d == 0 { S::zero() } else { S::from_ratio(n, d) };
    let mut rows = Vec::new();
    for year in corpus.years() {
        for subset in Subset::ALL {
            let c = counts.get(&(year, subset)).copied().unwrap_or_default();
            rows.push(IncidenceRow {
                year,
                subset,
                publications: c[0],
                funded_frac: frac(c[1], c[0]),
                single_country_frac: frac(c[2], c[0]),
                multi_country_frac: frac(c[3], c[0]),
            });
        }
    }
    rows
}
