//! Funder-name to country resolution.
//!
//! Names below the frequency threshold are excluded. The remaining names are
//! resolved by the first stage that claims them, in the fixed order curated
//! map, country-name patterns, then authorship majority.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{normalize_name, Corpus, CorpusConfig};
use crate::country::{tsv_rows, CountryAliasTable, CountryCode, CountryTable, FundingLabel};
use crate::error::{Error, Result};

pub use crate::country::AliasMatch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Assignment {
    Country(CountryCode),
    Eu,
    MultiNation,
    Unresolved,
    Excluded,
}

impl Assignment {
    /// The funding label this assignment contributes, if it is countable.
    pub fn countable_label(&self) -> Option<FundingLabel> {
        match self {
            Assignment::Country(c) => Some(FundingLabel::Country(*c)),
            Assignment::Eu => Some(FundingLabel::Eu),
            _ => None,
        }
    }

    pub fn class_name(&self) -> &'static str {
        match self {
            Assignment::Country(_) => "country",
            Assignment::Eu => "eu",
            Assignment::MultiNation => "multi_nation",
            Assignment::Unresolved => "unresolved",
            Assignment::Excluded => "excluded",
        }
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assignment::Country(c) => f.write_str(c.as_str()),
            Assignment::Eu => f.write_str("EU"),
            Assignment::MultiNation => f.write_str("MULTI"),
            Assignment::Unresolved => f.write_str("UNRESOLVED"),
            Assignment::Excluded => f.write_str("EXCLUDED"),
        }
    }
}

impl FromStr for Assignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "EU" => Ok(Assignment::Eu),
            "MULTI" => Ok(Assignment::MultiNation),
            "UNRESOLVED" => Ok(Assignment::Unresolved),
            "EXCLUDED" => Ok(Assignment::Excluded),
            code => code
                .parse()
                .map(Assignment::Country)
                .map_err(|_| Error::Config(format!("unknown assignment {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Curated,
    NamePattern,
    AuthorshipMajority,
    FrequencyExcluded,
    TieUnresolved,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Curated,
        Method::NamePattern,
        Method::AuthorshipMajority,
        Method::FrequencyExcluded,
        Method::TieUnresolved,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Curated => "curated",
            Method::NamePattern => "name_pattern",
            Method::AuthorshipMajority => "authorship_majority",
            Method::FrequencyExcluded => "frequency_excluded",
            Method::TieUnresolved => "tie_unresolved",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown resolution method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunderRecord {
    pub norm_name: String,
    pub frequency: u64,
    pub assignment: Assignment,
    pub method: Method,
}

/// Hand-curated `norm_name -> assignment` map. Keys are normalized on load.
#[derive(Debug, Clone, Default)]
pub struct CuratedMap {
    entries: BTreeMap<String, Assignment>,
}

impl CuratedMap {
    /// Rows are `norm_name<TAB>assignment` with assignment an ISO code, `EU` or `MULTI`.
    /// An unknown country code is a configuration error.
    pub fn from_tsv(text: &str, source_name: &str, countries: &CountryTable) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (line_no, fields) in tsv_rows(text) {
            let [name, assignment] = fields[..] else {
                return Err(Error::table(source_name, line_no, "expected 2 columns"));
            };
            let assignment = match assignment {
                "EU" => Assignment::Eu,
                "MULTI" => Assignment::MultiNation,
                code => Assignment::Country(countries.parse_code(code).ok_or_else(|| {
                    Error::table(source_name, line_no, format!("unknown country code {code:?}"))
                })?),
            };
            let key = normalize_name(name);
            if key.is_empty() {
                return Err(Error::table(source_name, line_no, "empty funder name"));
            }
            entries.insert(key, assignment);
        }
        Ok(Self { entries })
    }

    pub fn insert(&mut self, name: &str, assignment: Assignment) {
        self.entries.insert(normalize_name(name), assignment);
    }

    pub fn get(&self, norm_name: &str) -> Option<Assignment> {
        self.entries.get(norm_name).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Occurrences of each normalized funder name across the corpus.
pub fn count_frequencies(corpus: &Corpus) -> HashMap<String, u64> {
    corpus
        .publications()
        .par_iter()
        .fold(HashMap::new, |mut counts: HashMap<String, u64>, p| {
            for ack in &p.funder_acks {
                *counts.entry(ack.norm_name.clone()).or_default() += 1;
            }
            counts
        })
        .reduce(HashMap::new, merge_counts)
}

fn merge_counts<K: std::hash::Hash + Eq>(mut a: HashMap<K, u64>, b: HashMap<K, u64>) -> HashMap<K, u64> {
    if a.len() < b.len() {
        return merge_counts(b, a);
    }
    for (k, v) in b {
        *a.entry(k).or_default() += v;
    }
    a
}

/// Curated assignments for the names present in the map.
pub fn apply_curated<'a, I>(names: I, curated: &CuratedMap) -> BTreeMap<String, Assignment>
where
    I: IntoIterator<Item = &'a str>,
{
    names
        .into_iter()
        .filter_map(|name| curated.get(name).map(|a| (name.to_owned(), a)))
        .collect()
}

/// Country-name pattern stage: EU token beats countries; two or more countries is multi-nation.
pub fn match_country_names(norm_name: &str, aliases: &CountryAliasTable) -> Option<Assignment> {
    let found = aliases.scan(norm_name);
    if found.eu {
        return Some(Assignment::Eu);
    }
    let mut countries = found.countries.iter();
    match (countries.next(), countries.next()) {
        (None, _) => None,
        (Some(c), None) => Some(Assignment::Country(*c)),
        (Some(_), Some(_)) => Some(Assignment::MultiNation),
    }
}

/// Unique most frequent country of a presence-count distribution, or a tie.
pub fn majority_country(distribution: &BTreeMap<CountryCode, u64>) -> (Assignment, Method) {
    let Some(max) = distribution.values().copied().max() else {
        return (Assignment::Unresolved, Method::TieUnresolved);
    };
    let mut leaders = distribution.iter().filter(|(_, n)| **n == max);
    match (leaders.next(), leaders.next()) {
        (Some((c, _)), None) => (Assignment::Country(*c), Method::AuthorshipMajority),
        _ => (Assignment::Unresolved, Method::TieUnresolved),
    }
}

/// Author-country presence counts over publications acknowledging `norm_name`.
pub fn authorship_distribution(norm_name: &str, corpus: &Corpus) -> BTreeMap<CountryCode, u64> {
    let mut distribution = BTreeMap::new();
    for p in corpus.iter() {
        if p.funder_acks.iter().any(|a| a.norm_name == norm_name) {
            for c in &p.author_countries {
                *distribution.entry(*c).or_default() += 1;
            }
        }
    }
    distribution
}

/// Authorship-majority stage for a single name.
pub fn infer_by_authorship(norm_name: &str, corpus: &Corpus) -> Assignment {
    majority_country(&authorship_distribution(norm_name, corpus)).0
}

/// Final assignment for every funder name in the corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResolutionTable {
    records: BTreeMap<String, FunderRecord>,
}

impl ResolutionTable {
    pub fn from_records<I: IntoIterator<Item = FunderRecord>>(records: I) -> Self {
        Self {
            records: records.into_iter().map(|r| (r.norm_name.clone(), r)).collect(),
        }
    }

    pub fn get(&self, norm_name: &str) -> Option<&FunderRecord> {
        self.records.get(norm_name)
    }

    /// Records in name order.
    pub fn records(&self) -> impl Iterator<Item = &FunderRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassCount {
    pub count: u64,
    pub percent: f64,
}

/// Publication-level accounting. Categories other than `without_funding` overlap.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PublicationAccounting {
    pub total: u64,
    pub without_funding: ClassCount,
    pub with_curated: ClassCount,
    pub with_name_pattern: ClassCount,
    pub with_multi_nation: ClassCount,
    pub with_authorship: ClassCount,
    pub with_unresolved: ClassCount,
    pub only_non_countable: ClassCount,
}

impl Default for ClassCount {
    fn default() -> Self {
        Self {
            count: 0,
            percent: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolutionReport {
    pub total_names: u64,
    pub min_funder_frequency: u64,
    pub by_method: BTreeMap<String, ClassCount>,
    pub by_assignment: BTreeMap<String, ClassCount>,
    pub publications: PublicationAccounting,
}

fn percent(count: u64, total: u64) -> ClassCount {
    let percent = if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    };
    ClassCount { count, percent }
}

/// Runs every stage and reports how names and publications were resolved.
pub fn resolve_all(
    corpus: &Corpus,
    curated: &CuratedMap,
    aliases: &CountryAliasTable,
    cfg: &CorpusConfig,
) -> (ResolutionTable, ResolutionReport) {
    let frequencies = count_frequencies(corpus);

    // Pass 2a: curated and pattern stages, independent per name.
    let staged: HashMap<&str, Option<(Assignment, Method)>> = frequencies
        .par_iter()
        .map(|(name, freq)| {
            let decided = if *freq < cfg.min_funder_frequency {
                Some((Assignment::Excluded, Method::FrequencyExcluded))
            } else if let Some(a) = curated.get(name) {
                Some((a, Method::Curated))
            } else {
                match_country_names(name, aliases).map(|a| (a, Method::NamePattern))
            };
            (name.as_str(), decided)
        })
        .collect();

    // Pass 2b: presence counts for names left to the authorship stage.
    let distributions = corpus
        .publications()
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<&str, BTreeMap<CountryCode, u64>>, p| {
            let mut seen = HashSet::new();
            for ack in &p.funder_acks {
                let name = ack.norm_name.as_str();
                if matches!(staged.get(name), Some(None)) && seen.insert(name) {
                    let dist = acc.entry(name).or_default();
                    for c in &p.author_countries {
                        *dist.entry(*c).or_default() += 1;
                    }
                }
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (name, dist) in b {
                let into = a.entry(name).or_default();
                for (c, n) in dist {
                    *into.entry(c).or_default() += n;
                }
            }
            a
        });

    let empty = BTreeMap::new();
    let records: Vec<FunderRecord> = staged
        .par_iter()
        .map(|(name, decided)| {
            let (assignment, method) = decided.unwrap_or_else(|| {
                majority_country(distributions.get(name).unwrap_or(&empty))
            });
            FunderRecord {
                norm_name: (*name).to_owned(),
                frequency: frequencies[*name],
                assignment,
                method,
            }
        })
        .collect();
    let table = ResolutionTable::from_records(records);
    let report = build_report(corpus, &table, cfg);
    (table, report)
}

fn build_report(corpus: &Corpus, table: &ResolutionTable, cfg: &CorpusConfig) -> ResolutionReport {
    let total = table.len() as u64;
    let mut by_method: BTreeMap<String, u64> =
        Method::ALL.iter().map(|m| (m.as_str().to_owned(), 0)).collect();
    let mut by_assignment: BTreeMap<String, u64> = [
        "country",
        "eu",
        "multi_nation",
        "unresolved",
        "excluded",
    ]
    .iter()
    .map(|k| (k.to_string(), 0))
    .collect();
    for r in table.records() {
        *by_method.get_mut(r.method.as_str()).unwrap() += 1;
        *by_assignment.get_mut(r.assignment.class_name()).unwrap() += 1;
    }

    #[derive(Default, Clone, Copy)]
    struct Flags([u64; 7]);
    let counts = corpus
        .publications()
        .par_iter()
        .map(|p| {
            let mut f = [0u64; 7];
            let mut any = false;
            let mut countable = false;
            for ack in &p.funder_acks {
                let Some(r) = table.get(&ack.norm_name) else { continue };
                if r.assignment == Assignment::Excluded {
                    continue;
                }
                any = true;
                countable |= r.assignment.countable_label().is_some();
                match (r.method, r.assignment) {
                    (_, Assignment::MultiNation) => f[3] = 1,
                    (Method::Curated, _) => f[1] = 1,
                    (Method::NamePattern, _) => f[2] = 1,
                    (Method::AuthorshipMajority, _) => f[4] = 1,
                    (_, Assignment::Unresolved) => f[5] = 1,
                    _ => {}
                }
            }
            f[0] = u64::from(!any);
            f[6] = u64::from(any && !countable);
            Flags(f)
        })
        .reduce(Flags::default, |mut a, b| {
            for (x, y) in a.0.iter_mut().zip(b.0) {
                *x += y;
            }
            a
        });
    let n = corpus.len() as u64;
    let c = counts.0;
    ResolutionReport {
        total_names: total,
        min_funder_frequency: cfg.min_funder_frequency,
        by_method: by_method.into_iter().map(|(k, v)| (k, percent(v, total))).collect(),
        by_assignment: by_assignment
            .into_iter()
            .map(|(k, v)| (k, percent(v, total)))
            .collect(),
        publications: PublicationAccounting {
            total: n,
            without_funding: percent(c[0], n),
            with_curated: percent(c[1], n),
            with_name_pattern: percent(c[2], n),
            with_multi_nation: percent(c[3], n),
            with_authorship: percent(c[4], n),
            with_unresolved: percent(c[5], n),
            only_non_countable: percent(c[6], n),
        },
    }
}
