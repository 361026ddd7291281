//! Publication records, JSON Lines ingest, and corpus filters.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Read;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::country::{builtin_eu_members, CountryAliasTable, CountryCode, FundingLabel};
use crate::error::{Error, Result};

/// One acknowledged funder line of a publication.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunderAck {
    pub raw_name: String,
    pub norm_name: String,
    pub grant_ids: Vec<String>,
}

impl FunderAck {
    pub fn new(raw_name: impl Into<String>, grant_ids: Vec<String>) -> Self {
        let raw_name = raw_name.into();
        let norm_name = normalize_name(&raw_name);
        Self {
            raw_name,
            norm_name,
            grant_ids,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Publication {
    pub id: String,
    pub year: i32,
    pub doc_type: String,
    pub discipline: String,
    /// Distinct author countries, sorted.
    pub author_countries: Vec<CountryCode>,
    pub funder_acks: Vec<FunderAck>,
}

impl Publication {
    pub fn is_international(&self) -> bool {
        self.author_countries.len() >= 2
    }

    pub fn has_author(&self, country: CountryCode) -> bool {
        self.author_countries.binary_search(&country).is_ok()
    }
}

/// Publications sorted by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    publications: Vec<Publication>,
}

impl Corpus {
    /// Builds a corpus, sorting by id. Later duplicates of an id are dropped.
    pub fn new(mut publications: Vec<Publication>) -> Self {
        publications.sort_by(|a, b| a.id.cmp(&b.id));
        publications.dedup_by(|later, earlier| later.id == earlier.id);
        Self { publications }
    }

    pub fn publications(&self) -> &[Publication] {
        &self.publications
    }

    pub fn len(&self) -> usize {
        self.publications.len()
    }

    pub fn is_empty(&self) -> bool {
        self.publications.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Publication> {
        self.publications.iter()
    }

    pub fn into_publications(self) -> Vec<Publication> {
        self.publications
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EuMode {
    /// EU funding is foreign for every country.
    Foreign,
    /// EU funding counts as domestic for EU member states.
    Domestic,
}

impl std::str::FromStr for EuMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "foreign" => Ok(EuMode::Foreign),
            "domestic" => Ok(EuMode::Domestic),
            other => Err(Error::Config(format!("eu mode must be foreign or domestic, got {other:?}"))),
        }
    }
}

impl std::fmt::Display for EuMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EuMode::Foreign => "foreign",
            EuMode::Domestic => "domestic",
        })
    }
}

/// How EU-level funding is treated relative to a focal country.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EuPolicy {
    pub mode: EuMode,
    pub members: BTreeSet<CountryCode>,
}

impl EuPolicy {
    pub fn new(mode: EuMode, members: BTreeSet<CountryCode>) -> Self {
        Self { mode, members }
    }

    pub fn foreign() -> Self {
        Self::new(EuMode::Foreign, builtin_eu_members())
    }

    pub fn domestic() -> Self {
        Self::new(EuMode::Domestic, builtin_eu_members())
    }

    pub fn from_config(cfg: &CorpusConfig) -> Self {
        Self::new(cfg.eu_mode(), cfg.eu_members.clone())
    }

    pub fn is_member(&self, country: CountryCode) -> bool {
        self.members.contains(&country)
    }

    /// Whether `label` is the focal country's own funding.
    pub fn is_own(&self, label: FundingLabel, focal: CountryCode) -> bool {
        match label {
            FundingLabel::Country(c) => c == focal,
            FundingLabel::Eu => self.mode == EuMode::Domestic && self.is_member(focal),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusConfig {
    pub year_min: i32,
    pub year_max: i32,
    /// Compared case-insensitively.
    pub allowed_doc_types: BTreeSet<String>,
    /// Compared case-insensitively.
    pub excluded_disciplines: BTreeSet<String>,
    pub min_funder_frequency: u64,
    pub eu_members: BTreeSet<CountryCode>,
    pub eu_as_domestic: bool,
}

impl CorpusConfig {
    pub const DEFAULT_DOC_TYPES: [&'static str; 3] = ["Article", "Review", "Note"];
    /// Journal articles and reviews only.
    pub const STRICT_DOC_TYPES: [&'static str; 2] = ["Article", "Review"];
    pub const DEFAULT_EXCLUDED_DISCIPLINES: [&'static str; 6] = [
        "Arts",
        "Health",
        "Humanities",
        "Professional Fields",
        "Psychology",
        "Social Sciences",
    ];

    pub fn with_strict_doc_types(mut self) -> Self {
        self.allowed_doc_types = Self::STRICT_DOC_TYPES.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn eu_mode(&self) -> EuMode {
        if self.eu_as_domestic {
            EuMode::Domestic
        } else {
            EuMode::Foreign
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_funder_frequency < 1 {
            return Err(Error::Config("min_funder_frequency must be at least 1".into()));
        }
        if self.year_min > self.year_max {
            return Err(Error::Config(format!(
                "year_min {} exceeds year_max {}",
                self.year_min, self.year_max
            )));
        }
        Ok(())
    }

    /// Whether a publication satisfies every filter predicate.
    pub fn retains(&self, publication: &Publication) -> bool {
        let doc_type = publication.doc_type.trim();
        let discipline = publication.discipline.trim();
        (self.year_min..=self.year_max).contains(&publication.year)
            && self
                .allowed_doc_types
                .iter()
                .any(|t| t.eq_ignore_ascii_case(doc_type))
            && !discipline.is_empty()
            && !self
                .excluded_disciplines
                .iter()
                .any(|d| d.eq_ignore_ascii_case(discipline))
            && !publication.author_countries.is_empty()
    }
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            year_min: 2009,
            year_max: 2018,
            allowed_doc_types: Self::DEFAULT_DOC_TYPES.iter().map(|s| s.to_string()).collect(),
            excluded_disciplines: Self::DEFAULT_EXCLUDED_DISCIPLINES
                .iter()
                .map(|s| s.to_string())
                .collect(),
            min_funder_frequency: 2,
            eu_members: builtin_eu_members(),
            eu_as_domestic: false,
        }
    }
}

/// Case-folds, collapses whitespace and strips leading/trailing punctuation.
pub fn normalize_name(raw: &str) -> String {
    let lowered = raw.to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation())
        .to_owned()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: usize,
    pub reject_reasons: BTreeMap<String, usize>,
}

impl IngestReport {
    fn reject(&mut self, reason: &str) {
        self.rejected += 1;
        *self.reject_reasons.entry(reason.to_owned()).or_default() += 1;
    }
}

/// Reads a JSON Lines corpus. Malformed records are counted, not fatal.
pub fn ingest_corpus<R: Read>(mut reader: R, aliases: &CountryAliasTable) -> Result<(Corpus, IngestReport)> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    Ok(ingest_str(&text, aliases))
}

pub fn ingest_str(text: &str, aliases: &CountryAliasTable) -> (Corpus, IngestReport) {
    let parsed: Vec<Result<Publication, &'static str>> = text
        .par_lines()
        .filter(|line| !line.trim().is_empty())
        .map(|line| parse_record(line, aliases))
        .collect();

    let mut report = IngestReport::default();
    let mut seen = HashSet::with_capacity(parsed.len());
    let mut publications = Vec::with_capacity(parsed.len());
    for record in parsed {
        match record {
            Ok(publication) => {
                if seen.insert(publication.id.clone()) {
                    report.accepted += 1;
                    publications.push(publication);
                } else {
                    report.reject("duplicate_id");
                }
            }
            Err(reason) => report.reject(reason),
        }
    }
    (Corpus::new(publications), report)
}

fn parse_record(line: &str, aliases: &CountryAliasTable) -> Result<Publication, &'static str> {
    let Ok(Value::Object(mut record)) = serde_json::from_str::<Value>(line) else {
        return Err("invalid_json");
    };
    let id = match record.remove("id") {
        Some(Value::String(id)) if !id.trim().is_empty() => id,
        _ => return Err("invalid_id"),
    };
    let year = record
        .get("year")
        .and_then(Value::as_i64)
        .and_then(|y| i32::try_from(y).ok())
        .ok_or("invalid_year")?;
    let doc_type = match record.remove("doc_type") {
        Some(Value::String(t)) => t,
        _ => return Err("invalid_doc_type"),
    };
    let discipline = match record.remove("discipline") {
        Some(Value::String(d)) => d,
        Some(Value::Array(_)) => return Err("multi_discipline"),
        _ => return Err("invalid_discipline"),
    };
    let countries = match record.remove("countries") {
        None | Some(Value::Null) => return Err("missing_countries"),
        Some(Value::Array(items)) => items,
        Some(_) => return Err("invalid_countries"),
    };
    let mut author_countries = Vec::with_capacity(countries.len());
    for item in &countries {
        let spelling = item.as_str().ok_or("invalid_countries")?;
        author_countries.push(aliases.lookup_country(spelling).ok_or("unknown_country")?);
    }
    author_countries.sort();
    author_countries.dedup();

    let funder_acks = match record.remove("funders") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .into_iter()
            .map(parse_funder)
            .collect::<Option<Vec<_>>>()
            .ok_or("invalid_funders")?,
        Some(_) => return Err("invalid_funders"),
    };

    Ok(Publication {
        id,
        year,
        doc_type,
        discipline,
        author_countries,
        funder_acks,
    })
}

fn parse_funder(value: Value) -> Option<FunderAck> {
    let Value::Object(mut funder) = value else {
        return None;
    };
    let name = match funder.remove("name") {
        Some(Value::String(name)) => name,
        _ => return None,
    };
    let grants = match funder.remove("grants") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .into_iter()
            .map(|g| match g {
                Value::String(s) => Some(s),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()?,
        Some(_) => return None,
    };
    Some(FunderAck::new(name, grants))
}

/// Keeps the publications that satisfy every predicate of `cfg`.
pub fn filter_corpus(corpus: Corpus, cfg: &CorpusConfig) -> Corpus {
    let kept = corpus
        .into_publications()
        .into_par_iter()
        .filter(|p| cfg.retains(p))
        .collect();
    Corpus { publications: kept }
}

/// JSON Lines encoding of a corpus in the ingest schema.
pub fn write_jsonl<W: std::io::Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    #[derive(Serialize)]
    struct Funder<'a> {
        name: &'a str,
        grants: &'a [String],
    }
    #[derive(Serialize)]
    struct Record<'a> {
        id: &'a str,
        year: i32,
        doc_type: &'a str,
        discipline: &'a str,
        countries: Vec<&'a str>,
        funders: Vec<Funder<'a>>,
    }
    for p in corpus.iter() {
        let record = Record {
            id: &p.id,
            year: p.year,
            doc_type: &p.doc_type,
            discipline: &p.discipline,
            countries: p.author_countries.iter().map(|c| c.as_str()).collect(),
            funders: p
                .funder_acks
                .iter()
                .map(|f| Funder {
                    name: &f.raw_name,
                    grants: &f.grant_ids,
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &record).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
