//! Country identifiers, the built-in gazetteer, and alias matching.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const BUILTIN_COUNTRIES: &str = include_str!("../data/countries.tsv");
const BUILTIN_ALIASES: &str = include_str!("../data/country_aliases.tsv");
const BUILTIN_EU_MEMBERS: &str = include_str!("../data/eu_members.tsv");

/// Version tag of the bundled country, alias and EU tables.
pub const GAZETTEER_VERSION: &str = "2024.1";

/// ISO 3166-1 alpha-2 code, stored as two uppercase ASCII letters.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountryCode([u8; 2]);

impl CountryCode {
    pub fn new(code: &str) -> Option<Self> {
        match code.as_bytes() {
            [a, b] if a.is_ascii_uppercase() && b.is_ascii_uppercase() => Some(Self([*a, *b])),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &str {
        // Always two ASCII uppercase bytes.
        std::str::from_utf8(&self.0).unwrap()
    }
}

impl fmt::Display for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

impl FromStr for CountryCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CountryCode::new(s).ok_or_else(|| Error::Config(format!("not a country code: {s:?}")))
    }
}

impl Serialize for CountryCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for CountryCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        CountryCode::new(&s).ok_or_else(|| serde::de::Error::custom(format!("bad country code {s:?}")))
    }
}

/// A countable funding source: a single country or the EU as a whole.
///
/// Ordered by its textual form so that "EU" sorts among the country codes.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub enum FundingLabel {
    Country(CountryCode),
    Eu,
}

impl FundingLabel {
    pub fn as_str(&self) -> &str {
        match self {
            FundingLabel::Country(c) => c.as_str(),
            FundingLabel::Eu => "EU",
        }
    }

    pub fn country(&self) -> Option<CountryCode> {
        match self {
            FundingLabel::Country(c) => Some(*c),
            FundingLabel::Eu => None,
        }
    }
}

impl Ord for FundingLabel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.as_str()
            .cmp(other.as_str())
            .then_with(|| matches!(self, FundingLabel::Eu).cmp(&matches!(other, FundingLabel::Eu)))
    }
}

impl PartialOrd for FundingLabel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for FundingLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for FundingLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FundingLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "EU" {
            Ok(FundingLabel::Eu)
        } else {
            s.parse().map(FundingLabel::Country)
        }
    }
}

impl From<CountryCode> for FundingLabel {
    fn from(c: CountryCode) -> Self {
        FundingLabel::Country(c)
    }
}

#[derive(Debug, Clone)]
pub struct CountryInfo {
    pub name: String,
    pub continent: String,
}

/// The set of known country codes with display names and continents.
#[derive(Debug, Clone)]
pub struct CountryTable {
    entries: BTreeMap<CountryCode, CountryInfo>,
}

impl CountryTable {
    pub fn builtin() -> &'static CountryTable {
        static TABLE: OnceLock<CountryTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            CountryTable::from_tsv(BUILTIN_COUNTRIES, "countries.tsv").expect("bundled country table")
        })
    }

    /// Rows are `code<TAB>name<TAB>continent`; `#` lines are comments.
    pub fn from_tsv(text: &str, source_name: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (line_no, fields) in tsv_rows(text) {
            let [code, name, continent] = fields[..] else {
                return Err(Error::table(source_name, line_no, "expected 3 columns"));
            };
            let code = CountryCode::new(code)
                .ok_or_else(|| Error::table(source_name, line_no, format!("bad code {code:?}")))?;
            let info = CountryInfo {
                name: name.to_owned(),
                continent: continent.to_owned(),
            };
            if entries.insert(code, info).is_some() {
                return Err(Error::table(source_name, line_no, format!("duplicate code {code}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn contains(&self, code: CountryCode) -> bool {
        self.entries.contains_key(&code)
    }

    pub fn get(&self, code: CountryCode) -> Option<&CountryInfo> {
        self.entries.get(&code)
    }

    pub fn codes(&self) -> impl Iterator<Item = CountryCode> + '_ {
        self.entries.keys().copied()
    }

    /// Parses `code` leniently (any case) and checks it is a known country.
    pub fn parse_code(&self, code: &str) -> Option<CountryCode> {
        let code = CountryCode::new(&code.trim().to_ascii_uppercase())?;
        self.contains(code).then_some(code)
    }

    pub fn continent_map(&self) -> BTreeMap<CountryCode, String> {
        self.entries
            .iter()
            .map(|(code, info)| (*code, info.continent.clone()))
            .collect()
    }
}

/// Parses a `code<TAB>continent` table.
pub fn parse_continent_map(
    text: &str,
    source_name: &str,
    countries: &CountryTable,
) -> Result<BTreeMap<CountryCode, String>> {
    let mut out = BTreeMap::new();
    for (line_no, fields) in tsv_rows(text) {
        let [code, continent] = fields[..] else {
            return Err(Error::table(source_name, line_no, "expected 2 columns"));
        };
        let code = countries
            .parse_code(code)
            .ok_or_else(|| Error::table(source_name, line_no, format!("unknown country {code:?}")))?;
        out.insert(code, continent.to_owned());
    }
    Ok(out)
}

pub fn builtin_eu_members() -> BTreeSet<CountryCode> {
    parse_code_list(BUILTIN_EU_MEMBERS, "eu_members.tsv", CountryTable::builtin())
        .expect("bundled EU member table")
}

/// One code per line.
pub fn parse_code_list(
    text: &str,
    source_name: &str,
    countries: &CountryTable,
) -> Result<BTreeSet<CountryCode>> {
    let mut out = BTreeSet::new();
    for (line_no, fields) in tsv_rows(text) {
        let code = countries
            .parse_code(fields[0])
            .ok_or_else(|| Error::table(source_name, line_no, format!("unknown country {:?}", fields[0])))?;
        out.insert(code);
    }
    Ok(out)
}

/// Splits a normalized name into word tokens on every non-alphanumeric character.
pub fn word_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Outcome of scanning a name for country aliases.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AliasMatch {
    pub countries: BTreeSet<CountryCode>,
    pub eu: bool,
}

/// Maps normalized alias phrases to country codes and recognizes EU tokens.
#[derive(Debug, Clone)]
pub struct CountryAliasTable {
    aliases: HashMap<String, CountryCode>,
    max_tokens: usize,
    eu_tokens: HashSet<String>,
    countries: CountryTable,
}

impl CountryAliasTable {
    pub const DEFAULT_EU_TOKENS: [&'static str; 2] = ["eu", "european"];

    pub fn builtin() -> CountryAliasTable {
        Self::from_tsv(BUILTIN_ALIASES, "country_aliases.tsv", CountryTable::builtin())
            .expect("bundled alias table")
    }

    /// Rows are `alias<TAB>code`. An alias mapping to two different codes is an error.
    pub fn from_tsv(text: &str, source_name: &str, countries: &CountryTable) -> Result<Self> {
        let mut table = Self {
            aliases: HashMap::new(),
            max_tokens: 0,
            eu_tokens: Self::DEFAULT_EU_TOKENS.iter().map(|s| s.to_string()).collect(),
            countries: countries.clone(),
        };
        for (line_no, fields) in tsv_rows(text) {
            let [alias, code] = fields[..] else {
                return Err(Error::table(source_name, line_no, "expected 2 columns"));
            };
            let code = countries
                .parse_code(code)
                .ok_or_else(|| Error::table(source_name, line_no, format!("unknown country {code:?}")))?;
            table
                .insert(alias, code)
                .map_err(|msg| Error::table(source_name, line_no, msg))?;
        }
        Ok(table)
    }

    /// Adds an alias, rejecting a conflicting mapping.
    pub fn insert(&mut self, alias: &str, code: CountryCode) -> Result<(), String> {
        let tokens = word_tokens(alias);
        if tokens.is_empty() {
            return Err(format!("alias {alias:?} has no word tokens"));
        }
        let key = tokens.join(" ");
        if let Some(existing) = self.aliases.get(&key) {
            if *existing != code {
                return Err(format!("alias {key:?} maps to both {existing} and {code}"));
            }
        }
        self.max_tokens = self.max_tokens.max(tokens.len());
        self.aliases.insert(key, code);
        Ok(())
    }

    pub fn set_eu_tokens<I: IntoIterator<Item = S>, S: AsRef<str>>(&mut self, tokens: I) {
        self.eu_tokens = tokens.into_iter().map(|t| t.as_ref().to_lowercase()).collect();
    }

    pub fn countries(&self) -> &CountryTable {
        &self.countries
    }

    pub fn len(&self) -> usize {
        self.aliases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aliases.is_empty()
    }

    /// Resolves an affiliation country spelling: a known code in any case, or an alias.
    pub fn lookup_country(&self, spelling: &str) -> Option<CountryCode> {
        if let Some(code) = self.countries.parse_code(spelling) {
            return Some(code);
        }
        let key = word_tokens(spelling).join(" ");
        self.aliases.get(&key).copied()
    }

    /// Scans `name` left to right, taking the longest alias at each word position.
    pub fn scan(&self, name: &str) -> AliasMatch {
        let tokens = word_tokens(name);
        let mut found = AliasMatch::default();
        let mut i = 0;
        while i < tokens.len() {
            if self.eu_tokens.contains(&tokens[i]) {
                found.eu = true;
                i += 1;
                continue;
            }
            let longest = self.max_tokens.min(tokens.len() - i);
            let hit = (1..=longest).rev().find_map(|len| {
                let key = tokens[i..i + len].join(" ");
                self.aliases.get(&key).map(|code| (len, *code))
            });
            match hit {
                Some((len, code)) => {
                    found.countries.insert(code);
                    i += len;
                }
                None => i += 1,
            }
        }
        found
    }
}

/// Non-empty, non-comment rows of a TSV file with 1-based line numbers.
pub(crate) fn tsv_rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split('\t').map(str::trim).collect()))
        }
    })
}
