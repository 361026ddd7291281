use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::SynthError;
use crate::names::COUNTRY_POOL;

/// How a regular funder's name encodes its country.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NameStyle {
    /// Contains exactly one country name.
    CountryToken,
    /// Contains "european".
    EuToken,
    /// Contains two country names.
    MultiToken,
    /// No country signal; only the authorship of its publications identifies it.
    Opaque,
}

impl NameStyle {
    pub const ALL: [NameStyle; 4] = [
        NameStyle::CountryToken,
        NameStyle::EuToken,
        NameStyle::MultiToken,
        NameStyle::Opaque,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            NameStyle::CountryToken => "country_token",
            NameStyle::EuToken => "eu_token",
            NameStyle::MultiToken => "multi_token",
            NameStyle::Opaque => "opaque",
        }
    }
}

impl fmt::Display for NameStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NameStyle {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, SynthError> {
        let key: String = s.trim().chars().filter(|c| *c != '_').collect::<String>().to_ascii_lowercase();
        NameStyle::ALL
            .into_iter()
            .find(|style| style.as_str().replace('_', "") == key)
            .ok_or_else(|| SynthError::UnknownStyle(s.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_countries: usize,
    /// Regular funders, styled round-robin over `name_styles`.
    pub n_funders: usize,
    /// Regular publications; anchors, ties, noise and duplicates come on top.
    pub n_pubs: usize,
    pub p_funded: f64,
    pub p_international_coauthor: f64,
    pub p_foreign_funding: f64,
    pub name_styles: BTreeSet<NameStyle>,
    pub year_min: i32,
    pub year_max: i32,
    /// Funders listed in the emitted curated map.
    pub n_curated: usize,
    /// Funders acknowledged by equally many publications of two countries.
    pub n_tie_funders: usize,
    /// Names acknowledged exactly once.
    pub n_singletons: usize,
    /// Fraction of mentions written with altered case, spacing or punctuation.
    pub p_messy: f64,
    /// Extra records, relative to `n_pubs`, that the default filters drop.
    pub p_noise: f64,
    pub n_duplicates: usize,
    pub n_malformed: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            n_countries: 24,
            n_funders: 60,
            n_pubs: 10_000,
            p_funded: 0.65,
            p_international_coauthor: 0.25,
            p_foreign_funding: 0.2,
            name_styles: NameStyle::ALL.into_iter().collect(),
            year_min: 2009,
            year_max: 2018,
            n_curated: 8,
            n_tie_funders: 4,
            n_singletons: 20,
            p_messy: 0.15,
            p_noise: 0.02,
            n_duplicates: 5,
            n_malformed: 5,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let probabilities = [
            ("p_funded", self.p_funded),
            ("p_international_coauthor", self.p_international_coauthor),
            ("p_foreign_funding", self.p_foreign_funding),
            ("p_messy", self.p_messy),
            ("p_noise", self.p_noise),
        ];
        for (name, p) in probabilities {
            if !(0.0..=1.0).contains(&p) {
                return Err(SynthError::Spec(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if !(2..=COUNTRY_POOL.len()).contains(&self.n_countries) {
            return Err(SynthError::Spec(format!(
                "n_countries must lie in [2, {}], got {}",
                COUNTRY_POOL.len(),
                self.n_countries
            )));
        }
        if self.n_funders + self.n_curated == 0 && self.p_funded > 0.0 {
            return Err(SynthError::Spec("p_funded > 0 needs at least one funder".into()));
        }
        if self.n_funders > 0 && self.name_styles.is_empty() {
            return Err(SynthError::Spec("n_funders > 0 needs at least one name style".into()));
        }
        if self.year_min > self.year_max {
            return Err(SynthError::Spec(format!(
                "year_min {} exceeds year_max {}",
                self.year_min, self.year_max
            )));
        }
        Ok(())
    }
}
