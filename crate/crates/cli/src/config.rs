//! Layered settings: built-in defaults, then the config file, then
//! `FUNDMAP_<KEY>` environment variables, then command-line flags.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use fundmap_core::{CorpusConfig, DirectionRule, EuMode};
use fundmap_synth::{NameStyle, SynthSpec};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Numeric {
    F64,
    Rational,
}

/// Keys that name files or tune execution; they never enter the config hash.
const UNHASHED: [&str; 7] = [
    "input",
    "out_dir",
    "curated_map",
    "country_aliases",
    "eu_members",
    "continents",
    "threads",
];

fn default_values() -> BTreeMap<&'static str, String> {
    let cfg = CorpusConfig::default();
    let synth = SynthSpec::default();
    let join = |set: &BTreeSet<String>| set.iter().cloned().collect::<Vec<_>>().join(",");
    let styles = synth
        .name_styles
        .iter()
        .map(|s| s.as_str())
        .collect::<Vec<_>>()
        .join(",");
    BTreeMap::from([
        ("input", String::new()),
        ("out_dir", "fundmap-out".to_owned()),
        ("curated_map", String::new()),
        ("country_aliases", String::new()),
        ("eu_members", String::new()),
        ("continents", String::new()),
        ("year_min", cfg.year_min.to_string()),
        ("year_max", cfg.year_max.to_string()),
        ("doc_types", join(&cfg.allowed_doc_types)),
        ("excluded_disciplines", join(&cfg.excluded_disciplines)),
        ("min_funder_frequency", cfg.min_funder_frequency.to_string()),
        ("eu_mode", "foreign".to_owned()),
        ("alpha", "0.05".to_owned()),
        ("direction", "either".to_owned()),
        ("numeric", "f64".to_owned()),
        ("threads", String::new()),
        ("seed", synth.seed.to_string()),
        ("synth_n_pubs", synth.n_pubs.to_string()),
        ("synth_n_countries", synth.n_countries.to_string()),
        ("synth_n_funders", synth.n_funders.to_string()),
        ("synth_n_curated", synth.n_curated.to_string()),
        ("synth_n_ties", synth.n_tie_funders.to_string()),
        ("synth_n_singletons", synth.n_singletons.to_string()),
        ("synth_n_duplicates", synth.n_duplicates.to_string()),
        ("synth_n_malformed", synth.n_malformed.to_string()),
        ("synth_p_funded", synth.p_funded.to_string()),
        ("synth_p_international", synth.p_international_coauthor.to_string()),
        ("synth_p_foreign", synth.p_foreign_funding.to_string()),
        ("synth_p_messy", synth.p_messy.to_string()),
        ("synth_p_noise", synth.p_noise.to_string()),
        ("synth_styles", styles),
    ])
}

/// Flag values that override every other layer.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub eu_mode: Option<String>,
    pub alpha: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct Settings {
    values: BTreeMap<&'static str, String>,
    pub input: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub curated_map: Option<PathBuf>,
    pub country_aliases: Option<PathBuf>,
    pub eu_members: Option<PathBuf>,
    pub continents: Option<PathBuf>,
    /// EU members are filled in once the country table is known.
    pub corpus: CorpusConfig,
    /// Exact decimal alpha as numerator / denominator.
    pub alpha: (u64, u64),
    pub direction: DirectionRule,
    pub numeric: Numeric,
    pub threads: Option<usize>,
    pub synth: SynthSpec,
}

fn parse_config_text(text: &str, source: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "{}:{}: expected key = value",
                source.display(),
                i + 1
            )));
        };
        out.push((key.trim().to_owned(), value.trim().to_owned()));
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse {value:?}")))
}

fn list(value: &str) -> BTreeSet<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

fn path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

/// Exact value of a plain decimal such as `0.05`.
pub fn parse_decimal(text: &str) -> Option<(u64, u64)> {
    let text = text.trim();
    let (whole, frac) = text.split_once('.').unwrap_or((text, ""));
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 18 {
        return None;
    }
    let den = 10u64.checked_pow(frac.len() as u32)?;
    let whole: u64 = if whole.is_empty() { 0 } else { whole.parse().ok()? };
    let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    Some((whole.checked_mul(den)?.checked_add(frac)?, den))
}

impl Settings {
    pub fn load(config: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        Self::load_with_env(config, overrides, |k| std::env::var(k).ok())
    }

    pub fn load_with_env(
        config: Option<&Path>,
        overrides: &Overrides,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<Self> {
        let mut values = default_values();
        if let Some(path) = config {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
            for (key, value) in parse_config_text(&text, path)? {
                match values.get_mut(key.as_str()) {
                    Some(slot) => *slot = value,
                    None => return Err(CliError::Config(format!("unknown config key {key:?}"))),
                }
            }
        }
        for (key, slot) in values.iter_mut() {
            if let Some(v) = env(&format!("FUNDMAP_{}", key.to_ascii_uppercase())) {
                *slot = v.trim().to_owned();
            }
        }
        let mut set = |key: &str, value: String| *values.get_mut(key).expect("known key") = value;
        if let Some(p) = &overrides.input {
            set("input", p.display().to_string());
        }
        if let Some(p) = &overrides.out_dir {
            set("out_dir", p.display().to_string());
        }
        if let Some(n) = overrides.threads {
            set("threads", n.to_string());
        }
        if let Some(m) = &overrides.eu_mode {
            set("eu_mode", m.clone());
        }
        if let Some(a) = &overrides.alpha {
            set("alpha", a.clone());
        }
        if let Some(s) = overrides.seed {
            set("seed", s.to_string());
        }
        Self::from_values(values)
    }

    fn from_values(values: BTreeMap<&'static str, String>) -> Result<Self> {
        let v = |k: &str| values[k].as_str();
        let eu_mode: EuMode = v("eu_mode")
            .parse()
            .map_err(|_| CliError::Config(format!("eu_mode must be foreign or domestic, got {:?}", v("eu_mode"))))?;
        let corpus = CorpusConfig {
            year_min: parse("year_min", v("year_min"))?,
            year_max: parse("year_max", v("year_max"))?,
            allowed_doc_types: list(v("doc_types")),
            excluded_disciplines: list(v("excluded_disciplines")),
            min_funder_frequency: parse("min_funder_frequency", v("min_funder_frequency"))?,
            eu_members: BTreeSet::new(),
            eu_as_domestic: eu_mode == EuMode::Domestic,
        };
        corpus.validate()?;
        if corpus.allowed_doc_types.is_empty() {
            return Err(CliError::Config("doc_types must not be empty".into()));
        }
        let alpha = parse_decimal(v("alpha"))
            .filter(|(n, d)| *n > 0 && n < d)
            .ok_or_else(|| CliError::Config(format!("alpha must be a decimal in (0, 1), got {:?}", v("alpha"))))?;
        let numeric = match v("numeric") {
            "f64" | "float" => Numeric::F64,
            "rational" | "exact" => Numeric::Rational,
            other => return Err(CliError::Config(format!("numeric must be f64 or rational, got {other:?}"))),
        };
        let threads = match v("threads") {
            "" => None,
            t => match parse::<usize>("threads", t)? {
                0 => return Err(CliError::Config("threads must be at least 1".into())),
                n => Some(n),
            },
        };
        let styles = list(v("synth_styles"))
            .iter()
            .map(|s| s.parse::<NameStyle>())
            .collect::<std::result::Result<BTreeSet<_>, _>>()?;
        let synth = SynthSpec {
            seed: parse("seed", v("seed"))?,
            n_countries: parse("synth_n_countries", v("synth_n_countries"))?,
            n_funders: parse("synth_n_funders", v("synth_n_funders"))?,
            n_pubs: parse("synth_n_pubs", v("synth_n_pubs"))?,
            p_funded: parse("synth_p_funded", v("synth_p_funded"))?,
            p_international_coauthor: parse("synth_p_international", v("synth_p_international"))?,
            p_foreign_funding: parse("synth_p_foreign", v("synth_p_foreign"))?,
            name_styles: styles,
            year_min: corpus.year_min,
            year_max: corpus.year_max,
            n_curated: parse("synth_n_curated", v("synth_n_curated"))?,
            n_tie_funders: parse("synth_n_ties", v("synth_n_ties"))?,
            n_singletons: parse("synth_n_singletons", v("synth_n_singletons"))?,
            p_messy: parse("synth_p_messy", v("synth_p_messy"))?,
            p_noise: parse("synth_p_noise", v("synth_p_noise"))?,
            n_duplicates: parse("synth_n_duplicates", v("synth_n_duplicates"))?,
            n_malformed: parse("synth_n_malformed", v("synth_n_malformed"))?,
        };
        Ok(Self {
            input: path(v("input")),
            out_dir: PathBuf::from(v("out_dir")),
            curated_map: path(v("curated_map")),
            country_aliases: path(v("country_aliases")),
            eu_members: path(v("eu_members")),
            continents: path(v("continents")),
            direction: v("direction").parse()?,
            corpus,
            alpha,
            numeric,
            threads,
            synth,
            values,
        })
    }

    /// SHA-256 over every setting that can change an output, in key order.
    pub fn config_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (key, value) in &self.values {
            if !UNHASHED.contains(key) {
                hasher.update(format!("{key}={value}\n").as_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(text: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        fs::write(f.path(), text).unwrap();
        f
    }

    #[test]
    fn layers_override_in_order() {
        let file = write_config("alpha = 0.1\neu_mode = domestic\n# comment\nyear_min=2010\n");
        let env = |k: &str| (k == "FUNDMAP_ALPHA").then(|| "0.2".to_owned());
        let s = Settings::load_with_env(Some(file.path()), &Overrides::default(), env).unwrap();
        assert_eq!(s.alpha, (2, 10));
        assert!(s.corpus.eu_as_domestic);
        assert_eq!(s.corpus.year_min, 2010);
        let flags = Overrides {
            alpha: Some("0.01".into()),
            ..Overrides::default()
        };
        let s = Settings::load_with_env(Some(file.path()), &flags, env).unwrap();
        assert_eq!(s.alpha, (1, 100));
    }

    #[test]
    fn rejects_bad_values() {
        let none = |_: &str| None;
        for text in ["alpha = 1.5", "alpha = 0", "eu_mode = sideways", "bogus = 1", "no equals sign", "threads = 0"] {
            let file = write_config(text);
            let err = Settings::load_with_env(Some(file.path()), &Overrides::default(), none).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}");
        }
    }

    #[test]
    fn hash_ignores_paths_and_threads() {
        let none = |_: &str| None;
        let a = Settings::load_with_env(None, &Overrides::default(), none).unwrap();
        let b = Settings::load_with_env(
            None,
            &Overrides {
                threads: Some(3),
                out_dir: Some("elsewhere".into()),
                ..Overrides::default()
            },
            none,
        )
        .unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        let c = Settings::load_with_env(
            None,
            &Overrides {
                alpha: Some("0.1".into()),
                ..Overrides::default()
            },
            none,
        )
        .unwrap();
        assert_ne!(a.config_hash(), c.config_hash());
    }

    #[test]
    fn decimal_parsing() {
        assert_eq!(parse_decimal("0.05"), Some((5, 100)));
        assert_eq!(parse_decimal(".5"), Some((5, 10)));
        assert_eq!(parse_decimal("1"), Some((1, 1)));
        assert_eq!(parse_decimal("5e-2"), None);
        assert_eq!(parse_decimal("-0.1"), None);
        assert_eq!(parse_decimal("."), None);
    }
}
