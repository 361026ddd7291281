use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::SynthError;
use crate::names::{self, WordSource, COUNTRY_POOL, DISCIPLINES, DOC_TYPES, EXCLUDED_DISCIPLINES, REJECTED_DOC_TYPES};
use crate::spec::{NameStyle, SynthSpec};

/// One input record in the corpus line format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub year: i32,
    pub doc_type: String,
    pub discipline: String,
    pub countries: Vec<String>,
    pub funders: Vec<Mention>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub name: String,
    pub grants: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum FunderKind {
    CountryToken,
    EuToken,
    MultiToken,
    Opaque,
    Curated,
    Tie,
    Singleton,
}

/// Planted resolution of one funder name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TruthFunder {
    pub norm_name: String,
    pub kind: FunderKind,
    /// Mentions across all records.
    pub frequency: u64,
    /// Country code, `EU`, `MULTI`, `UNRESOLVED` or `EXCLUDED`.
    pub assignment: String,
    pub method: &'static str,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    /// Keyed by canonical (normalized) name.
    pub funders: BTreeMap<String, TruthFunder>,
    /// Curated map entries: normalized name to assignment.
    pub curated: BTreeMap<String, String>,
}

impl GroundTruth {
    pub fn assignment(&self, norm_name: &str) -> Option<&str> {
        self.funders.get(norm_name).map(|f| f.assignment.as_str())
    }

    pub fn assignments(&self) -> BTreeMap<String, String> {
        self.funders
            .iter()
            .map(|(k, f)| (k.clone(), f.assignment.clone()))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub spec: SynthSpec,
    /// Well-formed records in file order, including noise and duplicate ids.
    pub records: Vec<Record>,
    /// File lines: serialized records interleaved with malformed lines.
    pub lines: Vec<String>,
    pub truth: GroundTruth,
}

impl SynthCorpus {
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for line in &self.lines {
            out.write_all(line.as_bytes())?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("records are UTF-8")
    }

    /// Curated map in `norm_name<TAB>assignment` form.
    pub fn curated_tsv(&self) -> String {
        let mut out = String::from("# norm_name\tassignment\n");
        for (name, assignment) in &self.truth.curated {
            out.push_str(&format!("{name}\t{assignment}\n"));
        }
        out
    }
}

struct Planned {
    name: String,
    kind: FunderKind,
    /// Country whose authors may receive this funder as domestic funding.
    home: Option<usize>,
    assignment: String,
    method: &'static str,
    /// May fund publications without any author from `home`.
    foreign_ok: bool,
}

struct Draft {
    year: i32,
    doc_type: String,
    discipline: String,
    countries: Vec<String>,
    funders: Vec<Mention>,
}

struct Generator<'a> {
    spec: &'a SynthSpec,
    rng: ChaCha8Rng,
    words: WordSource,
    country_pick: WeightedIndex<f64>,
    /// Per country, a discipline distribution so that research profiles differ.
    discipline_pick: Vec<WeightedIndex<f64>>,
    mentions: BTreeMap<String, u64>,
}

pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_countries;
    let weights: Vec<f64> = (0..n).map(|i| 1.0 / ((i + 1) as f64).powf(0.8)).collect();
    let discipline_pick = (0..n)
        .map(|_| {
            let w: Vec<f64> = DISCIPLINES.iter().map(|_| rng.gen_range(0.2..1.0)).collect();
            WeightedIndex::new(w).expect("positive weights")
        })
        .collect();
    let mut g = Generator {
        spec,
        rng,
        words: WordSource::default(),
        country_pick: WeightedIndex::new(weights).expect("positive weights"),
        discipline_pick,
        mentions: BTreeMap::new(),
    };

    let mut planned = g.plan_regular_funders();
    planned.extend(g.plan_curated_funders());
    let mut drafts = g.regular_publications(&planned);
    drafts.extend(g.anchor_publications(&planned));
    let ties = g.plan_ties();
    for (tie, a, b, m) in &ties {
        for country in [a, b] {
            for _ in 0..*m {
                let mention = g.mention(&tie.name);
                let mut d = g.draft(vec![*country]);
                d.funders.push(mention);
                drafts.push(d);
            }
        }
    }
    let singletons = g.plan_singletons();
    for s in &singletons {
        let mention = g.mention(&s.name);
        if drafts.is_empty() {
            let lead = g.country_pick.sample(&mut g.rng);
            drafts.push(g.draft(vec![lead]));
        }
        let i = g.rng.gen_range(0..drafts.len());
        drafts[i].funders.push(mention);
    }
    let noise = (spec.p_noise * spec.n_pubs as f64).round() as usize;
    for i in 0..noise {
        let d = g.noise(i);
        drafts.push(d);
    }
    drafts.shuffle(&mut g.rng);

    let mut records: Vec<Record> = drafts
        .into_iter()
        .enumerate()
        .map(|(i, d)| Record {
            id: format!("S{}-{:07}", spec.seed, i),
            year: d.year,
            doc_type: d.doc_type,
            discipline: d.discipline,
            countries: d.countries,
            funders: d.funders,
        })
        .collect();
    g.insert_duplicates(&mut records);
    let lines = g.lines(&records);

    let mut truth = GroundTruth::default();
    let all = planned.iter().chain(ties.iter().map(|t| &t.0)).chain(&singletons);
    for f in all {
        let frequency = g.mentions.get(&f.name).copied().unwrap_or(0);
        if f.kind == FunderKind::Curated {
            truth.curated.insert(f.name.clone(), f.assignment.clone());
        }
        if frequency == 0 {
            continue;
        }
        let (assignment, method) = if frequency < 2 {
            ("EXCLUDED".to_owned(), "frequency_excluded")
        } else {
            (f.assignment.clone(), f.method)
        };
        truth.funders.insert(
            f.name.clone(),
            TruthFunder {
                norm_name: f.name.clone(),
                kind: f.kind,
                frequency,
                assignment,
                method,
            },
        );
    }

    Ok(SynthCorpus {
        spec: spec.clone(),
        records,
        lines,
        truth,
    })
}

impl Generator<'_> {
    fn code(&self, i: usize) -> &'static str {
        COUNTRY_POOL[i].0
    }

    fn other_country(&mut self, not: usize) -> usize {
        loop {
            let c = self.rng.gen_range(0..self.spec.n_countries);
            if c != not {
                return c;
            }
        }
    }

    fn plan_regular_funders(&mut self) -> Vec<Planned> {
        let styles: Vec<NameStyle> = self.spec.name_styles.iter().copied().collect();
        let mut out = Vec::with_capacity(self.spec.n_funders);
        for i in 0..self.spec.n_funders {
            let w = self.words.fresh();
            let template = i / styles.len();
            let planned = match styles[i % styles.len()] {
                NameStyle::CountryToken => {
                    let home = self.rng.gen_range(0..self.spec.n_countries);
                    Planned {
                        name: names::country_token_name(template, COUNTRY_POOL[home].1, &w),
                        kind: FunderKind::CountryToken,
                        home: Some(home),
                        assignment: self.code(home).to_owned(),
                        method: "name_pattern",
                        foreign_ok: true,
                    }
                }
                NameStyle::EuToken => Planned {
                    name: names::eu_name(template, &w),
                    kind: FunderKind::EuToken,
                    home: None,
                    assignment: "EU".to_owned(),
                    method: "name_pattern",
                    foreign_ok: true,
                },
                NameStyle::MultiToken => {
                    let a = self.rng.gen_range(0..self.spec.n_countries);
                    let b = self.other_country(a);
                    Planned {
                        name: names::multi_name(template, COUNTRY_POOL[a].1, COUNTRY_POOL[b].1, &w),
                        kind: FunderKind::MultiToken,
                        home: None,
                        assignment: "MULTI".to_owned(),
                        method: "name_pattern",
                        foreign_ok: true,
                    }
                }
                NameStyle::Opaque => {
                    let home = self.rng.gen_range(0..self.spec.n_countries);
                    Planned {
                        name: names::opaque_name(template, &w),
                        kind: FunderKind::Opaque,
                        home: Some(home),
                        assignment: self.code(home).to_owned(),
                        method: "authorship_majority",
                        foreign_ok: false,
                    }
                }
            };
            out.push(planned);
        }
        out
    }

    /// Cycles through a plain country entry, one whose name names another country, EU and MULTI.
    fn plan_curated_funders(&mut self) -> Vec<Planned> {
        (0..self.spec.n_curated)
            .map(|i| {
                let w = self.words.fresh();
                let home = self.rng.gen_range(0..self.spec.n_countries);
                let (name, home, assignment) = match i % 4 {
                    0 => (format!("{w} council for research"), Some(home), self.code(home).to_owned()),
                    1 => {
                        let decoy = self.other_country(home);
                        (
                            format!("{} {w} institute", COUNTRY_POOL[decoy].1),
                            Some(home),
                            self.code(home).to_owned(),
                        )
                    }
                    2 => (format!("{w} framework programme"), None, "EU".to_owned()),
                    _ => (format!("{w} international consortium"), None, "MULTI".to_owned()),
                };
                Planned {
                    name,
                    kind: FunderKind::Curated,
                    home,
                    assignment,
                    method: "curated",
                    foreign_ok: true,
                }
            })
            .collect()
    }

    fn plan_ties(&mut self) -> Vec<(Planned, usize, usize, usize)> {
        (0..self.spec.n_tie_funders)
            .map(|_| {
                let name = format!("{} {} consortium", self.words.fresh(), self.words.fresh());
                let a = self.rng.gen_range(0..self.spec.n_countries);
                let b = self.other_country(a);
                let m = self.rng.gen_range(1..=3);
                let planned = Planned {
                    name,
                    kind: FunderKind::Tie,
                    home: None,
                    assignment: "UNRESOLVED".to_owned(),
                    method: "tie_unresolved",
                    foreign_ok: false,
                };
                (planned, a, b, m)
            })
            .collect()
    }

    fn plan_singletons(&mut self) -> Vec<Planned> {
        (0..self.spec.n_singletons)
            .map(|i| {
                let w = self.words.fresh();
                let name = match i % 3 {
                    0 => format!("{w} memorial trust"),
                    1 => format!("{} {w} society", COUNTRY_POOL[i % self.spec.n_countries].1),
                    _ => format!("european {w} network"),
                };
                Planned {
                    name,
                    kind: FunderKind::Singleton,
                    home: None,
                    assignment: "EXCLUDED".to_owned(),
                    method: "frequency_excluded",
                    foreign_ok: false,
                }
            })
            .collect()
    }

    fn mention(&mut self, canonical: &str) -> Mention {
        *self.mentions.entry(canonical.to_owned()).or_default() += 1;
        let name = if self.rng.gen_bool(self.spec.p_messy) {
            names::messy(canonical, &mut self.rng)
        } else {
            canonical.to_owned()
        };
        let n_grants = match self.rng.gen_range(0..10) {
            0..=3 => 0,
            4..=7 => 1,
            _ => 2,
        };
        let mut grants: Vec<String> = (0..n_grants)
            .map(|_| format!("GR-{}", self.rng.gen_range(0..40)))
            .collect();
        if self.rng.gen_bool(0.03) {
            grants.push(" ".to_owned());
        }
        if !grants.is_empty() && self.rng.gen_bool(0.05) {
            let g = format!(" {} ", grants[0]);
            grants.push(g);
        }
        Mention { name, grants }
    }

    fn draft(&mut self, authors: Vec<usize>) -> Draft {
        let lead = authors[0];
        let discipline = DISCIPLINES[self.discipline_pick[lead].sample(&mut self.rng)].to_owned();
        let doc_type = DOC_TYPES[match self.rng.gen_range(0..20) {
            0..=15 => 0,
            16..=18 => 1,
            _ => 2,
        }];
        let doc_type = if self.rng.gen_bool(self.spec.p_messy / 4.0) {
            doc_type.to_lowercase()
        } else {
            doc_type.to_owned()
        };
        let mut countries: Vec<String> = authors.iter().map(|c| self.code(*c).to_owned()).collect();
        if self.rng.gen_bool(0.02) {
            countries.push(countries[0].clone());
        }
        if self.rng.gen_bool(0.02) {
            countries[0] = countries[0].to_lowercase();
        }
        Draft {
            year: self.rng.gen_range(self.spec.year_min..=self.spec.year_max),
            doc_type,
            discipline,
            countries,
            funders: Vec::new(),
        }
    }

    fn authors(&mut self) -> Vec<usize> {
        let lead = self.country_pick.sample(&mut self.rng);
        let mut authors = vec![lead];
        if self.rng.gen_bool(self.spec.p_international_coauthor) {
            let extra = self.rng.gen_range(1..=2usize.min(self.spec.n_countries - 1));
            while authors.len() < 1 + extra {
                let c = self.country_pick.sample(&mut self.rng);
                if !authors.contains(&c) {
                    authors.push(c);
                }
            }
        }
        authors
    }

    fn regular_publications(&mut self, planned: &[Planned]) -> Vec<Draft> {
        let mut domestic: Vec<Vec<usize>> = vec![Vec::new(); self.spec.n_countries];
        for (i, f) in planned.iter().enumerate() {
            if let Some(home) = f.home {
                domestic[home].push(i);
            }
        }
        let foreign: Vec<usize> = (0..planned.len()).filter(|i| planned[*i].foreign_ok).collect();
        let mut out = Vec::with_capacity(self.spec.n_pubs);
        for _ in 0..self.spec.n_pubs {
            let authors = self.authors();
            let mut d = self.draft(authors.clone());
            if !planned.is_empty() && self.rng.gen_bool(self.spec.p_funded) {
                for _ in 0..self.rng.gen_range(1..=3) {
                    let local: Vec<usize> = authors.iter().flat_map(|a| domestic[*a].iter().copied()).collect();
                    let choice = if !foreign.is_empty() && (local.is_empty() || self.rng.gen_bool(self.spec.p_foreign_funding)) {
                        foreign.choose(&mut self.rng)
                    } else {
                        local.choose(&mut self.rng)
                    };
                    if let Some(&f) = choice {
                        let m = self.mention(&planned[f].name);
                        d.funders.push(m);
                        if self.rng.gen_bool(0.03) {
                            let again = self.mention(&planned[f].name);
                            d.funders.push(again);
                        }
                    }
                }
            }
            out.push(d);
        }
        out
    }

    /// Two single-country publications per opaque funder keep its home country a strict majority.
    fn anchor_publications(&mut self, planned: &[Planned]) -> Vec<Draft> {
        let mut out = Vec::new();
        for f in planned.iter().filter(|f| f.kind == FunderKind::Opaque) {
            let home = f.home.expect("opaque funders have a home");
            for _ in 0..2 {
                let m = self.mention(&f.name);
                let mut d = self.draft(vec![home]);
                d.funders.push(m);
                out.push(d);
            }
        }
        out
    }

    /// A record that the default corpus filters drop; it carries no funders.
    fn noise(&mut self, i: usize) -> Draft {
        let lead = self.country_pick.sample(&mut self.rng);
        let mut d = self.draft(vec![lead]);
        match i % 5 {
            0 => d.year = self.spec.year_min - 1,
            1 => d.year = self.spec.year_max + 1,
            2 => d.doc_type = (*REJECTED_DOC_TYPES.choose(&mut self.rng).unwrap()).to_owned(),
            3 => {
                let excluded = *EXCLUDED_DISCIPLINES.choose(&mut self.rng).unwrap();
                d.discipline = if self.rng.gen_bool(0.5) {
                    excluded.to_lowercase()
                } else {
                    excluded.to_owned()
                };
            }
            _ => d.countries.clear(),
        }
        d
    }

    /// Later copies of earlier ids with different content and no funders.
    fn insert_duplicates(&mut self, records: &mut Vec<Record>) {
        if records.is_empty() {
            return;
        }
        for _ in 0..self.spec.n_duplicates {
            let j = self.rng.gen_range(0..records.len());
            let mut dup = records[j].clone();
            dup.funders.clear();
            dup.discipline = DISCIPLINES[(DISCIPLINES.iter().position(|d| *d == dup.discipline).unwrap_or(0) + 1) % DISCIPLINES.len()]
                .to_owned();
            let at = self.rng.gen_range(j + 1..=records.len());
            records.insert(at, dup);
        }
    }

    fn lines(&mut self, records: &[Record]) -> Vec<String> {
        let mut lines: Vec<String> = records
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialize"))
            .collect();
        for i in 0..self.spec.n_malformed {
            let line = match i % 4 {
                0 => format!("{{\"id\": \"M{i}\", \"year\": 2015, \"doc_type"),
                1 => format!(
                    r#"{{"id":"M{i}","year":"twenty","doc_type":"Article","discipline":"Physics","countries":["US"],"funders":[]}}"#
                ),
                2 => format!(r#"{{"id":"M{i}","year":2015,"doc_type":"Article","discipline":"Physics","funders":[]}}"#),
                _ => format!(
                    r#"{{"id":"M{i}","year":2015,"doc_type":"Article","discipline":"Physics","countries":["XX"],"funders":[]}}"#
                ),
            };
            let at = self.rng.gen_range(0..=lines.len());
            lines.insert(at, line);
        }
        lines
    }
}

/// Distinct author countries per record, for quick inspection of a corpus.
pub fn author_countries(records: &[Record]) -> BTreeSet<String> {
    records
        .iter()
        .flat_map(|r| r.countries.iter().map(|c| c.to_ascii_uppercase()))
        .collect()
}
