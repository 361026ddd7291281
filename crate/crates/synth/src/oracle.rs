//! Brute-force recomputation of every pipeline aggregate.
//!
//! Deliberately naive: nested scans over the publication list, no indexes and
//! nothing borrowed from the pipeline crates. Funder labels come from the
//! planted truth rather than a resolver.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use crate::error::SynthError;
use crate::generate::Record;
use crate::names::{DOC_TYPES, EU_MEMBERS, EXCLUDED_DISCIPLINES};

pub trait OracleNum:
    Clone + PartialOrd + Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    fn ratio(num: u64, den: u64) -> Self;
    fn ln(&self) -> Self;
    fn to_f64(&self) -> f64;
}

impl OracleNum for f64 {
    fn ratio(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }

    fn ln(&self) -> Self {
        f64::ln(*self)
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl OracleNum for BigRational {
    fn ratio(num: u64, den: u64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    /// Logarithms are taken in f64 and read back exactly.
    fn ln(&self) -> Self {
        let x = ToPrimitive::to_f64(self).expect("finite ratio");
        BigRational::from_float(x.ln()).expect("finite logarithm")
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
    Either,
}

#[derive(Debug, Clone)]
pub struct OracleParams<N> {
    pub year_min: i32,
    pub year_max: i32,
    pub doc_types: Vec<String>,
    pub excluded_disciplines: Vec<String>,
    pub eu_members: Vec<String>,
    /// EU funding counts as own funding for member countries.
    pub eu_domestic: bool,
    pub alpha: N,
    pub direction: Direction,
}

impl<N: OracleNum> Default for OracleParams<N> {
    fn default() -> Self {
        Self {
            year_min: 2009,
            year_max: 2018,
            doc_types: DOC_TYPES.iter().map(|s| s.to_string()).collect(),
            excluded_disciplines: EXCLUDED_DISCIPLINES.iter().map(|s| s.to_string()).collect(),
            eu_members: EU_MEMBERS.iter().map(|s| s.to_string()).collect(),
            eu_domestic: false,
            alpha: N::ratio(1, 20),
            direction: Direction::Either,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShareEntry<N> {
    pub year: i32,
    pub label: String,
    pub share: N,
    pub funded: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceEntry<N> {
    pub year: i32,
    pub subset: &'static str,
    pub publications: u64,
    pub funded: N,
    pub single: N,
    pub multi: N,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioEntry<N> {
    pub country: String,
    pub m_c: u64,
    /// Not funded, domestic, co-funded, foreign.
    pub counts: [u64; 4],
    pub intensity: N,
    pub exclusive_all: N,
    pub exclusive_funded: Option<N>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpactEntry<N> {
    /// `None` for the all-international scenario.
    pub funder: Option<String>,
    pub recipient: String,
    pub reduction: N,
    pub kl: Option<N>,
    pub self_row: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeEntry<N> {
    pub source: String,
    pub target: String,
    pub weight: N,
    pub alpha_out: N,
    pub alpha_in: N,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleMetrics<N> {
    pub publications: usize,
    pub shares: Vec<ShareEntry<N>>,
    pub international_shares: Vec<ShareEntry<N>>,
    pub incidence: Vec<IncidenceEntry<N>>,
    pub portfolio: Vec<PortfolioEntry<N>>,
    pub international_removal: Vec<ImpactEntry<N>>,
    /// Funder-major over (funder, recipient).
    pub matrix: Vec<ImpactEntry<N>>,
    pub edges: Vec<EdgeEntry<N>>,
    pub top_funder_network: BTreeMap<String, String>,
    pub top_funder_backbone: BTreeMap<String, String>,
}

struct Pub {
    year: i32,
    discipline: String,
    authors: Vec<String>,
    /// Countable labels with their instance counts.
    labels: Vec<(String, u64)>,
}

impl Pub {
    fn total(&self) -> u64 {
        self.labels.iter().map(|(_, n)| n).sum()
    }

    fn count(&self, label: &str) -> u64 {
        for (l, n) in &self.labels {
            if l == label {
                return *n;
            }
        }
        0
    }

    fn has_author(&self, c: &str) -> bool {
        self.authors.iter().any(|a| a == c)
    }
}

/// Lowercase, single spaces, no surrounding whitespace or ASCII punctuation.
pub fn canonical_name(raw: &str) -> String {
    let mut words: Vec<String> = Vec::new();
    let mut current = String::new();
    for ch in raw.chars().flat_map(char::to_lowercase) {
        if ch.is_whitespace() {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
        } else {
            current.push(ch);
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    let joined = words.join(" ");
    let chars: Vec<char> = joined.chars().collect();
    let strip = |c: &char| c.is_whitespace() || c.is_ascii_punctuation();
    let mut start = 0;
    while start < chars.len() && strip(&chars[start]) {
        start += 1;
    }
    let mut end = chars.len();
    while end > start && strip(&chars[end - 1]) {
        end -= 1;
    }
    chars[start..end].iter().collect()
}

fn is_countable(label: &str) -> bool {
    label == "EU" || (label.len() == 2 && label.chars().all(|c| c.is_ascii_uppercase()))
}

fn prepare<N>(
    records: &[Record],
    truth: &BTreeMap<String, String>,
    params: &OracleParams<N>,
) -> Result<Vec<Pub>, SynthError> {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut out = Vec::new();
    for r in records {
        if !seen.insert(r.id.as_str()) {
            continue;
        }
        let doc_type = r.doc_type.trim();
        let discipline = r.discipline.trim();
        let mut authors: Vec<String> = Vec::new();
        for c in &r.countries {
            let c = c.trim().to_ascii_uppercase();
            if !authors.contains(&c) {
                authors.push(c);
            }
        }
        authors.sort();
        let keep = r.year >= params.year_min
            && r.year <= params.year_max
            && params.doc_types.iter().any(|t| t.eq_ignore_ascii_case(doc_type))
            && !discipline.is_empty()
            && !params.excluded_disciplines.iter().any(|d| d.eq_ignore_ascii_case(discipline))
            && !authors.is_empty();
        if !keep {
            continue;
        }
        let mut instances: Vec<(String, Option<String>)> = Vec::new();
        for m in &r.funders {
            let name = canonical_name(&m.name);
            let mut grants: Vec<String> = Vec::new();
            for g in &m.grants {
                let g = g.trim();
                if !g.is_empty() {
                    grants.push(g.to_owned());
                }
            }
            let units: Vec<Option<String>> = if grants.is_empty() {
                vec![None]
            } else {
                grants.into_iter().map(Some).collect()
            };
            for u in units {
                let key = (name.clone(), u);
                if !instances.contains(&key) {
                    instances.push(key);
                }
            }
        }
        let mut labels: Vec<(String, u64)> = Vec::new();
        for (name, _) in &instances {
            let label = truth
                .get(name)
                .ok_or_else(|| SynthError::MissingTruth(name.clone()))?;
            if !is_countable(label) {
                continue;
            }
            match labels.iter_mut().find(|(l, _)| l == label) {
                Some((_, n)) => *n += 1,
                None => labels.push((label.clone(), 1)),
            }
        }
        labels.sort();
        out.push(Pub {
            year: r.year,
            discipline: discipline.to_owned(),
            authors,
            labels,
        });
    }
    Ok(out)
}

fn own<N>(label: &str, country: &str, params: &OracleParams<N>) -> bool {
    label == country || (label == "EU" && params.eu_domestic && params.eu_members.iter().any(|m| m == country))
}

fn zero<N: OracleNum>() -> N {
    N::ratio(0, 1)
}

fn frac<N: OracleNum>(num: u64, den: u64) -> N {
    if den == 0 {
        zero()
    } else {
        N::ratio(num, den)
    }
}

/// D(counterfactual || actual), `None` when nothing remains.
fn divergence<N: OracleNum>(counterfactual: &[u64], actual: &[u64]) -> Option<N> {
    let cf_total: u64 = counterfactual.iter().sum();
    let actual_total: u64 = actual.iter().sum();
    if cf_total == 0 {
        return None;
    }
    let mut d = zero::<N>();
    for x in 0..counterfactual.len() {
        if counterfactual[x] == 0 {
            continue;
        }
        let p = N::ratio(counterfactual[x], cf_total);
        let q = N::ratio(actual[x], actual_total);
        d = d + p.clone() * (p / q).ln();
    }
    if d < zero() {
        d = zero();
    }
    Some(d)
}

fn shares<N: OracleNum>(pubs: &[Pub], include: impl Fn(&Pub) -> bool) -> Vec<ShareEntry<N>> {
    let mut years: Vec<i32> = pubs.iter().map(|p| p.year).collect();
    years.sort();
    years.dedup();
    let mut out = Vec::new();
    for year in years {
        let mut funded = 0u64;
        let mut labels: Vec<String> = Vec::new();
        for p in pubs {
            if p.year == year && include(p) && p.total() > 0 {
                funded += 1;
                for (l, _) in &p.labels {
                    if !labels.contains(l) {
                        labels.push(l.clone());
                    }
                }
            }
        }
        labels.sort();
        for label in labels {
            let mut sum = zero::<N>();
            for p in pubs {
                if p.year == year && include(p) && p.total() > 0 {
                    sum = sum + N::ratio(p.count(&label), p.total());
                }
            }
            out.push(ShareEntry {
                year,
                label,
                share: sum / N::ratio(funded, 1),
                funded,
            });
        }
    }
    out
}

pub fn oracle_metrics<N: OracleNum>(
    records: &[Record],
    truth: &BTreeMap<String, String>,
    params: &OracleParams<N>,
) -> Result<OracleMetrics<N>, SynthError> {
    let pubs = prepare(records, truth, params)?;

    let mut years: Vec<i32> = pubs.iter().map(|p| p.year).collect();
    years.sort();
    years.dedup();
    let mut countries: Vec<String> = pubs.iter().flat_map(|p| p.authors.clone()).collect();
    countries.sort();
    countries.dedup();
    let mut disciplines: Vec<String> = pubs.iter().map(|p| p.discipline.clone()).collect();
    disciplines.sort();
    disciplines.dedup();
    let mut funders: Vec<String> = pubs.iter().flat_map(|p| p.labels.iter().map(|(l, _)| l.clone())).collect();
    funders.sort();
    funders.dedup();
    let slot = |p: &Pub| disciplines.iter().position(|d| *d == p.discipline).unwrap();

    let mut incidence = Vec::new();
    for &year in &years {
        for subset in ["all", "international", "domestic"] {
            let (mut n, mut funded, mut single, mut multi) = (0, 0, 0, 0);
            for p in &pubs {
                let member = match subset {
                    "all" => true,
                    "international" => p.authors.len() >= 2,
                    _ => p.authors.len() == 1,
                };
                if p.year != year || !member {
                    continue;
                }
                n += 1;
                if !p.labels.is_empty() {
                    funded += 1;
                }
                if p.labels.len() == 1 {
                    single += 1;
                }
                if p.labels.len() >= 2 {
                    multi += 1;
                }
            }
            incidence.push(IncidenceEntry {
                year,
                subset,
                publications: n,
                funded: frac(funded, n),
                single: frac(single, n),
                multi: frac(multi, n),
            });
        }
    }

    let mut portfolio = Vec::new();
    for c in &countries {
        let mut counts = [0u64; 4];
        for p in &pubs {
            if !p.has_author(c) {
                continue;
            }
            let has_own = p.labels.iter().any(|(l, _)| own(l, c, params));
            let has_other = p.labels.iter().any(|(l, _)| !own(l, c, params));
            let class = match (has_own, has_other) {
                (false, false) => 0,
                (true, false) => 1,
                (true, true) => 2,
                (false, true) => 3,
            };
            counts[class] += 1;
        }
        let m_c: u64 = counts.iter().sum();
        let funded = m_c - counts[0];
        portfolio.push(PortfolioEntry {
            country: c.clone(),
            m_c,
            counts,
            intensity: frac(funded, m_c),
            exclusive_all: frac(counts[1], m_c),
            exclusive_funded: if funded > 0 { Some(N::ratio(counts[1], funded)) } else { None },
        });
    }

    let mut international_removal = Vec::new();
    for c in &countries {
        let mut actual = vec![0u64; disciplines.len()];
        let mut kept = vec![0u64; disciplines.len()];
        for p in &pubs {
            if !p.has_author(c) {
                continue;
            }
            actual[slot(p)] += 1;
            if !p.labels.iter().any(|(l, _)| !own(l, c, params)) {
                kept[slot(p)] += 1;
            }
        }
        let total: u64 = actual.iter().sum();
        let remaining: u64 = kept.iter().sum();
        international_removal.push(ImpactEntry {
            funder: None,
            recipient: c.clone(),
            reduction: N::ratio(total - remaining, total),
            kl: divergence(&kept, &actual),
            self_row: false,
        });
    }

    let mut matrix = Vec::new();
    for f in &funders {
        for c in &countries {
            let mut actual = vec![0u64; disciplines.len()];
            let mut kept = vec![0u64; disciplines.len()];
            for p in &pubs {
                if !p.has_author(c) {
                    continue;
                }
                actual[slot(p)] += 1;
                let removed = p.count(f) > 0 && p.authors.iter().any(|a| !own(f, a, params));
                if !removed {
                    kept[slot(p)] += 1;
                }
            }
            let total: u64 = actual.iter().sum();
            let remaining: u64 = kept.iter().sum();
            matrix.push(ImpactEntry {
                funder: Some(f.clone()),
                recipient: c.clone(),
                reduction: N::ratio(total - remaining, total),
                kl: divergence(&kept, &actual),
                self_row: f == c,
            });
        }
    }

    let network: Vec<(String, String, N)> = matrix
        .iter()
        .filter(|e| !e.self_row && e.reduction > zero())
        .map(|e| (e.funder.clone().unwrap(), e.recipient.clone(), e.reduction.clone()))
        .collect();
    let mut edges = Vec::new();
    for (s, t, w) in &network {
        let (mut out_sum, mut out_k, mut in_sum, mut in_k) = (zero::<N>(), 0, zero::<N>(), 0);
        for (s2, t2, w2) in &network {
            if s2 == s {
                out_sum = out_sum + w2.clone();
                out_k += 1;
            }
            if t2 == t {
                in_sum = in_sum + w2.clone();
                in_k += 1;
            }
        }
        let significance = |strength: N, k: usize| {
            let one = N::ratio(1, 1);
            let p = w.clone() / strength;
            let mut a = one.clone();
            for _ in 1..k {
                a = a * (one.clone() - p.clone());
            }
            a
        };
        let alpha_out = significance(out_sum, out_k);
        let alpha_in = significance(in_sum, in_k);
        let keep_out = out_k == 1 || alpha_out < params.alpha;
        let keep_in = in_k == 1 || alpha_in < params.alpha;
        let kept = match params.direction {
            Direction::Out => keep_out,
            Direction::In => keep_in,
            Direction::Either => keep_out || keep_in,
        };
        edges.push(EdgeEntry {
            source: s.clone(),
            target: t.clone(),
            weight: w.clone(),
            alpha_out,
            alpha_in,
            kept,
        });
    }

    let top = |only_kept: bool| {
        let mut best: BTreeMap<String, (String, N)> = BTreeMap::new();
        for e in &edges {
            if only_kept && !e.kept {
                continue;
            }
            let replace = match best.get(&e.target) {
                None => true,
                Some((s, w)) => e.weight > *w || (e.weight == *w && e.source < *s),
            };
            if replace {
                best.insert(e.target.clone(), (e.source.clone(), e.weight.clone()));
            }
        }
        best.into_iter().map(|(t, (s, _))| (t, s)).collect::<BTreeMap<_, _>>()
    };
    let top_funder_network = top(false);
    let top_funder_backbone = top(true);

    Ok(OracleMetrics {
        publications: pubs.len(),
        shares: shares(&pubs, |_| true),
        international_shares: shares(&pubs, |p| p.authors.len() >= 2),
        incidence,
        portfolio,
        international_removal,
        matrix,
        edges,
        top_funder_network,
        top_funder_backbone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::Mention;

    fn record(id: &str, countries: &[&str], funders: &[&str], discipline: &str) -> Record {
        Record {
            id: id.into(),
            year: 2015,
            doc_type: "Article".into(),
            discipline: discipline.into(),
            countries: countries.iter().map(|c| c.to_string()).collect(),
            funders: funders
                .iter()
                .map(|f| Mention {
                    name: f.to_string(),
                    grants: vec![],
                })
                .collect(),
        }
    }

    fn truth(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn canonical_name_examples() {
        assert_eq!(canonical_name("  NSF of China "), "nsf of china");
        assert_eq!(canonical_name("NERC"), "nerc");
        assert_eq!(canonical_name("\"Wellcome   Trust\","), "wellcome trust");
        assert_eq!(canonical_name("..."), "");
    }

    #[test]
    fn single_publication_by_hand() {
        let records = vec![record("a", &["US", "CA"], &["nsf", "nserc", "nih"], "Physics")];
        let t = truth(&[("nsf", "US"), ("nserc", "CA"), ("nih", "US")]);
        let m = oracle_metrics::<BigRational>(&records, &t, &OracleParams::default()).unwrap();
        assert_eq!(m.publications, 1);
        let us = m.shares.iter().find(|s| s.label == "US").unwrap();
        assert_eq!(us.share, BigRational::ratio(2, 3));
        let ca = &m.portfolio[0];
        assert_eq!(ca.country, "CA");
        assert_eq!(ca.counts, [0, 0, 1, 0]);
        // Both funders fund a foreign coauthor, so each removes the publication for both countries.
        assert!(m.matrix.iter().all(|e| e.reduction == BigRational::ratio(1, 1) && e.kl.is_none()));
        assert!(m.edges.is_empty() || m.edges.iter().all(|e| e.kept));
    }

    #[test]
    fn adversarial_corpus_has_nothing_countable() {
        let records = vec![
            record("a", &["US"], &["tie fund", "binational fund"], "Physics"),
            record("b", &["CN"], &["tie fund", "binational fund"], "Physics"),
        ];
        let t = truth(&[("tie fund", "UNRESOLVED"), ("binational fund", "MULTI")]);
        let m = oracle_metrics::<f64>(&records, &t, &OracleParams::default()).unwrap();
        assert!(m.shares.is_empty());
        assert!(m.matrix.is_empty());
        assert!(m.portfolio.iter().all(|p| p.counts == [1, 0, 0, 0]));
    }

    #[test]
    fn duplicate_ids_keep_the_first() {
        let records = vec![
            record("a", &["US"], &["nsf"], "Physics"),
            record("a", &["US"], &[], "Biology"),
        ];
        let m = oracle_metrics::<f64>(&records, &truth(&[("nsf", "US")]), &OracleParams::default()).unwrap();
        assert_eq!(m.publications, 1);
        assert_eq!(m.portfolio[0].counts, [0, 1, 0, 0]);
    }

    #[test]
    fn missing_truth_is_reported() {
        let records = vec![record("a", &["US"], &["unknown"], "Physics")];
        assert!(matches!(
            oracle_metrics::<f64>(&records, &BTreeMap::new(), &OracleParams::default()),
            Err(SynthError::MissingTruth(_))
        ));
    }
}
