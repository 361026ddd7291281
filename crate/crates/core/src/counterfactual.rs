//! Counterfactual removal of internationally funded publications.
//!
//! Two scenario families are supported: a country losing all funding from
//! abroad, and a single funder label stopping all funding of publications with
//! foreign authors. Removal is counted per author country (full counting) and
//! the change in each country's discipline profile is measured with the
//! Kullback-Leibler divergence D(P || Q) in nats, P the counterfactual profile
//! and Q the actual one.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;

use crate::attribution::{FundedCorpus, FundedPublication};
use crate::corpus::EuPolicy;
use crate::country::{CountryCode, FundingLabel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Publication counts of one country per discipline index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResearchProfile {
    pub country: CountryCode,
    pub counts: Vec<u64>,
}

impl ResearchProfile {
    pub fn empty(country: CountryCode, disciplines: usize) -> Self {
        Self {
            country,
            counts: vec![0; disciplines],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Share of publications per discipline; all zero for an empty profile.
    pub fn proportions<S: Scalar>(&self) -> Vec<S> {
        let total = self.total();
        self.counts
            .iter()
            .map(|n| if total == 0 { S::zero() } else { S::from_ratio(*n, total) })
            .collect()
    }

    /// Removes `removed` per discipline. Panics if more is removed than present.
    pub fn minus(&self, removed: &[u64]) -> Self {
        Self {
            country: self.country,
            counts: self
                .counts
                .iter()
                .zip(removed)
                .map(|(n, r)| n.checked_sub(*r).expect("removal exceeds actual count"))
                .collect(),
        }
    }
}

/// D(P || Q) = Σ_x p(x) ln(p(x) / q(x)) with 0 ln 0 = 0.
///
/// Returns `None` when P is empty. Mass of P outside the support of Q is an error.
pub fn kl_divergence<S: Scalar>(p: &ResearchProfile, q: &ResearchProfile) -> Result<Option<S>> {
    if p.counts.len() != q.counts.len() {
        return Err(Error::DisciplineMismatch);
    }
    let (p_total, q_total) = (p.total(), q.total());
    if p_total == 0 {
        return Ok(None);
    }
    let mut divergence = S::zero();
    for (x, (pc, qc)) in p.counts.iter().zip(&q.counts).enumerate() {
        if *pc == 0 {
            continue;
        }
        if *qc == 0 {
            return Err(Error::SupportViolation(format!("discipline #{x}")));
        }
        let p_x = S::from_ratio(*pc, p_total);
        let ratio = S::from_ratio(pc * q_total, p_total * qc);
        divergence = divergence + p_x * ratio.ln();
    }
    // Rounding in ln can leave a tiny negative sum.
    if divergence < S::zero() {
        divergence = S::zero();
    }
    Ok(Some(divergence))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scenario {
    /// The recipient loses every publication with foreign funding.
    AllInternational,
    /// The funder stops funding publications that have foreign authors.
    Funder(FundingLabel),
}

impl Scenario {
    pub fn funder(&self) -> Option<FundingLabel> {
        match self {
            Scenario::AllInternational => None,
            Scenario::Funder(f) => Some(*f),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::AllInternational => f.write_str("all_international"),
            Scenario::Funder(_) => f.write_str("funder"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpactRow<S> {
    pub scenario: Scenario,
    pub recipient: CountryCode,
    /// Publications of the recipient before and after removal.
    pub actual: u64,
    pub remaining: u64,
    /// 1 - remaining / actual.
    pub reduction: S,
    /// Divergence of the counterfactual profile; `None` when nothing remains.
    pub kl: Option<S>,
    /// The funder is the recipient itself.
    pub self_row: bool,
}

impl<S> ImpactRow<S> {
    pub fn is_undefined(&self) -> bool {
        self.kl.is_none()
    }
}

fn impact_row<S: Scalar>(
    scenario: Scenario,
    actual: &ResearchProfile,
    removed: Option<&[u64]>,
) -> Result<(ImpactRow<S>, ResearchProfile)> {
    let counterfactual = match removed {
        Some(r) => actual.minus(r),
        None => actual.clone(),
    };
    let total = actual.total();
    let remaining = counterfactual.total();
    let row = ImpactRow {
        scenario,
        recipient: actual.country,
        actual: total,
        remaining,
        reduction: S::from_ratio(total - remaining, total),
        kl: kl_divergence(&counterfactual, actual)?,
        self_row: scenario.funder() == Some(FundingLabel::Country(actual.country)),
    };
    Ok((row, counterfactual))
}

/// Whether the publication acknowledges funding that is foreign to `focal`.
pub fn is_internationally_funded(publication: &FundedPublication, focal: CountryCode, eu: &EuPolicy) -> bool {
    publication.funding.labels().any(|label| !eu.is_own(label, focal))
}

/// Whether `funder` funds this publication and it has an author to whom that funding is foreign.
pub fn removed_by_funder(publication: &FundedPublication, funder: FundingLabel, eu: &EuPolicy) -> bool {
    publication.funding.count(funder) > 0 && publication.authors.iter().any(|a| !eu.is_own(funder, *a))
}

/// Actual profiles of every author country.
pub fn actual_profiles(corpus: &FundedCorpus) -> Vec<ResearchProfile> {
    let width = corpus.disciplines().len();
    let counts = corpus
        .publications()
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<CountryCode, Vec<u64>>, p| {
            for c in &p.authors {
                acc.entry(*c).or_insert_with(|| vec![0; width])[p.discipline] += 1;
            }
            acc
        })
        .reduce(HashMap::new, merge_vectors);
    let mut profiles: Vec<ResearchProfile> = counts
        .into_iter()
        .map(|(country, counts)| ResearchProfile { country, counts })
        .collect();
    profiles.sort_by_key(|p| p.country);
    profiles
}

fn merge_vectors<K: std::hash::Hash + Eq>(mut a: HashMap<K, Vec<u64>>, b: HashMap<K, Vec<u64>>) -> HashMap<K, Vec<u64>> {
    if a.len() < b.len() {
        return merge_vectors(b, a);
    }
    for (k, v) in b {
        match a.get_mut(&k) {
            Some(into) => into.iter_mut().zip(v).for_each(|(x, y)| *x += y),
            None => {
                a.insert(k, v);
            }
        }
    }
    a
}

#[derive(Debug, Clone, PartialEq)]
pub struct InternationalRemoval<S> {
    pub row: ImpactRow<S>,
    pub actual: ResearchProfile,
    pub counterfactual: ResearchProfile,
}

/// Drops the country's internationally funded publications. `None` when M_c = 0.
///
/// Unfunded and purely domestically funded publications are kept.
pub fn remove_international<S: Scalar>(
    corpus: &FundedCorpus,
    country: CountryCode,
    eu: &EuPolicy,
) -> Result<Option<InternationalRemoval<S>>> {
    let width = corpus.disciplines().len();
    let mut actual = ResearchProfile::empty(country, width);
    let mut removed = vec![0u64; width];
    for p in corpus.publications().iter().filter(|p| p.has_author(country)) {
        actual.counts[p.discipline] += 1;
        if is_internationally_funded(p, country, eu) {
            removed[p.discipline] += 1;
        }
    }
    if actual.is_empty() {
        return Ok(None);
    }
    let (row, counterfactual) = impact_row(Scenario::AllInternational, &actual, Some(&removed))?;
    Ok(Some(InternationalRemoval {
        row,
        actual,
        counterfactual,
    }))
}

/// [`remove_international`] for every author country in one pass, sorted by country.
pub fn international_removal_table<S: Scalar>(corpus: &FundedCorpus, eu: &EuPolicy) -> Result<Vec<ImpactRow<S>>> {
    let width = corpus.disciplines().len();
    let removed = corpus
        .publications()
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<CountryCode, Vec<u64>>, p| {
            for c in &p.authors {
                if is_internationally_funded(p, *c, eu) {
                    acc.entry(*c).or_insert_with(|| vec![0; width])[p.discipline] += 1;
                }
            }
            acc
        })
        .reduce(HashMap::new, merge_vectors);
    actual_profiles(corpus)
        .par_iter()
        .map(|actual| {
            impact_row(
                Scenario::AllInternational,
                actual,
                removed.get(&actual.country).map(Vec::as_slice),
            )
            .map(|(row, _)| row)
        })
        .collect()
}

/// Funder-by-recipient impact of per-funder removal scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactMatrix<S> {
    pub funders: Vec<FundingLabel>,
    pub recipients: Vec<CountryCode>,
    /// Funder-major: row `i * recipients.len() + j` is (funders[i], recipients[j]).
    pub rows: Vec<ImpactRow<S>>,
}

impl<S> ImpactMatrix<S> {
    pub fn get(&self, funder: FundingLabel, recipient: CountryCode) -> Option<&ImpactRow<S>> {
        let i = self.funders.binary_search(&funder).ok()?;
        let j = self.recipients.binary_search(&recipient).ok()?;
        self.rows.get(i * self.recipients.len() + j)
    }

    /// Rows of one funder scenario.
    pub fn funder_rows(&self, funder: FundingLabel) -> &[ImpactRow<S>] {
        match self.funders.binary_search(&funder) {
            Ok(i) => &self.rows[i * self.recipients.len()..(i + 1) * self.recipients.len()],
            Err(_) => &[],
        }
    }
}

/// Impact of each funder in `funders` (default: every label in the corpus) on every author country.
pub fn scenario_matrix<S: Scalar>(
    corpus: &FundedCorpus,
    funders: Option<&BTreeSet<FundingLabel>>,
    eu: &EuPolicy,
) -> Result<ImpactMatrix<S>> {
    let funders: Vec<FundingLabel> = match funders {
        Some(set) => set.iter().copied().collect(),
        None => corpus.funding_labels().into_iter().collect(),
    };
    let width = corpus.disciplines().len();
    let removed = corpus
        .publications()
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<(FundingLabel, CountryCode), Vec<u64>>, p| {
            for label in p.funding.labels() {
                if funders.binary_search(&label).is_ok() && removed_by_funder(p, label, eu) {
                    for c in &p.authors {
                        acc.entry((label, *c)).or_insert_with(|| vec![0; width])[p.discipline] += 1;
                    }
                }
            }
            acc
        })
        .reduce(HashMap::new, merge_vectors);
    let profiles = actual_profiles(corpus);
    let recipients: Vec<CountryCode> = profiles.iter().map(|p| p.country).collect();
    let pairs: Vec<(FundingLabel, &ResearchProfile)> = funders
        .iter()
        .flat_map(|f| profiles.iter().map(move |p| (*f, p)))
        .collect();
    let rows = pairs
        .par_iter()
        .map(|(funder, actual)| {
            impact_row(
                Scenario::Funder(*funder),
                actual,
                removed.get(&(*funder, actual.country)).map(Vec::as_slice),
            )
            .map(|(row, _)| row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ImpactMatrix {
        funders,
        recipients,
        rows,
    })
}

/// Impact of one funder on every author country, its own row flagged.
pub fn per_funder_impact<S: Scalar>(
    corpus: &FundedCorpus,
    funder: FundingLabel,
    eu: &EuPolicy,
) -> Result<Vec<ImpactRow<S>>> {
    Ok(scenario_matrix(corpus, Some(&BTreeSet::from([funder])), eu)?.rows)
}
