use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use fundmap_core::country::{parse_code_list, parse_continent_map};
use fundmap_core::resolver::FunderRecord;
use fundmap_core::{
    box_summary, continent_rollup, disparity_filter, filter_corpus, funding_incidence_tables,
    funding_shares, ingest_str, international_removal_table, international_shares, portfolio_table, resolve_all,
    scenario_matrix, top_funder_per_country, write_jsonl, Assignment, BackboneParams, BigRational, Corpus,
    CorpusConfig, CountryAliasTable, CountryCode, CountryTable, CuratedMap, EuMode, EuPolicy, FundedCorpus,
    FundingLabel, ImpactRow, Method, RelianceEdge, RelianceNetwork, ResolutionTable, Scalar, ShareTable,
};
use fundmap_synth::{generate, oracle_metrics, Direction, OracleMetrics, OracleParams};
use serde::Serialize;

use crate::config::{Numeric, Settings};
use crate::error::{CliError, Result};
use crate::output::{flag, fmt_g12, sha256_hex, RunManifest, StageOutputs, StageRecord, Table};

pub const CORPUS: &str = "corpus.filtered.jsonl";
pub const INGEST_REPORT: &str = "ingest_report.json";
pub const RESOLUTION: &str = "resolution.csv";
pub const RESOLUTION_REPORT: &str = "resolution_report.json";
pub const SHARES: &str = "funding_shares.csv";
pub const INTERNATIONAL_SHARES: &str = "international_shares.csv";
pub const INCIDENCE: &str = "funding_incidence.csv";
pub const PORTFOLIO: &str = "portfolio.csv";
pub const CONTINENTS: &str = "portfolio_continents.csv";
pub const CONTINENT_VALUES: &str = "portfolio_values.csv";
pub const IMPACT: &str = "impact.csv";
pub const EU_COMPARISON: &str = "eu_comparison.csv";
pub const NETWORK: &str = "network.csv";
pub const BACKBONE: &str = "backbone.csv";
pub const TOP_FUNDERS: &str = "top_funders.csv";

/// Synthetic corpora above this size get no metric truth tables; the oracle is quadratic.
pub const ORACLE_LIMIT: usize = 100_000;

const EDGE_HEADER: [&str; 6] = ["source", "target", "weight", "alpha_out", "alpha_in", "kept"];
const IMPACT_HEADER: [&str; 7] = ["scenario", "funder", "recipient", "reduction", "kl", "undefined_flag", "self_flag"];
const SHARE_HEADER: [&str; 4] = ["year", "label", "F_c", "F"];
const INCIDENCE_HEADER: [&str; 5] = ["year", "subset", "funded_frac", "single_country_frac", "multi_country_frac"];
const PORTFOLIO_HEADER: [&str; 9] = [
    "country",
    "M_c",
    "I_c",
    "C_c_all",
    "C_c_funded",
    "frac_not_funded",
    "frac_domestic",
    "frac_cofunded",
    "frac_foreign",
];

type Inputs = BTreeMap<String, String>;

fn num<S: Scalar>(x: &S) -> String {
    fmt_g12(x.to_f64())
}

pub struct Context {
    pub settings: Settings,
    pub force: bool,
    countries: &'static CountryTable,
}

impl Context {
    pub fn new(settings: Settings, force: bool) -> Self {
        Self {
            settings,
            force,
            countries: CountryTable::builtin(),
        }
    }

    fn out_dir(&self) -> &Path {
        &self.settings.out_dir
    }

    /// Reads an upstream artifact, naming the command that produces it when absent.
    fn require(&self, name: &str, command: &'static str) -> Result<Vec<u8>> {
        let path = self.out_dir().join(name);
        if !path.exists() {
            return Err(CliError::Dependency {
                artifact: path.display().to_string(),
                command,
            });
        }
        fs::read(&path).map_err(|e| CliError::io(path, e))
    }

    fn read_input(path: &Path) -> Result<String> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        String::from_utf8(bytes).map_err(|_| CliError::Data(format!("{} is not valid UTF-8", path.display())))
    }

    fn aliases(&self, inputs: &mut Inputs) -> Result<CountryAliasTable> {
        match &self.settings.country_aliases {
            Some(path) => {
                let text = Self::read_input(path)?;
                inputs.insert("country_aliases".into(), sha256_hex(text.as_bytes()));
                Ok(CountryAliasTable::from_tsv(&text, &path.display().to_string(), self.countries)?)
            }
            None => Ok(CountryAliasTable::builtin()),
        }
    }

    fn corpus_config(&self, inputs: &mut Inputs) -> Result<CorpusConfig> {
        let mut cfg = self.settings.corpus.clone();
        cfg.eu_members = match &self.settings.eu_members {
            Some(path) => {
                let text = Self::read_input(path)?;
                inputs.insert("eu_members".into(), sha256_hex(text.as_bytes()));
                parse_code_list(&text, &path.display().to_string(), self.countries)?
            }
            None => fundmap_core::country::builtin_eu_members(),
        };
        Ok(cfg)
    }

    fn eu_policy(&self, inputs: &mut Inputs) -> Result<EuPolicy> {
        Ok(EuPolicy::from_config(&self.corpus_config(inputs)?))
    }

    fn run_stage(&self, name: &str, inputs: Inputs, body: impl FnOnce(&mut StageOutputs) -> Result<()>) -> Result<()> {
        let out_dir = self.out_dir();
        fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
        let mut manifest = RunManifest::load(out_dir);
        let hash = self.settings.config_hash();
        if !self.force && manifest.is_current(name, &hash, &inputs, out_dir) {
            eprintln!("{name}: up to date");
            return Ok(());
        }
        let mut outputs = StageOutputs::new(out_dir);
        body(&mut outputs)?;
        manifest.stages.insert(
            name.to_owned(),
            StageRecord {
                config_hash: hash,
                inputs,
                outputs: outputs.into_digests(),
            },
        );
        manifest.save(out_dir)?;
        eprintln!("{name}: done");
        Ok(())
    }

    fn load_corpus(&self, inputs: &mut Inputs) -> Result<Corpus> {
        let bytes = self.require(CORPUS, "ingest")?;
        inputs.insert(CORPUS.into(), sha256_hex(&bytes));
        let text = String::from_utf8(bytes).map_err(|_| CliError::Data(format!("{CORPUS} is not UTF-8")))?;
        let (corpus, report) = ingest_str(&text, &CountryAliasTable::builtin());
        if report.rejected > 0 {
            return Err(CliError::Data(format!(
                "{CORPUS} has {} unreadable records; rerun `fundmap ingest`",
                report.rejected
            )));
        }
        Ok(corpus)
    }

    fn load_funded(&self, inputs: &mut Inputs) -> Result<FundedCorpus> {
        let corpus = self.load_corpus(inputs)?;
        let bytes = self.require(RESOLUTION, "resolve")?;
        inputs.insert(RESOLUTION.into(), sha256_hex(&bytes));
        let table = parse_resolution(&bytes)?;
        Ok(FundedCorpus::build(&corpus, &table)?)
    }

    fn alpha<S: Scalar>(&self) -> S {
        let (n, d) = self.settings.alpha;
        S::from_ratio(n, d)
    }
}

fn parse_resolution(bytes: &[u8]) -> Result<ResolutionTable> {
    let mut reader = csv::Reader::from_reader(bytes);
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let bad = |what: &str| CliError::Data(format!("{RESOLUTION}: bad {what} in {row:?}"));
        records.push(FunderRecord {
            norm_name: field(0).to_owned(),
            frequency: field(1).parse().map_err(|_| bad("frequency"))?,
            assignment: field(2).parse::<Assignment>().map_err(|_| bad("assignment"))?,
            method: field(3).parse::<Method>().map_err(|_| bad("method"))?,
        });
    }
    Ok(ResolutionTable::from_records(records))
}

pub fn ingest(ctx: &Context) -> Result<()> {
    let input = ctx
        .settings
        .input
        .clone()
        .ok_or_else(|| CliError::Config("no input corpus; pass --input or set `input`".into()))?;
    let text = Context::read_input(&input)?;
    let mut inputs = Inputs::from([("input".to_owned(), sha256_hex(text.as_bytes()))]);
    let aliases = ctx.aliases(&mut inputs)?;
    let cfg = ctx.corpus_config(&mut inputs)?;
    ctx.run_stage("ingest", inputs, |out| {
        let (corpus, report) = ingest_str(&text, &aliases);
        let accepted = corpus.len();
        let filtered = filter_corpus(corpus, &cfg);
        let mut buf = Vec::new();
        write_jsonl(&filtered, &mut buf)?;
        out.write(CORPUS, &buf)?;

        #[derive(Serialize)]
        struct Report<'a> {
            accepted: usize,
            rejected: usize,
            reject_reasons: &'a BTreeMap<String, usize>,
            filtered_out: usize,
            retained: usize,
        }
        let report = Report {
            accepted: report.accepted,
            rejected: report.rejected,
            reject_reasons: &report.reject_reasons,
            filtered_out: accepted - filtered.len(),
            retained: filtered.len(),
        };
        out.write(INGEST_REPORT, &json(&report)?)
    })
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn resolve(ctx: &Context) -> Result<()> {
    let mut inputs = Inputs::new();
    let corpus = ctx.load_corpus(&mut inputs)?;
    let aliases = ctx.aliases(&mut inputs)?;
    let cfg = ctx.corpus_config(&mut inputs)?;
    let curated = match &ctx.settings.curated_map {
        Some(path) => {
            let text = Context::read_input(path)?;
            inputs.insert("curated_map".into(), sha256_hex(text.as_bytes()));
            CuratedMap::from_tsv(&text, &path.display().to_string(), ctx.countries)?
        }
        None => CuratedMap::default(),
    };
    ctx.run_stage("resolve", inputs, |out| {
        let (table, report) = resolve_all(&corpus, &curated, &aliases, &cfg);
        let mut csv = Table::new(&["norm_name", "frequency", "assignment", "method"])?;
        for r in table.records() {
            csv.row([
                r.norm_name.clone(),
                r.frequency.to_string(),
                r.assignment.to_string(),
                r.method.as_str().to_owned(),
            ])?;
        }
        out.write(RESOLUTION, &csv.into_bytes()?)?;
        out.write(RESOLUTION_REPORT, &json(&report)?)
    })
}

fn share_csv<S: Scalar>(table: &ShareTable<S>) -> Result<Vec<u8>> {
    let mut csv = Table::new(&SHARE_HEADER)?;
    for r in &table.rows {
        csv.row([r.year.to_string(), r.label.to_string(), num(&r.share), r.funded.to_string()])?;
    }
    csv.into_bytes()
}

pub fn attribute<S: Scalar>(ctx: &Context) -> Result<()> {
    let mut inputs = Inputs::new();
    let funded = ctx.load_funded(&mut inputs)?;
    ctx.run_stage("attribute", inputs, |out| {
        out.write(SHARES, &share_csv(&funding_shares::<S>(&funded))?)?;
        out.write(INTERNATIONAL_SHARES, &share_csv(&international_shares::<S>(&funded))?)?;
        let mut csv = Table::new(&INCIDENCE_HEADER)?;
        for r in funding_incidence_tables::<S>(&funded) {
            csv.row([
                r.year.to_string(),
                r.subset.as_str().to_owned(),
                num(&r.funded_frac),
                num(&r.single_country_frac),
                num(&r.multi_country_frac),
            ])?;
        }
        out.write(INCIDENCE, &csv.into_bytes()?)
    })
}

pub fn portfolio<S: Scalar>(ctx: &Context) -> Result<()> {
    let mut inputs = Inputs::new();
    let funded = ctx.load_funded(&mut inputs)?;
    let eu = ctx.eu_policy(&mut inputs)?;
    let continents = match &ctx.settings.continents {
        Some(path) => {
            let text = Context::read_input(path)?;
            inputs.insert("continents".into(), sha256_hex(text.as_bytes()));
            parse_continent_map(&text, &path.display().to_string(), ctx.countries)?
        }
        None => ctx.countries.continent_map(),
    };
    ctx.run_stage("portfolio", inputs, |out| {
        let stats = portfolio_table::<S>(&funded, &eu);
        let mut csv = Table::new(&PORTFOLIO_HEADER)?;
        for s in &stats {
            let mut row = vec![
                s.country.to_string(),
                s.m_c.to_string(),
                num(&s.intensity),
                num(&s.exclusive_all),
                s.exclusive_funded.as_ref().map(num).unwrap_or_default(),
            ];
            row.extend(s.class_fractions.iter().map(num));
            csv.row(row)?;
        }
        out.write(PORTFOLIO, &csv.into_bytes()?)?;

        let metrics: [(&str, Vec<(CountryCode, S)>); 3] = [
            ("I_c", stats.iter().map(|s| (s.country, s.intensity.clone())).collect()),
            ("C_c_all", stats.iter().map(|s| (s.country, s.exclusive_all.clone())).collect()),
            (
                "C_c_funded",
                stats
                    .iter()
                    .filter_map(|s| s.exclusive_funded.clone().map(|v| (s.country, v)))
                    .collect(),
            ),
        ];
        let mut summary = Table::new(&[
            "metric",
            "continent",
            "n",
            "q1",
            "median",
            "q3",
            "lower_whisker",
            "upper_whisker",
            "outliers",
        ])?;
        let mut values = Table::new(&["metric", "continent", "country", "value"])?;
        for (metric, list) in &metrics {
            let rollup = continent_rollup(list, &continents);
            for group in &rollup.continents {
                let b = &group.summary;
                let outliers: Vec<String> = b.outliers.iter().map(|(c, v)| format!("{c}:{}", num(v))).collect();
                summary.row([
                    metric.to_string(),
                    group.continent.clone(),
                    b.n.to_string(),
                    num(&b.q1),
                    num(&b.median),
                    num(&b.q3),
                    num(&b.lower_whisker),
                    num(&b.upper_whisker),
                    outliers.join(";"),
                ])?;
                for (c, v) in &group.values {
                    values.row([metric.to_string(), group.continent.clone(), c.to_string(), num(v)])?;
                }
            }
            if let Some(b) = box_summary(list) {
                summary.row([
                    metric.to_string(),
                    "World".to_owned(),
                    b.n.to_string(),
                    num(&b.q1),
                    num(&b.median),
                    num(&b.q3),
                    num(&b.lower_whisker),
                    num(&b.upper_whisker),
                    b.outliers
                        .iter()
                        .map(|(c, v)| format!("{c}:{}", num(v)))
                        .collect::<Vec<_>>()
                        .join(";"),
                ])?;
            }
        }
        out.write(CONTINENTS, &summary.into_bytes()?)?;
        out.write(CONTINENT_VALUES, &values.into_bytes()?)
    })
}

fn impact_row<S: Scalar>(csv: &mut Table, r: &ImpactRow<S>) -> Result<()> {
    csv.row([
        r.scenario.to_string(),
        r.scenario.funder().map(|f| f.to_string()).unwrap_or_default(),
        r.recipient.to_string(),
        num(&r.reduction),
        r.kl.as_ref().map(num).unwrap_or_default(),
        flag(r.is_undefined()).to_owned(),
        flag(r.self_row).to_owned(),
    ])
}

pub fn counterfactual<S: Scalar>(ctx: &Context) -> Result<()> {
    let mut inputs = Inputs::new();
    let funded = ctx.load_funded(&mut inputs)?;
    let cfg = ctx.corpus_config(&mut inputs)?;
    let eu = EuPolicy::from_config(&cfg);
    ctx.run_stage("counterfactual", inputs, |out| {
        let mut csv = Table::new(&IMPACT_HEADER)?;
        for r in &international_removal_table::<S>(&funded, &eu)? {
            impact_row(&mut csv, r)?;
        }
        for r in &scenario_matrix::<S>(&funded, None, &eu)?.rows {
            impact_row(&mut csv, r)?;
        }
        out.write(IMPACT, &csv.into_bytes()?)?;

        let foreign = international_removal_table::<S>(&funded, &EuPolicy::new(EuMode::Foreign, cfg.eu_members.clone()))?;
        let domestic =
            international_removal_table::<S>(&funded, &EuPolicy::new(EuMode::Domestic, cfg.eu_members.clone()))?;
        let mut csv = Table::new(&["recipient", "reduction_foreign", "reduction_domestic"])?;
        for (f, d) in foreign.iter().zip(&domestic) {
            if cfg.eu_members.contains(&f.recipient) {
                csv.row([f.recipient.to_string(), num(&f.reduction), num(&d.reduction)])?;
            }
        }
        out.write(EU_COMPARISON, &csv.into_bytes()?)
    })
}

fn parse_f64(text: &str, what: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| CliError::Data(format!("bad {what} {text:?}")))
}

fn parse_label(text: &str) -> Result<FundingLabel> {
    text.parse().map_err(|_| CliError::Data(format!("bad funding label {text:?}")))
}

fn parse_code(text: &str) -> Result<CountryCode> {
    CountryCode::new(text).ok_or_else(|| CliError::Data(format!("bad country code {text:?}")))
}

fn edge_csv<'a, S: Scalar>(edges: impl Iterator<Item = &'a fundmap_core::reliance::EdgeSignificance<S>>) -> Result<Vec<u8>> {
    let mut csv = Table::new(&EDGE_HEADER)?;
    for e in edges {
        csv.row([
            e.edge.source.to_string(),
            e.edge.target.to_string(),
            num(&e.edge.weight),
            num(&e.alpha_out),
            num(&e.alpha_in),
            flag(e.kept).to_owned(),
        ])?;
    }
    csv.into_bytes()
}

pub fn network<S: Scalar>(ctx: &Context) -> Result<()> {
    let bytes = ctx.require(IMPACT, "counterfactual")?;
    let inputs = Inputs::from([(IMPACT.to_owned(), sha256_hex(&bytes))]);
    let mut edges = Vec::new();
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    for row in reader.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("");
        if field(0) != "funder" || field(6) == "1" {
            continue;
        }
        let weight = parse_f64(field(3), "reduction")?;
        if weight > 0.0 {
            edges.push(RelianceEdge {
                source: parse_label(field(1))?,
                target: parse_code(field(2))?,
                weight: S::from_f64(weight),
            });
        }
    }
    let network = RelianceNetwork::from_edges(edges)?;
    let params = BackboneParams::new(ctx.alpha::<S>(), ctx.settings.direction)?;
    ctx.run_stage("network", inputs, |out| {
        let filtered = disparity_filter(&network, &params)?;
        out.write(NETWORK, &edge_csv(filtered.edges.iter())?)
    })
}

pub fn backbone<S: Scalar>(ctx: &Context) -> Result<()> {
    let bytes = ctx.require(NETWORK, "network")?;
    let inputs = Inputs::from([(NETWORK.to_owned(), sha256_hex(&bytes))]);
    let mut edges = Vec::new();
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    for row in reader.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("");
        edges.push(RelianceEdge {
            source: parse_label(field(0))?,
            target: parse_code(field(1))?,
            weight: S::from_f64(parse_f64(field(2), "weight")?),
        });
    }
    let network = RelianceNetwork::from_edges(edges)?;
    let params = BackboneParams::new(ctx.alpha::<S>(), ctx.settings.direction)?;
    ctx.run_stage("backbone", inputs, |out| {
        let filtered = disparity_filter(&network, &params)?;
        out.write(BACKBONE, &edge_csv(filtered.kept())?)?;

        let weight = |edges: &[RelianceEdge<S>], t: CountryCode, s: FundingLabel| {
            edges
                .iter()
                .find(|e| e.target == t && e.source == s)
                .map(|e| num(&e.weight))
                .unwrap_or_default()
        };
        let kept: Vec<RelianceEdge<S>> = filtered.kept().map(|e| e.edge.clone()).collect();
        let top_all = top_funder_per_country(network.edges());
        let top_kept = top_funder_per_country(&kept);
        let mut csv = Table::new(&["recipient", "network_funder", "network_weight", "backbone_funder", "backbone_weight"])?;
        for (recipient, funder) in &top_all {
            let backbone_funder = top_kept.get(recipient);
            csv.row([
                recipient.to_string(),
                funder.to_string(),
                weight(network.edges(), *recipient, *funder),
                backbone_funder.map(|f| f.to_string()).unwrap_or_default(),
                backbone_funder
                    .map(|f| weight(&kept, *recipient, *f))
                    .unwrap_or_default(),
            ])?;
        }
        out.write(TOP_FUNDERS, &csv.into_bytes()?)
    })
}

/// Plot-data tables bundled under `report/`, with the stage that produces each.
const REPORT_FILES: [(&str, &str); 12] = [
    (SHARES, "attribute"),
    (INTERNATIONAL_SHARES, "attribute"),
    (INCIDENCE, "attribute"),
    (PORTFOLIO, "portfolio"),
    (CONTINENTS, "portfolio"),
    (CONTINENT_VALUES, "portfolio"),
    (IMPACT, "counterfactual"),
    (EU_COMPARISON, "counterfactual"),
    (NETWORK, "network"),
    (BACKBONE, "backbone"),
    (TOP_FUNDERS, "backbone"),
    (RESOLUTION_REPORT, "resolve"),
];

pub fn report(ctx: &Context) -> Result<()> {
    let mut sources = Vec::new();
    let mut inputs = Inputs::new();
    for (name, command) in REPORT_FILES {
        let bytes = ctx.require(name, command)?;
        inputs.insert(name.to_owned(), sha256_hex(&bytes));
        sources.push((name, command, bytes));
    }
    ctx.run_stage("report", inputs, |out| {
        let mut index = BTreeMap::new();
        for (name, command, bytes) in &sources {
            out.write(&format!("report/{name}"), bytes)?;
            index.insert(*name, BTreeMap::from([("stage", command.to_string()), ("sha256", sha256_hex(bytes))]));
        }
        out.write("report/index.json", &json(&index)?)
    })
}

pub fn synth(ctx: &Context) -> Result<()> {
    let spec = &ctx.settings.synth;
    let mut inputs = Inputs::new();
    let cfg = ctx.corpus_config(&mut inputs)?;
    ctx.run_stage("synth", inputs, |out| {
        let corpus = generate(spec)?;
        out.write("corpus.jsonl", corpus.to_jsonl().as_bytes())?;
        out.write("curated.tsv", corpus.curated_tsv().as_bytes())?;
        let mut truth = Table::tsv(&["norm_name", "frequency", "assignment", "method", "kind"])?;
        for f in corpus.truth.funders.values() {
            truth.row([
                f.norm_name.clone(),
                f.frequency.to_string(),
                f.assignment.clone(),
                f.method.to_owned(),
                format!("{:?}", f.kind),
            ])?;
        }
        out.write("truth_resolution.tsv", &truth.into_bytes()?)?;
        if spec.n_pubs <= ORACLE_LIMIT {
            let params = OracleParams {
                year_min: cfg.year_min,
                year_max: cfg.year_max,
                doc_types: cfg.allowed_doc_types.iter().cloned().collect(),
                excluded_disciplines: cfg.excluded_disciplines.iter().cloned().collect(),
                eu_members: cfg.eu_members.iter().map(|c| c.to_string()).collect(),
                eu_domestic: cfg.eu_as_domestic,
                alpha: ctx.alpha::<f64>(),
                direction: match ctx.settings.direction {
                    fundmap_core::DirectionRule::Out => Direction::Out,
                    fundmap_core::DirectionRule::In => Direction::In,
                    fundmap_core::DirectionRule::Either => Direction::Either,
                },
            };
            let metrics = oracle_metrics(&corpus.records, &corpus.truth.assignments(), &params)?;
            write_truth_metrics(out, &metrics)?;
        }
        Ok(())
    })
}

fn write_truth_metrics(out: &mut StageOutputs, m: &OracleMetrics<f64>) -> Result<()> {
    for (name, rows) in [
        ("truth_funding_shares.tsv", &m.shares),
        ("truth_international_shares.tsv", &m.international_shares),
    ] {
        let mut t = Table::tsv(&SHARE_HEADER)?;
        for r in rows {
            t.row([r.year.to_string(), r.label.clone(), fmt_g12(r.share), r.funded.to_string()])?;
        }
        out.write(name, &t.into_bytes()?)?;
    }

    let mut t = Table::tsv(&INCIDENCE_HEADER)?;
    for r in &m.incidence {
        t.row([
            r.year.to_string(),
            r.subset.to_owned(),
            fmt_g12(r.funded),
            fmt_g12(r.single),
            fmt_g12(r.multi),
        ])?;
    }
    out.write("truth_funding_incidence.tsv", &t.into_bytes()?)?;

    let mut t = Table::tsv(&PORTFOLIO_HEADER)?;
    for r in &m.portfolio {
        let mut row = vec![
            r.country.clone(),
            r.m_c.to_string(),
            fmt_g12(r.intensity),
            fmt_g12(r.exclusive_all),
            r.exclusive_funded.map(fmt_g12).unwrap_or_default(),
        ];
        row.extend(r.counts.iter().map(|n| fmt_g12(*n as f64 / r.m_c as f64)));
        t.row(row)?;
    }
    out.write("truth_portfolio.tsv", &t.into_bytes()?)?;

    let mut t = Table::tsv(&IMPACT_HEADER)?;
    for r in m.international_removal.iter().chain(&m.matrix) {
        t.row([
            if r.funder.is_some() { "funder" } else { "all_international" }.to_owned(),
            r.funder.clone().unwrap_or_default(),
            r.recipient.clone(),
            fmt_g12(r.reduction),
            r.kl.map(fmt_g12).unwrap_or_default(),
            flag(r.kl.is_none()).to_owned(),
            flag(r.self_row).to_owned(),
        ])?;
    }
    out.write("truth_impact.tsv", &t.into_bytes()?)?;

    let mut t = Table::tsv(&EDGE_HEADER)?;
    for e in &m.edges {
        t.row([
            e.source.clone(),
            e.target.clone(),
            fmt_g12(e.weight),
            fmt_g12(e.alpha_out),
            fmt_g12(e.alpha_in),
            flag(e.kept).to_owned(),
        ])?;
    }
    out.write("truth_network.tsv", &t.into_bytes()?)?;

    let mut t = Table::tsv(&["recipient", "network_funder", "backbone_funder"])?;
    for (recipient, funder) in &m.top_funder_network {
        t.row([
            recipient.clone(),
            funder.clone(),
            m.top_funder_backbone.get(recipient).cloned().unwrap_or_default(),
        ])?;
    }
    out.write("truth_top_funders.tsv", &t.into_bytes()?)
}

/// Runs a scalar-generic stage in the configured numeric mode.
pub fn with_scalar(
    ctx: &Context,
    f64_stage: fn(&Context) -> Result<()>,
    exact_stage: fn(&Context) -> Result<()>,
) -> Result<()> {
    match ctx.settings.numeric {
        Numeric::F64 => f64_stage(ctx),
        Numeric::Rational => exact_stage(ctx),
    }
}

pub fn run_all(ctx: &Context) -> Result<()> {
    ingest(ctx)?;
    resolve(ctx)?;
    with_scalar(ctx, attribute::<f64>, attribute::<BigRational>)?;
    with_scalar(ctx, portfolio::<f64>, portfolio::<BigRational>)?;
    with_scalar(ctx, counterfactual::<f64>, counterfactual::<BigRational>)?;
    with_scalar(ctx, network::<f64>, network::<BigRational>)?;
    with_scalar(ctx, backbone::<f64>, backbone::<BigRational>)?;
    report(ctx)
}
