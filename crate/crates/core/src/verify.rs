//! Pipeline-versus-oracle equivalence checks.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;

use crate::harm::HARM_COLUMNS;
use crate::ingest::VenueId;
use crate::manifest::{InputManifest, RunConfig};
use crate::pipeline::{read_frontiers, read_harm, run, write_json, Analysis, Inputs, Stage, FRONTIERS, HARM};
use crate::stats::{QuartileSummary, StatsTable};
use crate::synth::{generate, run_oracle, OracleInput, OracleOptions, OracleOutput, OraclePaper, SynthConfig};
use crate::{Error, Result};

/// Allowed absolute difference for real-valued outputs.
pub const REAL_TOLERANCE: f64 = 1e-9;

pub const VERIFY_REPORT: &str = "verify_report.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn from(name: &str, outcome: std::result::Result<String, String>) -> Self {
        let (passed, detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        Check {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub dataset: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    fn new(dataset: String, checks: Vec<Check>) -> Self {
        Self {
            passed: checks.iter().all(|c| c.passed),
            dataset,
            checks,
        }
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REAL_TOLERANCE
}

fn close_opt(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => close(a, b),
        _ => false,
    }
}

type Frontiers = BTreeMap<(u8, bool), BTreeMap<u64, NaiveDate>>;

fn pipeline_frontiers(analysis: &Analysis, inputs: &Inputs) -> Frontiers {
    analysis
        .levels
        .iter()
        .filter(|l| !l.is_empty())
        .map(|l| {
            let members = l
                .iter()
                .map(|(node, date)| (inputs.corpus.record(node).id, date))
                .collect();
            ((l.distance(), l.is_deduplicated()), members)
        })
        .collect()
}

fn check_frontiers(actual: &Frontiers, expected: &Frontiers) -> std::result::Result<String, String> {
    let expected: Frontiers = expected
        .iter()
        .filter(|(_, m)| !m.is_empty())
        .map(|(k, m)| (*k, m.clone()))
        .collect();
    for (key, want) in &expected {
        let Some(got) = actual.get(key) else {
            return Err(format!("level {key:?} missing ({} members expected)", want.len()));
        };
        for (id, date) in want {
            match got.get(id) {
                None => return Err(format!("level {key:?}: paper {id} missing")),
                Some(d) if d != date => {
                    return Err(format!("level {key:?}: paper {id} dated {d}, expected {date}"))
                }
                _ => {}
            }
        }
        if let Some(extra) = got.keys().find(|id| !want.contains_key(id)) {
            return Err(format!("level {key:?}: unexpected paper {extra}"));
        }
    }
    if let Some(key) = actual.keys().find(|k| !expected.contains_key(k)) {
        return Err(format!("unexpected level {key:?}"));
    }
    let members: usize = expected.values().map(BTreeMap::len).sum();
    Ok(format!("{} levels, {members} memberships", expected.len()))
}

fn check_harm(analysis: &Analysis, expected: &OracleOutput) -> std::result::Result<String, String> {
    let mut actual: BTreeMap<u64, [Option<f64>; HARM_COLUMNS]> = BTreeMap::new();
    for r in &analysis.records {
        let columns = r.harm.columns();
        if let Some(previous) = actual.insert(r.harm.paper, columns) {
            if previous != columns {
                return Err(format!("paper {} has two different harm vectors", r.harm.paper));
            }
        }
    }
    if actual.len() != expected.harm.len() {
        return Err(format!(
            "{} harm vectors, expected {}",
            actual.len(),
            expected.harm.len()
        ));
    }
    let mut defined = 0;
    for (id, want) in &expected.harm {
        let Some(got) = actual.get(id) else {
            return Err(format!("no harm vector for paper {id}"));
        };
        for c in 0..HARM_COLUMNS {
            if !close_opt(got[c], want[c]) {
                return Err(format!(
                    "paper {id} column {c}: {:?}, expected {:?}",
                    got[c], want[c]
                ));
            }
            defined += usize::from(want[c].is_some());
        }
    }
    Ok(format!("{} vectors, {defined} defined entries", expected.harm.len()))
}

fn cell_matches(a: &Option<QuartileSummary>, b: &Option<QuartileSummary>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => {
            a.count == b.count && close(a.q1, b.q1) && close(a.q2, b.q2) && close(a.q3, b.q3)
        }
        _ => false,
    }
}

fn check_tables(actual: &[StatsTable], expected: &[StatsTable]) -> std::result::Result<String, String> {
    let families = |t: &[StatsTable]| t.iter().map(|t| t.family).collect::<Vec<_>>();
    if families(actual) != families(expected) {
        return Err(format!(
            "families {:?}, expected {:?}",
            families(actual),
            families(expected)
        ));
    }
    let mut cells = 0;
    for (got, want) in actual.iter().zip(expected) {
        if got.rows.len() != want.rows.len() {
            return Err(format!(
                "{:?}: {} rows, expected {}",
                got.family,
                got.rows.len(),
                want.rows.len()
            ));
        }
        for (g, w) in got.rows.iter().zip(&want.rows) {
            if g.key != w.key || g.nums != w.nums {
                return Err(format!(
                    "{:?}: row {:?} (n={}), expected {:?} (n={})",
                    got.family, g.key, g.nums, w.key, w.nums
                ));
            }
            for (c, (a, b)) in g.cells.iter().zip(&w.cells).enumerate() {
                if !cell_matches(a, b) {
                    return Err(format!(
                        "{:?} {:?} column {c}: {a:?}, expected {b:?}",
                        got.family, g.key
                    ));
                }
                cells += usize::from(b.is_some());
            }
        }
    }
    Ok(format!("{} tables, {cells} non-empty cells", expected.len()))
}

fn check_ingest(inputs: &Inputs, truth: &OracleInput) -> std::result::Result<String, String> {
    let derived = oracle_input_from(inputs);
    let by_id: BTreeMap<u64, &OraclePaper> = derived.papers.iter().map(|p| (p.id, p)).collect();
    if by_id.len() != truth.papers.len() {
        return Err(format!(
            "{} papers after cleaning, expected {}",
            by_id.len(),
            truth.papers.len()
        ));
    }
    for want in &truth.papers {
        match by_id.get(&want.id) {
            None => return Err(format!("paper {} missing after cleaning", want.id)),
            Some(got) if *got != want => {
                return Err(format!("paper {} loaded as {got:?}, expected {want:?}", want.id))
            }
            _ => {}
        }
    }
    let mut seeds = truth.seeds.clone();
    seeds.sort();
    if derived.seeds != seeds {
        return Err(format!(
            "{} matched retractions, expected {}",
            derived.seeds.len(),
            seeds.len()
        ));
    }
    for (venue, value) in &truth.impact {
        let linked = derived.impact.get(venue);
        let used = truth.papers.iter().any(|p| p.venue.as_ref() == Some(venue));
        if used && linked != Some(value) {
            return Err(format!("venue {venue:?}: impact {linked:?}, expected {value}"));
        }
    }
    Ok(format!("{} papers, {} retractions", truth.papers.len(), seeds.len()))
}

/// The oracle's view of already-cleaned inputs.
pub fn oracle_input_from(inputs: &Inputs) -> OracleInput {
    let corpus = &inputs.corpus;
    let papers = (0..corpus.len() as u32)
        .map(|node| {
            let r = corpus.record(node);
            OraclePaper {
                id: r.id,
                year: r.year,
                date: r.effective_date(),
                exact_date: r.has_exact_date(),
                venue: r.venue.map(|v| corpus.venues().label(v.0).to_string()),
                fields: corpus.field_labels(node).map(str::to_string).collect(),
                citation_count: r.citation_count,
            }
        })
        .collect();
    let mut seeds: Vec<(u64, NaiveDate)> = inputs
        .retractions
        .iter()
        .filter_map(|r| Some((r.matched_pub_id?, r.retraction_date)))
        .collect();
    seeds.sort();
    let impact = (0..corpus.venues().len() as u32)
        .filter_map(|v| {
            let value = inputs.impact.get(VenueId(v))?;
            Some((corpus.venues().label(v).to_string(), value))
        })
        .collect();
    OracleInput {
        papers,
        edges: inputs.edges.iter().map(|e| (e.citing_id, e.cited_id)).collect(),
        seeds,
        impact,
        cutoff_year: corpus.cutoff_year(),
    }
}

pub fn oracle_options(cfg: &RunConfig) -> OracleOptions {
    OracleOptions {
        max_distance: cfg.max_distance,
        dedup: cfg.dedup,
        self_exclude: cfg.self_exclude,
        exclude_year_only: cfg.exclude_year_only,
    }
}

/// Runs `all` into `cfg.output` and compares every output against the
/// oracle. With `truth`, the cleaned inputs are checked against it too;
/// otherwise the oracle starts from the cleaned inputs.
pub fn verify_run(cfg: &RunConfig, truth: Option<&OracleInput>, dataset: String) -> Result<VerifyReport> {
    let outcome = run(Stage::All, cfg)?;
    let analysis = outcome
        .analysis
        .as_ref()
        .ok_or_else(|| Error::Contract("all produced no analysis".into()))?;
    let derived;
    let oracle_input = match truth {
        Some(t) => t,
        None => {
            derived = oracle_input_from(&outcome.inputs);
            &derived
        }
    };
    let expected = run_oracle(oracle_input, &oracle_options(cfg));

    let mut checks = Vec::new();
    if let Some(t) = truth {
        checks.push(Check::from("ingest", check_ingest(&outcome.inputs, t)));
    }
    let frontiers = pipeline_frontiers(analysis, &outcome.inputs);
    checks.push(Check::from("frontiers", check_frontiers(&frontiers, &expected.frontiers)));
    checks.push(Check::from("harm", check_harm(analysis, &expected)));
    checks.push(Check::from("tables", check_tables(&analysis.tables, &expected.tables)));

    let reread = read_frontiers(&cfg.output.join(FRONTIERS), &outcome.inputs.corpus)?;
    let reread_records = read_harm(&cfg.output.join(HARM))?;
    let nonempty: Vec<_> = analysis.levels.iter().filter(|l| !l.is_empty()).cloned().collect();
    checks.push(Check::from(
        "artifacts",
        if reread != nonempty {
            Err(format!("{FRONTIERS} does not read back to the computed levels"))
        } else if reread_records != analysis.records {
            Err(format!("{HARM} does not read back to the computed records"))
        } else {
            Ok(format!("{} harm rows round-trip", reread_records.len()))
        },
    ));

    let report = VerifyReport::new(dataset, checks);
    write_json(&cfg.output.join(crate::verify::VERIFY_REPORT), &report)?;
    Ok(report)
}

/// Generates a dataset under `workdir/data`, runs into `workdir/out` and
/// verifies.
pub fn verify_synthetic(config: &SynthConfig, workdir: &Path) -> Result<VerifyReport> {
    let dataset = generate(config)?;
    let data_dir = workdir.join("data");
    let manifest_path = dataset.write_to(&data_dir)?;
    let mut cfg = InputManifest::load(&manifest_path)?.resolve(&data_dir);
    cfg.output = workdir.join("out");
    verify_run(
        &cfg,
        Some(&dataset.truth),
        format!("synthetic seed {} ({} papers)", config.seed, config.n_papers),
    )
}
