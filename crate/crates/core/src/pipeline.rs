//! Stage orchestration and on-disk artifacts.
//!
//! Every stage re-reads the inputs (cheap next to the analysis) and picks up
//! its predecessor's artifact from the output directory:
//!
//! | stage       | needs                              | writes                      |
//! |-------------|------------------------------------|-----------------------------|
//! | `ingest`    | inputs                             | `ingest_report.json`        |
//! | `build`     | inputs                             | `graph.bin`, `graph_report.json` |
//! | `frontiers` | `graph.bin`                        | `frontiers.csv`             |
//! | `harm`      | `graph.bin`, `frontiers.csv`       | `harm.csv`                  |
//! | `stats`     | `harm.csv`                         | one csv + json per table    |
//!
//! `all` runs them in sequence. Every stage also writes `run_manifest.json`.
//! Files are written to a temporary sibling and renamed into place, so a
//! failed run never leaves a truncated artifact behind.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::comparator::ComparatorEngine;
use crate::frontier::{compute_levels, dedup_frontiers, FrontierLevel, Seed, Timing};
use crate::graph::{build_graph, read_cache, write_cache, CitationGraph, GraphReport};
use crate::harm::{harm_vector_for, HarmVector, HARM_COLUMNS};
use crate::ingest::{
    dedup_by_doi, load_journal_if, load_publications, load_retractions, read_edges,
    CitationEdgeRaw, Corpus, ImpactTable, IngestReport, RetractionRecord,
};
use crate::manifest::{InputHashes, RunConfig, RunManifest};
use crate::stats::{
    all_tables, write_table_csv, write_table_json, AttributeTable, DedupMode, HarmRecord,
    StatsTable,
};
use crate::{Error, Result};

pub const INGEST_REPORT: &str = "ingest_report.json";
pub const GRAPH_CACHE: &str = "graph.bin";
pub const GRAPH_REPORT: &str = "graph_report.json";
pub const FRONTIERS: &str = "frontiers.csv";
pub const HARM: &str = "harm.csv";
pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Build,
    Frontiers,
    Harm,
    Stats,
    All,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Build => "build",
            Stage::Frontiers => "frontiers",
            Stage::Harm => "harm",
            Stage::Stats => "stats",
            Stage::All => "all",
        }
    }

    fn prerequisites(self) -> &'static [&'static str] {
        match self {
            Stage::Frontiers => &[GRAPH_CACHE, GRAPH_REPORT],
            Stage::Harm => &[GRAPH_CACHE, GRAPH_REPORT, FRONTIERS],
            Stage::Stats => &[HARM],
            Stage::Ingest | Stage::Build | Stage::All => &[],
        }
    }
}

/// Cleaned inputs.
pub struct Inputs {
    pub corpus: Corpus,
    pub retractions: Vec<RetractionRecord>,
    pub impact: ImpactTable,
    pub edges: Vec<CitationEdgeRaw>,
    pub report: IngestReport,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(|f| BufReader::with_capacity(1 << 20, f))
        .map_err(|e| Error::io(path, e))
}

pub fn ingest(cfg: &RunConfig) -> Result<Inputs> {
    let mut report = IngestReport::default();
    let loaded = load_publications(
        open(&cfg.publications)?,
        &cfg.publications,
        &mut report.publications,
    )?;
    let counters = &mut report.publications;
    let before = loaded.records.len();
    let records = dedup_by_doi(loaded.records);
    counters.doi_duplicates_dropped = (before - records.len()) as u64;
    counters.after_dedup = records.len() as u64;
    for r in &records {
        if r.year > cfg.cutoff_year {
            counters.after_cutoff_dropped += 1;
        } else if r.venue.is_none() || r.fields.is_empty() {
            counters.missing_venue_or_fields += 1;
        } else {
            counters.analysis_corpus += 1;
        }
    }
    let corpus = Corpus::new(records, loaded.venues, loaded.fields, cfg.cutoff_year)?;
    let retractions = load_retractions(
        open(&cfg.retractions)?,
        &cfg.retractions,
        &corpus,
        &mut report.retractions,
    )?;
    let impact = ImpactTable::new(&load_journal_if(
        open(&cfg.journal_if)?,
        &cfg.journal_if,
        corpus.venues(),
        &mut report.journal_if,
    )?);
    let edges = read_edges(&cfg.citations)?;
    Ok(Inputs {
        corpus,
        retractions,
        impact,
        edges,
        report,
    })
}

/// Retracted papers present in the corpus, in node order.
pub fn seeds(corpus: &Corpus, retractions: &[RetractionRecord]) -> Vec<Seed> {
    let mut seeds: Vec<Seed> = retractions
        .iter()
        .filter_map(|r| {
            let node = corpus.node(r.matched_pub_id?)?;
            Some(Seed {
                node,
                retraction_date: r.retraction_date,
            })
        })
        .collect();
    seeds.sort_by_key(|s| (s.node, s.retraction_date));
    seeds
}

/// The levels a dedup mode reports: duplicate-preserving ones first, then
/// deduplicated, each by distance.
pub fn frontier_levels(
    graph: &CitationGraph,
    seeds: &[Seed],
    max_distance: u8,
    mode: DedupMode,
) -> Result<Vec<FrontierLevel>> {
    let repeats = compute_levels(graph, seeds, max_distance)?;
    let mut levels = Vec::with_capacity(2 * repeats.len());
    if mode.includes_dedup() {
        levels.extend(dedup_frontiers(&repeats));
    }
    if mode.includes_repeats() {
        levels.splice(0..0, repeats);
    }
    Ok(levels)
}

fn timing_of(corpus: &Corpus, node: u32, earliest: NaiveDate, exclude_year_only: bool) -> Option<Timing> {
    let record = corpus.record(node);
    if exclude_year_only && !record.has_exact_date() {
        return None;
    }
    Some(Timing::of(record.effective_date(), earliest))
}

/// One record per level member. Each paper's harm vector is computed once.
pub fn harm_records(
    graph: &CitationGraph,
    corpus: &Corpus,
    levels: &[FrontierLevel],
    self_exclude: bool,
    exclude_year_only: bool,
) -> Result<Vec<HarmRecord>> {
    let nodes: Vec<u32> = levels
        .iter()
        .flat_map(|l| l.members().iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let engine = ComparatorEngine::new(graph, corpus, self_exclude);
    let aggregates = engine.aggregates(&nodes)?;
    let vectors: HashMap<u32, HarmVector> = nodes
        .par_iter()
        .zip(aggregates.par_iter())
        .map(|(&node, agg)| (node, harm_vector_for(graph, corpus, node, agg)))
        .collect();
    Ok(levels
        .iter()
        .flat_map(|level| {
            level.iter().map(|(node, earliest)| HarmRecord {
                distance: level.distance(),
                dedup: level.is_deduplicated(),
                timing: timing_of(corpus, node, earliest, exclude_year_only),
                harm: vectors[&node],
            })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub levels: Vec<FrontierLevel>,
    pub records: Vec<HarmRecord>,
    pub tables: Vec<StatsTable>,
}

/// Frontiers, harm and tables in memory, without touching the output
/// directory.
pub fn analyze(cfg: &RunConfig, inputs: &Inputs, graph: &CitationGraph) -> Result<Analysis> {
    let seeds = seeds(&inputs.corpus, &inputs.retractions);
    let levels = frontier_levels(graph, &seeds, cfg.max_distance, cfg.dedup)?;
    let records = harm_records(
        graph,
        &inputs.corpus,
        &levels,
        cfg.self_exclude,
        cfg.exclude_year_only,
    )?;
    let attrs = AttributeTable::from_corpus(&inputs.corpus, &inputs.impact);
    let tables = all_tables(&records, &attrs, cfg.dedup);
    Ok(Analysis {
        levels,
        records,
        tables,
    })
}

pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut out = BufWriter::with_capacity(1 << 20, tmp.as_file());
        fill(&mut out)?;
        out.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |out| {
        serde_json::to_writer_pretty(&mut *out, value)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(open(path)?)?)
}

pub fn write_frontiers(levels: &[FrontierLevel], corpus: &Corpus, out: &mut dyn Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["distance", "paper_id", "earliest_retraction_date", "dedup_flag"])?;
    for level in levels {
        let distance = level.distance().to_string();
        let flag = if level.is_deduplicated() { "1" } else { "0" };
        for (node, date) in level.iter() {
            writer.write_record([
                distance.as_str(),
                &corpus.record(node).id.to_string(),
                &date.to_string(),
                flag,
            ])?;
        }
    }
    writer.flush().map_err(|e| Error::Csv(e.into()))
}

fn bad_line(path: &Path, record: &csv::StringRecord, message: String) -> Error {
    Error::Input {
        path: path.to_path_buf(),
        line: record.position().map_or(0, |p| p.line()),
        message,
    }
}

fn field<T: std::str::FromStr>(
    path: &Path,
    record: &csv::StringRecord,
    index: usize,
    name: &str,
) -> Result<T> {
    let text = record.get(index).unwrap_or("");
    text.parse()
        .map_err(|_| bad_line(path, record, format!("bad {name} {text:?}")))
}

fn parse_flag(path: &Path, record: &csv::StringRecord, index: usize) -> Result<bool> {
    match record.get(index) {
        Some("0") => Ok(false),
        Some("1") => Ok(true),
        other => Err(bad_line(path, record, format!("bad dedup flag {other:?}"))),
    }
}

fn subject_node(path: &Path, record: &csv::StringRecord, corpus: &Corpus, id: u64) -> Result<u32> {
    corpus
        .node(id)
        .filter(|&n| corpus.is_subject(n))
        .ok_or_else(|| bad_line(path, record, format!("paper {id} is not in the analysis corpus")))
}

/// Reads `frontiers.csv` back. Levels without members are not represented.
pub fn read_frontiers(path: &Path, corpus: &Corpus) -> Result<Vec<FrontierLevel>> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    let mut grouped: BTreeMap<(bool, u8), Vec<(u32, NaiveDate)>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let distance: u8 = field(path, &record, 0, "distance")?;
        let id: u64 = field(path, &record, 1, "paper id")?;
        let date: NaiveDate = field(path, &record, 2, "date")?;
        let dedup = parse_flag(path, &record, 3)?;
        let node = subject_node(path, &record, corpus, id)?;
        grouped.entry((dedup, distance)).or_default().push((node, date));
    }
    grouped
        .into_iter()
        .map(|((dedup, distance), entries)| FrontierLevel::from_entries(distance, dedup, entries))
        .collect()
}

const HARM_HEADER: [&str; 4 + HARM_COLUMNS] = [
    "paper_id",
    "distance",
    "dedup_flag",
    "pre_post_flag",
    "harm_total",
    "harm_y1",
    "harm_y2",
    "harm_y3",
    "harm_y4",
    "harm_y5",
    "harm_y6",
    "harm_y7",
    "harm_y8",
    "harm_y9",
    "harm_y10",
];

/// Harm values are written in shortest round-trip form; blank means
/// undefined.
pub fn write_harm(records: &[HarmRecord], out: &mut dyn Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(HARM_HEADER)?;
    let mut row: Vec<String> = Vec::with_capacity(HARM_HEADER.len());
    for r in records {
        row.clear();
        row.push(r.harm.paper.to_string());
        row.push(r.distance.to_string());
        row.push(u8::from(r.dedup).to_string());
        row.push(r.timing.map_or("", Timing::as_str).to_string());
        row.extend(
            r.harm
                .columns()
                .iter()
                .map(|v| v.map_or_else(String::new, |v| v.to_string())),
        );
        writer.write_record(&row)?;
    }
    writer.flush().map_err(|e| Error::Csv(e.into()))
}

pub fn read_harm(path: &Path) -> Result<Vec<HarmRecord>> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    let mut records = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != HARM_HEADER.len() {
            return Err(bad_line(path, &record, format!("expected {} columns", HARM_HEADER.len())));
        }
        let timing = match &record[3] {
            "" => None,
            "pre" => Some(Timing::Pre),
            "post" => Some(Timing::Post),
            other => return Err(bad_line(path, &record, format!("bad pre/post flag {other:?}"))),
        };
        let mut values = [None; HARM_COLUMNS];
        for (c, slot) in values.iter_mut().enumerate() {
            if !record[4 + c].is_empty() {
                *slot = Some(field::<f64>(path, &record, 4 + c, "harm value")?);
            }
        }
        records.push(HarmRecord {
            distance: field(path, &record, 1, "distance")?,
            dedup: parse_flag(path, &record, 2)?,
            timing,
            harm: HarmVector {
                paper: field(path, &record, 0, "paper id")?,
                total: values[0],
                yearly: std::array::from_fn(|k| values[k + 1]),
            },
        });
    }
    Ok(records)
}

pub fn table_files(table: &StatsTable) -> [String; 2] {
    let stem = table.family.file_stem();
    [format!("{stem}.csv"), format!("{stem}.json")]
}

fn load_graph(cfg: &RunConfig, inputs: &Inputs, fingerprint: &[u8; 32]) -> Result<(CitationGraph, GraphReport)> {
    let cache = cfg.output.join(GRAPH_CACHE);
    let graph = read_cache(&cache, fingerprint, &inputs.corpus)?.ok_or_else(|| {
        Error::Dependency(format!(
            "{} does not match the current inputs; run build first",
            cache.display()
        ))
    })?;
    let report = read_json(&cfg.output.join(GRAPH_REPORT))?;
    Ok((graph, report))
}

pub struct RunOutcome {
    pub manifest: RunManifest,
    pub inputs: Inputs,
    /// Filled in by `all`.
    pub analysis: Option<Analysis>,
}

struct Timer(Instant, &'static str);

impl Timer {
    fn start(what: &'static str) -> Self {
        log::info!("{what}...");
        Timer(Instant::now(), what)
    }
}

impl Drop for Timer {
    fn drop(&mut self) {
        log::info!("{} took {:.2?}", self.1, self.0.elapsed());
    }
}

/// Runs one stage (or `all`) and writes its artifacts plus the run manifest
/// into `cfg.output`.
pub fn run(stage: Stage, cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let out = cfg.output.clone();
    for name in stage.prerequisites() {
        if !out.join(name).is_file() {
            return Err(Error::Dependency(format!(
                "{} needs {} in {}; run the earlier stage first",
                stage.name(),
                name,
                out.display()
            )));
        }
    }
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let path = |name: &str| -> PathBuf { out.join(name) };

    let hashes = InputHashes::compute(cfg)?;
    let fingerprint = hashes.fingerprint(cfg.cutoff_year);
    let mut manifest = RunManifest::new(stage.name(), cfg, hashes);

    let inputs = {
        let _t = Timer::start("ingest");
        ingest(cfg)?
    };
    log::info!(
        "{} publications kept, {} in the analysis corpus, {} retractions matched",
        inputs.corpus.len(),
        inputs.corpus.subject_count(),
        inputs.report.retractions.matched
    );
    write_json(&path(INGEST_REPORT), &inputs.report)?;
    manifest.outputs.push(INGEST_REPORT.into());
    manifest.drop_counters.ingest = inputs.report.clone();

    let mut levels = Vec::new();
    let mut records = None;
    if stage != Stage::Ingest && stage != Stage::Stats {
        let (graph, report) = if matches!(stage, Stage::Build | Stage::All) {
            let _t = Timer::start("graph build");
            let (graph, report) = build_graph(&inputs.corpus, &inputs.edges);
            write_cache(&graph, &path(GRAPH_CACHE), &fingerprint)?;
            write_json(&path(GRAPH_REPORT), &report)?;
            manifest.outputs.extend([GRAPH_CACHE.into(), GRAPH_REPORT.into()]);
            (graph, report)
        } else {
            load_graph(cfg, &inputs, &fingerprint)?
        };
        log::info!("graph: {} nodes, {} edges", graph.node_count(), graph.edge_count());
        manifest.drop_counters.graph = Some(report);

        if stage == Stage::Harm {
            levels = read_frontiers(&path(FRONTIERS), &inputs.corpus)?;
        } else if stage != Stage::Build {
            let _t = Timer::start("frontiers");
            let seeds = seeds(&inputs.corpus, &inputs.retractions);
            levels = frontier_levels(&graph, &seeds, cfg.max_distance, cfg.dedup)?;
            write_atomic(&path(FRONTIERS), |w| write_frontiers(&levels, &inputs.corpus, w))?;
            manifest.outputs.push(FRONTIERS.into());
            for level in &levels {
                log::info!(
                    "distance {}{}: {} papers",
                    level.distance(),
                    if level.is_deduplicated() { " (dedup)" } else { "" },
                    level.len()
                );
            }
        }

        if matches!(stage, Stage::Harm | Stage::All) {
            let _t = Timer::start("harm");
            let computed = harm_records(
                &graph,
                &inputs.corpus,
                &levels,
                cfg.self_exclude,
                cfg.exclude_year_only,
            )?;
            write_atomic(&path(HARM), |w| write_harm(&computed, w))?;
            manifest.outputs.push(HARM.into());
            records = Some(computed);
        }
    }

    let mut analysis = None;
    if matches!(stage, Stage::Stats | Stage::All) {
        let _t = Timer::start("stats");
        let records = match records {
            Some(r) => r,
            None => read_harm(&path(HARM))?,
        };
        let attrs = AttributeTable::from_corpus(&inputs.corpus, &inputs.impact);
        let tables = all_tables(&records, &attrs, cfg.dedup);
        for table in &tables {
            let [csv_name, json_name] = table_files(table);
            write_atomic(&path(&csv_name), |w| write_table_csv(table, w))?;
            write_atomic(&path(&json_name), |w| write_table_json(table, w))?;
            manifest.outputs.extend([csv_name, json_name]);
        }
        if stage == Stage::All {
            analysis = Some(Analysis {
                levels,
                records,
                tables,
            });
        }
    }

    manifest.outputs.push(RUN_MANIFEST.into());
    write_json(&path(RUN_MANIFEST), &manifest)?;
    Ok(RunOutcome {
        manifest,
        inputs,
        analysis,
    })
}
