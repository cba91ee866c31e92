//! Brute-force reference for every pipeline output.
//!
//! Works on plain ids, labels and dates and recomputes each quantity straight
//! from its definition: frontier levels by relaxing every edge once per
//! length, cohorts by scanning all paper pairs, quartiles by sorting. Only the
//! output data types are shared with the pipeline.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;

use crate::frontier::Timing;
use crate::stats::{
    DedupMode, FieldGroup, IfBin, QuartileSummary, StatsRow, StatsTable, StratumKey, TableFamily,
};

#[derive(Debug, Clone, PartialEq)]
pub struct OraclePaper {
    pub id: u64,
    pub year: i32,
    /// Publication date, or July 1 of `year` when only the year is known.
    pub date: NaiveDate,
    pub exact_date: bool,
    pub venue: Option<String>,
    pub fields: BTreeSet<String>,
    pub citation_count: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleInput {
    /// The deduplicated corpus.
    pub papers: Vec<OraclePaper>,
    /// Edges as read, including self loops, repeats and dangling ids.
    pub edges: Vec<(u64, u64)>,
    /// Retracted papers with their retraction dates.
    pub seeds: Vec<(u64, NaiveDate)>,
    /// Impact factor by venue label.
    pub impact: BTreeMap<String, f64>,
    pub cutoff_year: i32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub max_distance: u8,
    pub dedup: DedupMode,
    pub self_exclude: bool,
    pub exclude_year_only: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            max_distance: 6,
            dedup: DedupMode::Both,
            self_exclude: true,
            exclude_year_only: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleOutput {
    /// `(distance, deduplicated)` → member id → earliest retraction date.
    pub frontiers: BTreeMap<(u8, bool), BTreeMap<u64, NaiveDate>>,
    /// Total then years 1..=10 for every frontier member.
    pub harm: BTreeMap<u64, [Option<f64>; 11]>,
    pub tables: Vec<StatsTable>,
}

struct Record {
    distance: u8,
    dedup: bool,
    paper: u64,
    timing: Option<Timing>,
}

pub fn run_oracle(input: &OracleInput, opts: &OracleOptions) -> OracleOutput {
    let papers: BTreeMap<u64, &OraclePaper> = input.papers.iter().map(|p| (p.id, p)).collect();
    let is_subject = |p: &OraclePaper| {
        p.year <= input.cutoff_year && p.venue.is_some() && !p.fields.is_empty()
    };

    let edges: BTreeSet<(u64, u64)> = input
        .edges
        .iter()
        .copied()
        .filter(|(a, b)| a != b && papers.contains_key(a) && papers.contains_key(b))
        .collect();

    // Level n: subjects with an edge into level n-1 (level 0 being the
    // retracted papers), keeping the smallest date carried along.
    let mut repeats: Vec<BTreeMap<u64, NaiveDate>> = Vec::new();
    let mut previous: BTreeMap<u64, NaiveDate> = BTreeMap::new();
    for &(id, date) in &input.seeds {
        if papers.contains_key(&id) {
            let slot = previous.entry(id).or_insert(date);
            if date < *slot {
                *slot = date;
            }
        }
    }
    for _ in 0..opts.max_distance {
        let mut current: BTreeMap<u64, NaiveDate> = BTreeMap::new();
        for &(citing, cited) in &edges {
            let Some(&date) = previous.get(&cited) else { continue };
            if !is_subject(papers[&citing]) {
                continue;
            }
            let slot = current.entry(citing).or_insert(date);
            if date < *slot {
                *slot = date;
            }
        }
        repeats.push(current.clone());
        previous = current;
    }

    let mut frontiers = BTreeMap::new();
    for (i, level) in repeats.iter().enumerate() {
        let n = i as u8 + 1;
        if opts.dedup != DedupMode::DedupOnly {
            frontiers.insert((n, false), level.clone());
        }
        if opts.dedup != DedupMode::RepeatsOnly {
            let first: BTreeMap<u64, NaiveDate> = level
                .iter()
                .filter(|(id, _)| !repeats[..i].iter().any(|earlier| earlier.contains_key(id)))
                .map(|(id, d)| (*id, *d))
                .collect();
            frontiers.insert((n, true), first);
        }
    }

    // Yearly incoming citations by year offset, one pass over the edges.
    let mut yearly: BTreeMap<u64, [u64; 10]> = BTreeMap::new();
    for &(citing, cited) in &edges {
        let offset = papers[&citing].year - papers[&cited].year;
        if (1..=10).contains(&offset) {
            yearly.entry(cited).or_insert([0; 10])[offset as usize - 1] += 1;
        }
    }
    let yearly_of = |id: u64| yearly.get(&id).copied().unwrap_or([0; 10]);

    let members: BTreeSet<u64> = frontiers.values().flat_map(|m| m.keys().copied()).collect();
    let mut harm = BTreeMap::new();
    for &c_id in &members {
        let c = papers[&c_id];
        let cohort: Vec<&OraclePaper> = input
            .papers
            .iter()
            .filter(|d| is_subject(d))
            .filter(|d| !(opts.self_exclude && d.id == c.id))
            .filter(|d| d.venue == c.venue)
            .filter(|d| (d.year - c.year).abs() <= 1)
            .filter(|d| d.fields.intersection(&c.fields).next().is_some())
            .collect();
        let n = cohort.len() as f64;
        let ratio = |own: u64, total: u64| -> Option<f64> {
            if cohort.is_empty() || total == 0 {
                None
            } else {
                let mean = total as f64 / n;
                Some(1.0 - own as f64 / mean)
            }
        };
        let mut vector = [None; 11];
        vector[0] = ratio(c.citation_count, cohort.iter().map(|d| d.citation_count).sum());
        let own_yearly = yearly_of(c.id);
        for k in 0..10 {
            let total: u64 = cohort.iter().map(|d| yearly_of(d.id)[k]).sum();
            vector[k + 1] = ratio(own_yearly[k], total);
        }
        harm.insert(c_id, vector);
    }

    let mut records = Vec::new();
    for (&(distance, dedup), level) in &frontiers {
        for (&paper, &earliest) in level {
            let p = papers[&paper];
            let timing = if opts.exclude_year_only && !p.exact_date {
                None
            } else if p.date < earliest {
                Some(Timing::Pre)
            } else {
                Some(Timing::Post)
            };
            records.push(Record { distance, dedup, paper, timing });
        }
    }

    let primary = opts.dedup == DedupMode::DedupOnly;
    let mut tables = Vec::new();

    let mut groups: Vec<(StratumKey, Vec<u64>)> = Vec::new();
    for r in records.iter().filter(|r| r.distance == 1 && r.dedup == primary) {
        let mut key = StratumKey::level(1, primary);
        key.field = Some(FieldGroup::All);
        push(&mut groups, key.clone(), r.paper);
        for f in &papers[&r.paper].fields {
            key.field = Some(FieldGroup::Field(f.clone()));
            push(&mut groups, key.clone(), r.paper);
        }
    }
    tables.push(table(TableFamily::Field, groups, &harm));

    for (dedup, family, wanted) in [
        (false, TableFamily::Distance, opts.dedup != DedupMode::DedupOnly),
        (true, TableFamily::DistanceDedup, opts.dedup != DedupMode::RepeatsOnly),
    ] {
        if !wanted {
            continue;
        }
        let mut groups = Vec::new();
        for r in records.iter().filter(|r| r.dedup == dedup) {
            push(&mut groups, StratumKey::level(r.distance, dedup), r.paper);
        }
        tables.push(table(family, groups, &harm));
    }

    let mut groups = Vec::new();
    for r in records.iter().filter(|r| r.dedup == primary) {
        let value = papers[&r.paper]
            .venue
            .as_ref()
            .and_then(|v| input.impact.get(v))
            .copied();
        if let Some(bin) = value.and_then(bin_of) {
            let mut key = StratumKey::level(r.distance, primary);
            key.if_bin = Some(bin);
            push(&mut groups, key, r.paper);
        }
    }
    tables.push(table(TableFamily::ImpactFactor, groups, &harm));

    let mut groups = Vec::new();
    for r in records.iter().filter(|r| r.dedup == primary) {
        if let Some(timing) = r.timing {
            let mut key = StratumKey::level(r.distance, primary);
            key.timing = Some(timing);
            push(&mut groups, key, r.paper);
        }
    }
    tables.push(table(TableFamily::PrePost, groups, &harm));

    OracleOutput { frontiers, harm, tables }
}

fn bin_of(value: f64) -> Option<IfBin> {
    const BOUNDS: [(f64, f64, IfBin); 5] = [
        (0.0, 3.0, IfBin::Below3),
        (3.0, 5.0, IfBin::From3To5),
        (5.0, 10.0, IfBin::From5To10),
        (10.0, 20.0, IfBin::From10To20),
        (20.0, f64::INFINITY, IfBin::From20),
    ];
    BOUNDS
        .iter()
        .find(|(lo, hi, _)| *lo <= value && value < *hi)
        .map(|(_, _, bin)| *bin)
}

fn push(groups: &mut Vec<(StratumKey, Vec<u64>)>, key: StratumKey, paper: u64) {
    match groups.iter_mut().find(|(k, _)| *k == key) {
        Some((_, papers)) => papers.push(paper),
        None => groups.push((key, vec![paper])),
    }
}

fn table(
    family: TableFamily,
    mut groups: Vec<(StratumKey, Vec<u64>)>,
    harm: &BTreeMap<u64, [Option<f64>; 11]>,
) -> StatsTable {
    groups.sort_by(|a, b| a.0.cmp(&b.0));
    let rows = groups
        .into_iter()
        .map(|(key, papers)| {
            let cells = std::array::from_fn(|c| {
                let mut values: Vec<f64> = papers.iter().filter_map(|p| harm[p][c]).collect();
                values.sort_by(|a, b| a.partial_cmp(b).expect("harm values are finite"));
                if values.is_empty() {
                    None
                } else {
                    Some(QuartileSummary {
                        q1: rank_quantile(&values, 0.25),
                        q2: rank_quantile(&values, 0.5),
                        q3: rank_quantile(&values, 0.75),
                        count: values.len(),
                    })
                }
            });
            StatsRow { key, nums: papers.len(), cells }
        })
        .collect();
    StatsTable { family, rows }
}

/// 1-based rank h = (n - 1)p + 1, interpolating between x_⌊h⌋ and x_⌊h⌋+1.
pub fn rank_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p + 1.0;
    let lower = h.floor() as usize;
    if lower >= n {
        return sorted[n - 1];
    }
    let below = sorted[lower - 1];
    below + (h - lower as f64) * (sorted[lower] - below)
}
