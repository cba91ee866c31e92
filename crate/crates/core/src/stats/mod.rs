//! Stratified quartile tables over harm vectors.
//!
//! Each table family groups harm records by a stratum key and summarizes every
//! harm column (total, Y1..Y10) with [`quantiles`]. Undefined harm entries
//! never enter a cell, and strata without papers are omitted. Rows come out
//! sorted by stratum key.

mod emit;
mod quantile;

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use emit::{format_cell, parse_cell, write_table_csv, write_table_json};
pub use quantile::{quantiles, quantiles_in_place, sorted_quantile, QuartileSummary, QUANTILE_METHOD};

use crate::frontier::Timing;
use crate::harm::{HarmVector, HARM_COLUMNS};
use crate::ingest::{Corpus, ImpactTable, PaperId};

/// Journal impact-factor ranges, half-open on the right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IfBin {
    #[serde(rename = "0~3")]
    Below3,
    #[serde(rename = "3~5")]
    From3To5,
    #[serde(rename = "5~10")]
    From5To10,
    #[serde(rename = "10~20")]
    From10To20,
    #[serde(rename = "20~")]
    From20,
}

impl IfBin {
    pub const ALL: [IfBin; 5] = [
        IfBin::Below3,
        IfBin::From3To5,
        IfBin::From5To10,
        IfBin::From10To20,
        IfBin::From20,
    ];

    /// `None` for negative or non-finite values.
    pub fn from_impact(impact_factor: f64) -> Option<Self> {
        if !impact_factor.is_finite() || impact_factor < 0.0 {
            return None;
        }
        Some(if impact_factor < 3.0 {
            IfBin::Below3
        } else if impact_factor < 5.0 {
            IfBin::From3To5
        } else if impact_factor < 10.0 {
            IfBin::From5To10
        } else if impact_factor < 20.0 {
            IfBin::From10To20
        } else {
            IfBin::From20
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            IfBin::Below3 => "0~3",
            IfBin::From3To5 => "3~5",
            IfBin::From5To10 => "5~10",
            IfBin::From10To20 => "10~20",
            IfBin::From20 => "20~",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FieldGroup {
    All,
    Field(String),
}

impl FieldGroup {
    pub fn label(&self) -> &str {
        match self {
            FieldGroup::All => "All",
            FieldGroup::Field(f) => f,
        }
    }
}

/// Identifies one table row. At most one of `field`, `if_bin` and `timing`
/// is set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StratumKey {
    pub distance: u8,
    pub dedup: bool,
    pub field: Option<FieldGroup>,
    pub if_bin: Option<IfBin>,
    pub timing: Option<Timing>,
}

impl StratumKey {
    pub fn level(distance: u8, dedup: bool) -> Self {
        Self {
            distance,
            dedup,
            field: None,
            if_bin: None,
            timing: None,
        }
    }
}

/// Column names, in harm-vector order.
pub const COLUMN_NAMES: [&str; HARM_COLUMNS] = [
    "total", "y1", "y2", "y3", "y4", "y5", "y6", "y7", "y8", "y9", "y10",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub key: StratumKey,
    /// Papers in the stratum, whether or not their entries are defined.
    pub nums: usize,
    pub cells: [Option<QuartileSummary>; HARM_COLUMNS],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableFamily {
    Field,
    Distance,
    DistanceDedup,
    ImpactFactor,
    PrePost,
}

impl TableFamily {
    pub const ALL: [TableFamily; 5] = [
        TableFamily::Field,
        TableFamily::Distance,
        TableFamily::DistanceDedup,
        TableFamily::ImpactFactor,
        TableFamily::PrePost,
    ];

    pub fn file_stem(self) -> &'static str {
        match self {
            TableFamily::Field => "field",
            TableFamily::Distance => "distance",
            TableFamily::DistanceDedup => "distance_dedup",
            TableFamily::ImpactFactor => "if",
            TableFamily::PrePost => "prepost",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsTable {
    pub family: TableFamily,
    pub rows: Vec<StatsRow>,
}

/// Which frontier variants a run analyses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DedupMode {
    #[default]
    Both,
    DedupOnly,
    RepeatsOnly,
}

impl DedupMode {
    pub fn includes_repeats(self) -> bool {
        self != DedupMode::DedupOnly
    }

    pub fn includes_dedup(self) -> bool {
        self != DedupMode::RepeatsOnly
    }

    /// Variant feeding the field, impact-factor and pre/post tables: the
    /// duplicate-preserving levels unless only deduplicated ones exist.
    pub fn primary_is_dedup(self) -> bool {
        self == DedupMode::DedupOnly
    }
}

impl std::str::FromStr for DedupMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "both" => Ok(DedupMode::Both),
            "dedup-only" => Ok(DedupMode::DedupOnly),
            "repeats-only" => Ok(DedupMode::RepeatsOnly),
            other => Err(format!(
                "unknown dedup mode {other:?}; expected both, dedup-only or repeats-only"
            )),
        }
    }
}

/// One frontier member's harm, tagged with its level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmRecord {
    pub distance: u8,
    pub dedup: bool,
    /// `None` when the member was set aside for lacking an exact date.
    pub timing: Option<Timing>,
    pub harm: HarmVector,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PaperAttributes {
    pub fields: Vec<String>,
    pub impact_factor: Option<f64>,
}

/// Field labels and venue impact factor per analysis-corpus paper.
#[derive(Debug, Clone, Default)]
pub struct AttributeTable {
    by_paper: HashMap<PaperId, PaperAttributes>,
}

impl AttributeTable {
    pub fn from_corpus(corpus: &Corpus, impact: &ImpactTable) -> Self {
        let by_paper = (0..corpus.len() as u32)
            .filter(|&node| corpus.is_subject(node))
            .map(|node| {
                let record = corpus.record(node);
                let attrs = PaperAttributes {
                    fields: corpus.field_labels(node).map(str::to_string).collect(),
                    impact_factor: record.venue.and_then(|v| impact.get(v)),
                };
                (record.id, attrs)
            })
            .collect();
        Self { by_paper }
    }

    pub fn insert(&mut self, paper: PaperId, attrs: PaperAttributes) {
        self.by_paper.insert(paper, attrs);
    }

    pub fn get(&self, paper: PaperId) -> Option<&PaperAttributes> {
        self.by_paper.get(&paper)
    }
}

fn summarize(groups: BTreeMap<StratumKey, Vec<&HarmVector>>) -> Vec<StatsRow> {
    groups
        .into_par_iter()
        .map(|(key, vectors)| {
            let cells = std::array::from_fn(|column| {
                let mut values: Vec<f64> =
                    vectors.iter().filter_map(|v| v.column(column)).collect();
                quantiles_in_place(&mut values)
            });
            StatsRow {
                key,
                nums: vectors.len(),
                cells,
            }
        })
        .collect()
}

fn selected(records: &[HarmRecord], dedup: bool) -> impl Iterator<Item = &HarmRecord> {
    records.iter().filter(move |r| r.dedup == dedup)
}

/// Distance-1 papers by field, plus an `All` row. A paper counts once in
/// every field it belongs to.
pub fn field_analysis(records: &[HarmRecord], attrs: &AttributeTable, dedup: bool) -> StatsTable {
    let mut groups: BTreeMap<StratumKey, Vec<&HarmVector>> = BTreeMap::new();
    for record in selected(records, dedup).filter(|r| r.distance == 1) {
        let mut key = StratumKey::level(1, dedup);
        key.field = Some(FieldGroup::All);
        groups.entry(key.clone()).or_default().push(&record.harm);
        if let Some(a) = attrs.get(record.harm.paper) {
            for field in &a.fields {
                key.field = Some(FieldGroup::Field(field.clone()));
                groups.entry(key.clone()).or_default().push(&record.harm);
            }
        }
    }
    StatsTable {
        family: TableFamily::Field,
        rows: summarize(groups),
    }
}

/// Distance × impact-factor bin. Papers whose venue has no impact factor
/// are left out of this family only.
pub fn if_analysis(records: &[HarmRecord], attrs: &AttributeTable, dedup: bool) -> StatsTable {
    let mut groups: BTreeMap<StratumKey, Vec<&HarmVector>> = BTreeMap::new();
    for record in selected(records, dedup) {
        let bin = attrs
            .get(record.harm.paper)
            .and_then(|a| a.impact_factor)
            .and_then(IfBin::from_impact);
        if let Some(bin) = bin {
            let mut key = StratumKey::level(record.distance, dedup);
            key.if_bin = Some(bin);
            groups.entry(key).or_default().push(&record.harm);
        }
    }
    StatsTable {
        family: TableFamily::ImpactFactor,
        rows: summarize(groups),
    }
}

/// Distance × before/after the earliest reachable retraction.
pub fn prepost_analysis(records: &[HarmRecord], dedup: bool) -> StatsTable {
    let mut groups: BTreeMap<StratumKey, Vec<&HarmVector>> = BTreeMap::new();
    for record in selected(records, dedup) {
        if let Some(timing) = record.timing {
            let mut key = StratumKey::level(record.distance, dedup);
            key.timing = Some(timing);
            groups.entry(key).or_default().push(&record.harm);
        }
    }
    StatsTable {
        family: TableFamily::PrePost,
        rows: summarize(groups),
    }
}

/// One row per citation distance.
pub fn distance_analysis(records: &[HarmRecord], dedup: bool) -> StatsTable {
    let mut groups: BTreeMap<StratumKey, Vec<&HarmVector>> = BTreeMap::new();
    for record in selected(records, dedup) {
        groups
            .entry(StratumKey::level(record.distance, dedup))
            .or_default()
            .push(&record.harm);
    }
    StatsTable {
        family: if dedup {
            TableFamily::DistanceDedup
        } else {
            TableFamily::Distance
        },
        rows: summarize(groups),
    }
}

/// Every table family the mode calls for, in [`TableFamily::ALL`] order.
pub fn all_tables(records: &[HarmRecord], attrs: &AttributeTable, mode: DedupMode) -> Vec<StatsTable> {
    let primary = mode.primary_is_dedup();
    let mut tables = vec![field_analysis(records, attrs, primary)];
    if mode.includes_repeats() {
        tables.push(distance_analysis(records, false));
    }
    if mode.includes_dedup() {
        tables.push(distance_analysis(records, true));
    }
    tables.push(if_analysis(records, attrs, primary));
    tables.push(prepost_analysis(records, primary));
    tables
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vector(paper: PaperId, values: [Option<f64>; HARM_COLUMNS]) -> HarmVector {
        HarmVector {
            paper,
            total: values[0],
            yearly: std::array::from_fn(|i| values[i + 1]),
        }
    }

    fn record(paper: PaperId, distance: u8, timing: Timing, h: f64) -> HarmRecord {
        HarmRecord {
            distance,
            dedup: false,
            timing: Some(timing),
            harm: vector(paper, [Some(h); HARM_COLUMNS]),
        }
    }

    fn attrs(rows: &[(PaperId, &[&str], Option<f64>)]) -> AttributeTable {
        let mut table = AttributeTable::default();
        for (paper, fields, impact) in rows {
            table.insert(
                *paper,
                PaperAttributes {
                    fields: fields.iter().map(|f| f.to_string()).collect(),
                    impact_factor: *impact,
                },
            );
        }
        table
    }

    #[test]
    fn if_bins_half_open() {
        let cases = [
            (2.999, IfBin::Below3),
            (3.0, IfBin::From3To5),
            (4.999, IfBin::From3To5),
            (5.0, IfBin::From5To10),
            (9.999, IfBin::From5To10),
            (10.0, IfBin::From10To20),
            (19.999, IfBin::From10To20),
            (20.0, IfBin::From20),
            (100.0, IfBin::From20),
            (0.0, IfBin::Below3),
        ];
        for (value, bin) in cases {
            assert_eq!(IfBin::from_impact(value), Some(bin), "{value}");
        }
        assert_eq!(IfBin::from_impact(-0.5), None);
        assert_eq!(IfBin::from_impact(f64::NAN), None);
    }

    #[test]
    fn multi_field_paper_counts_in_each() {
        let records = [record(1, 1, Timing::Pre, 0.5)];
        let table = field_analysis(&records, &attrs(&[(1, &["biology", "medicine"], None)]), false);
        let labels: Vec<&str> = table
            .rows
            .iter()
            .map(|r| r.key.field.as_ref().unwrap().label())
            .collect();
        assert_eq!(labels, vec!["All", "biology", "medicine"]);
        assert!(table.rows.iter().all(|r| r.nums == 1));
    }

    #[test]
    fn single_field_matches_all() {
        let records = [
            record(1, 1, Timing::Pre, 0.5),
            record(2, 1, Timing::Post, -0.25),
            record(3, 2, Timing::Post, 0.9),
        ];
        let table = field_analysis(
            &records,
            &attrs(&[(1, &["biology"], None), (2, &["biology"], None), (3, &["biology"], None)]),
            false,
        );
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.rows[0].cells, table.rows[1].cells);
        assert_eq!(table.rows[0].nums, 2);
    }

    #[test]
    fn missing_if_excluded_and_boundary_bins() {
        let records = [
            record(1, 1, Timing::Pre, 0.1),
            record(2, 1, Timing::Pre, 0.2),
            record(3, 1, Timing::Pre, 0.3),
        ];
        let table = if_analysis(
            &records,
            &attrs(&[(1, &[], Some(10.0)), (2, &[], None), (3, &[], Some(9.999))]),
            false,
        );
        let bins: Vec<IfBin> = table.rows.iter().map(|r| r.key.if_bin.unwrap()).collect();
        assert_eq!(bins, vec![IfBin::From5To10, IfBin::From10To20]);
        assert_eq!(table.rows[1].cells[0].unwrap().q2, 0.1);
    }

    #[test]
    fn empty_timing_stratum_omitted() {
        let records = [record(1, 1, Timing::Pre, 0.1), record(2, 1, Timing::Pre, 0.2)];
        let table = prepost_analysis(&records, false);
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].key.timing, Some(Timing::Pre));
    }

    #[test]
    fn undefined_entries_never_enter_cells() {
        let mut values = [None; HARM_COLUMNS];
        values[3] = Some(0.4);
        let records = [
            HarmRecord { distance: 2, dedup: false, timing: None, harm: vector(1, values) },
            HarmRecord { distance: 2, dedup: false, timing: None, harm: HarmVector::undefined(2) },
        ];
        let table = distance_analysis(&records, false);
        let row = &table.rows[0];
        assert_eq!(row.nums, 2);
        assert_eq!(row.cells[3].unwrap().count, 1);
        assert!(row.cells[0].is_none());
    }

    #[test]
    fn mode_selects_families() {
        let fams = |mode| {
            all_tables(&[], &AttributeTable::default(), mode)
                .iter()
                .map(|t| t.family)
                .collect::<Vec<_>>()
        };
        assert_eq!(fams(DedupMode::Both), TableFamily::ALL.to_vec());
        assert!(!fams(DedupMode::DedupOnly).contains(&TableFamily::Distance));
        assert!(!fams(DedupMode::RepeatsOnly).contains(&TableFamily::DistanceDedup));
    }

    fn arb_records() -> impl Strategy<Value = Vec<(u8, bool, Option<f64>, u8)>> {
        proptest::collection::vec(
            (1u8..4, any::<bool>(), proptest::option::weighted(0.8, -3.0f64..1.0), 0u8..8),
            0..60,
        )
    }

    const FIELDS: [&str; 3] = ["a", "b", "c"];

    fn build(rows: &[(u8, bool, Option<f64>, u8)]) -> (Vec<HarmRecord>, AttributeTable) {
        let mut table = AttributeTable::default();
        let records = rows
            .iter()
            .enumerate()
            .map(|(i, &(distance, pre, h, mask))| {
                let fields = FIELDS
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| mask & (1 << b) != 0)
                    .map(|(_, f)| f.to_string())
                    .collect();
                table.insert(i as u64, PaperAttributes { fields, impact_factor: None });
                HarmRecord {
                    distance,
                    dedup: false,
                    timing: Some(if pre { Timing::Pre } else { Timing::Post }),
                    harm: vector(i as u64, [h; HARM_COLUMNS]),
                }
            })
            .collect();
        (records, table)
    }

    proptest! {
        #[test]
        fn field_contributions_are_additive(rows in arb_records()) {
            let (records, attrs) = build(&rows);
            let table = field_analysis(&records, &attrs, false);
            let contributed: usize = table.rows.iter()
                .filter(|r| r.key.field != Some(FieldGroup::All))
                .map(|r| r.cells[0].map_or(0, |c| c.count))
                .sum();
            let expected: usize = records.iter()
                .filter(|r| r.distance == 1 && r.harm.total.is_some())
                .map(|r| attrs.get(r.harm.paper).unwrap().fields.len())
                .sum();
            prop_assert_eq!(contributed, expected);
        }

        #[test]
        fn input_order_irrelevant(rows in arb_records()) {
            let (records, attrs) = build(&rows);
            let mut reversed = records.clone();
            reversed.reverse();
            prop_assert_eq!(
                all_tables(&records, &attrs, DedupMode::RepeatsOnly),
                all_tables(&reversed, &attrs, DedupMode::RepeatsOnly)
            );
        }

        #[test]
        fn matches_group_then_sort(rows in arb_records()) {
            let (records, _) = build(&rows);
            let table = prepost_analysis(&records, false);
            for row in &table.rows {
                let mut values: Vec<f64> = records.iter()
                    .filter(|r| r.distance == row.key.distance && r.timing == row.key.timing)
                    .filter_map(|r| r.harm.total)
                    .collect();
                values.sort_by(|a, b| a.partial_cmp(b).unwrap());
                match row.cells[0] {
                    None => prop_assert!(values.is_empty()),
                    Some(cell) => {
                        prop_assert_eq!(cell.count, values.len());
                        prop_assert!(values[0] <= cell.q1 && cell.q3 <= values[values.len() - 1]);
                        prop_assert!(cell.q1 <= cell.q2 && cell.q2 <= cell.q3);
                    }
                }
            }
        }
    }
}
