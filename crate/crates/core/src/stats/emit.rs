//! CSV and JSON renderings of [`StatsTable`].
//!
//! Cells print as `median (q1~q3)` in percent with two decimals. Raw
//! quartiles follow as separate columns so nothing is lost to rounding.

use std::io::Write;

use serde::Serialize;

use super::{QuartileSummary, StatsRow, StatsTable, TableFamily, COLUMN_NAMES, QUANTILE_METHOD};
use crate::{Error, Result};

fn percent(value: f64) -> String {
    let s = format!("{:.2}", value * 100.0);
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

pub fn format_cell(cell: Option<&QuartileSummary>) -> String {
    match cell {
        None => String::new(),
        Some(c) => format!("{} ({}~{})", percent(c.q2), percent(c.q1), percent(c.q3)),
    }
}

/// Inverse of [`format_cell`], returning `(q1, q2, q3)` as fractions.
pub fn parse_cell(text: &str) -> Option<(f64, f64, f64)> {
    let (median, rest) = text.trim().split_once(" (")?;
    let (q1, q3) = rest.strip_suffix(')')?.split_once('~')?;
    let parse = |s: &str| s.parse::<f64>().ok().map(|v| v / 100.0);
    Some((parse(q1)?, parse(median)?, parse(q3)?))
}

fn key_columns(family: TableFamily) -> &'static [&'static str] {
    match family {
        TableFamily::Field => &["distance", "dedup", "field"],
        TableFamily::Distance | TableFamily::DistanceDedup => &["distance", "dedup"],
        TableFamily::ImpactFactor => &["distance", "dedup", "if_bin"],
        TableFamily::PrePost => &["distance", "dedup", "timing"],
    }
}

fn key_values(family: TableFamily, row: &StatsRow) -> Vec<String> {
    let mut values = vec![row.key.distance.to_string(), u8::from(row.key.dedup).to_string()];
    match family {
        TableFamily::Field => {
            values.push(row.key.field.as_ref().map_or("", |f| f.label()).to_string())
        }
        TableFamily::ImpactFactor => {
            values.push(row.key.if_bin.map_or("", |b| b.label()).to_string())
        }
        TableFamily::PrePost => values.push(row.key.timing.map_or("", |t| t.as_str()).to_string()),
        TableFamily::Distance | TableFamily::DistanceDedup => {}
    }
    values
}

pub fn write_table_csv<W: Write>(table: &StatsTable, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header: Vec<String> = key_columns(table.family).iter().map(|s| s.to_string()).collect();
    header.push("nums".into());
    header.extend(COLUMN_NAMES.iter().map(|c| c.to_string()));
    for c in COLUMN_NAMES {
        for suffix in ["n", "q1", "q2", "q3"] {
            header.push(format!("{c}_{suffix}"));
        }
    }
    writer.write_record(&header)?;

    for row in &table.rows {
        let mut record = key_values(table.family, row);
        record.push(row.nums.to_string());
        record.extend(row.cells.iter().map(|c| format_cell(c.as_ref())));
        for cell in &row.cells {
            match cell {
                Some(c) => record.extend([
                    c.count.to_string(),
                    c.q1.to_string(),
                    c.q2.to_string(),
                    c.q3.to_string(),
                ]),
                None => record.extend(["0".to_string(), String::new(), String::new(), String::new()]),
            }
        }
        writer.write_record(&record)?;
    }
    writer
        .flush()
        .map_err(|e| Error::Contract(format!("flushing table csv: {e}")))
}

#[derive(Serialize)]
struct JsonCell<'a> {
    formatted: String,
    #[serde(flatten)]
    summary: Option<&'a QuartileSummary>,
}

#[derive(Serialize)]
struct JsonRow<'a> {
    #[serde(flatten)]
    key: &'a super::StratumKey,
    nums: usize,
    cells: std::collections::BTreeMap<&'static str, JsonCell<'a>>,
}

#[derive(Serialize)]
struct JsonTable<'a> {
    family: TableFamily,
    quantile_method: &'static str,
    rows: Vec<JsonRow<'a>>,
}

pub fn write_table_json<W: Write>(table: &StatsTable, mut out: W) -> Result<()> {
    let view = JsonTable {
        family: table.family,
        quantile_method: QUANTILE_METHOD,
        rows: table
            .rows
            .iter()
            .map(|row| JsonRow {
                key: &row.key,
                nums: row.nums,
                cells: COLUMN_NAMES
                    .iter()
                    .zip(&row.cells)
                    .map(|(name, cell)| {
                        (
                            *name,
                            JsonCell {
                                formatted: format_cell(cell.as_ref()),
                                summary: cell.as_ref(),
                            },
                        )
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut out, &view)?;
    out.write_all(b"\n")
        .map_err(|e| Error::Contract(format!("writing table json: {e}")))
}
