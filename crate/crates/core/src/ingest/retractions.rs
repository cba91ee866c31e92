use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::normalize::normalize_doi;
use super::{parse_date, Corpus, PaperId};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetractionRecord {
    pub doi: String,
    pub retraction_date: NaiveDate,
    pub original_pub_date: Option<NaiveDate>,
    /// Set when the DOI resolves in the deduplicated corpus. Unmatched
    /// records are kept for reporting but never seed a frontier.
    pub matched_pub_id: Option<PaperId>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetractionCounters {
    pub rows: u64,
    pub null_doi: u64,
    pub invalid_retraction_date: u64,
    pub duplicate_doi_collapsed: u64,
    pub retained: u64,
    pub matched: u64,
    pub unmatched: u64,
}

/// Reads a `doi,retraction_date,original_pub_date` CSV. Duplicate DOIs keep
/// the latest retraction date. Output is sorted by DOI.
pub fn load_retractions<R: Read>(
    source: R,
    origin: &Path,
    corpus: &Corpus,
    report: &mut RetractionCounters,
) -> Result<Vec<RetractionRecord>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let (Some(doi_col), Some(date_col)) = (col("doi"), col("retraction_date")) else {
        return Err(crate::Error::Input {
            path: origin.to_path_buf(),
            line: 1,
            message: "retraction header must name doi and retraction_date".into(),
        });
    };
    let original_col = col("original_pub_date");

    let mut latest: BTreeMap<String, RetractionRecord> = BTreeMap::new();
    for row in reader.records() {
        let row = row?;
        report.rows += 1;
        let Some(doi) = row.get(doi_col).and_then(normalize_doi) else {
            report.null_doi += 1;
            continue;
        };
        let Some(retraction_date) = row.get(date_col).and_then(parse_date) else {
            report.invalid_retraction_date += 1;
            if report.invalid_retraction_date <= 5 {
                let line = row.position().map_or(0, |p| p.line());
                log::warn!("{}:{line}: unparseable retraction date", origin.display());
            }
            continue;
        };
        let original_pub_date = original_col.and_then(|c| row.get(c)).and_then(parse_date);
        let candidate = RetractionRecord {
            doi: doi.clone(),
            retraction_date,
            original_pub_date,
            matched_pub_id: None,
        };
        match latest.get_mut(&doi) {
            None => {
                latest.insert(doi, candidate);
            }
            Some(existing) => {
                report.duplicate_doi_collapsed += 1;
                // Equal dates fall back to the later original_pub_date so the
                // choice never depends on row order.
                if (candidate.retraction_date, candidate.original_pub_date)
                    > (existing.retraction_date, existing.original_pub_date)
                {
                    *existing = candidate;
                }
            }
        }
    }

    let records: Vec<RetractionRecord> = latest
        .into_values()
        .map(|mut r| {
            r.matched_pub_id = corpus
                .node_by_doi(&r.doi)
                .map(|node| corpus.record(node).id);
            r
        })
        .collect();
    report.retained = records.len() as u64;
    report.matched = records.iter().filter(|r| r.matched_pub_id.is_some()).count() as u64;
    report.unmatched = report.retained - report.matched;
    Ok(records)
}
