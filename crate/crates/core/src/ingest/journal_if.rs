use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::normalize::{normalize_venue, Interner};
use super::VenueId;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JournalIfRecord {
    pub venue_id: VenueId,
    pub impact_factor: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JournalIfCounters {
    pub rows: u64,
    pub malformed: u64,
    pub negative: u64,
    pub unresolved_venue: u64,
    pub conflicting_rows: u64,
    pub linked: u64,
}

/// Venue → impact factor lookup built from linked records.
#[derive(Debug, Clone, Default)]
pub struct ImpactTable {
    by_venue: BTreeMap<VenueId, f64>,
}

impl ImpactTable {
    pub fn new(records: &[JournalIfRecord]) -> Self {
        Self {
            by_venue: records.iter().map(|r| (r.venue_id, r.impact_factor)).collect(),
        }
    }

    pub fn get(&self, venue: VenueId) -> Option<f64> {
        self.by_venue.get(&venue).copied()
    }

    pub fn len(&self) -> usize {
        self.by_venue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_venue.is_empty()
    }
}

/// Reads a `venue,impact_factor` CSV and links rows to the corpus venues by
/// normalized name. Conflicting rows for one venue keep the maximum.
pub fn load_journal_if<R: Read>(
    source: R,
    origin: &Path,
    venues: &Interner,
    report: &mut JournalIfCounters,
) -> Result<Vec<JournalIfRecord>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let (Some(venue_col), Some(if_col)) = (col("venue"), col("impact_factor")) else {
        return Err(crate::Error::Input {
            path: origin.to_path_buf(),
            line: 1,
            message: "impact-factor header must name venue and impact_factor".into(),
        });
    };

    let mut linked: BTreeMap<VenueId, f64> = BTreeMap::new();
    for row in reader.records() {
        let row = row?;
        report.rows += 1;
        let value = row
            .get(if_col)
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|v| v.is_finite());
        let Some(value) = value else {
            report.malformed += 1;
            continue;
        };
        if value < 0.0 {
            report.negative += 1;
            let line = row.position().map_or(0, |p| p.line());
            log::warn!("{}:{line}: negative impact factor {value}", origin.display());
            continue;
        }
        let venue = row
            .get(venue_col)
            .and_then(normalize_venue)
            .and_then(|name| venues.get(&name));
        let Some(venue) = venue else {
            report.unresolved_venue += 1;
            continue;
        };
        linked
            .entry(VenueId(venue))
            .and_modify(|current| {
                report.conflicting_rows += 1;
                *current = current.max(value);
            })
            .or_insert(value);
    }
    report.linked = linked.len() as u64;
    Ok(linked
        .into_iter()
        .map(|(venue_id, impact_factor)| JournalIfRecord {
            venue_id,
            impact_factor,
        })
        .collect())
}
