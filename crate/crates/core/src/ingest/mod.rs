//! Loading and cleaning of the publication, citation, retraction and
//! impact-factor snapshots.

mod edges;
mod journal_if;
pub mod normalize;
mod publications;
mod retractions;

use std::collections::HashMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use edges::{read_edges, read_edges_from, CitationEdgeRaw, EdgeFormat};
pub use journal_if::{load_journal_if, ImpactTable, JournalIfCounters, JournalIfRecord};
pub use normalize::Interner;
pub use publications::{
    dedup_by_doi, filter_analysis_corpus, load_publications, LoadedPublications,
    PublicationCounters,
};
pub use retractions::{load_retractions, RetractionCounters, RetractionRecord};

/// Corpus-unique publication identifier as it appears in the input files.
pub type PaperId = u64;

/// Earliest publication year admitted by the loader.
pub const MIN_YEAR: i32 = 1900;

/// Default analysis cutoff: leaves a ten-year citation window against a 2024 snapshot.
pub const DEFAULT_CUTOFF_YEAR: i32 = 2013;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VenueId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FieldId(pub u32);

#[derive(Debug, Clone, PartialEq)]
pub struct PublicationRecord {
    pub id: PaperId,
    pub doi: Option<String>,
    pub title: String,
    pub year: i32,
    pub venue: Option<VenueId>,
    /// Sorted and duplicate-free.
    pub fields: Vec<FieldId>,
    pub citation_count: u64,
    pub reference_count: u64,
    pub pub_date: Option<NaiveDate>,
}

impl PublicationRecord {
    /// Publication date used for pre/post-retraction comparisons. Records
    /// carrying only a year get July 1 of that year.
    pub fn effective_date(&self) -> NaiveDate {
        self.pub_date.unwrap_or_else(|| sentinel_date(self.year))
    }

    pub fn has_exact_date(&self) -> bool {
        self.pub_date.is_some()
    }

    pub fn is_analysis_eligible(&self, cutoff_year: i32) -> bool {
        self.year <= cutoff_year && self.venue.is_some() && !self.fields.is_empty()
    }
}

pub fn sentinel_date(year: i32) -> NaiveDate {
    NaiveDate::from_ymd_opt(year, 7, 1).expect("July 1 exists in every year")
}

/// Parses the date layouts seen in the snapshots: ISO `YYYY-MM-DD` (optionally
/// followed by a time part) and US `M/D/YYYY`.
pub fn parse_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    let head = raw.split([' ', 'T']).next().unwrap_or("");
    NaiveDate::parse_from_str(head, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(head, "%m/%d/%Y"))
        .ok()
}

/// Drop counters for every cleaning step, emitted as part of each run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub publications: PublicationCounters,
    pub retractions: RetractionCounters,
    pub journal_if: JournalIfCounters,
}

/// The deduplicated publication set plus the analysis-corpus mask.
///
/// Every retained record is a graph node (its citations count towards yearly
/// totals); only records passing [`filter_analysis_corpus`] are analysis
/// subjects (frontier members and comparator candidates).
#[derive(Debug, Clone)]
pub struct Corpus {
    records: Vec<PublicationRecord>,
    venues: Interner,
    fields: Interner,
    index: HashMap<PaperId, u32>,
    doi_index: HashMap<String, u32>,
    subject: Vec<bool>,
    cutoff_year: i32,
}

impl Corpus {
    /// `records` must already be deduplicated by DOI.
    pub fn new(
        mut records: Vec<PublicationRecord>,
        venues: Interner,
        fields: Interner,
        cutoff_year: i32,
    ) -> crate::Result<Self> {
        records.sort_by_key(|r| r.id);
        let mut index = HashMap::with_capacity(records.len());
        let mut doi_index = HashMap::new();
        for (node, record) in records.iter().enumerate() {
            if index.insert(record.id, node as u32).is_some() {
                return Err(crate::Error::Contract(format!(
                    "duplicate publication id {}",
                    record.id
                )));
            }
            if let Some(doi) = &record.doi {
                if doi_index.insert(doi.clone(), node as u32).is_some() {
                    return Err(crate::Error::Contract(format!(
                        "doi {doi} appears twice; deduplicate before building the corpus"
                    )));
                }
            }
        }
        let subject = records
            .iter()
            .map(|r| r.is_analysis_eligible(cutoff_year))
            .collect();
        Ok(Self {
            records,
            venues,
            fields,
            index,
            doi_index,
            subject,
            cutoff_year,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[PublicationRecord] {
        &self.records
    }

    pub fn record(&self, node: u32) -> &PublicationRecord {
        &self.records[node as usize]
    }

    pub fn node(&self, id: PaperId) -> Option<u32> {
        self.index.get(&id).copied()
    }

    pub fn node_by_doi(&self, doi: &str) -> Option<u32> {
        self.doi_index.get(doi).copied()
    }

    pub fn is_subject(&self, node: u32) -> bool {
        self.subject[node as usize]
    }

    pub fn subject_mask(&self) -> &[bool] {
        &self.subject
    }

    pub fn subject_count(&self) -> usize {
        self.subject.iter().filter(|&&s| s).count()
    }

    pub fn cutoff_year(&self) -> i32 {
        self.cutoff_year
    }

    pub fn venues(&self) -> &Interner {
        &self.venues
    }

    pub fn fields(&self) -> &Interner {
        &self.fields
    }

    pub fn field_labels(&self, node: u32) -> impl Iterator<Item = &str> {
        self.records[node as usize]
            .fields
            .iter()
            .map(|f| self.fields.label(f.0))
    }
}
