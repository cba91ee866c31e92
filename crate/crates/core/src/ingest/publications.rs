use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::normalize::{normalize_doi, normalize_label, normalize_venue, Interner};
use super::{parse_date, FieldId, PublicationRecord, VenueId, MIN_YEAR};
use crate::{Error, Result};

const CHUNK_LINES: usize = 1 << 16;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PublicationCounters {
    pub lines: u64,
    pub malformed: u64,
    pub missing_year: u64,
    pub before_1900: u64,
    /// Records whose pub_date could not be parsed; they keep their year.
    pub invalid_pub_date: u64,
    pub loaded: u64,
    pub year_only_dates: u64,
    pub doi_duplicates_dropped: u64,
    pub after_dedup: u64,
    pub after_cutoff_dropped: u64,
    pub missing_venue_or_fields: u64,
    pub analysis_corpus: u64,
}

#[derive(Debug, Deserialize)]
struct RawPublication {
    id: u64,
    #[serde(default)]
    doi: Option<String>,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    year: Option<i64>,
    #[serde(default)]
    pub_date: Option<String>,
    #[serde(default)]
    venue: Option<String>,
    #[serde(default)]
    fields: Option<Vec<String>>,
    #[serde(default)]
    citation_count: Option<u64>,
    #[serde(default)]
    reference_count: Option<u64>,
}

#[derive(Debug)]
pub struct LoadedPublications {
    pub records: Vec<PublicationRecord>,
    pub venues: Interner,
    pub fields: Interner,
}

/// Streams JSONL publication records, dropping records without a year or
/// published before 1900.
///
/// Lines are parsed in parallel chunks; interning happens afterwards in input
/// order so identifiers do not depend on scheduling.
pub fn load_publications<R: BufRead>(
    source: R,
    origin: &Path,
    report: &mut PublicationCounters,
) -> Result<LoadedPublications> {
    let mut venues = Interner::new();
    let mut fields = Interner::new();
    let mut records = Vec::new();

    let mut lines = source.lines();
    let mut line_no: u64 = 0;
    loop {
        let mut chunk = Vec::with_capacity(CHUNK_LINES);
        for line in lines.by_ref().take(CHUNK_LINES) {
            line_no += 1;
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            chunk.push((line_no, line));
        }
        if chunk.is_empty() {
            break;
        }
        let parsed: Vec<_> = chunk
            .par_iter()
            .map(|(n, line)| (*n, serde_json::from_str::<RawPublication>(line)))
            .collect();
        for (n, raw) in parsed {
            report.lines += 1;
            let raw = match raw {
                Ok(raw) => raw,
                Err(e) => {
                    report.malformed += 1;
                    if report.malformed <= 5 {
                        log::warn!("{}:{n}: skipping malformed record: {e}", origin.display());
                    }
                    continue;
                }
            };
            if let Some(record) = admit(raw, &mut venues, &mut fields, report) {
                records.push(record);
            }
        }
    }
    report.loaded = records.len() as u64;
    Ok(LoadedPublications {
        records,
        venues,
        fields,
    })
}

fn admit(
    raw: RawPublication,
    venues: &mut Interner,
    fields: &mut Interner,
    report: &mut PublicationCounters,
) -> Option<PublicationRecord> {
    let Some(year) = raw.year else {
        report.missing_year += 1;
        return None;
    };
    if year < MIN_YEAR as i64 {
        report.before_1900 += 1;
        return None;
    }
    let Ok(year) = i32::try_from(year) else {
        report.malformed += 1;
        return None;
    };
    let pub_date = match raw.pub_date.as_deref().map(str::trim) {
        None | Some("") => None,
        Some(text) => {
            let parsed = parse_date(text);
            if parsed.is_none() {
                report.invalid_pub_date += 1;
            }
            parsed
        }
    };
    if pub_date.is_none() {
        report.year_only_dates += 1;
    }
    let venue = raw
        .venue
        .as_deref()
        .and_then(normalize_venue)
        .map(|v| VenueId(venues.intern(&v)));
    let mut field_ids: Vec<FieldId> = raw
        .fields
        .unwrap_or_default()
        .iter()
        .filter_map(|f| normalize_label(f))
        .map(|f| FieldId(fields.intern(&f)))
        .collect();
    field_ids.sort_unstable();
    field_ids.dedup();
    Some(PublicationRecord {
        id: raw.id,
        doi: raw.doi.as_deref().and_then(normalize_doi),
        title: raw.title.unwrap_or_default(),
        year,
        venue,
        fields: field_ids,
        citation_count: raw.citation_count.unwrap_or(0),
        reference_count: raw.reference_count.unwrap_or(0),
        pub_date,
    })
}

/// Keeps one record per DOI: most citations, then most references, then the
/// smallest id. Records without a DOI all survive. Output is sorted by id.
pub fn dedup_by_doi(records: Vec<PublicationRecord>) -> Vec<PublicationRecord> {
    let mut best: HashMap<String, usize> = HashMap::new();
    let mut keep = vec![false; records.len()];
    for (i, record) in records.iter().enumerate() {
        let Some(doi) = &record.doi else {
            keep[i] = true;
            continue;
        };
        match best.get_mut(doi.as_str()) {
            None => {
                best.insert(doi.clone(), i);
            }
            Some(current) => {
                if outranks(record, &records[*current]) {
                    *current = i;
                }
            }
        }
    }
    for &i in best.values() {
        keep[i] = true;
    }
    let mut survivors: Vec<PublicationRecord> = records
        .into_iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then_some(r))
        .collect();
    survivors.sort_by_key(|r| r.id);
    survivors
}

fn outranks(a: &PublicationRecord, b: &PublicationRecord) -> bool {
    (a.citation_count, a.reference_count, std::cmp::Reverse(a.id))
        > (b.citation_count, b.reference_count, std::cmp::Reverse(b.id))
}

/// Records published no later than `cutoff_year` that carry both venue and
/// field metadata.
pub fn filter_analysis_corpus(
    records: &[PublicationRecord],
    cutoff_year: i32,
) -> Vec<PublicationRecord> {
    records
        .iter()
        .filter(|r| r.is_analysis_eligible(cutoff_year))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn load(text: &str) -> (LoadedPublications, PublicationCounters) {
        let mut report = PublicationCounters::default();
        let loaded =
            load_publications(Cursor::new(text.to_string()), Path::new("pubs.jsonl"), &mut report)
                .unwrap();
        (loaded, report)
    }

    fn rec(id: u64, doi: Option<&str>, cites: u64, refs: u64) -> PublicationRecord {
        PublicationRecord {
            id,
            doi: doi.map(str::to_string),
            title: String::new(),
            year: 2005,
            venue: Some(VenueId(0)),
            fields: vec![FieldId(0)],
            citation_count: cites,
            reference_count: refs,
            pub_date: None,
        }
    }

    #[test]
    fn year_rules() {
        let text = r#"{"id":1,"year":1899,"venue":"V","fields":["Biology"]}
{"id":2,"year":null,"venue":"V","fields":["Biology"]}
{"id":3,"year":2005,"venue":"  Nature ","fields":["Biology","biology ","Medicine"],"doi":"https://doi.org/10.1/ABC","citation_count":4}
not json
{"id":4,"venue":"V"}
"#;
        let (loaded, report) = load(text);
        assert_eq!(report.lines, 5);
        assert_eq!(report.before_1900, 1);
        assert_eq!(report.missing_year, 2);
        assert_eq!(report.malformed, 1);
        assert_eq!(loaded.records.len(), 1);
        let r = &loaded.records[0];
        assert_eq!(r.id, 3);
        assert_eq!(r.doi.as_deref(), Some("10.1/abc"));
        assert_eq!(r.fields.len(), 2);
        assert_eq!(loaded.venues.label(r.venue.unwrap().0), "nature");
        assert_eq!(r.citation_count, 4);
    }

    #[test]
    fn pub_dates() {
        let text = r#"{"id":1,"year":2005,"pub_date":"2005-03-01"}
{"id":2,"year":2005,"pub_date":"garbage"}
{"id":3,"year":2005}
"#;
        let (loaded, report) = load(text);
        assert_eq!(loaded.records.len(), 3);
        assert!(loaded.records[0].has_exact_date());
        assert!(!loaded.records[1].has_exact_date());
        assert_eq!(report.invalid_pub_date, 1);
        assert_eq!(report.year_only_dates, 2);
    }

    #[test]
    fn unreadable_source_is_fatal() {
        struct Broken;
        impl std::io::Read for Broken {
            fn read(&mut self, _: &mut [u8]) -> std::io::Result<usize> {
                Err(std::io::Error::other("disk gone"))
            }
        }
        let mut report = PublicationCounters::default();
        let err = load_publications(
            std::io::BufReader::new(Broken),
            Path::new("x.jsonl"),
            &mut report,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn dedup_prefers_citations() {
        let out = dedup_by_doi(vec![rec(1, Some("x"), 10, 0), rec(2, Some("x"), 7, 50)]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id, 1);
    }

    #[test]
    fn dedup_breaks_ties_on_references_then_id() {
        let out = dedup_by_doi(vec![rec(1, Some("x"), 5, 20), rec(2, Some("x"), 5, 30)]);
        assert_eq!(out[0].id, 2);
        let out = dedup_by_doi(vec![rec(9, Some("x"), 5, 30), rec(4, Some("x"), 5, 30)]);
        assert_eq!(out[0].id, 4);
    }

    #[test]
    fn dedup_keeps_null_dois_and_unique() {
        let out = dedup_by_doi(vec![rec(1, None, 1, 1), rec(2, None, 1, 1), rec(3, Some("y"), 0, 0)]);
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn filter_rules() {
        let mut late = rec(1, None, 0, 0);
        late.year = 2014;
        let mut no_fields = rec(2, None, 0, 0);
        no_fields.year = 2010;
        no_fields.fields.clear();
        let mut no_venue = rec(3, None, 0, 0);
        no_venue.venue = None;
        let ok = rec(4, None, 0, 0);
        let kept = filter_analysis_corpus(&[late, no_fields, no_venue, ok], 2013);
        assert_eq!(kept.iter().map(|r| r.id).collect::<Vec<_>>(), vec![4]);
    }

    fn arb_records() -> impl Strategy<Value = Vec<PublicationRecord>> {
        proptest::collection::vec(
            (0u64..40, proptest::option::of(0u8..6), 0u64..4, 0u64..4, 2000i32..2020),
            0..30,
        )
        .prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (_, doi, c, r, y))| {
                    let mut rec = rec(i as u64, None, c, r);
                    rec.doi = doi.map(|d| format!("10.1/{d}"));
                    rec.year = y;
                    rec
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn dedup_idempotent(records in arb_records()) {
            let once = dedup_by_doi(records);
            let twice = dedup_by_doi(once.clone());
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn dedup_order_independent(records in arb_records(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = records.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(dedup_by_doi(records), dedup_by_doi(shuffled));
        }

        #[test]
        fn dedup_dois_unique(records in arb_records()) {
            let out = dedup_by_doi(records);
            let dois: Vec<_> = out.iter().filter_map(|r| r.doi.clone()).collect();
            let unique: std::collections::HashSet<_> = dois.iter().collect();
            prop_assert_eq!(dois.len(), unique.len());
        }

        #[test]
        fn filter_monotone_in_cutoff(records in arb_records(), y in 1999i32..2021) {
            let a = filter_analysis_corpus(&records, y).len();
            let b = filter_analysis_corpus(&records, y + 1).len();
            prop_assert!(a <= b);
        }
    }
}
