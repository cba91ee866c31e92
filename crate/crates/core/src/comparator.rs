//! Comparator cohorts: papers in the same venue, published within one year,
//! sharing at least one field with the citing paper.

use std::collections::HashMap;
use std::ops::{Add, Sub};

use rayon::prelude::*;

use crate::graph::{CitationGraph, HARM_YEARS};
use crate::ingest::{Corpus, FieldId, PaperId, VenueId};
use crate::{Error, Result};

/// Analysis-corpus papers grouped by (venue, year).
#[derive(Debug, Clone, Default)]
pub struct ComparatorKeyIndex {
    buckets: HashMap<(VenueId, i32), Vec<u32>>,
}

impl ComparatorKeyIndex {
    pub fn build(corpus: &Corpus) -> Self {
        let mut buckets: HashMap<(VenueId, i32), Vec<u32>> = HashMap::new();
        for (node, record) in corpus.records().iter().enumerate() {
            if !corpus.is_subject(node as u32) {
                continue;
            }
            let venue = record.venue.expect("subjects carry a venue");
            buckets.entry((venue, record.year)).or_default().push(node as u32);
        }
        Self { buckets }
    }

    pub fn bucket(&self, venue: VenueId, year: i32) -> &[u32] {
        self.buckets.get(&(venue, year)).map_or(&[], Vec::as_slice)
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    fn candidates(&self, venue: VenueId, year: i32) -> impl Iterator<Item = u32> + '_ {
        (year - 1..=year + 1).flat_map(move |y| self.bucket(venue, y).iter().copied())
    }
}

fn shares_field(a: &[FieldId], b: &[FieldId]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// Cohort D(c) as corpus nodes, ascending.
pub fn cohort_nodes(
    index: &ComparatorKeyIndex,
    corpus: &Corpus,
    node: u32,
    self_exclude: bool,
) -> Result<Vec<u32>> {
    let record = corpus.record(node);
    let Some(venue) = record.venue.filter(|_| corpus.is_subject(node)) else {
        return Err(Error::Contract(format!(
            "paper {} is outside the analysis corpus",
            record.id
        )));
    };
    let mut cohort: Vec<u32> = index
        .candidates(venue, record.year)
        .filter(|&d| !(self_exclude && d == node))
        .filter(|&d| shares_field(&corpus.record(d).fields, &record.fields))
        .collect();
    cohort.sort_unstable();
    Ok(cohort)
}

/// Comparator set of `paper` as paper ids, ascending.
pub fn comparator_set(
    index: &ComparatorKeyIndex,
    corpus: &Corpus,
    paper: PaperId,
    self_exclude: bool,
) -> Result<Vec<PaperId>> {
    let node = corpus.node(paper).ok_or(Error::NotFound(paper))?;
    Ok(cohort_nodes(index, corpus, node, self_exclude)?
        .into_iter()
        .map(|d| corpus.record(d).id)
        .collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ComparatorAggregate {
    pub n_d: u64,
    pub total_citations: u64,
    /// Index `k - 1` holds the cohort's citations in year k = 1..=10.
    pub yearly_citations: [u64; HARM_YEARS],
}

impl ComparatorAggregate {
    /// The single-paper aggregate of `node`.
    pub fn of_paper(graph: &CitationGraph, corpus: &Corpus, node: u32) -> Self {
        let row = graph.yearly_row(node);
        let mut yearly = [0u64; HARM_YEARS];
        for (k, slot) in yearly.iter_mut().enumerate() {
            *slot = row.offset(k + 1) as u64;
        }
        Self {
            n_d: 1,
            total_citations: corpus.record(node).citation_count,
            yearly_citations: yearly,
        }
    }

    /// Citations of the cohort in year `k` (1-based).
    pub fn year(&self, k: usize) -> u64 {
        self.yearly_citations[k - 1]
    }
}

impl Add for ComparatorAggregate {
    type Output = Self;

    fn add(mut self, rhs: Self) -> Self {
        self.n_d += rhs.n_d;
        self.total_citations += rhs.total_citations;
        for (a, b) in self.yearly_citations.iter_mut().zip(rhs.yearly_citations) {
            *a += b;
        }
        self
    }
}

impl Sub for ComparatorAggregate {
    type Output = Self;

    /// Removes a sub-cohort previously added in.
    fn sub(mut self, rhs: Self) -> Self {
        self.n_d -= rhs.n_d;
        self.total_citations -= rhs.total_citations;
        for (a, b) in self.yearly_citations.iter_mut().zip(rhs.yearly_citations) {
            *a -= b;
        }
        self
    }
}

/// Sums citation metrics over a cohort.
pub fn aggregate(graph: &CitationGraph, corpus: &Corpus, cohort: &[u32]) -> ComparatorAggregate {
    cohort
        .iter()
        .map(|&d| ComparatorAggregate::of_paper(graph, corpus, d))
        .fold(ComparatorAggregate::default(), Add::add)
}

/// Batch cohort aggregation.
///
/// D(c) depends only on (venue, year, field set) apart from the self-exclusion,
/// so aggregates are computed once per distinct signature, cohort included, and
/// the citing paper's own contribution is subtracted afterwards.
pub struct ComparatorEngine<'a> {
    graph: &'a CitationGraph,
    corpus: &'a Corpus,
    index: ComparatorKeyIndex,
    self_exclude: bool,
}

impl<'a> ComparatorEngine<'a> {
    pub fn new(graph: &'a CitationGraph, corpus: &'a Corpus, self_exclude: bool) -> Self {
        Self {
            graph,
            corpus,
            index: ComparatorKeyIndex::build(corpus),
            self_exclude,
        }
    }

    pub fn index(&self) -> &ComparatorKeyIndex {
        &self.index
    }

    /// Aggregates for each of `nodes`, in the same order.
    pub fn aggregates(&self, nodes: &[u32]) -> Result<Vec<ComparatorAggregate>> {
        type Signature<'s> = (VenueId, i32, &'s [FieldId]);
        let mut groups: HashMap<Signature<'_>, usize> = HashMap::new();
        let mut signatures: Vec<(u32, Signature<'_>)> = Vec::new();
        let mut slot_of = Vec::with_capacity(nodes.len());
        for &node in nodes {
            let record = self.corpus.record(node);
            let Some(venue) = record.venue.filter(|_| self.corpus.is_subject(node)) else {
                return Err(Error::Contract(format!(
                    "paper {} is outside the analysis corpus",
                    record.id
                )));
            };
            let sig = (venue, record.year, record.fields.as_slice());
            let slot = *groups.entry(sig).or_insert_with(|| {
                signatures.push((node, sig));
                signatures.len() - 1
            });
            slot_of.push(slot);
        }

        let inclusive: Vec<ComparatorAggregate> = signatures
            .par_iter()
            .map(|&(representative, _)| {
                let cohort = cohort_nodes(&self.index, self.corpus, representative, false)
                    .expect("representative is a subject");
                aggregate(self.graph, self.corpus, &cohort)
            })
            .collect();

        Ok(nodes
            .iter()
            .zip(slot_of)
            .map(|(&node, slot)| {
                let all = inclusive[slot];
                if self.self_exclude {
                    all - ComparatorAggregate::of_paper(self.graph, self.corpus, node)
                } else {
                    all
                }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Interner, PublicationRecord};
    use proptest::prelude::*;

    fn record(id: u64, venue: u32, year: i32, fields: &[u32], cites: u64) -> PublicationRecord {
        PublicationRecord {
            id,
            doi: None,
            title: String::new(),
            year,
            venue: Some(VenueId(venue)),
            fields: fields.iter().map(|&f| FieldId(f)).collect(),
            citation_count: cites,
            reference_count: 0,
            pub_date: None,
        }
    }

    fn corpus(records: Vec<PublicationRecord>) -> Corpus {
        Corpus::new(records, Interner::new(), Interner::new(), 2013).unwrap()
    }

    #[test]
    fn each_clause_filters() {
        // c: venue 0, 2005, {biology=0}
        let c = corpus(vec![
            record(1, 0, 2005, &[0], 0),
            record(2, 0, 2004, &[0], 0),
            record(3, 0, 2007, &[0], 0),
            record(4, 1, 2005, &[0], 0),
            record(5, 0, 2006, &[1], 0),
        ]);
        let index = ComparatorKeyIndex::build(&c);
        assert_eq!(comparator_set(&index, &c, 1, true).unwrap(), vec![2]);
        assert_eq!(comparator_set(&index, &c, 1, false).unwrap(), vec![1, 2]);
        assert!(comparator_set(&index, &c, 5, true).unwrap().is_empty());
        assert!(matches!(
            comparator_set(&index, &c, 99, true),
            Err(Error::NotFound(99))
        ));
    }

    #[test]
    fn non_subject_is_rejected() {
        let mut late = record(1, 0, 2015, &[0], 0);
        late.year = 2015;
        let c = corpus(vec![late]);
        let index = ComparatorKeyIndex::build(&c);
        assert!(matches!(comparator_set(&index, &c, 1, true), Err(Error::Contract(_))));
    }

    fn empty_graph(c: &Corpus) -> CitationGraph {
        CitationGraph::from_parts(
            c.records().iter().map(|r| r.id).collect(),
            c.records().iter().map(|r| r.year).collect(),
            c.subject_mask().to_vec(),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn totals_sum() {
        let c = corpus(vec![record(1, 0, 2005, &[0], 12), record(2, 0, 2005, &[0], 8)]);
        let g = empty_graph(&c);
        let agg = aggregate(&g, &c, &[0, 1]);
        assert_eq!(agg.n_d, 2);
        assert_eq!(agg.total_citations, 20);
        assert_eq!(aggregate(&g, &c, &[]), ComparatorAggregate::default());
    }

    fn arb_corpus() -> impl Strategy<Value = (Vec<PublicationRecord>, Vec<(u32, u32)>)> {
        (2usize..200).prop_flat_map(|n| {
            (
                proptest::collection::vec(
                    (0u32..4, 2000i32..2008, proptest::collection::btree_set(0u32..5, 0..3), 0u64..50),
                    n,
                )
                .prop_map(|rows| {
                    rows.into_iter()
                        .enumerate()
                        .map(|(i, (v, y, f, c))| {
                            let f: Vec<u32> = f.into_iter().collect();
                            record(i as u64, v, y, &f, c)
                        })
                        .collect::<Vec<_>>()
                }),
                proptest::collection::vec((0..n as u32, 0..n as u32), 0..(3 * n)),
            )
        })
    }

    proptest! {
        #[test]
        fn matches_triple_scan((records, _) in arb_corpus(), self_exclude in any::<bool>()) {
            let c = corpus(records.clone());
            let index = ComparatorKeyIndex::build(&c);
            for r in records.iter().filter(|r| !r.fields.is_empty()) {
                let got = comparator_set(&index, &c, r.id, self_exclude).unwrap();
                let expected: Vec<u64> = records.iter()
                    .filter(|d| d.venue == r.venue)
                    .filter(|d| (d.year - r.year).abs() <= 1)
                    .filter(|d| d.fields.iter().any(|f| r.fields.contains(f)))
                    .filter(|d| !(self_exclude && d.id == r.id))
                    .map(|d| d.id)
                    .collect();
                prop_assert_eq!(got, expected);
            }
        }

        #[test]
        fn window_is_symmetric((records, _) in arb_corpus()) {
            let c = corpus(records.clone());
            let index = ComparatorKeyIndex::build(&c);
            let subjects: Vec<&PublicationRecord> =
                records.iter().filter(|r| !r.fields.is_empty()).collect();
            let sets: HashMap<u64, Vec<u64>> = subjects.iter()
                .map(|r| (r.id, comparator_set(&index, &c, r.id, true).unwrap()))
                .collect();
            for a in &subjects {
                for b in &subjects {
                    if a.id == b.id { continue; }
                    prop_assert_eq!(sets[&a.id].contains(&b.id), sets[&b.id].contains(&a.id));
                }
            }
        }

        #[test]
        fn engine_matches_direct_aggregation((records, pairs) in arb_corpus(), self_exclude in any::<bool>()) {
            let c = corpus(records);
            let g = CitationGraph::from_parts(
                c.records().iter().map(|r| r.id).collect(),
                c.records().iter().map(|r| r.year).collect(),
                c.subject_mask().to_vec(),
                pairs,
            ).unwrap();
            let engine = ComparatorEngine::new(&g, &c, self_exclude);
            let subjects: Vec<u32> = (0..c.len() as u32).filter(|&v| c.is_subject(v)).collect();
            let batched = engine.aggregates(&subjects).unwrap();
            for (&v, got) in subjects.iter().zip(&batched) {
                let cohort = cohort_nodes(engine.index(), &c, v, self_exclude).unwrap();
                // brute-force recount straight from the edge lists
                let mut expected = ComparatorAggregate { n_d: cohort.len() as u64, ..Default::default() };
                for &d in &cohort {
                    expected.total_citations += c.record(d).citation_count;
                    for &citer in g.citers(d) {
                        let k = g.year(citer) - g.year(d);
                        if (1..=10).contains(&k) {
                            expected.yearly_citations[k as usize - 1] += 1;
                        }
                    }
                }
                prop_assert_eq!(*got, expected);
            }
        }

        #[test]
        fn aggregate_is_additive((records, pairs) in arb_corpus(), split in 0usize..200) {
            let c = corpus(records);
            let g = CitationGraph::from_parts(
                c.records().iter().map(|r| r.id).collect(),
                c.records().iter().map(|r| r.year).collect(),
                c.subject_mask().to_vec(),
                pairs,
            ).unwrap();
            let all: Vec<u32> = (0..c.len() as u32).collect();
            let (a, b) = all.split_at(split.min(all.len()));
            prop_assert_eq!(aggregate(&g, &c, &all), aggregate(&g, &c, a) + aggregate(&g, &c, b));
        }
    }
}
