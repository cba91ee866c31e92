//! Immutable citation graph in compressed-offset layout.
//!
//! Nodes are dense indices into the deduplicated corpus (sorted by paper id).
//! `forward` lists the papers a node cites, `reverse` the papers citing it.
//! Both lists are sorted and duplicate-free and are exact transposes.

mod cache;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cache::{read_cache, write_cache, CACHE_MAGIC, CACHE_VERSION};

use crate::ingest::{CitationEdgeRaw, Corpus, PaperId};
use crate::{Error, Result};

/// Year offsets k = 0..=10 have their own bucket.
pub const TRACKED_OFFSETS: usize = 11;
/// Offsets used by the harm analysis: k = 1..=10.
pub const HARM_YEARS: usize = 10;

/// Incoming citations of one paper bucketed by
/// `year(citing) - year(cited)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearlyRow {
    pub by_offset: [u32; TRACKED_OFFSETS],
    /// Offsets greater than 10.
    pub overflow: u32,
    /// Citers dated before the cited paper.
    pub negative: u32,
}

impl YearlyRow {
    pub fn offset(&self, k: usize) -> u32 {
        self.by_offset[k]
    }

    pub fn total(&self) -> u64 {
        self.by_offset.iter().map(|&c| c as u64).sum::<u64>()
            + self.overflow as u64
            + self.negative as u64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphReport {
    pub edges_read: u64,
    pub self_loops: u64,
    pub dangling: u64,
    pub duplicates: u64,
    pub retained: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CitationGraph {
    ids: Vec<PaperId>,
    years: Vec<i32>,
    subject: Vec<bool>,
    fwd_offsets: Vec<u64>,
    fwd_targets: Vec<u32>,
    rev_offsets: Vec<u64>,
    rev_sources: Vec<u32>,
    yearly: Vec<YearlyRow>,
}

/// Builds the graph over every corpus record. Edges whose endpoints are not in
/// the corpus are dropped and counted, as are self-loops and repeats.
pub fn build_graph(corpus: &Corpus, edges: &[CitationEdgeRaw]) -> (CitationGraph, GraphReport) {
    let mut report = GraphReport {
        edges_read: edges.len() as u64,
        ..GraphReport::default()
    };
    let mapped: Vec<Option<(u32, u32)>> = edges
        .par_iter()
        .map(|e| Some((corpus.node(e.citing_id)?, corpus.node(e.cited_id)?)))
        .collect();
    let mut pairs = Vec::with_capacity(mapped.len());
    for pair in mapped {
        match pair {
            None => report.dangling += 1,
            Some((a, b)) if a == b => report.self_loops += 1,
            Some(p) => pairs.push(p),
        }
    }
    let before = pairs.len();
    let graph = CitationGraph::assemble(
        corpus.records().iter().map(|r| r.id).collect(),
        corpus.records().iter().map(|r| r.year).collect(),
        corpus.subject_mask().to_vec(),
        pairs,
    );
    report.duplicates = (before - graph.edge_count()) as u64;
    report.retained = graph.edge_count() as u64;
    (graph, report)
}

impl CitationGraph {
    /// Builds a graph from dense `(citing, cited)` node pairs. Repeats and
    /// self-loops are discarded.
    pub fn from_parts(
        ids: Vec<PaperId>,
        years: Vec<i32>,
        subject: Vec<bool>,
        pairs: Vec<(u32, u32)>,
    ) -> Result<Self> {
        let n = ids.len();
        if years.len() != n || subject.len() != n {
            return Err(Error::Contract("node metadata lengths differ".into()));
        }
        if let Some(&(a, b)) = pairs.iter().find(|(a, b)| *a as usize >= n || *b as usize >= n) {
            return Err(Error::Contract(format!("edge ({a}, {b}) outside {n} nodes")));
        }
        let pairs = pairs.into_iter().filter(|(a, b)| a != b).collect();
        Ok(Self::assemble(ids, years, subject, pairs))
    }

    fn assemble(
        ids: Vec<PaperId>,
        years: Vec<i32>,
        subject: Vec<bool>,
        mut pairs: Vec<(u32, u32)>,
    ) -> Self {
        let n = ids.len();
        pairs.par_sort_unstable();
        pairs.dedup();

        let mut fwd_offsets = vec![0u64; n + 1];
        let mut rev_offsets = vec![0u64; n + 1];
        for &(a, b) in &pairs {
            fwd_offsets[a as usize + 1] += 1;
            rev_offsets[b as usize + 1] += 1;
        }
        for i in 0..n {
            fwd_offsets[i + 1] += fwd_offsets[i];
            rev_offsets[i + 1] += rev_offsets[i];
        }
        let fwd_targets: Vec<u32> = pairs.iter().map(|&(_, b)| b).collect();
        // Pairs are sorted by citing node, so each reverse list fills in
        // ascending order.
        let mut rev_sources = vec![0u32; pairs.len()];
        let mut cursor = rev_offsets.clone();
        for &(a, b) in &pairs {
            let slot = &mut cursor[b as usize];
            rev_sources[*slot as usize] = a;
            *slot += 1;
        }
        Self::with_adjacency(ids, years, subject, fwd_offsets, fwd_targets, rev_offsets, rev_sources)
    }

    pub(crate) fn with_adjacency(
        ids: Vec<PaperId>,
        years: Vec<i32>,
        subject: Vec<bool>,
        fwd_offsets: Vec<u64>,
        fwd_targets: Vec<u32>,
        rev_offsets: Vec<u64>,
        rev_sources: Vec<u32>,
    ) -> Self {
        let yearly = (0..ids.len())
            .into_par_iter()
            .map(|node| {
                let own = years[node];
                let start = rev_offsets[node] as usize;
                let end = rev_offsets[node + 1] as usize;
                let mut row = YearlyRow::default();
                for &citer in &rev_sources[start..end] {
                    let k = years[citer as usize] - own;
                    if k < 0 {
                        row.negative += 1;
                    } else if k as usize >= TRACKED_OFFSETS {
                        row.overflow += 1;
                    } else {
                        row.by_offset[k as usize] += 1;
                    }
                }
                row
            })
            .collect();
        Self {
            ids,
            years,
            subject,
            fwd_offsets,
            fwd_targets,
            rev_offsets,
            rev_sources,
            yearly,
        }
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.fwd_targets.len()
    }

    /// Papers cited by `node`.
    pub fn references(&self, node: u32) -> &[u32] {
        let n = node as usize;
        &self.fwd_targets[self.fwd_offsets[n] as usize..self.fwd_offsets[n + 1] as usize]
    }

    /// Papers citing `node`.
    pub fn citers(&self, node: u32) -> &[u32] {
        let n = node as usize;
        &self.rev_sources[self.rev_offsets[n] as usize..self.rev_offsets[n + 1] as usize]
    }

    pub fn in_degree(&self, node: u32) -> usize {
        self.citers(node).len()
    }

    pub fn id(&self, node: u32) -> PaperId {
        self.ids[node as usize]
    }

    pub fn node_of(&self, id: PaperId) -> Option<u32> {
        self.ids.binary_search(&id).ok().map(|i| i as u32)
    }

    pub fn year(&self, node: u32) -> i32 {
        self.years[node as usize]
    }

    /// Whether `node` belongs to the analysis corpus.
    pub fn is_subject(&self, node: u32) -> bool {
        self.subject[node as usize]
    }

    pub fn yearly_row(&self, node: u32) -> &YearlyRow {
        &self.yearly[node as usize]
    }

    pub(crate) fn ids(&self) -> &[PaperId] {
        &self.ids
    }

    pub(crate) fn raw_adjacency(&self) -> (&[u64], &[u32], &[u64], &[u32]) {
        (&self.fwd_offsets, &self.fwd_targets, &self.rev_offsets, &self.rev_sources)
    }
}

/// Incoming citations of `paper` bucketed by year offset.
pub fn yearly_citations(graph: &CitationGraph, paper: PaperId) -> Result<YearlyRow> {
    graph
        .node_of(paper)
        .map(|node| *graph.yearly_row(node))
        .ok_or(Error::NotFound(paper))
}
