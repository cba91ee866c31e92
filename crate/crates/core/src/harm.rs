//! Harm ratios: one minus a paper's citations over its cohort's mean.
//!
//! 1.0 means the paper received no citations; negative values mean it
//! out-performed its cohort. Values are never clamped. An entry is undefined
//! exactly when the cohort is empty or its citation total is zero.

use crate::comparator::ComparatorAggregate;
use crate::graph::{CitationGraph, HARM_YEARS};
use crate::ingest::{Corpus, PaperId};
use crate::{Error, Result};

/// Number of entries in a harm vector: the total plus one per year.
pub const HARM_COLUMNS: usize = HARM_YEARS + 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmVector {
    pub paper: PaperId,
    /// Harm over total citations.
    pub total: Option<f64>,
    /// Index `k - 1` holds the harm for year k = 1..=10.
    pub yearly: [Option<f64>; HARM_YEARS],
}

impl HarmVector {
    pub fn undefined(paper: PaperId) -> Self {
        Self {
            paper,
            total: None,
            yearly: [None; HARM_YEARS],
        }
    }

    /// Column 0 is the total, columns 1..=10 the yearly entries.
    pub fn column(&self, column: usize) -> Option<f64> {
        if column == 0 {
            self.total
        } else {
            self.yearly[column - 1]
        }
    }

    pub fn columns(&self) -> [Option<f64>; HARM_COLUMNS] {
        std::array::from_fn(|c| self.column(c))
    }
}

fn ratio_harm(own: u64, cohort_sum: u64, cohort_size: u64) -> Option<f64> {
    if cohort_size == 0 || cohort_sum == 0 {
        return None;
    }
    // own / (sum / n) rearranged so equal integer ratios give identical floats.
    Some(1.0 - (own as f64 * cohort_size as f64) / cohort_sum as f64)
}

pub fn harm_total(c_citations: u64, agg: &ComparatorAggregate) -> Option<f64> {
    ratio_harm(c_citations, agg.total_citations, agg.n_d)
}

/// Harm for year `k`, 1-based.
pub fn harm_yearly(c_yearly: u64, agg: &ComparatorAggregate, k: usize) -> Result<Option<f64>> {
    if !(1..=HARM_YEARS).contains(&k) {
        return Err(Error::Contract(format!("year index {k} outside 1..=10")));
    }
    Ok(ratio_harm(c_yearly, agg.year(k), agg.n_d))
}

/// Assembles the vector from the citing paper's own counts.
pub fn harm_vector(
    paper: PaperId,
    c_total: u64,
    c_yearly: &[u64; HARM_YEARS],
    agg: &ComparatorAggregate,
) -> HarmVector {
    HarmVector {
        paper,
        total: harm_total(c_total, agg),
        yearly: std::array::from_fn(|i| ratio_harm(c_yearly[i], agg.yearly_citations[i], agg.n_d)),
    }
}

/// [`harm_vector`] with the citing paper's counts read from the corpus and
/// the graph's yearly index.
pub fn harm_vector_for(
    graph: &CitationGraph,
    corpus: &Corpus,
    node: u32,
    agg: &ComparatorAggregate,
) -> HarmVector {
    let own = ComparatorAggregate::of_paper(graph, corpus, node);
    harm_vector(corpus.record(node).id, own.total_citations, &own.yearly_citations, agg)
}
