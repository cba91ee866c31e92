//! Citation-distance levels C₁…C₆ seeded by retracted papers.
//!
//! Level n holds every analysis-corpus paper that reaches a retracted paper
//! through a citation chain of exactly n steps. A paper may appear at several
//! distances; [`dedup_frontiers`] keeps each paper only at its smallest one.
//!
//! Every member carries the earliest retraction date over the retracted papers
//! it reaches at that distance.

use std::sync::atomic::{AtomicI32, Ordering};

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::CitationGraph;
use crate::ingest::Corpus;
use crate::{Error, Result};

pub const MAX_DISTANCE: u8 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seed {
    pub node: u32,
    pub retraction_date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrontierLevel {
    distance: u8,
    deduplicated: bool,
    members: Vec<u32>,
    earliest: Vec<NaiveDate>,
}

impl FrontierLevel {
    pub fn distance(&self) -> u8 {
        self.distance
    }

    pub fn is_deduplicated(&self) -> bool {
        self.deduplicated
    }

    /// Member nodes in ascending order.
    pub fn members(&self) -> &[u32] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, node: u32) -> bool {
        self.members.binary_search(&node).is_ok()
    }

    pub fn earliest_retraction(&self, node: u32) -> Option<NaiveDate> {
        self.members
            .binary_search(&node)
            .ok()
            .map(|i| self.earliest[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, NaiveDate)> + '_ {
        self.members.iter().copied().zip(self.earliest.iter().copied())
    }

    /// Rebuilds a level from exported `(node, earliest_retraction)` pairs.
    pub fn from_entries(
        distance: u8,
        deduplicated: bool,
        mut entries: Vec<(u32, NaiveDate)>,
    ) -> Result<Self> {
        if !(1..=MAX_DISTANCE).contains(&distance) {
            return Err(Error::Contract(format!("distance {distance} outside 1..=6")));
        }
        entries.sort_unstable();
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Contract(format!(
                "level {distance} lists a paper twice"
            )));
        }
        let (members, earliest) = entries.into_iter().unzip();
        Ok(Self {
            distance,
            deduplicated,
            members,
            earliest,
        })
    }
}

fn day_number(date: NaiveDate) -> i32 {
    date.num_days_from_ce()
}

fn from_day_number(days: i32) -> NaiveDate {
    NaiveDate::from_num_days_from_ce_opt(days).expect("day number came from a valid date")
}

/// Min-propagates dates from `sources` to their analysis-corpus citers.
fn propagate(graph: &CitationGraph, sources: &[(u32, i32)], distance: u8) -> FrontierLevel {
    let best: Vec<AtomicI32> = (0..graph.node_count())
        .map(|_| AtomicI32::new(i32::MAX))
        .collect();
    sources.par_iter().for_each(|&(node, day)| {
        for &citer in graph.citers(node) {
            if graph.is_subject(citer) {
                best[citer as usize].fetch_min(day, Ordering::Relaxed);
            }
        }
    });
    let (members, earliest): (Vec<u32>, Vec<NaiveDate>) = best
        .par_iter()
        .enumerate()
        .filter_map(|(node, day)| {
            let day = day.load(Ordering::Relaxed);
            (day != i32::MAX).then(|| (node as u32, from_day_number(day)))
        })
        .unzip();
    FrontierLevel {
        distance,
        deduplicated: false,
        members,
        earliest,
    }
}

/// C₁: analysis-corpus papers citing at least one seed.
pub fn direct_citers(graph: &CitationGraph, seeds: &[Seed]) -> FrontierLevel {
    let sources: Vec<(u32, i32)> = seeds
        .iter()
        .map(|s| (s.node, day_number(s.retraction_date)))
        .collect();
    propagate(graph, &sources, 1)
}

/// Cₙ₊₁ from Cₙ. Papers already seen at smaller distances are not excluded.
pub fn expand_frontier(graph: &CitationGraph, previous: &FrontierLevel) -> Result<FrontierLevel> {
    if previous.deduplicated {
        return Err(Error::Contract(
            "expansion runs on duplicate-preserving levels".into(),
        ));
    }
    if previous.distance >= MAX_DISTANCE {
        return Err(Error::Contract(format!(
            "cannot expand beyond distance {MAX_DISTANCE}"
        )));
    }
    let sources: Vec<(u32, i32)> = previous
        .iter()
        .map(|(node, date)| (node, day_number(date)))
        .collect();
    Ok(propagate(graph, &sources, previous.distance + 1))
}

/// Duplicate-preserving levels 1..=`max_distance`.
pub fn compute_levels(
    graph: &CitationGraph,
    seeds: &[Seed],
    max_distance: u8,
) -> Result<Vec<FrontierLevel>> {
    if !(1..=MAX_DISTANCE).contains(&max_distance) {
        return Err(Error::Config(format!(
            "max distance {max_distance} outside 1..=6"
        )));
    }
    let mut levels = vec![direct_citers(graph, seeds)];
    while levels.len() < max_distance as usize {
        let next = expand_frontier(graph, levels.last().expect("non-empty"))?;
        levels.push(next);
    }
    Ok(levels)
}

/// Keeps each paper only at the smallest distance where it appears.
/// Earliest-retraction dates are carried over unchanged.
pub fn dedup_frontiers(levels: &[FrontierLevel]) -> Vec<FrontierLevel> {
    let mut seen: std::collections::HashSet<u32> = std::collections::HashSet::new();
    let mut ordered: Vec<&FrontierLevel> = levels.iter().collect();
    ordered.sort_by_key(|l| l.distance);
    ordered
        .into_iter()
        .map(|level| {
            let (members, earliest) = level
                .iter()
                .filter(|(node, _)| !seen.contains(node))
                .unzip();
            seen.extend(level.members.iter().copied());
            FrontierLevel {
                distance: level.distance,
                deduplicated: true,
                members,
                earliest,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Timing {
    Pre,
    Post,
}

impl Timing {
    /// A paper published on the retraction date itself counts as post.
    pub fn of(cite_date: NaiveDate, earliest_retraction: NaiveDate) -> Self {
        if cite_date < earliest_retraction {
            Timing::Pre
        } else {
            Timing::Post
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Timing::Pre => "pre",
            Timing::Post => "post",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Timing::Pre => "Before Retraction",
            Timing::Post => "After Retraction",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrePostSplit {
    pub pre: Vec<u32>,
    pub post: Vec<u32>,
    /// Members set aside because they only carry a publication year; empty
    /// unless year-only dates are excluded.
    pub undated: Vec<u32>,
}

/// Splits a level by whether each member was published before its earliest
/// reachable retraction.
pub fn classify_pre_post(
    level: &FrontierLevel,
    corpus: &Corpus,
    exclude_year_only: bool,
) -> PrePostSplit {
    let mut split = PrePostSplit::default();
    for (node, earliest) in level.iter() {
        let record = corpus.record(node);
        if exclude_year_only && !record.has_exact_date() {
            split.undated.push(node);
            continue;
        }
        match Timing::of(record.effective_date(), earliest) {
            Timing::Pre => split.pre.push(node),
            Timing::Post => split.post.push(node),
        }
    }
    split
}
