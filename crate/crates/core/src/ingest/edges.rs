use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::Deserialize;

use super::PaperId;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
pub struct CitationEdgeRaw {
    pub citing_id: PaperId,
    pub cited_id: PaperId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeFormat {
    Csv,
    Jsonl,
}

impl EdgeFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "json" | "ndjson") => EdgeFormat::Jsonl,
            _ => EdgeFormat::Csv,
        }
    }
}

pub fn read_edges(path: &Path) -> Result<Vec<CitationEdgeRaw>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_edges_from(BufReader::new(file), EdgeFormat::from_path(path), path)
}

/// Reads an edge list. Ids that do not fit the id space are fatal, reported
/// with the offending line.
pub fn read_edges_from<R: Read>(
    source: R,
    format: EdgeFormat,
    origin: &Path,
) -> Result<Vec<CitationEdgeRaw>> {
    match format {
        EdgeFormat::Csv => read_csv(source, origin),
        EdgeFormat::Jsonl => read_jsonl(BufReader::new(source), origin),
    }
}

fn read_csv<R: Read>(source: R, origin: &Path) -> Result<Vec<CitationEdgeRaw>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let (Some(citing), Some(cited)) = (col("citing_id"), col("cited_id")) else {
        return Err(Error::Input {
            path: origin.to_path_buf(),
            line: 1,
            message: "edge header must name citing_id and cited_id".into(),
        });
    };
    let mut edges = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let parse = |c: usize| -> Result<PaperId> {
            let text = row.get(c).unwrap_or("").trim();
            text.parse::<PaperId>().map_err(|e| Error::Input {
                path: origin.to_path_buf(),
                line,
                message: format!("bad paper id {text:?}: {e}"),
            })
        };
        edges.push(CitationEdgeRaw {
            citing_id: parse(citing)?,
            cited_id: parse(cited)?,
        });
    }
    Ok(edges)
}

fn read_jsonl<R: BufRead>(source: R, origin: &Path) -> Result<Vec<CitationEdgeRaw>> {
    let mut edges = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let edge: CitationEdgeRaw = serde_json::from_str(&line).map_err(|e| Error::Input {
            path: origin.to_path_buf(),
            line: i as u64 + 1,
            message: format!("bad edge record: {e}"),
        })?;
        edges.push(edge);
    }
    Ok(edges)
}
