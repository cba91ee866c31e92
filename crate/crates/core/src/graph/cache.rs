//! On-disk graph cache.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "HTCG" | version u32 | fingerprint [u8; 32] | node_count u64 | edge_count u64
//! ids        [u64; node_count]
//! fwd_offset [u64; node_count + 1] | fwd_target [u32; edge_count]
//! rev_offset [u64; node_count + 1] | rev_source [u32; edge_count]
//! ```
//!
//! Node years and the analysis mask are not stored; they come from the corpus
//! the cache is loaded against.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::CitationGraph;
use crate::ingest::Corpus;
use crate::{Error, Result};

pub const CACHE_MAGIC: &[u8; 4] = b"HTCG";
pub const CACHE_VERSION: u32 = 1;

pub fn write_cache(graph: &CitationGraph, path: &Path, fingerprint: &[u8; 32]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut out = BufWriter::new(tmp.as_file());
        let io = |e| Error::io(path, e);
        let (fo, ft, ro, rs) = graph.raw_adjacency();
        out.write_all(CACHE_MAGIC).map_err(io)?;
        out.write_all(&CACHE_VERSION.to_le_bytes()).map_err(io)?;
        out.write_all(fingerprint).map_err(io)?;
        out.write_all(&(graph.node_count() as u64).to_le_bytes()).map_err(io)?;
        out.write_all(&(graph.edge_count() as u64).to_le_bytes()).map_err(io)?;
        for &id in graph.ids() {
            out.write_all(&id.to_le_bytes()).map_err(io)?;
        }
        for (offsets, targets) in [(fo, ft), (ro, rs)] {
            for &o in offsets {
                out.write_all(&o.to_le_bytes()).map_err(io)?;
            }
            for &t in targets {
                out.write_all(&t.to_le_bytes()).map_err(io)?;
            }
        }
        out.flush().map_err(io)?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Loads a cache written for `fingerprint`. Returns `Ok(None)` when the file is
/// absent, was written for different inputs, or does not match the corpus.
pub fn read_cache(
    path: &Path,
    fingerprint: &[u8; 32],
    corpus: &Corpus,
) -> Result<Option<CitationGraph>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut input = BufReader::new(file);
    let corrupt = |what: &str| Error::Input {
        path: path.to_path_buf(),
        line: 0,
        message: format!("corrupt graph cache: {what}"),
    };

    let mut magic = [0u8; 4];
    read_exact(&mut input, &mut magic, path)?;
    if &magic != CACHE_MAGIC {
        return Err(corrupt("bad magic"));
    }
    if read_u32(&mut input, path)? != CACHE_VERSION {
        log::info!("graph cache version differs; rebuilding");
        return Ok(None);
    }
    let mut stored = [0u8; 32];
    read_exact(&mut input, &mut stored, path)?;
    if &stored != fingerprint {
        log::info!("graph cache fingerprint differs; rebuilding");
        return Ok(None);
    }
    let n = read_u64(&mut input, path)? as usize;
    let e = read_u64(&mut input, path)? as usize;
    if n != corpus.len() {
        return Ok(None);
    }
    let ids = read_vec(&mut input, n, path, u64::from_le_bytes)?;
    if ids.iter().zip(corpus.records()).any(|(&id, r)| id != r.id) {
        return Ok(None);
    }
    let fwd_offsets = read_vec(&mut input, n + 1, path, u64::from_le_bytes)?;
    let fwd_targets = read_vec(&mut input, e, path, u32::from_le_bytes)?;
    let rev_offsets = read_vec(&mut input, n + 1, path, u64::from_le_bytes)?;
    let rev_sources = read_vec(&mut input, e, path, u32::from_le_bytes)?;
    let consistent = |offsets: &[u64], targets: &[u32]| {
        offsets.first() == Some(&0)
            && offsets.last() == Some(&(e as u64))
            && offsets.windows(2).all(|w| w[0] <= w[1])
            && targets.iter().all(|&t| (t as usize) < n)
    };
    if !consistent(&fwd_offsets, &fwd_targets) || !consistent(&rev_offsets, &rev_sources) {
        return Err(corrupt("inconsistent adjacency"));
    }
    Ok(Some(CitationGraph::with_adjacency(
        ids,
        corpus.records().iter().map(|r| r.year).collect(),
        corpus.subject_mask().to_vec(),
        fwd_offsets,
        fwd_targets,
        rev_offsets,
        rev_sources,
    )))
}

fn read_exact(input: &mut impl Read, buf: &mut [u8], path: &Path) -> Result<()> {
    input.read_exact(buf).map_err(|e| Error::io(path, e))
}

fn read_u32(input: &mut impl Read, path: &Path) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(input, &mut b, path)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(input: &mut impl Read, path: &Path) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(input, &mut b, path)?;
    Ok(u64::from_le_bytes(b))
}

fn read_vec<T, const W: usize>(
    input: &mut impl Read,
    len: usize,
    path: &Path,
    decode: fn([u8; W]) -> T,
) -> Result<Vec<T>> {
    let mut bytes = vec![0u8; len * W];
    read_exact(input, &mut bytes, path)?;
    Ok(bytes
        .chunks_exact(W)
        .map(|c| decode(c.try_into().expect("chunk width")))
        .collect())
}
