//! Seeded synthetic corpora in the ingest file formats.
//!
//! Papers are generated in year order; each cites earlier-generated papers,
//! picked by preferential attachment on received citations or uniformly. The
//! dataset also carries the clean ground truth as an [`OracleInput`], which
//! the loaders must reproduce from the files despite the injected noise
//! (unparseable lines, DOI duplicates, self loops, dangling edges, conflicting
//! retraction and impact-factor rows, label spelling variants).

pub mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Duration, NaiveDate};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::manifest::InputManifest;
use crate::{Error, Result};

pub use oracle::{run_oracle, OracleInput, OracleOptions, OracleOutput, OraclePaper};

pub const PUBLICATIONS_FILE: &str = "publications.jsonl";
pub const CITATIONS_FILE: &str = "citations.csv";
pub const RETRACTIONS_FILE: &str = "retractions.csv";
pub const JOURNAL_IF_FILE: &str = "journal_if.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_papers: usize,
    pub n_venues: usize,
    pub n_fields: usize,
    /// Inclusive.
    pub year_range: (i32, i32),
    pub retraction_fraction: f64,
    pub attachment_exponent: f64,
    pub mean_out_degree: f64,
    /// Inject records and rows the loaders have to drop or repair.
    pub noise: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_papers: 500,
            n_venues: 8,
            n_fields: 5,
            year_range: (2000, 2015),
            retraction_fraction: 0.04,
            attachment_exponent: 1.0,
            mean_out_degree: 5.0,
            noise: true,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_papers == 0 || self.n_venues == 0 || self.n_fields == 0 {
            return bad("paper, venue and field counts must be positive".into());
        }
        let (start, end) = self.year_range;
        if start > end || start < crate::ingest::MIN_YEAR || end > 9999 {
            return bad(format!("year range {start}..={end} is not usable"));
        }
        if !(0.0..=1.0).contains(&self.retraction_fraction) {
            return bad(format!(
                "retraction fraction {} outside [0, 1]",
                self.retraction_fraction
            ));
        }
        if !(self.attachment_exponent.is_finite() && self.attachment_exponent >= 0.0) {
            return bad("attachment exponent must be finite and non-negative".into());
        }
        if !(self.mean_out_degree.is_finite() && self.mean_out_degree > 0.0) {
            return bad("mean out-degree must be positive".into());
        }
        if self.mean_out_degree >= self.n_papers as f64 {
            return bad(format!(
                "mean out-degree {} needs more than {} papers",
                self.mean_out_degree, self.n_papers
            ));
        }
        Ok(())
    }

    /// The last generated year lies past the cutoff, so late citations and
    /// non-subject papers are always exercised.
    pub fn cutoff_year(&self) -> i32 {
        let (start, end) = self.year_range;
        if start < end {
            end - 1
        } else {
            end
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub config: SynthConfig,
    pub publication_lines: Vec<String>,
    pub edges: Vec<(u64, u64)>,
    /// doi, retraction_date, original_pub_date
    pub retraction_rows: Vec<[String; 3]>,
    /// venue, impact_factor
    pub impact_rows: Vec<[String; 2]>,
    pub truth: OracleInput,
}

const FIELD_NAMES: [&str; 12] = [
    "Medicine",
    "Biology",
    "Chemistry",
    "Computer Science",
    "Physics",
    "Psychology",
    "Materials Science",
    "Engineering",
    "Mathematics",
    "Economics",
    "Environmental Science",
    "Sociology",
];

fn field_name(i: usize) -> String {
    FIELD_NAMES
        .get(i)
        .map_or_else(|| format!("Field {i}"), |s| s.to_string())
}

fn venue_name(i: usize) -> String {
    format!("Journal of Topic {i}")
}

/// Impact factors sitting on or next to the bin edges.
const EDGE_IMPACTS: [f64; 9] = [2.999, 3.0, 4.999, 5.0, 9.999, 10.0, 19.999, 20.0, 100.0];

struct Paper {
    id: u64,
    year: i32,
    date: Option<NaiveDate>,
    venue: Option<usize>,
    fields: Vec<usize>,
    doi: Option<String>,
}

fn random_date(rng: &mut ChaCha8Rng, year: i32) -> NaiveDate {
    let days = if NaiveDate::from_yo_opt(year, 366).is_some() { 366 } else { 365 };
    NaiveDate::from_yo_opt(year, rng.random_range(1..=days)).expect("ordinal within year")
}

fn effective(paper: &Paper) -> NaiveDate {
    paper
        .date
        .unwrap_or_else(|| NaiveDate::from_ymd_opt(paper.year, 7, 1).expect("valid year"))
}

fn us_date(d: NaiveDate) -> String {
    format!("{}/{}/{}", d.month(), d.day(), d.year())
}

pub fn generate(config: &SynthConfig) -> Result<SynthDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_papers;
    let noise = config.noise;
    let (start, end) = config.year_range;

    let mut years: Vec<i32> = (0..n).map(|_| rng.random_range(start..=end)).collect();
    years.sort_unstable();

    let mut ids: Vec<u64> = Vec::with_capacity(n);
    let mut next_id = 1_000u64;
    for _ in 0..n {
        next_id += rng.random_range(1..=7);
        ids.push(next_id);
    }
    for i in (1..n).rev() {
        ids.swap(i, rng.random_range(0..=i));
    }
    let max_id = next_id;

    let field_cap = config.n_fields.min(3);
    let papers: Vec<Paper> = (0..n)
        .map(|i| {
            let year = years[i];
            let date = rng.random_bool(0.8).then(|| random_date(&mut rng, year));
            let venue = (!noise || rng.random_bool(0.97))
                .then(|| rng.random_range(0..config.n_venues));
            let fields = if noise && rng.random_bool(0.03) {
                Vec::new()
            } else {
                let k = rng.random_range(1..=field_cap);
                let mut f = sample(&mut rng, config.n_fields, k).into_vec();
                f.sort_unstable();
                f
            };
            let doi = rng.random_bool(0.92).then(|| format!("10.5555/syn.{}", ids[i]));
            Paper { id: ids[i], year, date, venue, fields, doi }
        })
        .collect();

    // Citations. Candidates for paper i are papers 0..i, so cited years never
    // exceed citing years.
    let preferential = config.attachment_exponent / (1.0 + config.attachment_exponent);
    let mut tokens: Vec<usize> = Vec::new();
    let mut in_degree = vec![0u64; n];
    let mut out_degree = vec![0u64; n];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        if i > 0 {
            let wanted = ((2.0 * config.mean_out_degree * rng.random::<f64>()).round() as usize).min(i);
            let mut chosen = BTreeSet::new();
            let mut attempts = 0;
            while chosen.len() < wanted && attempts < 4 * wanted + 10 {
                attempts += 1;
                let pick = if !tokens.is_empty() && rng.random_bool(preferential) {
                    tokens[rng.random_range(0..tokens.len())]
                } else {
                    rng.random_range(0..i)
                };
                chosen.insert(pick);
            }
            for j in chosen {
                pairs.push((i, j));
                tokens.push(j);
                in_degree[j] += 1;
                out_degree[i] += 1;
            }
        }
        tokens.push(i);
    }
    for i in (1..pairs.len()).rev() {
        pairs.swap(i, rng.random_range(0..=i));
    }
    let mut edges: Vec<(u64, u64)> = pairs.iter().map(|&(a, b)| (ids[a], ids[b])).collect();

    let citation_count: Vec<u64> = (0..n)
        .map(|i| in_degree[i] + if noise { rng.random_range(0..3) } else { 0 })
        .collect();

    let mut lines = Vec::with_capacity(n + 16);
    for (i, p) in papers.iter().enumerate() {
        let pub_date = match p.date {
            Some(d) => match rng.random_range(0..10) {
                0 if noise => serde_json::Value::from(us_date(d)),
                1 if noise => serde_json::Value::from(format!("{d}T00:00:00")),
                _ => serde_json::Value::from(d.to_string()),
            },
            None if noise && rng.random_bool(0.25) => {
                serde_json::Value::from(format!("{}-02-30", p.year))
            }
            None => serde_json::Value::Null,
        };
        let venue = p.venue.map(|v| {
            let name = venue_name(v);
            match rng.random_range(0..8) {
                0 if noise => name.to_uppercase(),
                1 if noise => format!("{name}."),
                _ => name,
            }
        });
        let fields: Vec<String> = p
            .fields
            .iter()
            .map(|&f| {
                let name = field_name(f);
                if noise && rng.random_bool(0.1) {
                    format!("  {}", name.to_lowercase().replace(' ', "   "))
                } else {
                    name
                }
            })
            .collect();
        let doi = p.doi.as_ref().map(|d| match rng.random_range(0..10) {
            0 if noise => d.to_uppercase(),
            1 if noise => format!("https://doi.org/{d}"),
            _ => d.clone(),
        });
        lines.push(
            serde_json::json!({
                "id": p.id,
                "doi": doi,
                "title": format!("Synthetic paper {}", p.id),
                "year": p.year,
                "pub_date": pub_date,
                "venue": venue,
                "fields": fields,
                "citation_count": citation_count[i],
                "reference_count": out_degree[i],
            })
            .to_string(),
        );
    }

    let mut fresh_id = max_id;
    let mut fresh = || {
        fresh_id += 1;
        fresh_id
    };
    if noise {
        lines.push("{\"id\": 17, \"year\": ".to_string());
        lines.push(serde_json::json!({"id": fresh(), "year": null, "venue": venue_name(0)}).to_string());
        lines.push(serde_json::json!({"id": fresh(), "year": 1899, "venue": venue_name(0)}).to_string());
        // Copies sharing a DOI with a real paper; with no citations or
        // references and a larger id they always lose the DOI tie-break.
        let with_doi: Vec<usize> = (0..n).filter(|&i| papers[i].doi.is_some()).collect();
        for k in 0..(n / 50).max(1).min(with_doi.len()) {
            let original = &papers[with_doi[(k * 37) % with_doi.len()]];
            let copy_id = fresh();
            lines.push(
                serde_json::json!({
                    "id": copy_id,
                    "doi": original.doi.as_ref().map(|d| d.to_uppercase()),
                    "title": "Duplicate record",
                    "year": original.year,
                    "venue": original.venue.map(venue_name),
                    "fields": original.fields.iter().map(|&f| field_name(f)).collect::<Vec<_>>(),
                    "citation_count": 0,
                    "reference_count": 0,
                })
                .to_string(),
            );
            // its edges dangle once the copy is dropped
            edges.push((copy_id, original.id));
        }
        for k in 0..3.min(n) {
            let a = ids[(k * 131) % n];
            edges.push((a, a));
            if let Some(&e) = edges.get(k * 7 % edges.len().max(1)) {
                edges.push(e);
            }
            edges.push((a, max_id + 10_000 + k as u64));
        }
    }

    // Retractions: papers with a DOI, retracted some time after publication.
    let with_doi: Vec<usize> = (0..n).filter(|&i| papers[i].doi.is_some()).collect();
    let n_retracted =
        ((config.retraction_fraction * n as f64).round() as usize).min(with_doi.len());
    let mut retracted: Vec<usize> = sample(&mut rng, with_doi.len(), n_retracted)
        .into_iter()
        .map(|k| with_doi[k])
        .collect();
    retracted.sort_unstable();
    let mut retraction_rows = Vec::new();
    let mut seeds = Vec::new();
    for &i in &retracted {
        let p = &papers[i];
        let published = effective(p);
        let date = published + Duration::days(rng.random_range(1..=3000));
        let doi = p.doi.clone().expect("filtered on doi");
        let shown = if noise && rng.random_bool(0.2) { format!("doi:{}", doi.to_uppercase()) } else { doi.clone() };
        let date_text = if noise && rng.random_bool(0.2) { us_date(date) } else { date.to_string() };
        let original = p.date.map_or_else(String::new, |d| d.to_string());
        if noise && rng.random_bool(0.15) {
            // an earlier notice for the same paper; the latest one wins
            let earlier = date - Duration::days(rng.random_range(1..=400));
            retraction_rows.push([doi.clone(), earlier.to_string(), original.clone()]);
        }
        retraction_rows.push([shown, date_text, original]);
        seeds.push((p.id, date));
    }
    if noise {
        retraction_rows.push([String::new(), "2010-01-01".into(), String::new()]);
        retraction_rows.push(["10.9999/ghost.1".into(), "not a date".into(), String::new()]);
        retraction_rows.push(["10.9999/ghost.2".into(), "2011-05-05".into(), String::new()]);
    }
    for i in (1..retraction_rows.len()).rev() {
        retraction_rows.swap(i, rng.random_range(0..=i));
    }

    let mut impact = BTreeMap::new();
    let mut impact_rows = Vec::new();
    for v in 0..config.n_venues {
        if rng.random_bool(0.1) {
            continue;
        }
        let value = if rng.random_bool(0.5) {
            EDGE_IMPACTS[rng.random_range(0..EDGE_IMPACTS.len())]
        } else {
            (rng.random_range(0.0..40.0) * 1000.0f64).round() / 1000.0
        };
        let name = venue_name(v);
        impact.insert(name.to_lowercase(), value);
        let shown = if noise && rng.random_bool(0.2) { name.to_uppercase() } else { name };
        impact_rows.push([shown.clone(), value.to_string()]);
        if noise && rng.random_bool(0.2) {
            impact_rows.push([shown, (value / 2.0).to_string()]);
        }
    }
    if noise {
        impact_rows.push(["Unknown Gazette".into(), "7.5".into()]);
        impact_rows.push([venue_name(0), "-1.5".into()]);
        impact_rows.push([venue_name(0), "n/a".into()]);
    }

    let truth = OracleInput {
        papers: papers
            .iter()
            .zip(&citation_count)
            .map(|(p, &cites)| OraclePaper {
                id: p.id,
                year: p.year,
                date: effective(p),
                exact_date: p.date.is_some(),
                venue: p.venue.map(|v| venue_name(v).to_lowercase()),
                fields: p.fields.iter().map(|&f| field_name(f).to_lowercase()).collect(),
                citation_count: cites,
            })
            .collect(),
        edges: edges.clone(),
        seeds,
        impact,
        cutoff_year: config.cutoff_year(),
    };

    Ok(SynthDataset {
        config: config.clone(),
        publication_lines: lines,
        edges,
        retraction_rows,
        impact_rows,
        truth,
    })
}

fn write_file(path: &Path, fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    fill(&mut out).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

fn csv_row(out: &mut dyn Write, cells: &[&str]) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(cells).map_err(std::io::Error::other)?;
    writer.flush()
}

impl SynthDataset {
    /// Writes the four inputs and a `manifest.toml` naming them; returns the
    /// manifest path.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(&dir.join(PUBLICATIONS_FILE), |out| {
            for line in &self.publication_lines {
                writeln!(out, "{line}")?;
            }
            Ok(())
        })?;
        write_file(&dir.join(CITATIONS_FILE), |out| {
            writeln!(out, "citing_id,cited_id")?;
            for (a, b) in &self.edges {
                writeln!(out, "{a},{b}")?;
            }
            Ok(())
        })?;
        write_file(&dir.join(RETRACTIONS_FILE), |out| {
            csv_row(out, &["doi", "retraction_date", "original_pub_date"])?;
            for row in &self.retraction_rows {
                csv_row(out, &[&row[0], &row[1], &row[2]])?;
            }
            Ok(())
        })?;
        write_file(&dir.join(JOURNAL_IF_FILE), |out| {
            csv_row(out, &["venue", "impact_factor"])?;
            for row in &self.impact_rows {
                csv_row(out, &[&row[0], &row[1]])?;
            }
            Ok(())
        })?;
        let manifest = InputManifest::with_inputs(
            [PUBLICATIONS_FILE, CITATIONS_FILE, RETRACTIONS_FILE, JOURNAL_IF_FILE],
            self.config.cutoff_year(),
        );
        let path = dir.join(MANIFEST_FILE);
        write_file(&path, |out| out.write_all(manifest.to_toml().as_bytes()))?;
        Ok(path)
    }
}
