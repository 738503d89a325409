//! Affinity datasets: TSV ingestion, seeded splits, binding-site files and the
//! planted-motif synthetic generator.

mod synthetic;

pub use synthetic::{gen_synthetic, MotifPair, SyntheticData, SyntheticSpec};

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encoders::{SequenceKind, Vocabulary};
use crate::error::{GcaError, Result};

pub const DATASET_HEADER: &str = "drug_id\ttarget_id\tsmiles\tfasta\taffinity";
pub const SITES_HEADER: &str = "drug_id\ttarget_id\tpositions";

#[derive(Clone, Debug, PartialEq)]
pub struct AffinityRecord {
    pub drug_id: String,
    pub target_id: String,
    pub smiles: String,
    pub fasta: String,
    pub affinity: f64,
}

fn data_err(line: usize, msg: impl std::fmt::Display) -> GcaError {
    GcaError::Data(format!("line {line}: {msg}"))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| GcaError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| GcaError::io(path, e))
}

/// Splits a tab-separated line into exactly `n` non-empty fields.
fn fields<'a>(line: &'a str, n: usize, names: &[&str], lineno: usize) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = line.split('\t').collect();
    if parts.len() != n {
        return Err(data_err(lineno, format!("expected {n} tab-separated fields, found {}", parts.len())));
    }
    for (p, name) in parts.iter().zip(names) {
        if p.trim().is_empty() {
            return Err(data_err(lineno, format!("empty {name}")));
        }
    }
    Ok(parts.iter().map(|p| p.trim()).collect())
}

fn check_header(text: &str, header: &str) -> Result<()> {
    match text.lines().next() {
        Some(first) if first.trim_end() == header => Ok(()),
        Some(first) => Err(data_err(1, format!("expected header {header:?}, found {first:?}"))),
        None => Err(GcaError::Data("file is empty".into())),
    }
}

pub fn parse_dataset(text: &str) -> Result<Vec<AffinityRecord>> {
    check_header(text, DATASET_HEADER)?;
    let names = ["drug_id", "target_id", "smiles", "fasta", "affinity"];
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f = fields(line, 5, &names, lineno)?;
        let affinity: f64 = f[4]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| data_err(lineno, format!("affinity {:?} is not a finite number", f[4])))?;
        if !seen.insert((f[0].to_string(), f[1].to_string())) {
            return Err(data_err(lineno, format!("duplicate pair ({}, {})", f[0], f[1])));
        }
        out.push(AffinityRecord {
            drug_id: f[0].into(),
            target_id: f[1].into(),
            smiles: f[2].into(),
            fasta: f[3].into(),
            affinity,
        });
    }
    if out.is_empty() {
        return Err(GcaError::Data("dataset has no records".into()));
    }
    Ok(out)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<AffinityRecord>> {
    parse_dataset(&read_text(path.as_ref())?)
}

pub fn dataset_to_tsv(records: &[AffinityRecord]) -> String {
    let mut out = format!("{DATASET_HEADER}\n");
    for r in records {
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", r.drug_id, r.target_id, r.smiles, r.fasta, r.affinity);
    }
    out
}

pub fn write_dataset(path: impl AsRef<Path>, records: &[AffinityRecord]) -> Result<()> {
    write_text(path.as_ref(), &dataset_to_tsv(records))
}

/// Seeded shuffle, then the first `round(n * test_fraction)` records form the
/// test set. Returns `(train, test)`; each keeps file order.
pub fn split(records: &[AffinityRecord], test_fraction: f64, seed: u64) -> Result<(Vec<AffinityRecord>, Vec<AffinityRecord>)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(GcaError::Config(format!("test fraction {test_fraction} outside [0, 1)")));
    }
    let n_test = (records.len() as f64 * test_fraction).round() as usize;
    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_test = vec![false; records.len()];
    for &i in &idx[..n_test] {
        is_test[i] = true;
    }
    let (test, train): (Vec<_>, Vec<_>) = records
        .iter()
        .cloned()
        .zip(is_test)
        .partition(|(_, t)| *t);
    Ok((
        train.into_iter().map(|(r, _)| r).collect(),
        test.into_iter().map(|(r, _)| r).collect(),
    ))
}

/// True binding-site positions per (drug id, target id).
pub type SiteMap = HashMap<(String, String), Vec<usize>>;

pub fn parse_sites(text: &str) -> Result<SiteMap> {
    check_header(text, SITES_HEADER)?;
    let mut out = SiteMap::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 || parts[0].is_empty() || parts[1].is_empty() {
            return Err(data_err(lineno, "expected drug_id, target_id and positions"));
        }
        let positions = if parts[2].trim().is_empty() {
            Vec::new()
        } else {
            parts[2]
                .split(',')
                .map(|p| p.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| data_err(lineno, format!("bad position list {:?}", parts[2])))?
        };
        let key = (parts[0].to_string(), parts[1].to_string());
        if out.insert(key, positions).is_some() {
            return Err(data_err(lineno, format!("duplicate pair ({}, {})", parts[0], parts[1])));
        }
    }
    Ok(out)
}

pub fn load_sites(path: impl AsRef<Path>) -> Result<SiteMap> {
    parse_sites(&read_text(path.as_ref())?)
}

/// Sites rows in the given record order; pairs absent from `sites` get an
/// empty position list.
pub fn sites_to_tsv(records: &[AffinityRecord], sites: &SiteMap) -> String {
    let mut out = format!("{SITES_HEADER}\n");
    for r in records {
        let pos = sites
            .get(&(r.drug_id.clone(), r.target_id.clone()))
            .map(|p| p.iter().map(usize::to_string).collect::<Vec<_>>().join(","))
            .unwrap_or_default();
        let _ = writeln!(out, "{}\t{}\t{}", r.drug_id, r.target_id, pos);
    }
    out
}

pub fn write_sites(path: impl AsRef<Path>, records: &[AffinityRecord], sites: &SiteMap) -> Result<()> {
    write_text(path.as_ref(), &sites_to_tsv(records, sites))
}

/// Character vocabularies over every SMILES and FASTA string in `records`.
pub fn vocabularies(records: &[AffinityRecord]) -> Result<(Vocabulary, Vocabulary)> {
    let smiles: Vec<&str> = records.iter().map(|r| r.smiles.as_str()).collect();
    let fasta: Vec<&str> = records.iter().map(|r| r.fasta.as_str()).collect();
    Ok((
        Vocabulary::build(&smiles, SequenceKind::Drug)?,
        Vocabulary::build(&fasta, SequenceKind::Protein)?,
    ))
}

/// Mean SMILES and FASTA lengths over distinct drugs and targets.
pub fn mean_lengths(records: &[AffinityRecord]) -> (f64, f64) {
    let mut drugs = HashMap::new();
    let mut targets = HashMap::new();
    for r in records {
        drugs.entry(&r.drug_id).or_insert(r.smiles.chars().count());
        targets.entry(&r.target_id).or_insert(r.fasta.chars().count());
    }
    let mean = |m: HashMap<&String, usize>| m.values().sum::<usize>() as f64 / m.len().max(1) as f64;
    (mean(drugs), mean(targets))
}

#[cfg(test)]
mod tests;
