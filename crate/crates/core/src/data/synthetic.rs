use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use super::{dataset_to_tsv, sites_to_tsv, AffinityRecord, SiteMap};
use crate::config::{self, Entry};
use crate::error::{GcaError, Result};

/// Planted ground truth: affinity receives `bonus` whenever the drug contains
/// `drug_motif` and the target contains `protein_motif`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MotifPair {
    pub drug_motif: String,
    pub protein_motif: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub n_drugs: usize,
    pub n_targets: usize,
    pub drug_alphabet: String,
    pub protein_alphabet: String,
    pub drug_len_min: usize,
    pub drug_len_max: usize,
    pub protein_len_min: usize,
    pub protein_len_max: usize,
    pub n_motif_pairs: usize,
    pub drug_motif_len: usize,
    pub protein_motif_len: usize,
    /// Sampling weight of motif characters in background sequence, relative
    /// to 1.0 for every other character. 1.0 means uniform background.
    pub motif_background_weight: f64,
    /// Probability that a sequence gets a given motif planted.
    pub plant_probability: f64,
    pub base: f64,
    pub bonus: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_drugs: 200,
            n_targets: 50,
            drug_alphabet: "CNOSPFBIcnosp()=#123".into(),
            protein_alphabet: "ACDEFGHIKLMNPQRSTVWY".into(),
            drug_len_min: 20,
            drug_len_max: 40,
            protein_len_min: 80,
            protein_len_max: 150,
            n_motif_pairs: 2,
            drug_motif_len: 4,
            protein_motif_len: 5,
            motif_background_weight: 0.1,
            plant_probability: 0.5,
            base: 5.0,
            bonus: 2.0,
            sigma: 0.3,
            seed: 0,
        }
    }
}

fn distinct_chars(s: &str) -> usize {
    let mut c: Vec<char> = s.chars().collect();
    c.sort_unstable();
    c.dedup();
    c.len()
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(GcaError::Config(m));
        if self.n_drugs == 0 || self.n_targets == 0 {
            return err("n_drugs and n_targets must be positive".into());
        }
        if self.drug_len_min == 0 || self.drug_len_min > self.drug_len_max || self.protein_len_min == 0 || self.protein_len_min > self.protein_len_max {
            return err("length ranges must satisfy 0 < min <= max".into());
        }
        if self.n_motif_pairs > 0 && (self.drug_motif_len == 0 || self.protein_motif_len == 0) {
            return err("motif lengths must be positive".into());
        }
        // every planted motif of one side must fit without overlap
        if self.n_motif_pairs * self.drug_motif_len > self.drug_len_min {
            return err(format!(
                "{} drug motifs of length {} cannot be placed in a sequence of length {}",
                self.n_motif_pairs, self.drug_motif_len, self.drug_len_min
            ));
        }
        if self.n_motif_pairs * self.protein_motif_len > self.protein_len_min {
            return err(format!(
                "{} protein motifs of length {} cannot be placed in a sequence of length {}",
                self.n_motif_pairs, self.protein_motif_len, self.protein_len_min
            ));
        }
        for (alpha, need, side) in [
            (&self.drug_alphabet, self.n_motif_pairs * self.drug_motif_len, "drug"),
            (&self.protein_alphabet, self.n_motif_pairs * self.protein_motif_len, "protein"),
        ] {
            if alpha.chars().any(|c| c.is_whitespace() || c.is_control()) {
                return err(format!("{side} alphabet contains whitespace or control characters"));
            }
            if distinct_chars(alpha) != alpha.chars().count() {
                return err(format!("{side} alphabet repeats a character"));
            }
            if distinct_chars(alpha) <= need {
                return err(format!(
                    "{side} alphabet of {} characters is too small for {need} distinct motif characters plus background",
                    distinct_chars(alpha)
                ));
            }
        }
        if !(self.motif_background_weight >= 0.0 && self.motif_background_weight.is_finite()) {
            return err("motif_background_weight must be a non-negative number".into());
        }
        if !(0.0..=1.0).contains(&self.plant_probability) {
            return err("plant_probability must lie in [0, 1]".into());
        }
        if !(self.sigma >= 0.0) || !self.base.is_finite() || !self.bonus.is_finite() {
            return err("sigma must be non-negative and base/bonus finite".into());
        }
        Ok(())
    }

    pub fn apply(&mut self, e: &Entry) -> Result<bool> {
        match e.key.as_str() {
            "n_drugs" => self.n_drugs = config::usize_value(e)?,
            "n_targets" => self.n_targets = config::usize_value(e)?,
            "drug_alphabet" => self.drug_alphabet = e.value.clone(),
            "protein_alphabet" => self.protein_alphabet = e.value.clone(),
            "drug_len_min" => self.drug_len_min = config::usize_value(e)?,
            "drug_len_max" => self.drug_len_max = config::usize_value(e)?,
            "protein_len_min" => self.protein_len_min = config::usize_value(e)?,
            "protein_len_max" => self.protein_len_max = config::usize_value(e)?,
            "n_motif_pairs" => self.n_motif_pairs = config::usize_value(e)?,
            "drug_motif_len" => self.drug_motif_len = config::usize_value(e)?,
            "protein_motif_len" => self.protein_motif_len = config::usize_value(e)?,
            "motif_background_weight" => self.motif_background_weight = config::f64_value(e)?,
            "plant_probability" => self.plant_probability = config::f64_value(e)?,
            "base" => self.base = config::f64_value(e)?,
            "bonus" => self.bonus = config::f64_value(e)?,
            "sigma" => self.sigma = config::f64_value(e)?,
            "seed" => self.seed = config::u64_value(e)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn from_entries(entries: &[Entry]) -> Result<Self> {
        let mut spec = SyntheticSpec::default();
        for e in entries {
            if !spec.apply(e)? {
                return Err(config::unknown_key(e));
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        format!(
            "n_drugs={}\nn_targets={}\ndrug_alphabet={}\nprotein_alphabet={}\n\
             drug_len_min={}\ndrug_len_max={}\nprotein_len_min={}\nprotein_len_max={}\n\
             n_motif_pairs={}\ndrug_motif_len={}\nprotein_motif_len={}\n\
             motif_background_weight={}\nplant_probability={}\nbase={}\nbonus={}\nsigma={}\nseed={}\n",
            self.n_drugs,
            self.n_targets,
            self.drug_alphabet,
            self.protein_alphabet,
            self.drug_len_min,
            self.drug_len_max,
            self.protein_len_min,
            self.protein_len_max,
            self.n_motif_pairs,
            self.drug_motif_len,
            self.protein_motif_len,
            self.motif_background_weight,
            self.plant_probability,
            self.base,
            self.bonus,
            self.sigma,
            self.seed
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData {
    pub records: Vec<AffinityRecord>,
    pub sites: SiteMap,
    pub motifs: Vec<MotifPair>,
}

impl SyntheticData {
    /// Writes `dataset.tsv` and `sites.tsv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| GcaError::io(dir, e))?;
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| GcaError::io(&p, e))
        };
        write("dataset.tsv", dataset_to_tsv(&self.records))?;
        write("sites.tsv", sites_to_tsv(&self.records, &self.sites))
    }
}

/// Background sampler plus the characters reserved for motifs.
struct Side {
    alphabet: Vec<char>,
    background: WeightedIndex<f64>,
    motifs: Vec<String>,
}

impl Side {
    fn new(alphabet: &str, n_motifs: usize, motif_len: usize, weight: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        let alphabet: Vec<char> = alphabet.chars().collect();
        let mut shuffled = alphabet.clone();
        shuffled.shuffle(rng);
        let reserved = &shuffled[..n_motifs * motif_len];
        let motifs = reserved
            .chunks(motif_len)
            .map(|c| c.iter().collect())
            .collect();
        let weights: Vec<f64> = alphabet
            .iter()
            .map(|c| if reserved.contains(c) { weight } else { 1.0 })
            .collect();
        let background = WeightedIndex::new(&weights)
            .map_err(|e| GcaError::Config(format!("background weights: {e}")))?;
        Ok(Side {
            alphabet,
            background,
            motifs,
        })
    }

    /// Random background of a length in `[min, max]` with each motif planted
    /// independently with probability `p`, at non-overlapping positions.
    fn sequence(&self, min: usize, max: usize, p: f64, rng: &mut ChaCha8Rng) -> String {
        let len = rng.random_range(min..=max);
        let mut s: Vec<char> = (0..len)
            .map(|_| self.alphabet[self.background.sample(rng)])
            .collect();
        let mut taken: Vec<(usize, usize)> = Vec::new();
        for motif in &self.motifs {
            if !rng.random_bool(p) {
                continue;
            }
            let m = motif.chars().count();
            let free: Vec<usize> = (0..=len - m)
                .filter(|&st| taken.iter().all(|&(a, b)| st + m <= a || st >= b))
                .collect();
            // validate() guarantees room for every motif, but a random earlier
            // placement can still fragment the free space
            if let Some(&start) = free.choose(rng) {
                for (i, c) in motif.chars().enumerate() {
                    s[start + i] = c;
                }
                taken.push((start, start + m));
            }
        }
        s.into_iter().collect()
    }
}

/// Residue indices covered by every occurrence of `motif` in `s`.
fn occurrences(s: &[char], motif: &[char]) -> Vec<usize> {
    if motif.is_empty() || motif.len() > s.len() {
        return Vec::new();
    }
    (0..=s.len() - motif.len())
        .filter(|&i| s[i..i + motif.len()] == *motif)
        .flat_map(|i| i..i + motif.len())
        .collect()
}

/// Full drug × target grid with planted motif pairs. Presence is decided by
/// substring search on the final sequences, so chance occurrences count too.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let w = spec.motif_background_weight;
    let drug_side = Side::new(&spec.drug_alphabet, spec.n_motif_pairs, spec.drug_motif_len, w, &mut rng)?;
    let protein_side = Side::new(&spec.protein_alphabet, spec.n_motif_pairs, spec.protein_motif_len, w, &mut rng)?;
    let p = spec.plant_probability;
    let drugs: Vec<String> = (0..spec.n_drugs)
        .map(|_| drug_side.sequence(spec.drug_len_min, spec.drug_len_max, p, &mut rng))
        .collect();
    let targets: Vec<String> = (0..spec.n_targets)
        .map(|_| protein_side.sequence(spec.protein_len_min, spec.protein_len_max, p, &mut rng))
        .collect();
    let motifs: Vec<MotifPair> = drug_side
        .motifs
        .iter()
        .zip(&protein_side.motifs)
        .map(|(d, p)| MotifPair {
            drug_motif: d.clone(),
            protein_motif: p.clone(),
        })
        .collect();
    let noise = Normal::new(0.0, spec.sigma).map_err(|e| GcaError::Config(format!("sigma: {e}")))?;
    let dw = (spec.n_drugs - 1).to_string().len();
    let tw = (spec.n_targets - 1).to_string().len();
    let mut records = Vec::with_capacity(spec.n_drugs * spec.n_targets);
    let mut sites = SiteMap::new();
    for (di, smiles) in drugs.iter().enumerate() {
        let dc: Vec<char> = smiles.chars().collect();
        for (ti, fasta) in targets.iter().enumerate() {
            let tc: Vec<char> = fasta.chars().collect();
            let mut affinity = spec.base;
            let mut pos = Vec::new();
            for m in &motifs {
                let dm: Vec<char> = m.drug_motif.chars().collect();
                let pm: Vec<char> = m.protein_motif.chars().collect();
                if occurrences(&dc, &dm).is_empty() {
                    continue;
                }
                let occ = occurrences(&tc, &pm);
                if !occ.is_empty() {
                    affinity += spec.bonus;
                }
                pos.extend(occ);
            }
            if spec.sigma > 0.0 {
                affinity += noise.sample(&mut rng);
            }
            pos.sort_unstable();
            pos.dedup();
            let (drug_id, target_id) = (format!("D{di:0dw$}"), format!("T{ti:0tw$}"));
            if !pos.is_empty() {
                sites.insert((drug_id.clone(), target_id.clone()), pos);
            }
            records.push(AffinityRecord {
                drug_id,
                target_id,
                smiles: smiles.clone(),
                fasta: fasta.clone(),
                affinity,
            });
        }
    }
    Ok(SyntheticData {
        records,
        sites,
        motifs,
    })
}
