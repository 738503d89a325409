//! Substitute each residue of a planted protein motif and report how the
//! attention ranks around it move.
//!
//! cargo run --release --example mutation_scan

mod common;

use gca_dti::metrics::{mutation_rank_shift, HeadSelect};

fn main() -> gca_dti::Result<()> {
    let synth = common::small_synthetic(3);
    let t = common::train_on(&synth, common::small_spec(&synth), 15)?;
    let sites = common::sites_for(&t.data, &t.test);
    let (rec, s) = t
        .test
        .iter()
        .zip(&sites)
        .find(|(_, s)| !s.is_empty())
        .expect("a held-out pair with a planted site");
    let fasta: Vec<char> = rec.fasta.chars().collect();
    let motif: String = s.iter().map(|&p| fasta[p]).collect();
    println!("{} x {}: sites {s:?} ({motif})", rec.drug_id, rec.target_id);
    let ex = t.model.example(&rec.smiles, &rec.fasta, rec.affinity)?;
    // any residue that does not occur in the motif
    let replacement = t
        .model
        .config()
        .protein_vocab
        .symbols()
        .iter()
        .copied()
        .find(|c| !motif.contains(*c))
        .unwrap();
    println!("position  residue  head-mean rank  (old -> new, delta)");
    for &p in s {
        let rows = mutation_rank_shift(&t.model, &ex.drug, &ex.protein, p, replacement)?;
        let at = rows
            .iter()
            .find(|r| r.head == HeadSelect::Mean && r.position == p)
            .unwrap();
        println!(
            "{p:>8}  {}->{replacement}     {:>4} -> {:<4} ({:+})",
            fasta[p], at.old_rank, at.new_rank, at.delta
        );
    }
    Ok(())
}
