//! Top attended positions per head for held-out pairs, next to the planted
//! motif sites.
//!
//! cargo run --release --example explain_attention

mod common;

fn main() -> gca_dti::Result<()> {
    let synth = common::small_synthetic(1);
    let t = common::train_on(&synth, common::small_spec(&synth), 15)?;
    for m in &t.data.motifs {
        println!("planted pair: drug {:?} / protein {:?}", m.drug_motif, m.protein_motif);
    }
    let sites = common::sites_for(&t.data, &t.test);
    let shown = t.test.iter().zip(&sites).filter(|(_, s)| !s.is_empty()).take(3);
    for (rec, s) in shown {
        let ex = t.model.example(&rec.smiles, &rec.fasta, rec.affinity)?;
        let ranking = t.model.extract_attention(&ex.drug, &ex.protein)?;
        let fasta: Vec<char> = rec.fasta.chars().collect();
        let smiles: Vec<char> = rec.smiles.chars().collect();
        println!("\n{} x {} (affinity {:.2}); true protein sites {s:?}", rec.drug_id, rec.target_id, rec.affinity);
        for (h, hr) in ranking.protein.iter().enumerate() {
            let top: Vec<String> = hr.positions[..5].iter().map(|(p, w)| format!("{p}{}:{w:.3}", fasta[*p])).collect();
            println!("  protein head {h}: {}", top.join(" "));
        }
        for (h, hr) in ranking.drug.iter().enumerate() {
            let top: Vec<String> = hr.positions[..5].iter().map(|(p, w)| format!("{p}{}:{w:.3}", smiles[*p])).collect();
            println!("  drug head {h}:    {}", top.join(" "));
        }
    }
    Ok(())
}
