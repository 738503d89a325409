//! Save a trained model, load it back and confirm predictions match bit for
//! bit.
//!
//! cargo run --release --example checkpoint_roundtrip

mod common;

use gca_dti::model::{load_checkpoint, save_checkpoint};

fn main() -> gca_dti::Result<()> {
    let synth = common::small_synthetic(4);
    let t = common::train_on(&synth, common::small_spec(&synth), 3)?;
    let dir = std::env::temp_dir().join("gca_checkpoint_roundtrip");
    std::fs::create_dir_all(&dir).expect("temp dir is writable");
    let path = dir.join("model.gca");
    save_checkpoint(&t.model, &path)?;
    let loaded = load_checkpoint(&path)?;
    let bytes = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
    let mut identical = 0;
    for rec in &t.test {
        let (d, p) = t.model.tokenize_pair(&rec.smiles, &rec.fasta)?;
        identical += (t.model.predict(&d, &p)?.to_bits() == loaded.predict(&d, &p)?.to_bits()) as usize;
    }
    println!("{} ({bytes} bytes): {identical}/{} predictions bit-identical", path.display(), t.test.len());
    println!("stored config:\n{}", loaded.config().to_canonical_text());
    Ok(())
}
