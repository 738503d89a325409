//! Hit rate of the top-k% attended protein positions against the planted
//! sites, per head, next to the chance rate of a random ranking.
//!
//! cargo run --release --example binding_site_hits

mod common;

use gca_dti::metrics::{chance_hit_rate, protein_site_rankings, site_hit_rate};

fn main() -> gca_dti::Result<()> {
    let synth = common::small_synthetic(2);
    let t = common::train_on(&synth, common::small_spec(&synth), 15)?;
    let set = t.model.examples(&t.test)?;
    let sites = common::sites_for(&t.data, &t.test);
    let lens: Vec<usize> = set.iter().map(|e| e.protein.valid_len).collect();
    let rankings = protein_site_rankings(&t.model, &set)?;
    for nb in [0, 1] {
        println!("neighborhood {nb}");
        let heads: Vec<String> = rankings.iter().map(|(h, _)| format!("head {h:>4}")).collect();
        println!("  k%  {}     chance", heads.join("  "));
        for k in [1.0, 2.0, 5.0, 10.0, 15.0, 20.0] {
            let rates: Vec<String> = rankings
                .iter()
                .map(|(_, r)| site_hit_rate(r, &sites, k, nb).map(|x| format!("{:>9.3}", x.rate)))
                .collect::<Result<_, _>>()?;
            println!("  {k:>3}  {}  {:>9.3}", rates.join("  "), chance_hit_rate(&lens, &sites, k, nb)?);
        }
    }
    Ok(())
}
