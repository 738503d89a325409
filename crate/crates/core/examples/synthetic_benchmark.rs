//! GCA against a no-interaction baseline with the same interaction-scope
//! parameter budget, on the full-size planted-motif task (200 drugs x 50
//! targets, two motif pairs, noise sigma 0.3), plus the protein-attention
//! site hit rate of the GCA model.
//!
//! cargo run --release --example synthetic_benchmark -- [seeds] [epochs]

mod common;

use std::time::Instant;

use gca_dti::data::SyntheticSpec;
use gca_dti::metrics::{chance_hit_rate, evaluate_model, protein_site_rankings, site_hit_rate};
use gca_dti::model::{interaction_parameter_count, matched_baseline};

fn main() -> gca_dti::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>().ok());
    let seeds = args.next().flatten().unwrap_or(5) as u64;
    let epochs = args.next().flatten().unwrap_or(10);
    println!("seed  gca mse/ci        none mse/ci       best-head hits  chance  time");
    for seed in 0..seeds {
        let t0 = Instant::now();
        let synth = SyntheticSpec {
            seed,
            ..Default::default()
        };
        let spec = common::small_spec(&synth);
        let base = matched_baseline(&spec);
        assert_eq!(interaction_parameter_count(&spec), interaction_parameter_count(&base));

        let gca = common::train_on(&synth, spec, epochs)?;
        let none = common::train_on(&synth, base, epochs)?;
        let g = evaluate_model(&gca.model, &gca.model.examples(&gca.test)?)?;
        let n = evaluate_model(&none.model, &none.model.examples(&none.test)?)?;

        let set = gca.model.examples(&gca.test)?;
        let sites = common::sites_for(&gca.data, &gca.test);
        let lens: Vec<usize> = set.iter().map(|e| e.protein.valid_len).collect();
        let best = protein_site_rankings(&gca.model, &set)?
            .iter()
            .map(|(_, r)| site_hit_rate(r, &sites, 10.0, 1).map(|x| x.rate))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(0.0, f64::max);
        println!(
            "{seed:>4}  {:.3}/{:.3}       {:.3}/{:.3}       {best:>14.3}  {:>6.3}  {:.0?}",
            g.mse,
            g.c_index,
            n.mse,
            n.c_index,
            chance_hit_rate(&lens, &sites, 10.0, 1)?,
            t0.elapsed()
        );
    }
    Ok(())
}
