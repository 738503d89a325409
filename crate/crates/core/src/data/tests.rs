use super::*;

fn toy_tsv(rows: usize) -> String {
    let mut s = format!("{DATASET_HEADER}\n");
    for i in 0..rows {
        s.push_str(&format!("D{i}\tT{i}\tCCO\tMKV\t{}.5\n", i + 1));
    }
    s
}

#[test]
fn six_rows_split_five_one() {
    let recs = parse_dataset(&toy_tsv(6)).unwrap();
    assert_eq!(recs.len(), 6);
    let (train, test) = split(&recs, 1.0 / 6.0, 3).unwrap();
    assert_eq!((train.len(), test.len()), (5, 1));
    let again = split(&recs, 1.0 / 6.0, 3).unwrap();
    assert_eq!(again, (train, test));
}

#[test]
fn bad_affinity_cites_line() {
    let mut text = toy_tsv(3);
    text = text.replacen("\t2.5", "\tabc", 1);
    let err = parse_dataset(&text).unwrap_err().to_string();
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn empty_field_and_duplicates_rejected() {
    let text = format!("{DATASET_HEADER}\nD1\tT1\t\tMKV\t1.0\n");
    assert!(parse_dataset(&text).unwrap_err().to_string().contains("empty smiles"));
    let text = format!("{DATASET_HEADER}\nD1\tT1\tC\tM\t1\nD1\tT1\tC\tM\t2\n");
    assert!(parse_dataset(&text).unwrap_err().to_string().contains("line 3"));
    assert!(parse_dataset("drug\ttarget\n").is_err());
}

#[test]
fn tsv_round_trip() {
    let recs = parse_dataset(&toy_tsv(4)).unwrap();
    assert_eq!(parse_dataset(&dataset_to_tsv(&recs)).unwrap(), recs);
}

#[test]
fn sites_round_trip() {
    let recs = parse_dataset(&toy_tsv(2)).unwrap();
    let mut sites = SiteMap::new();
    sites.insert(("D0".into(), "T0".into()), vec![1, 4, 5]);
    let text = sites_to_tsv(&recs, &sites);
    let back = parse_sites(&text).unwrap();
    assert_eq!(back[&("D0".to_string(), "T0".to_string())], vec![1, 4, 5]);
    assert!(back[&("D1".to_string(), "T1".to_string())].is_empty());
    assert!(parse_sites(&format!("{SITES_HEADER}\nD\tT\t1,x\n")).is_err());
}

fn small_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        n_drugs: 12,
        n_targets: 6,
        seed,
        ..Default::default()
    }
}

fn contains(hay: &str, needle: &str) -> bool {
    hay.contains(needle)
}

#[test]
fn noiseless_affinity_follows_rule() {
    let spec = SyntheticSpec {
        sigma: 0.0,
        ..small_spec(1)
    };
    let data = gen_synthetic(&spec).unwrap();
    let (mut none, mut one) = (0, 0);
    for r in &data.records {
        let present = data
            .motifs
            .iter()
            .filter(|m| contains(&r.smiles, &m.drug_motif) && contains(&r.fasta, &m.protein_motif))
            .count();
        assert_eq!(r.affinity, spec.base + spec.bonus * present as f64);
        match present {
            0 => none += 1,
            1 => one += 1,
            _ => {}
        }
    }
    // both spec examples occur: base alone, and base + one bonus (5 + 2 = 7)
    assert!(none > 0 && one > 0);
    assert!(data.records.iter().any(|r| r.affinity == 7.0));
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["a", "b"] {
        gen_synthetic(&small_spec(5)).unwrap().write(dir.path().join(sub)).unwrap();
    }
    for f in ["dataset.tsv", "sites.tsv"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b);
    }
    assert_ne!(
        gen_synthetic(&small_spec(5)).unwrap().records,
        gen_synthetic(&small_spec(6)).unwrap().records
    );
}

#[test]
fn sites_index_real_motif_occurrences() {
    for seed in 0..5 {
        let data = gen_synthetic(&small_spec(seed)).unwrap();
        assert!(!data.sites.is_empty());
        for r in &data.records {
            let Some(pos) = data.sites.get(&(r.drug_id.clone(), r.target_id.clone())) else {
                continue;
            };
            let fasta: Vec<char> = r.fasta.chars().collect();
            for &p in pos {
                let covered = data.motifs.iter().any(|m| {
                    let pm: Vec<char> = m.protein_motif.chars().collect();
                    contains(&r.smiles, &m.drug_motif)
                        && ((p + 1).saturating_sub(pm.len())..=p)
                            .any(|s| fasta.get(s..s + pm.len()) == Some(&pm[..]))
                });
                assert!(covered, "site {p} of {} is not inside a motif", r.target_id);
            }
        }
    }
}

#[test]
fn impossible_placement_is_config_error() {
    let spec = SyntheticSpec {
        protein_len_min: 6,
        protein_len_max: 8,
        ..small_spec(0)
    };
    assert!(matches!(gen_synthetic(&spec), Err(crate::GcaError::Config(_))));
}

#[test]
fn spec_text_round_trip() {
    let spec = SyntheticSpec {
        sigma: 0.25,
        ..small_spec(9)
    };
    let entries = crate::config::parse_pairs(&spec.to_text()).unwrap();
    assert_eq!(SyntheticSpec::from_entries(&entries).unwrap(), spec);
    let bad = crate::config::parse_pairs("n_drug=3").unwrap();
    assert!(SyntheticSpec::from_entries(&bad).is_err());
}

#[test]
fn mean_lengths_count_distinct_entities() {
    let text = format!("{DATASET_HEADER}\nD1\tT1\tCC\tMKVL\t1\nD1\tT2\tCC\tMK\t2\nD2\tT1\tCCCC\tMKVL\t3\n");
    let recs = parse_dataset(&text).unwrap();
    assert_eq!(mean_lengths(&recs), (3.0, 3.0));
}
