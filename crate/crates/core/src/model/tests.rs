use super::*;
use crate::autodiff::finite_diff_check;
use crate::encoders::{EncoderConfig, EncoderKind, Vocabulary};

fn vocabs() -> (Vocabulary, Vocabulary) {
    (
        Vocabulary::build(&["CNO()=c1"], SequenceKind::Drug).unwrap(),
        Vocabulary::build(&["ACDEFGHIKLMNPQRSTVWY"], SequenceKind::Protein).unwrap(),
    )
}

fn spec(mode: InteractionMode, f: usize) -> ModelSpec {
    ModelSpec {
        encoder: EncoderConfig {
            kind: EncoderKind::Embed,
            embed_dim: f,
            max_len_drug: 8,
            max_len_protein: 12,
            ..Default::default()
        },
        interaction: mode,
        head_hidden: 8,
        ..Default::default()
    }
}

fn model(mode: InteractionMode, seed: u64) -> DtiModel {
    let (d, p) = vocabs();
    DtiModel::new(ModelConfig::new(spec(mode, 4), d, p).unwrap(), seed).unwrap()
}

/// Gives the zero-initialized output projections random values so attention
/// actually influences the output.
fn perturb_output_projections(m: &mut DtiModel, seed: u64) {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for name in ["p2d.w_o", "d2p.w_o"] {
        if let Some(t) = m.param_mut(name) {
            *t = Tensor::randn(t.shape(), 0.5, &mut rng);
        }
    }
}

fn toy_set(m: &DtiModel) -> Vec<Example> {
    let rows = [
        ("CCO", "ACDKLM", 5.0),
        ("c1ccN", "MKLVVA", 6.2),
        ("O=C(N)", "PQRSTA", 4.1),
        ("CCCC", "WYYACD", 7.3),
        ("NC=O", "GHIKAC", 5.6),
        ("C(O)O", "ACDKLMNPQ", 6.8),
        ("c1cc", "TVWY", 4.9),
        ("N(C)C", "DEFGHIKL", 5.2),
    ];
    rows.iter().map(|(s, f, y)| m.example(s, f, *y).unwrap()).collect()
}

#[test]
fn zero_head_predicts_zero() {
    let mut m = model(InteractionMode::Gca, 1);
    for name in ["head.w1", "head.b1", "head.w2", "head.b2"] {
        let t = m.param_mut(name).unwrap();
        *t = Tensor::zeros(t.shape());
    }
    for ex in toy_set(&m) {
        assert_eq!(m.predict(&ex.drug, &ex.protein).unwrap(), 0.0);
    }
}

#[test]
fn parameter_count_example() {
    let d = Vocabulary::from_symbols(SequenceKind::Drug, "ABCDEFGH".chars().collect());
    let p = Vocabulary::from_symbols(SequenceKind::Protein, "ABCDEFGH".chars().collect());
    assert_eq!(d.size(), 10);
    let m = DtiModel::new(ModelConfig::new(spec(InteractionMode::None, 4), d, p).unwrap(), 0).unwrap();
    let head = 2 * 4 * 8 + 8 + 8 + 1;
    assert_eq!(m.parameter_count(Scope::Total), 2 * 10 * 4 + head);
    assert_eq!(m.parameter_count(Scope::Interaction), head);
}

#[test]
fn head_count_does_not_change_parameter_count() {
    let (d, p) = vocabs();
    let mut s = spec(InteractionMode::Gca, 8);
    s.num_heads = 1;
    let one = DtiModel::new(ModelConfig::new(s.clone(), d.clone(), p.clone()).unwrap(), 0).unwrap();
    s.num_heads = 2;
    let two = DtiModel::new(ModelConfig::new(s.clone(), d, p).unwrap(), 0).unwrap();
    assert_eq!(one.parameter_count(Scope::Total), two.parameter_count(Scope::Total));
    assert!(two.parameter_count(Scope::Interaction) <= two.parameter_count(Scope::Total));
    assert_eq!(interaction_parameter_count(&s), two.parameter_count(Scope::Interaction));
}

#[test]
fn matched_baseline_within_five_percent() {
    for f in [4, 8, 16, 32, 128] {
        let mut s = spec(InteractionMode::Gca, f);
        s.head_hidden = 32;
        let base = matched_baseline(&s);
        assert_eq!(base.interaction, InteractionMode::None);
        let (a, b) = (interaction_parameter_count(&s) as f64, interaction_parameter_count(&base) as f64);
        assert!((a - b).abs() / a <= 0.05, "f={f}: {a} vs {b}");
    }
}

#[test]
fn both_directions_disabled_equals_none() {
    let mut gca = model(InteractionMode::Gca, 3);
    perturb_output_projections(&mut gca, 9);
    gca.config.spec.switches = crate::attention::GcaSwitches {
        drug_attention: false,
        target_attention: false,
    };
    let mut none = model(InteractionMode::None, 3);
    for name in none.param_names().to_vec() {
        *none.param_mut(&name).unwrap() = gca.param(&name).unwrap().clone();
    }
    for ex in toy_set(&gca) {
        let a = gca.predict(&ex.drug, &ex.protein).unwrap();
        let b = none.predict(&ex.drug, &ex.protein).unwrap();
        assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }
}

#[test]
fn batch_invariance() {
    let mut m = model(InteractionMode::Gca, 4);
    perturb_output_projections(&mut m, 4);
    let set = toy_set(&m);
    let mut g = Graph::new();
    let vars = m.register(&mut g);
    let together: Vec<f64> = set
        .iter()
        .map(|ex| {
            let t = m.forward_graph(&mut g, &vars, &ex.drug, &ex.protein).unwrap();
            g.value(t.y).item()
        })
        .collect();
    for (ex, y) in set.iter().zip(together) {
        let alone = m.predict(&ex.drug, &ex.protein).unwrap();
        assert!((alone - y).abs() <= 1e-9);
    }
}

#[test]
fn end_to_end_gradient_check() {
    for mode in [InteractionMode::Gca, InteractionMode::Decoder, InteractionMode::Ap, InteractionMode::None] {
        let mut m = model(mode, 5);
        perturb_output_projections(&mut m, 5);
        let batch: Vec<Example> = toy_set(&m).into_iter().take(2).collect();
        let report = finite_diff_check(
            |g, vars| m.batch_loss_graph(g, vars, &batch),
            m.params(),
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(report.passed, "{mode:?}: {report:?}");
    }
}

#[test]
fn example_gradient_matches_graph_gradient() {
    let mut m = model(InteractionMode::Gca, 6);
    perturb_output_projections(&mut m, 6);
    let ex = &toy_set(&m)[0];
    let (_, grads) = m.example_gradient(ex).unwrap();
    let mut g = Graph::new();
    let vars = m.register(&mut g);
    let loss = m.batch_loss_graph(&mut g, &vars, std::slice::from_ref(ex)).unwrap();
    g.backward(loss).unwrap();
    for (v, gr) in vars.iter().zip(&grads) {
        assert_eq!(g.grad(*v).unwrap(), gr.as_slice());
    }
}

#[test]
fn overfits_toy_set() {
    let mut m = model(InteractionMode::Gca, 7);
    let set = toy_set(&m);
    let cfg = TrainConfig {
        batch_size: 8,
        epochs: 500,
        seed: 7,
        ..Default::default()
    };
    let log = train(&mut m, &set, None, &cfg).unwrap();
    let last = log.final_train_mse().unwrap();
    assert!(last < 0.01, "final train mse {last}");
    let curve: Vec<f64> = log.epochs.iter().map(|e| e.train_mse).collect();
    for w in curve[50..].windows(2) {
        assert!(w[1] <= w[0] * 1.05 + 1e-12, "uptick {} -> {}", w[0], w[1]);
    }
}

#[test]
fn training_is_deterministic() {
    let run = || {
        let mut m = model(InteractionMode::Gca, 8);
        let set = toy_set(&m);
        let cfg = TrainConfig {
            lr: 1e-2,
            batch_size: 3,
            epochs: 5,
            seed: 2,
            ..Default::default()
        };
        (train(&mut m, &set, Some(&set[..4]), &cfg).unwrap(), m)
    };
    let (a, ma) = run();
    let (b, mb) = run();
    assert_eq!(a, b);
    assert_eq!(ma, mb);
}

#[test]
fn zero_learning_rate_gives_constant_curve() {
    let mut m = model(InteractionMode::Gca, 9);
    let set = toy_set(&m);
    let cfg = TrainConfig {
        lr: 0.0,
        batch_size: 3,
        epochs: 4,
        ..Default::default()
    };
    let log = train(&mut m, &set, None, &cfg).unwrap();
    let first = log.epochs[0].train_mse;
    assert!(log.epochs.iter().all(|e| e.train_mse == first));
}

#[test]
fn exploding_loss_reports_numeric_error() {
    let mut m = model(InteractionMode::None, 10);
    let mut set = toy_set(&m);
    set[0].affinity = f64::MAX;
    let cfg = TrainConfig {
        epochs: 2,
        init_bias_to_mean: false,
        ..Default::default()
    };
    let err = train(&mut m, &set, None, &cfg).unwrap_err();
    assert!(matches!(err, GcaError::Numeric(_)));
    assert!(err.to_string().contains("learning rate"));
}

#[test]
fn unknown_tokens_give_finite_predictions() {
    for mode in [InteractionMode::Gca, InteractionMode::Decoder, InteractionMode::Ap] {
        let m = model(mode, 11);
        let (d, p) = m.tokenize_pair("XXXX", "ZZZZZZZZ").unwrap();
        assert!(m.predict(&d, &p).unwrap().is_finite());
    }
}

#[test]
fn wrong_length_input_is_dimension_error() {
    let m = model(InteractionMode::Gca, 12);
    let (d, p) = m.tokenize_pair("CC", "ACD").unwrap();
    let p = p.repadded(20);
    assert!(matches!(m.predict(&d, &p), Err(GcaError::Dimension(_))));
}

#[test]
fn extract_attention_rankings() {
    let mut m = model(InteractionMode::Gca, 13);
    perturb_output_projections(&mut m, 13);
    let (d, p) = m.tokenize_pair("CCO", "ACDKLMNP").unwrap();
    let ranking = m.extract_attention(&d, &p).unwrap();
    let fw = m.forward(&d, &p).unwrap();
    let gates = fw.protein_attention.unwrap();
    assert_eq!(ranking.protein.len(), 2);
    for (r, h) in ranking.protein.iter().zip(&gates.heads) {
        // brute force: sort indices by (weight desc, index asc)
        let w = h.post.data();
        let mut idx: Vec<usize> = (0..p.valid_len).collect();
        idx.sort_by(|&a, &b| w[b].partial_cmp(&w[a]).unwrap().then(a.cmp(&b)));
        assert_eq!(r.positions.iter().map(|x| x.0).collect::<Vec<_>>(), idx);
        let total: f64 = r.positions.iter().map(|x| x.1).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    let (d1, p1) = m.tokenize_pair("C", "A").unwrap();
    let single = m.extract_attention(&d1, &p1).unwrap();
    for h in single.drug.iter().chain(&single.protein) {
        assert_eq!(h.positions.len(), 1);
        assert!((h.positions[0].1 - 1.0).abs() < 1e-12);
    }

    let none = model(InteractionMode::None, 13);
    assert!(matches!(none.extract_attention(&d, &p), Err(GcaError::Capability(_))));
}

#[test]
fn uniform_weights_rank_in_position_order() {
    let r = rank_positions(&[0.25; 4], 4);
    assert_eq!(r.iter().map(|x| x.0).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
}

#[test]
fn canonical_text_round_trip() {
    let m = model(InteractionMode::Decoder, 14);
    let text = m.config().to_canonical_text();
    let back = ModelConfig::from_canonical_text(&text).unwrap();
    assert_eq!(&back, m.config());
    assert!(ModelConfig::from_canonical_text(&format!("{text}bogus=1\n")).is_err());
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let mut m = model(InteractionMode::Gca, 15);
    perturb_output_projections(&mut m, 15);
    let mut buf = Vec::new();
    write_checkpoint(&m, &mut buf).unwrap();
    assert_eq!(&buf[..4], CHECKPOINT_MAGIC);
    let back = read_checkpoint(buf.as_slice()).unwrap();
    assert_eq!(back, m);
    for ex in toy_set(&m) {
        let a = m.predict(&ex.drug, &ex.protein).unwrap();
        let b = back.predict(&ex.drug, &ex.protein).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let m = model(InteractionMode::Gca, 16);
    let mut buf = Vec::new();
    write_checkpoint(&m, &mut buf).unwrap();
    assert!(read_checkpoint(&buf[..buf.len() - 3]).is_err());
    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(read_checkpoint(bad.as_slice()).is_err());
    let mut long = buf;
    long.push(0);
    assert!(read_checkpoint(long.as_slice()).is_err());
}

#[test]
fn probe_check_passes_for_every_mode_and_encoder() {
    for kind in [EncoderKind::Embed, EncoderKind::Cnn] {
        for mode in [InteractionMode::Gca, InteractionMode::Decoder, InteractionMode::Ap, InteractionMode::None] {
            let mut s = spec(mode, 4);
            s.encoder.kind = kind;
            s.inner_normalizer = crate::autodiff::Normalizer::Sparsemax;
            let report = end_to_end_check(&s, 11, 1e-5, 1e-4).unwrap();
            assert!(report.passed, "{kind:?} {mode:?}: {report:?}");
        }
    }
}

mod properties {
    use proptest::prelude::*;

    use super::*;

    fn mode() -> impl Strategy<Value = InteractionMode> {
        prop_oneof![
            Just(InteractionMode::None),
            Just(InteractionMode::Gca),
            Just(InteractionMode::Decoder),
            Just(InteractionMode::Ap),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn checkpoints_round_trip_bit_exactly(mode in mode(), seed in 0u64..10_000) {
            let mut m = model(mode, seed);
            perturb_output_projections(&mut m, seed);
            let mut buf = Vec::new();
            write_checkpoint(&m, &mut buf).unwrap();
            let back = read_checkpoint(buf.as_slice()).unwrap();
            prop_assert_eq!(&back, &m);
            for ex in toy_set(&m) {
                let a = m.predict(&ex.drug, &ex.protein).unwrap();
                prop_assert_eq!(a.to_bits(), back.predict(&ex.drug, &ex.protein).unwrap().to_bits());
            }
        }
    }
}
