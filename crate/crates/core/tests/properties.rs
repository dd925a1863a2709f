//! Property tests over randomly drawn parameters and corpora.

#![allow(clippy::needless_range_loop)]

mod common;

use proptest::prelude::*;

use tpp::data::{validate_database, Database, EventSequence};
use tpp::kernels::KernelBank;
use tpp::manifest::{from_manifest, to_manifest, Provenance};
use tpp::model::{
    Activation, DataDims, ExoKind, ExoSpec, HistoryView, ImpactKind, ImpactSpec, KernelSpec,
    ModelConfig, SeqCtx,
};
use tpp::preprocess::{aggregating, stitching, superposing, SimilarityConfig};

fn arb_kernel() -> impl Strategy<Value = KernelBank> {
    prop_oneof![
        (0.3..2.5f64, 0.0..1.0f64).prop_map(|(w, d)| KernelBank::exponential(w, d).unwrap()),
        (0.3..2.5f64).prop_map(|w| KernelBank::rayleigh(w).unwrap()),
        (0.3..2.5f64).prop_map(|s| KernelBank::gaussian(s).unwrap()),
        (1.2..3.5f64, 0.2..1.5f64).prop_map(|(w, d)| KernelBank::powerlaw(w, d).unwrap()),
        (0.0..1.5f64, 0.2..2.0f64).prop_map(|(w, d)| KernelBank::gate(w, d).unwrap()),
        (0.0..0.5f64, 0.3..1.5f64, 0.3..1.5f64, 0.2..1.0f64, 0.2..1.0f64).prop_map(
            |(c0, gap1, gap2, s1, s2)| {
                KernelBank::multi_gauss(vec![c0, c0 + gap1, c0 + gap1 + gap2], vec![s1, s2, 0.5])
                    .unwrap()
            }
        ),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// K(t) matches adaptive quadrature of κ within 1e−8 absolute.
    #[test]
    fn kernel_integral_matches_quadrature(bank in arb_kernel(), t in 0.0..8.0f64) {
        let breakpoints: Vec<f64> = match bank.kind() {
            tpp::kernels::KernelKind::Exponential | tpp::kernels::KernelKind::Powerlaw => {
                vec![bank.p1()[0]]
            }
            tpp::kernels::KernelKind::Gate => vec![bank.p0()[0], bank.p0()[0] + bank.p1()[0]],
            _ => vec![],
        };
        let closed = bank.integral(t).unwrap();
        for m in 0..bank.basis() {
            let quad = common::integrate_adaptive(
                &|s: f64| bank.value(s).unwrap()[m],
                0.0,
                t,
                &breakpoints,
                1e-11,
            );
            prop_assert!((closed[m] - quad).abs() < 1e-8,
                "{:?} basis {m}: {} vs {quad}", bank.kind(), closed[m]);
        }
    }

    /// The horizon bound dominates κ everywhere inside the horizon.
    #[test]
    fn kernel_bound_dominates(bank in arb_kernel(), t0 in 0.0..5.0f64, width in 0.01..4.0f64, frac in 0.0..1.0f64) {
        let t1 = t0 + width;
        let bound = bank.upper_bound(t0, t1).unwrap();
        let t = t0 + frac * width;
        let v = bank.value(t).unwrap();
        for m in 0..bank.basis() {
            prop_assert!(v[m] <= bound[m] + 1e-12);
        }
    }

    /// Compensator increments are additive over interval splits.
    #[test]
    fn counts_additive_over_splits(
        mu in 0.05..1.0f64,
        alpha in 0.0..0.8f64,
        bank_seed in 0.3..2.0f64,
        t_hist in 0.0..1.0f64,
        a in 0.0..2.0f64,
        len1 in 0.05..2.0f64,
        len2 in 0.05..2.0f64,
    ) {
        let cfg = ModelConfig {
            memory_size: 4,
            exogenous: ExoSpec { kind: ExoKind::Constant, activation: Activation::Identity },
            impact: ImpactSpec { kind: ImpactKind::Basic, activation: Activation::Identity },
            kernel: KernelSpec::Rayleigh { omega: bank_seed },
            kernel_trainable: (false, false),
            outer: Activation::Identity,
            embed_dim: 2,
            hidden_dim: 2,
            quadrature: 16,
            init_seed: 0,
        };
        let mut model = cfg.build(&DataDims::bare(1)).unwrap();
        model.group_data_mut(tpp::model::GroupKey::ExoMu)[0] = mu;
        model.group_data_mut(tpp::model::GroupKey::ImpactAlpha)[0] = alpha;
        let types = [0usize];
        let times = [t_hist];
        let hist = HistoryView { types: &types, times: &times };
        let ctx = SeqCtx { seq_index: 0, feature: None };
        let t0 = t_hist + a;
        let t1 = t0 + len1;
        let t2 = t1 + len2;
        let mut left = [0.0];
        let mut right = [0.0];
        let mut whole = [0.0];
        model.expected_counts_between(hist, ctx, t0, t1, &mut left).unwrap();
        model.expected_counts_between(hist, ctx, t1, t2, &mut right).unwrap();
        model.expected_counts_between(hist, ctx, t0, t2, &mut whole).unwrap();
        prop_assert!((left[0] + right[0] - whole[0]).abs() < 1e-10);
    }
}

fn arb_sequence(max_n: usize, c: usize) -> impl Strategy<Value = EventSequence> {
    (
        proptest::collection::vec((0.0..20.0f64, 0..c), 0..max_n),
        0.0..2.0f64,
        0.1..5.0f64,
    )
        .prop_map(|(pairs, start_pad, stop_pad)| {
            let mut times: Vec<f64> = pairs.iter().map(|(t, _)| start_pad + t).collect();
            times.sort_by(f64::total_cmp);
            let events: Vec<usize> = pairs.iter().map(|(_, e)| *e).collect();
            let t_start = start_pad;
            let t_stop = times.last().copied().unwrap_or(t_start) + stop_pad;
            EventSequence {
                times,
                events,
                seq_feature: Some(vec![start_pad, stop_pad]),
                t_start,
                t_stop,
                label: None,
            }
        })
}

fn arb_db(c: usize, n_seqs: std::ops::Range<usize>) -> impl Strategy<Value = Database> {
    proptest::collection::vec(arb_sequence(12, c), n_seqs).prop_map(move |seqs| {
        let names: Vec<String> = (0..c).map(|i| format!("t{i}")).collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let mut db = Database::with_types(&refs);
        for (i, s) in seqs.into_iter().enumerate() {
            db.push_sequence(&format!("s{i}"), s);
        }
        db
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Stitching and superposing outputs are valid corpora with the
    /// expected event counts, and inputs are never modified.
    #[test]
    fn stitch_superpose_outputs_valid(
        db1 in arb_db(3, 1..5),
        db2 in arb_db(3, 1..5),
        seed in 0u64..1000,
        feature_mode in proptest::bool::ANY,
    ) {
        let db1_before = db1.clone();
        let db2_before = db2.clone();
        let cfg = if feature_mode {
            SimilarityConfig::feature(seed)
        } else {
            SimilarityConfig::random(seed)
        };

        let stitched = stitching(&db1, &db2, &cfg).unwrap();
        prop_assert!(validate_database(&stitched).is_empty(), "{:?}", validate_database(&stitched));
        let merged = superposing(&db1, &db2, &cfg).unwrap();
        prop_assert!(validate_database(&merged).is_empty(), "{:?}", validate_database(&merged));

        for (i, seq) in merged.sequences.iter().enumerate() {
            // superposed count is the sum of the leader's and some partner's
            let leader = db1.sequences[i].len();
            let partner_counts: Vec<usize> = db2.sequences.iter().map(|b| b.len()).collect();
            prop_assert!(partner_counts.iter().any(|&p| leader + p == seq.len()));
        }
        for (i, seq) in stitched.sequences.iter().enumerate() {
            prop_assert!(seq.len() >= db1.sequences[i].len());
            prop_assert_eq!(seq.t_start, db1.sequences[i].t_start);
        }
        // purity
        prop_assert_eq!(db1.sequences, db1_before.sequences);
        prop_assert_eq!(db2.sequences, db2_before.sequences);
    }

    /// Bin counts in an aggregation always total the event count.
    #[test]
    fn aggregation_conserves_events(db in arb_db(2, 1..4), width in 0.1..5.0f64) {
        let mats = aggregating(&db, width).unwrap();
        for (seq, m) in db.sequences.iter().zip(&mats) {
            let total: u64 = m.counts.iter().sum();
            prop_assert_eq!(total as usize, seq.len());
        }
    }
}

fn arb_model_config() -> impl Strategy<Value = ModelConfig> {
    let exo = prop_oneof![
        Just(ExoKind::Constant),
        Just(ExoKind::Naive),
        Just(ExoKind::Linear),
        Just(ExoKind::Neural),
    ];
    let impact = prop_oneof![
        Just(ImpactKind::Basic),
        Just(ImpactKind::Naive),
        Just(ImpactKind::Factorized { dim: 2 }),
        Just(ImpactKind::Linear),
        Just(ImpactKind::Bilinear),
    ];
    let kernel = prop_oneof![
        Just(KernelSpec::Exponential { omega: 1.0, delta: 0.1 }),
        Just(KernelSpec::Gaussian { sigma: 0.7 }),
        Just(KernelSpec::MultiGauss { centers: vec![0.0, 1.0], widths: vec![0.4, 0.4] }),
    ];
    let act = prop_oneof![
        Just(Activation::Identity),
        Just(Activation::Relu),
        Just(Activation::Softplus { beta: 1.0 }),
    ];
    (exo, impact, kernel, act, 0u64..50).prop_map(|(e, i, k, a, seed)| ModelConfig {
        memory_size: 8,
        exogenous: ExoSpec { kind: e, activation: a },
        impact: ImpactSpec { kind: i, activation: a },
        kernel: k,
        kernel_trainable: (true, false),
        outer: a,
        embed_dim: 3,
        hidden_dim: 3,
        quadrature: 16,
        init_seed: seed,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Manifest round trip reproduces every parameter bit for bit for any
    /// composition.
    #[test]
    fn manifest_round_trip_any_composition(cfg in arb_model_config()) {
        let model = cfg.build(&DataDims::bare(2)).unwrap();
        let names = vec!["x".to_string(), "y".to_string()];
        let manifest = to_manifest(&model, &names, Provenance::default()).unwrap();
        let loaded = from_manifest(&manifest).unwrap();
        for key in model.group_keys() {
            prop_assert_eq!(model.group_data(key), loaded.group_data(key));
            prop_assert_eq!(model.group_trainable(key), loaded.group_trainable(key));
            prop_assert_eq!(model.group_shape(key), loaded.group_shape(key));
        }
    }
}
