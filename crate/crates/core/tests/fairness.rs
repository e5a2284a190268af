mod common;

use fairprune::data::{ColumnSpec, Dataset, FeatureSchema, RawValue};
use fairprune::fairness::{
    estimate_discrim, generate_pool, similar_individual, PairStream, SensitiveBlind, SimilarPair,
    SimilarityConfig,
};
use fairprune::model::{train, Hyperparameters};
use fairprune::data::EncodingLayout;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Checks one pair against the similarity contract and returns the largest
/// numeric gap.
fn check_pair(layout: &EncodingLayout, p: &SimilarPair, lambda: f64) -> f64 {
    let s = layout.sensitive_block().unwrap().range();
    assert_eq!(p.a1[s.start] + p.a1[s.start + 1], 1.0);
    assert_eq!(p.a1[s.start], p.a2[s.start + 1]);
    assert_eq!(p.a1[s.start + 1], p.a2[s.start]);
    let mut gap: f64 = 0.0;
    for b in layout.non_sensitive_blocks() {
        let r = b.range();
        if b.is_numeric() {
            let (u, v) = (p.a1[b.offset], p.a2[b.offset]);
            assert!((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v));
            gap = gap.max((u - v).abs());
        } else {
            assert_eq!(&p.a1[r.clone()], &p.a2[r.clone()]);
            assert_eq!(p.a1[r].iter().sum::<f64>(), 1.0);
        }
    }
    assert!(gap <= lambda, "gap {gap} > {lambda}");
    gap
}

#[test]
fn large_pools_respect_similarity() {
    let d = common::loan();
    // 100k pairs per regime: 1000 rows' worth of seeds
    for (cfg, rows) in [
        (SimilarityConfig::exact(5), 1000),
        (SimilarityConfig::within(0.1, 5), 500),
    ] {
        let stream = PairStream::new(d.layout(), rows, &cfg, 0).unwrap();
        assert_eq!(stream.len(), 100_000);
        let mut count = 0;
        let mut widest: f64 = 0.0;
        for p in stream {
            widest = widest.max(check_pair(d.layout(), &p, cfg.lambda));
            count += 1;
        }
        assert_eq!(count, 100_000);
        if cfg.lambda > 0.0 {
            assert!(widest > 0.09, "perturbations never approach lambda: {widest}");
        } else {
            assert_eq!(widest, 0.0);
        }
    }
}

#[test]
fn pool_size_contract() {
    let d = common::loan();
    assert_eq!(generate_pool(&d, &SimilarityConfig::exact(0), 0).unwrap().len(), 700);
    assert_eq!(generate_pool(&d, &SimilarityConfig::within(0.1, 0), 0).unwrap().len(), 1400);
    let cfg = SimilarityConfig {
        pool_multiplier: 3,
        ..SimilarityConfig::exact(0)
    };
    assert_eq!(generate_pool(&d, &cfg, 0).unwrap().len(), 21);
}

#[test]
fn pools_are_reproducible_per_stream() {
    let d = common::loan();
    let cfg = SimilarityConfig::within(0.1, 9);
    assert_eq!(generate_pool(&d, &cfg, 3).unwrap(), generate_pool(&d, &cfg, 3).unwrap());
    assert_ne!(generate_pool(&d, &cfg, 3).unwrap(), generate_pool(&d, &cfg, 4).unwrap());
}

#[test]
fn salary_record_companion() {
    let schema = FeatureSchema::new(
        vec![
            ColumnSpec::categorical("sex"),
            ColumnSpec::categorical("rank"),
            ColumnSpec::numeric("age"),
            ColumnSpec::categorical("degree"),
            ColumnSpec::numeric("years"),
            ColumnSpec::categorical("salary"),
        ],
        "sex",
        "salary",
        "high",
    )
    .unwrap();
    let csv = "sex,rank,age,degree,years,salary\n\
               Male,Full,35,Doctorate,5,high\n\
               Female,Assistant,29,Masters,1,low\n\
               Male,Associate,52,Masters,25,high\n";
    let d = Dataset::from_reader(csv.as_bytes(), &schema).unwrap();
    let layout = d.layout();
    let seed = layout.encode_values(&["Male", "Full", "35", "Doctorate", "5"]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let companion = similar_individual(layout, &seed, 0.0, &mut rng).unwrap();
    let decoded = layout.decode(&companion).unwrap();
    assert_eq!(decoded[0], RawValue::Category("Female".into()));
    assert_eq!(decoded[1], RawValue::Category("Full".into()));
    assert_eq!(decoded[3], RawValue::Category("Doctorate".into()));
    for (i, expect) in [(2, 35.0), (4, 5.0)] {
        let RawValue::Number(v) = decoded[i] else {
            panic!("numeric column decoded as category")
        };
        assert!((v - expect).abs() < 1e-9);
    }
}

#[test]
fn sensitive_blind_model_never_discriminates_on_exact_pairs() {
    for (d, hp) in [
        (common::loan(), common::loan_config().hp),
        (
            common::noisy_table(20, 0.6, 2),
            Hyperparameters {
                batch_size: 4,
                epochs: 300,
                learning_rate: 0.1,
                ..Hyperparameters::default()
            },
        ),
    ] {
        let sr = train(&d.drop_sensitive().unwrap(), &hp).unwrap();
        let blind = SensitiveBlind::new(&sr, d.layout()).unwrap();
        for seed in 0..5 {
            for stream in 0..3 {
                let v = estimate_discrim(&blind, &d, &SimilarityConfig::exact(seed), stream).unwrap();
                assert_eq!(v, 0.0);
            }
        }
        let full = train(&d, &hp).unwrap();
        let v = estimate_discrim(&full, &d, &SimilarityConfig::within(0.1, 0), 0).unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
}
