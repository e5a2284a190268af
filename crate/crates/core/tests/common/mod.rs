#![allow(dead_code)]

use std::collections::HashSet;
use std::path::PathBuf;

use fairprune::data::{ColumnSpec, Dataset, Example, FeatureSchema, RowId};
use fairprune::fairness::{build_influence_set, discriminatory_pairs, generate_pool, SimilarityConfig};
use fairprune::model::{train, train_from, Hyperparameters, Mlp};
use fairprune::{DebiasConfig, InfluenceSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

pub fn loan_schema() -> FeatureSchema {
    FeatureSchema::from_path(fixture("loan.schema.json")).unwrap()
}

/// The seven-row loan table.
pub fn loan() -> Dataset {
    Dataset::load(fixture("loan.csv"), &loan_schema()).unwrap()
}

pub const LOAN_SEED: u64 = 63;

/// Pinned settings for the loan table: defaults with full-batch training.
pub fn loan_config() -> DebiasConfig {
    DebiasConfig {
        hp: Hyperparameters {
            batch_size: 7,
            weight_init_seed: LOAN_SEED,
            ..Hyperparameters::default()
        },
        similarity: SimilarityConfig::exact(LOAN_SEED),
        ..DebiasConfig::default()
    }
}

/// `rows` points with two numeric features and a binary race column; the
/// label thresholds a noisy score, so the classes overlap.
pub fn noisy_table(rows: usize, noise: f64, seed: u64) -> Dataset {
    let schema = FeatureSchema::new(
        vec![
            ColumnSpec::numeric("income"),
            ColumnSpec::numeric("wealth"),
            ColumnSpec::categorical("race"),
            ColumnSpec::categorical("y"),
        ],
        "race",
        "y",
        "1",
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..rows)
        .map(|i| {
            let income: f64 = rng.gen();
            let wealth: f64 = rng.gen();
            let white = i % 2 == 0;
            let z = income + 0.3 * f64::from(u8::from(white)) + noise * (rng.gen::<f64>() - 0.5);
            (
                RowId(i as u64 + 1),
                vec![
                    format!("{income:.3}"),
                    format!("{wealth:.3}"),
                    if white { "W" } else { "B" }.to_string(),
                    if z > 0.65 { "1" } else { "0" }.to_string(),
                ],
            )
        })
        .collect();
    Dataset::from_records(&schema, records).unwrap()
}

/// Average ranks, ties sharing the mean rank.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            r[k] = (i + j) as f64 / 2.0;
        }
        i = j + 1;
    }
    r
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&ranks(a), &ranks(b))
}

/// Model plus influence set for the leave-one-out checks: full-batch
/// training long enough to sit near a stationary point.
pub fn loo_setup(d: &Dataset, seed: u64) -> (Mlp, InfluenceSet, Hyperparameters) {
    let hp = Hyperparameters {
        batch_size: d.len(),
        epochs: 5000,
        learning_rate: 0.1,
        weight_init_seed: seed,
        ..Hyperparameters::default()
    };
    let m = train(d, &hp).unwrap();
    let pool = generate_pool(d, &SimilarityConfig::exact(seed), 0).unwrap();
    let dp = discriminatory_pairs(&m, &pool).unwrap();
    let iset = build_influence_set(&m, &dp).unwrap();
    (m, iset, hp)
}

/// Brute force: for every row z, `L_iset(theta_D) - L_iset(theta_{D - z})`,
/// both obtained by continuing full-batch training from `m` for the same
/// number of epochs. Positive means keeping z lowers the influence-set loss.
pub fn loo_deltas(d: &Dataset, m: &Mlp, iset: &InfluenceSet, hp: &Hyperparameters) -> Vec<(RowId, f64)> {
    let keep = train_from(m, d, hp).unwrap();
    let base = iset.mean_loss(&keep).unwrap();
    d.row_ids()
        .iter()
        .map(|&id| {
            let sub = d.without_ids(&HashSet::from([id]));
            let hp_sub = Hyperparameters {
                batch_size: sub.len(),
                ..*hp
            };
            let m_sub = train_from(m, &sub, &hp_sub).unwrap();
            (id, base - iset.mean_loss(&m_sub).unwrap())
        })
        .collect()
}

/// Random small network with parameters scaled up so the tanh units leave
/// their linear regime.
pub fn random_model(seed: u64) -> (Mlp, Vec<Vec<f64>>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(2..6);
    let h1 = rng.gen_range(2..7);
    let h2 = rng.gen_range(2..5);
    let mut m = Mlp::new(d, h1, h2, seed);
    for p in m.params_mut() {
        *p *= 2.0;
    }
    let xs = (0..5).map(|_| (0..d).map(|_| rng.gen()).collect()).collect();
    let ys = (0..5).map(|_| rng.gen_range(0..2)).collect();
    (m, xs, ys)
}

pub fn examples<'a>(xs: &'a [Vec<f64>], ys: &'a [u8]) -> impl Iterator<Item = Example<'a>> + Clone {
    xs.iter().zip(ys).map(|(x, &y)| Example { x, y })
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    max_abs(&diff) / max_abs(a).max(max_abs(b)).max(1e-12)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn shifted(m: &Mlp, v: &[f64], h: f64) -> Mlp {
    let mut out = m.clone();
    for (p, vi) in out.params_mut().iter_mut().zip(v) {
        *p += h * vi;
    }
    out
}

