//! Seeded generator for a credit-scoring table with injected label bias.
//!
//! Rows carry three numeric and five categorical features plus a binary
//! `sex` column drawn independently of everything else. A merit score built
//! from the non-sensitive features decides the true label; afterwards a
//! fraction of the positive `female` rows are relabelled negative.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{Dataset, RowId};
use super::schema::{ColumnSpec, FeatureSchema};
use crate::error::{Error, Result};

const CHECKING: [&str; 4] = ["none", "lt0", "0to200", "ge200"];
const HISTORY: [&str; 4] = ["critical", "delayed", "paid", "all_paid"];
const PURPOSE: [&str; 4] = ["car", "furniture", "education", "business"];
const SAVINGS: [&str; 3] = ["low", "medium", "high"];
const HOUSING: [&str; 3] = ["rent", "own", "free"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CreditConfig {
    pub rows: usize,
    /// Probability that a positive `female` row is flipped to negative.
    pub bias_rate: f64,
    /// Spread of the noise added to the merit score.
    pub noise: f64,
    pub seed: u64,
}

impl Default for CreditConfig {
    fn default() -> Self {
        Self {
            rows: 1000,
            bias_rate: 0.4,
            noise: 0.5,
            seed: 7,
        }
    }
}

pub fn credit_schema() -> FeatureSchema {
    FeatureSchema {
        columns: vec![
            ColumnSpec::categorical("checking"),
            ColumnSpec::numeric("duration"),
            ColumnSpec::categorical("history"),
            ColumnSpec::categorical("purpose"),
            ColumnSpec::numeric("amount"),
            ColumnSpec::categorical("savings"),
            ColumnSpec::categorical("housing"),
            ColumnSpec::numeric("age"),
            ColumnSpec::categorical("sex"),
            ColumnSpec::categorical("credit"),
        ],
        sensitive: "sex".into(),
        label: "credit".into(),
        positive_label: "good".into(),
        negative_label: Some("bad".into()),
    }
}

/// One generated row: raw values in schema order and whether its label was
/// flipped by the bias step.
#[derive(Debug, Clone, PartialEq)]
pub struct CreditRow {
    pub values: Vec<String>,
    pub biased: bool,
}

pub fn credit_rows(cfg: &CreditConfig) -> Result<Vec<CreditRow>> {
    if cfg.rows == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(0.0..=1.0).contains(&cfg.bias_rate) || !(cfg.noise >= 0.0) {
        return Err(Error::InvalidConfig(
            "bias_rate must lie in [0, 1] and noise must be non-negative".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(cfg.rows);
    for _ in 0..cfg.rows {
        let checking = rng.gen_range(0..CHECKING.len());
        let history = rng.gen_range(0..HISTORY.len());
        let purpose = rng.gen_range(0..PURPOSE.len());
        let savings = rng.gen_range(0..SAVINGS.len());
        let housing = rng.gen_range(0..HOUSING.len());
        let duration: u32 = rng.gen_range(4..=72);
        let amount: u32 = rng.gen_range(250..=15000);
        let age: u32 = rng.gen_range(19..=75);
        let female = rng.gen_bool(0.5);

        let merit = [0.0, -0.8, 0.3, 0.9][checking]
            + [0.6, -0.6, 0.2, 0.4][history]
            + [0.0, 0.1, -0.2, 0.2][purpose]
            + [-0.3, 0.2, 0.6][savings]
            + [-0.2, 0.3, 0.0][housing]
            - 1.2 * (duration as f64 - 4.0) / 68.0
            - 0.6 * (amount as f64 - 250.0) / 14750.0
            + 0.8 * (age as f64 - 19.0) / 56.0
            + cfg.noise * (rng.gen::<f64>() - 0.5);
        let good = merit > -0.1;
        let biased = female && good && rng.gen_bool(cfg.bias_rate);

        let values = vec![
            CHECKING[checking].to_string(),
            duration.to_string(),
            HISTORY[history].to_string(),
            PURPOSE[purpose].to_string(),
            amount.to_string(),
            SAVINGS[savings].to_string(),
            HOUSING[housing].to_string(),
            age.to_string(),
            if female { "female" } else { "male" }.to_string(),
            if good && !biased { "good" } else { "bad" }.to_string(),
        ];
        rows.push(CreditRow { values, biased });
    }
    Ok(rows)
}

/// The generated table as a [`Dataset`] with row ids `1..=rows`.
pub fn credit_dataset(cfg: &CreditConfig) -> Result<Dataset> {
    let records = credit_rows(cfg)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| (RowId(i as u64 + 1), r.values))
        .collect();
    Dataset::from_records(&credit_schema(), records)
}
