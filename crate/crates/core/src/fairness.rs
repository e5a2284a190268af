//! Similar-pair pools, the unfair-treatment heuristic and fairness metrics.
//!
//! A similar pair is two encoded individuals with opposite sensitive values,
//! identical non-sensitive categorical values and numeric values at most
//! `lambda` apart (in normalized units). Individual discrimination is the
//! fraction of a freshly generated pool whose members get different labels.

use std::io::Write;
use std::ops::Range;

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Encoding, EncodingLayout};
use crate::error::{check_dim, Error, Result};
use crate::influence::InfluenceSet;
use crate::model::{Classifier, Prediction};

/// Pool evaluation works on chunks of this many pairs at a time.
const EVAL_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityConfig {
    /// Largest allowed gap per normalized numeric feature.
    pub lambda: f64,
    /// Seed individuals generated per dataset row.
    pub pool_multiplier: usize,
    /// Similar individuals generated per seed individual.
    pub companions_per_seed: usize,
    pub rng_seed: u64,
}

impl SimilarityConfig {
    /// Pairs identical in every non-sensitive feature, one per seed.
    pub fn exact(rng_seed: u64) -> Self {
        Self {
            lambda: 0.0,
            pool_multiplier: 100,
            companions_per_seed: 1,
            rng_seed,
        }
    }

    /// Numeric features within `lambda`, two companions per seed.
    pub fn within(lambda: f64, rng_seed: u64) -> Self {
        Self {
            lambda,
            pool_multiplier: 100,
            companions_per_seed: 2,
            rng_seed,
        }
    }

    /// `exact` for `lambda == 0`, `within` otherwise.
    pub fn for_lambda(lambda: f64, rng_seed: u64) -> Self {
        if lambda == 0.0 {
            Self::exact(rng_seed)
        } else {
            Self::within(lambda, rng_seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(Error::InvalidConfig(format!(
                "lambda must lie in [0, 1), got {}",
                self.lambda
            )));
        }
        if self.pool_multiplier == 0 || self.companions_per_seed == 0 {
            return Err(Error::InvalidConfig(
                "pool_multiplier and companions_per_seed must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn pool_size(&self, rows: usize) -> usize {
        self.pool_multiplier * rows * self.companions_per_seed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarPair {
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
}

fn sensitive_range(layout: &EncodingLayout) -> Result<Range<usize>> {
    let block = layout.sensitive_block().ok_or(Error::SensitiveAbsent)?;
    if block.width() != 2 {
        return Err(Error::SchemaMismatch(
            "sensitive attribute must be binary".into(),
        ));
    }
    Ok(block.range())
}

/// Draws an individual uniformly from the feature space: numeric features
/// from `[0, 1]`, categorical features from their observed categories.
pub fn sample_individual<R: Rng>(layout: &EncodingLayout, rng: &mut R) -> Vec<f64> {
    let mut x = vec![0.0; layout.width()];
    for block in layout.blocks() {
        match &block.encoding {
            Encoding::Numeric { .. } => x[block.offset] = rng.gen::<f64>(),
            Encoding::Categorical { categories } => {
                x[block.offset + rng.gen_range(0..categories.len())] = 1.0;
            }
        }
    }
    x
}

/// A companion for `seed`: sensitive value flipped, categorical features
/// kept, each numeric feature drawn uniformly from
/// `[v - lambda, v + lambda] ∩ [0, 1]`.
pub fn similar_individual<R: Rng>(
    layout: &EncodingLayout,
    seed: &[f64],
    lambda: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_dim(layout.width(), seed.len())?;
    let sens = sensitive_range(layout)?;
    let mut x = seed.to_vec();
    x.swap(sens.start, sens.start + 1);
    if lambda > 0.0 {
        for block in layout.non_sensitive_blocks() {
            if block.is_numeric() {
                let v = seed[block.offset];
                let lo = (v - lambda).max(0.0);
                let hi = (v + lambda).min(1.0);
                x[block.offset] = Uniform::new_inclusive(lo, hi).sample(rng);
            }
        }
    }
    Ok(x)
}

/// Lazily generated pool: `pool_multiplier * rows` seeds, each followed by
/// `companions_per_seed` pairs.
pub struct PairStream<'a> {
    layout: &'a EncodingLayout,
    cfg: SimilarityConfig,
    rng: ChaCha8Rng,
    seeds_left: usize,
    current: Vec<f64>,
    companions_left: usize,
}

impl<'a> PairStream<'a> {
    pub fn new(layout: &'a EncodingLayout, rows: usize, cfg: &SimilarityConfig, stream: u64) -> Result<Self> {
        cfg.validate()?;
        sensitive_range(layout)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        rng.set_stream(stream);
        Ok(Self {
            layout,
            cfg: *cfg,
            rng,
            seeds_left: cfg.pool_multiplier * rows,
            current: Vec::new(),
            companions_left: 0,
        })
    }
}

impl Iterator for PairStream<'_> {
    type Item = SimilarPair;

    fn next(&mut self) -> Option<SimilarPair> {
        if self.companions_left == 0 {
            if self.seeds_left == 0 {
                return None;
            }
            self.seeds_left -= 1;
            self.current = sample_individual(self.layout, &mut self.rng);
            self.companions_left = self.cfg.companions_per_seed;
        }
        self.companions_left -= 1;
        let a2 = similar_individual(self.layout, &self.current, self.cfg.lambda, &mut self.rng)
            .expect("layout validated when the stream was built");
        Some(SimilarPair {
            a1: self.current.clone(),
            a2,
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.seeds_left * self.cfg.companions_per_seed + self.companions_left;
        (n, Some(n))
    }
}

impl ExactSizeIterator for PairStream<'_> {}

/// Pool for `d` on RNG stream `stream` of `cfg.rng_seed`.
pub fn generate_pool(d: &Dataset, cfg: &SimilarityConfig, stream: u64) -> Result<Vec<SimilarPair>> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(PairStream::new(d.layout(), d.len(), cfg, stream)?.collect())
}

/// Pool on the default stream (0).
pub fn generate_similar_pairs(d: &Dataset, cfg: &SimilarityConfig) -> Result<Vec<SimilarPair>> {
    generate_pool(d, cfg, 0)
}

fn is_discriminatory(m: &impl Classifier, pair: &SimilarPair) -> Result<bool> {
    Ok(m.predict(&pair.a1)?.label != m.predict(&pair.a2)?.label)
}

/// Pairs whose members receive different labels.
pub fn discriminatory_pairs<'p>(
    m: &impl Classifier,
    pool: &'p [SimilarPair],
) -> Result<Vec<&'p SimilarPair>> {
    let flags: Vec<bool> = pool
        .par_iter()
        .map(|p| is_discriminatory(m, p))
        .collect::<Result<_>>()?;
    Ok(pool
        .iter()
        .zip(flags)
        .filter_map(|(p, f)| f.then_some(p))
        .collect())
}

/// For each pair, the member with the lower classification confidence is
/// taken as unfairly treated and stored with its predicted label. The first
/// member is chosen only when its confidence is strictly lower.
pub fn build_influence_set(m: &impl Classifier, dp: &[&SimilarPair]) -> Result<InfluenceSet> {
    let mut set = InfluenceSet::default();
    for pair in dp {
        let p1 = m.predict(&pair.a1)?;
        let p2 = m.predict(&pair.a2)?;
        if p1.confidence < p2.confidence {
            set.push(pair.a1.clone(), p1.label);
        } else {
            set.push(pair.a2.clone(), p2.label);
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscrimEstimate {
    pub pool_size: usize,
    pub dp_count: usize,
}

impl DiscrimEstimate {
    pub fn fraction(&self) -> f64 {
        if self.pool_size == 0 {
            0.0
        } else {
            self.dp_count as f64 / self.pool_size as f64
        }
    }
}

/// Counts discriminatory pairs in the pool on stream `stream`, without
/// materializing the pool.
pub fn count_discrimination(
    m: &impl Classifier,
    d: &Dataset,
    cfg: &SimilarityConfig,
    stream: u64,
) -> Result<DiscrimEstimate> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_dim(d.width(), m.input_dim())?;
    let mut pairs = PairStream::new(d.layout(), d.len(), cfg, stream)?;
    let mut est = DiscrimEstimate {
        pool_size: 0,
        dp_count: 0,
    };
    let mut buf = Vec::with_capacity(EVAL_CHUNK);
    loop {
        buf.clear();
        buf.extend(pairs.by_ref().take(EVAL_CHUNK));
        if buf.is_empty() {
            break;
        }
        est.pool_size += buf.len();
        est.dp_count += buf
            .par_iter()
            .map(|p| is_discriminatory(m, p).map(usize::from))
            .sum::<Result<usize>>()?;
    }
    Ok(est)
}

/// `|DP| / |pool|` on the pool drawn from stream `stream`.
pub fn estimate_discrim(
    m: &impl Classifier,
    d: &Dataset,
    cfg: &SimilarityConfig,
    stream: u64,
) -> Result<f64> {
    count_discrimination(m, d, cfg, stream).map(|e| e.fraction())
}

/// Hands out a fresh RNG stream on every call (1, 2, ...), or always stream
/// 0 when the pool is frozen.
#[derive(Debug, Clone)]
pub struct DiscrimEstimator {
    pub cfg: SimilarityConfig,
    pub freeze_pool: bool,
    calls: u64,
}

impl DiscrimEstimator {
    pub fn new(cfg: SimilarityConfig, freeze_pool: bool) -> Self {
        Self {
            cfg,
            freeze_pool,
            calls: 0,
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    pub fn next_stream(&mut self) -> u64 {
        self.calls += 1;
        if self.freeze_pool {
            0
        } else {
            self.calls
        }
    }

    pub fn estimate(&mut self, m: &impl Classifier, d: &Dataset) -> Result<DiscrimEstimate> {
        let stream = self.next_stream();
        count_discrimination(m, d, &self.cfg, stream)
    }
}

/// `|P(yhat = 1 | group 0) - P(yhat = 1 | group 1)|`.
pub fn parity_gap(predictions: &[u8], groups: &[u8], group_names: &[String; 2]) -> Result<f64> {
    check_dim(groups.len(), predictions.len())?;
    let mut pos = [0usize; 2];
    let mut tot = [0usize; 2];
    for (&p, &g) in predictions.iter().zip(groups) {
        tot[g as usize] += 1;
        pos[g as usize] += p as usize;
    }
    for g in 0..2 {
        if tot[g] == 0 {
            return Err(Error::MissingGroup(group_names[g].clone()));
        }
    }
    Ok((pos[0] as f64 / tot[0] as f64 - pos[1] as f64 / tot[1] as f64).abs())
}

fn predict_all(m: &impl Classifier, d: &Dataset) -> Result<Vec<Prediction>> {
    (0..d.len())
        .into_par_iter()
        .map(|i| m.predict(d.row(i)))
        .collect()
}

pub fn statistical_parity_difference(m: &impl Classifier, d: &Dataset) -> Result<f64> {
    let labels: Vec<u8> = predict_all(m, d)?.iter().map(|p| p.label).collect();
    parity_gap(&labels, d.groups(), d.sensitive_values())
}

pub fn accuracy(m: &impl Classifier, d: &Dataset) -> Result<f64> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let correct = predict_all(m, d)?
        .iter()
        .zip(d.labels())
        .filter(|(p, y)| p.label == **y)
        .count();
    Ok(correct as f64 / d.len() as f64)
}

pub fn error_rate(m: &impl Classifier, d: &Dataset) -> Result<f64> {
    accuracy(m, d).map(|a| 1.0 - a)
}

/// A classifier trained without the sensitive columns, evaluated on rows that
/// still carry them: the sensitive one-hot block is stripped before
/// prediction.
#[derive(Debug, Clone)]
pub struct SensitiveBlind<C> {
    inner: C,
    width: usize,
    removed: Range<usize>,
}

impl<C: Classifier> SensitiveBlind<C> {
    pub fn new(inner: C, full_layout: &EncodingLayout) -> Result<Self> {
        let removed = sensitive_range(full_layout)?;
        let width = full_layout.width();
        check_dim(width - removed.len(), inner.input_dim())?;
        Ok(Self {
            inner,
            width,
            removed,
        })
    }

    pub fn inner(&self) -> &C {
        &self.inner
    }
}

impl<C: Classifier> Classifier for SensitiveBlind<C> {
    fn input_dim(&self) -> usize {
        self.width
    }

    fn predict_proba(&self, x: &[f64]) -> Result<[f64; 2]> {
        check_dim(self.width, x.len())?;
        let mut reduced = Vec::with_capacity(self.inner.input_dim());
        reduced.extend_from_slice(&x[..self.removed.start]);
        reduced.extend_from_slice(&x[self.removed.end..]);
        self.inner.predict_proba(&reduced)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub individual_discrimination: f64,
    pub accuracy: f64,
    pub statistical_parity_difference: Option<f64>,
    pub pool_size: usize,
    pub dp_count: usize,
}

/// Discrimination on the pool from `stream` plus accuracy and parity on `eval`.
/// Parity is `None` when `eval` lacks one of the sensitive groups.
pub fn metrics_report(
    m: &impl Classifier,
    pool_source: &Dataset,
    eval: &Dataset,
    cfg: &SimilarityConfig,
    stream: u64,
) -> Result<MetricsReport> {
    let est = count_discrimination(m, pool_source, cfg, stream)?;
    let spd = match statistical_parity_difference(m, eval) {
        Ok(v) => Some(v),
        Err(Error::MissingGroup(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricsReport {
        individual_discrimination: est.fraction(),
        accuracy: accuracy(m, eval)?,
        statistical_parity_difference: spd,
        pool_size: est.pool_size,
        dp_count: est.dp_count,
    })
}

/// Audit dump: one line per pool member with its decoded raw values.
pub fn write_pool_csv<W: Write>(
    layout: &EncodingLayout,
    pool: &[SimilarPair],
    writer: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["pair".to_string(), "member".to_string()];
    header.extend(layout.blocks().iter().map(|b| b.name.clone()));
    wtr.write_record(&header)?;
    for (i, pair) in pool.iter().enumerate() {
        for (member, x) in [(1, &pair.a1), (2, &pair.a2)] {
            let mut rec = vec![i.to_string(), member.to_string()];
            rec.extend(layout.decode(x)?.iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
    }
    wtr.flush()?;
    Ok(())
}
