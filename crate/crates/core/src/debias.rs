//! Greedy removal of the training rows ranked most biased.
//!
//! The full-data model is used once to rank the rows. The loop then drops
//! growing prefixes of that ranking, one chunk at a time, retrains, and stops
//! at the first chunk whose discrimination fails to improve on the best so
//! far, returning the prefix removed just before it.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, RowId};
use crate::error::{Error, Result};
use crate::fairness::{
    build_influence_set, discriminatory_pairs, generate_pool, DiscrimEstimator, SimilarityConfig,
};
use crate::influence::{rank_by_influence, InfluenceRanking, SolverConfig};
use crate::model::{Hyperparameters, Mlp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DebiasConfig {
    /// Percent of the original rows removed per chunk.
    pub chunk_percent: f64,
    pub max_chunks: usize,
    pub similarity: SimilarityConfig,
    pub hp: Hyperparameters,
    pub solver: SolverConfig,
    /// Reuse one pool (stream 0) for ranking and for every measurement.
    pub freeze_pool: bool,
}

impl Default for DebiasConfig {
    fn default() -> Self {
        Self {
            chunk_percent: 1.0,
            max_chunks: 100,
            similarity: SimilarityConfig::exact(0),
            hp: Hyperparameters::default(),
            solver: SolverConfig::default(),
            freeze_pool: false,
        }
    }
}

impl DebiasConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.chunk_percent > 0.0 && self.chunk_percent <= 100.0) {
            return Err(Error::InvalidConfig(format!(
                "chunk_percent must lie in (0, 100], got {}",
                self.chunk_percent
            )));
        }
        if self.max_chunks as f64 * self.chunk_percent > 100.0 + 1e-9 {
            return Err(Error::InvalidConfig(
                "max_chunks * chunk_percent exceeds 100".into(),
            ));
        }
        self.similarity.validate()?;
        self.hp.validate()?;
        self.solver.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub chunk_index: usize,
    pub rows_removed: usize,
    pub fraction_removed: f64,
    pub discrimination: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebiasReport {
    pub trace: Vec<TraceStep>,
    /// Number of chunks removed from the returned dataset.
    pub stop_index: usize,
    /// Removed rows in ranking order.
    pub removed_row_ids: Vec<RowId>,
    pub sorted_order: Option<InfluenceRanking>,
    pub loop_exhausted: bool,
    pub already_fair: bool,
}

impl DebiasReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn removed_fraction(&self, original_rows: usize) -> f64 {
        if original_rows == 0 {
            0.0
        } else {
            self.removed_row_ids.len() as f64 / original_rows as f64
        }
    }
}

/// Rows removed after `chunks` chunks: each chunk is
/// `ceil(chunk_percent / 100 * rows)` rows, capped at `rows`.
pub fn rows_to_drop(rows: usize, chunks: usize, chunk_percent: f64) -> usize {
    let per_chunk = (chunk_percent * rows as f64 / 100.0 - 1e-9).ceil().max(0.0) as usize;
    (chunks * per_chunk).min(rows)
}

/// Ranks the rows of `d` by their influence on the unfairly treated members
/// of `m`'s discriminatory pairs (pool on stream 0).
pub fn sort_dataset(d: &Dataset, m: &Mlp, cfg: &DebiasConfig) -> Result<InfluenceRanking> {
    let pool = generate_pool(d, &cfg.similarity, 0)?;
    let dp = discriminatory_pairs(m, &pool)?;
    let iset = build_influence_set(m, &dp)?;
    match rank_by_influence(&iset, d, m, &cfg.solver) {
        Err(Error::EmptyInfluenceSet) => Err(Error::AlreadyFair),
        other => other,
    }
}

/// `d` without the rows in the first `i` chunks of `ranking`.
pub fn drop_first(
    ranking: &InfluenceRanking,
    d: &Dataset,
    i: usize,
    chunk_percent: f64,
) -> Result<Dataset> {
    let removed = removed_prefix(ranking, d.len(), i, chunk_percent)?;
    let ids: HashSet<RowId> = removed.into_iter().collect();
    Ok(d.without_ids(&ids))
}

fn removed_prefix(
    ranking: &InfluenceRanking,
    rows: usize,
    i: usize,
    chunk_percent: f64,
) -> Result<Vec<RowId>> {
    if !(chunk_percent > 0.0) || i as f64 * chunk_percent > 100.0 + 1e-9 {
        return Err(Error::Range(format!(
            "cannot drop {i} chunks of {chunk_percent}%"
        )));
    }
    let k = rows_to_drop(rows, i, chunk_percent);
    Ok(ranking.ranked.iter().take(k).map(|r| r.row_id).collect())
}

/// Result of the chunked removal loop.
#[derive(Debug, Clone)]
pub struct LoopOutcome {
    pub dataset: Dataset,
    pub trace: Vec<TraceStep>,
    pub stop_index: usize,
    pub removed_row_ids: Vec<RowId>,
    pub loop_exhausted: bool,
}

/// The removal loop with the measurement abstracted away. `measure(i, data)`
/// returns the discrimination of a model retrained on `data`, the dataset
/// with `i` chunks removed. Chunks that would leave no rows are not tried.
pub fn removal_loop<F>(
    d: &Dataset,
    ranking: &InfluenceRanking,
    chunk_percent: f64,
    max_chunks: usize,
    mut measure: F,
) -> Result<LoopOutcome>
where
    F: FnMut(usize, &Dataset) -> Result<f64>,
{
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = d.len();
    let mut trace = Vec::new();
    let mut least = f64::INFINITY;
    let mut stop = None;
    for i in 0..=max_chunks {
        let k = rows_to_drop(n, i, chunk_percent);
        if k >= n {
            break;
        }
        let candidate = drop_first(ranking, d, i, chunk_percent)?;
        let discrimination = measure(i, &candidate)?;
        trace.push(TraceStep {
            chunk_index: i,
            rows_removed: k,
            fraction_removed: k as f64 / n as f64,
            discrimination,
        });
        if discrimination >= least {
            stop = Some(i - 1);
            break;
        }
        least = discrimination;
    }
    let (stop_index, loop_exhausted) = match stop {
        Some(s) => (s, false),
        None => (trace.last().map_or(0, |t| t.chunk_index), true),
    };
    let removed_row_ids = removed_prefix(ranking, n, stop_index, chunk_percent)?;
    let dataset = drop_first(ranking, d, stop_index, chunk_percent)?;
    Ok(LoopOutcome {
        dataset,
        trace,
        stop_index,
        removed_row_ids,
        loop_exhausted,
    })
}

/// Debiased dataset, the report, and the model trained on that dataset.
#[derive(Debug, Clone)]
pub struct DebiasOutcome {
    pub dataset: Dataset,
    pub report: DebiasReport,
    pub model: Mlp,
}

/// Trains on `d`, ranks its rows once, then drops chunks until the measured
/// discrimination reaches a local minimum. Discrimination is always measured
/// on pools generated from `d`.
pub fn debias_data<F>(d: &Dataset, cfg: &DebiasConfig, train_fn: F) -> Result<DebiasOutcome>
where
    F: Fn(&Dataset, &Hyperparameters) -> Result<Mlp>,
{
    let mut estimator = DiscrimEstimator::new(cfg.similarity, cfg.freeze_pool);
    debias_data_with(d, cfg, train_fn, |_, model, _| {
        Ok(estimator.estimate(model, d)?.fraction())
    })
}

/// [`debias_data`] with the measurement supplied by the caller:
/// `measure(i, model, data)` scores the model trained on `data`, the input
/// with `i` chunks removed.
pub fn debias_data_with<F, M>(
    d: &Dataset,
    cfg: &DebiasConfig,
    train_fn: F,
    mut measure: M,
) -> Result<DebiasOutcome>
where
    F: Fn(&Dataset, &Hyperparameters) -> Result<Mlp>,
    M: FnMut(usize, &Mlp, &Dataset) -> Result<f64>,
{
    cfg.validate()?;
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let full = train_fn(d, &cfg.hp)?;
    let ranking = match sort_dataset(d, &full, cfg) {
        Ok(r) => r,
        Err(Error::AlreadyFair) => {
            return Ok(DebiasOutcome {
                dataset: d.clone(),
                report: DebiasReport {
                    trace: Vec::new(),
                    stop_index: 0,
                    removed_row_ids: Vec::new(),
                    sorted_order: None,
                    loop_exhausted: false,
                    already_fair: true,
                },
                model: full,
            })
        }
        Err(e) => return Err(e),
    };

    // only the models of the last two chunks can be returned
    let mut previous: Option<Mlp> = None;
    let mut current: Option<Mlp> = None;
    let outcome = removal_loop(d, &ranking, cfg.chunk_percent, cfg.max_chunks, |i, data| {
        let model = if i == 0 {
            full.clone()
        } else {
            train_fn(data, &cfg.hp)?
        };
        let v = measure(i, &model, data)?;
        previous = current.replace(model);
        Ok(v)
    })?;
    let model = if outcome.loop_exhausted {
        current
    } else {
        previous
    }
    .unwrap_or(full);

    Ok(DebiasOutcome {
        dataset: outcome.dataset,
        report: DebiasReport {
            trace: outcome.trace,
            stop_index: outcome.stop_index,
            removed_row_ids: outcome.removed_row_ids,
            sorted_order: Some(ranking),
            loop_exhausted: outcome.loop_exhausted,
            already_fair: false,
        },
        model,
    })
}
