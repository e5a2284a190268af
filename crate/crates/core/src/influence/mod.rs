//! Training-data influence on a set of model predictions.
//!
//! For a test point `t` and a training point `z` the score is
//! `-grad L(t)^T (H + damping I)^{-1} grad L(z)`, the first-order change in
//! the loss at `t` when `z` is up-weighted. A negative score means `z`
//! supports the prediction at `t`. Rankings are ascending, so the rows that
//! most support the given predictions come first.

mod solver;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use solver::{
    conjugate_gradient, inverse_hvp, lissa, norm, Aggregation, DampedHessian, DenseOperator,
    LinearOperator, SolveStats, SolverConfig, SolverMethod,
};

use crate::data::{Dataset, RowId};
use crate::error::{check_dim, Error, Result};
use crate::model::Mlp;
use solver::dot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceEntry {
    pub x: Vec<f64>,
    /// The label the model assigned to `x`.
    pub label: u8,
}

/// Individuals judged unfairly treated, each with the model's prediction.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InfluenceSet {
    pub entries: Vec<InfluenceEntry>,
}

impl InfluenceSet {
    pub fn new(entries: Vec<InfluenceEntry>) -> Self {
        Self { entries }
    }

    pub fn push(&mut self, x: Vec<f64>, label: u8) {
        self.entries.push(InfluenceEntry { x, label });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Mean loss of `m` on the entries against their assigned labels.
    pub fn mean_loss(&self, m: &Mlp) -> Result<f64> {
        m.mean_loss(self.entries.iter().map(|e| crate::data::Example {
            x: &e.x,
            y: e.label,
        }))
    }

    fn mean_gradient(&self, m: &Mlp) -> Result<Vec<f64>> {
        m.grad_mean_loss(self.entries.iter().map(|e| crate::data::Example {
            x: &e.x,
            y: e.label,
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedRow {
    pub row_id: RowId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub method: SolverMethod,
    pub aggregation: Aggregation,
    pub damping: f64,
    pub influence_set_size: usize,
    pub solves: Vec<SolveStats>,
}

impl SolverDiagnostics {
    pub fn all_converged(&self) -> bool {
        self.solves.iter().all(|s| s.converged)
    }
}

/// Training rows ordered from most to least responsible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceRanking {
    pub ranked: Vec<RankedRow>,
    pub diagnostics: SolverDiagnostics,
}

impl InfluenceRanking {
    /// Sorts ascending by score, ties by ascending row id.
    pub fn from_scores(scores: Vec<RankedRow>, diagnostics: SolverDiagnostics) -> Self {
        let mut ranked = scores;
        ranked.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.row_id.cmp(&b.row_id)));
        Self {
            ranked,
            diagnostics,
        }
    }

    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn row_ids(&self) -> Vec<RowId> {
        self.ranked.iter().map(|r| r.row_id).collect()
    }

    pub fn score_of(&self, id: RowId) -> Option<f64> {
        self.ranked.iter().find(|r| r.row_id == id).map(|r| r.score)
    }

    /// `rank,row_id,score` with 1-based ranks.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["rank", "row_id", "score"])?;
        for (i, r) in self.ranked.iter().enumerate() {
            wtr.write_record([(i + 1).to_string(), r.row_id.to_string(), r.score.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn diagnostics_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.diagnostics)?)
    }
}

/// `-s_test^T grad L(x, y)` for a precomputed `s_test = (H + damping I)^{-1} grad L(t)`.
pub fn influence_score(m: &Mlp, s_test: &[f64], x: &[f64], y: u8) -> Result<f64> {
    check_dim(m.num_params(), s_test.len())?;
    let g = m.grad_loss(x, y)?;
    Ok(-dot(s_test, &g))
}

/// Mean influence score over `iset` for every row of `train`, sorted
/// ascending (most negative, i.e. most supportive of the predictions, first).
pub fn rank_by_influence(
    iset: &InfluenceSet,
    train: &Dataset,
    m: &Mlp,
    cfg: &SolverConfig,
) -> Result<InfluenceRanking> {
    cfg.validate()?;
    if iset.is_empty() {
        return Err(Error::EmptyInfluenceSet);
    }
    for e in &iset.entries {
        check_dim(m.layer_sizes()[0], e.x.len())?;
    }
    check_dim(m.layer_sizes()[0], train.width())?;

    let (s_mean, solves) = match cfg.aggregation {
        Aggregation::MeanGradient => {
            let g = iset.mean_gradient(m)?;
            let (s, stats) = inverse_hvp(m, &g, train, cfg)?;
            (s, vec![stats])
        }
        Aggregation::PerEntry => {
            let solved: Vec<(Vec<f64>, SolveStats)> = iset
                .entries
                .par_iter()
                .map(|e| {
                    let g = m.grad_loss(&e.x, e.label)?;
                    inverse_hvp(m, &g, train, cfg)
                })
                .collect::<Result<_>>()?;
            let mut mean = vec![0.0; m.num_params()];
            let scale = 1.0 / solved.len() as f64;
            let mut stats = Vec::with_capacity(solved.len());
            for (s, st) in solved {
                for (a, v) in mean.iter_mut().zip(&s) {
                    *a += scale * v;
                }
                stats.push(st);
            }
            (mean, stats)
        }
    };

    let scores: Vec<RankedRow> = (0..train.len())
        .into_par_iter()
        .map(|i| {
            let score = influence_score(m, &s_mean, train.row(i), train.labels()[i])?;
            Ok(RankedRow {
                row_id: train.row_ids()[i],
                score,
            })
        })
        .collect::<Result<_>>()?;

    Ok(InfluenceRanking::from_scores(
        scores,
        SolverDiagnostics {
            method: cfg.method,
            aggregation: cfg.aggregation,
            damping: cfg.damping,
            influence_set_size: iset.len(),
            solves,
        },
    ))
}
