use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::model::Mlp;

/// A symmetric linear map given only through its action on vectors.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[f64]) -> Result<Vec<f64>>;
}

/// `H + damping * I`, with `H` the Hessian of the mean training loss.
pub struct DampedHessian<'a> {
    pub model: &'a Mlp,
    pub train: &'a Dataset,
    pub damping: f64,
}

impl LinearOperator for DampedHessian<'_> {
    fn dim(&self) -> usize {
        self.model.num_params()
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.model.hvp(v, self.train.examples())?;
        for (o, vi) in out.iter_mut().zip(v) {
            *o += self.damping * vi;
        }
        Ok(out)
    }
}

/// Dense symmetric matrix, row-major. Mostly useful for checking solvers.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    n: usize,
    data: Vec<f64>,
}

impl DenseOperator {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        check_dim(n * n, data.len())?;
        Ok(Self { n, data })
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, v.len())?;
        Ok((0..self.n)
            .map(|i| dot(&self.data[i * self.n..(i + 1) * self.n], v))
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    ConjugateGradient,
    Lissa,
}

/// How per-individual solves are combined into one score per training row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// One solve against the mean loss gradient of the whole influence set.
    /// Equal to the mean of per-entry scores by linearity of the solve.
    MeanGradient,
    /// One solve per influence-set entry.
    PerEntry,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub damping: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub lissa_depth: usize,
    pub lissa_samples: usize,
    /// Must exceed the largest eigenvalue of the damped Hessian.
    pub lissa_scale: f64,
    /// Rows per stochastic Hessian sample; 0 uses every row.
    pub lissa_batch_size: usize,
    pub lissa_seed: u64,
    pub aggregation: Aggregation,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::ConjugateGradient,
            damping: 0.01,
            cg_tol: 1e-6,
            cg_max_iter: 500,
            lissa_depth: 1000,
            lissa_samples: 4,
            lissa_scale: 10.0,
            lissa_batch_size: 0,
            lissa_seed: 0,
            aggregation: Aggregation::MeanGradient,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0) {
            return Err(Error::InvalidConfig("damping must be positive".into()));
        }
        if self.method == SolverMethod::Lissa
            && (self.lissa_depth == 0 || self.lissa_samples == 0 || !(self.lissa_scale > 0.0))
        {
            return Err(Error::InvalidConfig(
                "lissa needs positive depth, samples and scale".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of one linear solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual_norm: f64,
    pub rhs_norm: f64,
    pub converged: bool,
    /// CG met a direction of non-positive curvature and stopped early.
    #[serde(default)]
    pub breakdown: bool,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Conjugate gradient for `op * x = b`, starting from zero. Stops once the
/// residual norm is at most `tol * |b|`; the iterate is returned either way.
pub fn conjugate_gradient(
    op: &impl LinearOperator,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    check_dim(op.dim(), b.len())?;
    let rhs_norm = norm(b);
    let target = tol * rhs_norm;
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    let mut stats = SolveStats {
        iterations: 0,
        residual_norm: rs.sqrt(),
        rhs_norm,
        converged: rs.sqrt() <= target,
        breakdown: false,
    };
    while !stats.converged && stats.iterations < max_iter {
        let ap = op.apply(&p)?;
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            stats.breakdown = true;
            break;
        }
        let alpha = rs / curvature;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot(&r, &r);
        stats.iterations += 1;
        stats.residual_norm = rs_new.sqrt();
        if stats.residual_norm <= target {
            stats.converged = true;
            break;
        }
        let beta = rs_new / rs;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
    }
    Ok((x, stats))
}

/// LiSSA: a truncated Neumann series for `(H + damping I)^{-1} v`,
///
/// `h_j = v + h_{j-1} - (H_j h_{j-1} + damping h_{j-1}) / scale`,
///
/// where `hvp_sample(h, rng)` returns a (possibly stochastic) estimate of
/// `H h`. The result is `h_depth / scale`, averaged over repetitions.
pub fn lissa<F>(
    mut hvp_sample: F,
    v: &[f64],
    damping: f64,
    scale: f64,
    depth: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], &mut ChaCha8Rng) -> Result<Vec<f64>>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![0.0; v.len()];
    for _ in 0..samples {
        let mut h = v.to_vec();
        for _ in 0..depth {
            let hv = hvp_sample(&h, &mut rng)?;
            check_dim(v.len(), hv.len())?;
            for i in 0..h.len() {
                h[i] = v[i] + h[i] - (hv[i] + damping * h[i]) / scale;
            }
        }
        for (a, hi) in acc.iter_mut().zip(&h) {
            *a += hi;
        }
    }
    let denom = scale * samples as f64;
    acc.iter_mut().for_each(|a| *a /= denom);
    Ok(acc)
}

/// Approximate `(H + damping I)^{-1} v` for the mean training loss of `m`.
pub fn inverse_hvp(
    m: &Mlp,
    v: &[f64],
    train: &Dataset,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveStats)> {
    cfg.validate()?;
    check_dim(m.num_params(), v.len())?;
    let op = DampedHessian {
        model: m,
        train,
        damping: cfg.damping,
    };
    match cfg.method {
        SolverMethod::ConjugateGradient => conjugate_gradient(&op, v, cfg.cg_tol, cfg.cg_max_iter),
        SolverMethod::Lissa => {
            let n = train.len();
            let batch = if cfg.lissa_batch_size == 0 {
                n
            } else {
                cfg.lissa_batch_size.min(n)
            };
            let x = lissa(
                |h, rng| {
                    if batch >= n {
                        m.hvp(h, train.examples())
                    } else {
                        let idx = sample(rng, n, batch);
                        m.hvp(
                            h,
                            idx.iter().map(|i| crate::data::Example {
                                x: train.row(i),
                                y: train.labels()[i],
                            }),
                        )
                    }
                },
                v,
                cfg.damping,
                cfg.lissa_scale,
                cfg.lissa_depth,
                cfg.lissa_samples,
                cfg.lissa_seed,
            )?;
            let ax = op.apply(&x)?;
            let residual: Vec<f64> = ax.iter().zip(v).map(|(a, b)| a - b).collect();
            let residual_norm = norm(&residual);
            let rhs_norm = norm(v);
            Ok((
                x,
                SolveStats {
                    iterations: cfg.lissa_depth * cfg.lissa_samples,
                    residual_norm,
                    rhs_norm,
                    converged: residual_norm <= cfg.cg_tol * rhs_norm,
                    breakdown: false,
                },
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cg_zero_rhs_returns_zero() {
        let op = DenseOperator::new(2, vec![2.0, 0.5, 0.5, 1.0]).unwrap();
        let (x, stats) = conjugate_gradient(&op, &[0.0, 0.0], 1e-12, 10).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
        assert!(stats.converged);
        assert_eq!(stats.iterations, 0);
    }

    #[test]
    fn cg_reports_non_convergence() {
        let op = DenseOperator::new(3, vec![4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]).unwrap();
        let (_, stats) = conjugate_gradient(&op, &[1.0, 2.0, 3.0], 1e-14, 1).unwrap();
        assert!(!stats.converged);
        assert_eq!(stats.iterations, 1);
    }

    #[test]
    fn cg_detects_negative_curvature() {
        let op = DenseOperator::new(2, vec![-1.0, 0.0, 0.0, -2.0]).unwrap();
        let (_, stats) = conjugate_gradient(&op, &[1.0, 1.0], 1e-10, 10).unwrap();
        assert!(stats.breakdown && !stats.converged);
    }

    #[test]
    fn lissa_on_dense_matrix() {
        let a = [2.0, 0.5, 0.5, 1.0];
        let op = DenseOperator::new(2, a.to_vec()).unwrap();
        let x = lissa(|h, _| op.apply(h), &[1.0, -1.0], 0.1, 4.0, 400, 1, 0).unwrap();
        // (A + 0.1 I)^{-1} [1, -1] solved by Cramer's rule
        let (p, q, r) = (2.1, 0.5, 1.1);
        let det = p * r - q * q;
        let expect = [(r * 1.0 - q * -1.0) / det, (p * -1.0 - q * 1.0) / det];
        assert!((x[0] - expect[0]).abs() < 1e-10);
        assert!((x[1] - expect[1]).abs() < 1e-10);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.damping = 0.0;
        assert!(cfg.validate().is_err());
    }
}
