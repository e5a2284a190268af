//! The two-hidden-layer classifier and its differential primitives.

mod mlp;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use mlp::{softmax2, Mlp, TrainingLog};

use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};

/// Label and classification confidence (the larger class probability).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: u8,
    pub confidence: f64,
}

impl Prediction {
    /// Arg-max of the two probabilities; an exact tie predicts label 0.
    pub fn from_proba(p: [f64; 2]) -> Self {
        if p[1] > p[0] {
            Self {
                label: 1,
                confidence: p[1],
            }
        } else {
            Self {
                label: 0,
                confidence: p[0],
            }
        }
    }
}

/// Anything that maps an encoded row to two class probabilities.
pub trait Classifier: Send + Sync {
    fn input_dim(&self) -> usize;

    fn predict_proba(&self, x: &[f64]) -> Result<[f64; 2]>;

    fn predict(&self, x: &[f64]) -> Result<Prediction> {
        self.predict_proba(x).map(Prediction::from_proba)
    }
}

impl<C: Classifier + ?Sized> Classifier for &C {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn predict_proba(&self, x: &[f64]) -> Result<[f64; 2]> {
        (**self).predict_proba(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub hidden1: usize,
    pub hidden2: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_init_seed: u64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            hidden1: 16,
            hidden2: 8,
            batch_size: 32,
            epochs: 1000,
            learning_rate: 0.01,
            weight_init_seed: 0,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        if self.hidden1 == 0 || self.hidden2 == 0 {
            return Err(Error::InvalidConfig("hidden layer sizes must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Trains a fresh network on `d`.
pub fn train(d: &Dataset, hp: &Hyperparameters) -> Result<Mlp> {
    hp.validate()?;
    let init = Mlp::for_hyperparameters(d.width(), hp);
    fit(init, d, hp)
}

/// Continues training from `init`'s parameters.
pub fn train_from(init: &Mlp, d: &Dataset, hp: &Hyperparameters) -> Result<Mlp> {
    hp.validate()?;
    check_dim(init.layer_sizes()[0], d.width())?;
    fit(init.clone(), d, hp)
}

/// Plain mini-batch gradient descent. Rows are reshuffled every epoch from a
/// stream derived from `weight_init_seed`, so a run is fully determined by
/// `(d, hp)`.
fn fit(mut model: Mlp, d: &Dataset, hp: &Hyperparameters) -> Result<Mlp> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = d.len();
    let batch = hp.batch_size.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(hp.weight_init_seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; model.num_params()];
    let mut epoch_losses = Vec::with_capacity(hp.epochs);

    for _ in 0..hp.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                epoch_loss += model.accumulate_grad(d.row(i), d.labels()[i], scale, &mut grad);
            }
            for (p, g) in model.params_mut().iter_mut().zip(&grad) {
                *p -= hp.learning_rate * g;
            }
        }
        epoch_losses.push(epoch_loss / n as f64);
    }
    let final_loss = model.mean_loss(d.examples())?;
    model.set_training_log(TrainingLog {
        epoch_losses,
        final_loss,
    });
    Ok(model)
}

/// Fraction of rows of `d` predicted correctly by `m`.
pub fn training_accuracy(m: &impl Classifier, d: &Dataset) -> Result<f64> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut correct = 0usize;
    for ex in d.examples() {
        if m.predict(ex.x)?.label == ex.y {
            correct += 1;
        }
    }
    Ok(correct as f64 / d.len() as f64)
}
