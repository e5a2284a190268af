use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Classifier, Hyperparameters};
use crate::data::Example;
use crate::error::{check_dim, Error, Result};

const OUTPUTS: usize = 2;
const FORMAT: &str = "fairprune-mlp";
const FORMAT_VERSION: u32 = 1;

/// Start offsets of each parameter group inside the flat vector.
#[derive(Debug, Clone, Copy)]
struct Offsets {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    len: usize,
}

impl Offsets {
    fn new(d: usize, h1: usize, h2: usize) -> Self {
        let w1 = 0;
        let b1 = w1 + h1 * d;
        let w2 = b1 + h1;
        let b2 = w2 + h2 * h1;
        let w3 = b2 + h2;
        let b3 = w3 + OUTPUTS * h2;
        let len = b3 + OUTPUTS;
        Self {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            len,
        }
    }
}

/// Activations of one forward pass.
#[derive(Debug, Clone)]
struct Forward {
    a1: Vec<f64>,
    a2: Vec<f64>,
    logits: [f64; 2],
    proba: [f64; 2],
}

/// Per-epoch record of the mean mini-batch loss.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub epoch_losses: Vec<f64>,
    /// Mean training loss of the final parameters over the whole dataset.
    pub final_loss: f64,
}

/// Feed-forward binary classifier: `input -> tanh(h1) -> tanh(h2) -> 2 logits`,
/// trained with softmax cross-entropy.
///
/// Parameters live in one flat vector ordered `W1, b1, W2, b2, W3, b3`,
/// weight matrices row-major `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    input_dim: usize,
    hidden1: usize,
    hidden2: usize,
    params: Vec<f64>,
    log: Option<TrainingLog>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    layer_sizes: [usize; 4],
    activation: String,
    params: Vec<f64>,
}

impl Mlp {
    /// Fresh network with weights and biases drawn from
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new(input_dim: usize, hidden1: usize, hidden2: usize, seed: u64) -> Self {
        let off = Offsets::new(input_dim, hidden1, hidden2);
        let mut params = vec![0.0; off.len];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, rng: &mut ChaCha8Rng| {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            for p in &mut params[range] {
                *p = dist.sample(rng);
            }
        };
        fill(off.w1..off.w2, input_dim, &mut rng);
        fill(off.w2..off.w3, hidden1, &mut rng);
        fill(off.w3..off.len, hidden2, &mut rng);
        Self {
            input_dim,
            hidden1,
            hidden2,
            params,
            log: None,
        }
    }

    pub fn for_hyperparameters(input_dim: usize, hp: &Hyperparameters) -> Self {
        Self::new(input_dim, hp.hidden1, hp.hidden2, hp.weight_init_seed)
    }

    /// Builds a network from an existing flat parameter vector.
    pub fn from_params(
        input_dim: usize,
        hidden1: usize,
        hidden2: usize,
        params: Vec<f64>,
    ) -> Result<Self> {
        check_dim(Self::param_count(input_dim, hidden1, hidden2), params.len())?;
        Ok(Self {
            input_dim,
            hidden1,
            hidden2,
            params,
            log: None,
        })
    }

    pub fn param_count(input_dim: usize, hidden1: usize, hidden2: usize) -> usize {
        Offsets::new(input_dim, hidden1, hidden2).len
    }

    pub fn layer_sizes(&self) -> [usize; 4] {
        [self.input_dim, self.hidden1, self.hidden2, OUTPUTS]
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn training_log(&self) -> Option<&TrainingLog> {
        self.log.as_ref()
    }

    pub(crate) fn set_training_log(&mut self, log: TrainingLog) {
        self.log = Some(log);
    }

    fn offsets(&self) -> Offsets {
        Offsets::new(self.input_dim, self.hidden1, self.hidden2)
    }

    fn forward(&self, x: &[f64]) -> Forward {
        let (d, h1, h2) = (self.input_dim, self.hidden1, self.hidden2);
        let o = self.offsets();
        let p = &self.params;
        let a1: Vec<f64> = (0..h1)
            .map(|j| {
                let w = &p[o.w1 + j * d..o.w1 + (j + 1) * d];
                (p[o.b1 + j] + dot(w, x)).tanh()
            })
            .collect();
        let a2: Vec<f64> = (0..h2)
            .map(|j| {
                let w = &p[o.w2 + j * h1..o.w2 + (j + 1) * h1];
                (p[o.b2 + j] + dot(w, &a1)).tanh()
            })
            .collect();
        let mut logits = [0.0; OUTPUTS];
        for (c, z) in logits.iter_mut().enumerate() {
            let w = &p[o.w3 + c * h2..o.w3 + (c + 1) * h2];
            *z = p[o.b3 + c] + dot(w, &a2);
        }
        Forward {
            a1,
            a2,
            logits,
            proba: softmax2(logits),
        }
    }

    pub fn logits(&self, x: &[f64]) -> Result<[f64; 2]> {
        check_dim(self.input_dim, x.len())?;
        Ok(self.forward(x).logits)
    }

    /// Cross-entropy of the softmax output against label `y`.
    pub fn loss(&self, x: &[f64], y: u8) -> Result<f64> {
        check_dim(self.input_dim, x.len())?;
        Ok(cross_entropy(self.forward(x).logits, y))
    }

    pub fn mean_loss<'a>(&self, batch: impl IntoIterator<Item = Example<'a>>) -> Result<f64> {
        let mut total = 0.0;
        let mut n = 0usize;
        for ex in batch {
            total += self.loss(ex.x, ex.y)?;
            n += 1;
        }
        Ok(if n == 0 { 0.0 } else { total / n as f64 })
    }

    /// Gradient of the per-example loss with respect to the parameters.
    pub fn grad_loss(&self, x: &[f64], y: u8) -> Result<Vec<f64>> {
        check_dim(self.input_dim, x.len())?;
        let mut g = vec![0.0; self.params.len()];
        self.accumulate_grad(x, y, 1.0, &mut g);
        Ok(g)
    }

    /// Gradient of the mean loss over `batch`.
    pub fn grad_mean_loss<'a>(
        &self,
        batch: impl IntoIterator<Item = Example<'a>>,
    ) -> Result<Vec<f64>> {
        let batch: Vec<Example<'a>> = batch.into_iter().collect();
        let mut g = vec![0.0; self.params.len()];
        if batch.is_empty() {
            return Ok(g);
        }
        let scale = 1.0 / batch.len() as f64;
        for ex in &batch {
            check_dim(self.input_dim, ex.x.len())?;
            self.accumulate_grad(ex.x, ex.y, scale, &mut g);
        }
        Ok(g)
    }

    /// Adds `scale * grad L(x, y)` into `out`; returns the loss.
    pub(crate) fn accumulate_grad(&self, x: &[f64], y: u8, scale: f64, out: &mut [f64]) -> f64 {
        let (d, h1, h2) = (self.input_dim, self.hidden1, self.hidden2);
        let o = self.offsets();
        let p = &self.params;
        let f = self.forward(x);

        let mut d3 = f.proba;
        d3[y as usize] -= 1.0;
        for c in 0..OUTPUTS {
            out[o.b3 + c] += scale * d3[c];
            axpy(scale * d3[c], &f.a2, &mut out[o.w3 + c * h2..o.w3 + (c + 1) * h2]);
        }
        let d2: Vec<f64> = (0..h2)
            .map(|k| {
                let ga2: f64 = (0..OUTPUTS).map(|c| p[o.w3 + c * h2 + k] * d3[c]).sum();
                ga2 * (1.0 - f.a2[k] * f.a2[k])
            })
            .collect();
        let mut ga1 = vec![0.0; h1];
        for j in 0..h2 {
            out[o.b2 + j] += scale * d2[j];
            axpy(scale * d2[j], &f.a1, &mut out[o.w2 + j * h1..o.w2 + (j + 1) * h1]);
            axpy(d2[j], &p[o.w2 + j * h1..o.w2 + (j + 1) * h1], &mut ga1);
        }
        for j in 0..h1 {
            let d1 = ga1[j] * (1.0 - f.a1[j] * f.a1[j]);
            out[o.b1 + j] += scale * d1;
            axpy(scale * d1, x, &mut out[o.w1 + j * d..o.w1 + (j + 1) * d]);
        }
        cross_entropy(f.logits, y)
    }

    /// Hessian of the mean loss over `batch` applied to `v`.
    ///
    /// Forward-over-reverse differentiation of the backward pass: tangents of
    /// the activations are pushed forward along `v`, then the backward pass is
    /// differentiated along the same direction. The Hessian is never formed.
    pub fn hvp<'a>(
        &self,
        v: &[f64],
        batch: impl IntoIterator<Item = Example<'a>>,
    ) -> Result<Vec<f64>> {
        check_dim(self.params.len(), v.len())?;
        let batch: Vec<Example<'a>> = batch.into_iter().collect();
        let mut out = vec![0.0; self.params.len()];
        if batch.is_empty() {
            return Ok(out);
        }
        let scale = 1.0 / batch.len() as f64;
        for ex in &batch {
            check_dim(self.input_dim, ex.x.len())?;
            self.accumulate_hvp(ex.x, ex.y, v, scale, &mut out);
        }
        Ok(out)
    }

    pub(crate) fn accumulate_hvp(&self, x: &[f64], y: u8, v: &[f64], scale: f64, out: &mut [f64]) {
        let (d, h1, h2) = (self.input_dim, self.hidden1, self.hidden2);
        let o = self.offsets();
        let p = &self.params;
        let f = self.forward(x);

        // Tangent forward pass.
        let r_a1: Vec<f64> = (0..h1)
            .map(|j| {
                let rz = v[o.b1 + j] + dot(&v[o.w1 + j * d..o.w1 + (j + 1) * d], x);
                (1.0 - f.a1[j] * f.a1[j]) * rz
            })
            .collect();
        let r_a2: Vec<f64> = (0..h2)
            .map(|j| {
                let rz = v[o.b2 + j]
                    + dot(&v[o.w2 + j * h1..o.w2 + (j + 1) * h1], &f.a1)
                    + dot(&p[o.w2 + j * h1..o.w2 + (j + 1) * h1], &r_a1);
                (1.0 - f.a2[j] * f.a2[j]) * rz
            })
            .collect();
        let mut r_z3 = [0.0; OUTPUTS];
        for (c, rz) in r_z3.iter_mut().enumerate() {
            *rz = v[o.b3 + c]
                + dot(&v[o.w3 + c * h2..o.w3 + (c + 1) * h2], &f.a2)
                + dot(&p[o.w3 + c * h2..o.w3 + (c + 1) * h2], &r_a2);
        }

        // Backward pass and its tangent.
        let mut d3 = f.proba;
        d3[y as usize] -= 1.0;
        let mean_rz: f64 = (0..OUTPUTS).map(|c| f.proba[c] * r_z3[c]).sum();
        let r_d3: [f64; 2] = std::array::from_fn(|c| f.proba[c] * (r_z3[c] - mean_rz));
        for c in 0..OUTPUTS {
            out[o.b3 + c] += scale * r_d3[c];
            let row = &mut out[o.w3 + c * h2..o.w3 + (c + 1) * h2];
            axpy(scale * r_d3[c], &f.a2, row);
            axpy(scale * d3[c], &r_a2, row);
        }

        let mut d2 = vec![0.0; h2];
        let mut r_d2 = vec![0.0; h2];
        for k in 0..h2 {
            let mut ga2 = 0.0;
            let mut r_ga2 = 0.0;
            for c in 0..OUTPUTS {
                ga2 += p[o.w3 + c * h2 + k] * d3[c];
                r_ga2 += v[o.w3 + c * h2 + k] * d3[c] + p[o.w3 + c * h2 + k] * r_d3[c];
            }
            let deriv = 1.0 - f.a2[k] * f.a2[k];
            d2[k] = ga2 * deriv;
            r_d2[k] = r_ga2 * deriv - 2.0 * f.a2[k] * r_a2[k] * ga2;
        }

        let mut ga1 = vec![0.0; h1];
        let mut r_ga1 = vec![0.0; h1];
        for j in 0..h2 {
            out[o.b2 + j] += scale * r_d2[j];
            let row = &mut out[o.w2 + j * h1..o.w2 + (j + 1) * h1];
            axpy(scale * r_d2[j], &f.a1, row);
            axpy(scale * d2[j], &r_a1, row);
            let w = &p[o.w2 + j * h1..o.w2 + (j + 1) * h1];
            let vw = &v[o.w2 + j * h1..o.w2 + (j + 1) * h1];
            axpy(d2[j], w, &mut ga1);
            axpy(d2[j], vw, &mut r_ga1);
            axpy(r_d2[j], w, &mut r_ga1);
        }
        for j in 0..h1 {
            let deriv = 1.0 - f.a1[j] * f.a1[j];
            let r_d1 = r_ga1[j] * deriv - 2.0 * f.a1[j] * r_a1[j] * ga1[j];
            out[o.b1 + j] += scale * r_d1;
            axpy(scale * r_d1, x, &mut out[o.w1 + j * d..o.w1 + (j + 1) * d]);
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: FORMAT.into(),
            version: FORMAT_VERSION,
            layer_sizes: self.layer_sizes(),
            activation: "tanh".into(),
            params: self.params.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != FORMAT {
            return Err(Error::ModelFormat(format!("unknown format `{}`", file.format)));
        }
        if file.version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {}", file.version)));
        }
        if file.activation != "tanh" || file.layer_sizes[3] != OUTPUTS {
            return Err(Error::ModelFormat("only tanh networks with 2 outputs".into()));
        }
        let [d, h1, h2, _] = file.layer_sizes;
        Self::from_params(d, h1, h2, file.params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl Classifier for Mlp {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn predict_proba(&self, x: &[f64]) -> Result<[f64; 2]> {
        check_dim(self.input_dim, x.len())?;
        Ok(self.forward(x).proba)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Numerically stable two-class softmax.
pub fn softmax2(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let e0 = (z[0] - m).exp();
    let e1 = (z[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

fn cross_entropy(z: [f64; 2], y: u8) -> f64 {
    let m = z[0].max(z[1]);
    let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
    lse - z[y as usize]
}
