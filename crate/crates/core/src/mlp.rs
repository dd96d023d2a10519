//! Feedforward sigmoid network trained by plain mini-batch backprop.
//!
//! Used as a baseline classifier and as the source of weights for
//! MLP-embedded mesh seeds (see [`crate::topology::embed_mlp`]).

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{Reader, Writer};
use crate::dataset::{Dataset, Sample};
use crate::matrix::{sigmoid, Matrix};
use crate::mesh::Classifier;
use crate::{rng, Error, FormatError, Result, NUM_CLASSES};

pub const MLP_MAGIC: &[u8; 4] = b"MLP1";

/// The three hidden-layer layouts of the baseline network. Only the first
/// sums to 240 and can therefore be embedded in a default-size mesh.
pub const HIDDEN_VARIANTS: [&[usize]; 3] = [
    &[128, 64, 32, 16],
    &[64, 32, 16, 10],
    &[256, 128, 64, 32, 10],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self {
            epochs: 300,
            learning_rate: 1.5,
            batch_size: 2,
            seed: 0,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter("learning_rate must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    /// `weights[l]` maps layer `l` to layer `l + 1` and has shape `(out, in)`.
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

fn check_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::InvalidParameter(
            "an MLP needs at least an input and an output layer".into(),
        ));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::InvalidParameter("layer sizes must be positive".into()));
    }
    Ok(())
}

impl Mlp {
    /// All weights and biases zero.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let weights = layer_sizes
            .windows(2)
            .map(|w| Matrix::zeros(w[1], w[0]))
            .collect();
        let biases = layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    /// Weights and biases uniform in `[-1/√fan_in, 1/√fan_in]`.
    pub fn random<R: Rng + ?Sized>(layer_sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut mlp = Self::zeros(layer_sizes)?;
        for (w, b) in mlp.weights.iter_mut().zip(&mut mlp.biases) {
            let bound = 1.0 / (w.cols() as f64).sqrt();
            for v in w.as_mut_slice().iter_mut().chain(b.iter_mut()) {
                *v = rng.random_range(-bound..=bound);
            }
        }
        Ok(mlp)
    }

    pub fn from_parts(weights: Vec<Matrix>, biases: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::InvalidParameter(
                "need one bias vector per weight matrix".into(),
            ));
        }
        let mut sizes = vec![weights[0].cols()];
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.cols() != sizes[l] {
                return Err(Error::DimensionMismatch {
                    context: "mlp layer input",
                    expected: sizes[l],
                    found: w.cols(),
                });
            }
            if b.len() != w.rows() {
                return Err(Error::DimensionMismatch {
                    context: "mlp bias length",
                    expected: w.rows(),
                    found: b.len(),
                });
            }
            sizes.push(w.rows());
        }
        check_sizes(&sizes)?;
        let mlp = Self {
            layer_sizes: sizes,
            weights,
            biases,
        };
        if !mlp.parameters().all(f64::is_finite) {
            return Err(Error::InvalidInput("MLP weights must be finite".into()));
        }
        Ok(mlp)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn hidden_sizes(&self) -> &[usize] {
        &self.layer_sizes[1..self.layer_sizes.len() - 1]
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("at least two layers")
    }

    /// Parameters in canonical order: per layer, weights row-major then bias.
    pub fn parameters(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.as_slice().iter().chain(b.iter()).copied())
    }

    pub fn parameter_count(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.as_slice().len() + b.len())
            .sum()
    }

    fn parameter_slot(&mut self, mut index: usize) -> &mut f64 {
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let wl = w.as_slice().len();
            if index < wl {
                return &mut w.as_mut_slice()[index];
            }
            index -= wl;
            if index < b.len() {
                return &mut b[index];
            }
            index -= b.len();
        }
        panic!("parameter index out of range")
    }

    pub fn set_parameter(&mut self, index: usize, value: f64) {
        *self.parameter_slot(index) = value;
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.layer_sizes[0] {
            return Err(Error::DimensionMismatch {
                context: "mlp input",
                expected: self.layer_sizes[0],
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("mlp input is not finite".into()));
        }
        Ok(())
    }

    /// Activations of every layer, input included.
    pub fn activations(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_input(x)?;
        let mut acts = Vec::with_capacity(self.layer_sizes.len());
        acts.push(x.to_vec());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let mut z = vec![0.0; w.rows()];
            w.affine_into(acts.last().expect("non-empty"), b, &mut z);
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericOverflow("mlp pre-activation is not finite".into()));
            }
            acts.push(z.into_iter().map(sigmoid).collect());
        }
        Ok(acts)
    }

    /// Class scores: an affine map followed by a sigmoid at every layer.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.activations(x)?.pop().expect("output layer"))
    }

    /// Mean per-class sigmoid cross-entropy against one-hot targets.
    pub fn loss(&self, samples: &[Sample]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::Empty("loss over no samples"));
        }
        let mut total = 0.0;
        for s in samples {
            let out = self.forward(&s.embedding)?;
            total += sample_loss(&out, &target(s, out.len()));
        }
        Ok(total / samples.len() as f64)
    }

    /// Mean loss and its gradient over `samples`, the gradient flattened in
    /// [`Mlp::parameters`] order.
    pub fn loss_and_gradient<'a>(
        &self,
        samples: impl IntoIterator<Item = &'a Sample>,
    ) -> Result<(f64, Vec<f64>)> {
        let mut grads: Vec<(Matrix, Vec<f64>)> = self
            .weights
            .iter()
            .map(|w| (Matrix::zeros(w.rows(), w.cols()), vec![0.0; w.rows()]))
            .collect();
        let mut total = 0.0;
        let mut n = 0usize;
        for s in samples {
            n += 1;
            total += self.accumulate_gradient(s, &mut grads)?;
        }
        if n == 0 {
            return Err(Error::Empty("gradient over no samples"));
        }
        let scale = 1.0 / n as f64;
        let flat = grads
            .iter()
            .flat_map(|(gw, gb)| gw.as_slice().iter().chain(gb.iter()))
            .map(|g| g * scale)
            .collect();
        Ok((total * scale, flat))
    }

    fn accumulate_gradient(&self, s: &Sample, grads: &mut [(Matrix, Vec<f64>)]) -> Result<f64> {
        let acts = self.activations(&s.embedding)?;
        let out = acts.last().expect("output layer");
        let y = target(s, out.len());
        let loss = sample_loss(out, &y);
        // For sigmoid outputs with cross-entropy the output delta is s - y.
        let mut delta: Vec<f64> = out.iter().zip(&y).map(|(a, t)| a - t).collect();
        for l in (0..self.weights.len()).rev() {
            let input = &acts[l];
            let (gw, gb) = &mut grads[l];
            for (r, &d) in delta.iter().enumerate() {
                gb[r] += d;
                for (g, &a) in gw.row_mut(r).iter_mut().zip(input) {
                    *g += d * a;
                }
            }
            if l > 0 {
                let mut back = vec![0.0; input.len()];
                self.weights[l].transpose_mul_add(&delta, &mut back);
                for (b, &a) in back.iter_mut().zip(input) {
                    *b *= a * (1.0 - a);
                }
                delta = back;
            }
        }
        Ok(loss)
    }

    fn apply_gradient(&mut self, grad: &[f64], learning_rate: f64) {
        let params = self
            .weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| w.as_mut_slice().iter_mut().chain(b.iter_mut()));
        for (p, g) in params.zip(grad) {
            *p -= learning_rate * g;
        }
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut w = Writer::with_magic(MLP_MAGIC, 8 + 8 * self.parameter_count());
        w.u32(self.layer_sizes.len() as u32);
        for &s in &self.layer_sizes {
            w.u32(s as u32);
        }
        for (m, b) in self.weights.iter().zip(&self.biases) {
            w.f64s(m.as_slice());
            w.f64s(b);
        }
        w.finish()
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::expect_magic(bytes, MLP_MAGIC)?;
        let count = r.u32()? as usize;
        if !(2..=64).contains(&count) {
            return Err(FormatError::InconsistentHeader(format!("{count} layers")).into());
        }
        let sizes = (0..count)
            .map(|_| r.u32().map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        check_sizes(&sizes).map_err(|e| FormatError::InconsistentHeader(e.to_string()))?;
        let entries = sizes
            .windows(2)
            .try_fold(0usize, |acc, w| {
                w[0].checked_mul(w[1])?.checked_add(w[1])?.checked_add(acc)
            })
            .ok_or_else(|| FormatError::InconsistentHeader("layer sizes overflow".into()))?;
        r.expect_remaining(entries)?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let m = Matrix::from_vec(w[1], w[0], r.f64s(w[0] * w[1])?).expect("sized by header");
            weights.push(m);
            biases.push(r.f64s(w[1])?);
        }
        Self::from_parts(weights, biases)
    }
}

impl Classifier for Mlp {
    fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward(x)
    }
}

/// Free-function form of [`Mlp::forward`].
pub fn mlp_forward(mlp: &Mlp, x: &[f64]) -> Result<Vec<f64>> {
    mlp.forward(x)
}

fn target(s: &Sample, classes: usize) -> Vec<f64> {
    let mut y = vec![0.0; classes];
    if let Some(slot) = y.get_mut(s.label.index()) {
        *slot = 1.0;
    }
    y
}

fn sample_loss(out: &[f64], y: &[f64]) -> f64 {
    out.iter()
        .zip(y)
        .map(|(&s, &t)| -(t * s.ln() + (1.0 - t) * (1.0 - s).ln()))
        .sum()
}

/// Trains a freshly initialised MLP with mini-batch SGD.
///
/// Returns the network and the mean training loss measured after each epoch.
/// `layer_sizes` must start at the dataset dimension and end at the class count.
pub fn train_mlp(
    train: &Dataset,
    spec: &TrainSpec,
    layer_sizes: &[usize],
) -> Result<(Mlp, Vec<f64>)> {
    spec.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    check_sizes(layer_sizes)?;
    if layer_sizes[0] != train.dim() {
        return Err(Error::DimensionMismatch {
            context: "mlp input layer vs dataset dimension",
            expected: train.dim(),
            found: layer_sizes[0],
        });
    }
    if *layer_sizes.last().expect("checked") != NUM_CLASSES {
        return Err(Error::DimensionMismatch {
            context: "mlp output layer",
            expected: NUM_CLASSES,
            found: *layer_sizes.last().expect("checked"),
        });
    }
    let mut mlp = Mlp::random(layer_sizes, &mut rng::stream(spec.seed, &[0x31a9]))?;
    let samples = train.samples();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut losses = Vec::with_capacity(spec.epochs);
    for epoch in 0..spec.epochs {
        order.shuffle(&mut rng::stream(spec.seed, &[0x31a9, 1 + epoch as u64]));
        for batch in order.chunks(spec.batch_size) {
            let (_, grad) = mlp.loss_and_gradient(batch.iter().map(|&i| &samples[i]))?;
            mlp.apply_gradient(&grad, spec.learning_rate);
        }
        losses.push(mlp.loss(samples)?);
    }
    Ok((mlp, losses))
}
