//! The mesh network: five dense matrices and a settling recurrence.
//!
//! Hidden state starts at zero and is updated `settle_steps` times with the
//! input re-injected at every step:
//!
//! ```text
//! h_{t+1} = σ(mesh_connect · h_t + in_connect · x + mesh_bias)
//! scores  = σ(out_connect · h_T + out_bias)
//! ```

use serde::{Deserialize, Serialize};

use crate::codec::{Reader, Writer};
use crate::dataset::Dataset;
use crate::matrix::{dot, sigmoid, Matrix};
use crate::{stats, Error, FormatError, Label, Result};

pub const MESH_MAGIC: &[u8; 4] = b"MNN1";
/// Magic plus four `u32` dimension fields.
pub const MESH_HEADER_LEN: usize = 4 + 4 * 4;

/// Network shape: input width `D`, mesh size `M`, class count `C` and the
/// number of settle steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub input: usize,
    pub mesh: usize,
    pub classes: usize,
    pub settle_steps: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Self {
            input: 512,
            mesh: 240,
            classes: 3,
            settle_steps: 4,
        }
    }
}

impl Dims {
    pub fn new(input: usize, mesh: usize, classes: usize, settle_steps: usize) -> Self {
        Self {
            input,
            mesh,
            classes,
            settle_steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("input", self.input),
            ("mesh", self.mesh),
            ("classes", self.classes),
            ("settle_steps", self.settle_steps),
        ] {
            if v == 0 {
                return Err(Error::InvalidParameter(format!("dims.{name} must be >= 1")));
            }
            if u32::try_from(v).is_err() {
                return Err(Error::InvalidParameter(format!("dims.{name} exceeds u32")));
            }
        }
        Ok(())
    }

    /// Entry counts of the five tensors in storage order.
    pub fn tensor_lens(&self) -> [usize; 5] {
        [
            self.mesh * self.input,
            self.mesh * self.mesh,
            self.mesh,
            self.classes * self.mesh,
            self.classes,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.tensor_lens().iter().sum()
    }

    pub fn serialized_len(&self) -> usize {
        MESH_HEADER_LEN + 8 * self.param_count()
    }
}

/// Hidden activations after settling; every entry lies in (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    pub activations: Vec<f64>,
}

/// Anything that maps an input vector to class scores.
pub trait Classifier {
    fn input_dim(&self) -> usize;

    fn scores(&self, x: &[f64]) -> Result<Vec<f64>>;

    fn predict(&self, x: &[f64]) -> Result<Label> {
        Ok(Label::argmax(&self.scores(x)?))
    }

    /// Fraction of samples in `data` classified correctly.
    fn accuracy(&self, data: &Dataset) -> Result<f64> {
        let mut predicted = Vec::with_capacity(data.len());
        for s in data.samples() {
            predicted.push(self.predict(&s.embedding)?);
        }
        let truth: Vec<Label> = data.samples().iter().map(|s| s.label).collect();
        stats::accuracy(&predicted, &truth)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshNetwork {
    in_connect: Matrix,
    mesh_connect: Matrix,
    mesh_bias: Vec<f64>,
    out_connect: Matrix,
    out_bias: Vec<f64>,
    settle_steps: usize,
}

impl MeshNetwork {
    pub fn new(
        in_connect: Matrix,
        mesh_connect: Matrix,
        mesh_bias: Vec<f64>,
        out_connect: Matrix,
        out_bias: Vec<f64>,
        settle_steps: usize,
    ) -> Result<Self> {
        let m = in_connect.rows();
        let check = |context, expected, found| {
            if expected == found {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    context,
                    expected,
                    found,
                })
            }
        };
        check("mesh_connect rows", m, mesh_connect.rows())?;
        check("mesh_connect cols", m, mesh_connect.cols())?;
        check("mesh_bias length", m, mesh_bias.len())?;
        check("out_connect cols", m, out_connect.cols())?;
        check("out_bias length", out_connect.rows(), out_bias.len())?;
        let net = Self {
            in_connect,
            mesh_connect,
            mesh_bias,
            out_connect,
            out_bias,
            settle_steps,
        };
        net.dims().validate()?;
        if !net.is_finite() {
            return Err(Error::InvalidInput("network weights must be finite".into()));
        }
        Ok(net)
    }

    /// A network with every weight and bias zero.
    pub fn zeros(dims: Dims) -> Self {
        Self {
            in_connect: Matrix::zeros(dims.mesh, dims.input),
            mesh_connect: Matrix::zeros(dims.mesh, dims.mesh),
            mesh_bias: vec![0.0; dims.mesh],
            out_connect: Matrix::zeros(dims.classes, dims.mesh),
            out_bias: vec![0.0; dims.classes],
            settle_steps: dims.settle_steps,
        }
    }

    pub fn dims(&self) -> Dims {
        Dims {
            input: self.in_connect.cols(),
            mesh: self.in_connect.rows(),
            classes: self.out_connect.rows(),
            settle_steps: self.settle_steps,
        }
    }

    pub fn in_connect(&self) -> &Matrix {
        &self.in_connect
    }

    pub fn mesh_connect(&self) -> &Matrix {
        &self.mesh_connect
    }

    pub fn mesh_bias(&self) -> &[f64] {
        &self.mesh_bias
    }

    pub fn out_connect(&self) -> &Matrix {
        &self.out_connect
    }

    pub fn out_bias(&self) -> &[f64] {
        &self.out_bias
    }

    pub fn settle_steps(&self) -> usize {
        self.settle_steps
    }

    /// The five parameter tensors in storage order.
    pub fn tensors(&self) -> [&[f64]; 5] {
        [
            self.in_connect.as_slice(),
            self.mesh_connect.as_slice(),
            &self.mesh_bias,
            self.out_connect.as_slice(),
            &self.out_bias,
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut [f64]; 5] {
        [
            self.in_connect.as_mut_slice(),
            self.mesh_connect.as_mut_slice(),
            &mut self.mesh_bias,
            self.out_connect.as_mut_slice(),
            &mut self.out_bias,
        ]
    }

    pub(crate) fn parts_mut(
        &mut self,
    ) -> (&mut Matrix, &mut Matrix, &mut Vec<f64>, &mut Matrix, &mut Vec<f64>) {
        (
            &mut self.in_connect,
            &mut self.mesh_connect,
            &mut self.mesh_bias,
            &mut self.out_connect,
            &mut self.out_bias,
        )
    }

    pub(crate) fn set_settle_steps(&mut self, steps: usize) {
        self.settle_steps = steps;
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.in_connect.cols() {
            return Err(Error::DimensionMismatch {
                context: "input vector",
                expected: self.in_connect.cols(),
                found: x.len(),
            });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("input entry {i} is not finite")));
        }
        Ok(())
    }

    /// Runs `steps` settle iterations from the zero state and returns every
    /// intermediate state `h_1 ..= h_steps`.
    pub fn settle_trajectory(&self, x: &[f64], steps: usize) -> Result<Vec<HiddenState>> {
        self.check_input(x)?;
        let mut drive = vec![0.0; self.mesh_bias.len()];
        self.in_connect.affine_into(x, &self.mesh_bias, &mut drive);
        let mut h = vec![0.0; drive.len()];
        let mut z = vec![0.0; drive.len()];
        let mut out = Vec::with_capacity(steps);
        for t in 0..steps {
            self.settle_step(&drive, &h, &mut z, t == 0)?;
            for (hi, &zi) in h.iter_mut().zip(&z) {
                *hi = sigmoid(zi);
            }
            out.push(HiddenState {
                activations: h.clone(),
            });
        }
        Ok(out)
    }

    fn settle_step(&self, drive: &[f64], h: &[f64], z: &mut [f64], from_zero: bool) -> Result<()> {
        if from_zero {
            // mesh_connect · 0 contributes nothing.
            z.copy_from_slice(drive);
        } else {
            for (r, zr) in z.iter_mut().enumerate() {
                *zr = drive[r] + dot(self.mesh_connect.row(r), h);
            }
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow("mesh pre-activation is not finite".into()));
        }
        Ok(())
    }

    /// Hidden state after `settle_steps` iterations.
    pub fn settle(&self, x: &[f64]) -> Result<HiddenState> {
        self.check_input(x)?;
        let mut drive = vec![0.0; self.mesh_bias.len()];
        self.in_connect.affine_into(x, &self.mesh_bias, &mut drive);
        let mut h = vec![0.0; drive.len()];
        let mut z = vec![0.0; drive.len()];
        for t in 0..self.settle_steps {
            self.settle_step(&drive, &h, &mut z, t == 0)?;
            for (hi, &zi) in h.iter_mut().zip(&z) {
                *hi = sigmoid(zi);
            }
        }
        Ok(HiddenState { activations: h })
    }

    /// Class scores read from a settled hidden state.
    pub fn readout(&self, hidden: &HiddenState) -> Result<Vec<f64>> {
        let mut z = vec![0.0; self.out_bias.len()];
        self.out_connect
            .affine_into(&hidden.activations, &self.out_bias, &mut z);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow("output pre-activation is not finite".into()));
        }
        Ok(z.into_iter().map(sigmoid).collect())
    }

    /// Class scores for input `x`, each strictly inside (0, 1).
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let hidden = self.settle(x)?;
        self.readout(&hidden)
    }

    pub fn serialize(&self) -> Vec<u8> {
        let dims = self.dims();
        let mut w = Writer::with_magic(MESH_MAGIC, dims.serialized_len());
        for v in [dims.input, dims.mesh, dims.classes, dims.settle_steps] {
            w.u32(v as u32);
        }
        for t in self.tensors() {
            w.f64s(t);
        }
        w.finish()
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::expect_magic(bytes, MESH_MAGIC)?;
        let dims = Dims {
            input: r.u32()? as usize,
            mesh: r.u32()? as usize,
            classes: r.u32()? as usize,
            settle_steps: r.u32()? as usize,
        };
        dims.validate()
            .map_err(|e| FormatError::InconsistentHeader(e.to_string()))?;
        r.expect_remaining(dims.param_count())?;
        let in_connect = Matrix::from_vec(dims.mesh, dims.input, r.f64s(dims.mesh * dims.input)?);
        let mesh_connect = Matrix::from_vec(dims.mesh, dims.mesh, r.f64s(dims.mesh * dims.mesh)?);
        let mesh_bias = r.f64s(dims.mesh)?;
        let out_connect = Matrix::from_vec(dims.classes, dims.mesh, r.f64s(dims.classes * dims.mesh)?);
        let out_bias = r.f64s(dims.classes)?;
        Self::new(
            in_connect.expect("sized by header"),
            mesh_connect.expect("sized by header"),
            mesh_bias,
            out_connect.expect("sized by header"),
            out_bias,
            dims.settle_steps,
        )
    }

    /// 64-bit FNV-1a digest of the serialized network, used to identify
    /// individuals in evolution traces.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        feed(&(self.settle_steps as u64).to_le_bytes());
        for t in self.tensors() {
            for v in t {
                feed(&v.to_bits().to_le_bytes());
            }
        }
        h
    }
}

impl Classifier for MeshNetwork {
    fn input_dim(&self) -> usize {
        self.in_connect.cols()
    }

    fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward(x)
    }
}
