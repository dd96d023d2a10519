//! Seed networks and the structure masks that confine their evolution.
//!
//! Three constructions are provided:
//!
//! * [`random_mesh`]: every entry an independent signed half-normal draw.
//! * [`embed_mlp`]: an MLP's layers laid out as blocks of the mesh so that
//!   the settling recurrence reproduces the MLP forward pass exactly.
//! * [`gen_celegans`]: a sparse four-layer wiring (sensory, inter, command,
//!   motor) with recurrent command neurons.

use std::ops::Range;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::mesh::{Dims, MeshNetwork};
use crate::mlp::Mlp;
use crate::{rng, Error, Result};

/// Per-entry evolvability flags, one boolean tensor per network tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureMask {
    dims: Dims,
    tensors: [Vec<bool>; 5],
}

impl StructureMask {
    fn filled(dims: Dims, value: bool) -> Self {
        Self {
            dims,
            tensors: dims.tensor_lens().map(|n| vec![value; n]),
        }
    }

    /// Every entry evolvable: unconstrained evolution.
    pub fn all(dims: Dims) -> Self {
        Self::filled(dims, true)
    }

    pub fn none(dims: Dims) -> Self {
        Self::filled(dims, false)
    }

    /// Marks exactly the nonzero entries of `net` as evolvable.
    pub fn support_of(net: &MeshNetwork) -> Self {
        Self {
            dims: net.dims(),
            tensors: net.tensors().map(|t| t.iter().map(|&v| v != 0.0).collect()),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn tensors(&self) -> &[Vec<bool>; 5] {
        &self.tensors
    }

    pub fn is_all_true(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|&b| b))
    }

    pub fn evolvable_count(&self) -> usize {
        self.tensors
            .iter()
            .map(|t| t.iter().filter(|&&b| b).count())
            .sum()
    }

    pub fn mesh_connect(&self, target: usize, source: usize) -> bool {
        self.tensors[1][target * self.dims.mesh + source]
    }

    /// True when the mask has the same tensor shapes as `net`.
    pub fn congruent_with(&self, net: &MeshNetwork) -> bool {
        self.dims.tensor_lens() == net.dims().tensor_lens()
            && self.dims.input == net.dims().input
            && self.dims.mesh == net.dims().mesh
    }

    fn check_congruent(&self, other: &Dims) -> Result<()> {
        let d = &self.dims;
        for (context, expected, found) in [
            ("mask input width", d.input, other.input),
            ("mask mesh size", d.mesh, other.mesh),
            ("mask class count", d.classes, other.classes),
        ] {
            if expected != found {
                return Err(Error::DimensionMismatch {
                    context,
                    expected,
                    found,
                });
            }
        }
        Ok(())
    }

    /// Entrywise OR.
    pub fn union(&self, other: &StructureMask) -> Result<StructureMask> {
        self.check_congruent(&other.dims)?;
        let mut out = self.clone();
        for (a, b) in out.tensors.iter_mut().zip(&other.tensors) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x |= y;
            }
        }
        Ok(out)
    }

    /// Zeroes every entry of `net` outside the mask.
    pub fn apply(&self, net: &mut MeshNetwork) -> Result<()> {
        self.check_congruent(&net.dims())?;
        for (t, m) in net.tensors_mut().into_iter().zip(&self.tensors) {
            for (v, &keep) in t.iter_mut().zip(m) {
                if !keep {
                    *v = 0.0;
                }
            }
        }
        Ok(())
    }
}

/// The six network configurations. `Mlp` is trained by backprop; the other
/// five are mesh seeds evolved by the genetic algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    Mlp,
    RandomMesh,
    DnnSeeded,
    CelegansRigid,
    CelegansSeeded,
    CelegansDnnSeeded,
}

impl NetworkKind {
    pub fn needs_mlp(self) -> bool {
        matches!(self, NetworkKind::DnnSeeded | NetworkKind::CelegansDnnSeeded)
    }

    pub fn needs_celegans(self) -> bool {
        matches!(
            self,
            NetworkKind::CelegansRigid | NetworkKind::CelegansSeeded | NetworkKind::CelegansDnnSeeded
        )
    }
}

/// Parameters of Bernoulli-polarity random meshes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedSpec {
    /// Probability of a positive sign, one per tensor in storage order.
    pub polarity: [f64; 5],
    /// Scale of the half-normal weight magnitudes.
    pub sigma_rand: f64,
    pub seed: u64,
}

impl Default for SeedSpec {
    fn default() -> Self {
        Self {
            polarity: [0.5; 5],
            sigma_rand: 0.2,
            seed: 0,
        }
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {p} is not in [0, 1]")))
    }
}

fn check_std(name: &str, s: f64) -> Result<()> {
    if s.is_finite() && s > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {s} must be > 0")))
    }
}

impl SeedSpec {
    pub fn validate(&self) -> Result<()> {
        for (i, &p) in self.polarity.iter().enumerate() {
            check_probability(&format!("polarity[{i}]"), p)?;
        }
        check_std("sigma_rand", self.sigma_rand)
    }
}

/// Signed half-normal draw: `+|N(0, σ)|` with probability `p_positive`.
#[inline]
fn signed_magnitude<R: Rng + ?Sized>(rng: &mut R, p_positive: f64, sigma: f64) -> f64 {
    let sign = if rng.random_bool(p_positive) { 1.0 } else { -1.0 };
    let z: f64 = StandardNormal.sample(rng);
    sign * (z * sigma).abs()
}

/// Like [`signed_magnitude`] but never exactly zero, so that generated
/// synapses always show up in the nonzero support.
fn synapse<R: Rng + ?Sized>(rng: &mut R, p_positive: f64, sigma: f64) -> f64 {
    loop {
        let w = signed_magnitude(rng, p_positive, sigma);
        if w != 0.0 {
            return w;
        }
    }
}

/// Fills `net` with signed half-normal entries drawn from `rng`.
pub(crate) fn fill_random<R: Rng + ?Sized>(
    net: &mut MeshNetwork,
    polarity: &[f64; 5],
    sigma: f64,
    rng: &mut R,
) {
    for (t, &p) in net.tensors_mut().into_iter().zip(polarity) {
        for v in t.iter_mut() {
            *v = signed_magnitude(rng, p, sigma);
        }
    }
}

/// A fully connected random mesh with Bernoulli polarities.
pub fn random_mesh(dims: Dims, spec: &SeedSpec) -> Result<MeshNetwork> {
    dims.validate()?;
    spec.validate()?;
    let mut net = MeshNetwork::zeros(dims);
    fill_random(&mut net, &spec.polarity, spec.sigma_rand, &mut rng::stream(spec.seed, &[0x7a4d]));
    Ok(net)
}

/// Lays an MLP out inside a mesh.
///
/// Hidden layer `l` occupies a contiguous block of mesh neurons. The first
/// hidden layer reads the input through `in_connect`; each later layer reads
/// the previous block through the sub-diagonal block of `mesh_connect`; the
/// output reads the last block. With one settle step per hidden layer the
/// mesh reproduces the MLP's output. The returned mask is all-true.
pub fn embed_mlp(mlp: &Mlp, dims: Dims) -> Result<(MeshNetwork, StructureMask)> {
    let hidden = mlp.hidden_sizes();
    if hidden.is_empty() {
        return Err(Error::InvalidParameter(
            "an MLP without hidden layers cannot be embedded".into(),
        ));
    }
    let total: usize = hidden.iter().sum();
    for (context, expected, found) in [
        ("sum of MLP hidden sizes vs mesh size", dims.mesh, total),
        ("MLP input vs input width", dims.input, mlp.layer_sizes()[0]),
        ("MLP output vs class count", dims.classes, mlp.output_dim()),
    ] {
        if expected != found {
            return Err(Error::DimensionMismatch {
                context,
                expected,
                found,
            });
        }
    }
    let dims = Dims {
        settle_steps: hidden.len(),
        ..dims
    };
    dims.validate()?;
    let mut net = MeshNetwork::zeros(dims);
    let offsets: Vec<usize> = hidden
        .iter()
        .scan(0, |acc, &n| {
            let start = *acc;
            *acc += n;
            Some(start)
        })
        .collect();
    let weights = mlp.weights();
    let biases = mlp.biases();
    let last = hidden.len() - 1;
    {
        let (in_connect, mesh_connect, mesh_bias, out_connect, out_bias) = net.parts_mut();
        for r in 0..hidden[0] {
            in_connect.row_mut(r).copy_from_slice(weights[0].row(r));
        }
        for l in 0..hidden.len() {
            mesh_bias[offsets[l]..offsets[l] + hidden[l]].copy_from_slice(&biases[l]);
        }
        for l in 1..hidden.len() {
            let w = &weights[l];
            for r in 0..hidden[l] {
                let row = &mut mesh_connect.row_mut(offsets[l] + r)
                    [offsets[l - 1]..offsets[l - 1] + hidden[l - 1]];
                row.copy_from_slice(w.row(r));
            }
        }
        let w_out = &weights[last + 1];
        for r in 0..dims.classes {
            out_connect.row_mut(r)[offsets[last]..offsets[last] + hidden[last]]
                .copy_from_slice(w_out.row(r));
        }
        out_bias.copy_from_slice(&biases[last + 1]);
    }
    Ok((net, StructureMask::all(dims)))
}

/// Layer sizes and connection probabilities of a four-layer wiring.
///
/// * `p1`: fan-out probability between consecutive layers,
/// * `p2`: probability that a synapse is excitatory,
/// * `p3`: fan-in probability when covering neurons left without input,
/// * `p4`: recurrence probability among command neurons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CElegansSpec {
    pub sensory: usize,
    pub inter: usize,
    pub command: usize,
    pub motor: usize,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    /// Scale of the half-normal synapse magnitudes.
    pub weight_std: f64,
    pub seed: u64,
}

impl Default for CElegansSpec {
    /// Classifier-scale layout filling a 240-neuron mesh; probabilities give
    /// roughly 9% nonzero mesh connections.
    fn default() -> Self {
        Self {
            sensory: 64,
            inter: 64,
            command: 48,
            motor: 64,
            p1: 0.4,
            p2: 0.5,
            p3: 0.2,
            p4: 0.5,
            weight_std: 0.2,
            seed: 0,
        }
    }
}

impl CElegansSpec {
    /// Touch-circuit neuron counts of the worm itself: six receptors, five
    /// interneuron pairs and 69 motor neurons.
    pub fn worm() -> Self {
        Self {
            sensory: 6,
            inter: 10,
            command: 10,
            motor: 69,
            ..Self::default()
        }
    }

    pub fn total_neurons(&self) -> usize {
        self.sensory + self.inter + self.command + self.motor
    }

    /// Mesh index ranges of the sensory, inter, command and motor layers.
    pub fn layers(&self) -> [Range<usize>; 4] {
        let a = self.sensory;
        let b = a + self.inter;
        let c = b + self.command;
        let d = c + self.motor;
        [0..a, a..b, b..c, c..d]
    }

    pub fn validate(&self, dims: &Dims) -> Result<()> {
        for (name, n) in [
            ("sensory", self.sensory),
            ("inter", self.inter),
            ("command", self.command),
            ("motor", self.motor),
        ] {
            if n == 0 {
                return Err(Error::InvalidParameter(format!("{name} layer must be non-empty")));
            }
        }
        if self.total_neurons() > dims.mesh {
            return Err(Error::InvalidParameter(format!(
                "layers need {} neurons but the mesh has {}",
                self.total_neurons(),
                dims.mesh
            )));
        }
        for (name, p) in [("p1", self.p1), ("p2", self.p2), ("p3", self.p3), ("p4", self.p4)] {
            check_probability(name, p)?;
        }
        check_std("weight_std", self.weight_std)
    }
}

/// Generates a four-layer wiring and its rigid mask (the generated support).
///
/// * Between consecutive layers every source draws a fan-out count from
///   `Binomial(N_target, p1)` and connects to that many distinct targets
///   chosen uniformly.
/// * Every target left without input from the previous layer then receives
///   synapses from `max(1, Binomial(N_source, p3))` distinct sources.
/// * Every command neuron connects to `Binomial(N_command, p4)` command
///   neurons chosen uniformly.
/// * Signs are excitatory with probability `p2`; magnitudes are half-normal.
/// * The input feeds sensory neurons only and the output reads motor neurons
///   only. Neurons beyond the four layers stay zero.
pub fn gen_celegans(spec: &CElegansSpec, dims: Dims) -> Result<(MeshNetwork, StructureMask)> {
    dims.validate()?;
    spec.validate(&dims)?;
    let mut rng = rng::stream(spec.seed, &[0xce1e]);
    let rng = &mut rng;
    let (p2, sigma) = (spec.p2, spec.weight_std);
    let [sensory, inter, command, motor] = spec.layers();

    let mut net = MeshNetwork::zeros(dims);
    {
        let (in_connect, mesh, mesh_bias, out_connect, out_bias) = net.parts_mut();

        for (src, tgt) in [
            (sensory.clone(), inter.clone()),
            (inter.clone(), command.clone()),
            (command.clone(), motor.clone()),
        ] {
            let (ns, nt) = (src.len(), tgt.len());
            let fan_out = Binomial::new(nt as u64, spec.p1).expect("validated probability");
            for s in src.clone() {
                let n = fan_out.sample(rng) as usize;
                for t in index::sample(rng, nt, n) {
                    mesh.set(tgt.start + t, s, synapse(rng, p2, sigma));
                }
            }
            let fan_in = Binomial::new(ns as u64, spec.p3).expect("validated probability");
            for t in tgt.clone() {
                if mesh.row(t)[src.clone()].iter().any(|&w| w != 0.0) {
                    continue;
                }
                let m = (fan_in.sample(rng) as usize).max(1);
                for s in index::sample(rng, ns, m) {
                    mesh.set(t, src.start + s, synapse(rng, p2, sigma));
                }
            }
        }

        let nc = command.len();
        let recur = Binomial::new(nc as u64, spec.p4).expect("validated probability");
        for c in command.clone() {
            let l = recur.sample(rng) as usize;
            for t in index::sample(rng, nc, l) {
                mesh.set(command.start + t, c, synapse(rng, p2, sigma));
            }
        }

        for r in sensory.clone() {
            for v in in_connect.row_mut(r) {
                *v = synapse(rng, p2, sigma);
            }
        }
        for v in &mut mesh_bias[..spec.total_neurons()] {
            *v = synapse(rng, p2, sigma);
        }
        for r in 0..dims.classes {
            for v in &mut out_connect.row_mut(r)[motor.clone()] {
                *v = synapse(rng, p2, sigma);
            }
        }
        for v in out_bias.iter_mut() {
            *v = synapse(rng, p2, sigma);
        }
    }
    let mask = StructureMask::support_of(&net);
    Ok((net, mask))
}

/// Mesh connections that break the layer discipline: anything other than
/// sensory→inter, inter→command, command→motor and command→command.
pub fn layer_violations(net: &MeshNetwork, spec: &CElegansSpec) -> usize {
    let layers = spec.layers();
    let layer_of = |i: usize| layers.iter().position(|r| r.contains(&i));
    let mesh = net.mesh_connect();
    let mut count = 0;
    for t in 0..mesh.rows() {
        for s in 0..mesh.cols() {
            if mesh.get(t, s) == 0.0 {
                continue;
            }
            let ok = matches!(
                (layer_of(s), layer_of(t)),
                (Some(0), Some(1)) | (Some(1), Some(2)) | (Some(2), Some(3)) | (Some(2), Some(2))
            );
            if !ok {
                count += 1;
            }
        }
    }
    count
}

/// Inter, command and motor neurons without any synapse from the preceding layer.
pub fn orphan_count(net: &MeshNetwork, spec: &CElegansSpec) -> usize {
    let layers = spec.layers();
    let mesh = net.mesh_connect();
    (1..4)
        .map(|l| {
            layers[l]
                .clone()
                .filter(|&t| mesh.row(t)[layers[l - 1].clone()].iter().all(|&w| w == 0.0))
                .count()
        })
        .sum()
}

/// Nonzero fraction of `mesh_connect`.
pub fn mesh_density(net: &MeshNetwork) -> f64 {
    let m = net.mesh_connect();
    m.count_nonzero() as f64 / (m.rows() * m.cols()) as f64
}

/// Initial individuals for one run plus the mask applied to fresh random
/// individuals.
#[derive(Debug, Clone)]
pub struct SeedPlan {
    pub seeds: Vec<(MeshNetwork, StructureMask)>,
    pub template: StructureMask,
}

/// Assembles the seeds for a mesh configuration.
///
/// The rigid variant constrains every individual, fresh random ones
/// included, to the generated wiring; the seeded variants start from the
/// same wiring with every entry evolvable.
pub fn seed_plan(
    kind: NetworkKind,
    dims: Dims,
    celegans: &CElegansSpec,
    mlp: Option<&Mlp>,
) -> Result<SeedPlan> {
    dims.validate()?;
    let all = StructureMask::all(dims);
    let embedded = || -> Result<(MeshNetwork, StructureMask)> {
        let mlp = mlp.ok_or_else(|| {
            Error::InvalidParameter(format!("{kind:?} needs a trained MLP seed"))
        })?;
        let (mut net, mask) = embed_mlp(mlp, dims)?;
        // The whole population shares one settle count.
        if net.settle_steps() != dims.settle_steps {
            net.set_settle_steps(dims.settle_steps);
        }
        Ok((net, mask))
    };
    let plan = match kind {
        NetworkKind::Mlp => {
            return Err(Error::InvalidParameter(
                "the mlp configuration is trained by backprop, not evolved".into(),
            ))
        }
        NetworkKind::RandomMesh => SeedPlan {
            seeds: vec![],
            template: all,
        },
        NetworkKind::DnnSeeded => SeedPlan {
            seeds: vec![embedded()?],
            template: all,
        },
        NetworkKind::CelegansRigid => {
            let (net, mask) = gen_celegans(celegans, dims)?;
            SeedPlan {
                seeds: vec![(net, mask.clone())],
                template: mask,
            }
        }
        NetworkKind::CelegansSeeded => {
            let (net, _) = gen_celegans(celegans, dims)?;
            SeedPlan {
                seeds: vec![(net, all.clone())],
                template: all,
            }
        }
        NetworkKind::CelegansDnnSeeded => {
            let (net, _) = gen_celegans(celegans, dims)?;
            SeedPlan {
                seeds: vec![(net, all.clone()), embedded()?],
                template: all,
            }
        }
    };
    Ok(plan)
}
