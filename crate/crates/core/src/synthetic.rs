//! Gaussian-blob datasets for desk-scale experiments.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Sample};
use crate::{rng, Error, Label, Result, NUM_CLASSES};

const STREAM_BLOBS: u64 = 0xb10b;

/// Three classes around random centres. Each centre has norm `separation`;
/// the noise has per-coordinate standard deviation `noise / sqrt(dim)`, so
/// its expected norm is about `noise` whatever the dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobSpec {
    pub per_class: usize,
    pub dim: usize,
    pub separation: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            per_class: 100,
            dim: 512,
            separation: 2.0,
            noise: 1.0,
            seed: 0,
        }
    }
}

fn unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Samples are interleaved by class: ids `blob-0`, `blob-1`, … cycle through
/// labels -1, 0, +1.
pub fn gaussian_blobs(spec: &BlobSpec) -> Result<Dataset> {
    if spec.per_class == 0 || spec.dim == 0 {
        return Err(Error::InvalidParameter(
            "blob per_class and dim must be >= 1".into(),
        ));
    }
    if !(spec.separation.is_finite() && spec.separation >= 0.0)
        || !(spec.noise.is_finite() && spec.noise >= 0.0)
    {
        return Err(Error::InvalidParameter(
            "blob separation and noise must be finite and >= 0".into(),
        ));
    }
    let mut rng = rng::stream(spec.seed, &[STREAM_BLOBS]);
    let centres: Vec<Vec<f64>> = (0..NUM_CLASSES)
        .map(|_| {
            unit_vector(spec.dim, &mut rng)
                .into_iter()
                .map(|x| x * spec.separation)
                .collect()
        })
        .collect();
    let scale = spec.noise / (spec.dim as f64).sqrt();
    let mut samples = Vec::with_capacity(spec.per_class * NUM_CLASSES);
    for i in 0..spec.per_class * NUM_CLASSES {
        let class = i % NUM_CLASSES;
        let embedding = centres[class]
            .iter()
            .map(|c| {
                let z: f64 = StandardNormal.sample(&mut rng);
                c + scale * z
            })
            .collect();
        let label = Label::from_index(class).expect("class index below NUM_CLASSES");
        samples.push(Sample::new(format!("blob-{i}"), label, embedding));
    }
    Dataset::new(spec.dim, samples)
}
