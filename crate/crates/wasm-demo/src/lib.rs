//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Three operations are exposed: generating a connectome-style wiring for a
//! heatmap, stepping a small genetic algorithm on Gaussian blobs, and
//! evaluating the rank-decay page weighting.

use mnn_core::bias_report::{rank_normalize, DayPage};
use mnn_core::dataset::{split, Dataset};
use mnn_core::evolution::{EvolutionConfig, GeneticAlgorithm, Population};
use mnn_core::synthetic::{gaussian_blobs, BlobSpec};
use mnn_core::topology::{gen_celegans, layer_violations, mesh_density, orphan_count, CElegansSpec};
use mnn_core::{Classifier, Dims, MeshNetwork};
use wasm_bindgen::prelude::*;

fn js_err(e: mnn_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// A generated four-layer wiring.
#[wasm_bindgen]
pub struct Wiring {
    size: usize,
    weights: Vec<f64>,
    layer_ends: Vec<u32>,
    density: f64,
    violations: usize,
    orphans: usize,
}

#[wasm_bindgen]
impl Wiring {
    /// Neurons per side of the square mesh matrix.
    #[wasm_bindgen(getter)]
    pub fn size(&self) -> usize {
        self.size
    }

    /// Row-major mesh weights, rows are targets.
    pub fn weights(&self) -> Vec<f64> {
        self.weights.clone()
    }

    /// Exclusive end index of each of the four layers.
    #[wasm_bindgen(js_name = layerEnds)]
    pub fn layer_ends(&self) -> Vec<u32> {
        self.layer_ends.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn density(&self) -> f64 {
        self.density
    }

    #[wasm_bindgen(getter)]
    pub fn violations(&self) -> usize {
        self.violations
    }

    #[wasm_bindgen(getter)]
    pub fn orphans(&self) -> usize {
        self.orphans
    }
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen(js_name = celegansWiring)]
pub fn celegans_wiring_js(
    sensory: usize,
    inter: usize,
    command: usize,
    motor: usize,
    p1: f64,
    p3: f64,
    p4: f64,
    seed: u32,
) -> Result<Wiring, JsError> {
    celegans_wiring(sensory, inter, command, motor, p1, p3, p4, seed.into()).map_err(js_err)
}

#[allow(clippy::too_many_arguments)]
pub fn celegans_wiring(
    sensory: usize,
    inter: usize,
    command: usize,
    motor: usize,
    p1: f64,
    p3: f64,
    p4: f64,
    seed: u64,
) -> mnn_core::Result<Wiring> {
    let spec = CElegansSpec {
        sensory,
        inter,
        command,
        motor,
        p1,
        p3,
        p4,
        seed,
        ..CElegansSpec::default()
    };
    let size = spec.total_neurons();
    let dims = Dims::new(sensory.max(1), size, 3, 4);
    let (net, _) = gen_celegans(&spec, dims)?;
    Ok(Wiring {
        size,
        weights: net.mesh_connect().as_slice().to_vec(),
        layer_ends: spec.layers().iter().map(|r| r.end as u32).collect(),
        density: mesh_density(&net),
        violations: layer_violations(&net, &spec),
        orphans: orphan_count(&net, &spec),
    })
}

/// A genetic algorithm advanced a few generations at a time.
#[wasm_bindgen]
pub struct GaDemo {
    ga: GeneticAlgorithm,
    population: Option<Population>,
    train: Dataset,
    val: Dataset,
    test: Dataset,
    generation: usize,
    best: Vec<f64>,
    mean: Vec<f64>,
}

impl GaDemo {
    fn record(&mut self) {
        let pop = self.population.as_ref().expect("population present");
        let fits: Vec<f64> = pop.individuals().iter().filter_map(|i| i.fitness).collect();
        self.best.push(fits.iter().copied().fold(0.0, f64::max));
        self.mean.push(fits.iter().sum::<f64>() / fits.len() as f64);
    }
}

impl GaDemo {
    #[allow(clippy::too_many_arguments)]
    pub fn create(
        seed: u64,
        dim: usize,
        mesh: usize,
        per_class: usize,
        separation: f64,
        mutation_count: usize,
        mutation_std: f64,
        random_std: f64,
    ) -> mnn_core::Result<GaDemo> {
        let data = gaussian_blobs(&BlobSpec {
            per_class,
            dim,
            separation,
            noise: 1.0,
            seed,
        })?;
        let (train, val, test) = split(&data, [0.6, 0.2, 0.2], seed)?;
        let config = EvolutionConfig {
            mutation_count,
            mutation_std,
            random_std,
            seed,
            ..EvolutionConfig::default()
        };
        let ga = GeneticAlgorithm::new(config, Dims::new(dim, mesh, 3, 4))?;
        let mut population = ga.init_population(Vec::new())?;
        population.evaluate(&|net: &MeshNetwork| net.accuracy(&val))?;
        let mut demo = GaDemo {
            ga,
            population: Some(population),
            train,
            val,
            test,
            generation: 0,
            best: Vec::new(),
            mean: Vec::new(),
        };
        demo.record();
        Ok(demo)
    }

    pub fn advance(&mut self, n: usize) -> mnn_core::Result<f64> {
        for _ in 0..n {
            let pop = self.population.take().expect("population present");
            let fitness = |net: &MeshNetwork| net.accuracy(&self.val);
            let mut next = self.ga.step_generation(pop, &fitness, self.generation + 1)?;
            next.evaluate(&fitness)?;
            self.population = Some(next);
            self.generation += 1;
            self.record();
        }
        Ok(*self.best.last().expect("recorded"))
    }

    pub fn train_test(&self) -> mnn_core::Result<(f64, f64)> {
        let pop = self.population.as_ref().expect("population present");
        let best = pop.best().expect("non-empty population");
        Ok((
            best.network.accuracy(&self.train)?,
            best.network.accuracy(&self.test)?,
        ))
    }
}

#[wasm_bindgen]
impl GaDemo {
    #[allow(clippy::too_many_arguments)]
    #[wasm_bindgen(constructor)]
    pub fn new(
        seed: u32,
        dim: usize,
        mesh: usize,
        per_class: usize,
        separation: f64,
        mutation_count: usize,
        mutation_std: f64,
        random_std: f64,
    ) -> Result<GaDemo, JsError> {
        Self::create(
            seed.into(),
            dim,
            mesh,
            per_class,
            separation,
            mutation_count,
            mutation_std,
            random_std,
        )
        .map_err(js_err)
    }

    /// Advances `n` generations and returns the current best validation
    /// accuracy.
    pub fn step(&mut self, n: usize) -> Result<f64, JsError> {
        self.advance(n).map_err(js_err)
    }

    #[wasm_bindgen(getter)]
    pub fn generation(&self) -> usize {
        self.generation
    }

    #[wasm_bindgen(js_name = bestHistory)]
    pub fn best_history(&self) -> Vec<f64> {
        self.best.clone()
    }

    #[wasm_bindgen(js_name = meanHistory)]
    pub fn mean_history(&self) -> Vec<f64> {
        self.mean.clone()
    }

    /// Train and test accuracy of the current best individual.
    #[wasm_bindgen(js_name = bestTrainTest)]
    pub fn best_train_test(&self) -> Result<Vec<f64>, JsError> {
        let (train, test) = self.train_test().map_err(js_err)?;
        Ok(vec![train, test])
    }
}

/// Weight decay^(r-1) of each rank 1..=n.
#[wasm_bindgen(js_name = rankWeights)]
pub fn rank_weights(decay: f64, n: usize) -> Vec<f64> {
    (0..n).map(|r| decay.powi(r as i32)).collect()
}

/// Rank-normalized score of a page (scores in rank order) at each decay.
#[wasm_bindgen(js_name = rankDecayCurve)]
pub fn rank_decay_curve_js(scores: Vec<f64>, decays: Vec<f64>) -> Result<Vec<f64>, JsError> {
    rank_decay_curve(&scores, &decays).map_err(js_err)
}

pub fn rank_decay_curve(scores: &[f64], decays: &[f64]) -> mnn_core::Result<Vec<f64>> {
    let entries = scores
        .iter()
        .enumerate()
        .map(|(i, &s)| (i as u32 + 1, s))
        .collect();
    let page = DayPage::new("page", "day", entries)?;
    decays.iter().map(|&d| rank_normalize(&page, d)).collect()
}
