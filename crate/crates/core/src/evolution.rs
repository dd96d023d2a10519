//! Genetic algorithm over mesh networks, and the hyperparameter sweep.
//!
//! One generation step:
//!
//! 1. evaluate every individual without a fitness;
//! 2. carry the `elite_count` best forward unchanged;
//! 3. breed `breed_count` children from uniformly chosen elite pairs, each
//!    child then mutated;
//! 4. carry `diversity_count` individuals drawn uniformly from the pool
//!    ranked below both the elites and the top decile;
//! 5. fill the remainder with fresh random networks.
//!
//! Every random choice draws from a stream keyed by (run seed, purpose,
//! generation, slot), so results do not depend on evaluation order or on
//! the number of worker threads.

use std::io::Write;
use std::time::Instant;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Geometric, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::mesh::{Classifier, Dims, MeshNetwork};
use crate::topology::{fill_random, SeedPlan, StructureMask};
use crate::{rng, Error, Result};

const STREAM_FRESH: u64 = 0xf4e5;
const STREAM_BREED: u64 = 0xb4ee;
const STREAM_DIVERSITY: u64 = 0xd1e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub elite_count: usize,
    pub breed_count: usize,
    pub diversity_count: usize,
    /// Expected number of mutated entries per bred child.
    pub mutation_count: usize,
    pub mutation_std: f64,
    pub generations: usize,
    /// Weight scale of fresh random networks.
    pub random_std: f64,
    /// Probability of a positive sign for fresh random networks, per tensor.
    pub polarity: [f64; 5],
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            population_size: 50,
            elite_count: 10,
            breed_count: 20,
            diversity_count: 10,
            mutation_count: 40,
            mutation_std: 1.0,
            generations: 100,
            random_std: 0.2,
            polarity: [0.5; 5],
            seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.population_size == 0 {
            return bad("population_size must be >= 1".into());
        }
        let used = self.elite_count + self.breed_count + self.diversity_count;
        if used > self.population_size {
            return bad(format!(
                "elite_count + breed_count + diversity_count = {used} exceeds population_size {}",
                self.population_size
            ));
        }
        if self.breed_count > 0 && self.elite_count == 0 {
            return bad("breeding needs at least one elite".into());
        }
        for (name, s) in [("mutation_std", self.mutation_std), ("random_std", self.random_std)] {
            if !(s.is_finite() && s > 0.0) {
                return bad(format!("{name} must be > 0"));
            }
        }
        if let Some(p) = self.polarity.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return bad(format!("polarity {p} is not in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub network: MeshNetwork,
    pub mask: StructureMask,
    /// Accuracy in [0, 1], once evaluated.
    pub fitness: Option<f64>,
}

impl Individual {
    pub fn new(network: MeshNetwork, mask: StructureMask) -> Result<Self> {
        if !mask.congruent_with(&network) {
            return Err(Error::InvalidParameter(
                "mask shape differs from network shape".into(),
            ));
        }
        Ok(Self {
            network,
            mask,
            fitness: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    individuals: Vec<Individual>,
}

impl Population {
    pub fn from_individuals(individuals: Vec<Individual>) -> Self {
        Self { individuals }
    }

    pub fn individuals(&self) -> &[Individual] {
        &self.individuals
    }

    pub fn into_individuals(self) -> Vec<Individual> {
        self.individuals
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    /// Indices sorted by fitness, best first; ties keep insertion order and
    /// unevaluated individuals rank last.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.individuals.len()).collect();
        idx.sort_by(|&a, &b| {
            let fa = self.individuals[a].fitness.unwrap_or(f64::NEG_INFINITY);
            let fb = self.individuals[b].fitness.unwrap_or(f64::NEG_INFINITY);
            fb.total_cmp(&fa)
        });
        idx
    }

    pub fn best(&self) -> Option<&Individual> {
        self.ranking().first().map(|&i| &self.individuals[i])
    }

    /// Evaluates every individual whose fitness is unset.
    pub fn evaluate<F>(&mut self, fitness: &F) -> Result<()>
    where
        F: Fn(&MeshNetwork) -> Result<f64> + Sync,
    {
        let pending: Vec<usize> = (0..self.individuals.len())
            .filter(|&i| self.individuals[i].fitness.is_none())
            .collect();
        let eval = |&i: &usize| fitness(&self.individuals[i].network);
        #[cfg(feature = "parallel")]
        let scores: Vec<Result<f64>> = {
            use rayon::prelude::*;
            pending.par_iter().map(eval).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let scores: Vec<Result<f64>> = pending.iter().map(eval).collect();
        for (i, score) in pending.into_iter().zip(scores) {
            let score = score?;
            if !(0.0..=1.0).contains(&score) {
                return Err(Error::InvalidParameter(format!(
                    "fitness {score} is outside [0, 1]"
                )));
            }
            self.individuals[i].fitness = Some(score);
        }
        Ok(())
    }
}

/// Uniform crossover: every entry comes from the mother or the father with
/// probability ½. Masks combine by OR; the child is unevaluated.
pub fn breed<R: Rng + ?Sized>(
    mother: &Individual,
    father: &Individual,
    rng: &mut R,
) -> Result<Individual> {
    let (md, fd) = (mother.network.dims(), father.network.dims());
    if md.tensor_lens() != fd.tensor_lens() || md.input != fd.input || md.mesh != fd.mesh {
        return Err(Error::DimensionMismatch {
            context: "breeding parents",
            expected: md.param_count(),
            found: fd.param_count(),
        });
    }
    let mask = mother.mask.union(&father.mask)?;
    let mut child = mother.network.clone();
    let mut bits = 0u64;
    let mut left = 0u32;
    for (c, f) in child.tensors_mut().into_iter().zip(father.network.tensors()) {
        for (cv, &fv) in c.iter_mut().zip(f) {
            if left == 0 {
                bits = rng.random();
                left = 64;
            }
            if bits & 1 == 1 {
                *cv = fv;
            }
            bits >>= 1;
            left -= 1;
        }
    }
    Ok(Individual {
        network: child,
        mask,
        fitness: None,
    })
}

/// Adds `N(0, sigma)` noise to a Bernoulli selection of evolvable entries and
/// returns how many entries were touched.
///
/// The selection probability is `k / evolvable`, so `k` entries change on
/// average; each tensor gets its own independent selection.
pub fn mutate_in_place<R: Rng + ?Sized>(
    network: &mut MeshNetwork,
    mask: &StructureMask,
    k: usize,
    sigma: f64,
    rng: &mut R,
) -> usize {
    let evolvable = mask.evolvable_count();
    if k == 0 || evolvable == 0 {
        return 0;
    }
    let p = (k as f64 / evolvable as f64).min(1.0);
    let noise = Normal::new(0.0, sigma).expect("validated mutation std");
    let gaps = Geometric::new(p).expect("probability in (0, 1]");
    let mut touched = 0;
    for (values, flags) in network.tensors_mut().into_iter().zip(mask.tensors()) {
        let positions: Vec<usize>;
        let slots: &[usize] = if flags.iter().all(|&b| b) {
            &[]
        } else {
            positions = flags
                .iter()
                .enumerate()
                .filter_map(|(i, &b)| b.then_some(i))
                .collect();
            &positions
        };
        let n = if flags.iter().all(|&b| b) {
            values.len()
        } else {
            slots.len()
        };
        let mut pos = 0usize;
        loop {
            let gap = gaps.sample(rng);
            pos = match usize::try_from(gap).ok().and_then(|g| pos.checked_add(g)) {
                Some(p) if p < n => p,
                _ => break,
            };
            let at = if slots.is_empty() { pos } else { slots[pos] };
            values[at] += noise.sample(rng);
            touched += 1;
            pos += 1;
        }
    }
    touched
}

/// Returns a mutated copy of `ind` with its fitness cleared.
pub fn mutate<R: Rng + ?Sized>(ind: &Individual, k: usize, sigma: f64, rng: &mut R) -> Individual {
    let mut out = ind.clone();
    mutate_in_place(&mut out.network, &out.mask, k, sigma, rng);
    out.fitness = None;
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub elite_fingerprints: Vec<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvolutionTrace {
    pub records: Vec<GenerationRecord>,
}

impl EvolutionTrace {
    pub fn best_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best).collect()
    }

    /// Writes `generation,best,mean` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "generation,best,mean")?;
        for r in &self.records {
            writeln!(w, "{},{},{}", r.generation, r.best, r.mean)?;
        }
        Ok(())
    }
}

/// A configured genetic algorithm for one network shape.
#[derive(Debug, Clone)]
pub struct GeneticAlgorithm {
    config: EvolutionConfig,
    dims: Dims,
    template: StructureMask,
}

impl GeneticAlgorithm {
    pub fn new(config: EvolutionConfig, dims: Dims) -> Result<Self> {
        config.validate()?;
        dims.validate()?;
        Ok(Self {
            config,
            dims,
            template: StructureMask::all(dims),
        })
    }

    /// Restricts fresh random individuals to `template` (rigid runs).
    pub fn with_template(mut self, template: StructureMask) -> Result<Self> {
        let t = template.dims();
        if (t.input, t.mesh, t.classes) != (self.dims.input, self.dims.mesh, self.dims.classes) {
            return Err(Error::InvalidParameter(
                "template mask shape differs from run dimensions".into(),
            ));
        }
        self.template = template;
        Ok(self)
    }

    pub fn config(&self) -> &EvolutionConfig {
        &self.config
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    fn fresh(&self, generation: usize, slot: usize) -> Individual {
        let mut rng = rng::stream(
            self.config.seed,
            &[STREAM_FRESH, generation as u64, slot as u64],
        );
        let mut network = MeshNetwork::zeros(self.dims);
        fill_random(
            &mut network,
            &self.config.polarity,
            self.config.random_std,
            &mut rng,
        );
        if !self.template.is_all_true() {
            self.template
                .apply(&mut network)
                .expect("template congruent with dims");
        }
        Individual {
            network,
            mask: self.template.clone(),
            fitness: None,
        }
    }

    /// Seeds followed by fresh random individuals up to the population size.
    pub fn init_population(
        &self,
        seeds: impl IntoIterator<Item = (MeshNetwork, StructureMask)>,
    ) -> Result<Population> {
        let mut individuals = Vec::with_capacity(self.config.population_size);
        for (network, mask) in seeds {
            let d = network.dims();
            if (d.input, d.mesh, d.classes) != (self.dims.input, self.dims.mesh, self.dims.classes)
            {
                return Err(Error::DimensionMismatch {
                    context: "seed network parameter count",
                    expected: self.dims.param_count(),
                    found: d.param_count(),
                });
            }
            individuals.push(Individual::new(network, mask)?);
        }
        if individuals.len() > self.config.population_size {
            return Err(Error::InvalidParameter(format!(
                "{} seeds exceed population_size {}",
                individuals.len(),
                self.config.population_size
            )));
        }
        let start = individuals.len();
        for slot in start..self.config.population_size {
            individuals.push(self.fresh(0, slot));
        }
        Ok(Population { individuals })
    }

    /// Produces generation `generation` from its predecessor.
    pub fn step_generation<F>(
        &self,
        mut pop: Population,
        fitness: &F,
        generation: usize,
    ) -> Result<Population>
    where
        F: Fn(&MeshNetwork) -> Result<f64> + Sync,
    {
        if pop.is_empty() {
            return Err(Error::Empty("population"));
        }
        pop.evaluate(fitness)?;
        let cfg = &self.config;
        let ranking = pop.ranking();
        let n_elite = cfg.elite_count.min(ranking.len());
        let mut next = Vec::with_capacity(cfg.population_size);
        next.extend(ranking[..n_elite].iter().map(|&i| pop.individuals[i].clone()));

        let g = generation as u64;
        for j in 0..cfg.breed_count {
            let mut rng = rng::stream(cfg.seed, &[STREAM_BREED, g, j as u64]);
            let a = rng.random_range(0..n_elite);
            let b = if n_elite >= 2 {
                let b = rng.random_range(0..n_elite - 1);
                if b >= a {
                    b + 1
                } else {
                    b
                }
            } else {
                a
            };
            let mut child = breed(&next[a], &next[b], &mut rng)?;
            mutate_in_place(
                &mut child.network,
                &child.mask,
                cfg.mutation_count,
                cfg.mutation_std,
                &mut rng,
            );
            next.push(child);
        }

        // Diversity pool: everything ranked below the elites and the top decile.
        let decile = ranking.len().div_ceil(10);
        let pool = &ranking[n_elite.max(decile).min(ranking.len())..];
        let take = cfg.diversity_count.min(pool.len());
        let mut rng = rng::stream(cfg.seed, &[STREAM_DIVERSITY, g]);
        for i in index::sample(&mut rng, pool.len(), take) {
            next.push(pop.individuals[pool[i]].clone());
        }

        let filled = next.len();
        for slot in filled..cfg.population_size {
            next.push(self.fresh(generation, slot));
        }
        Ok(Population { individuals: next })
    }

    /// Runs the configured number of generations with an arbitrary fitness.
    pub fn run<F>(
        &self,
        seeds: impl IntoIterator<Item = (MeshNetwork, StructureMask)>,
        fitness: &F,
    ) -> Result<(Individual, EvolutionTrace)>
    where
        F: Fn(&MeshNetwork) -> Result<f64> + Sync,
    {
        let mut pop = self.init_population(seeds)?;
        pop.evaluate(fitness)?;
        let mut trace = EvolutionTrace::default();
        let mut best = pop.best().expect("non-empty population").clone();
        trace.records.push(self.record(&pop, 0));
        for generation in 1..=self.config.generations {
            pop = self.step_generation(pop, fitness, generation)?;
            pop.evaluate(fitness)?;
            trace.records.push(self.record(&pop, generation));
            let candidate = pop.best().expect("non-empty population");
            if candidate.fitness > best.fitness {
                best = candidate.clone();
            }
        }
        Ok((best, trace))
    }

    /// Evolves with validation accuracy as fitness.
    pub fn evolve(
        &self,
        seeds: impl IntoIterator<Item = (MeshNetwork, StructureMask)>,
        train: &Dataset,
        val: &Dataset,
    ) -> Result<(Individual, EvolutionTrace)> {
        for (name, ds) in [("training set", train), ("validation set", val)] {
            if ds.is_empty() {
                return Err(Error::Empty(name));
            }
            if ds.dim() != self.dims.input {
                return Err(Error::DimensionMismatch {
                    context: if name == "training set" {
                        "training set dimension"
                    } else {
                        "validation set dimension"
                    },
                    expected: self.dims.input,
                    found: ds.dim(),
                });
            }
        }
        self.run(seeds, &|net: &MeshNetwork| net.accuracy(val))
    }

    fn record(&self, pop: &Population, generation: usize) -> GenerationRecord {
        let ranking = pop.ranking();
        let fit = |i: usize| pop.individuals[i].fitness.unwrap_or(0.0);
        let mean = ranking.iter().map(|&i| fit(i)).sum::<f64>() / ranking.len() as f64;
        GenerationRecord {
            generation,
            best: fit(ranking[0]),
            mean,
            elite_fingerprints: ranking
                .iter()
                .take(self.config.elite_count)
                .map(|&i| pop.individuals[i].network.fingerprint())
                .collect(),
        }
    }
}

/// Free-function form of [`GeneticAlgorithm::init_population`] for
/// unconstrained runs.
pub fn init_population(
    seeds: Vec<(MeshNetwork, StructureMask)>,
    config: &EvolutionConfig,
    dims: Dims,
) -> Result<Population> {
    GeneticAlgorithm::new(*config, dims)?.init_population(seeds)
}

/// Evolves from a seed plan with validation accuracy as fitness.
pub fn evolve(
    plan: &SeedPlan,
    config: &EvolutionConfig,
    dims: Dims,
    train: &Dataset,
    val: &Dataset,
) -> Result<(Individual, EvolutionTrace)> {
    GeneticAlgorithm::new(*config, dims)?
        .with_template(plan.template.clone())?
        .evolve(plan.seeds.iter().cloned(), train, val)
}

// ---------------------------------------------------------------------------
// Sweep

/// Cartesian grid over the four swept parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub mutation_counts: Vec<usize>,
    pub mutation_stds: Vec<f64>,
    pub generations: Vec<usize>,
    pub random_stds: Vec<f64>,
}

impl SweepGrid {
    /// 10 mutation counts × 5 mutation stds × 3 generation budgets × 5 random
    /// stds = 750 configurations.
    pub fn standard() -> Self {
        Self {
            mutation_counts: (1..=10).map(|i| 10 * i).collect(),
            mutation_stds: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            generations: vec![100, 500, 1000],
            random_stds: vec![0.2, 0.4, 0.6, 0.8, 1.0],
        }
    }

    pub fn singleton(config: &EvolutionConfig) -> Self {
        Self {
            mutation_counts: vec![config.mutation_count],
            mutation_stds: vec![config.mutation_std],
            generations: vec![config.generations],
            random_stds: vec![config.random_std],
        }
    }

    pub fn len(&self) -> usize {
        self.mutation_counts.len()
            * self.mutation_stds.len()
            * self.generations.len()
            * self.random_stds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every grid point applied to `base`, mutation count varying slowest.
    pub fn configurations<'a>(
        &'a self,
        base: &'a EvolutionConfig,
    ) -> impl Iterator<Item = EvolutionConfig> + 'a {
        self.mutation_counts.iter().flat_map(move |&k| {
            self.mutation_stds.iter().flat_map(move |&ms| {
                self.generations.iter().flat_map(move |&g| {
                    self.random_stds.iter().map(move |&rs| EvolutionConfig {
                        mutation_count: k,
                        mutation_std: ms,
                        generations: g,
                        random_std: rs,
                        ..*base
                    })
                })
            })
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub mutation_count: usize,
    pub sigma_mut: f64,
    pub generations: usize,
    pub sigma_rand: f64,
    pub best_accuracy: f64,
    pub seconds: f64,
}

pub const SWEEP_CSV_HEADER: &str = "mutation_count,sigma_mut,generations,sigma_rand,best_accuracy,seconds";

/// Runs one evolution per grid point. `on_record` sees each record as it
/// completes.
pub fn sweep(
    grid: &SweepGrid,
    base: &EvolutionConfig,
    plan: &SeedPlan,
    dims: Dims,
    train: &Dataset,
    val: &Dataset,
    mut on_record: impl FnMut(&SweepRecord),
) -> Result<Vec<SweepRecord>> {
    if grid.is_empty() {
        return Err(Error::Empty("sweep grid"));
    }
    let mut out = Vec::with_capacity(grid.len());
    for config in grid.configurations(base) {
        let started = Instant::now();
        let (best, _) = evolve(plan, &config, dims, train, val)?;
        let record = SweepRecord {
            mutation_count: config.mutation_count,
            sigma_mut: config.mutation_std,
            generations: config.generations,
            sigma_rand: config.random_std,
            best_accuracy: best.fitness.unwrap_or(0.0),
            seconds: started.elapsed().as_secs_f64(),
        };
        on_record(&record);
        out.push(record);
    }
    Ok(out)
}

pub fn write_sweep_csv<W: Write>(records: &[SweepRecord], mut w: W) -> Result<()> {
    writeln!(w, "{SWEEP_CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{:.3}",
            r.mutation_count, r.sigma_mut, r.generations, r.sigma_rand, r.best_accuracy, r.seconds
        )?;
    }
    Ok(())
}
