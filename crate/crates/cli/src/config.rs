//! The TOML run description shared by every subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use mnn_core::evolution::{EvolutionConfig, SweepGrid};
use mnn_core::topology::{CElegansSpec, NetworkKind};
use mnn_core::Dims;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub kind: NetworkKind,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
    pub dims: DimsSection,
    pub data: DataSection,
    pub mlp: MlpSection,
    pub celegans: CElegansSection,
    pub evolution: EvolutionSection,
    pub sweep: SweepSection,
    pub predict: PredictSection,
    pub report: ReportSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kind: NetworkKind::RandomMesh,
            seed: 0,
            threads: None,
            out_dir: PathBuf::from("out"),
            dims: DimsSection::default(),
            data: DataSection::default(),
            mlp: MlpSection::default(),
            celegans: CElegansSection::default(),
            evolution: EvolutionSection::default(),
            sweep: SweepSection::default(),
            predict: PredictSection::default(),
            report: ReportSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimsSection {
    pub input: usize,
    pub mesh: usize,
    pub classes: usize,
    pub settle_steps: usize,
}

impl Default for DimsSection {
    fn default() -> Self {
        let d = Dims::default();
        Self {
            input: d.input,
            mesh: d.mesh,
            classes: d.classes,
            settle_steps: d.settle_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// JSON-lines dataset. Without it a Gaussian-blob set is generated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// One stopword per line, replacing the built-in list for text records.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stopwords: Option<PathBuf>,
    pub split: [f64; 3],
    pub synthetic: BlobSection,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            path: None,
            stopwords: None,
            split: [0.6, 0.2, 0.2],
            synthetic: BlobSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobSection {
    pub per_class: usize,
    pub separation: f64,
    pub noise: f64,
}

impl Default for BlobSection {
    fn default() -> Self {
        let b = mnn_core::synthetic::BlobSpec::default();
        Self {
            per_class: b.per_class,
            separation: b.separation,
            noise: b.noise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpSection {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Pre-trained MLP1 file used for seeding instead of training one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
}

impl Default for MlpSection {
    fn default() -> Self {
        let t = mnn_core::mlp::TrainSpec::default();
        Self {
            hidden: mnn_core::mlp::HIDDEN_VARIANTS[0].to_vec(),
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            model: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CElegansSection {
    pub sensory: usize,
    pub inter: usize,
    pub command: usize,
    pub motor: usize,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    pub weight_std: f64,
}

impl Default for CElegansSection {
    fn default() -> Self {
        let c = CElegansSpec::default();
        Self {
            sensory: c.sensory,
            inter: c.inter,
            command: c.command,
            motor: c.motor,
            p1: c.p1,
            p2: c.p2,
            p3: c.p3,
            p4: c.p4,
            weight_std: c.weight_std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionSection {
    pub population_size: usize,
    pub elite_count: usize,
    pub breed_count: usize,
    pub diversity_count: usize,
    pub mutation_count: usize,
    pub mutation_std: f64,
    pub generations: usize,
    pub random_std: f64,
    pub polarity: [f64; 5],
    /// Extra MNN1 seed files, e.g. winners of earlier runs for a master run.
    pub extra_seeds: Vec<PathBuf>,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        let e = EvolutionConfig::default();
        Self {
            population_size: e.population_size,
            elite_count: e.elite_count,
            breed_count: e.breed_count,
            diversity_count: e.diversity_count,
            mutation_count: e.mutation_count,
            mutation_std: e.mutation_std,
            generations: e.generations,
            random_std: e.random_std,
            polarity: e.polarity,
            extra_seeds: Vec::new(),
        }
    }
}

/// Swept values; any list left out takes the standard grid's values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub mutation_counts: Vec<usize>,
    pub mutation_stds: Vec<f64>,
    pub generations: Vec<usize>,
    pub random_stds: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        let g = SweepGrid::standard();
        Self {
            mutation_counts: g.mutation_counts,
            mutation_stds: g.mutation_stds,
            generations: g.generations,
            random_stds: g.random_stds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictSection {
    /// MNN1 or MLP1 file; defaults to `best.mnn` in the output directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// Labeled dataset to classify; defaults to the `[data]` set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// Predictions or day pages; defaults to `predictions.jsonl` in the
    /// output directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    pub decay: f64,
}

impl Default for ReportSection {
    fn default() -> Self {
        Self {
            input: None,
            decay: 0.8,
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let at = e
                .span()
                .map(|s| {
                    let (l, c) = line_col(text, s.start);
                    format!(":{l}:{c}")
                })
                .unwrap_or_default();
            CliError::Config(format!("{}{at}: {}", origin.display(), e.message().trim()))
        })
    }

    /// Reads `path` (or defaults when absent), applies `overrides` and makes
    /// every path absolute.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let cwd = std::env::current_dir()
            .map_err(|e| CliError::Config(format!("cannot read working directory: {e}")))?;
        let (mut cfg, base) = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                let cfg = Self::parse(&text, p)?;
                let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (cfg, cwd.join(dir))
            }
            None => (Self::default(), cwd.clone()),
        };
        cfg.resolve_paths(&base);
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &overrides.out {
            cfg.out_dir = cwd.join(out);
        }
        if overrides.threads.is_some() {
            cfg.threads = overrides.threads;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| *p = base.join(&*p);
        fix(&mut self.out_dir);
        for p in [
            &mut self.data.path,
            &mut self.data.stopwords,
            &mut self.mlp.model,
            &mut self.predict.model,
            &mut self.predict.input,
            &mut self.report.input,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        self.evolution.extra_seeds.iter_mut().for_each(fix);
    }

    pub fn dims(&self) -> Dims {
        Dims::new(
            self.dims.input,
            self.dims.mesh,
            self.dims.classes,
            self.dims.settle_steps,
        )
    }

    pub fn evolution_config(&self) -> EvolutionConfig {
        let e = &self.evolution;
        EvolutionConfig {
            population_size: e.population_size,
            elite_count: e.elite_count,
            breed_count: e.breed_count,
            diversity_count: e.diversity_count,
            mutation_count: e.mutation_count,
            mutation_std: e.mutation_std,
            generations: e.generations,
            random_std: e.random_std,
            polarity: e.polarity,
            seed: self.seed,
        }
    }

    pub fn celegans_spec(&self) -> CElegansSpec {
        let c = &self.celegans;
        CElegansSpec {
            sensory: c.sensory,
            inter: c.inter,
            command: c.command,
            motor: c.motor,
            p1: c.p1,
            p2: c.p2,
            p3: c.p3,
            p4: c.p4,
            weight_std: c.weight_std,
            seed: self.seed,
        }
    }

    pub fn sweep_grid(&self) -> SweepGrid {
        SweepGrid {
            mutation_counts: self.sweep.mutation_counts.clone(),
            mutation_stds: self.sweep.mutation_stds.clone(),
            generations: self.sweep.generations.clone(),
            random_stds: self.sweep.random_stds.clone(),
        }
    }

    pub fn mlp_layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.dims.input];
        sizes.extend(&self.mlp.hidden);
        sizes.push(self.dims.classes);
        sizes
    }

    /// Checks that do not need any data.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let dims = self.dims();
        dims.validate().map_err(|e| CliError::Config(format!("dims: {e}")))?;
        if dims.classes != mnn_core::NUM_CLASSES {
            return bad(format!(
                "dims.classes: the label scheme has {} classes, not {}",
                mnn_core::NUM_CLASSES,
                dims.classes
            ));
        }
        if self.threads == Some(0) {
            return bad("threads: must be >= 1".into());
        }
        let s = self.data.split;
        if s.iter().any(|f| !(f.is_finite() && *f > 0.0)) || (s.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad(format!("data.split: {s:?} must be positive and sum to 1"));
        }
        self.evolution_config()
            .validate()
            .map_err(|e| CliError::Config(format!("evolution: {e}")))?;
        if self.kind.needs_celegans() {
            self.celegans_spec()
                .validate(&dims)
                .map_err(|e| CliError::Config(format!("celegans: {e}")))?;
        }
        if self.kind.needs_mlp() && self.mlp.model.is_none() {
            let sum: usize = self.mlp.hidden.iter().sum();
            if sum != dims.mesh {
                return bad(format!(
                    "mlp.hidden: sizes sum to {sum} but dims.mesh is {} (kind {:?} embeds the MLP)",
                    dims.mesh, self.kind
                ));
            }
        }
        if self.mlp.hidden.is_empty() || self.mlp.hidden.contains(&0) {
            return bad("mlp.hidden: need at least one layer, all sizes >= 1".into());
        }
        if self.mlp.epochs == 0 || self.mlp.batch_size == 0 || !self.mlp.learning_rate.is_finite() || self.mlp.learning_rate <= 0.0 {
            return bad("mlp: epochs and batch_size must be >= 1, learning_rate > 0".into());
        }
        if !(self.report.decay > 0.0 && self.report.decay <= 1.0) {
            return bad(format!("report.decay: {} is not in (0, 1]", self.report.decay));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
