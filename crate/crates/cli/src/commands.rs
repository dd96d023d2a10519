//! One function per subcommand. Artifacts go to the output directory;
//! progress and timings go to stderr only.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use mnn_core::bias_report::{aggregate_all, read_report_input, write_report_csv, Prediction};
use mnn_core::dataset::{load_dataset_with, split, Dataset, LoadOptions, StopWords};
use mnn_core::evolution::{
    sweep, write_sweep_csv, EvolutionTrace, GeneticAlgorithm, Individual, SWEEP_CSV_HEADER,
};
use mnn_core::mesh::MESH_MAGIC;
use mnn_core::mlp::{train_mlp, TrainSpec, MLP_MAGIC};
use mnn_core::synthetic::{gaussian_blobs, BlobSpec};
use mnn_core::topology::{seed_plan, SeedPlan};
use mnn_core::{Classifier, Label, MeshNetwork, Mlp};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

type CliResult<T> = Result<T, CliError>;

pub const MLP_FILE: &str = "mlp.bin";
pub const MLP_LOSS_FILE: &str = "mlp_loss.csv";
pub const MLP_METRICS_FILE: &str = "mlp_metrics.json";
pub const BEST_FILE: &str = "best.mnn";
pub const TRACE_FILE: &str = "trace.csv";
pub const EVOLVE_METRICS_FILE: &str = "evolve_metrics.json";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const REPORT_FILE: &str = "report.csv";

fn log(msg: impl AsRef<str>) {
    eprintln!("[mnn] {}", msg.as_ref());
}

fn data_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn prepare(cfg: &RunConfig, command: &str, inputs: &[&Path], writes: &[&str]) -> CliResult<Self> {
        let dir = cfg.out_dir.clone();
        for name in writes {
            let target = dir.join(name);
            if inputs.iter().any(|p| *p == target) {
                return Err(CliError::Config(format!(
                    "{}: is both an input and an output of {command}",
                    target.display()
                )));
            }
        }
        fs::create_dir_all(&dir).map_err(|e| data_err(&dir, e))?;
        let out = Self { dir };
        // Echo of the effective configuration; re-runnable with --config.
        out.write(&format!("{command}.config.toml"), cfg.to_toml().as_bytes())?;
        Ok(out)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let p = self.path(name);
        fs::write(&p, bytes).map_err(|e| data_err(&p, e))
    }

    fn write_json(&self, name: &str, value: &impl Serialize) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("metrics serialize");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn create(&self, name: &str) -> CliResult<BufWriter<File>> {
        let p = self.path(name);
        File::create(&p).map(BufWriter::new).map_err(|e| data_err(&p, e))
    }
}

fn stopwords(cfg: &RunConfig) -> CliResult<StopWords> {
    match &cfg.data.stopwords {
        None => Ok(StopWords::default_list()),
        Some(p) => {
            let file = File::open(p).map_err(|e| data_err(p, e))?;
            let mut words = Vec::new();
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|e| data_err(p, e))?;
                let w = line.trim();
                if !w.is_empty() && !w.starts_with('#') {
                    words.push(w.to_string());
                }
            }
            Ok(words.into_iter().collect())
        }
    }
}

fn load_labeled(cfg: &RunConfig, path: &Path) -> CliResult<Dataset> {
    let opts = LoadOptions {
        dim: Some(cfg.dims.input),
        stopwords: stopwords(cfg)?,
    };
    load_dataset_with(path, &opts).map_err(|e| CliError::core(path.display(), e))
}

/// The full dataset described by `[data]`.
fn full_dataset(cfg: &RunConfig) -> CliResult<Dataset> {
    match &cfg.data.path {
        Some(p) => load_labeled(cfg, p),
        None => {
            let s = cfg.data.synthetic;
            let spec = BlobSpec {
                per_class: s.per_class,
                dim: cfg.dims.input,
                separation: s.separation,
                noise: s.noise,
                seed: cfg.seed,
            };
            gaussian_blobs(&spec).map_err(|e| CliError::core("data.synthetic", e))
        }
    }
}

struct Splits {
    train: Dataset,
    val: Dataset,
    test: Dataset,
}

fn splits(cfg: &RunConfig) -> CliResult<Splits> {
    let ds = full_dataset(cfg)?;
    let (train, val, test) =
        split(&ds, cfg.data.split, cfg.seed).map_err(|e| CliError::core("data.split", e))?;
    log(format!(
        "data: {} train / {} val / {} test, dimension {}",
        train.len(),
        val.len(),
        test.len(),
        ds.dim()
    ));
    Ok(Splits { train, val, test })
}

fn read_mlp(path: &Path) -> CliResult<Mlp> {
    let bytes = fs::read(path).map_err(|e| data_err(path, e))?;
    Mlp::deserialize(&bytes).map_err(|e| CliError::core(path.display(), e))
}

fn read_mesh(path: &Path) -> CliResult<MeshNetwork> {
    let bytes = fs::read(path).map_err(|e| data_err(path, e))?;
    MeshNetwork::deserialize(&bytes).map_err(|e| CliError::core(path.display(), e))
}

fn train_spec(cfg: &RunConfig) -> TrainSpec {
    TrainSpec {
        epochs: cfg.mlp.epochs,
        learning_rate: cfg.mlp.learning_rate,
        batch_size: cfg.mlp.batch_size,
        seed: cfg.seed,
    }
}

fn accuracy(model: &dyn Classifier, data: &Dataset, what: &str) -> CliResult<f64> {
    model.accuracy(data).map_err(|e| CliError::core(what, e))
}

#[derive(Serialize)]
struct MlpMetrics {
    layer_sizes: Vec<usize>,
    final_loss: f64,
    train_accuracy: f64,
    val_accuracy: f64,
    test_accuracy: f64,
}

pub fn train_mlp_cmd(cfg: &RunConfig) -> CliResult<()> {
    let inputs: Vec<&Path> = cfg.data.path.iter().map(PathBuf::as_path).collect();
    let out = Output::prepare(
        cfg,
        "train-mlp",
        &inputs,
        &[MLP_FILE, MLP_LOSS_FILE, MLP_METRICS_FILE],
    )?;
    let data = splits(cfg)?;
    let sizes = cfg.mlp_layer_sizes();
    let started = Instant::now();
    let (mlp, losses) =
        train_mlp(&data.train, &train_spec(cfg), &sizes).map_err(|e| CliError::core("train-mlp", e))?;
    log(format!(
        "trained {sizes:?} for {} epochs in {:.1}s",
        losses.len(),
        started.elapsed().as_secs_f64()
    ));
    out.write(MLP_FILE, &mlp.serialize())?;
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in losses.iter().enumerate() {
        csv.push_str(&format!("{},{l}\n", i + 1));
    }
    out.write(MLP_LOSS_FILE, csv.as_bytes())?;
    out.write_json(
        MLP_METRICS_FILE,
        &MlpMetrics {
            layer_sizes: sizes,
            final_loss: *losses.last().expect("epochs >= 1"),
            train_accuracy: accuracy(&mlp, &data.train, "train accuracy")?,
            val_accuracy: accuracy(&mlp, &data.val, "val accuracy")?,
            test_accuracy: accuracy(&mlp, &data.test, "test accuracy")?,
        },
    )
}

/// Seeds for the configured kind, training the MLP when none is supplied.
fn plan_for(cfg: &RunConfig, train: &Dataset) -> CliResult<SeedPlan> {
    let mlp = if cfg.kind.needs_mlp() {
        Some(match &cfg.mlp.model {
            Some(p) => read_mlp(p)?,
            None => {
                let started = Instant::now();
                let (mlp, _) = train_mlp(train, &train_spec(cfg), &cfg.mlp_layer_sizes())
                    .map_err(|e| CliError::core("seed mlp", e))?;
                log(format!(
                    "trained seed MLP in {:.1}s",
                    started.elapsed().as_secs_f64()
                ));
                mlp
            }
        })
    } else {
        None
    };
    let mut plan = seed_plan(cfg.kind, cfg.dims(), &cfg.celegans_spec(), mlp.as_ref())
        .map_err(|e| CliError::core(format!("seeds for {:?}", cfg.kind), e))?;
    for p in &cfg.evolution.extra_seeds {
        let mut net = read_mesh(p)?;
        plan.template
            .apply(&mut net)
            .map_err(|e| CliError::core(p.display(), e))?;
        plan.seeds.push((net, plan.template.clone()));
    }
    Ok(plan)
}

#[derive(Serialize)]
struct EvolveMetrics {
    kind: mnn_core::topology::NetworkKind,
    generations: usize,
    best_val_accuracy: f64,
    train_accuracy: f64,
    test_accuracy: f64,
    fingerprint: String,
}

pub fn evolve_cmd(cfg: &RunConfig) -> CliResult<()> {
    let mut inputs: Vec<&Path> = cfg.data.path.iter().map(PathBuf::as_path).collect();
    inputs.extend(cfg.evolution.extra_seeds.iter().map(PathBuf::as_path));
    inputs.extend(cfg.mlp.model.iter().map(PathBuf::as_path));
    let out = Output::prepare(
        cfg,
        "evolve",
        &inputs,
        &[BEST_FILE, TRACE_FILE, EVOLVE_METRICS_FILE],
    )?;
    let data = splits(cfg)?;
    let plan = plan_for(cfg, &data.train)?;
    let started = Instant::now();
    let (best, trace) = run_ga(cfg, &plan, &data)?;
    log(format!(
        "evolved {} generations in {:.1}s, best val accuracy {:.4}",
        cfg.evolution.generations,
        started.elapsed().as_secs_f64(),
        best.fitness.unwrap_or(0.0)
    ));
    out.write(BEST_FILE, &best.network.serialize())?;
    let mut w = out.create(TRACE_FILE)?;
    trace
        .write_csv(&mut w)
        .and_then(|_| w.flush().map_err(Into::into))
        .map_err(|e| CliError::core(TRACE_FILE, e))?;
    out.write_json(
        EVOLVE_METRICS_FILE,
        &EvolveMetrics {
            kind: cfg.kind,
            generations: cfg.evolution.generations,
            best_val_accuracy: best.fitness.unwrap_or(0.0),
            train_accuracy: accuracy(&best.network, &data.train, "train accuracy")?,
            test_accuracy: accuracy(&best.network, &data.test, "test accuracy")?,
            fingerprint: format!("{:016x}", best.network.fingerprint()),
        },
    )
}

fn run_ga(cfg: &RunConfig, plan: &SeedPlan, data: &Splits) -> CliResult<(Individual, EvolutionTrace)> {
    let ga = GeneticAlgorithm::new(cfg.evolution_config(), cfg.dims())
        .and_then(|ga| ga.with_template(plan.template.clone()))
        .map_err(|e| CliError::core("evolution", e))?;
    ga.evolve(plan.seeds.iter().cloned(), &data.train, &data.val)
        .map_err(|e| CliError::core("evolve", e))
}

pub fn sweep_cmd(cfg: &RunConfig) -> CliResult<()> {
    let inputs: Vec<&Path> = cfg.data.path.iter().map(PathBuf::as_path).collect();
    let out = Output::prepare(cfg, "sweep", &inputs, &[SWEEP_FILE])?;
    let grid = cfg.sweep_grid();
    if grid.is_empty() {
        return Err(CliError::Config("sweep: every swept list needs at least one value".into()));
    }
    let data = splits(cfg)?;
    let plan = plan_for(cfg, &data.train)?;
    log(format!("sweeping {} configurations", grid.len()));
    // Rows are appended as they finish so a long sweep leaves partial results.
    let mut w = out.create(SWEEP_FILE)?;
    let path = out.path(SWEEP_FILE);
    writeln!(w, "{SWEEP_CSV_HEADER}").map_err(|e| data_err(&path, e))?;
    let mut write_err = None;
    let mut done = 0;
    let records = sweep(
        &grid,
        &cfg.evolution_config(),
        &plan,
        cfg.dims(),
        &data.train,
        &data.val,
        |r| {
            done += 1;
            let mut row = Vec::new();
            write_sweep_csv(std::slice::from_ref(r), &mut row).expect("in-memory write");
            // Drop the header line that write_sweep_csv emits.
            let body = row.splitn(2, |b| *b == b'\n').nth(1).unwrap_or_default();
            if let Err(e) = w.write_all(body).and_then(|_| w.flush()) {
                write_err.get_or_insert(e);
            }
            if done % 25 == 0 || done == grid.len() {
                log(format!("sweep: {done}/{}", grid.len()));
            }
        },
    )
    .map_err(|e| CliError::core("sweep", e))?;
    if let Some(e) = write_err {
        return Err(data_err(&path, e));
    }
    log(format!("sweep: wrote {} rows", records.len()));
    Ok(())
}

enum Model {
    Mesh(MeshNetwork),
    Mlp(Mlp),
}

impl Model {
    fn read(path: &Path) -> CliResult<Self> {
        let bytes = fs::read(path).map_err(|e| data_err(path, e))?;
        let wrap = |e| CliError::core(path.display(), e);
        match bytes.get(..4) {
            Some(m) if m == MLP_MAGIC => Mlp::deserialize(&bytes).map(Model::Mlp).map_err(wrap),
            _ if bytes.starts_with(MESH_MAGIC) => {
                MeshNetwork::deserialize(&bytes).map(Model::Mesh).map_err(wrap)
            }
            _ => Err(CliError::Data(format!(
                "{}: neither an MNN1 nor an MLP1 file",
                path.display()
            ))),
        }
    }

    fn classifier(&self) -> &dyn Classifier {
        match self {
            Model::Mesh(m) => m,
            Model::Mlp(m) => m,
        }
    }
}

pub fn predict_cmd(cfg: &RunConfig) -> CliResult<()> {
    let model_path = cfg
        .predict
        .model
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join(BEST_FILE));
    let mut inputs = vec![model_path.as_path()];
    inputs.extend(cfg.predict.input.iter().map(PathBuf::as_path));
    inputs.extend(cfg.data.path.iter().map(PathBuf::as_path));
    let model = Model::read(&model_path)?;
    let out = Output::prepare(cfg, "predict", &inputs, &[PREDICTIONS_FILE])?;
    let model = model.classifier();
    let data = match &cfg.predict.input {
        Some(p) => load_labeled(cfg, p)?,
        None => full_dataset(cfg)?,
    };
    if data.dim() != model.input_dim() {
        return Err(CliError::Data(format!(
            "model expects inputs of dimension {} but the dataset has {}",
            model.input_dim(),
            data.dim()
        )));
    }
    let mut w = out.create(PREDICTIONS_FILE)?;
    let path = out.path(PREDICTIONS_FILE);
    let mut hits = 0;
    for s in data.samples() {
        let scores = model
            .scores(&s.embedding)
            .map_err(|e| CliError::core(&s.id, e))?;
        let predicted = Label::argmax(&scores);
        hits += usize::from(predicted == s.label);
        let p = Prediction {
            id: s.id.clone(),
            predicted,
            scores,
            label: Some(s.label),
            source: s.source.clone(),
            date: s.date.clone(),
            rank: s.rank,
        };
        serde_json::to_writer(&mut w, &p).map_err(|e| data_err(&path, e))?;
        w.write_all(b"\n").map_err(|e| data_err(&path, e))?;
    }
    w.flush().map_err(|e| data_err(&path, e))?;
    log(format!(
        "predicted {} samples, accuracy {:.4}",
        data.len(),
        hits as f64 / data.len().max(1) as f64
    ));
    Ok(())
}

pub fn report_cmd(cfg: &RunConfig) -> CliResult<()> {
    let input = cfg
        .report
        .input
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join(PREDICTIONS_FILE));
    let file = File::open(&input).map_err(|e| data_err(&input, e))?;
    let out = Output::prepare(cfg, "report", &[input.as_path()], &[REPORT_FILE])?;
    let pages =
        read_report_input(BufReader::new(file)).map_err(|e| CliError::core(input.display(), e))?;
    if pages.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no day pages (predictions need source and date)",
            input.display()
        )));
    }
    let reports = aggregate_all(&pages, cfg.report.decay).map_err(|e| CliError::core("report", e))?;
    let mut w = out.create(REPORT_FILE)?;
    write_report_csv(&reports, &mut w)
        .and_then(|_| w.flush().map_err(Into::into))
        .map_err(|e| CliError::core(REPORT_FILE, e))?;
    for r in &reports {
        log(format!(
            "{}: normalized {:.4} over {} days{}",
            r.source,
            r.normalized_bias,
            r.day_count,
            if r.significant { ", significant" } else { "" }
        ));
    }
    Ok(())
}

/// Writes a labeled Gaussian-blob dataset as JSON lines.
pub fn synth_blobs_cmd(cfg: &RunConfig) -> CliResult<()> {
    let out = Output::prepare(cfg, "synth-blobs", &[], &["blobs.jsonl"])?;
    let ds = full_dataset(cfg)?;
    let mut w = out.create("blobs.jsonl")?;
    ds.write_jsonl(&mut w)
        .and_then(|_| w.flush().map_err(Into::into))
        .map_err(|e| CliError::core("blobs.jsonl", e))
}
