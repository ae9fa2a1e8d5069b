//! Command-line surface: argument parsing, configuration resolution and the
//! five commands (`search`, `eval`, `prune-study`, `selection-study`,
//! `data-fetch`).
//!
//! Configuration precedence is flags, then the `--config` key=value file,
//! then the dataset defaults.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{self, fetch, DataConfig, PreparedData, Source};
use crate::error::{Error, Result};
use crate::evolution::{
    breed, derive_seed, diversity, elitist_indices, evaluate_population, evolve_with, normalize_fitness,
    roulette_indices, unique_count, EvoConfig, GenerationRecord,
};
use crate::genome::{random_genome, Genome, InitialSize, LayoutSpec};
use crate::pipeline::{ClassifierEvaluator, PruneInput};
use crate::qfim::PruneConfig;
use crate::trainer::{evaluate, train_with, TrainConfig};

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Debug, Parser)]
#[command(name = "eqas", version, about = "Evolutionary quantum architecture search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the architecture search; writes history.csv, best_genome.txt,
    /// final_training.csv and report.json.
    Search(CommonArgs),
    /// Prune and retrain a saved genome.
    Eval {
        #[arg(long)]
        genome: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train random circuits before and after QFIM pruning.
    PruneStudy {
        #[arg(long)]
        circuits: Option<usize>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Compare offspring diversity under roulette-wheel and elitist selection.
    SelectionStudy {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        elite_quota: Option<f64>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Download and verify a dataset cache.
    DataFetch {
        #[arg(long, alias = "dataset")]
        source: String,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub mutation_prob: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub train_steps: Option<usize>,
    /// Training steps for the final retrain and for `eval`.
    #[arg(long)]
    pub final_steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub stop_accuracy: Option<f64>,
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat key=value file; keys mirror the flag names.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub dataset: String,
    pub seed: u64,
    pub iterations: usize,
    pub population: usize,
    pub mutation_prob: f64,
    pub alpha: f64,
    pub stop_accuracy: Option<f64>,
    pub train_steps: usize,
    pub final_steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub n_qubits: usize,
    pub initial_blocks: Option<usize>,
    pub initial_gates: Option<usize>,
    pub prune_draws: usize,
    pub prune_input: PruneInput,
    pub train_size: usize,
    pub test_size: usize,
    /// Seed of the train/test split; follows `seed` when unset.
    pub data_seed: Option<u64>,
    pub circuits: usize,
    pub trials: usize,
    pub elite_quota: f64,
    pub threads: Option<usize>,
    pub cache_dir: PathBuf,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn defaults(source: Source) -> Self {
        let (n_qubits, batch_size, blocks, gates) = match source {
            Source::Iris => (2, 10, None, Some(5)),
            Source::Mnist | Source::Fashion => (4, 30, Some(3), None),
        };
        RunConfig {
            dataset: source.name().into(),
            seed: 0,
            iterations: 100,
            population: 30,
            mutation_prob: 0.4,
            alpha: 0.1,
            stop_accuracy: None,
            train_steps: 40,
            final_steps: 200,
            batch_size,
            learning_rate: 0.1,
            n_qubits,
            initial_blocks: blocks,
            initial_gates: gates,
            prune_draws: 1,
            prune_input: PruneInput::default(),
            train_size: 400,
            test_size: 100,
            data_seed: None,
            circuits: 100,
            trials: 20,
            elite_quota: 0.2,
            threads: None,
            cache_dir: data::default_cache_dir(),
            out: PathBuf::from("eqas-out"),
        }
    }

    pub fn source(&self) -> Result<Source> {
        self.dataset.parse()
    }

    /// Sets one key from its textual value. Keys use flag spelling; `_` and
    /// `-` are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            value
                .parse()
                .map_err(|e| Error::Config(format!("bad value `{value}` for `{key}`: {e}")))
        }
        let value = value.trim();
        match key.trim().replace('_', "-").as_str() {
            "dataset" => {
                let source: Source = value.parse()?;
                if source.name() != self.dataset {
                    return Err(Error::Config(format!(
                        "dataset `{value}` conflicts with the resolved dataset `{}`",
                        self.dataset
                    )));
                }
            }
            "seed" => self.seed = parse(key, value)?,
            "iterations" => self.iterations = parse(key, value)?,
            "population" => self.population = parse(key, value)?,
            "mutation-prob" => self.mutation_prob = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "stop-accuracy" => self.stop_accuracy = Some(parse(key, value)?),
            "train-steps" => self.train_steps = parse(key, value)?,
            "final-steps" => self.final_steps = parse(key, value)?,
            "batch-size" => self.batch_size = parse(key, value)?,
            "learning-rate" => self.learning_rate = parse(key, value)?,
            "initial-blocks" => {
                self.initial_blocks = Some(parse(key, value)?);
                self.initial_gates = None;
            }
            "initial-gates" => {
                self.initial_gates = Some(parse(key, value)?);
                self.initial_blocks = None;
            }
            "prune-draws" => self.prune_draws = parse(key, value)?,
            "prune-input" => self.prune_input = value.parse()?,
            "train-size" => self.train_size = parse(key, value)?,
            "test-size" => self.test_size = parse(key, value)?,
            "data-seed" => self.data_seed = Some(parse(key, value)?),
            "circuits" => self.circuits = parse(key, value)?,
            "trials" => self.trials = parse(key, value)?,
            "elite-quota" => self.elite_quota = parse(key, value)?,
            "threads" => self.threads = Some(parse(key, value)?),
            "cache-dir" => self.cache_dir = PathBuf::from(value),
            "out" => self.out = PathBuf::from(value),
            other => return Err(Error::Config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let source = self.source()?;
        if self.n_qubits != source.n_qubits() {
            return Err(Error::Config(format!(
                "{} needs {} qubits",
                self.dataset,
                source.n_qubits()
            )));
        }
        self.evo_config().validate()?;
        self.layout(0).validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.prune_draws == 0 {
            return Err(Error::Config("prune draws must be positive".into()));
        }
        if !(self.elite_quota > 0.0 && self.elite_quota <= 1.0) {
            return Err(Error::Config(format!(
                "elite quota {} outside (0, 1]",
                self.elite_quota
            )));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        if source != Source::Iris && (self.train_size < 2 || self.test_size < 2) {
            return Err(Error::Config("train and test sizes must be at least 2".into()));
        }
        Ok(())
    }

    /// Resolves flags over the config file over dataset defaults.
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => parse_config_file(
                &fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?,
            )?,
            None => Vec::new(),
        };
        let from_file = file.iter().find(|(k, _)| k.trim() == "dataset").map(|(_, v)| v.clone());
        let dataset = args
            .dataset
            .clone()
            .or(from_file)
            .unwrap_or_else(|| Source::Iris.name().into());
        let mut cfg = RunConfig::defaults(dataset.parse()?);
        for (key, value) in &file {
            if key.trim() != "dataset" {
                cfg.set(key, value)?;
            }
        }
        let a = args;
        macro_rules! apply {
            ($($field:ident),*) => {$(
                if let Some(v) = a.$field.clone() {
                    cfg.$field = v;
                }
            )*};
        }
        apply!(
            seed,
            iterations,
            population,
            mutation_prob,
            alpha,
            train_steps,
            final_steps,
            batch_size,
            cache_dir,
            out
        );
        if a.data_seed.is_some() {
            cfg.data_seed = a.data_seed;
        }
        if a.stop_accuracy.is_some() {
            cfg.stop_accuracy = a.stop_accuracy;
        }
        if a.threads.is_some() {
            cfg.threads = a.threads;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn evo_config(&self) -> EvoConfig {
        EvoConfig {
            population_size: self.population,
            iterations: self.iterations,
            mutation_prob: self.mutation_prob,
            alpha: self.alpha,
            stop_accuracy: self.stop_accuracy,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_steps: self.train_steps,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }

    pub fn layout(&self, seed: u64) -> LayoutSpec {
        let size = match (self.initial_blocks, self.initial_gates) {
            (Some(b), _) => InitialSize::Blocks(b),
            (None, Some(g)) => InitialSize::Gates(g),
            (None, None) => InitialSize::Blocks(1),
        };
        LayoutSpec {
            n_qubits: self.n_qubits,
            size,
            seed,
        }
    }

    pub fn data_config(&self) -> Result<DataConfig> {
        Ok(DataConfig {
            cache_dir: self.cache_dir.clone(),
            train_size: self.train_size,
            test_size: self.test_size,
            seed: self.data_seed.unwrap_or(self.seed),
            ..DataConfig::new(self.source()?)
        })
    }

    fn evaluator<'a>(&self, data: &'a PreparedData) -> Result<ClassifierEvaluator<'a>> {
        let mut ev = ClassifierEvaluator::with_prune_input(&data.split, self.train_config(), self.prune_input)?;
        ev.prune = PruneConfig {
            draws: self.prune_draws,
            ..PruneConfig::default()
        };
        Ok(ev)
    }
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_config_file(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {}: expected key=value", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_report<T: Serialize>(out: &Path, command: &str, report: &T, cfg: &RunConfig, started: Instant) -> Result<()> {
    let envelope = serde_json::json!({
        "command": command,
        "report": report,
        "config": cfg,
        "wall_time_secs": started.elapsed().as_secs_f64(),
        "timestamp_unix": unix_now(),
    });
    fs::write(out.join("report.json"), serde_json::to_string_pretty(&envelope)? + "\n")?;
    Ok(())
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Summary of a search or evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub dataset: String,
    pub genome_bits: String,
    pub circuit: String,
    /// Held-out accuracy of the best individual as scored during the search.
    pub accuracy: f64,
    pub gates: usize,
    pub param_gates: usize,
    /// Held-out accuracy after pruning and retraining with `final_steps`.
    pub final_accuracy: f64,
    pub final_train_accuracy: f64,
    pub final_gates: usize,
    pub final_param_gates: usize,
    pub generations: usize,
    pub history_path: Option<PathBuf>,
}

impl RunReport {
    pub fn summary_row(&self) -> String {
        format!(
            "{:<8} accuracy {:>6.2}%  gates {:>3}  para_gates {:>3}  (retrained {:>6.2}%)",
            self.dataset,
            100.0 * self.accuracy,
            self.gates,
            self.param_gates,
            100.0 * self.final_accuracy
        )
    }
}

pub fn cmd_search(cfg: &RunConfig) -> Result<RunReport> {
    let started = Instant::now();
    let data = data::prepare_dataset(&cfg.data_config()?)?;
    let evaluator = cfg.evaluator(&data)?;
    fs::create_dir_all(&cfg.out)?;
    let history_path = cfg.out.join("history.csv");
    let mut history = fs::File::create(&history_path)?;
    writeln!(history, "{}", GenerationRecord::CSV_HEADER)?;
    let mut write_err = None;
    let layout = cfg.layout(cfg.seed ^ 0x9E37_79B9_7F4A_7C15);
    let outcome = with_threads(cfg.threads, || {
        evolve_with(&layout, &cfg.evo_config(), &evaluator, |rec| {
            if let Err(e) = writeln!(history, "{}", rec.to_csv_row()) {
                write_err.get_or_insert(e);
            }
        })
    })??;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    let best = &outcome.best;
    fs::write(cfg.out.join("best_genome.txt"), best.genome.to_text())?;

    // same prune + train as `eval`, with a per-step log
    let final_genome = evaluator.prune_genome(&best.genome, cfg.seed)?.pruned_genome;
    let circuit = final_genome.to_circuit();
    let mut log = String::from("step,loss,test_accuracy\n");
    let final_cfg = TrainConfig {
        seed: cfg.seed,
        max_steps: cfg.final_steps,
        ..cfg.train_config()
    };
    let model = train_with(&circuit, &data.split, &final_cfg, |step, loss, params| {
        let acc = evaluate(&circuit, params, &data.split.test)?;
        log.push_str(&format!("{step},{loss:.6},{acc:.6}\n"));
        Ok(())
    })?;
    fs::write(cfg.out.join("final_training.csv"), log)?;
    let report = RunReport {
        dataset: cfg.dataset.clone(),
        genome_bits: best.genome.to_bitstring(),
        circuit: best.genome.to_circuit().to_string(),
        accuracy: best.accuracy,
        gates: best.length,
        param_gates: best.param_count,
        final_accuracy: model.test_accuracy,
        final_train_accuracy: model.train_accuracy,
        final_gates: final_genome.dominant_count(),
        final_param_gates: final_genome.dominant_param_count(),
        generations: outcome.history.len(),
        history_path: Some(history_path),
    };
    write_report(&cfg.out, "search", &report, cfg, started)?;
    Ok(report)
}

pub fn cmd_eval(cfg: &RunConfig, genome_path: &Path) -> Result<RunReport> {
    let started = Instant::now();
    let text = fs::read_to_string(genome_path)
        .map_err(|e| Error::from(e).context(format!("reading {}", genome_path.display())))?;
    let genome = Genome::from_text(&text).map_err(|e| e.context(genome_path.display().to_string()))?;
    if genome.n_qubits() != cfg.n_qubits {
        return Err(Error::Geometry(format!(
            "genome has {} qubits, {} needs {}",
            genome.n_qubits(),
            cfg.dataset,
            cfg.n_qubits
        )));
    }
    let data = data::prepare_dataset(&cfg.data_config()?)?;
    let evaluator = cfg.evaluator(&data)?;
    let assessed = evaluator.assess(&genome, cfg.seed, cfg.final_steps)?;
    let pruned = assessed.genome(&genome);
    let report = RunReport {
        dataset: cfg.dataset.clone(),
        genome_bits: pruned.to_bitstring(),
        circuit: pruned.to_circuit().to_string(),
        accuracy: assessed.model.test_accuracy,
        gates: pruned.dominant_count(),
        param_gates: pruned.dominant_param_count(),
        final_accuracy: assessed.model.test_accuracy,
        final_train_accuracy: assessed.model.train_accuracy,
        final_gates: pruned.dominant_count(),
        final_param_gates: pruned.dominant_param_count(),
        generations: 0,
        history_path: None,
    };
    fs::create_dir_all(&cfg.out)?;
    write_report(&cfg.out, "eval", &report, cfg, started)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PruneRow {
    pub circuit: usize,
    pub params_before: usize,
    pub params_after: usize,
    pub acc_before: f64,
    pub acc_after: f64,
    pub abs_delta: f64,
}

impl PruneRow {
    pub const CSV_HEADER: &'static str = "circuit,params_before,params_after,acc_before,acc_after,abs_delta";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{:.6}",
            self.circuit, self.params_before, self.params_after, self.acc_before, self.acc_after, self.abs_delta
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PruneStudy {
    pub dataset: String,
    pub n_circuits: usize,
    pub n_over_5pct: usize,
    pub rows: Vec<PruneRow>,
}

/// Random genome with independent fair-coin INCLUDED bits.
fn random_study_genome(layout: &LayoutSpec, seed: u64) -> Result<Genome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut genome = random_genome(layout, &mut rng)?;
    for gene in genome.genes_mut() {
        gene.included = rng.gen_bool(0.5);
    }
    Ok(genome)
}

/// Accuracy change above this counts as significant.
pub const PRUNE_DELTA_THRESHOLD: f64 = 0.05;

pub fn cmd_prune_study(cfg: &RunConfig) -> Result<PruneStudy> {
    let started = Instant::now();
    let source = cfg.source()?;
    let data = data::prepare_dataset(&cfg.data_config()?)?;
    let evaluator = cfg.evaluator(&data)?;
    let layout = match source {
        Source::Iris => LayoutSpec::gates(2, 5, 0),
        Source::Mnist | Source::Fashion => LayoutSpec::blocks(4, 2, 0),
    };
    let rows = with_threads(cfg.threads, || {
        (0..cfg.circuits)
            .into_par_iter()
            .map(|i| {
                let seed = derive_seed(cfg.seed, 0, i as u64);
                let genome = random_study_genome(&layout, seed)?;
                let before = evaluator.train_genome(&genome, seed, cfg.train_steps)?;
                let pruned = evaluator.prune_genome(&genome, seed)?;
                let after = evaluator.train_genome(&pruned.pruned_genome, seed, cfg.train_steps)?;
                Ok(PruneRow {
                    circuit: i,
                    params_before: genome.dominant_param_count(),
                    params_after: pruned.pruned_genome.dominant_param_count(),
                    acc_before: before.test_accuracy,
                    acc_after: after.test_accuracy,
                    abs_delta: (after.test_accuracy - before.test_accuracy).abs(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let study = PruneStudy {
        dataset: cfg.dataset.clone(),
        n_circuits: rows.len(),
        n_over_5pct: rows
            .iter()
            .filter(|r| r.abs_delta > PRUNE_DELTA_THRESHOLD + 1e-12)
            .count(),
        rows,
    };
    fs::create_dir_all(&cfg.out)?;
    let mut csv = String::from(PruneRow::CSV_HEADER);
    csv.push('\n');
    for r in &study.rows {
        csv.push_str(&r.to_csv_row());
        csv.push('\n');
    }
    fs::write(cfg.out.join("prune_study.csv"), csv)?;
    fs::write(
        cfg.out.join("prune_summary.csv"),
        format!(
            "dataset,n_circuits,n_over_5pct\n{},{},{}\n",
            study.dataset, study.n_circuits, study.n_over_5pct
        ),
    )?;
    let summary = serde_json::json!({
        "dataset": study.dataset,
        "n_circuits": study.n_circuits,
        "n_over_5pct": study.n_over_5pct,
    });
    write_report(&cfg.out, "prune-study", &summary, cfg, started)?;
    Ok(study)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Strategy {
    Roulette,
    Elitist,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Roulette => "roulette",
            Strategy::Elitist => "elitist",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionRow {
    pub trial: usize,
    pub strategy: Strategy,
    pub mean_hamming: f64,
    pub unique_count: usize,
}

impl SelectionRow {
    pub const CSV_HEADER: &'static str = "trial,strategy,mean_hamming,unique_count";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{}",
            self.trial,
            self.strategy.name(),
            self.mean_hamming,
            self.unique_count
        )
    }
}

/// Per trial: one evaluated population, parents chosen by each strategy,
/// offspring bred from the same RNG stream for both.
pub fn cmd_selection_study(cfg: &RunConfig) -> Result<Vec<SelectionRow>> {
    let started = Instant::now();
    let data = data::prepare_dataset(&cfg.data_config()?)?;
    let evaluator = cfg.evaluator(&data)?;
    let rows = with_threads(cfg.threads, || -> Result<Vec<SelectionRow>> {
        let mut rows = Vec::with_capacity(2 * cfg.trials);
        for trial in 0..cfg.trials {
            let layout = cfg.layout(derive_seed(cfg.seed, trial as u64, u64::MAX));
            let mut init = ChaCha8Rng::seed_from_u64(layout.seed);
            let genomes = (0..cfg.population)
                .map(|_| random_genome(&layout, &mut init))
                .collect::<Result<Vec<_>>>()?;
            let population = evaluate_population(&genomes, &evaluator, cfg.alpha, cfg.seed, trial)?;
            let breed_seed = derive_seed(cfg.seed, trial as u64, u64::MAX - 1);
            for strategy in [Strategy::Roulette, Strategy::Elitist] {
                let mut rng = ChaCha8Rng::seed_from_u64(breed_seed);
                let picks = match strategy {
                    Strategy::Roulette => roulette_indices(&normalize_fitness(&population), cfg.population, &mut rng),
                    Strategy::Elitist => elitist_indices(&population, cfg.population, cfg.elite_quota),
                };
                let parents: Vec<Genome> = picks.iter().map(|&i| population[i].genome.clone()).collect();
                let offspring = breed(&parents, cfg.mutation_prob, &mut rng)?;
                rows.push(SelectionRow {
                    trial,
                    strategy,
                    mean_hamming: diversity(&offspring)?,
                    unique_count: unique_count(&offspring),
                });
            }
        }
        Ok(rows)
    })??;
    fs::create_dir_all(&cfg.out)?;
    let mut csv = String::from(SelectionRow::CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.to_csv_row());
        csv.push('\n');
    }
    fs::write(cfg.out.join("selection_study.csv"), csv)?;
    let (wins, losses) = sign_counts(&rows);
    let summary = serde_json::json!({
        "dataset": cfg.dataset,
        "trials": cfg.trials,
        "roulette_more_diverse": wins,
        "elitist_more_diverse": losses,
        "sign_test_p": sign_test_p(wins, losses),
    });
    write_report(&cfg.out, "selection-study", &summary, cfg, started)?;
    Ok(rows)
}

/// Trials where roulette offspring are strictly more / strictly less diverse
/// than elitist offspring.
pub fn sign_counts(rows: &[SelectionRow]) -> (usize, usize) {
    let mut by_trial: BTreeMap<usize, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for r in rows {
        let e = by_trial.entry(r.trial).or_default();
        match r.strategy {
            Strategy::Roulette => e.0 = Some(r.mean_hamming),
            Strategy::Elitist => e.1 = Some(r.mean_hamming),
        }
    }
    let mut wins = 0;
    let mut losses = 0;
    for (r, e) in by_trial.values().filter_map(|&(r, e)| r.zip(e)) {
        if r > e {
            wins += 1;
        } else if r < e {
            losses += 1;
        }
    }
    (wins, losses)
}

/// One-sided sign test: `P(X >= wins)` for `X ~ Binomial(wins + losses, 1/2)`.
/// Ties are dropped beforehand.
pub fn sign_test_p(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    let mut p = 0.0;
    let mut binom = 1.0f64;
    for k in 0..=n {
        if k > 0 {
            binom = binom * (n - k + 1) as f64 / k as f64;
        }
        if k >= wins {
            p += binom;
        }
    }
    p / 2f64.powi(n as i32)
}

pub fn cmd_data_fetch(source: Source, cache_dir: &Path) -> Result<fetch::FetchStatus> {
    fetch::fetch(source, cache_dir)
}

fn print_fetch_status(source: Source, cache_dir: &Path, status: &fetch::FetchStatus) {
    match status {
        fetch::FetchStatus::Bundled => say!("{source}: bundled, nothing to fetch"),
        fetch::FetchStatus::Files(files) => {
            for (name, st) in files {
                let word = match st {
                    fetch::FileStatus::Cached => "cached",
                    fetch::FileStatus::Downloaded => "downloaded",
                    fetch::FileStatus::Adopted => "verified",
                };
                say!(
                    "{source}: {word:<10} {}",
                    fetch::source_dir(cache_dir, source).join(name).display()
                );
            }
        }
    }
}

/// Executes a parsed command line, printing a short summary.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Search(args) => {
            let cfg = RunConfig::resolve(&args)?;
            let report = cmd_search(&cfg)?;
            say!("{}", report.summary_row());
            say!("circuit  {}", report.circuit);
            say!("written  {}", cfg.out.display());
        }
        Command::Eval { genome, common } => {
            let cfg = RunConfig::resolve(&common)?;
            let report = cmd_eval(&cfg, &genome)?;
            say!(
                "{:<8} accuracy {:>6.2}%  gates {:>3}  para_gates {:>3}",
                report.dataset,
                100.0 * report.accuracy,
                report.gates,
                report.param_gates
            );
            say!("circuit  {}", report.circuit);
        }
        Command::PruneStudy { circuits, common } => {
            let mut cfg = RunConfig::resolve(&common)?;
            if let Some(n) = circuits {
                cfg.circuits = n;
            }
            let study = cmd_prune_study(&cfg)?;
            say!(
                "{}: n_circuits={} n_over_5pct={}",
                study.dataset,
                study.n_circuits,
                study.n_over_5pct
            );
        }
        Command::SelectionStudy {
            trials,
            elite_quota,
            common,
        } => {
            let mut cfg = RunConfig::resolve(&common)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(q) = elite_quota {
                cfg.elite_quota = q;
            }
            cfg.validate()?;
            let rows = cmd_selection_study(&cfg)?;
            let (wins, losses) = sign_counts(&rows);
            say!(
                "{}: trials={} roulette_more_diverse={wins} elitist_more_diverse={losses} sign_test_p={:.3e}",
                cfg.dataset,
                cfg.trials,
                sign_test_p(wins, losses)
            );
        }
        Command::DataFetch { source, cache_dir } => {
            let source: Source = source.parse()?;
            let dir = cache_dir.unwrap_or_else(data::default_cache_dir);
            let status = cmd_data_fetch(source, &dir)?;
            print_fetch_status(source, &dir, &status);
        }
    }
    Ok(())
}
