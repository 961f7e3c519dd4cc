//! Genetic search over the three tuned hyperparameters: learning rate, cell
//! dimension, and block length.
//!
//! Each generation trains every new genome for a short partial run, keeps the
//! best few as elites (their fitness cached), and refills the population with
//! mutated crossovers of the top pair. Fitness is the validation NMAE, kept
//! away from the held-out test view so model selection cannot contaminate the
//! final comparison.

use crate::cells::{CellFamily, CellParams, VariantConfig};
use crate::data::DatasetView;
use crate::error::{Error, Result};
use crate::linalg::Rng;
use crate::trainer::{train_hybrid, validation_nmae, Hyperparams, TrainConfig};

pub const LR_BOUNDS: (f64, f64) = (1e-5, 1e-1);
pub const CELL_DIM_BOUNDS: (usize, usize) = (4, 256);
pub const BLOCK_LEN_BOUNDS: (usize, usize) = (2, 64);

/// One candidate hyperparameter setting. The learning rate is a log-scale
/// gene; the two integer genes move by proportional steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Genome {
    pub learning_rate: f64,
    pub cell_dim: usize,
    pub block_len: usize,
}

impl Genome {
    /// Uniform draw within bounds, log-uniform for the learning rate.
    pub fn random(rng: &mut Rng) -> Genome {
        let lr = 10f64.powf(rng.uniform(LR_BOUNDS.0.log10(), LR_BOUNDS.1.log10()));
        Genome {
            learning_rate: lr,
            cell_dim: CELL_DIM_BOUNDS.0 + rng.index(CELL_DIM_BOUNDS.1 - CELL_DIM_BOUNDS.0 + 1),
            block_len: BLOCK_LEN_BOUNDS.0 + rng.index(BLOCK_LEN_BOUNDS.1 - BLOCK_LEN_BOUNDS.0 + 1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite()
            || self.learning_rate < LR_BOUNDS.0
            || self.learning_rate > LR_BOUNDS.1
        {
            return Err(Error::Invalid(format!(
                "learning_rate {} outside [{}, {}]",
                self.learning_rate, LR_BOUNDS.0, LR_BOUNDS.1
            )));
        }
        if self.cell_dim < CELL_DIM_BOUNDS.0 || self.cell_dim > CELL_DIM_BOUNDS.1 {
            return Err(Error::Invalid(format!(
                "cell_dim {} outside [{}, {}]",
                self.cell_dim, CELL_DIM_BOUNDS.0, CELL_DIM_BOUNDS.1
            )));
        }
        if self.block_len < BLOCK_LEN_BOUNDS.0 || self.block_len > BLOCK_LEN_BOUNDS.1 {
            return Err(Error::Invalid(format!(
                "block_len {} outside [{}, {}]",
                self.block_len, BLOCK_LEN_BOUNDS.0, BLOCK_LEN_BOUNDS.1
            )));
        }
        Ok(())
    }

    fn clamp(&mut self) {
        self.learning_rate = self.learning_rate.clamp(LR_BOUNDS.0, LR_BOUNDS.1);
        self.cell_dim = self.cell_dim.clamp(CELL_DIM_BOUNDS.0, CELL_DIM_BOUNDS.1);
        self.block_len = self.block_len.clamp(BLOCK_LEN_BOUNDS.0, BLOCK_LEN_BOUNDS.1);
    }

    pub fn hyper(&self) -> Hyperparams {
        Hyperparams {
            learning_rate: self.learning_rate,
            cell_dim: self.cell_dim,
            block_len: self.block_len,
        }
    }
}

/// Per-gene uniform choice between the two parents.
pub fn crossover(a: &Genome, b: &Genome, rng: &mut Rng) -> Genome {
    Genome {
        learning_rate: if rng.chance(0.5) { a.learning_rate } else { b.learning_rate },
        cell_dim: if rng.chance(0.5) { a.cell_dim } else { b.cell_dim },
        block_len: if rng.chance(0.5) { a.block_len } else { b.block_len },
    }
}

/// Proportional step for integer genes: a quarter of the current value,
/// never less than one, direction drawn uniformly.
fn shift_int(v: usize, rng: &mut Rng) -> usize {
    let step = ((v as f64 * 0.25).round() as i64).max(1);
    let moved = if rng.chance(0.5) { v as i64 + step } else { v as i64 - step };
    moved.max(0) as usize
}

/// Each gene is perturbed independently with probability `rate`. The
/// learning rate moves by up to half a decade either way; integer genes move
/// by a quarter of their value. Results are clamped back into bounds.
pub fn mutate(g: &Genome, rate: f64, rng: &mut Rng) -> Genome {
    let mut out = *g;
    if rng.chance(rate) {
        out.learning_rate *= 10f64.powf(rng.uniform(-0.5, 0.5));
    }
    if rng.chance(rate) {
        out.cell_dim = shift_int(out.cell_dim, rng);
    }
    if rng.chance(rate) {
        out.block_len = shift_int(out.block_len, rng);
    }
    out.clamp();
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GAConfig {
    pub population: usize,
    pub partial_epochs: usize,
    pub elite: usize,
    pub generations: usize,
    pub mutation_rate: f64,
    pub seed: u64,
}

impl GAConfig {
    pub fn new(seed: u64) -> GAConfig {
        GAConfig {
            population: 10,
            partial_epochs: 3000,
            elite: 2,
            generations: 20,
            mutation_rate: 0.3,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (what, got) in [
            ("population", self.population),
            ("partial_epochs", self.partial_epochs),
            ("elite", self.elite),
            ("generations", self.generations),
        ] {
            if got < 1 {
                return Err(Error::TooSmall { what, min: 1, got });
            }
        }
        if self.elite >= self.population {
            return Err(Error::Invalid(format!(
                "elite {} must be smaller than population {}",
                self.elite, self.population
            )));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::Invalid(format!(
                "mutation_rate {} outside [0, 1]",
                self.mutation_rate
            )));
        }
        Ok(())
    }
}

/// Snapshot of one generation after evaluation: the whole population, its
/// fitness, and which members were kept as elites.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub genomes: Vec<Genome>,
    pub fitness: Vec<f64>,
    /// Indices into `genomes`, best first.
    pub elite: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenerationLog {
    pub records: Vec<GenerationRecord>,
}

pub const GA_LOG_HEADER: &str = "generation,child,learning_rate,cell_dim,block_len,fitness_nmae";

impl GenerationLog {
    /// Best genome-fitness pair seen anywhere in the log.
    pub fn best(&self) -> Option<(Genome, f64)> {
        let mut best: Option<(Genome, f64)> = None;
        for rec in &self.records {
            for (g, &f) in rec.genomes.iter().zip(&rec.fitness) {
                if best.map_or(true, |(_, bf)| f < bf) {
                    best = Some((*g, f));
                }
            }
        }
        best
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(GA_LOG_HEADER);
        out.push('\n');
        for rec in &self.records {
            for (child, (g, f)) in rec.genomes.iter().zip(&rec.fitness).enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    rec.generation, child, g.learning_rate, g.cell_dim, g.block_len, f
                ));
            }
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Fitness seam: the production implementation trains a model; tests may
/// substitute anything deterministic per `(genome, seed)`.
pub trait Fitness: Sync {
    fn evaluate(&self, genome: &Genome, seed: u64) -> Result<f64>;
}

/// Production fitness: build the configured variant at the genome's cell
/// dimension, train `partial_epochs` iterations, and score the validation
/// view. Divergence is a penalty, not a failure.
pub struct TrainFitness<'a> {
    pub family: CellFamily,
    pub cifg: bool,
    pub peephole: bool,
    pub compression: bool,
    pub train: DatasetView<'a>,
    pub validation: DatasetView<'a>,
    pub partial_epochs: usize,
    pub grad_clip: Option<f64>,
}

impl Fitness for TrainFitness<'_> {
    fn evaluate(&self, genome: &Genome, seed: u64) -> Result<f64> {
        genome.validate()?;
        if self.validation.len() < 2 {
            return Err(Error::TooSmall {
                what: "validation rows",
                min: 2,
                got: self.validation.len(),
            });
        }
        let variant = VariantConfig::new(
            self.family,
            self.cifg,
            self.peephole,
            self.compression,
            self.train.width(),
            genome.cell_dim,
        )?;
        let params = CellParams::init(variant, &mut Rng::new(seed))?;
        let mut cfg = TrainConfig::new(genome.hyper());
        cfg.epochs = self.partial_epochs;
        cfg.seed = seed;
        cfg.grad_clip = self.grad_clip;
        match train_hybrid(params, &self.train, &self.validation, &cfg) {
            Ok((trained, _)) => validation_nmae(&trained, &self.validation),
            Err(Error::NonFiniteLoss { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }
}

/// Runs the generational loop and returns the best-ever genome with the full
/// log. Elites never re-evaluate; children within a generation evaluate in
/// parallel, each under a seed derived from `(seed, generation, slot)` so the
/// outcome is schedule-independent.
pub fn run_ga<F: Fitness + ?Sized>(cfg: &GAConfig, fitness: &F) -> Result<(Genome, GenerationLog)> {
    cfg.validate()?;
    let mut rng = Rng::new(Rng::derive(cfg.seed, &[0x6761]));
    let mut population: Vec<(Genome, Option<f64>)> =
        (0..cfg.population).map(|_| (Genome::random(&mut rng), None)).collect();
    let mut log = GenerationLog::default();

    for generation in 0..cfg.generations {
        let pending: Vec<(usize, Genome, u64)> = population
            .iter()
            .enumerate()
            .filter(|(_, (_, f))| f.is_none())
            .map(|(i, (g, _))| (i, *g, Rng::derive(cfg.seed, &[generation as u64, i as u64])))
            .collect();
        let evaluated: Vec<(usize, Result<f64>)> = std::thread::scope(|scope| {
            let handles: Vec<_> = pending
                .iter()
                .map(|&(i, genome, seed)| {
                    scope.spawn(move || (i, fitness.evaluate(&genome, seed)))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("fitness thread panicked")).collect()
        });
        for (i, res) in evaluated {
            population[i].1 = Some(res?);
        }

        let fitness_vec: Vec<f64> = population.iter().map(|(_, f)| f.unwrap()).collect();
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| fitness_vec[a].total_cmp(&fitness_vec[b]));
        let elite: Vec<usize> = order[..cfg.elite].to_vec();
        log.records.push(GenerationRecord {
            generation,
            genomes: population.iter().map(|(g, _)| *g).collect(),
            fitness: fitness_vec,
            elite: elite.clone(),
        });

        if generation + 1 < cfg.generations {
            let parents = (population[elite[0]].0, population[elite[1.min(cfg.elite - 1)]].0);
            let mut next: Vec<(Genome, Option<f64>)> =
                elite.iter().map(|&i| population[i]).collect();
            while next.len() < cfg.population {
                let child = mutate(&crossover(&parents.0, &parents.1, &mut rng), cfg.mutation_rate, &mut rng);
                next.push((child, None));
            }
            population = next;
        }
    }

    let (best, _) = log.best().expect("log cannot be empty after at least one generation");
    Ok((best, log))
}
