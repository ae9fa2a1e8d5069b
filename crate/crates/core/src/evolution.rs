//! The search loop: fitness, roulette-wheel and elitist selection, INCLUDED
//! crossover, TYPE/INCLUDED mutation, and generation iteration.

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::genome::{random_genome, Genome, LayoutSpec};
use crate::simulator::GateKind;

/// `(1 − α)·accuracy + α/length`; an empty circuit scores 0.
pub fn fitness_fn(accuracy: f64, length: usize, alpha: f64) -> f64 {
    if length == 0 {
        return 0.0;
    }
    (1.0 - alpha) * accuracy + alpha / length as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    /// Post-pruning genome; this is what is inherited.
    pub genome: Genome,
    pub accuracy: f64,
    /// Dominant gate count of `genome`.
    pub length: usize,
    pub param_count: usize,
    pub fitness: f64,
    pub trained_params: Vec<f64>,
}

impl Individual {
    pub fn new(genome: Genome, accuracy: f64, trained_params: Vec<f64>, alpha: f64) -> Self {
        let length = genome.dominant_count();
        Individual {
            param_count: genome.dominant_param_count(),
            fitness: fitness_fn(accuracy, length, alpha),
            genome,
            accuracy,
            length,
            trained_params,
        }
    }

    /// Ranking used for the reported best: higher fitness, then fewer
    /// parameterized gates, then the lexicographically smaller bitstring.
    pub fn rank_cmp(&self, other: &Individual) -> Ordering {
        other
            .fitness
            .total_cmp(&self.fitness)
            .then(self.param_count.cmp(&other.param_count))
            .then_with(|| self.genome.to_bitstring().cmp(&other.genome.to_bitstring()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvoConfig {
    pub population_size: usize,
    pub iterations: usize,
    pub mutation_prob: f64,
    pub alpha: f64,
    pub stop_accuracy: Option<f64>,
    pub seed: u64,
}

impl Default for EvoConfig {
    fn default() -> Self {
        EvoConfig {
            population_size: 30,
            iterations: 100,
            mutation_prob: 0.4,
            alpha: 0.1,
            stop_accuracy: None,
            seed: 0,
        }
    }
}

impl EvoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 {
            return Err(Error::Config("population size must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(Error::Config(format!(
                "mutation probability {} outside [0, 1]",
                self.mutation_prob
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        Ok(())
    }
}

/// Best-so-far snapshot after one generation.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_accuracy: f64,
    pub gate_count: usize,
    pub param_gate_count: usize,
    pub fitness: f64,
    pub genome_bits: String,
}

impl GenerationRecord {
    pub const CSV_HEADER: &'static str = "generation,best_accuracy,gate_count,param_gate_count,fitness,genome_bits";

    fn from_best(generation: usize, best: &Individual) -> Self {
        GenerationRecord {
            generation,
            best_accuracy: best.accuracy,
            gate_count: best.length,
            param_gate_count: best.param_count,
            fitness: best.fitness,
            genome_bits: best.genome.to_bitstring(),
        }
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{:.6},{},{},{:.6},{}",
            self.generation, self.best_accuracy, self.gate_count, self.param_gate_count, self.fitness, self.genome_bits
        )
    }
}

/// `p_i = f_i / Σf`; uniform when every fitness is zero.
pub fn normalize(fitness: &[f64]) -> Vec<f64> {
    let total: f64 = fitness.iter().sum();
    if total <= 0.0 {
        return vec![1.0 / fitness.len() as f64; fitness.len()];
    }
    fitness.iter().map(|f| f / total).collect()
}

pub fn normalize_fitness(population: &[Individual]) -> Vec<f64> {
    normalize(&population.iter().map(|i| i.fitness).collect::<Vec<_>>())
}

/// `count` independent draws with replacement; returns indices.
pub fn roulette_indices<R: Rng + ?Sized>(probabilities: &[f64], count: usize, rng: &mut R) -> Vec<usize> {
    let mut cumulative = Vec::with_capacity(probabilities.len());
    let mut acc = 0.0;
    for p in probabilities {
        acc += p;
        cumulative.push(acc);
    }
    let last_live = probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    (0..count)
        .map(|_| {
            let u = rng.gen::<f64>() * acc;
            cumulative.partition_point(|&c| c <= u).min(last_live)
        })
        .collect()
}

pub fn roulette_select<R: Rng + ?Sized>(
    population: &[Individual],
    probabilities: &[f64],
    count: usize,
    rng: &mut R,
) -> Vec<Individual> {
    roulette_indices(probabilities, count, rng)
        .into_iter()
        .map(|i| population[i].clone())
        .collect()
}

/// Elitist indices: the top `⌈count·quota⌉` by fitness (ties to the smaller
/// bitstring), repeated cyclically to `count`.
pub fn elitist_indices(population: &[Individual], count: usize, quota: f64) -> Vec<usize> {
    if population.is_empty() || count == 0 {
        return Vec::new();
    }
    let bits: Vec<String> = population.iter().map(|i| i.genome.to_bitstring()).collect();
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&a, &b| {
        population[b]
            .fitness
            .total_cmp(&population[a].fitness)
            .then_with(|| bits[a].cmp(&bits[b]))
    });
    let elites = ((count as f64 * quota).ceil() as usize).clamp(1, population.len());
    order.truncate(elites);
    order.iter().copied().cycle().take(count).collect()
}

/// Top-`count` individuals by fitness.
pub fn elitist_select(population: &[Individual], count: usize) -> Vec<Individual> {
    elitist_select_with_quota(population, count, 1.0)
}

pub fn elitist_select_with_quota(population: &[Individual], count: usize, quota: f64) -> Vec<Individual> {
    elitist_indices(population, count, quota)
        .into_iter()
        .map(|i| population[i].clone())
        .collect()
}

/// Children keep their own parent's TYPE and PLACE bits; INCLUDED at each
/// position becomes the AND of both parents.
pub fn crossover(parent_a: &Genome, parent_b: &Genome) -> Result<(Genome, Genome)> {
    if parent_a.len() != parent_b.len() || parent_a.n_qubits() != parent_b.n_qubits() {
        return Err(Error::Geometry(format!(
            "cannot cross {}-gene/{}-qubit genome with {}-gene/{}-qubit genome",
            parent_a.len(),
            parent_a.n_qubits(),
            parent_b.len(),
            parent_b.n_qubits()
        )));
    }
    let mut child_a = parent_a.clone();
    let mut child_b = parent_b.clone();
    for (ga, gb) in child_a.genes_mut().iter_mut().zip(child_b.genes_mut()) {
        let both = ga.included && gb.included;
        ga.included = both;
        gb.included = both;
    }
    Ok((child_a, child_b))
}

/// Flips every TYPE bit and every INCLUDED bit independently with
/// probability `p`. PLACE bits are never touched.
pub fn mutate<R: Rng + ?Sized>(genome: &Genome, p: f64, rng: &mut R) -> Genome {
    let mut out = genome.clone();
    for gene in out.genes_mut() {
        let mut code = gene.kind.code();
        for bit in 0..3 {
            if rng.gen_bool(p) {
                code ^= 1 << bit;
            }
        }
        gene.kind = GateKind::from_code(code).expect("3-bit code");
        if rng.gen_bool(p) {
            gene.included = !gene.included;
        }
    }
    out
}

/// Pairs parents `(0,1), (2,3), …`, crosses each pair and mutates both
/// children. An unpaired last parent is only mutated.
pub fn breed<R: Rng + ?Sized>(parents: &[Genome], mutation_prob: f64, rng: &mut R) -> Result<Vec<Genome>> {
    let mut children = Vec::with_capacity(parents.len());
    for pair in parents.chunks(2) {
        match pair {
            [a, b] => {
                let (ca, cb) = crossover(a, b)?;
                children.push(mutate(&ca, mutation_prob, rng));
                children.push(mutate(&cb, mutation_prob, rng));
            }
            [a] => children.push(mutate(a, mutation_prob, rng)),
            _ => unreachable!(),
        }
    }
    Ok(children)
}

fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Mean pairwise Hamming distance of equal-length bitstrings.
pub fn mean_pairwise_hamming<S: AsRef<str>>(bitstrings: &[S]) -> Result<f64> {
    let first = bitstrings.first().ok_or(Error::Empty("genome set"))?;
    let len = first.as_ref().len();
    if let Some(bad) = bitstrings.iter().find(|s| s.as_ref().len() != len) {
        return Err(Error::Geometry(format!(
            "bitstring lengths differ: {len} vs {}",
            bad.as_ref().len()
        )));
    }
    let n = bitstrings.len();
    if n < 2 {
        return Ok(0.0);
    }
    let mut total = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            total += hamming(bitstrings[i].as_ref().as_bytes(), bitstrings[j].as_ref().as_bytes());
        }
    }
    Ok(total as f64 / (n * (n - 1) / 2) as f64)
}

/// Mean pairwise Hamming distance of the genome bitstrings.
pub fn diversity(genomes: &[Genome]) -> Result<f64> {
    let bits: Vec<String> = genomes.iter().map(Genome::to_bitstring).collect();
    mean_pairwise_hamming(&bits)
}

pub fn unique_count(genomes: &[Genome]) -> usize {
    genomes.iter().collect::<HashSet<_>>().len()
}

/// Deterministic per-individual seed (splitmix64 finalizer over the triple).
pub fn derive_seed(base: u64, generation: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(generation.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// What an evaluator reports for one genome.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub pruned: Genome,
    pub params: Vec<f64>,
}

/// Prunes, trains and scores a genome. Must be deterministic in `seed`.
pub trait Evaluator: Sync {
    fn evaluate(&self, genome: &Genome, seed: u64) -> Result<Evaluation>;
}

impl<F> Evaluator for F
where
    F: Fn(&Genome, u64) -> Result<Evaluation> + Sync,
{
    fn evaluate(&self, genome: &Genome, seed: u64) -> Result<Evaluation> {
        self(genome, seed)
    }
}

/// Evaluates `genomes` in parallel; results come back in input order.
pub fn evaluate_population<E: Evaluator + ?Sized>(
    genomes: &[Genome],
    evaluator: &E,
    alpha: f64,
    seed: u64,
    generation: usize,
) -> Result<Vec<Individual>> {
    genomes
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let eval = evaluator
                .evaluate(g, derive_seed(seed, generation as u64, i as u64))
                .map_err(|e| e.context(format!("evaluating individual {i} of generation {generation}")))?;
            Ok(Individual::new(eval.pruned, eval.accuracy, eval.params, alpha))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionOutcome {
    pub best: Individual,
    pub history: Vec<GenerationRecord>,
}

pub fn evolve<E: Evaluator + ?Sized>(layout: &LayoutSpec, cfg: &EvoConfig, evaluator: &E) -> Result<EvolutionOutcome> {
    evolve_with(layout, cfg, evaluator, |_| {})
}

/// Runs the search, calling `on_generation` after each generation is scored.
pub fn evolve_with<E, F>(
    layout: &LayoutSpec,
    cfg: &EvoConfig,
    evaluator: &E,
    mut on_generation: F,
) -> Result<EvolutionOutcome>
where
    E: Evaluator + ?Sized,
    F: FnMut(&GenerationRecord),
{
    cfg.validate()?;
    layout.validate()?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(layout.seed);
    let mut genomes = (0..cfg.population_size)
        .map(|_| random_genome(layout, &mut init_rng))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut best: Option<Individual> = None;
    let mut history = Vec::with_capacity(cfg.iterations);
    for generation in 0..cfg.iterations {
        let population = evaluate_population(&genomes, evaluator, cfg.alpha, cfg.seed, generation)?;
        for ind in &population {
            if best.as_ref().is_none_or(|b| ind.rank_cmp(b) == Ordering::Less) {
                best = Some(ind.clone());
            }
        }
        let current = best.as_ref().expect("population is non-empty");
        let record = GenerationRecord::from_best(generation, current);
        on_generation(&record);
        history.push(record);

        if cfg.stop_accuracy.is_some_and(|stop| current.accuracy >= stop) || generation + 1 == cfg.iterations {
            break;
        }
        let probabilities = normalize_fitness(&population);
        let parents: Vec<Genome> = roulette_indices(&probabilities, cfg.population_size, &mut rng)
            .into_iter()
            .map(|i| population[i].genome.clone())
            .collect();
        genomes = breed(&parents, cfg.mutation_prob, &mut rng)?;
    }
    Ok(EvolutionOutcome {
        best: best.expect("at least one generation ran"),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::Gene;

    fn individual(fitness: f64, bits_seed: usize) -> Individual {
        let genes = (0..2)
            .map(|i| Gene::new(GateKind::ALL[(bits_seed + i) % 8], i % 2, true))
            .collect();
        let genome = Genome::new(2, genes).unwrap();
        Individual {
            length: genome.dominant_count(),
            param_count: genome.dominant_param_count(),
            genome,
            accuracy: fitness,
            fitness,
            trained_params: vec![],
        }
    }

    #[test]
    fn fitness_examples() {
        assert_eq!(fitness_fn(1.0, 1, 0.5), 1.0);
        assert!((fitness_fn(0.8, 4, 0.2) - (0.8 * 0.8 + 0.2 * 0.25)).abs() < 1e-15);
        assert!((fitness_fn(0.8, 4, 0.2) - 0.69).abs() < 1e-12);
        for len in [1, 3, 17] {
            assert_eq!(fitness_fn(0.37, len, 0.0), 0.37);
        }
        assert_eq!(fitness_fn(1.0, 0, 0.3), 0.0);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&[0.7]), vec![1.0]);
        assert_eq!(normalize(&[0.2; 4]), vec![0.25; 4]);
        assert_eq!(normalize(&[0.0; 3]), vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn roulette_degenerate_distribution() {
        let pop: Vec<_> = (0..3).map(|i| individual(0.5, i)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let picks = roulette_indices(&[1.0, 0.0, 0.0], 500, &mut rng);
        assert!(picks.iter().all(|&i| i == 0));
        let picks = roulette_indices(&[0.0, 0.0, 1.0], 500, &mut rng);
        assert!(picks.iter().all(|&i| i == 2));
        let a = roulette_select(&pop, &[0.2, 0.3, 0.5], 10, &mut ChaCha8Rng::seed_from_u64(4));
        let b = roulette_select(&pop, &[0.2, 0.3, 0.5], 10, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
    }

    #[test]
    fn elitist_examples() {
        let pop = vec![individual(0.1, 0), individual(0.9, 1), individual(0.5, 2)];
        let top2: Vec<f64> = elitist_select(&pop, 2).iter().map(|i| i.fitness).collect();
        assert_eq!(top2, vec![0.9, 0.5]);
        let all: Vec<f64> = elitist_select(&pop, 3).iter().map(|i| i.fitness).collect();
        assert_eq!(all, vec![0.9, 0.5, 0.1]);
        let cyc: Vec<f64> = elitist_select(&pop, 5).iter().map(|i| i.fitness).collect();
        assert_eq!(cyc, vec![0.9, 0.5, 0.1, 0.9, 0.5]);

        let tied: Vec<_> = (0..4).map(|i| individual(0.5, 3 - i)).collect();
        let picked = elitist_select(&tied, 2);
        let mut bits: Vec<_> = tied.iter().map(|i| i.genome.to_bitstring()).collect();
        bits.sort();
        assert_eq!(picked[0].genome.to_bitstring(), bits[0]);
        assert_eq!(picked[1].genome.to_bitstring(), bits[1]);

        let quota = elitist_indices(&pop, 6, 0.3);
        assert_eq!(quota, vec![1, 2, 1, 2, 1, 2]);
    }

    fn genome_with_included(included: &[bool]) -> Genome {
        let genes = included
            .iter()
            .enumerate()
            .map(|(i, &inc)| Gene::new(GateKind::ALL[i % 8], i % 2, inc))
            .collect();
        Genome::new(2, genes).unwrap()
    }

    #[test]
    fn crossover_examples() {
        let a = genome_with_included(&[true, false, true, true]);
        let b = genome_with_included(&[false, false, true, true]);
        let (ca, cb) = crossover(&a, &b).unwrap();
        let inc = |g: &Genome| g.genes().iter().map(|x| x.included).collect::<Vec<_>>();
        assert_eq!(inc(&ca), vec![false, false, true, true]);
        assert_eq!(inc(&cb), vec![false, false, true, true]);

        let (sa, sb) = crossover(&a, &a).unwrap();
        assert_eq!((sa, sb), (a.clone(), a.clone()));

        let full = genome_with_included(&[true; 4]);
        let other = mutate(&full, 0.0, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(crossover(&full, &other).unwrap(), (full.clone(), other));

        let short = genome_with_included(&[true; 3]);
        assert!(matches!(crossover(&a, &short), Err(Error::Geometry(_))));
    }

    #[test]
    fn mutation_extremes() {
        let g = genome_with_included(&[true, false, true, false, true]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(mutate(&g, 0.0, &mut rng), g);
        let flipped = mutate(&g, 1.0, &mut rng);
        for (a, b) in g.genes().iter().zip(flipped.genes()) {
            assert_eq!(a.place, b.place);
            assert_eq!(a.kind.code() ^ 0b111, b.kind.code());
            assert_eq!(a.included, !b.included);
        }
    }

    #[test]
    fn mutation_reaches_figure_transitions() {
        // RZ (010) -> CNOT (100) and H (011) -> RZ (010), PLACE fixed
        let g = Genome::new(
            2,
            vec![Gene::new(GateKind::Rz, 0, true), Gene::new(GateKind::H, 0, true)],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut seen = (false, false);
        for _ in 0..2000 {
            let m = mutate(&g, 0.4, &mut rng);
            seen.0 |= m.genes()[0].kind == GateKind::Cnot;
            seen.1 |= m.genes()[1].kind == GateKind::Rz;
            assert!(m.genes().iter().all(|x| x.place == 0));
        }
        assert_eq!(seen, (true, true));
    }

    #[test]
    fn diversity_examples() {
        let g = genome_with_included(&[true, false]);
        assert_eq!(diversity(&[g.clone(), g.clone(), g.clone()]).unwrap(), 0.0);
        assert_eq!(mean_pairwise_hamming(&["000000", "101010"]).unwrap(), 3.0);
        // 6 pairs of 2-bit strings, distances 1,1,2,2,1,1 → 8/6
        let d = mean_pairwise_hamming(&["00", "01", "10", "11"]).unwrap();
        assert!((d - 4.0 / 3.0).abs() < 1e-15);
        assert!(mean_pairwise_hamming(&["00", "0"]).is_err());
        assert!(mean_pairwise_hamming::<&str>(&[]).is_err());
        assert_eq!(unique_count(&[g.clone(), g.clone()]), 1);
    }

    #[test]
    fn rank_prefers_fewer_params_on_fitness_tie() {
        let a = individual(0.8, 0); // RX, RY: 2 params
        let b = individual(0.8, 3); // H, CNOT: 0 params
        assert_eq!(b.rank_cmp(&a), Ordering::Less);
        assert_eq!(a.rank_cmp(&a), Ordering::Equal);
    }

    #[test]
    fn breed_handles_odd_parent_count() {
        let parents: Vec<_> = (0..3).map(|_| genome_with_included(&[true; 4])).collect();
        let kids = breed(&parents, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(kids, parents);
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: HashSet<_> = (0..10)
            .flat_map(|g| (0..30).map(move |i| derive_seed(7, g, i)))
            .collect();
        assert_eq!(seeds.len(), 300);
    }

    #[test]
    fn config_validation() {
        assert!(EvoConfig::default().validate().is_ok());
        for bad in [
            EvoConfig {
                population_size: 0,
                ..EvoConfig::default()
            },
            EvoConfig {
                mutation_prob: 1.5,
                ..EvoConfig::default()
            },
            EvoConfig {
                alpha: -0.1,
                ..EvoConfig::default()
            },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }
}
