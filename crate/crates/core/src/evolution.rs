//! The generational loop: score on a fresh mini-batch, breed, repeat.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::clock::Stopwatch;
use crate::dataset::BatchSampler;
use crate::error::{Error, Result};
use crate::fitness::FitnessContext;
use crate::gp::{
    ramped_half_and_half, ramped_half_and_half_autoencoders, to_infix, Genome, DEFAULT_MAX_DEPTH, DEFAULT_MIN_DEPTH,
};
use crate::par::map_indices;
use crate::rng::{derive, seeded};
use crate::variation::{elite_indices, next_generation, VariationConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpRunConfig {
    pub population: usize,
    pub generations: usize,
    /// Latent dimensionality (trees per encoder).
    pub k: usize,
    pub batch_size: usize,
    /// Depth range of the initial population.
    pub depth_min: usize,
    pub depth_max: usize,
    pub variation: VariationConfig,
    pub seed: u64,
}

impl Default for GpRunConfig {
    fn default() -> Self {
        Self {
            population: 1000,
            generations: 100,
            k: 2,
            batch_size: 100,
            depth_min: DEFAULT_MIN_DEPTH,
            depth_max: DEFAULT_MAX_DEPTH,
            variation: VariationConfig::default(),
            seed: 0,
        }
    }
}

impl GpRunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::Config("population must hold at least two genomes".into()));
        }
        if self.generations == 0 || self.k == 0 || self.batch_size < 2 {
            return Err(Error::Config("generations and k must be positive and batches hold at least two rows".into()));
        }
        if self.depth_min > self.depth_max || self.depth_max > self.variation.max_depth {
            return Err(Error::Config(format!(
                "initial depths {}..={} must be ordered and within the limit {}",
                self.depth_min, self.depth_max, self.variation.max_depth
            )));
        }
        self.variation.validate(self.population)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub best: Genome,
    /// Fitness of `best` over every row of the fitness context.
    pub best_fitness: f64,
    /// Best batch fitness of each generation.
    pub history: Vec<f64>,
    pub wall_time_secs: f64,
    pub seed: u64,
    /// One infix expression per latent dimension.
    pub expressions: Vec<String>,
    /// Decoder expressions of encoder/decoder genomes.
    pub decoder_expressions: Vec<String>,
}

/// What an observer sees after each generation has been scored.
pub struct GenerationSnapshot<'a> {
    pub generation: usize,
    pub population: &'a [Genome],
    pub fitness: &'a [f64],
    pub batch: &'a [usize],
}

fn initial_population(ctx: &FitnessContext, cfg: &GpRunConfig) -> Vec<Genome> {
    let mut rng = seeded(derive(cfg.seed, "initial population"));
    let p = ctx.inputs.cols();
    let fs = cfg.variation.function_set;
    if ctx.spec.needs_autoencoder() {
        ramped_half_and_half_autoencoders(
            cfg.population,
            p,
            cfg.k,
            ctx.target.cols(),
            cfg.depth_min,
            cfg.depth_max,
            fs,
            &mut rng,
        )
        .into_iter()
        .map(Genome::Autoencoder)
        .collect()
    } else {
        ramped_half_and_half(cfg.population, p, cfg.k, cfg.depth_min, cfg.depth_max, fs, &mut rng)
            .into_iter()
            .map(Genome::Multi)
            .collect()
    }
}

pub fn evolve(ctx: &FitnessContext, cfg: &GpRunConfig) -> Result<RunResult> {
    evolve_observed(ctx, cfg, |_| {})
}

/// [`evolve`] calling `observer` once per generation.
pub fn evolve_observed(
    ctx: &FitnessContext,
    cfg: &GpRunConfig,
    mut observer: impl FnMut(&GenerationSnapshot),
) -> Result<RunResult> {
    cfg.validate()?;
    let start = Stopwatch::start();
    let mut population = initial_population(ctx, cfg);
    ctx.check_genome(&population[0])?;

    let mut rng = seeded(derive(cfg.seed, "variation"));
    let mut sampler = BatchSampler::new(cfg.batch_size, derive(cfg.seed, "batches"));
    let mut fitness: Vec<f64> = Vec::new();
    let mut history = Vec::with_capacity(cfg.generations);
    let mut archive: Vec<Genome> = Vec::with_capacity(cfg.generations);

    for generation in 0..cfg.generations {
        if generation > 0 {
            population = next_generation(&population, &fitness, &cfg.variation, &mut rng);
        }
        let batch = sampler.next_batch(ctx.rows());
        fitness = map_indices(population.len(), |i| ctx.score(&population[i], &batch));
        let best = elite_indices(&fitness, 1)[0];
        history.push(fitness[best]);
        archive.push(population[best].clone());
        observer(&GenerationSnapshot {
            generation,
            population: &population,
            fitness: &fitness,
            batch: &batch,
        });
    }

    let mut candidates: Vec<Genome> = Vec::with_capacity(archive.len() + population.len());
    for g in archive.into_iter().chain(population) {
        if !candidates.contains(&g) {
            candidates.push(g);
        }
    }
    let full = score_distinct_phenotypes(ctx, &candidates);
    let winner = elite_indices(&full, 1)[0];
    let best = candidates.swap_remove(winner);

    let (expressions, decoder_expressions) = match &best {
        Genome::Multi(m) => (m.trees.iter().map(|t| to_infix(t, None, None)).collect(), Vec::new()),
        Genome::Autoencoder(a) => (
            a.encoder.trees.iter().map(|t| to_infix(t, None, None)).collect(),
            a.decoder.trees.iter().map(|t| to_infix(t, None, None)).collect(),
        ),
    };
    Ok(RunResult {
        best,
        best_fitness: full[winner],
        history,
        wall_time_secs: start.secs(),
        seed: cfg.seed,
        expressions,
        decoder_expressions,
    })
}

/// Full-data fitness of every candidate. Multi-tree genomes with
/// bit-identical latent output share one scoring.
fn score_distinct_phenotypes(ctx: &FitnessContext, candidates: &[Genome]) -> Vec<f64> {
    let latents = map_indices(candidates.len(), |i| match &candidates[i] {
        Genome::Multi(m) => m.encode(&ctx.inputs).ok(),
        Genome::Autoencoder(_) => None,
    });
    let mut first_with: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut source: Vec<usize> = (0..candidates.len()).collect();
    for (i, latent) in latents.into_iter().enumerate() {
        if let Some(l) = latent {
            let key: Vec<u64> = l.as_slice().iter().map(|v| v.to_bits()).collect();
            source[i] = *first_with.entry(key).or_insert(i);
        }
    }
    let unique: Vec<usize> = (0..candidates.len()).filter(|&i| source[i] == i).collect();
    let scores = map_indices(unique.len(), |u| ctx.score_all(&candidates[unique[u]]));
    let mut by_index = vec![f64::INFINITY; candidates.len()];
    for (u, &i) in unique.iter().enumerate() {
        by_index[i] = scores[u];
    }
    source.iter().map(|&s| by_index[s]).collect()
}

/// Best batch fitness per generation.
pub fn fitness_curve(result: &RunResult) -> &[f64] {
    &result.history
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitness::{FitnessSpec, Metric, WeightScheme};
    use crate::gp::{parse_infix, MultiTree};
    use crate::numerics::Matrix;
    use rand::Rng;

    fn data(n: usize, p: usize, seed: u64) -> Matrix {
        let mut rng = seeded(seed);
        Matrix::from_vec(n, p, (0..n * p).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
    }

    fn small(seed: u64) -> GpRunConfig {
        GpRunConfig {
            population: 30,
            generations: 5,
            k: 2,
            batch_size: 20,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn degenerate_run_picks_better_initial_genome() {
        let x = data(30, 3, 1);
        let ctx = FitnessContext::new(FitnessSpec::Dist { metric: Metric::Euclidean }, x.clone(), x, None).unwrap();
        let cfg = GpRunConfig {
            population: 2,
            generations: 1,
            variation: VariationConfig {
                crossover_rate: 0.0,
                subtree_mutation_rate: 0.0,
                one_point_mutation_rate: 0.0,
                ..Default::default()
            },
            ..small(2)
        };
        let initial = initial_population(&ctx, &cfg);
        let r = evolve(&ctx, &cfg).unwrap();
        let best = initial.iter().map(|g| ctx.score_all(g)).fold(f64::INFINITY, f64::min);
        assert_eq!(r.best_fitness, best);
        assert!(initial.contains(&r.best));
        assert_eq!(fitness_curve(&r).len(), 1);
    }

    #[test]
    fn runs_are_deterministic() {
        let x = data(50, 4, 3);
        let spec = FitnessSpec::Rank { metric: Metric::Geodesic, weights: WeightScheme::Hyperbolic };
        let ctx = FitnessContext::new(spec, x.clone(), x, None).unwrap();
        let mut a = evolve(&ctx, &small(4)).unwrap();
        let mut b = evolve(&ctx, &small(4)).unwrap();
        a.wall_time_secs = 0.0;
        b.wall_time_secs = 0.0;
        assert_eq!(a, b);
        assert_eq!(a.expressions.len(), 2);
        for e in &a.expressions {
            parse_infix(e, 4).unwrap();
        }
    }

    #[test]
    fn full_batch_history_never_worsens() {
        let x = data(40, 3, 5);
        let ctx = FitnessContext::new(FitnessSpec::Dist { metric: Metric::Euclidean }, x.clone(), x, None).unwrap();
        let cfg = GpRunConfig { batch_size: 40, generations: 8, ..small(6) };
        let mut initial_best = f64::INFINITY;
        let r = evolve_observed(&ctx, &cfg, |s| {
            if s.generation == 0 {
                initial_best = s.fitness.iter().copied().fold(f64::INFINITY, f64::min);
            }
        })
        .unwrap();
        for w in r.history.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(r.best_fitness <= initial_best);
    }

    #[test]
    fn observer_sees_every_generation_intact() {
        let x = data(40, 5, 7);
        let target = crate::dataset::pca_target(&x, 0.99).unwrap().transformed;
        let ctx = FitnessContext::new(FitnessSpec::GpAutoencoder, x, target.clone(), None).unwrap();
        let mut seen = 0;
        let r = evolve_observed(&ctx, &small(8), |s| {
            assert_eq!(s.generation, seen);
            assert_eq!(s.population.len(), 30);
            assert!(s.population.iter().all(|g| g.max_depth() <= 7 && g.tree_count() == 2 + target.cols()));
            assert!(s.fitness.iter().all(|f| !f.is_nan()));
            seen += 1;
        })
        .unwrap();
        assert_eq!(seen, 5);
        assert_eq!(r.decoder_expressions.len(), target.cols());
    }

    #[test]
    fn planted_teacher_is_approached() {
        let x = data(150, 5, 9);
        let planted = MultiTree::new(vec![parse_infix("x0 * x1 - x2", 5).unwrap(), parse_infix("x3 + x4 * x4", 5).unwrap()]).unwrap();
        let l = planted.encode(&x).unwrap();
        let ctx = FitnessContext::new(FitnessSpec::Teacher, x.clone(), x, Some(l)).unwrap();
        let cfg = GpRunConfig { population: 100, generations: 15, batch_size: 100, ..small(10) };
        let r = evolve(&ctx, &cfg).unwrap();
        assert!(r.best_fitness < r.history[0]);
    }

    #[test]
    fn configuration_errors() {
        let x = data(10, 2, 0);
        let ctx = FitnessContext::new(FitnessSpec::Dist { metric: Metric::Euclidean }, x.clone(), x, None).unwrap();
        assert!(evolve(&ctx, &GpRunConfig { population: 1, ..small(0) }).is_err());
        assert!(evolve(&ctx, &GpRunConfig { depth_min: 5, depth_max: 3, ..small(0) }).is_err());
        let auto = FitnessContext::new(FitnessSpec::Teacher, Matrix::zeros(10, 2), Matrix::zeros(10, 2), Some(Matrix::zeros(10, 3))).unwrap();
        assert!(evolve(&auto, &small(0)).is_err());
    }
}
