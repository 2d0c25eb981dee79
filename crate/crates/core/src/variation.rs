//! Tournament selection and the three per-tree genetic operators.
//!
//! Every operator acts independently on each tree of a multi-tree with its
//! own rate. Crossover only exchanges material between trees at the same
//! index, so tree `j` of every genome keeps describing latent dimension `j`.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gp::{grow_tree, random_terminal, FunctionSet, Genome, MultiTree, Symbol, Tree, DEFAULT_MAX_DEPTH};
use crate::rng::Rng as GpRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VariationConfig {
    pub crossover_rate: f64,
    pub subtree_mutation_rate: f64,
    pub one_point_mutation_rate: f64,
    pub tournament_size: usize,
    pub elitism: usize,
    pub max_depth: usize,
    pub function_set: FunctionSet,
}

impl Default for VariationConfig {
    fn default() -> Self {
        Self {
            crossover_rate: 0.8,
            subtree_mutation_rate: 0.2,
            one_point_mutation_rate: 0.2,
            tournament_size: 7,
            elitism: 1,
            max_depth: DEFAULT_MAX_DEPTH,
            function_set: FunctionSet::Polynomial,
        }
    }
}

impl VariationConfig {
    pub fn validate(&self, population: usize) -> crate::Result<()> {
        let rates = [
            self.crossover_rate,
            self.subtree_mutation_rate,
            self.one_point_mutation_rate,
        ];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(crate::Error::Config("operator rates must lie in [0, 1]".into()));
        }
        if self.tournament_size == 0 {
            return Err(crate::Error::Config("tournament size must be at least 1".into()));
        }
        if self.elitism >= population {
            return Err(crate::Error::Config(format!(
                "elitism {} must be below population size {population}",
                self.elitism
            )));
        }
        Ok(())
    }
}

/// Index of the lowest-fitness member among `size` uniform draws with
/// replacement; equal fitness goes to the lower index.
pub fn tournament_select<R: Rng + ?Sized>(fitness: &[f64], size: usize, rng: &mut R) -> usize {
    assert!(!fitness.is_empty(), "tournament over an empty population");
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..size {
        let c = rng.random_range(0..fitness.len());
        if fitness[c] < fitness[best] || (fitness[c] == fitness[best] && c < best) {
            best = c;
        }
    }
    best
}

/// Swap uniformly chosen subtrees; `None` when a child would exceed `max_depth`.
pub fn crossover_trees<R: Rng + ?Sized>(a: &Tree, b: &Tree, max_depth: usize, rng: &mut R) -> Option<(Tree, Tree)> {
    let ia = rng.random_range(0..a.node_count());
    let ib = rng.random_range(0..b.node_count());
    let ca = a.replace_subtree(ia, b.subtree(ib));
    let cb = b.replace_subtree(ib, a.subtree(ia));
    (ca.depth() <= max_depth && cb.depth() <= max_depth).then_some((ca, cb))
}

pub(crate) fn crossover_traced<R: Rng + ?Sized>(
    a: &MultiTree,
    b: &MultiTree,
    rate: f64,
    max_depth: usize,
    rng: &mut R,
) -> (MultiTree, MultiTree, Vec<bool>) {
    assert_eq!(a.k(), b.k(), "crossover partners need equal tree counts");
    let mut ca = a.clone();
    let mut cb = b.clone();
    let mut attempted = vec![false; a.k()];
    for j in 0..a.k() {
        if rng.random_bool(rate) {
            attempted[j] = true;
            if let Some((x, y)) = crossover_trees(&a.trees[j], &b.trees[j], max_depth, rng) {
                ca.trees[j] = x;
                cb.trees[j] = y;
            }
        }
    }
    (ca, cb, attempted)
}

/// Same-index subtree crossover; parents are left untouched.
pub fn same_index_crossover<R: Rng + ?Sized>(
    a: &MultiTree,
    b: &MultiTree,
    rate: f64,
    max_depth: usize,
    rng: &mut R,
) -> (MultiTree, MultiTree) {
    let (x, y, _) = crossover_traced(a, b, rate, max_depth, rng);
    (x, y)
}

pub(crate) fn subtree_mutation_traced<R: Rng + ?Sized>(
    mt: &MultiTree,
    rate: f64,
    max_depth: usize,
    fs: FunctionSet,
    rng: &mut R,
) -> (MultiTree, Vec<bool>) {
    let mut out = mt.clone();
    let mut fired = vec![false; mt.k()];
    for (j, t) in out.trees.iter_mut().enumerate() {
        if !rng.random_bool(rate) {
            continue;
        }
        fired[j] = true;
        let at = rng.random_range(0..t.node_count());
        let depth_at = t.node_depths()[at];
        let budget = max_depth.saturating_sub(depth_at);
        let fresh = grow_tree(0, budget, t.input_arity, fs, rng);
        *t = t.replace_subtree(at, &fresh.nodes);
    }
    (out, fired)
}

/// Replace a random subtree of each tree (with probability `rate`) by a
/// fresh grow-method tree sized to respect `max_depth`.
pub fn subtree_mutation<R: Rng + ?Sized>(
    mt: &MultiTree,
    rate: f64,
    max_depth: usize,
    fs: FunctionSet,
    rng: &mut R,
) -> MultiTree {
    subtree_mutation_traced(mt, rate, max_depth, fs, rng).0
}

pub(crate) fn one_point_mutation_traced<R: Rng + ?Sized>(
    mt: &MultiTree,
    rate: f64,
    fs: FunctionSet,
    rng: &mut R,
) -> (MultiTree, Vec<bool>) {
    let mut out = mt.clone();
    let mut fired = vec![false; mt.k()];
    for (j, t) in out.trees.iter_mut().enumerate() {
        if !rng.random_bool(rate) {
            continue;
        }
        fired[j] = true;
        let at = rng.random_range(0..t.node_count());
        t.nodes[at] = match t.nodes[at] {
            Symbol::Op(op) => {
                let alternatives: Vec<_> = fs
                    .ops()
                    .iter()
                    .copied()
                    .filter(|o| *o != op && o.arity() == op.arity())
                    .collect();
                Symbol::Op(alternatives.choose(rng).copied().unwrap_or(op))
            }
            _ => random_terminal(t.input_arity, rng),
        };
    }
    (out, fired)
}

/// Swap one node's symbol for another of the same arity; shape is unchanged.
pub fn one_point_mutation<R: Rng + ?Sized>(mt: &MultiTree, rate: f64, fs: FunctionSet, rng: &mut R) -> MultiTree {
    one_point_mutation_traced(mt, rate, fs, rng).0
}

/// Crossover of two genomes part by part (encoder with encoder, decoder with decoder).
pub fn crossover_genomes<R: Rng + ?Sized>(a: &Genome, b: &Genome, cfg: &VariationConfig, rng: &mut R) -> (Genome, Genome) {
    let mut ca = a.clone();
    let mut cb = b.clone();
    for (pa, pb) in ca.parts_mut().into_iter().zip(cb.parts_mut()) {
        let (x, y) = same_index_crossover(pa, pb, cfg.crossover_rate, cfg.max_depth, rng);
        *pa = x;
        *pb = y;
    }
    (ca, cb)
}

/// Subtree mutation then one-point mutation of every part.
pub fn mutate_genome<R: Rng + ?Sized>(g: &Genome, cfg: &VariationConfig, rng: &mut R) -> Genome {
    let mut out = g.clone();
    for part in out.parts_mut() {
        let m = subtree_mutation(part, cfg.subtree_mutation_rate, cfg.max_depth, cfg.function_set, rng);
        *part = one_point_mutation(&m, cfg.one_point_mutation_rate, cfg.function_set, rng);
    }
    out
}

/// Indices of the `count` best genomes, ties broken by index.
pub fn elite_indices(fitness: &[f64], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));
    order.truncate(count);
    order
}

/// Elites copied verbatim, the rest bred from tournament-selected pairs via
/// crossover → subtree mutation → one-point mutation.
pub fn next_generation(population: &[Genome], fitness: &[f64], cfg: &VariationConfig, rng: &mut GpRng) -> Vec<Genome> {
    assert_eq!(population.len(), fitness.len());
    let size = population.len();
    let mut next: Vec<Genome> = elite_indices(fitness, cfg.elitism)
        .into_iter()
        .map(|i| population[i].clone())
        .collect();
    while next.len() < size {
        let a = tournament_select(fitness, cfg.tournament_size, rng);
        let b = tournament_select(fitness, cfg.tournament_size, rng);
        let (ca, cb) = crossover_genomes(&population[a], &population[b], cfg, rng);
        next.push(mutate_genome(&ca, cfg, rng));
        if next.len() < size {
            next.push(mutate_genome(&cb, cfg, rng));
        }
    }
    next
}
