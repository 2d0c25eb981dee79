use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{AutoencoderMultiTree, FunctionSet, MultiTree, Symbol, Tree};

/// Probability that a terminal is a variable rather than an ephemeral constant.
pub const VARIABLE_PROBABILITY: f64 = 0.9;

/// A variable (uniform over inputs) or a fresh `N(0, 1)` constant.
pub fn random_terminal<R: Rng + ?Sized>(input_arity: usize, rng: &mut R) -> Symbol {
    if input_arity > 0 && rng.random_bool(VARIABLE_PROBABILITY) {
        Symbol::Var(rng.random_range(0..input_arity))
    } else {
        Symbol::Const(rng.sample(StandardNormal))
    }
}

fn random_op<R: Rng + ?Sized>(fs: FunctionSet, rng: &mut R) -> Symbol {
    Symbol::Op(*fs.ops().choose(rng).expect("function sets are non-empty"))
}

/// Every leaf at exactly `depth`.
pub fn full_tree<R: Rng + ?Sized>(depth: usize, input_arity: usize, fs: FunctionSet, rng: &mut R) -> Tree {
    let mut nodes = Vec::new();
    build(&mut nodes, 0, depth, depth, input_arity, fs, rng);
    Tree { nodes, input_arity }
}

/// Interior nodes forced above `min_depth`, terminals forced at `max_depth`,
/// otherwise a terminal with probability `|T| / (|T| + |F|)` where the
/// constant class counts as one terminal.
pub fn grow_tree<R: Rng + ?Sized>(
    min_depth: usize,
    max_depth: usize,
    input_arity: usize,
    fs: FunctionSet,
    rng: &mut R,
) -> Tree {
    let mut nodes = Vec::new();
    build(&mut nodes, 0, min_depth.min(max_depth), max_depth, input_arity, fs, rng);
    Tree { nodes, input_arity }
}

fn build<R: Rng + ?Sized>(
    out: &mut Vec<Symbol>,
    depth: usize,
    min_depth: usize,
    max_depth: usize,
    input_arity: usize,
    fs: FunctionSet,
    rng: &mut R,
) {
    let terminals = (input_arity + 1) as f64;
    let terminal_ratio = terminals / (terminals + fs.ops().len() as f64);
    let terminal = depth >= max_depth || (depth >= min_depth && rng.random_bool(terminal_ratio));
    if terminal {
        out.push(random_terminal(input_arity, rng));
        return;
    }
    let op = random_op(fs, rng);
    out.push(op);
    for _ in 0..op.arity() {
        build(out, depth + 1, min_depth, max_depth, input_arity, fs, rng);
    }
}

/// Target depth and method for genome `i` of a ramped population: depths
/// cycle over `[depth_min, depth_max]`, and successive visits to a depth
/// alternate full / grow.
fn ramp(i: usize, depth_min: usize, depth_max: usize) -> (usize, bool) {
    let buckets = depth_max - depth_min + 1;
    (depth_min + i % buckets, (i / buckets) % 2 == 0)
}

fn ramped_tree<R: Rng + ?Sized>(
    depth: usize,
    full: bool,
    depth_min: usize,
    input_arity: usize,
    fs: FunctionSet,
    rng: &mut R,
) -> Tree {
    if full {
        full_tree(depth, input_arity, fs, rng)
    } else {
        grow_tree(depth_min, depth, input_arity, fs, rng)
    }
}

/// Ramped half-and-half initialisation of `count` multi-trees of `k_trees`
/// trees each.
pub fn ramped_half_and_half<R: Rng + ?Sized>(
    count: usize,
    input_arity: usize,
    k_trees: usize,
    depth_min: usize,
    depth_max: usize,
    fs: FunctionSet,
    rng: &mut R,
) -> Vec<MultiTree> {
    assert!(depth_min <= depth_max, "depth_min must not exceed depth_max");
    (0..count)
        .map(|i| {
            let (depth, full) = ramp(i, depth_min, depth_max);
            MultiTree {
                trees: (0..k_trees)
                    .map(|_| ramped_tree(depth, full, depth_min, input_arity, fs, rng))
                    .collect(),
            }
        })
        .collect()
}

/// Ramped half-and-half for encoder/decoder genomes: encoders `p → k`,
/// decoders `k → outputs`.
#[allow(clippy::too_many_arguments)]
pub fn ramped_half_and_half_autoencoders<R: Rng + ?Sized>(
    count: usize,
    input_arity: usize,
    k: usize,
    outputs: usize,
    depth_min: usize,
    depth_max: usize,
    fs: FunctionSet,
    rng: &mut R,
) -> Vec<AutoencoderMultiTree> {
    assert!(depth_min <= depth_max, "depth_min must not exceed depth_max");
    (0..count)
        .map(|i| {
            let (depth, full) = ramp(i, depth_min, depth_max);
            let encoder = MultiTree {
                trees: (0..k)
                    .map(|_| ramped_tree(depth, full, depth_min, input_arity, fs, rng))
                    .collect(),
            };
            let decoder = MultiTree {
                trees: (0..outputs)
                    .map(|_| ramped_tree(depth, full, depth_min, k, fs, rng))
                    .collect(),
            };
            AutoencoderMultiTree { encoder, decoder }
        })
        .collect()
}
