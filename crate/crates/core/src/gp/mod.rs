//! Expression-tree genomes.
//!
//! Trees are stored as prefix-order symbol vectors: an operator is followed
//! by its operands' subtrees, so every subtree is a contiguous slice.

mod infix;
mod init;

pub use infix::{parse_infix, simplify, to_infix};
pub use init::{full_tree, grow_tree, ramped_half_and_half, ramped_half_and_half_autoencoders, random_terminal};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::Matrix;

/// Intermediate results are clamped into `[-CLAMP, CLAMP]`.
pub const CLAMP: f64 = 1e12;
/// `plog(x) = ln(|x| + PLOG_EPS)`.
pub const PLOG_EPS: f64 = 1e-6;
pub const DEFAULT_MAX_DEPTH: usize = 7;
pub const DEFAULT_MIN_DEPTH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    Sub,
    Add,
    Mul,
    Cos,
    Plog,
}

impl Op {
    pub fn arity(self) -> usize {
        match self {
            Op::Sub | Op::Add | Op::Mul => 2,
            Op::Cos | Op::Plog => 1,
        }
    }

    #[inline]
    pub fn apply2(self, a: f64, b: f64) -> f64 {
        sanitize(match self {
            Op::Sub => a - b,
            Op::Add => a + b,
            Op::Mul => a * b,
            Op::Cos | Op::Plog => unreachable!("unary op applied to two operands"),
        })
    }

    #[inline]
    pub fn apply1(self, a: f64) -> f64 {
        sanitize(match self {
            Op::Cos => a.cos(),
            Op::Plog => (a.abs() + PLOG_EPS).ln(),
            _ => unreachable!("binary op applied to one operand"),
        })
    }
}

#[inline]
fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-CLAMP, CLAMP)
    }
}

/// One node of a tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Symbol {
    Var(usize),
    Const(f64),
    Op(Op),
}

impl Symbol {
    pub fn arity(&self) -> usize {
        match self {
            Symbol::Op(op) => op.arity(),
            _ => 0,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.arity() == 0
    }
}

/// Operators available to interior nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionSet {
    /// `{-, +, ×}`: evolved expressions are polynomials.
    #[default]
    Polynomial,
    /// `{-, +, ×, cos, plog}`.
    Extended,
}

impl FunctionSet {
    pub fn ops(self) -> &'static [Op] {
        match self {
            FunctionSet::Polynomial => &[Op::Sub, Op::Add, Op::Mul],
            FunctionSet::Extended => &[Op::Sub, Op::Add, Op::Mul, Op::Cos, Op::Plog],
        }
    }
}

/// A single expression `ℝ^input_arity → ℝ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Symbol>,
    pub input_arity: usize,
}

impl Tree {
    /// Validates that `nodes` is a single well-formed prefix expression.
    pub fn new(nodes: Vec<Symbol>, input_arity: usize) -> Result<Self> {
        let mut need = 1usize;
        for (i, s) in nodes.iter().enumerate() {
            if need == 0 {
                return Err(invalid(format!("trailing symbols after position {i}")));
            }
            match s {
                Symbol::Var(j) if *j >= input_arity => {
                    return Err(invalid(format!("variable x{j} outside input arity {input_arity}")))
                }
                Symbol::Const(c) if !c.is_finite() => return Err(invalid("non-finite constant")),
                _ => {}
            }
            need = need - 1 + s.arity();
        }
        if need != 0 {
            return Err(invalid("incomplete prefix expression"));
        }
        Ok(Self { nodes, input_arity })
    }

    pub fn constant(value: f64, input_arity: usize) -> Self {
        Self {
            nodes: vec![Symbol::Const(value)],
            input_arity,
        }
    }

    pub fn variable(index: usize, input_arity: usize) -> Self {
        Self {
            nodes: vec![Symbol::Var(index)],
            input_arity,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Edges on the longest root-to-leaf path; a lone terminal has depth 0.
    pub fn depth(&self) -> usize {
        let mut stack: Vec<usize> = Vec::with_capacity(16);
        for s in self.nodes.iter().rev() {
            let d = match s.arity() {
                0 => 0,
                a => {
                    let mut m = 0;
                    for _ in 0..a {
                        m = m.max(stack.pop().expect("well-formed tree"));
                    }
                    m + 1
                }
            };
            stack.push(d);
        }
        stack.pop().unwrap_or(0)
    }

    /// Depth of every node position (root = 0).
    pub fn node_depths(&self) -> Vec<usize> {
        let mut depths = Vec::with_capacity(self.nodes.len());
        // unfilled operand slots of each ancestor on the current path
        let mut open: Vec<usize> = Vec::new();
        for s in &self.nodes {
            while open.last() == Some(&0) {
                open.pop();
            }
            depths.push(open.len());
            if let Some(last) = open.last_mut() {
                *last -= 1;
            }
            if s.arity() > 0 {
                open.push(s.arity());
            }
        }
        depths
    }

    /// Exclusive end of the subtree rooted at `start`.
    pub fn subtree_end(&self, start: usize) -> usize {
        let mut need = 1usize;
        let mut i = start;
        while need > 0 {
            need = need - 1 + self.nodes[i].arity();
            i += 1;
        }
        i
    }

    pub fn subtree(&self, start: usize) -> &[Symbol] {
        &self.nodes[start..self.subtree_end(start)]
    }

    /// Copy with the subtree at `start` replaced by `replacement`.
    pub fn replace_subtree(&self, start: usize, replacement: &[Symbol]) -> Tree {
        let end = self.subtree_end(start);
        let mut nodes = Vec::with_capacity(self.nodes.len() - (end - start) + replacement.len());
        nodes.extend_from_slice(&self.nodes[..start]);
        nodes.extend_from_slice(replacement);
        nodes.extend_from_slice(&self.nodes[end..]);
        Tree {
            nodes,
            input_arity: self.input_arity,
        }
    }

    /// Evaluate on one input row.
    pub fn eval(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.input_arity {
            return Err(invalid(format!(
                "tree expects {} inputs, got {}",
                self.input_arity,
                row.len()
            )));
        }
        Ok(self.eval_unchecked(row))
    }

    pub(crate) fn eval_unchecked(&self, row: &[f64]) -> f64 {
        let mut stack: Vec<f64> = Vec::with_capacity(16);
        for s in self.nodes.iter().rev() {
            let v = match *s {
                Symbol::Var(j) => row[j],
                Symbol::Const(c) => c,
                Symbol::Op(op) if op.arity() == 2 => {
                    let a = stack.pop().expect("well-formed tree");
                    let b = stack.pop().expect("well-formed tree");
                    op.apply2(a, b)
                }
                Symbol::Op(op) => {
                    let a = stack.pop().expect("well-formed tree");
                    op.apply1(a)
                }
            };
            stack.push(v);
        }
        stack.pop().unwrap_or(0.0)
    }

    /// Evaluate on every row of `x`, column-at-a-time. Bitwise identical to
    /// calling [`Tree::eval`] per row.
    pub fn eval_rows(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.input_arity {
            return Err(invalid(format!(
                "tree expects {} inputs, got {}",
                self.input_arity,
                x.cols()
            )));
        }
        let n = x.rows();
        let mut stack: Vec<Vec<f64>> = Vec::with_capacity(16);
        let mut pool: Vec<Vec<f64>> = Vec::new();
        let take = |pool: &mut Vec<Vec<f64>>| pool.pop().unwrap_or_else(|| vec![0.0; n]);
        for s in self.nodes.iter().rev() {
            match *s {
                Symbol::Var(j) => {
                    let mut buf = take(&mut pool);
                    for (b, r) in buf.iter_mut().zip(x.row_iter()) {
                        *b = r[j];
                    }
                    stack.push(buf);
                }
                Symbol::Const(c) => {
                    let mut buf = take(&mut pool);
                    buf.iter_mut().for_each(|b| *b = c);
                    stack.push(buf);
                }
                Symbol::Op(op) if op.arity() == 2 => {
                    let mut a = stack.pop().expect("well-formed tree");
                    let b = stack.pop().expect("well-formed tree");
                    for (av, bv) in a.iter_mut().zip(&b) {
                        *av = op.apply2(*av, *bv);
                    }
                    pool.push(b);
                    stack.push(a);
                }
                Symbol::Op(op) => {
                    let a = stack.last_mut().expect("well-formed tree");
                    a.iter_mut().for_each(|v| *v = op.apply1(*v));
                }
            }
        }
        Ok(stack.pop().unwrap_or_else(|| vec![0.0; n]))
    }

    /// Indices of the variables the tree reads, sorted and deduplicated.
    pub fn variables(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|s| match s {
                Symbol::Var(j) => Some(*j),
                _ => None,
            })
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// `k` trees, tree `j` producing latent coordinate `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiTree {
    pub trees: Vec<Tree>,
}

impl MultiTree {
    pub fn new(trees: Vec<Tree>) -> Result<Self> {
        if let Some(first) = trees.first() {
            if trees.iter().any(|t| t.input_arity != first.input_arity) {
                return Err(invalid("trees of a multi-tree must share input arity"));
            }
        }
        Ok(Self { trees })
    }

    pub fn k(&self) -> usize {
        self.trees.len()
    }

    pub fn input_arity(&self) -> usize {
        self.trees.first().map_or(0, |t| t.input_arity)
    }

    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(Tree::depth).max().unwrap_or(0)
    }

    pub fn node_count(&self) -> usize {
        self.trees.iter().map(Tree::node_count).sum()
    }

    /// Apply every tree row-wise: an `n × k` matrix.
    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_arity() {
            return Err(invalid(format!(
                "multi-tree expects {} columns, got {}",
                self.input_arity(),
                x.cols()
            )));
        }
        let n = x.rows();
        let k = self.k();
        let mut out = vec![0.0; n * k];
        for (j, t) in self.trees.iter().enumerate() {
            for (i, v) in t.eval_rows(x)?.into_iter().enumerate() {
                out[i * k + j] = v;
            }
        }
        Ok(Matrix::from_vec_unchecked(n, k, out))
    }
}

/// Encoder multi-tree (`p → k`) plus decoder multi-tree (`k → p′`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderMultiTree {
    pub encoder: MultiTree,
    pub decoder: MultiTree,
}

impl AutoencoderMultiTree {
    pub fn new(encoder: MultiTree, decoder: MultiTree) -> Result<Self> {
        if decoder.input_arity() != encoder.k() {
            return Err(invalid(format!(
                "decoder arity {} does not match encoder output {}",
                decoder.input_arity(),
                encoder.k()
            )));
        }
        Ok(Self { encoder, decoder })
    }

    /// `(latent n×k, reconstruction n×p′)`.
    pub fn autoencode(&self, x: &Matrix) -> Result<(Matrix, Matrix)> {
        let latent = self.encoder.encode(x)?;
        let recon = self.decoder.encode(&latent)?;
        Ok((latent, recon))
    }
}

pub fn eval_tree(t: &Tree, row: &[f64]) -> Result<f64> {
    t.eval(row)
}

pub fn encode(mt: &MultiTree, x: &Matrix) -> Result<Matrix> {
    mt.encode(x)
}

pub fn autoencode(amt: &AutoencoderMultiTree, x: &Matrix) -> Result<(Matrix, Matrix)> {
    amt.autoencode(x)
}

/// Either genome representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Genome {
    Multi(MultiTree),
    Autoencoder(AutoencoderMultiTree),
}

impl Genome {
    /// Tree lists in a fixed order (encoder before decoder); variation pairs
    /// parts position-wise.
    pub fn parts(&self) -> Vec<&MultiTree> {
        match self {
            Genome::Multi(m) => vec![m],
            Genome::Autoencoder(a) => vec![&a.encoder, &a.decoder],
        }
    }

    pub fn parts_mut(&mut self) -> Vec<&mut MultiTree> {
        match self {
            Genome::Multi(m) => vec![m],
            Genome::Autoencoder(a) => vec![&mut a.encoder, &mut a.decoder],
        }
    }

    /// The part that maps inputs to the latent space.
    pub fn encoder(&self) -> &MultiTree {
        match self {
            Genome::Multi(m) => m,
            Genome::Autoencoder(a) => &a.encoder,
        }
    }

    pub fn latent(&self, x: &Matrix) -> Result<Matrix> {
        self.encoder().encode(x)
    }

    pub fn tree_count(&self) -> usize {
        self.parts().iter().map(|p| p.k()).sum()
    }

    pub fn max_depth(&self) -> usize {
        self.parts().iter().map(|p| p.max_depth()).max().unwrap_or(0)
    }

    pub fn node_count(&self) -> usize {
        self.parts().iter().map(|p| p.node_count()).sum()
    }
}
