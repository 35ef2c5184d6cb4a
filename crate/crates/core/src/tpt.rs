//! Truncated Pólya trees with a uniform base measure.
//!
//! Level-`j` branching probabilities are symmetric Beta (1-D) or Dirichlet
//! (2-D) with parameter `alpha_j = c * j^2`. A tree node splits when it is
//! internal in the supplied [`PartitionTree`] and sits above `params.depth`;
//! every other node is a leaf carrying the uniform density on its block.
//! On full trees all leaves sit at `depth`. On separating-pruned trees the
//! leaves are shallower, and the formulas below remain exact because each
//! level a lone point would have descended contributes a factor of exactly
//! one.
//!
//! Everything is computed in log space.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::partition::{Dim, NodeWord, PartitionTree, Point};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TptParams {
    c: f64,
    depth: u32,
    dim: Dim,
}

impl TptParams {
    pub fn new(c: f64, depth: u32, dim: Dim) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
        }
        if depth == 0 {
            return Err(Error::InvalidParameter("depth must be at least 1".into()));
        }
        Ok(TptParams { c, depth, dim })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// Dirichlet parameter of the children at `level` (1-based).
    #[inline]
    pub fn alpha(&self, level: u32) -> f64 {
        let j = level as f64;
        self.c * j * j
    }

    fn check_tree(&self, tree: &PartitionTree) -> Result<()> {
        if tree.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim.get(),
                found: tree.dim().get(),
            });
        }
        if tree.max_depth() < self.depth {
            return Err(Error::InvalidParameter(format!(
                "tree depth {} is below model depth {}",
                tree.max_depth(),
                self.depth
            )));
        }
        Ok(())
    }

    #[inline]
    fn splits(&self, tree: &PartitionTree, word: &NodeWord) -> bool {
        word.level() < self.depth && tree.is_internal(word)
    }
}

/// Branching probabilities for each internal node. Nodes without an entry
/// split their mass uniformly.
#[derive(Clone, Debug)]
pub struct Branching {
    dim: Dim,
    probs: FxHashMap<NodeWord, Vec<f64>>,
    uniform: Vec<f64>,
}

impl Branching {
    pub fn uniform(dim: Dim) -> Self {
        Branching {
            dim,
            probs: FxHashMap::default(),
            uniform: vec![1.0 / dim.fanout() as f64; dim.fanout()],
        }
    }

    pub fn set(&mut self, node: NodeWord, probs: Vec<f64>) -> Result<()> {
        if node.dim() != self.dim || probs.len() != self.dim.fanout() {
            return Err(Error::DimensionMismatch {
                expected: self.dim.fanout(),
                found: probs.len(),
            });
        }
        let total: f64 = probs.iter().sum();
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "branching probabilities at {node} must form a probability vector, got {probs:?}"
            )));
        }
        self.probs.insert(node, probs);
        Ok(())
    }

    pub fn get(&self, node: &NodeWord) -> &[f64] {
        self.probs.get(node).map_or(&self.uniform, Vec::as_slice)
    }
}

/// Log-density of one random histogram drawn from the tree, given its
/// branching probabilities. A zero probability on the path gives `-inf`.
pub fn log_density(
    params: &TptParams,
    tree: &PartitionTree,
    thetas: &Branching,
    x: &[f64],
) -> Result<f64> {
    params.check_tree(tree)?;
    let code = tree.encode(&[point_of(x, params.dim)?])?[0];
    let mut total = 0.0;
    let mut parent = NodeWord::root(params.dim);
    let mut leaf_level = 0;
    for level in 1..=params.depth {
        if !params.splits(tree, &parent) {
            break;
        }
        let child = tree.word_of(code, level);
        let digit = *child.digits().last().expect("level >= 1");
        total += thetas.get(&parent)[digit as usize].ln();
        parent = child;
        leaf_level = level;
    }
    Ok(total + leaf_log_volume(params.dim, leaf_level))
}

/// `-ln(volume)` of a leaf at `level`.
#[inline]
fn leaf_log_volume(dim: Dim, level: u32) -> f64 {
    (dim.get() as u32 * level) as f64 * std::f64::consts::LN_2
}

#[derive(Clone, Copy)]
enum AnyPoint {
    One(f64),
    Two([f64; 2]),
}

impl Point for AnyPoint {
    fn coords(&self) -> &[f64] {
        match self {
            AnyPoint::One(x) => std::slice::from_ref(x),
            AnyPoint::Two(p) => p,
        }
    }
}

fn point_of(x: &[f64], dim: Dim) -> Result<AnyPoint> {
    match (dim, x) {
        (Dim::One, [a]) => Ok(AnyPoint::One(*a)),
        (Dim::Two, [a, b]) => Ok(AnyPoint::Two([*a, *b])),
        _ => Err(Error::DimensionMismatch {
            expected: dim.get(),
            found: x.len(),
        }),
    }
}

/// Data counts per node, over every node a data point passes through.
#[derive(Clone, Debug, Default)]
pub struct CountCache {
    counts: BTreeMap<NodeWord, u64>,
    total: u64,
    leaf_level_sum: u64,
}

impl CountCache {
    pub fn build<P: Point>(params: &TptParams, tree: &PartitionTree, points: &[P]) -> Result<Self> {
        params.check_tree(tree)?;
        let codes = tree.encode(points)?;
        Ok(Self::from_codes(params, tree, &codes))
    }

    pub(crate) fn from_codes(params: &TptParams, tree: &PartitionTree, codes: &[u64]) -> Self {
        let mut counts = BTreeMap::new();
        let mut leaf_level_sum = 0u64;
        for &code in codes {
            let mut level = 0;
            loop {
                let w = tree.word_of(code, level);
                *counts.entry(w).or_insert(0) += 1;
                if !params.splits(tree, &w) {
                    break;
                }
                level += 1;
            }
            leaf_level_sum += level as u64;
        }
        CountCache {
            counts,
            total: codes.len() as u64,
            leaf_level_sum,
        }
    }

    pub fn count(&self, node: &NodeWord) -> u64 {
        self.counts.get(node).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Nodes with non-zero count, breadth-first.
    pub fn iter(&self) -> impl Iterator<Item = (&NodeWord, &u64)> {
        self.counts.iter()
    }
}

/// Marginal likelihood as a product of sequential predictive densities,
/// evaluated in data order while counts are updated incrementally.
pub fn log_ml_telescoping<P: Point>(
    params: &TptParams,
    tree: &PartitionTree,
    data: &[P],
) -> Result<f64> {
    params.check_tree(tree)?;
    let codes = tree.encode(data)?;
    Ok(telescoping_codes(params, tree, &codes))
}

pub(crate) fn telescoping_codes(params: &TptParams, tree: &PartitionTree, codes: &[u64]) -> f64 {
    let fan = params.dim.fanout() as f64;
    let mut counts: FxHashMap<NodeWord, u32> = FxHashMap::default();
    counts.reserve(codes.len() * 2);
    let mut path = Vec::with_capacity(params.depth as usize);
    let mut total = 0.0;
    for (i, &code) in codes.iter().enumerate() {
        path.clear();
        let mut parent = NodeWord::root(params.dim);
        let mut n_parent = i as u32;
        for level in 1..=params.depth {
            if !params.splits(tree, &parent) {
                break;
            }
            let w = tree.word_of(code, level);
            let n = counts.get(&w).copied().unwrap_or(0);
            // With no earlier point in the parent the factor is exactly one.
            if n_parent > 0 {
                let a = fan * params.alpha(level);
                total += ((a + fan * n as f64) / (a + n_parent as f64)).ln();
            }
            path.push(w);
            parent = w;
            n_parent = n;
        }
        for w in &path {
            *counts.entry(*w).or_insert(0) += 1;
        }
    }
    total
}

/// Marginal likelihood as a product over internal nodes of Dirichlet
/// normaliser ratios, times the leaf volume terms. Order-free.
pub fn log_ml_closed_form<P: Point>(
    params: &TptParams,
    tree: &PartitionTree,
    data: &[P],
) -> Result<f64> {
    let cache = CountCache::build(params, tree, data)?;
    Ok(closed_form_from_cache(params, tree, &cache))
}

fn closed_form_from_cache(params: &TptParams, tree: &PartitionTree, cache: &CountCache) -> f64 {
    if cache.total <= 1 {
        return 0.0;
    }
    let fan = params.dim.fanout() as f64;
    let mut total = 0.0;
    for (node, &n) in cache.iter() {
        if !params.splits(tree, node) {
            continue;
        }
        let a = params.alpha(node.level() + 1);
        let mut term = ln_gamma(fan * a) - ln_gamma(fan * a + n as f64);
        for child in node.children() {
            let k = cache.count(&child);
            if k > 0 {
                term += ln_gamma(a + k as f64) - ln_gamma(a);
            }
        }
        total += term;
    }
    total + (params.dim.get() as u64 * cache.leaf_level_sum) as f64 * std::f64::consts::LN_2
}

/// Posterior predictive log-density at `x` after observing `data`.
pub fn log_predictive_density<P: Point>(
    params: &TptParams,
    tree: &PartitionTree,
    data: &[P],
    x: &[f64],
) -> Result<f64> {
    let cache = CountCache::build(params, tree, data)?;
    let code = tree.encode(&[point_of(x, params.dim)?])?[0];
    Ok(predictive_from_cache(params, tree, &cache, code))
}

fn predictive_from_cache(
    params: &TptParams,
    tree: &PartitionTree,
    cache: &CountCache,
    code: u64,
) -> f64 {
    let fan = params.dim.fanout() as f64;
    let mut total = 0.0;
    let mut parent = NodeWord::root(params.dim);
    let mut n_parent = cache.total;
    for level in 1..=params.depth {
        if !params.splits(tree, &parent) {
            break;
        }
        let w = tree.word_of(code, level);
        let n = cache.count(&w);
        let a = fan * params.alpha(level);
        total += ((a + fan * n as f64) / (a + n_parent as f64)).ln();
        parent = w;
        n_parent = n;
    }
    total
}
