//! Recursive partitions of the unit interval and the unit square.
//!
//! A [`PartitionTree`] is a regular binary (1-D) or quaternary (2-D) tree of
//! depth `max_depth`. Level-`j` blocks along each axis are
//! `[k/2^j, (k+1)/2^j)`, with the rightmost block closed at 1, so every point
//! of the closed unit cube has exactly one block per level. Nodes are
//! addressed by [`NodeWord`]s; a 2-D digit packs the x-half in its high bit
//! and the y-half in its low bit, so quaternary splits are products of the
//! two axis splits.
//!
//! Full trees are implicit and cost nothing to build. Pruned trees (see
//! [`separating_prune`]) carry an explicit set of internal nodes.
//!
//! Quantile partitions are realised by pushing raw data through the CDF of
//! a Gaussian reference distribution and reusing the dyadic tree on the
//! transformed values. Node boundaries in raw space are then the Gaussian
//! quantiles at `k/2^j` (see [`PartitionTree::raw_block`]).

use std::fmt;
use std::sync::Arc;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Deepest supported tree. Node paths are packed into a `u64` with two bits
/// per level in 2-D, and block endpoints `k/2^j` stay exact in `f64`.
pub const MAX_DEPTH: u32 = 31;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dim {
    One,
    Two,
}

impl Dim {
    pub fn new(d: usize) -> Result<Self> {
        match d {
            1 => Ok(Dim::One),
            2 => Ok(Dim::Two),
            _ => Err(Error::InvalidParameter(format!(
                "dimension must be 1 or 2, got {d}"
            ))),
        }
    }

    #[inline]
    pub fn get(self) -> usize {
        match self {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }

    /// Number of children per node, `2^d`.
    #[inline]
    pub fn fanout(self) -> usize {
        1 << self.get()
    }
}

/// Something with coordinates in `[0,1]^d`.
pub trait Point: Copy + Send + Sync {
    fn coords(&self) -> &[f64];
}

impl Point for f64 {
    #[inline]
    fn coords(&self) -> &[f64] {
        std::slice::from_ref(self)
    }
}

impl Point for [f64; 2] {
    #[inline]
    fn coords(&self) -> &[f64] {
        self
    }
}

/// Address of a node: the sequence of child digits from the root.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeWord {
    level: u8,
    path: u64,
    dim: Dim,
}

impl NodeWord {
    pub fn root(dim: Dim) -> Self {
        NodeWord {
            level: 0,
            path: 0,
            dim,
        }
    }

    pub fn from_digits(dim: Dim, digits: &[u8]) -> Result<Self> {
        if digits.len() > MAX_DEPTH as usize {
            return Err(Error::DepthOverflow {
                depth: digits.len() as u32,
                max: MAX_DEPTH,
            });
        }
        let mut word = NodeWord::root(dim);
        for &d in digits {
            if d as usize >= dim.fanout() {
                return Err(Error::InvalidParameter(format!(
                    "digit {d} out of range for dimension {}",
                    dim.get()
                )));
            }
            word = word.child(d);
        }
        Ok(word)
    }

    #[inline]
    pub(crate) fn from_code(dim: Dim, depth: u32, code: u64, level: u32) -> Self {
        let shift = dim.get() as u32 * (depth - level);
        NodeWord {
            level: level as u8,
            path: code >> shift,
            dim,
        }
    }

    #[inline]
    pub fn level(&self) -> u32 {
        self.level as u32
    }

    #[inline]
    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn is_root(&self) -> bool {
        self.level == 0
    }

    pub fn digits(&self) -> Vec<u8> {
        let bits = self.dim.get() as u32;
        let mask = (1u64 << bits) - 1;
        (0..self.level())
            .map(|i| ((self.path >> (bits * (self.level() - 1 - i))) & mask) as u8)
            .collect()
    }

    #[inline]
    pub fn child(&self, digit: u8) -> Self {
        debug_assert!((digit as usize) < self.dim.fanout());
        NodeWord {
            level: self.level + 1,
            path: (self.path << self.dim.get()) | digit as u64,
            dim: self.dim,
        }
    }

    pub fn children(&self) -> impl Iterator<Item = NodeWord> + '_ {
        (0..self.dim.fanout() as u8).map(move |d| self.child(d))
    }

    pub fn parent(&self) -> Option<Self> {
        (self.level > 0).then(|| NodeWord {
            level: self.level - 1,
            path: self.path >> self.dim.get(),
            dim: self.dim,
        })
    }

    /// Ancestor (or self) at `level`.
    pub fn prefix(&self, level: u32) -> Self {
        assert!(level <= self.level());
        NodeWord {
            level: level as u8,
            path: self.path >> (self.dim.get() as u32 * (self.level() - level)),
            dim: self.dim,
        }
    }

    pub fn is_prefix_of(&self, other: &NodeWord) -> bool {
        self.dim == other.dim && self.level <= other.level && other.prefix(self.level()) == *self
    }

    /// Per-axis block indices `k` such that the block is `[k/2^j, (k+1)/2^j)`.
    fn axis_indices(&self) -> [u64; 2] {
        match self.dim {
            Dim::One => [self.path, 0],
            Dim::Two => {
                let (mut kx, mut ky) = (0u64, 0u64);
                for d in self.digits() {
                    kx = (kx << 1) | (d as u64 >> 1);
                    ky = (ky << 1) | (d as u64 & 1);
                }
                [kx, ky]
            }
        }
    }
}

impl fmt::Display for NodeWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in self.digits() {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for NodeWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NodeWord(\"{self}\")")
    }
}

/// Half-open interval `[lo, hi)`, closed on the right when `hi` is the
/// upper end of the domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub closed_right: bool,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && (x < self.hi || (self.closed_right && x == self.hi))
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub axes: Vec<Interval>,
}

impl Block {
    pub fn contains(&self, coords: &[f64]) -> bool {
        coords.len() == self.axes.len() && self.axes.iter().zip(coords).all(|(i, &x)| i.contains(x))
    }

    pub fn volume(&self) -> f64 {
        self.axes.iter().map(Interval::width).product()
    }
}

/// Gaussian reference distribution for quantile partitions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileSpec {
    pub location: f64,
    pub scale: f64,
}

impl QuantileSpec {
    pub fn new(location: f64, scale: f64) -> Result<Self> {
        if !location.is_finite() || !scale.is_finite() || scale <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "quantile spec needs finite location and positive scale, got ({location}, {scale})"
            )));
        }
        Ok(QuantileSpec { location, scale })
    }

    pub fn standard() -> Self {
        QuantileSpec {
            location: 0.0,
            scale: 1.0,
        }
    }

    /// Location and spread estimated from a sample (mean and sample
    /// standard deviation).
    pub fn from_sample(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::InvalidParameter(
                "need at least two values to estimate a quantile spec".into(),
            ));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        QuantileSpec::new(mean, var.sqrt())
    }

    fn normal(&self) -> Normal {
        Normal::new(self.location, self.scale).expect("validated on construction")
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.normal().cdf(x)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.normal().pdf(x)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            f64::NEG_INFINITY
        } else if p >= 1.0 {
            f64::INFINITY
        } else {
            self.normal().inverse_cdf(p)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AxisScheme {
    Dyadic,
    Quantile(QuantileSpec),
}

impl AxisScheme {
    pub fn to_unit(&self, raw: f64) -> Result<f64> {
        match self {
            AxisScheme::Dyadic => {
                if (0.0..=1.0).contains(&raw) {
                    Ok(raw)
                } else {
                    Err(Error::Domain { point: vec![raw] })
                }
            }
            AxisScheme::Quantile(spec) => {
                if !raw.is_finite() {
                    return Err(Error::TransformDomain { value: raw });
                }
                let u = spec.cdf(raw);
                if u.is_finite() {
                    Ok(u)
                } else {
                    Err(Error::TransformDomain { value: raw })
                }
            }
        }
    }

    pub fn from_unit(&self, u: f64) -> f64 {
        match self {
            AxisScheme::Dyadic => u,
            AxisScheme::Quantile(spec) => spec.quantile(u),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PartitionTree {
    dim: Dim,
    max_depth: u32,
    axes: Vec<AxisScheme>,
    internal: Option<Arc<FxHashSet<NodeWord>>>,
}

fn check_depth(depth: u32) -> Result<()> {
    if depth == 0 {
        return Err(Error::InvalidParameter("depth must be at least 1".into()));
    }
    if depth > MAX_DEPTH {
        return Err(Error::DepthOverflow {
            depth,
            max: MAX_DEPTH,
        });
    }
    Ok(())
}

/// Full dyadic tree of the given depth on `[0,1]^d`.
pub fn build_dyadic(dim: Dim, depth: u32) -> Result<PartitionTree> {
    check_depth(depth)?;
    Ok(PartitionTree {
        dim,
        max_depth: depth,
        axes: vec![AxisScheme::Dyadic; dim.get()],
        internal: None,
    })
}

/// Full quantile tree, one Gaussian reference per axis.
pub fn build_quantile(dim: Dim, depth: u32, specs: &[QuantileSpec]) -> Result<PartitionTree> {
    check_depth(depth)?;
    if specs.len() != dim.get() {
        return Err(Error::DimensionMismatch {
            expected: dim.get(),
            found: specs.len(),
        });
    }
    for s in specs {
        QuantileSpec::new(s.location, s.scale)?;
    }
    Ok(PartitionTree {
        dim,
        max_depth: depth,
        axes: specs.iter().copied().map(AxisScheme::Quantile).collect(),
        internal: None,
    })
}

/// Quaternary tree whose splits cross the splits of two full binary trees.
pub fn product(x: &PartitionTree, y: &PartitionTree) -> Result<PartitionTree> {
    if x.dim != Dim::One || y.dim != Dim::One {
        return Err(Error::InvalidParameter(
            "product tree needs two 1-D factors".into(),
        ));
    }
    if x.is_pruned() || y.is_pruned() {
        return Err(Error::InvalidParameter(
            "product tree needs full (unpruned) factors".into(),
        ));
    }
    if x.max_depth != y.max_depth {
        return Err(Error::InvalidParameter(format!(
            "product factors have different depths {} and {}",
            x.max_depth, y.max_depth
        )));
    }
    Ok(PartitionTree {
        dim: Dim::Two,
        max_depth: x.max_depth,
        axes: vec![x.axes[0], y.axes[0]],
        internal: None,
    })
}

impl PartitionTree {
    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    pub fn axes(&self) -> &[AxisScheme] {
        &self.axes
    }

    pub fn is_pruned(&self) -> bool {
        self.internal.is_some()
    }

    /// `"dyadic"`, `"quantile"`, or `"mixed"` across axes.
    pub fn scheme_name(&self) -> &'static str {
        let quantile = self
            .axes
            .iter()
            .filter(|a| matches!(a, AxisScheme::Quantile(_)))
            .count();
        match quantile {
            0 => "dyadic",
            q if q == self.axes.len() => "quantile",
            _ => "mixed",
        }
    }

    /// Same tree with all pruning removed.
    pub fn unpruned(&self) -> PartitionTree {
        PartitionTree {
            internal: None,
            ..self.clone()
        }
    }

    #[inline]
    pub fn is_internal(&self, word: &NodeWord) -> bool {
        word.dim == self.dim
            && word.level() < self.max_depth
            && self.internal.as_ref().is_none_or(|s| s.contains(word))
    }

    /// Whether `word` is a node of this tree (all its proper ancestors are
    /// internal).
    pub fn contains_node(&self, word: &NodeWord) -> bool {
        word.dim == self.dim
            && word.level() <= self.max_depth
            && (0..word.level()).all(|l| self.is_internal(&word.prefix(l)))
    }

    pub fn is_leaf(&self, word: &NodeWord) -> bool {
        self.contains_node(word) && !self.is_internal(word)
    }

    pub fn children(&self, word: &NodeWord) -> Vec<NodeWord> {
        if self.is_internal(word) {
            word.children().collect()
        } else {
            Vec::new()
        }
    }

    /// Leaves in depth-first order. Enumerates the whole tree, so only use
    /// on small or pruned trees.
    pub fn leaves(&self) -> Vec<NodeWord> {
        let mut out = Vec::new();
        let mut stack = vec![NodeWord::root(self.dim)];
        while let Some(w) = stack.pop() {
            if self.is_internal(&w) {
                stack.extend(w.children().collect::<Vec<_>>().into_iter().rev());
            } else {
                out.push(w);
            }
        }
        out
    }

    pub fn internal_nodes(&self) -> Vec<NodeWord> {
        let mut out = Vec::new();
        let mut stack = vec![NodeWord::root(self.dim)];
        while let Some(w) = stack.pop() {
            if self.is_internal(&w) {
                out.push(w);
                stack.extend(w.children().collect::<Vec<_>>().into_iter().rev());
            }
        }
        out
    }

    /// Block of `word` in the unit (transformed) coordinates.
    pub fn block(&self, word: &NodeWord) -> Block {
        let scale = (word.level() as f64).exp2();
        let ks = word.axis_indices();
        let axes = (0..self.dim.get())
            .map(|a| {
                let lo = ks[a] as f64 / scale;
                let hi = (ks[a] + 1) as f64 / scale;
                Interval {
                    lo,
                    hi,
                    closed_right: hi == 1.0,
                }
            })
            .collect();
        Block { axes }
    }

    /// Block of `word` in raw coordinates. For quantile axes the endpoints
    /// are Gaussian quantiles, with the outermost blocks unbounded.
    pub fn raw_block(&self, word: &NodeWord) -> Block {
        let unit = self.block(word);
        let axes = unit
            .axes
            .iter()
            .zip(&self.axes)
            .map(|(iv, scheme)| Interval {
                lo: scheme.from_unit(iv.lo),
                hi: scheme.from_unit(iv.hi),
                closed_right: iv.closed_right,
            })
            .collect();
        Block { axes }
    }

    /// Map a raw point into unit coordinates through each axis scheme.
    pub fn to_unit(&self, raw: &[f64]) -> Result<Vec<f64>> {
        self.check_arity(raw.len())?;
        raw.iter()
            .zip(&self.axes)
            .map(|(&x, scheme)| scheme.to_unit(x))
            .collect()
    }

    fn check_arity(&self, n: usize) -> Result<()> {
        if n != self.dim.get() {
            return Err(Error::DimensionMismatch {
                expected: self.dim.get(),
                found: n,
            });
        }
        Ok(())
    }

    fn check_point(&self, coords: &[f64]) -> Result<()> {
        self.check_arity(coords.len())?;
        if coords.iter().all(|x| (0.0..=1.0).contains(x)) {
            Ok(())
        } else {
            Err(Error::Domain {
                point: coords.to_vec(),
            })
        }
    }

    /// The level-`level` word whose block contains `point` (unit coordinates).
    pub fn locate(&self, point: &[f64], level: u32) -> Result<NodeWord> {
        self.check_point(point)?;
        if level > self.max_depth {
            return Err(Error::InvalidParameter(format!(
                "level {level} exceeds tree depth {}",
                self.max_depth
            )));
        }
        let code = self.cell_code(point);
        Ok(NodeWord::from_code(self.dim, self.max_depth, code, level))
    }

    /// Packed path of the depth-`max_depth` cell holding `coords`.
    /// Coordinates must already be validated.
    #[inline]
    pub(crate) fn cell_code(&self, coords: &[f64]) -> u64 {
        let depth = self.max_depth;
        let cells = 1u64 << depth;
        let index = |x: f64| ((x * cells as f64) as u64).min(cells - 1);
        match self.dim {
            Dim::One => index(coords[0]),
            Dim::Two => {
                let (kx, ky) = (index(coords[0]), index(coords[1]));
                let mut code = 0u64;
                for b in (0..depth).rev() {
                    code = (code << 2) | (((kx >> b) & 1) << 1) | ((ky >> b) & 1);
                }
                code
            }
        }
    }

    /// Validate points and compute their depth-`max_depth` cell codes.
    pub(crate) fn encode<P: Point>(&self, points: &[P]) -> Result<Vec<u64>> {
        points
            .iter()
            .map(|p| {
                self.check_point(p.coords())?;
                Ok(self.cell_code(p.coords()))
            })
            .collect()
    }

    /// Node at `level` on the path of a cell code produced by this tree.
    #[inline]
    pub(crate) fn word_of(&self, code: u64, level: u32) -> NodeWord {
        NodeWord::from_code(self.dim, self.max_depth, code, level)
    }

    /// Prune against already-encoded points. See [`separating_prune`].
    pub(crate) fn prune_codes(&self, codes: &[u64]) -> PartitionTree {
        let mut counts: FxHashMap<NodeWord, u32> = FxHashMap::default();
        for &code in codes {
            for level in 0..self.max_depth {
                let w = self.word_of(code, level);
                if !self.is_internal(&w) {
                    break;
                }
                *counts.entry(w).or_insert(0) += 1;
            }
        }
        let internal: FxHashSet<NodeWord> = counts
            .into_iter()
            .filter_map(|(w, n)| (n >= 2).then_some(w))
            .collect();
        PartitionTree {
            internal: Some(Arc::new(internal)),
            ..self.clone()
        }
    }
}

/// Keep a node internal only if it was internal in `tree` and holds at
/// least two of `points`. Points that cannot be separated before the depth
/// cap share a leaf.
pub fn separating_prune<P: Point>(tree: &PartitionTree, points: &[P]) -> Result<PartitionTree> {
    let codes = tree.encode(points)?;
    Ok(tree.prune_codes(&codes))
}

/// `ceil(log2(n))`, at least 1 and at most [`MAX_DEPTH`].
pub fn default_depth(n: usize) -> u32 {
    let j = if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    };
    j.clamp(1, MAX_DEPTH)
}
