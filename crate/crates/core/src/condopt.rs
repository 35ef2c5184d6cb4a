//! Conditional marginal likelihood over a recursive partition of `Z`.
//!
//! For every block `A` of the `Z` partition, the responses whose `Z` falls in
//! `A` get their own truncated Pólya tree, giving a local marginal likelihood
//! `phi0(A)`. Optional stopping mixes "stop at `A`" with "split `A` and
//! model both halves independently":
//!
//! ```text
//! phi(A) = phi0(A)                                        if A is a leaf
//! phi(A) = rho * phi0(A) + (1 - rho) * phi(A0) * phi(A1)  otherwise
//! ```
//!
//! and `phi(root)` is the conditional marginal likelihood of all responses
//! given all `Z` values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logspace::log_add_exp;
use crate::partition::{Dim, NodeWord, PartitionTree, Point};
use crate::tpt::{telescoping_codes, TptParams};

/// Recursions over more points than this split their two subtrees across
/// threads.
const PARALLEL_SPLIT_MIN: usize = 4096;

/// Stopping probability. `1.0` is accepted as a diagnostic setting that
/// never splits the `Z` axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rho(f64);

impl Rho {
    pub fn new(rho: f64) -> Result<Self> {
        if rho > 0.0 && rho <= 1.0 {
            Ok(Rho(rho))
        } else {
            Err(Error::InvalidParameter(format!(
                "rho must lie in (0, 1], got {rho}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Rho {
    fn default() -> Self {
        Rho(0.5)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CondModelSpec {
    pub params: TptParams,
    pub rho: Rho,
}

impl CondModelSpec {
    pub fn new(params: TptParams, rho: Rho) -> Self {
        CondModelSpec { params, rho }
    }

    pub fn response_dim(&self) -> Dim {
        self.params.dim()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhiEntry {
    pub local_log_phi0: f64,
    pub mixed_log_phi: f64,
    pub count: usize,
}

/// Per-node results of one recursion.
#[derive(Clone, Debug)]
pub struct PhiTable {
    root: NodeWord,
    entries: BTreeMap<NodeWord, PhiEntry>,
}

impl PhiTable {
    /// `ln phi(root)`, the conditional marginal likelihood.
    pub fn log_phi(&self) -> f64 {
        self.entries[&self.root].mixed_log_phi
    }

    pub fn root(&self) -> &PhiEntry {
        &self.entries[&self.root]
    }

    pub fn get(&self, node: &NodeWord) -> Option<&PhiEntry> {
        self.entries.get(node)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeWord, &PhiEntry)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn encode_z(z_tree: &PartitionTree, z: &[f64]) -> Result<Vec<u64>> {
    if z_tree.dim() != Dim::One {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: z_tree.dim().get(),
        });
    }
    z_tree.encode(z)
}

/// Responses of the observations whose `Z` lies in `node`, in input order.
pub fn restrict<P: Point>(
    responses: &[P],
    z: &[f64],
    z_tree: &PartitionTree,
    node: &NodeWord,
) -> Result<Vec<P>> {
    if responses.len() != z.len() {
        return Err(Error::LengthMismatch(vec![responses.len(), z.len()]));
    }
    let codes = encode_z(z_tree, z)?;
    Ok(responses
        .iter()
        .zip(codes)
        .filter(|(_, c)| z_tree.word_of(*c, node.level()) == *node)
        .map(|(r, _)| *r)
        .collect())
}

/// Local marginal likelihood of a block's responses: the response tree is
/// pruned to separate them, then the telescoping product is evaluated.
pub fn local_log_phi0<P: Point>(
    spec: &CondModelSpec,
    response_tree: &PartitionTree,
    responses: &[P],
) -> Result<f64> {
    check_response_tree(spec, response_tree)?;
    let codes = response_tree.encode(responses)?;
    Ok(local_from_codes(&spec.params, response_tree, &codes))
}

fn local_from_codes(params: &TptParams, response_tree: &PartitionTree, codes: &[u64]) -> f64 {
    if codes.len() <= 1 {
        return 0.0;
    }
    let pruned = response_tree.prune_codes(codes);
    telescoping_codes(params, &pruned, codes)
}

fn check_response_tree(spec: &CondModelSpec, response_tree: &PartitionTree) -> Result<()> {
    if response_tree.dim() != spec.response_dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.response_dim().get(),
            found: response_tree.dim().get(),
        });
    }
    if response_tree.max_depth() < spec.params.depth() {
        return Err(Error::InvalidParameter(format!(
            "response tree depth {} is below model depth {}",
            response_tree.max_depth(),
            spec.params.depth()
        )));
    }
    Ok(())
}

/// Run the recursion with the constant stopping probability of `spec`.
pub fn log_phi<P: Point>(
    spec: &CondModelSpec,
    z_tree: &PartitionTree,
    response_tree: &PartitionTree,
    z: &[f64],
    responses: &[P],
) -> Result<PhiTable> {
    let rho = spec.rho.get();
    log_phi_with(spec, |_| rho, z_tree, response_tree, z, responses)
}

/// Run the recursion with a stopping probability chosen per `Z` node.
pub fn log_phi_with<P, F>(
    spec: &CondModelSpec,
    rho_at: F,
    z_tree: &PartitionTree,
    response_tree: &PartitionTree,
    z: &[f64],
    responses: &[P],
) -> Result<PhiTable>
where
    P: Point,
    F: Fn(&NodeWord) -> f64 + Sync,
{
    if responses.len() != z.len() {
        return Err(Error::LengthMismatch(vec![responses.len(), z.len()]));
    }
    check_response_tree(spec, response_tree)?;
    let z_codes = encode_z(z_tree, z)?;
    let r_codes = response_tree.encode(responses)?;
    Ok(phi_from_codes(
        &spec.params,
        &rho_at,
        z_tree,
        &z_codes,
        response_tree,
        &r_codes,
    ))
}

pub(crate) fn phi_from_codes<F>(
    params: &TptParams,
    rho_at: &F,
    z_tree: &PartitionTree,
    z_codes: &[u64],
    response_tree: &PartitionTree,
    r_codes: &[u64],
) -> PhiTable
where
    F: Fn(&NodeWord) -> f64 + Sync,
{
    let ctx = Recursion {
        params,
        rho_at,
        z_tree,
        z_codes,
        response_tree,
        r_codes,
    };
    let root = NodeWord::root(Dim::One);
    let mut entries = Vec::new();
    ctx.visit(root, (0..z_codes.len()).collect(), &mut entries);
    PhiTable {
        root,
        entries: entries.into_iter().collect(),
    }
}

struct Recursion<'a, F> {
    params: &'a TptParams,
    rho_at: &'a F,
    z_tree: &'a PartitionTree,
    z_codes: &'a [u64],
    response_tree: &'a PartitionTree,
    r_codes: &'a [u64],
}

impl<F> Recursion<'_, F>
where
    F: Fn(&NodeWord) -> f64 + Sync,
{
    /// Returns `ln phi(node)`, appending every visited node to `out`.
    fn visit(&self, node: NodeWord, members: Vec<usize>, out: &mut Vec<(NodeWord, PhiEntry)>) -> f64 {
        let count = members.len();
        // Empty blocks have phi = 1 and nothing below them can change that.
        if count == 0 {
            out.push((
                node,
                PhiEntry {
                    local_log_phi0: 0.0,
                    mixed_log_phi: 0.0,
                    count,
                },
            ));
            return 0.0;
        }
        let codes: Vec<u64> = members.iter().map(|&i| self.r_codes[i]).collect();
        let local = local_from_codes(self.params, self.response_tree, &codes);

        let mixed = if self.z_tree.is_internal(&node) {
            let level = node.level() + 1;
            let (left, right): (Vec<usize>, Vec<usize>) = members
                .into_iter()
                .partition(|&i| self.z_tree.word_of(self.z_codes[i], level) == node.child(0));
            let (l, r) = if count >= PARALLEL_SPLIT_MIN {
                let mut right_out = Vec::new();
                let (l, r) = rayon::join(
                    || self.visit(node.child(0), left, out),
                    || self.visit(node.child(1), right, &mut right_out),
                );
                out.append(&mut right_out);
                (l, r)
            } else {
                let l = self.visit(node.child(0), left, out);
                let r = self.visit(node.child(1), right, out);
                (l, r)
            };
            let rho = (self.rho_at)(&node);
            log_add_exp(rho.ln() + local, (1.0 - rho).ln() + (l + r))
        } else {
            local
        };
        out.push((
            node,
            PhiEntry {
                local_log_phi0: local,
                mixed_log_phi: mixed,
                count,
            },
        ));
        mixed
    }
}
