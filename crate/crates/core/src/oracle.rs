//! Brute-force validators.
//!
//! These are slow, direct evaluations used by the test suite to certify the
//! fast code in [`crate::tpt`] and [`crate::condopt`]. They walk the
//! partition geometrically (block membership tests, explicit child lists)
//! and never touch the packed cell codes, the count caches or the
//! telescoping loop.

use std::collections::BTreeMap;

use crate::condopt::CondModelSpec;
use crate::error::{Error, Result};
use crate::logspace::log_sum_exp;
use crate::partition::{Dim, NodeWord, PartitionTree, Point};
use crate::tpt::TptParams;

/// Deepest `Z` tree the enumeration accepts.
pub const MAX_ENUMERATION_DEPTH: u32 = 3;
/// Largest sample the node oracle accepts.
pub const MAX_ORACLE_POINTS: usize = 200;
/// Deepest response tree the node oracle accepts.
pub const MAX_ORACLE_DEPTH: u32 = 8;

/// One way of stopping the `Z` recursion: the blocks that carry a local
/// response model, and the log prior weight of that choice.
#[derive(Clone, Debug, PartialEq)]
pub struct StoppingConfiguration {
    pub stopped: Vec<NodeWord>,
    pub log_weight: f64,
}

/// Every stopping configuration of `z_tree` under a constant `rho`.
pub fn stopping_configurations(z_tree: &PartitionTree, rho: f64) -> Result<Vec<StoppingConfiguration>> {
    check_enumeration_scale(z_tree)?;
    Ok(configurations_below(z_tree, NodeWord::root(z_tree.dim()), rho))
}

fn configurations_below(tree: &PartitionTree, node: NodeWord, rho: f64) -> Vec<StoppingConfiguration> {
    if !tree.is_internal(&node) {
        return vec![StoppingConfiguration {
            stopped: vec![node],
            log_weight: 0.0,
        }];
    }
    let mut out = vec![StoppingConfiguration {
        stopped: vec![node],
        log_weight: rho.ln(),
    }];
    let kids = tree.children(&node);
    let mut combos = vec![StoppingConfiguration {
        stopped: Vec::new(),
        log_weight: (1.0 - rho).ln(),
    }];
    for kid in kids {
        let below = configurations_below(tree, kid, rho);
        let mut next = Vec::with_capacity(combos.len() * below.len());
        for a in &combos {
            for b in &below {
                let mut stopped = a.stopped.clone();
                stopped.extend_from_slice(&b.stopped);
                next.push(StoppingConfiguration {
                    stopped,
                    log_weight: a.log_weight + b.log_weight,
                });
            }
        }
        combos = next;
    }
    out.extend(combos);
    out
}

fn check_enumeration_scale(z_tree: &PartitionTree) -> Result<()> {
    let too_deep = |depth| Error::OracleScale {
        depth,
        max: MAX_ENUMERATION_DEPTH,
    };
    if z_tree.dim() != Dim::One {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: z_tree.dim().get(),
        });
    }
    if !z_tree.is_pruned() {
        return if z_tree.max_depth() > MAX_ENUMERATION_DEPTH {
            Err(too_deep(z_tree.max_depth()))
        } else {
            Ok(())
        };
    }
    let depth = z_tree.leaves().iter().map(|w| w.level()).max().unwrap_or(0);
    if depth > MAX_ENUMERATION_DEPTH {
        Err(too_deep(depth))
    } else {
        Ok(())
    }
}

/// Number of stopping configurations of a full binary tree of `depth`.
pub fn count_configurations(depth: u32) -> u128 {
    (0..depth).fold(1u128, |t, _| 1 + t * t)
}

/// Conditional marginal likelihood by summing over every stopping
/// configuration of `z_tree`. Local models use the full response tree
/// restricted to the model depth.
pub fn enumerate_phi<P: Point>(
    spec: &CondModelSpec,
    z_tree: &PartitionTree,
    response_tree: &PartitionTree,
    z: &[f64],
    responses: &[P],
) -> Result<f64> {
    if z.len() != responses.len() {
        return Err(Error::LengthMismatch(vec![responses.len(), z.len()]));
    }
    let configs = stopping_configurations(z_tree, spec.rho.get())?;
    let full = response_tree.unpruned();
    let mut local: BTreeMap<NodeWord, f64> = BTreeMap::new();
    let mut terms = Vec::with_capacity(configs.len());
    for config in &configs {
        let mut total = config.log_weight;
        for node in &config.stopped {
            let value = match local.get(node) {
                Some(v) => *v,
                None => {
                    let block = z_tree.block(node);
                    let members: Vec<P> = z
                        .iter()
                        .zip(responses)
                        .filter(|(zi, _)| block.contains(&[**zi]))
                        .map(|(_, r)| *r)
                        .collect();
                    let v = node_conjugate_ml(&spec.params, &full, &members)?;
                    local.insert(*node, v);
                    v
                }
            };
            total += value;
        }
        terms.push(total);
    }
    Ok(log_sum_exp(&terms))
}

/// `ln(a (a+1) ... (a+m-1))`.
fn log_rising(a: f64, m: usize) -> f64 {
    (0..m).map(|r| (a + r as f64).ln()).sum()
}

/// TPT marginal likelihood as a product of Dirichlet-multinomial factors,
/// one per internal node, times the uniform density on each point's leaf.
pub fn node_conjugate_ml<P: Point>(params: &TptParams, tree: &PartitionTree, data: &[P]) -> Result<f64> {
    if tree.dim() != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim().get(),
            found: tree.dim().get(),
        });
    }
    if data.len() > MAX_ORACLE_POINTS || params.depth() > MAX_ORACLE_DEPTH {
        return Err(Error::InvalidParameter(format!(
            "node oracle handles at most {MAX_ORACLE_POINTS} points and depth {MAX_ORACLE_DEPTH}"
        )));
    }
    if tree.max_depth() < params.depth() {
        return Err(Error::InvalidParameter(
            "tree is shallower than the model".into(),
        ));
    }
    let points: Vec<&[f64]> = data.iter().map(|p| p.coords()).collect();
    for p in &points {
        let inside = p.len() == tree.dim().get() && p.iter().all(|x| (0.0..=1.0).contains(x));
        if !inside {
            return Err(Error::Domain { point: p.to_vec() });
        }
    }
    if points.len() <= 1 {
        return Ok(0.0);
    }
    Ok(walk(params, tree, NodeWord::root(tree.dim()), &points))
}

fn walk(params: &TptParams, tree: &PartitionTree, node: NodeWord, points: &[&[f64]]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let level = node.level();
    if level >= params.depth() || !tree.is_internal(&node) {
        let d = tree.dim().get() as f64;
        return points.len() as f64 * d * level as f64 * std::f64::consts::LN_2;
    }
    let a = params.alpha(level + 1);
    let kids = tree.children(&node);
    let mut total = -log_rising(kids.len() as f64 * a, points.len());
    for kid in kids {
        let block = tree.block(&kid);
        let inside: Vec<&[f64]> = points.iter().copied().filter(|p| block.contains(p)).collect();
        total += log_rising(a, inside.len());
        total += walk(params, tree, kid, &inside);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condopt::Rho;
    use crate::partition::{build_dyadic, separating_prune};

    #[test]
    fn configuration_counts() {
        assert_eq!(count_configurations(0), 1);
        assert_eq!(count_configurations(1), 2);
        assert_eq!(count_configurations(2), 5);
        assert_eq!(count_configurations(3), 26);
        for depth in 1..=3 {
            let tree = build_dyadic(Dim::One, depth).unwrap();
            let configs = stopping_configurations(&tree, 0.5).unwrap();
            assert_eq!(configs.len() as u128, count_configurations(depth));
        }
    }

    #[test]
    fn depth_one_configurations() {
        let tree = build_dyadic(Dim::One, 1).unwrap();
        let configs = stopping_configurations(&tree, 0.3).unwrap();
        let root = NodeWord::root(Dim::One);
        assert_eq!(configs[0].stopped, vec![root]);
        assert!((configs[0].log_weight - 0.3f64.ln()).abs() < 1e-15);
        assert_eq!(configs[1].stopped, vec![root.child(0), root.child(1)]);
        assert!((configs[1].log_weight - 0.7f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_one() {
        for rho in [0.2, 0.5, 0.8] {
            let tree = build_dyadic(Dim::One, 3).unwrap();
            let w: Vec<f64> = stopping_configurations(&tree, rho)
                .unwrap()
                .iter()
                .map(|c| c.log_weight)
                .collect();
            assert!(log_sum_exp(&w).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_deep_trees() {
        let tree = build_dyadic(Dim::One, 4).unwrap();
        assert!(matches!(
            stopping_configurations(&tree, 0.5),
            Err(Error::OracleScale { depth: 4, .. })
        ));
        // A deep tree pruned down to depth 2 is fine.
        let pruned = separating_prune(&tree, &[0.1, 0.3, 0.9]).unwrap();
        assert!(stopping_configurations(&pruned, 0.5).is_ok());
    }

    #[test]
    fn node_oracle_hand_values() {
        let p = TptParams::new(1.0, 1, Dim::One).unwrap();
        let t = build_dyadic(Dim::One, 1).unwrap();
        let v = node_conjugate_ml(&p, &t, &[0.3, 0.7]).unwrap();
        assert!((v - (2.0f64 / 3.0).ln()).abs() < 1e-15);
        let empty: [f64; 0] = [];
        assert_eq!(node_conjugate_ml(&p, &t, &empty).unwrap(), 0.0);
        let p2 = TptParams::new(1.0, 2, Dim::One).unwrap();
        let t2 = build_dyadic(Dim::One, 2).unwrap();
        let v2 = node_conjugate_ml(&p2, &t2, &[0.3, 0.4]).unwrap();
        assert!((v2 - (40.0f64 / 27.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn enumeration_hand_value() {
        let spec = CondModelSpec::new(
            TptParams::new(1.0, 1, Dim::One).unwrap(),
            Rho::new(0.5).unwrap(),
        );
        let zt = build_dyadic(Dim::One, 1).unwrap();
        let rt = build_dyadic(Dim::One, 1).unwrap();
        let v = enumerate_phi(&spec, &zt, &rt, &[0.1, 0.2, 0.6, 0.9], &[0.3, 0.7, 0.2, 0.4]).unwrap();
        assert!((v - (38.0f64 / 45.0).ln()).abs() < 1e-14);
    }
}
