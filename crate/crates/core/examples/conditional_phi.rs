//! The conditional marginal likelihood recursion over a Z partition.

use bnpci::condopt::{self, CondModelSpec, Rho};
use bnpci::oracle;
use bnpci::partition::{build_dyadic, separating_prune, Dim};
use bnpci::tpt::TptParams;
use bnpci::{SyntheticModel, SyntheticSpec};

fn main() -> bnpci::Result<()> {
    let s = SyntheticSpec::new(SyntheticModel::CommonCause, 500, 3).sample();
    let depth = 9;
    let spec = CondModelSpec::new(TptParams::new(1.0, depth, Dim::One)?, Rho::default());
    let z_tree = separating_prune(&build_dyadic(Dim::One, depth)?, &s.z)?;
    let x_tree = build_dyadic(Dim::One, depth)?;

    let table = condopt::log_phi(&spec, &z_tree, &x_tree, &s.z, &s.x)?;
    println!("log phi(X | Z) = {:.4} over {} Z nodes", table.log_phi(), table.len());
    let mut top: Vec<_> = table.iter().filter(|(w, _)| w.level() <= 2).collect();
    top.sort_by_key(|(w, _)| **w);
    for (word, e) in top {
        let name = if word.is_root() { "root".to_string() } else { word.to_string() };
        println!(
            "  node {name:<4} n = {:>3}  stop {:>9.3}  mixed {:>9.3}",
            e.count, e.local_log_phi0, e.mixed_log_phi
        );
    }

    // A shallow full Z tree is small enough to check by brute force.
    let small = CondModelSpec::new(TptParams::new(1.0, 5, Dim::One)?, Rho::new(0.3)?);
    let z3 = build_dyadic(Dim::One, 3)?;
    let y5 = build_dyadic(Dim::One, 5)?;
    let (z, x) = (&s.z[..60], &s.x[..60]);
    let fast = condopt::log_phi(&small, &z3, &y5, z, x)?.log_phi();
    let slow = oracle::enumerate_phi(&small, &z3, &y5, z, x)?;
    println!(
        "recursion {fast:.10} vs {} stopping configurations {slow:.10}",
        oracle::count_configurations(3)
    );
    Ok(())
}
