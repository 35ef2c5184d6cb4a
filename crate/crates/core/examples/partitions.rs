//! Dyadic and quantile partitions, node words and separating prunes.

use bnpci::partition::{build_dyadic, build_quantile, separating_prune, Dim, QuantileSpec};

fn main() -> bnpci::Result<()> {
    let tree = build_dyadic(Dim::One, 3)?;
    for leaf in tree.leaves() {
        let b = tree.block(&leaf).axes[0];
        println!("leaf {leaf:>3}  [{:.3}, {:.3}{}", b.lo, b.hi, if b.closed_right { "]" } else { ")" });
    }

    // 2-D words interleave one digit per axis.
    let square = build_dyadic(Dim::Two, 4)?;
    let w = square.locate(&[0.8, 0.3], 2)?;
    println!("(0.8, 0.3) lies in {w} at level {}", w.level());

    let quant = build_quantile(Dim::One, 2, &[QuantileSpec::new(10.0, 2.0)?])?;
    for leaf in quant.leaves() {
        let b = quant.raw_block(&leaf).axes[0];
        println!("quantile leaf {leaf}: {:.3} .. {:.3}", b.lo, b.hi);
    }

    let points = [0.1, 0.12, 0.7];
    let pruned = separating_prune(&build_dyadic(Dim::One, 8)?, &points)?;
    println!(
        "separating prune of {points:?}: {} internal nodes, {} leaves",
        pruned.internal_nodes().len(),
        pruned.leaves().len()
    );
    Ok(())
}
