//! Truncated Pólya tree marginal likelihoods and predictive densities.

use bnpci::oracle::node_conjugate_ml;
use bnpci::partition::{build_dyadic, Dim};
use bnpci::tpt::{log_ml_closed_form, log_ml_telescoping, log_predictive_density, TptParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> bnpci::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let skewed: Vec<f64> = (0..150).map(|_| rng.random::<f64>().powi(3)).collect();
    let depth = 6;
    let tree = build_dyadic(Dim::One, depth)?;

    for c in [0.1, 1.0, 10.0] {
        let params = TptParams::new(c, depth, Dim::One)?;
        println!(
            "c = {c:>4}: telescoping {:.6}  closed form {:.6}  node-by-node {:.6}",
            log_ml_telescoping(&params, &tree, &skewed)?,
            log_ml_closed_form(&params, &tree, &skewed)?,
            node_conjugate_ml(&params, &tree, &skewed)?,
        );
    }

    let params = TptParams::new(1.0, depth, Dim::One)?;
    println!("predictive density after 150 draws of U^3:");
    for x in [0.01, 0.1, 0.3, 0.6, 0.95] {
        let f = log_predictive_density(&params, &tree, &skewed, &[x])?.exp();
        println!("  f({x:.2}) = {f:.3}");
    }
    Ok(())
}
