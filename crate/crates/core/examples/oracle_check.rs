//! Cross-check the fast paths against the brute-force oracles on random data.

use bnpci::condopt::{self, CondModelSpec, Rho};
use bnpci::logspace::rel_diff;
use bnpci::oracle;
use bnpci::partition::{build_dyadic, Dim};
use bnpci::tpt::{log_ml_closed_form, log_ml_telescoping, TptParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> bnpci::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for trial in 0..200 {
        let n = rng.random_range(0..50);
        let z: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let xy: Vec<[f64; 2]> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
        let c = [0.5, 1.0, 2.0][trial % 3];
        let rho = [0.2, 0.5, 0.8][(trial / 3) % 3];

        let params = TptParams::new(c, 4, Dim::Two)?;
        let square = build_dyadic(Dim::Two, 4)?;
        let tele = log_ml_telescoping(&params, &square, &xy)?;
        let closed = log_ml_closed_form(&params, &square, &xy)?;
        let node = oracle::node_conjugate_ml(&params, &square, &xy)?;

        let spec = CondModelSpec::new(params, Rho::new(rho)?);
        let z_tree = build_dyadic(Dim::One, 3)?;
        let fast = condopt::log_phi(&spec, &z_tree, &square, &z, &xy)?.log_phi();
        let slow = oracle::enumerate_phi(&spec, &z_tree, &square, &z, &xy)?;

        for d in [rel_diff(tele, closed), rel_diff(tele, node), rel_diff(fast, slow)] {
            worst = worst.max(d);
        }
    }
    println!("200 random problems, worst relative difference {worst:.2e}");
    assert!(worst < 1e-10);
    Ok(())
}
