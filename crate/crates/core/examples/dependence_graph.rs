//! Pairwise tests given a shared conditioner, rendered as DOT.

use bnpci::{run_pairwise, Dataset, TestConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> bnpci::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 1500;
    let z: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let a: Vec<f64> = z.iter().map(|z| z + 0.2 * rng.random::<f64>()).collect();
    let b: Vec<f64> = z.iter().map(|z| z * z + 0.2 * rng.random::<f64>()).collect();
    let c: Vec<f64> = a.iter().map(|a| (3.0 * a + 0.1 * rng.random::<f64>()).sin()).collect();
    let d: Vec<f64> = (0..n).map(|_| rng.random()).collect();

    let data = Dataset::from_raw_columns(
        vec![
            ("z".into(), z),
            ("a".into(), a),
            ("b".into(), b),
            ("c".into(), c),
            ("d".into(), d),
        ],
        bnpci::RescaleMethod::MinMax,
    )?;
    let graph = run_pairwise(&data, "z", None, &TestConfig::default())?;
    for e in &graph.pairs {
        println!("{} ~ {}: P(H1) = {:.4}", e.a, e.b, e.posterior_h1);
    }
    print!("{}", graph.to_dot());
    Ok(())
}
