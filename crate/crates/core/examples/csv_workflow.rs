//! Write a CSV with gaps, load it under both rescale schemes, subsample, test.

use std::io::Write;

use bnpci::{load_csv, run_test, RescaleMethod, TestConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> bnpci::Result<()> {
    let dir = std::env::temp_dir().join("bnpci_csv_workflow");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("field.csv");

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut f = std::fs::File::create(&path)?;
    writeln!(f, "depth,temp,salinity,station")?;
    for i in 0..3000 {
        let depth: f64 = 500.0 * rng.random::<f64>();
        let temp = 18.0 - 0.02 * depth + rng.random::<f64>();
        let sal = 33.0 + 0.002 * depth + 0.3 * rng.random::<f64>();
        if i % 97 == 0 {
            writeln!(f, "{depth},,{sal},s{i}")?;
        } else {
            writeln!(f, "{depth},{temp},{sal},s{i}")?;
        }
    }
    drop(f);

    let cols = ["temp", "salinity", "depth"];
    for method in [RescaleMethod::MinMax, RescaleMethod::GaussianCdf] {
        let data = load_csv(&path, &cols, method)?;
        let small = data.subsample(1000, 7)?;
        let r = run_test(&small, "temp", "salinity", "depth", &TestConfig::default())?;
        println!(
            "{method:?}: kept {} rows ({} dropped), subsample {}: P(temp ~ salinity | depth) = {:.4}",
            data.len(),
            data.dropped_rows(),
            small.len(),
            r.posterior_h1
        );
        println!("  rescale of temp: {:?}", data.column("temp")?.rescale);
    }
    Ok(())
}
