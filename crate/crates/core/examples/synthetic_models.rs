//! The four synthetic generators and their dependence patterns.

use bnpci::datahub::MIXTURE_WEIGHT;
use bnpci::{SyntheticModel, SyntheticSpec};

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn main() {
    for id in 1..=4 {
        let model = SyntheticModel::from_id(id).unwrap();
        let s = SyntheticSpec::new(model, 5000, 0).sample();
        println!(
            "model {id} {model:?}: corr(x,y) = {:+.3}  corr(x,z) = {:+.3}  corr(y,z) = {:+.3}",
            corr(&s.x, &s.y),
            corr(&s.x, &s.z),
            corr(&s.y, &s.z)
        );
        if model == SyntheticModel::Mixture {
            let k = s.dependent_component.iter().filter(|d| **d).count();
            println!("  {k} of 5000 rows from the dependent component (weight {MIXTURE_WEIGHT})");
        }
    }

    let mut out = Vec::new();
    SyntheticSpec::new(SyntheticModel::CommonCause, 3, 1).generate().write_csv(&mut out).unwrap();
    print!("{}", String::from_utf8(out).unwrap());
}
