//! Grid over the Pólya tree scale `c` and the stopping probability `rho`.

use bnpci::{select_c, sweep, ResponseKind, Rho, SyntheticModel, SyntheticSpec, TestProblem};

fn main() -> bnpci::Result<()> {
    let s = SyntheticSpec::new(SyntheticModel::Mixture, 1000, 5).sample();
    let problem = TestProblem::new(&s.x, &s.y, &s.z, None)?;
    let c_grid = [0.1, 0.3, 1.0, 3.0, 10.0];

    let result = sweep(&problem, &c_grid, &[0.3, 0.5, 0.7], 0.5)?;
    println!("{:>6} {:>5} {:>11} {:>9}", "c", "rho", "log BF", "P(H1)");
    for row in &result.rows {
        println!("{:>6} {:>5} {:>11.3} {:>9.4}", row.c, row.rho, row.log_bf, row.posterior_h1);
    }
    for best in &result.argmax {
        println!("best c for {:<2} at rho {}: {}", best.kind.name(), best.row.rho, best.row.c);
    }

    let c_xy = select_c(&problem, &c_grid, ResponseKind::XY, Rho::default())?;
    println!("select_c(XY, rho = 0.5) = {c_xy}");
    Ok(())
}
