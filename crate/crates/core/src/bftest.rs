//! Bayes factor and posterior probability of conditional dependence, batched
//! over variable pairs and hyperparameter grids.
//!
//! Under `H0` (X and Y independent given Z) the joint conditional density
//! factorises, so its marginal likelihood is `phi_x * phi_y`; under `H1` it is
//! `phi_xy`, computed with the product partition of the response square. All
//! three recursions share one pruned `Z` partition.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::condopt::{phi_from_codes, Rho};
use crate::datahub::{Dataset, Rescale};
use crate::error::{Error, Result};
use crate::logspace::inv_one_plus_exp;
use crate::partition::{build_dyadic, default_depth, product, Dim, PartitionTree};
use crate::tpt::TptParams;

/// Edges with a smaller posterior are hidden in graph drawings.
pub const DISPLAY_THRESHOLD: f64 = 0.005;

/// Which conditional model a marginal likelihood belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseKind {
    X,
    Y,
    XY,
}

impl ResponseKind {
    pub const ALL: [ResponseKind; 3] = [ResponseKind::X, ResponseKind::Y, ResponseKind::XY];

    pub fn name(self) -> &'static str {
        match self {
            ResponseKind::X => "x",
            ResponseKind::Y => "y",
            ResponseKind::XY => "xy",
        }
    }
}

/// Pólya tree concentration per conditional model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CValues {
    pub x: f64,
    pub y: f64,
    pub xy: f64,
}

impl CValues {
    pub fn global(c: f64) -> Self {
        CValues { x: c, y: c, xy: c }
    }

    pub fn get(&self, kind: ResponseKind) -> f64 {
        match kind {
            ResponseKind::X => self.x,
            ResponseKind::Y => self.y,
            ResponseKind::XY => self.xy,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestConfig {
    pub c: CValues,
    pub rho: Rho,
    pub prior_h1: f64,
    /// Partition depth for every tree. `None` uses `ceil(log2 N)`.
    pub depth: Option<u32>,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            c: CValues::global(1.0),
            rho: Rho::default(),
            prior_h1: 0.5,
            depth: None,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        for kind in ResponseKind::ALL {
            TptParams::new(self.c.get(kind), 1, Dim::One)?;
        }
        check_prior(self.prior_h1)?;
        if let Some(d) = self.depth {
            build_dyadic(Dim::One, d)?;
        }
        Ok(())
    }
}

fn check_prior(prior_h1: f64) -> Result<()> {
    if prior_h1 > 0.0 && prior_h1 < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "prior probability of dependence must lie in (0, 1), got {prior_h1}"
        )))
    }
}

/// Posterior probability of `H1` from a log Bayes factor in favour of `H0`.
pub fn posterior_h1(log_bf: f64, prior_h1: f64) -> f64 {
    let log_prior_odds = (1.0 - prior_h1).ln() - prior_h1.ln();
    inv_one_plus_exp(log_bf + log_prior_odds)
}

/// Hyperparameters and data description attached to every result.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigRecord {
    pub c_x: f64,
    pub c_y: f64,
    pub c_xy: f64,
    pub rho: f64,
    pub prior_h0: f64,
    pub prior_h1: f64,
    pub depth_x: u32,
    pub depth_y: u32,
    pub depth_xy: u32,
    pub depth_z: u32,
    pub scheme: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestResult {
    pub log_phi_x: f64,
    pub log_phi_y: f64,
    pub log_phi_xy: f64,
    pub log_bf: f64,
    pub posterior_h1: f64,
    pub config: ConfigRecord,
    pub n: usize,
    pub columns: [String; 3],
    pub seed: Option<u64>,
    pub dropped_rows: usize,
}

/// Encoded data and shared partitions for one `(X, Y, Z)` triple. Reusable
/// across hyperparameter settings.
pub struct TestProblem {
    n: usize,
    depth: u32,
    z_tree: PartitionTree,
    line: PartitionTree,
    square: PartitionTree,
    z_codes: Vec<u64>,
    x_codes: Vec<u64>,
    y_codes: Vec<u64>,
    xy_codes: Vec<u64>,
}

impl TestProblem {
    /// Columns must be equally long with every value in `[0,1]`.
    pub fn new(x: &[f64], y: &[f64], z: &[f64], depth: Option<u32>) -> Result<Self> {
        if x.len() != y.len() || x.len() != z.len() {
            return Err(Error::LengthMismatch(vec![x.len(), y.len(), z.len()]));
        }
        for (name, col) in [("x", x), ("y", y), ("z", z)] {
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    column: name.into(),
                    row,
                });
            }
        }
        let n = x.len();
        let depth = depth.unwrap_or_else(|| default_depth(n));
        let line = build_dyadic(Dim::One, depth)?;
        let square = product(&line, &line)?;
        let z_codes = line.encode(z)?;
        let z_tree = line.prune_codes(&z_codes);
        let x_codes = line.encode(x)?;
        let y_codes = line.encode(y)?;
        let pairs: Vec<[f64; 2]> = x.iter().zip(y).map(|(a, b)| [*a, *b]).collect();
        let xy_codes = square.encode(&pairs)?;
        Ok(TestProblem {
            n,
            depth,
            z_tree,
            line,
            square,
            z_codes,
            x_codes,
            y_codes,
            xy_codes,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// The pruned `Z` partition shared by all three models.
    pub fn z_tree(&self) -> &PartitionTree {
        &self.z_tree
    }

    /// `ln phi` of one conditional model.
    pub fn log_phi(&self, kind: ResponseKind, c: f64, rho: Rho) -> Result<f64> {
        let (dim, tree, codes) = match kind {
            ResponseKind::X => (Dim::One, &self.line, &self.x_codes),
            ResponseKind::Y => (Dim::One, &self.line, &self.y_codes),
            ResponseKind::XY => (Dim::Two, &self.square, &self.xy_codes),
        };
        let params = TptParams::new(c, self.depth, dim)?;
        let r = rho.get();
        let table = phi_from_codes(&params, &|_| r, &self.z_tree, &self.z_codes, tree, codes);
        Ok(table.log_phi())
    }

    /// The three marginal likelihoods, computed concurrently.
    pub fn log_phis(&self, c: CValues, rho: Rho) -> Result<[f64; 3]> {
        let ((x, y), xy) = rayon::join(
            || {
                rayon::join(
                    || self.log_phi(ResponseKind::X, c.x, rho),
                    || self.log_phi(ResponseKind::Y, c.y, rho),
                )
            },
            || self.log_phi(ResponseKind::XY, c.xy, rho),
        );
        Ok([x?, y?, xy?])
    }

    pub fn evaluate(&self, cfg: &TestConfig) -> Result<TestResult> {
        cfg.validate()?;
        let [lx, ly, lxy] = self.log_phis(cfg.c, cfg.rho)?;
        let log_bf = (lx + ly) - lxy;
        Ok(TestResult {
            log_phi_x: lx,
            log_phi_y: ly,
            log_phi_xy: lxy,
            log_bf,
            posterior_h1: posterior_h1(log_bf, cfg.prior_h1),
            config: ConfigRecord {
                c_x: cfg.c.x,
                c_y: cfg.c.y,
                c_xy: cfg.c.xy,
                rho: cfg.rho.get(),
                prior_h0: 1.0 - cfg.prior_h1,
                prior_h1: cfg.prior_h1,
                depth_x: self.depth,
                depth_y: self.depth,
                depth_xy: self.depth,
                depth_z: self.depth,
                scheme: "dyadic".into(),
            },
            n: self.n,
            columns: ["x".into(), "y".into(), "z".into()],
            seed: None,
            dropped_rows: 0,
        })
    }
}

/// Test on raw unit-interval columns named `x`, `y`, `z`.
pub fn run_test_unit(x: &[f64], y: &[f64], z: &[f64], cfg: &TestConfig) -> Result<TestResult> {
    TestProblem::new(x, y, z, cfg.depth)?.evaluate(cfg)
}

fn scheme_of(rescales: &[Rescale]) -> &'static str {
    if rescales.iter().all(|r| matches!(r, Rescale::MinMax { .. })) {
        "dyadic"
    } else if rescales.iter().all(|r| matches!(r, Rescale::GaussianCdf { .. })) {
        "quantile"
    } else {
        "mixed"
    }
}

/// Test whether columns `x` and `y` of `data` are dependent given `z`.
pub fn run_test(data: &Dataset, x: &str, y: &str, z: &str, cfg: &TestConfig) -> Result<TestResult> {
    let cols = [data.column(x)?, data.column(y)?, data.column(z)?];
    let mut result = run_test_unit(&cols[0].values, &cols[1].values, &cols[2].values, cfg)?;
    result.columns = [x.into(), y.into(), z.into()];
    result.config.scheme = scheme_of(&cols.map(|c| c.rescale)).into();
    result.seed = data.seed();
    result.dropped_rows = data.dropped_rows();
    Ok(result)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphEdge {
    pub a: String,
    pub b: String,
    pub posterior_h1: f64,
    pub log_bf: f64,
    pub visible: bool,
}

/// Pairwise conditional dependence among variables given one conditioner.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DependenceGraph {
    pub conditioner: String,
    pub nodes: Vec<String>,
    pub threshold: f64,
    pub n: usize,
    pub seed: Option<u64>,
    pub config: ConfigRecord,
    /// Every unordered pair, sorted by name.
    pub pairs: Vec<GraphEdge>,
}

impl DependenceGraph {
    pub fn visible_edges(&self) -> impl Iterator<Item = &GraphEdge> {
        self.pairs.iter().filter(|e| e.visible)
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("graph dependence {\n");
        let _ = writeln!(s, "  label={};", quote(&format!("given {}", self.conditioner)));
        for node in &self.nodes {
            let _ = writeln!(s, "  {};", quote(node));
        }
        for e in self.visible_edges() {
            let _ = writeln!(
                s,
                "  {} -- {} [label=\"{:.2}\"];",
                quote(&e.a),
                quote(&e.b),
                e.posterior_h1
            );
        }
        s.push_str("}\n");
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serialises")
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Run the test for every unordered pair of `vars` (default: every column
/// except the conditioner) given `conditioner`.
pub fn run_pairwise(
    data: &Dataset,
    conditioner: &str,
    vars: Option<&[&str]>,
    cfg: &TestConfig,
) -> Result<DependenceGraph> {
    if data.column(conditioner).is_err() {
        return Err(Error::ConditionerNotFound(conditioner.into()));
    }
    let mut names: Vec<String> = match vars {
        Some(v) => v.iter().map(|s| s.to_string()).collect(),
        None => data
            .names()
            .into_iter()
            .filter(|n| *n != conditioner)
            .map(String::from)
            .collect(),
    };
    names.sort();
    names.dedup();
    if names.iter().any(|n| n == conditioner) {
        return Err(Error::InvalidParameter(format!(
            "`{conditioner}` is both a variable and the conditioner"
        )));
    }
    for n in &names {
        data.column(n)?;
    }
    if names.len() < 2 {
        return Err(Error::TooFewVariables {
            needed: 2,
            found: names.len(),
        });
    }
    cfg.validate()?;
    let pairs: Vec<(usize, usize)> = (0..names.len())
        .flat_map(|i| (i + 1..names.len()).map(move |j| (i, j)))
        .collect();
    let results: Vec<TestResult> = pairs
        .par_iter()
        .map(|&(i, j)| run_test(data, &names[i], &names[j], conditioner, cfg))
        .collect::<Result<_>>()?;
    let config = match results.first() {
        Some(r) => r.config.clone(),
        None => unreachable!("at least one pair"),
    };
    let edges = pairs
        .iter()
        .zip(&results)
        .map(|(&(i, j), r)| GraphEdge {
            a: names[i].clone(),
            b: names[j].clone(),
            posterior_h1: r.posterior_h1,
            log_bf: r.log_bf,
            visible: r.posterior_h1 >= DISPLAY_THRESHOLD,
        })
        .collect();
    Ok(DependenceGraph {
        conditioner: conditioner.into(),
        nodes: names,
        threshold: DISPLAY_THRESHOLD,
        n: data.len(),
        seed: data.seed(),
        config,
        pairs: edges,
    })
}

/// Index of the largest value, preferring the smallest `c` among ties.
fn argmax_smallest_c(cs: &[f64], values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in 0..cs.len() {
        best = match best {
            None => Some(i),
            Some(b) if values[i] > values[b] || (values[i] == values[b] && cs[i] < cs[b]) => Some(i),
            keep => keep,
        };
    }
    best
}

/// The grid value of `c` maximising `ln phi` of one model. Ties go to the
/// smallest `c`.
pub fn select_c(problem: &TestProblem, grid: &[f64], kind: ResponseKind, rho: Rho) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&c| problem.log_phi(kind, c, rho))
        .collect::<Result<_>>()?;
    Ok(grid[argmax_smallest_c(grid, &values).expect("nonempty grid")])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub c: f64,
    pub rho: f64,
    pub log_phi_x: f64,
    pub log_phi_y: f64,
    pub log_phi_xy: f64,
    pub log_bf: f64,
    pub posterior_h1: f64,
}

impl SweepRow {
    pub fn log_phi(&self, kind: ResponseKind) -> f64 {
        match kind {
            ResponseKind::X => self.log_phi_x,
            ResponseKind::Y => self.log_phi_y,
            ResponseKind::XY => self.log_phi_xy,
        }
    }
}

/// Best grid row for one model at one `rho`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArgmaxRow {
    pub kind: ResponseKind,
    pub row: SweepRow,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sweep {
    /// One row per `(c, rho)`, `c` varying fastest within each `rho`.
    pub rows: Vec<SweepRow>,
    pub argmax: Vec<ArgmaxRow>,
}

/// Evaluate every `(c, rho)` grid cell with a global `c`.
pub fn sweep(problem: &TestProblem, c_grid: &[f64], rho_grid: &[f64], prior_h1: f64) -> Result<Sweep> {
    if c_grid.is_empty() || rho_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    check_prior(prior_h1)?;
    let rhos: Vec<Rho> = rho_grid.iter().map(|&r| Rho::new(r)).collect::<Result<_>>()?;
    for &c in c_grid {
        TptParams::new(c, 1, Dim::One)?;
    }
    let cells: Vec<(f64, Rho)> = rhos
        .iter()
        .flat_map(|&r| c_grid.iter().map(move |&c| (c, r)))
        .collect();
    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(c, rho)| {
            let [lx, ly, lxy] = problem.log_phis(CValues::global(c), rho)?;
            let log_bf = (lx + ly) - lxy;
            Ok(SweepRow {
                c,
                rho: rho.get(),
                log_phi_x: lx,
                log_phi_y: ly,
                log_phi_xy: lxy,
                log_bf,
                posterior_h1: posterior_h1(log_bf, prior_h1),
            })
        })
        .collect::<Result<_>>()?;
    let mut argmax = Vec::new();
    for block in rows.chunks(c_grid.len()) {
        for kind in ResponseKind::ALL {
            let values: Vec<f64> = block.iter().map(|r| r.log_phi(kind)).collect();
            let best = argmax_smallest_c(c_grid, &values).expect("nonempty grid");
            argmax.push(ArgmaxRow {
                kind,
                row: block[best].clone(),
            });
        }
    }
    Ok(Sweep { rows, argmax })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datahub::{SyntheticModel, SyntheticSpec};
    use proptest::prelude::*;

    #[test]
    fn posterior_arithmetic() {
        assert_eq!(posterior_h1(0.0, 0.5), 0.5);
        assert!((posterior_h1(3f64.ln(), 0.5) - 0.25).abs() < 1e-15);
        assert!(posterior_h1(-800.0, 0.5) == 1.0);
        assert!(posterior_h1(800.0, 0.5) >= 0.0);
        // Prior odds 1:3 against dependence, BF 1.
        assert!((posterior_h1(0.0, 0.25) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn prior_reversion() {
        let cfg = TestConfig::default();
        let empty = run_test_unit(&[], &[], &[], &cfg).unwrap();
        assert_eq!(empty.posterior_h1, 0.5);
        assert_eq!(empty.log_bf, 0.0);
        let single = run_test_unit(&[0.2], &[0.9], &[0.4], &cfg).unwrap();
        assert_eq!(single.posterior_h1, 0.5);
        let skewed = TestConfig {
            prior_h1: 0.2,
            ..cfg
        };
        assert!((run_test_unit(&[], &[], &[], &skewed).unwrap().posterior_h1 - 0.2).abs() < 1e-15);
    }

    #[test]
    fn input_errors() {
        let cfg = TestConfig::default();
        assert!(matches!(
            run_test_unit(&[0.1], &[0.2, 0.3], &[0.5], &cfg),
            Err(Error::LengthMismatch(_))
        ));
        assert!(matches!(
            run_test_unit(&[f64::NAN], &[0.2], &[0.5], &cfg),
            Err(Error::NonFinite { .. })
        ));
        let bad = TestConfig {
            prior_h1: 1.0,
            ..cfg
        };
        assert!(run_test_unit(&[0.1], &[0.2], &[0.5], &bad).is_err());
    }

    #[test]
    fn result_identities() {
        let data = SyntheticSpec::new(SyntheticModel::Mixture, 400, 3).generate();
        let r = run_test(&data, "x", "y", "z", &TestConfig::default()).unwrap();
        assert_eq!(r.log_bf, (r.log_phi_x + r.log_phi_y) - r.log_phi_xy);
        assert_eq!(r.posterior_h1, posterior_h1(r.log_bf, 0.5));
        assert_eq!(r.config.depth_z, 9);
        assert_eq!(r.config.scheme, "dyadic");
        assert_eq!(r.seed, Some(3));
    }

    #[test]
    fn pairwise_counts_and_symmetry() {
        let base = SyntheticSpec::new(SyntheticModel::CommonCause, 300, 1).sample();
        let data = Dataset::from_unit_columns(vec![
            ("z".into(), base.z.clone()),
            ("b".into(), base.y.clone()),
            ("a".into(), base.x.clone()),
        ])
        .unwrap();
        let g = run_pairwise(&data, "z", None, &TestConfig::default()).unwrap();
        assert_eq!(g.pairs.len(), 1);
        assert_eq!((g.pairs[0].a.as_str(), g.pairs[0].b.as_str()), ("a", "b"));
        let ab = run_test(&data, "a", "b", "z", &TestConfig::default()).unwrap();
        let ba = run_test(&data, "b", "a", "z", &TestConfig::default()).unwrap();
        assert_eq!(ab.log_bf.to_bits(), ba.log_bf.to_bits());
        assert!(matches!(
            run_pairwise(&data, "w", None, &TestConfig::default()),
            Err(Error::ConditionerNotFound(_))
        ));
        assert!(matches!(
            run_pairwise(&data, "z", Some(&["a"]), &TestConfig::default()),
            Err(Error::TooFewVariables { .. })
        ));
    }

    #[test]
    fn dot_threshold_is_inclusive() {
        let edge = |a: &str, p: f64| GraphEdge {
            a: a.into(),
            b: "q".into(),
            posterior_h1: p,
            log_bf: 0.0,
            visible: p >= DISPLAY_THRESHOLD,
        };
        let g = DependenceGraph {
            conditioner: "z".into(),
            nodes: vec!["a".into(), "b".into(), "q".into()],
            threshold: DISPLAY_THRESHOLD,
            n: 0,
            seed: None,
            config: run_test_unit(&[], &[], &[], &TestConfig::default()).unwrap().config,
            pairs: vec![edge("a", 0.005), edge("b", 0.004999)],
        };
        let dot = g.to_dot();
        assert!(dot.contains("\"a\" -- \"q\" [label=\"0.01\"]"));
        assert!(!dot.contains("\"b\" -- \"q\""));
        assert_eq!(g.visible_edges().count(), 1);
    }

    #[test]
    fn select_c_rules() {
        let empty = TestProblem::new(&[], &[], &[], None).unwrap();
        assert!(matches!(
            select_c(&empty, &[], ResponseKind::X, Rho::default()),
            Err(Error::EmptyGrid)
        ));
        assert_eq!(select_c(&empty, &[1.0], ResponseKind::X, Rho::default()).unwrap(), 1.0);
        assert_eq!(
            select_c(&empty, &[2.0, 0.5, 1.0], ResponseKind::XY, Rho::default()).unwrap(),
            0.5
        );

        let s = SyntheticSpec::new(SyntheticModel::CommonCause, 500, 2).sample();
        let problem = TestProblem::new(&s.x, &s.y, &s.z, None).unwrap();
        let grid = [0.1, 0.5, 1.0, 2.0, 5.0, 20.0];
        for kind in ResponseKind::ALL {
            let best = select_c(&problem, &grid, kind, Rho::default()).unwrap();
            let at_best = problem.log_phi(kind, best, Rho::default()).unwrap();
            for &c in &grid {
                assert!(problem.log_phi(kind, c, Rho::default()).unwrap() <= at_best);
            }
        }
    }

    #[test]
    fn sweep_shape() {
        let s = SyntheticSpec::new(SyntheticModel::ConditionalOnly, 200, 2).sample();
        let problem = TestProblem::new(&s.x, &s.y, &s.z, None).unwrap();
        let one = sweep(&problem, &[1.0], &[0.5], 0.5).unwrap();
        assert_eq!(one.rows.len(), 1);
        assert_eq!(one.argmax.len(), 3);
        let full = sweep(&problem, &[0.5, 1.0, 2.0], &[0.3, 0.5], 0.5).unwrap();
        assert_eq!(full.rows.len(), 6);
        for a in &full.argmax {
            let best = select_c(&problem, &[0.5, 1.0, 2.0], a.kind, Rho::new(a.row.rho).unwrap()).unwrap();
            assert_eq!(best, a.row.c);
        }
        assert!(sweep(&problem, &[], &[0.5], 0.5).is_err());
        assert!(sweep(&problem, &[1.0], &[], 0.5).is_err());
    }

    proptest! {
        #[test]
        fn posterior_monotonicity(a in -20.0..20.0f64, d in 0.01..10.0f64, p in 0.01..0.98f64, dp in 0.001..0.01f64) {
            prop_assert!(posterior_h1(a + d, p) < posterior_h1(a, p));
            prop_assert!(posterior_h1(a, p + dp) > posterior_h1(a, p));
            let v = posterior_h1(a, p);
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
