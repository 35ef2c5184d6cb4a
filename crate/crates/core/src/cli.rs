//! The `bnpci` command line: `test`, `graph`, `synth` and `sweep`.
//!
//! Exit codes: 0 on success, 2 for invalid arguments or parameters, 3 when
//! the input data cannot be used. `BNPCI_THREADS` caps the worker pool.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bftest::{run_pairwise, run_test, sweep, CValues, TestConfig, TestProblem, TestResult};
use crate::condopt::Rho;
use crate::datahub::{load_csv, Dataset, RescaleMethod, SyntheticModel, SyntheticSpec};
use crate::error::{Error, Result};

pub const THREADS_ENV: &str = "BNPCI_THREADS";

#[derive(Parser, Debug)]
#[command(name = "bnpci", version, about = "Bayesian nonparametric conditional independence tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Posterior probability that X and Y are dependent given Z.
    Test(TestArgs),
    /// Pairwise conditional dependence graph given one variable.
    Graph(GraphArgs),
    /// Write a synthetic `x,y,z` dataset.
    Synth(SynthArgs),
    /// Marginal likelihoods over a grid of c and rho.
    Sweep(SweepArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Scheme {
    Dyadic,
    Quantile,
}

impl Scheme {
    fn rescale(self) -> RescaleMethod {
        match self {
            Scheme::Dyadic => RescaleMethod::MinMax,
            Scheme::Quantile => RescaleMethod::GaussianCdf,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum TestFormat {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum GraphFormat {
    Dot,
    Json,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Concentration c for all three models.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long)]
    c_x: Option<f64>,
    #[arg(long)]
    c_y: Option<f64>,
    #[arg(long)]
    c_xy: Option<f64>,
    /// Stopping probability of the Z partition.
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Prior probability of conditional dependence.
    #[arg(long, default_value_t = 0.5)]
    prior_h1: f64,
    /// Partition depth; defaults to ceil(log2 N).
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long, value_enum, default_value_t = Scheme::Dyadic)]
    scheme: Scheme,
}

impl ModelArgs {
    fn config(&self) -> Result<TestConfig> {
        let cfg = TestConfig {
            c: CValues {
                x: self.c_x.unwrap_or(self.c),
                y: self.c_y.unwrap_or(self.c),
                xy: self.c_xy.unwrap_or(self.c),
            },
            rho: Rho::new(self.rho)?,
            prior_h1: self.prior_h1,
            depth: self.depth,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// Subsample this many rows.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SampleArgs {
    fn apply(&self, data: Dataset) -> Result<Dataset> {
        match self.n {
            Some(n) => data.subsample(n, self.seed),
            None => Ok(data.with_seed(self.seed)),
        }
    }
}

#[derive(Args, Debug)]
struct TestArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    x: String,
    #[arg(long)]
    y: String,
    #[arg(long)]
    z: String,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    sample: SampleArgs,
    #[arg(long, value_enum, default_value_t = TestFormat::Json)]
    format: TestFormat,
}

#[derive(Args, Debug)]
struct GraphArgs {
    #[arg(long)]
    data: PathBuf,
    /// Conditioning column.
    #[arg(long)]
    given: String,
    /// Variables to pair up; defaults to every other column.
    #[arg(long, value_delimiter = ',')]
    vars: Option<Vec<String>>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    sample: SampleArgs,
    #[arg(long, value_enum, default_value_t = GraphFormat::Dot)]
    format: GraphFormat,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Dependence regime, 1 to 4.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    model: u8,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    x: String,
    #[arg(long)]
    y: String,
    #[arg(long)]
    z: String,
    #[arg(long, value_delimiter = ',', required = true)]
    c_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    rho_grid: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    prior_h1: f64,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long, value_enum, default_value_t = Scheme::Dyadic)]
    scheme: Scheme,
    #[command(flatten)]
    sample: SampleArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parse `args` (including the program name), run the command and return
/// the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                return 2;
            }
            let _ = write!(stdout, "{text}");
            return 0;
        }
    };
    // Output is buffered so the command can run inside a worker pool.
    let mut out = Vec::new();
    let mut err = Vec::new();
    let outcome = match thread_pool() {
        Ok(Some(pool)) => pool.install(|| dispatch(cli.command, &mut out, &mut err)),
        Ok(None) => dispatch(cli.command, &mut out, &mut err),
        Err(e) => Err(e),
    };
    let _ = stdout.write_all(&out);
    let _ = stderr.write_all(&err);
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_data_error() {
                3
            } else {
                2
            }
        }
    }
}

fn thread_pool() -> Result<Option<rayon::ThreadPool>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::InvalidParameter(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map(Some)
        .map_err(|e| Error::InvalidParameter(e.to_string()))
}

fn dispatch(command: Command, stdout: &mut Vec<u8>, stderr: &mut Vec<u8>) -> Result<()> {
    match command {
        Command::Test(a) => cmd_test(a, stdout, stderr),
        Command::Graph(a) => cmd_graph(a, stdout),
        Command::Synth(a) => cmd_synth(a, stdout),
        Command::Sweep(a) => cmd_sweep(a, stdout),
    }
}

fn with_output(out: Option<&Path>, stdout: &mut dyn Write, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            f(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => f(stdout),
    }
}

fn cmd_test(a: TestArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let cfg = a.model.config()?;
    let columns = [a.x.as_str(), a.y.as_str(), a.z.as_str()];
    let result = match load_csv(&a.data, &columns, a.model.scheme.rescale()) {
        Ok(data) => {
            let data = a.sample.apply(data)?;
            run_test(&data, &a.x, &a.y, &a.z, &cfg)?
        }
        Err(Error::AllRowsDropped { dropped }) => {
            writeln!(
                stderr,
                "warning: no usable rows ({dropped} dropped); the posterior equals the prior"
            )?;
            let empty = Dataset::from_unit_columns(columns.iter().map(|c| (c.to_string(), Vec::new())).collect())?;
            let mut r = run_test(&empty.with_seed(a.sample.seed), &a.x, &a.y, &a.z, &cfg)?;
            r.dropped_rows = dropped;
            r.config.scheme = match a.model.scheme {
                Scheme::Dyadic => "dyadic".into(),
                Scheme::Quantile => "quantile".into(),
            };
            r
        }
        Err(e) => return Err(e),
    };
    match a.format {
        TestFormat::Json => {
            serde_json::to_writer_pretty(&mut *stdout, &result).map_err(std::io::Error::from)?;
            writeln!(stdout)?;
        }
        TestFormat::Csv => write_test_csv(&result, stdout)?,
    }
    Ok(())
}

fn write_test_csv(r: &TestResult, out: &mut dyn Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let c = &r.config;
    let fields: [(&str, String); 16] = [
        ("log_phi_x", r.log_phi_x.to_string()),
        ("log_phi_y", r.log_phi_y.to_string()),
        ("log_phi_xy", r.log_phi_xy.to_string()),
        ("log_bf", r.log_bf.to_string()),
        ("posterior_h1", r.posterior_h1.to_string()),
        ("n", r.n.to_string()),
        ("dropped_rows", r.dropped_rows.to_string()),
        ("c_x", c.c_x.to_string()),
        ("c_y", c.c_y.to_string()),
        ("c_xy", c.c_xy.to_string()),
        ("rho", c.rho.to_string()),
        ("prior_h1", c.prior_h1.to_string()),
        ("depth", c.depth_z.to_string()),
        ("scheme", c.scheme.clone()),
        ("columns", r.columns.join(";")),
        ("seed", r.seed.map(|s| s.to_string()).unwrap_or_default()),
    ];
    let to_io = |e: csv::Error| Error::Io(e.into());
    w.write_record(fields.iter().map(|f| f.0)).map_err(to_io)?;
    w.write_record(fields.iter().map(|f| f.1.as_str())).map_err(to_io)?;
    w.flush()?;
    Ok(())
}

fn csv_header(path: &Path) -> Result<Vec<String>> {
    let mut reader = csv::Reader::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let header = reader.headers().map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(header.iter().map(|h| h.trim().to_string()).collect())
}

fn cmd_graph(a: GraphArgs, stdout: &mut dyn Write) -> Result<()> {
    let cfg = a.model.config()?;
    let header = csv_header(&a.data)?;
    if !header.contains(&a.given) {
        return Err(Error::ConditionerNotFound(a.given));
    }
    let vars: Vec<String> = match &a.vars {
        Some(v) => v.clone(),
        None => header.iter().filter(|h| **h != a.given).cloned().collect(),
    };
    let mut selected: Vec<&str> = vars.iter().map(String::as_str).collect();
    selected.push(&a.given);
    selected.sort();
    selected.dedup();
    let data = a.sample.apply(load_csv(&a.data, &selected, a.model.scheme.rescale())?)?;
    let var_refs: Vec<&str> = vars.iter().map(String::as_str).collect();
    let graph = run_pairwise(&data, &a.given, Some(&var_refs), &cfg)?;
    with_output(a.out.as_deref(), stdout, |w| {
        match a.format {
            GraphFormat::Dot => w.write_all(graph.to_dot().as_bytes())?,
            GraphFormat::Json => writeln!(w, "{}", graph.to_json())?,
        }
        Ok(())
    })
}

fn cmd_synth(a: SynthArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = SyntheticModel::from_id(a.model)?;
    let data = SyntheticSpec::new(model, a.n, a.seed).generate();
    with_output(a.out.as_deref(), stdout, |w| data.write_csv(w))
}

fn cmd_sweep(a: SweepArgs, stdout: &mut dyn Write) -> Result<()> {
    if a.c_grid.is_empty() || a.rho_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let columns = [a.x.as_str(), a.y.as_str(), a.z.as_str()];
    let data = a.sample.apply(load_csv(&a.data, &columns, a.scheme.rescale())?)?;
    let problem = TestProblem::new(data.values(&a.x)?, data.values(&a.y)?, data.values(&a.z)?, a.depth)?;
    let table = sweep(&problem, &a.c_grid, &a.rho_grid, a.prior_h1)?;
    with_output(a.out.as_deref(), stdout, |w| {
        let mut csv = csv::Writer::from_writer(w);
        let to_io = |e: csv::Error| Error::Io(e.into());
        csv.write_record([
            "kind",
            "c",
            "rho",
            "log_phi_x",
            "log_phi_y",
            "log_phi_xy",
            "log_bf",
            "posterior_h1",
        ])
        .map_err(to_io)?;
        let grid = table.rows.iter().map(|r| ("grid".to_string(), r));
        let best = table.argmax.iter().map(|a| (format!("argmax_{}", a.kind.name()), &a.row));
        for (kind, r) in grid.chain(best) {
            csv.write_record([
                kind,
                r.c.to_string(),
                r.rho.to_string(),
                r.log_phi_x.to_string(),
                r.log_phi_y.to_string(),
                r.log_phi_xy.to_string(),
                r.log_bf.to_string(),
                r.posterior_h1.to_string(),
            ])
            .map_err(to_io)?;
        }
        csv.flush()?;
        Ok(())
    })
}
