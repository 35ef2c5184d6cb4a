//! Datasets: CSV ingestion, rescaling to `[0,1]`, subsampling and synthetic
//! generators.

use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::QuantileSpec;

/// How raw values were mapped into `[0,1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Rescale {
    MinMax { min: f64, max: f64 },
    GaussianCdf { location: f64, scale: f64 },
}

/// Rescaling method requested at load time. Parameters are estimated from
/// the column.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RescaleMethod {
    MinMax,
    GaussianCdf,
}

impl Rescale {
    /// Identity record for data already on `[0,1]`.
    pub fn unit() -> Self {
        Rescale::MinMax { min: 0.0, max: 1.0 }
    }

    pub fn fit(method: RescaleMethod, name: &str, values: &[f64]) -> Result<Self> {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if values.len() >= 2 && min == max {
            return Err(Error::DegenerateColumn(name.to_string()));
        }
        match method {
            RescaleMethod::MinMax => {
                if values.len() < 2 {
                    Ok(Rescale::unit())
                } else {
                    Ok(Rescale::MinMax { min, max })
                }
            }
            RescaleMethod::GaussianCdf => {
                if values.len() < 2 {
                    return Ok(Rescale::GaussianCdf {
                        location: values.first().copied().unwrap_or(0.0),
                        scale: 1.0,
                    });
                }
                let q = QuantileSpec::from_sample(values)?;
                Ok(Rescale::GaussianCdf {
                    location: q.location,
                    scale: q.scale,
                })
            }
        }
    }

    pub fn apply(&self, raw: f64) -> f64 {
        match *self {
            Rescale::MinMax { min, max } => ((raw - min) / (max - min)).clamp(0.0, 1.0),
            Rescale::GaussianCdf { location, scale } => QuantileSpec { location, scale }.cdf(raw),
        }
    }

    pub fn invert(&self, unit: f64) -> f64 {
        match *self {
            Rescale::MinMax { min, max } => min + unit * (max - min),
            Rescale::GaussianCdf { location, scale } => QuantileSpec { location, scale }.quantile(unit),
        }
    }

    pub fn method_name(&self) -> &'static str {
        match self {
            Rescale::MinMax { .. } => "minmax",
            Rescale::GaussianCdf { .. } => "gaussian-cdf",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
    pub rescale: Rescale,
}

/// Named columns of equal length, every value in `[0,1]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dataset {
    columns: Vec<Column>,
    dropped_rows: usize,
    seed: Option<u64>,
}

impl Dataset {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let lens: Vec<usize> = columns.iter().map(|c| c.values.len()).collect();
        if lens.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::LengthMismatch(lens));
        }
        for c in &columns {
            if let Some(row) = c.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    column: c.name.clone(),
                    row,
                });
            }
            if let Some(&v) = c.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Domain { point: vec![v] });
            }
        }
        Ok(Dataset {
            columns,
            dropped_rows: 0,
            seed: None,
        })
    }

    /// Columns already on `[0,1]`, recorded with the identity rescale.
    pub fn from_unit_columns(named: Vec<(String, Vec<f64>)>) -> Result<Self> {
        Dataset::new(
            named
                .into_iter()
                .map(|(name, values)| Column {
                    name,
                    values,
                    rescale: Rescale::unit(),
                })
                .collect(),
        )
    }

    /// Rescale raw columns and build a dataset.
    pub fn from_raw_columns(named: Vec<(String, Vec<f64>)>, method: RescaleMethod) -> Result<Self> {
        let mut columns = Vec::with_capacity(named.len());
        for (name, raw) in named {
            if let Some(row) = raw.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { column: name, row });
            }
            let rescale = Rescale::fit(method, &name, &raw)?;
            let values = raw.iter().map(|&v| rescale.apply(v)).collect();
            columns.push(Column {
                name,
                values,
                rescale,
            });
        }
        Dataset::new(columns)
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, |c| c.values.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn values(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.column(name)?.values)
    }

    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Uniform sample of `n` rows without replacement, kept in original
    /// row order.
    pub fn subsample(&self, n: usize, seed: u64) -> Result<Dataset> {
        let rows = subsample_rows(self.len(), n, seed)?;
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                values: rows.iter().map(|&i| c.values[i]).collect(),
                rescale: c.rescale,
            })
            .collect();
        Ok(Dataset {
            columns,
            dropped_rows: self.dropped_rows,
            seed: Some(seed),
        })
    }

    /// Write the unit-scale values as CSV with a header row.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let to_io = |e: csv::Error| Error::Io(e.into());
        w.write_record(self.names()).map_err(to_io)?;
        for i in 0..self.len() {
            w.write_record(self.columns.iter().map(|c| c.values[i].to_string()))
                .map_err(to_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sorted indices of a uniform `n`-subset of `0..total`.
pub fn subsample_rows(total: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > total {
        return Err(Error::SubsampleTooLarge {
            requested: n,
            available: total,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = index::sample(&mut rng, total, n).into_vec();
    rows.sort_unstable();
    Ok(rows)
}

/// Read `columns` from a CSV file with a header row. Rows where any selected
/// cell is missing, non-numeric or non-finite are dropped and counted.
pub fn load_csv(path: &Path, columns: &[&str], method: RescaleMethod) -> Result<Dataset> {
    let (raw, dropped) = read_csv_columns(path, columns)?;
    if raw.first().is_none_or(|c| c.is_empty()) {
        return Err(Error::AllRowsDropped { dropped });
    }
    let named = columns.iter().map(|s| s.to_string()).zip(raw).collect();
    let mut data = Dataset::from_raw_columns(named, method)?;
    data.dropped_rows = dropped;
    Ok(data)
}

/// Raw selected columns and the number of dropped rows.
pub fn read_csv_columns(path: &Path, columns: &[&str]) -> Result<(Vec<Vec<f64>>, usize)> {
    let wrap = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(wrap)?;
    let header = reader.headers().map_err(wrap)?.clone();
    let idx: Vec<usize> = columns
        .iter()
        .map(|name| {
            header
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![Vec::new(); columns.len()];
    let mut dropped = 0;
    let mut row = Vec::with_capacity(columns.len());
    for record in reader.records() {
        let record = record.map_err(wrap)?;
        row.clear();
        for &i in &idx {
            match record.get(i).and_then(|s| s.trim().parse::<f64>().ok()) {
                Some(v) if v.is_finite() => row.push(v),
                _ => break,
            }
        }
        if row.len() == idx.len() {
            for (col, &v) in out.iter_mut().zip(&row) {
                col.push(v);
            }
        } else {
            dropped += 1;
        }
    }
    Ok((out, dropped))
}

/// The four synthetic dependence regimes.
///
/// | model | X ⊥ Y | X ⊥ Y given Z |
/// |-------|-------|---------------|
/// | 1     | yes   | yes           |
/// | 2     | no    | yes           |
/// | 3     | yes   | no            |
/// | 4     | no    | no            |
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SyntheticModel {
    Independent,
    CommonCause,
    ConditionalOnly,
    Mixture,
}

impl SyntheticModel {
    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(SyntheticModel::Independent),
            2 => Ok(SyntheticModel::CommonCause),
            3 => Ok(SyntheticModel::ConditionalOnly),
            4 => Ok(SyntheticModel::Mixture),
            _ => Err(Error::InvalidParameter(format!(
                "synthetic model must be 1, 2, 3 or 4, got {id}"
            ))),
        }
    }

    pub fn id(self) -> u8 {
        match self {
            SyntheticModel::Independent => 1,
            SyntheticModel::CommonCause => 2,
            SyntheticModel::ConditionalOnly => 3,
            SyntheticModel::Mixture => 4,
        }
    }

    /// Whether X and Y are dependent given Z under this model.
    pub fn conditionally_dependent(self) -> bool {
        matches!(self, SyntheticModel::ConditionalOnly | SyntheticModel::Mixture)
    }
}

/// Share of the mixture model drawn from the conditionally dependent law.
pub const MIXTURE_WEIGHT: f64 = 0.1;
const COMMON_CAUSE_NOISE: f64 = 0.25;
const INTERACTION_NOISE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub model: SyntheticModel,
    pub n: usize,
    pub seed: u64,
}

/// Synthetic columns `x`, `y`, `z` plus, for the mixture model, which
/// observations came from the conditionally dependent component.
#[derive(Clone, Debug)]
pub struct SyntheticSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub dependent_component: Vec<bool>,
}

/// Fold the real line onto `[0,1]` by reflecting at 0 and 1. Unlike
/// clamping this leaves no point masses on the boundary.
fn reflect(v: f64) -> f64 {
    let m = v.rem_euclid(2.0);
    if m > 1.0 {
        2.0 - m
    } else {
        m
    }
}

fn common_cause(z: f64, e: f64) -> f64 {
    reflect(z + COMMON_CAUSE_NOISE * e)
}

fn interaction(x: f64, z: f64, e: f64) -> f64 {
    let v = x + z + INTERACTION_NOISE * e;
    let f = v - v.floor();
    // `v - floor(v)` can round up to exactly 1.0 for tiny negative v.
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

impl SyntheticSpec {
    pub fn new(model: SyntheticModel, n: usize, seed: u64) -> Self {
        SyntheticSpec { model, n, seed }
    }

    pub fn sample(&self) -> SyntheticSample {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut s = SyntheticSample {
            x: Vec::with_capacity(self.n),
            y: Vec::with_capacity(self.n),
            z: Vec::with_capacity(self.n),
            dependent_component: Vec::with_capacity(self.n),
        };
        for _ in 0..self.n {
            let dependent = match self.model {
                SyntheticModel::Independent | SyntheticModel::CommonCause => false,
                SyntheticModel::ConditionalOnly => true,
                SyntheticModel::Mixture => rng.random::<f64>() < MIXTURE_WEIGHT,
            };
            let (x, y, z) = match (self.model, dependent) {
                (SyntheticModel::Independent, _) => (rng.random(), rng.random(), rng.random()),
                (_, false) => {
                    let z: f64 = rng.random();
                    let e1: f64 = rng.sample(StandardNormal);
                    let e2: f64 = rng.sample(StandardNormal);
                    (common_cause(z, e1), common_cause(z, e2), z)
                }
                (_, true) => {
                    let x: f64 = rng.random();
                    let z: f64 = rng.random();
                    let e: f64 = rng.sample(StandardNormal);
                    (x, interaction(x, z, e), z)
                }
            };
            s.x.push(x);
            s.y.push(y);
            s.z.push(z);
            s.dependent_component.push(dependent);
        }
        s
    }

    /// Dataset with columns `x`, `y`, `z` on the identity rescale.
    pub fn generate(&self) -> Dataset {
        let s = self.sample();
        Dataset::from_unit_columns(vec![("x".into(), s.x), ("y".into(), s.y), ("z".into(), s.z)])
            .expect("generators emit finite values on [0,1]")
            .with_seed(self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn minmax_example() {
        let f = write_tmp("a,b\n1,5\n2,6\n3,9\n");
        let d = load_csv(f.path(), &["a"], RescaleMethod::MinMax).unwrap();
        assert_eq!(d.values("a").unwrap(), &[0.0, 0.5, 1.0]);
        assert_eq!(d.dropped_rows(), 0);
    }

    #[test]
    fn bad_rows_are_dropped() {
        let f = write_tmp("a,b,c\n1,5,x\n2,oops,0\n3,9,\n4,nan,1\n5,1,1\n");
        let d = load_csv(f.path(), &["a", "b"], RescaleMethod::MinMax).unwrap();
        assert_eq!(d.dropped_rows(), 2);
        assert_eq!(d.len(), 3);
        let d2 = load_csv(f.path(), &["b"], RescaleMethod::MinMax).unwrap();
        assert_eq!(d2.dropped_rows(), 2);
    }

    #[test]
    fn load_errors() {
        let f = write_tmp("a,b\n1,2\n1,3\n");
        assert!(matches!(
            load_csv(f.path(), &["q"], RescaleMethod::MinMax),
            Err(Error::MissingColumn(_))
        ));
        assert!(matches!(
            load_csv(f.path(), &["a"], RescaleMethod::MinMax),
            Err(Error::DegenerateColumn(_))
        ));
        let g = write_tmp("a\nx\ny\n");
        assert!(matches!(
            load_csv(g.path(), &["a"], RescaleMethod::MinMax),
            Err(Error::AllRowsDropped { dropped: 2 })
        ));
        let missing = Path::new("/nonexistent/file.csv");
        assert!(load_csv(missing, &["a"], RescaleMethod::MinMax).unwrap_err().is_data_error());
    }

    #[test]
    fn minmax_round_trip() {
        let raw = vec![-3.5, 2.25, 1e3, 17.0];
        let d = Dataset::from_raw_columns(vec![("v".into(), raw.clone())], RescaleMethod::MinMax).unwrap();
        let col = d.column("v").unwrap();
        for (u, r) in col.values.iter().zip(&raw) {
            let back = col.rescale.invert(*u);
            assert!((back - r).abs() <= 1e-12 * r.abs().max(1.0));
        }
    }

    #[test]
    fn gaussian_cdf_is_roughly_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let raw: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        let d = Dataset::from_raw_columns(vec![("g".into(), raw)], RescaleMethod::GaussianCdf).unwrap();
        let mut u = d.values("g").unwrap().to_vec();
        u.sort_by(f64::total_cmp);
        let n = u.len() as f64;
        let ks = u
            .iter()
            .enumerate()
            .map(|(i, &v)| (v - i as f64 / n).abs().max(((i + 1) as f64 / n - v).abs()))
            .fold(0.0, f64::max);
        assert!(ks < 0.05, "KS statistic {ks}");
    }

    #[test]
    fn subsample_rules() {
        let data = SyntheticSpec::new(SyntheticModel::Independent, 1000, 1).generate();
        let all = data.subsample(1000, 9).unwrap();
        assert_eq!(all.values("x").unwrap(), data.values("x").unwrap());
        let a = data.subsample(500, 4).unwrap();
        assert_eq!(a, data.subsample(500, 4).unwrap());
        assert_eq!(a.seed(), Some(4));
        assert!(data.subsample(1001, 0).is_err());

        let r1 = subsample_rows(1000, 500, 11).unwrap();
        let r2 = subsample_rows(1000, 500, 12).unwrap();
        let set: std::collections::HashSet<_> = r1.iter().collect();
        let overlap = r2.iter().filter(|i| set.contains(i)).count() as f64 / 500.0;
        // Hypergeometric mean 0.5, sd about 0.016.
        assert!((overlap - 0.5).abs() < 0.08, "overlap {overlap}");
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn generators_are_deterministic_and_bounded() {
        for id in 1..=4 {
            let spec = SyntheticSpec::new(SyntheticModel::from_id(id).unwrap(), 2000, 77);
            let a = spec.generate();
            assert_eq!(a, spec.generate());
            for c in a.columns() {
                assert!(c.values.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
        assert!(SyntheticModel::from_id(5).is_err());
    }

    #[test]
    fn reflection_has_no_atoms() {
        assert_eq!(reflect(0.25), 0.25);
        assert!((reflect(-0.25) - 0.25).abs() < 1e-15);
        assert!((reflect(1.25) - 0.75).abs() < 1e-15);
        assert!((reflect(2.5) - 0.5).abs() < 1e-15);
        let s = SyntheticSpec::new(SyntheticModel::CommonCause, 10_000, 4).sample();
        let on_edge = s.x.iter().filter(|v| **v == 0.0 || **v == 1.0).count();
        assert_eq!(on_edge, 0);
    }

    #[test]
    fn model_one_uncorrelated() {
        let s = SyntheticSpec::new(SyntheticModel::Independent, 10_000, 5).sample();
        assert!(corr(&s.x, &s.y).abs() < 0.05);
    }

    #[test]
    fn model_two_pattern() {
        let s = SyntheticSpec::new(SyntheticModel::CommonCause, 10_000, 6).sample();
        assert!(corr(&s.x, &s.y) > 0.1);
        for k in 0..10 {
            let lo = k as f64 / 10.0;
            let (xs, ys): (Vec<f64>, Vec<f64>) = s
                .x
                .iter()
                .zip(&s.y)
                .zip(&s.z)
                .filter(|(_, z)| **z >= lo && **z < lo + 0.1)
                .map(|((x, y), _)| (*x, *y))
                .unzip();
            assert!(corr(&xs, &ys).abs() < 0.1, "slice {k}");
        }
    }

    #[test]
    fn model_three_marginally_uncorrelated() {
        let s = SyntheticSpec::new(SyntheticModel::ConditionalOnly, 10_000, 8).sample();
        assert!(corr(&s.x, &s.y).abs() < 0.05);
    }

    #[test]
    fn mixture_fraction() {
        let s = SyntheticSpec::new(SyntheticModel::Mixture, 10_000, 10).sample();
        let frac = s.dependent_component.iter().filter(|b| **b).count() as f64 / 1e4;
        assert!((frac - MIXTURE_WEIGHT).abs() < 0.01, "{frac}");
    }
}
