//! Toy 2D point sets and CSV dataset files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::tensor::Tensor2;

#[derive(Debug, Clone, PartialEq)]
pub enum ToyShape {
    /// Lemniscate of Bernoulli with half-width 1, stretched vertically to fill `[-1, 1]^2`.
    InfinitySymbol,
    /// Unit circle.
    Ring,
    /// Regular grid over `[-1, 1]^2`, row-major from `(-1, -1)`.
    Grid,
    /// Two uniform disks of radius 0.25 centred at `(-0.7, 0)` and `(0.7, 0)`.
    TwoClusters,
    CustomCsv(PathBuf),
}

impl ToyShape {
    pub fn name(&self) -> String {
        match self {
            ToyShape::InfinitySymbol => "infinity_symbol".into(),
            ToyShape::Ring => "ring".into(),
            ToyShape::Grid => "grid".into(),
            ToyShape::TwoClusters => "two_clusters".into(),
            ToyShape::CustomCsv(p) => format!("custom_csv({})", p.display()),
        }
    }
}

impl std::str::FromStr for ToyShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "infinity_symbol" | "infinity" => Ok(ToyShape::InfinitySymbol),
            "ring" => Ok(ToyShape::Ring),
            "grid" => Ok(ToyShape::Grid),
            "two_clusters" => Ok(ToyShape::TwoClusters),
            other => {
                if let Some(path) = other
                    .strip_prefix("custom_csv(")
                    .and_then(|rest| rest.strip_suffix(')'))
                {
                    Ok(ToyShape::CustomCsv(PathBuf::from(path)))
                } else {
                    Err(Error::Config(format!("unknown dataset shape '{other}'")))
                }
            }
        }
    }
}

/// Vertical stretch mapping the lemniscate's height `±1/(2 sqrt 2)` onto `±1`.
pub const LEMNISCATE_Y_SCALE: f64 = 2.0 * std::f64::consts::SQRT_2;
pub const TWO_CLUSTER_CENTER: f64 = 0.7;
pub const TWO_CLUSTER_RADIUS: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyDatasetSpec {
    pub shape: ToyShape,
    pub n_points: usize,
    /// Standard deviation of isotropic Gaussian noise added after the shape is sampled.
    pub noise_sigma: f64,
    pub seed: u64,
    pub dim: usize,
}

impl Default for ToyDatasetSpec {
    fn default() -> Self {
        Self {
            shape: ToyShape::InfinitySymbol,
            n_points: 20,
            noise_sigma: 0.0,
            seed: 0,
            dim: 2,
        }
    }
}

impl ToyDatasetSpec {
    pub fn new(shape: ToyShape, n_points: usize, seed: u64) -> Self {
        Self {
            shape,
            n_points,
            seed,
            ..Self::default()
        }
    }
}

pub fn generate(spec: &ToyDatasetSpec) -> Result<Tensor2> {
    if let ToyShape::CustomCsv(path) = &spec.shape {
        return load_csv(path);
    }
    if spec.n_points == 0 {
        return Err(Error::Config("n_points must be >= 1".into()));
    }
    if spec.dim != 2 {
        return Err(Error::Config(format!(
            "built-in shapes are two-dimensional, got dim = {}",
            spec.dim
        )));
    }
    if !(spec.noise_sigma >= 0.0) || !spec.noise_sigma.is_finite() {
        return Err(Error::Config(format!("noise_sigma must be >= 0, got {}", spec.noise_sigma)));
    }
    let n = spec.n_points;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let tau = std::f64::consts::TAU;
    let mut points: Vec<[f64; 2]> = match spec.shape {
        ToyShape::InfinitySymbol => (0..n)
            .map(|_| {
                let t: f64 = rng.random_range(0.0..tau);
                let (s, c) = t.sin_cos();
                let denom = 1.0 + s * s;
                [c / denom, LEMNISCATE_Y_SCALE * s * c / denom]
            })
            .collect(),
        ToyShape::Ring => (0..n)
            .map(|_| {
                let t: f64 = rng.random_range(0.0..tau);
                let (s, c) = t.sin_cos();
                [c, s]
            })
            .collect(),
        ToyShape::Grid => {
            let side = (n as f64).sqrt().ceil() as usize;
            let coord = |k: usize| {
                if side == 1 {
                    0.0
                } else {
                    -1.0 + 2.0 * k as f64 / (side - 1) as f64
                }
            };
            (0..n).map(|i| [coord(i % side), coord(i / side)]).collect()
        }
        ToyShape::TwoClusters => (0..n)
            .map(|i| {
                let cx = if i % 2 == 0 { -TWO_CLUSTER_CENTER } else { TWO_CLUSTER_CENTER };
                let r = TWO_CLUSTER_RADIUS * rng.random::<f64>().sqrt();
                let a: f64 = rng.random_range(0.0..tau);
                [cx + r * a.cos(), r * a.sin()]
            })
            .collect(),
        ToyShape::CustomCsv(_) => unreachable!("handled above"),
    };
    if spec.noise_sigma > 0.0 {
        for p in &mut points {
            for v in p.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v += spec.noise_sigma * z;
            }
        }
    }
    Tensor2::from_rows(&points)
}

/// Largest pairwise Euclidean distance.
pub fn diameter(data: &Tensor2) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..data.rows() {
        for j in i + 1..data.rows() {
            d = d.max(crate::tensor::euclidean(data.row(i), data.row(j)));
        }
    }
    d
}

/// Writes a header `x0,x1,...` and one row per point using shortest round-trip formatting.
pub fn save_csv(data: &Tensor2, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv(data, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_csv(data: &Tensor2, w: &mut impl Write) -> Result<()> {
    let header: Vec<String> = (0..data.cols()).map(|c| format!("x{c}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for row in data.iter_rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Tensor2> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let width = reader.headers().map_err(|e| csv_error(path, e))?.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        for cell in record.iter() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("non-finite value '{cell}'"),
                });
            }
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 || width == 0 {
        return Err(Error::EmptyDataset);
    }
    Tensor2::from_vec(rows, width, data)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("expected {expected_len} fields, found {len}"),
        },
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_of_four_is_the_corners() {
        let g = generate(&ToyDatasetSpec::new(ToyShape::Grid, 4, 0)).unwrap();
        assert_eq!(g.data(), &[-1.0, -1.0, 1.0, -1.0, -1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn generation_is_deterministic() {
        for shape in [ToyShape::InfinitySymbol, ToyShape::Ring, ToyShape::TwoClusters] {
            let spec = ToyDatasetSpec {
                noise_sigma: 0.05,
                ..ToyDatasetSpec::new(shape, 50, 3)
            };
            assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
            assert_eq!(generate(&spec).unwrap().shape(), (50, 2));
        }
    }

    #[test]
    fn lemniscate_points_satisfy_implicit_equation() {
        let clean = generate(&ToyDatasetSpec::new(ToyShape::InfinitySymbol, 500, 4)).unwrap();
        let (mut max_x, mut max_y) = (0.0f64, 0.0f64);
        for p in clean.iter_rows() {
            let (x, y) = (p[0], p[1] / LEMNISCATE_Y_SCALE);
            let residual = (x * x + y * y).powi(2) - (x * x - y * y);
            assert!(residual.abs() < 1e-12);
            assert!(p[0].abs() <= 1.0 && p[1].abs() <= 1.0 + 1e-15);
            max_x = max_x.max(p[0].abs());
            max_y = max_y.max(p[1].abs());
        }
        // 500 draws come close to the extremes on both axes
        assert!(max_x > 0.99 && max_y > 0.99, "{max_x} {max_y}");
        // with noise the residual scales with sigma (|grad| <= ~4 on the curve)
        let sigma = 0.01;
        let noisy = generate(&ToyDatasetSpec {
            noise_sigma: sigma,
            ..ToyDatasetSpec::new(ToyShape::InfinitySymbol, 500, 4)
        })
        .unwrap();
        for p in noisy.iter_rows() {
            let (x, y) = (p[0], p[1] / LEMNISCATE_Y_SCALE);
            let residual = (x * x + y * y).powi(2) - (x * x - y * y);
            assert!(residual.abs() < 5.0 * 4.0 * sigma);
        }
    }

    #[test]
    fn built_ins_stay_in_bounding_box() {
        for shape in [ToyShape::InfinitySymbol, ToyShape::Ring, ToyShape::Grid, ToyShape::TwoClusters] {
            let spec = ToyDatasetSpec {
                noise_sigma: 0.1,
                ..ToyDatasetSpec::new(shape, 1000, 7)
            };
            let d = generate(&spec).unwrap();
            assert!(d.data().iter().all(|v| v.abs() <= 1.5));
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(generate(&ToyDatasetSpec::new(ToyShape::Ring, 0, 0)).is_err());
        assert!("spiral".parse::<ToyShape>().is_err());
        assert_eq!(
            "custom_csv(a/b.csv)".parse::<ToyShape>().unwrap(),
            ToyShape::CustomCsv("a/b.csv".into())
        );
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data =
            Tensor2::from_vec(20, 2, (0..40).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
        let path = dir.path().join("d.csv");
        save_csv(&data, &path).unwrap();
        let back = load_csv(&path).unwrap();
        assert_eq!(back.shape(), data.shape());
        for (a, b) in back.data().iter().zip(data.data()) {
            assert!((a - b).abs() <= 1e-15);
        }
        assert!(std::fs::read_to_string(&path).unwrap().starts_with("x0,x1\n"));

        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "").unwrap();
        assert!(matches!(load_csv(&empty), Err(Error::EmptyDataset)));

        let ragged = dir.path().join("ragged.csv");
        std::fs::write(&ragged, "x0,x1\n1,2\n3\n4,5\n").unwrap();
        match load_csv(&ragged) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
