//! Distances between data points and generated samples, epsilon-ball
//! rejection, and nearest-sample assignment.
//!
//! Everything here is brute force. The projected path only changes the
//! feature space: rows are randomly projected and normalized to unit length
//! before filtering and ranking.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{squared_euclidean, Tensor2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    SquaredEuclidean,
    #[default]
    Euclidean,
}

/// `d(x_i, s_j)` for every data point `i` and sample `j`, row-major by data point.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    m: usize,
    metric: Metric,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m + j]
    }

    /// Plain Euclidean distance regardless of the stored metric.
    #[inline]
    pub fn euclidean(&self, i: usize, j: usize) -> f64 {
        match self.metric {
            Metric::Euclidean => self.get(i, j),
            Metric::SquaredEuclidean => self.get(i, j).sqrt(),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    /// Euclidean distance from sample `j` to its closest data point.
    pub fn min_over_data(&self, j: usize) -> f64 {
        (0..self.n)
            .map(|i| self.euclidean(i, j))
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn pairwise_distances(data: &Tensor2, samples: &Tensor2, metric: Metric) -> Result<DistanceMatrix> {
    if data.cols() != samples.cols() {
        return Err(Error::shape(
            "pairwise_distances",
            format!("{} columns", data.cols()),
            format!("{} columns", samples.cols()),
        ));
    }
    let (n, m) = (data.rows(), samples.rows());
    let mut values = vec![0.0; n * m];
    if m > 0 {
        values
            .par_chunks_mut(m)
            .enumerate()
            .for_each(|(i, out)| {
                let x = data.row(i);
                for (j, o) in out.iter_mut().enumerate() {
                    let sq = squared_euclidean(x, samples.row(j));
                    *o = match metric {
                        Metric::SquaredEuclidean => sq,
                        Metric::Euclidean => sq.sqrt(),
                    };
                }
            });
    }
    Ok(DistanceMatrix { n, m, metric, values })
}

/// Samples whose Euclidean distance to every data point is at least `epsilon`,
/// in increasing index order. `epsilon = 0` keeps everything.
pub fn filter_by_epsilon(dm: &DistanceMatrix, epsilon: f64) -> Result<Vec<usize>> {
    if !(epsilon >= 0.0) {
        return Err(Error::Config(format!("epsilon must be >= 0, got {epsilon}")));
    }
    Ok((0..dm.m)
        .filter(|&j| (0..dm.n).all(|i| dm.euclidean(i, j) >= epsilon))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentResult {
    /// `sigma[i]` is the index (into the full sample set) chosen for data point `i`.
    pub sigma: Vec<usize>,
    /// Selected distance per data point, in the metric of the distance matrix.
    pub dist: Vec<f64>,
    pub accepted_count: usize,
}

/// Per data point argmin over `accepted` samples; ties go to the lowest sample index.
pub fn assign_nearest(dm: &DistanceMatrix, accepted: &[usize]) -> Result<AssignmentResult> {
    if accepted.is_empty() {
        return Err(Error::EmptyAcceptedSet);
    }
    let mut sigma = Vec::with_capacity(dm.n);
    let mut dist = Vec::with_capacity(dm.n);
    for i in 0..dm.n {
        let row = dm.row(i);
        let mut best = (usize::MAX, f64::INFINITY);
        for &j in accepted {
            let d = row[j];
            if d < best.1 || (d == best.1 && j < best.0) {
                best = (j, d);
            }
        }
        sigma.push(best.0);
        dist.push(best.1);
    }
    Ok(AssignmentResult {
        sigma,
        dist,
        accepted_count: accepted.len(),
    })
}

/// Gaussian random projection `P` (`projected_dim x input_dim`), entries `N(0, 1/projected_dim)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    pub input_dim: usize,
    pub projected_dim: usize,
    pub seed: u64,
    pub matrix: Tensor2,
}

impl ProjectionSpec {
    pub fn new(input_dim: usize, projected_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || projected_dim == 0 {
            return Err(Error::Config("projection dims must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (projected_dim as f64).sqrt();
        let data = (0..input_dim * projected_dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
            .collect();
        Ok(Self {
            input_dim,
            projected_dim,
            seed,
            matrix: Tensor2::from_vec(projected_dim, input_dim, data)?,
        })
    }

    /// The identity map; projection then reduces to plain normalization.
    pub fn identity(dim: usize) -> Self {
        Self {
            input_dim: dim,
            projected_dim: dim,
            seed: 0,
            matrix: Tensor2::identity(dim),
        }
    }
}

/// Each row becomes `P x / |P x|`.
pub fn project_and_normalize(points: &Tensor2, spec: &ProjectionSpec) -> Result<Tensor2> {
    if points.cols() != spec.input_dim || spec.matrix.shape() != (spec.projected_dim, spec.input_dim) {
        return Err(Error::shape(
            "project_and_normalize",
            format!("{} input columns", spec.input_dim),
            format!("{} columns", points.cols()),
        ));
    }
    let mut out = points.matmul_nt(&spec.matrix)?;
    normalize_rows(&mut out)?;
    Ok(out)
}

fn normalize_rows(t: &mut Tensor2) -> Result<()> {
    for r in 0..t.rows() {
        let row = t.row_mut(r);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNormProjection { row: r });
        }
        row.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(())
}

/// Space in which the epsilon predicate and the nearest-sample search run.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum FilterSpace {
    #[default]
    Raw,
    Projected(ProjectionSpec),
}

impl FilterSpace {
    pub fn features(&self, points: &Tensor2) -> Result<Tensor2> {
        match self {
            FilterSpace::Raw => Ok(points.clone()),
            FilterSpace::Projected(spec) => project_and_normalize(points, spec),
        }
    }
}

/// Filters and ranks candidates on projected, normalized features, then
/// re-ranks the best `shortlist` candidates of each data point by their
/// distance between normalized full-dimensional features.
///
/// The epsilon guarantee holds in the projected space. With
/// [`ProjectionSpec::identity`] the result equals brute force on the
/// normalized features.
pub fn assign_projected(
    data: &Tensor2,
    samples: &Tensor2,
    spec: &ProjectionSpec,
    epsilon: f64,
    shortlist: usize,
) -> Result<AssignmentResult> {
    let pd = project_and_normalize(data, spec)?;
    let ps = project_and_normalize(samples, spec)?;
    let projected = pairwise_distances(&pd, &ps, Metric::Euclidean)?;
    let accepted = filter_by_epsilon(&projected, epsilon)?;
    if accepted.is_empty() {
        return Err(Error::EmptyAcceptedSet);
    }

    let mut fd = data.clone();
    normalize_rows(&mut fd)?;
    let mut fs = samples.clone();
    normalize_rows(&mut fs)?;

    let shortlist = shortlist.max(1);
    let mut sigma = Vec::with_capacity(data.rows());
    let mut dist = Vec::with_capacity(data.rows());
    for i in 0..data.rows() {
        let row = projected.row(i);
        let mut candidates = accepted.clone();
        candidates.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        candidates.truncate(shortlist);
        let mut best = (usize::MAX, f64::INFINITY);
        for j in candidates {
            let d = squared_euclidean(fd.row(i), fs.row(j)).sqrt();
            if d < best.1 || (d == best.1 && j < best.0) {
                best = (j, d);
            }
        }
        sigma.push(best.0);
        dist.push(best.1);
    }
    Ok(AssignmentResult {
        sigma,
        dist,
        accepted_count: accepted.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Tensor2 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor2::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn trivial_distances() {
        let p = Tensor2::from_rows(&[[0.0, 0.0]]).unwrap();
        assert_eq!(pairwise_distances(&p, &p, Metric::SquaredEuclidean).unwrap().get(0, 0), 0.0);
        let s = Tensor2::from_rows(&[[3.0, 4.0]]).unwrap();
        assert_eq!(pairwise_distances(&p, &s, Metric::Euclidean).unwrap().get(0, 0), 5.0);
        assert_eq!(pairwise_distances(&p, &s, Metric::SquaredEuclidean).unwrap().get(0, 0), 25.0);
        assert!(pairwise_distances(&p, &Tensor2::zeros(1, 3), Metric::Euclidean).is_err());
    }

    #[test]
    fn distances_match_double_loop() {
        let a = random(5, 3, 1);
        let b = random(7, 3, 2);
        let dm = pairwise_distances(&a, &b, Metric::SquaredEuclidean).unwrap();
        for i in 0..5 {
            for j in 0..7 {
                let mut acc = 0.0;
                for c in 0..3 {
                    let d = a.get(i, c) - b.get(j, c);
                    acc += d * d;
                }
                assert_eq!(dm.get(i, j), acc);
            }
        }
    }

    #[test]
    fn epsilon_zero_keeps_all_and_radius_example() {
        let data = Tensor2::from_rows(&[[0.0, 0.0]]).unwrap();
        let samples = Tensor2::from_rows(&[[0.5, 0.0], [0.0, 2.0]]).unwrap();
        let dm = pairwise_distances(&data, &samples, Metric::Euclidean).unwrap();
        assert_eq!(filter_by_epsilon(&dm, 0.0).unwrap(), vec![0, 1]);
        assert_eq!(filter_by_epsilon(&dm, 1.0).unwrap(), vec![1]);
        assert!(filter_by_epsilon(&dm, -0.1).is_err());
    }

    #[test]
    fn squared_metric_filters_on_plain_radius() {
        let data = Tensor2::from_rows(&[[0.0, 0.0]]).unwrap();
        let samples = Tensor2::from_rows(&[[0.5, 0.0], [0.0, 2.0]]).unwrap();
        let dm = pairwise_distances(&data, &samples, Metric::SquaredEuclidean).unwrap();
        assert_eq!(filter_by_epsilon(&dm, 1.0).unwrap(), vec![1]);
    }

    #[test]
    fn median_epsilon_matches_brute_force() {
        let data = random(50, 2, 10);
        let samples = random(50, 2, 11);
        let mins: Vec<f64> = (0..50)
            .map(|j| {
                (0..50)
                    .map(|i| squared_euclidean(data.row(i), samples.row(j)).sqrt())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let brute_force = |eps: f64| -> Vec<usize> { (0..50).filter(|&j| mins[j] >= eps).collect() };
        let mut sorted = mins.clone();
        sorted.sort_by(f64::total_cmp);
        let eps = sorted[25];
        let dm = pairwise_distances(&data, &samples, Metric::Euclidean).unwrap();
        let got = filter_by_epsilon(&dm, eps).unwrap();
        assert_eq!(got, brute_force(eps));
        assert_eq!(got.len(), 25);
    }

    #[test]
    fn assignment_edge_cases() {
        let data = random(4, 2, 3);
        let dm = pairwise_distances(&data, &data, Metric::SquaredEuclidean).unwrap();
        let one = assign_nearest(&dm, &[2]).unwrap();
        assert!(one.sigma.iter().all(|&j| j == 2));
        let all: Vec<usize> = (0..4).collect();
        let perfect = assign_nearest(&dm, &all).unwrap();
        assert_eq!(perfect.sigma, all);
        assert!(perfect.dist.iter().all(|&d| d == 0.0));
        assert!(matches!(assign_nearest(&dm, &[]), Err(Error::EmptyAcceptedSet)));
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let data = Tensor2::from_rows(&[[0.0, 0.0]]).unwrap();
        let samples = Tensor2::from_rows(&[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]]).unwrap();
        let dm = pairwise_distances(&data, &samples, Metric::Euclidean).unwrap();
        assert_eq!(assign_nearest(&dm, &[2, 1]).unwrap().sigma, vec![1]);
    }

    #[test]
    fn assignment_matches_exhaustive_scan() {
        let data = random(20, 2, 5);
        let samples = random(200, 2, 6);
        let dm = pairwise_distances(&data, &samples, Metric::SquaredEuclidean).unwrap();
        let all: Vec<usize> = (0..200).collect();
        let got = assign_nearest(&dm, &all).unwrap();
        for i in 0..20 {
            let mut best = 0;
            for j in 1..200 {
                if squared_euclidean(data.row(i), samples.row(j))
                    < squared_euclidean(data.row(i), samples.row(best))
                {
                    best = j;
                }
            }
            assert_eq!(got.sigma[i], best);
        }
    }

    #[test]
    fn identity_projection_normalizes() {
        let p = Tensor2::from_rows(&[[3.0, 4.0]]).unwrap();
        let out = project_and_normalize(&p, &ProjectionSpec::identity(2)).unwrap();
        assert!((out.get(0, 0) - 0.6).abs() < 1e-15 && (out.get(0, 1) - 0.8).abs() < 1e-15);
        let zero = Tensor2::zeros(1, 2);
        assert!(matches!(
            project_and_normalize(&zero, &ProjectionSpec::identity(2)),
            Err(Error::ZeroNormProjection { row: 0 })
        ));
    }

    #[test]
    fn projected_rows_have_unit_norm() {
        let spec = ProjectionSpec::new(10, 4, 7).unwrap();
        assert_eq!(spec.matrix.shape(), (4, 10));
        let out = project_and_normalize(&random(30, 10, 8), &spec).unwrap();
        for row in out.iter_rows() {
            let n: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn projection_preserves_distance_ranking() {
        let points = random(100, 64, 21);
        let spec = ProjectionSpec::new(64, 16, 22).unwrap();
        let projected = project_and_normalize(&points, &spec).unwrap();
        let mut full = points.clone();
        normalize_rows(&mut full).unwrap();
        let (mut orig, mut proj) = (Vec::new(), Vec::new());
        for i in 0..100 {
            for j in i + 1..100 {
                orig.push(squared_euclidean(full.row(i), full.row(j)));
                proj.push(squared_euclidean(projected.row(i), projected.row(j)));
            }
        }
        // isotropic points: distance spread ~ 1/sqrt(2d) against projection noise
        // ~ sqrt(2/k) puts the expected rank correlation near 0.42 (numpy, 20 seeds: min 0.39)
        let rho = pearson(&ranks(&orig), &ranks(&proj));
        assert!(rho > 0.3, "spearman {rho}");
        let ratio: f64 = orig.iter().zip(&proj).map(|(a, b)| b / a).sum::<f64>() / orig.len() as f64;
        assert!((ratio - 1.0).abs() < 0.1, "mean distance ratio {ratio}");
    }

    #[test]
    fn identity_projection_path_matches_brute_force() {
        let data = random(15, 3, 30);
        let samples = random(120, 3, 31);
        let eps = 0.05;
        let got = assign_projected(&data, &samples, &ProjectionSpec::identity(3), eps, 4).unwrap();

        let mut fd = data.clone();
        normalize_rows(&mut fd).unwrap();
        let mut fs = samples.clone();
        normalize_rows(&mut fs).unwrap();
        let dm = pairwise_distances(&fd, &fs, Metric::Euclidean).unwrap();
        let accepted = filter_by_epsilon(&dm, eps).unwrap();
        let expected = assign_nearest(&dm, &accepted).unwrap();
        assert_eq!(got.sigma, expected.sigma);
        assert_eq!(got.accepted_count, expected.accepted_count);
    }

    #[test]
    fn reduced_projection_keeps_epsilon_guarantee() {
        let data = random(15, 8, 40);
        let samples = random(300, 8, 41);
        let spec = ProjectionSpec::new(8, 3, 42).unwrap();
        let eps = 0.3;
        let got = assign_projected(&data, &samples, &spec, eps, 5).unwrap();
        let pd = project_and_normalize(&data, &spec).unwrap();
        let ps = project_and_normalize(&samples, &spec).unwrap();
        for &j in &got.sigma {
            for i in 0..15 {
                assert!(squared_euclidean(pd.row(i), ps.row(j)).sqrt() >= eps);
            }
        }
    }
}
