//! Point-cloud quality metrics: Fréchet distance between Gaussian fits and
//! k-NN manifold precision/recall.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{squared_euclidean, Tensor2};

/// Eigenvalues down to `-PSD_TOLERANCE` are treated as zero.
pub const PSD_TOLERANCE: f64 = 1e-10;
const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFit {
    pub mean: Vec<f64>,
    /// Row-major `d x d`.
    pub covariance: Vec<f64>,
}

impl GaussianFit {
    pub fn new(mean: Vec<f64>, covariance: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.len() != d * d {
            return Err(Error::shape("GaussianFit::new", d * d, covariance.len()));
        }
        for i in 0..d {
            for j in 0..i {
                let (a, b) = (covariance[i * d + j], covariance[j * d + i]);
                if (a - b).abs() > SYMMETRY_TOLERANCE * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::Config(format!(
                        "covariance is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        let fit = Self { mean, covariance };
        fit.eigen()?;
        Ok(fit)
    }

    /// Sample mean and unbiased sample covariance of the rows.
    pub fn from_points(points: &Tensor2) -> Result<Self> {
        let (n, d) = points.shape();
        if n < 2 {
            return Err(Error::TooFewPoints { needed: 1, found: n });
        }
        let mut mean = vec![0.0; d];
        for row in points.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut cov = vec![0.0; d * d];
        for row in points.iter_rows() {
            for i in 0..d {
                let di = row[i] - mean[i];
                for j in 0..=i {
                    cov[i * d + j] += di * (row[j] - mean[j]);
                }
            }
        }
        for i in 0..d {
            for j in 0..=i {
                let v = cov[i * d + j] / (n - 1) as f64;
                cov[i * d + j] = v;
                cov[j * d + i] = v;
            }
        }
        Self::new(mean, cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim(), self.dim(), &self.covariance)
    }

    fn eigen(&self) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
        psd_eigen(self.matrix())
    }

    fn total_order(&self, other: &Self) -> Ordering {
        let a = self.mean.iter().chain(&self.covariance);
        let b = other.mean.iter().chain(&other.covariance);
        for (x, y) in a.zip(b) {
            match x.total_cmp(y) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }
}

fn psd_eigen(m: DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let mut eig = SymmetricEigen::new(m);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -PSD_TOLERANCE {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    eig.eigenvalues.iter_mut().for_each(|v| *v = v.max(0.0));
    Ok(eig)
}

fn psd_sqrt(eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> DMatrix<f64> {
    let root = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|v| v.sqrt()));
    &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose()
}

/// `|mu1 - mu2|^2 + Tr(C1 + C2 - 2 (C1 C2)^(1/2))`, with the trace of the
/// square root taken through `C1^(1/2) C2 C1^(1/2)`.
pub fn frechet_distance(a: &GaussianFit, b: &GaussianFit) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::shape("frechet_distance", a.dim(), b.dim()));
    }
    if a == b {
        return Ok(0.0);
    }
    // A fixed argument order makes the result exactly symmetric.
    let (a, b) = if a.total_order(b) == Ordering::Greater { (b, a) } else { (a, b) };

    let mean_term: f64 = a.mean.iter().zip(&b.mean).map(|(x, y)| (x - y) * (x - y)).sum();
    let c1 = a.matrix();
    let c2 = b.matrix();
    let root1 = psd_sqrt(&a.eigen()?);
    let mut inner = &root1 * &c2 * &root1;
    inner = (&inner + inner.transpose()) * 0.5;
    let cross: f64 = psd_eigen(inner)?.eigenvalues.iter().map(|v| v.sqrt()).sum();
    Ok((mean_term + c1.trace() + c2.trace() - 2.0 * cross).max(0.0))
}

/// Union of balls around `points`, each with radius equal to the distance to
/// its k-th nearest other point.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldEstimate {
    pub points: Tensor2,
    pub radii: Vec<f64>,
    pub k: usize,
}

impl ManifoldEstimate {
    pub fn new(points: &Tensor2, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        let n = points.rows();
        if n <= k {
            return Err(Error::TooFewPoints { needed: k, found: n });
        }
        let radii = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut d: Vec<f64> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| squared_euclidean(points.row(i), points.row(j)))
                    .collect();
                let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
                kth.sqrt()
            })
            .collect();
        Ok(Self {
            points: points.clone(),
            radii,
            k,
        })
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        self.points
            .iter_rows()
            .zip(&self.radii)
            .any(|(p, &r)| squared_euclidean(q, p).sqrt() <= r)
    }

    /// Fraction of rows of `queries` inside the manifold.
    pub fn coverage(&self, queries: &Tensor2) -> f64 {
        if queries.rows() == 0 {
            return 0.0;
        }
        let inside = (0..queries.rows())
            .into_par_iter()
            .filter(|&i| self.contains(queries.row(i)))
            .count();
        inside as f64 / queries.rows() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
}

/// Precision: share of `fake` inside the k-NN manifold of `real`.
/// Recall: share of `real` inside the k-NN manifold of `fake`.
pub fn precision_recall(real: &Tensor2, fake: &Tensor2, k: usize) -> Result<PrecisionRecall> {
    if real.cols() != fake.cols() {
        return Err(Error::shape("precision_recall", real.cols(), fake.cols()));
    }
    let real_manifold = ManifoldEstimate::new(real, k)?;
    let fake_manifold = ManifoldEstimate::new(fake, k)?;
    Ok(PrecisionRecall {
        precision: real_manifold.coverage(fake),
        recall: fake_manifold.coverage(real),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fit1(mean: f64, var: f64) -> GaussianFit {
        GaussianFit::new(vec![mean], vec![var]).unwrap()
    }

    fn random_psd(rng: &mut ChaCha8Rng) -> Vec<f64> {
        let a: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        // A A^T + 0.1 I
        vec![
            a[0] * a[0] + a[1] * a[1] + 0.1,
            a[0] * a[2] + a[1] * a[3],
            a[0] * a[2] + a[1] * a[3],
            a[2] * a[2] + a[3] * a[3] + 0.1,
        ]
    }

    /// Tr((C1 C2)^(1/2)) for 2x2 PSD matrices: the eigenvalues of C1 C2 are
    /// real and nonnegative, so the trace of the root is
    /// `sqrt(l1) + sqrt(l2) = sqrt(tr + 2 sqrt(det))`.
    fn oracle_2d(m1: &[f64], c1: &[f64], m2: &[f64], c2: &[f64]) -> f64 {
        let p = [
            c1[0] * c2[0] + c1[1] * c2[2],
            c1[0] * c2[1] + c1[1] * c2[3],
            c1[2] * c2[0] + c1[3] * c2[2],
            c1[2] * c2[1] + c1[3] * c2[3],
        ];
        let tr = p[0] + p[3];
        let det = p[0] * p[3] - p[1] * p[2];
        let root_trace = (tr + 2.0 * det.max(0.0).sqrt()).sqrt();
        let dm = (m1[0] - m2[0]).powi(2) + (m1[1] - m2[1]).powi(2);
        dm + c1[0] + c1[3] + c2[0] + c2[3] - 2.0 * root_trace
    }

    #[test]
    fn frechet_trivial_cases() {
        let a = fit1(0.0, 1.0);
        assert_eq!(frechet_distance(&a, &a).unwrap(), 0.0);
        let d = frechet_distance(&a, &fit1(1.0, 1.0)).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        // (sigma1 - sigma2)^2 in 1D
        let d = frechet_distance(&fit1(0.0, 4.0), &fit1(0.0, 1.0)).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frechet_matches_closed_form_2d() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..25 {
            let m1 = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let m2 = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let c1 = random_psd(&mut rng);
            let c2 = random_psd(&mut rng);
            let a = GaussianFit::new(m1.clone(), c1.clone()).unwrap();
            let b = GaussianFit::new(m2.clone(), c2.clone()).unwrap();
            let got = frechet_distance(&a, &b).unwrap();
            assert!((got - oracle_2d(&m1, &c1, &m2, &c2)).abs() < 1e-8);
            assert_eq!(got, frechet_distance(&b, &a).unwrap());
        }
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        assert!(matches!(
            GaussianFit::new(vec![0.0, 0.0], vec![1.0, 2.0, 2.0, 1.0]),
            Err(Error::NotPsd { .. })
        ));
        assert!(GaussianFit::new(vec![0.0, 0.0], vec![1.0, 0.5, 0.0, 1.0]).is_err());
        // a rank-deficient covariance is fine
        assert!(GaussianFit::new(vec![0.0, 0.0], vec![1.0, 1.0, 1.0, 1.0]).is_ok());
    }

    #[test]
    fn fit_from_points() {
        let p = Tensor2::from_rows(&[[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]]).unwrap();
        let f = GaussianFit::from_points(&p).unwrap();
        assert_eq!(f.mean, vec![1.0, 1.0]);
        assert_eq!(f.covariance, vec![4.0 / 3.0, 0.0, 0.0, 4.0 / 3.0]);
    }

    #[test]
    fn manifold_radius_excludes_self() {
        let p = Tensor2::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        let m = ManifoldEstimate::new(&p, 1).unwrap();
        assert_eq!(m.radii, vec![1.0, 1.0, 2.0]);
        let m2 = ManifoldEstimate::new(&p, 2).unwrap();
        assert_eq!(m2.radii, vec![3.0, 2.0, 3.0]);
        assert!(ManifoldEstimate::new(&p, 3).is_err());
    }

    #[test]
    fn identical_sets_are_perfect() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = Tensor2::from_vec(30, 2, (0..60).map(|_| rng.random::<f64>()).collect()).unwrap();
        let pr = precision_recall(&p, &p, 3).unwrap();
        assert_eq!((pr.precision, pr.recall), (1.0, 1.0));
    }

    #[test]
    fn degenerate_sets_have_zero_radius() {
        let same = Tensor2::from_rows(&[[1.0, 1.0]; 5]).unwrap();
        let m = ManifoldEstimate::new(&same, 3).unwrap();
        assert!(m.radii.iter().all(|&r| r == 0.0));
        assert!(m.contains(&[1.0, 1.0]));
        assert!(!m.contains(&[1.0, 1.0 + 1e-12]));
    }

    #[test]
    fn far_fakes_have_zero_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let real = Tensor2::from_vec(20, 2, (0..40).map(|_| rng.random::<f64>()).collect()).unwrap();
        let fake = real.map(|v| v + 100.0);
        let pr = precision_recall(&real, &fake, 3).unwrap();
        assert_eq!(pr.precision, 0.0);
        assert_eq!(pr.recall, 0.0);
    }
}
