//! Order statistics of nearest-sample distances.
//!
//! If a data point sees `m` i.i.d. sample distances with CDF `F`, the distance
//! to the closest one has CDF `1 - (1 - F)^m` and density
//! `m (1 - F)^(m-1) f`. This module evaluates those transforms, checks them by
//! Monte Carlo, and provides the density-ratio `phi` that relates the
//! rejection-sampled prior to the Gaussian one, along with the right-tail
//! truncation that keeps that ratio bounded.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};

/// Sorted sample with step-function CDF `#{x <= t} / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFinite("EmpiricalCdf::new"));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn eval(&self, t: f64) -> f64 {
        let count = self.sorted.partition_point(|&x| x <= t);
        count as f64 / self.sorted.len() as f64
    }

    /// Smallest sample `x` with `eval(x) >= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let idx = ((p.clamp(0.0, 1.0) * n as f64).ceil() as usize).clamp(1, n) - 1;
        self.sorted[idx]
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }

    /// Two-sided Kolmogorov-Smirnov statistic `sup_t |F_n(t) - cdf(t)|`.
    pub fn ks_statistic(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let n = self.sorted.len() as f64;
        let mut d: f64 = 0.0;
        let mut i = 0;
        while i < self.sorted.len() {
            // step over ties so the jump is evaluated once
            let x = self.sorted[i];
            let mut j = i;
            while j + 1 < self.sorted.len() && self.sorted[j + 1] == x {
                j += 1;
            }
            let f = cdf(x);
            d = d.max((f - i as f64 / n).abs()).max(((j + 1) as f64 / n - f).abs());
            i = j + 1;
        }
        d
    }
}

/// Asymptotic two-sided Kolmogorov critical value `sqrt(-ln(alpha/2)/2) / sqrt(n)`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Noncentral chi-squared with `dof` degrees of freedom and noncentrality `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoncentralChiSquared {
    dof: u32,
    lambda: f64,
}

/// Poisson weights are summed until the missing mass drops below this.
const SERIES_TAIL: f64 = 1e-16;
const SERIES_MAX_TERMS: usize = 10_000;

impl NoncentralChiSquared {
    pub fn new(dof: u32, lambda: f64) -> Result<Self> {
        if dof == 0 || !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!(
                "noncentral chi-squared needs dof >= 1 and finite lambda >= 0, got ({dof}, {lambda})"
            )));
        }
        Ok(Self { dof, lambda })
    }

    pub fn dof(&self) -> u32 {
        self.dof
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mean(&self) -> f64 {
        self.dof as f64 + self.lambda
    }

    /// Calls `term(weight, j)` for the Poisson(lambda/2) mixture weights and
    /// returns the weight mass that was not visited.
    fn mixture(&self, mut term: impl FnMut(f64, usize)) -> f64 {
        let half = self.lambda / 2.0;
        if half == 0.0 {
            term(1.0, 0);
            return 0.0;
        }
        // Start at the mode and walk outwards so no weight underflows before the peak.
        let mode = half.floor() as usize;
        let ln_w_mode = -half + mode as f64 * half.ln() - ln_gamma(mode as f64 + 1.0);
        let w_mode = ln_w_mode.exp();
        let mut seen = 0.0;
        term(w_mode, mode);
        seen += w_mode;
        let mut w = w_mode;
        let mut j = mode;
        while j > 0 {
            w *= j as f64 / half;
            j -= 1;
            term(w, j);
            seen += w;
            if w < SERIES_TAIL * 1e-3 {
                break;
            }
        }
        let mut w = w_mode;
        let mut j = mode;
        while 1.0 - seen > SERIES_TAIL && j < mode + SERIES_MAX_TERMS {
            j += 1;
            w *= half / j as f64;
            term(w, j);
            seen += w;
        }
        (1.0 - seen).max(0.0)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x == f64::INFINITY {
            return 1.0;
        }
        let k2 = self.dof as f64 / 2.0;
        let mut acc = 0.0;
        self.mixture(|w, j| acc += w * gamma_lr(k2 + j as f64, x / 2.0));
        acc.clamp(0.0, 1.0)
    }

    /// `1 - cdf(x)`, accurate in the right tail.
    pub fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        if x == f64::INFINITY {
            return 0.0;
        }
        let k2 = self.dof as f64 / 2.0;
        let mut acc = 0.0;
        let missing = self.mixture(|w, j| acc += w * gamma_ur(k2 + j as f64, x / 2.0));
        (acc + missing).clamp(0.0, 1.0)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 || x == f64::INFINITY {
            return 0.0;
        }
        let mut acc = 0.0;
        self.mixture(|w, j| acc += w * central_chi_squared_pdf(self.dof as f64 + 2.0 * j as f64, x));
        acc
    }

    /// Inverse CDF by bisection; `p` in `[0, 1)`.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        let tail = 1.0 - p;
        let mut hi = self.mean().max(1.0);
        while self.sf(hi) > tail {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.sf(mid) > tail {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Direct simulation: `|z + mu|^2` with `z ~ N(0, I_dof)` and `|mu|^2 = lambda`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let shift = self.lambda.sqrt();
        let mut acc = 0.0;
        for c in 0..self.dof {
            let z: f64 = rng.sample(StandardNormal);
            let v = if c == 0 { z + shift } else { z };
            acc += v * v;
        }
        acc
    }
}

fn central_chi_squared_pdf(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        return if nu < 2.0 {
            f64::INFINITY
        } else if nu == 2.0 {
            0.5
        } else {
            0.0
        };
    }
    let h = nu / 2.0;
    ((h - 1.0) * x.ln() - x / 2.0 - h * std::f64::consts::LN_2 - ln_gamma(h)).exp()
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A distribution on `[0, inf)` given by closures; sampled by inverting the CDF
/// by bisection on `[0, upper]`.
#[derive(Clone)]
pub struct CustomDistribution {
    pub cdf: ScalarFn,
    pub pdf: Option<ScalarFn>,
    pub upper: f64,
}

impl std::fmt::Debug for CustomDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CustomDistribution")
            .field("upper", &self.upper)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum ScalarDistribution {
    NoncentralChiSquared(NoncentralChiSquared),
    Empirical(EmpiricalCdf),
    Custom(CustomDistribution),
}

impl ScalarDistribution {
    pub fn point_mass(c: f64) -> Self {
        ScalarDistribution::Empirical(EmpiricalCdf { sorted: vec![c] })
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            ScalarDistribution::NoncentralChiSquared(d) => d.cdf(t),
            ScalarDistribution::Empirical(e) => e.eval(t),
            ScalarDistribution::Custom(c) => {
                if t < 0.0 {
                    0.0
                } else {
                    (c.cdf)(t)
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ScalarDistribution::NoncentralChiSquared(d) => d.sample(rng),
            ScalarDistribution::Empirical(e) => e.sorted[rng.random_range(0..e.sorted.len())],
            ScalarDistribution::Custom(c) => {
                let u: f64 = rng.random();
                let (mut lo, mut hi) = (0.0, c.upper);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if (c.cdf)(mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }
}

fn check_probability(t: f64, value: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidProbability { t, value });
    }
    Ok(value)
}

fn check_count(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::Config(format!("{name} must be >= 1")));
    }
    Ok(())
}

/// CDF of the minimum of `m` i.i.d. draws: `1 - (1 - F(t))^m`.
pub fn min_cdf_transform(cdf: impl Fn(f64) -> f64, m: usize, t: f64) -> Result<f64> {
    check_count("m", m)?;
    let f = check_probability(t, cdf(t))?;
    if m == 1 {
        return Ok(f);
    }
    Ok(1.0 - (1.0 - f).powi(m as i32))
}

/// Density of the minimum of `m` i.i.d. draws: `m (1 - F(t))^(m-1) f(t)`.
pub fn min_pdf_transform(
    pdf: impl Fn(f64) -> f64,
    cdf: impl Fn(f64) -> f64,
    m: usize,
    t: f64,
) -> Result<f64> {
    check_count("m", m)?;
    let f = check_probability(t, cdf(t))?;
    if m > 1 && f == 1.0 {
        return Ok(0.0);
    }
    Ok(m as f64 * (1.0 - f).powi(m as i32 - 1) * pdf(t))
}

const SHARD_TRIALS: usize = 4096;

/// Empirical CDF of `min` over `m` draws from `dist`, repeated `trials` times.
///
/// Trials are split into fixed-size shards with seeds derived from `seed`, so
/// the result does not depend on the thread count.
pub fn monte_carlo_min_distance(
    dist: &ScalarDistribution,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<EmpiricalCdf> {
    check_count("m", m)?;
    check_count("trials", trials)?;
    let shards = trials.div_ceil(SHARD_TRIALS);
    let minima: Vec<f64> = (0..shards)
        .into_par_iter()
        .flat_map_iter(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let count = SHARD_TRIALS.min(trials - s * SHARD_TRIALS);
            (0..count)
                .map(|_| {
                    (0..m)
                        .map(|_| dist.sample(&mut rng))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    EmpiricalCdf::new(minima)
}

/// Density ratio between the rejection-sampled distance law and the Gaussian one:
/// `phi(t) = (n/m) (1 - F(t))^(n-1) / (1 - F~(t))^(m-1)`.
pub fn phi_ratio(
    cdf: impl Fn(f64) -> f64,
    cdf_tilde: impl Fn(f64) -> f64,
    n: usize,
    m: usize,
    t: f64,
) -> Result<f64> {
    check_count("n", n)?;
    check_count("m", m)?;
    let f = check_probability(t, cdf(t))?;
    let ft = check_probability(t, cdf_tilde(t))?;
    if ft == 1.0 && m > 1 {
        return Err(Error::UnboundedRatio { t });
    }
    Ok(n as f64 / m as f64 * (1.0 - f).powi(n as i32 - 1) / (1.0 - ft).powi(m as i32 - 1))
}

/// The sample-distance CDF whose `m`-minimum matches the `n`-minimum of `F`:
/// solving `(1 - F~)^m = (1 - F)^n` gives `F~ = 1 - (1 - F)^(n/m)`.
pub fn matched_target_cdf(cdf: impl Fn(f64) -> f64, n: usize, m: usize, t: f64) -> Result<f64> {
    check_count("n", n)?;
    check_count("m", m)?;
    let f = check_probability(t, cdf(t))?;
    Ok(1.0 - (1.0 - f).powf(n as f64 / m as f64))
}

/// Right-truncated density renormalized on `[0, T]`: `f(t) / F(T)` for `t <= T`, else 0.
pub fn truncated_pdf(
    pdf: impl Fn(f64) -> f64,
    cdf: impl Fn(f64) -> f64,
    truncation: f64,
    t: f64,
) -> Result<f64> {
    if !(truncation > 0.0) {
        return Err(Error::Config(format!("truncation point must be > 0, got {truncation}")));
    }
    let mass = check_probability(truncation, cdf(truncation))?;
    if mass == 0.0 {
        return Err(Error::ZeroTruncationMass);
    }
    if t > truncation {
        return Ok(0.0);
    }
    Ok(pdf(t) / mass)
}

/// `F_min(t) - F(t)` on each grid point, where `F_min` is the `m`-minimum CDF.
pub fn misalignment_gap(cdf: impl Fn(f64) -> f64, m: usize, grid: &[f64]) -> Result<Vec<f64>> {
    grid.iter()
        .map(|&t| {
            let f = check_probability(t, cdf(t))?;
            Ok(min_cdf_transform(|_| f, m, t)? - f)
        })
        .collect()
}
