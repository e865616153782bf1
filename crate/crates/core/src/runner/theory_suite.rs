//! Minimum-of-m distance laws for a noncentral chi-squared base distance,
//! with Monte Carlo overlays, KS checks and gap tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::theory::{
    ks_critical_value, min_cdf_transform, min_pdf_transform, misalignment_gap,
    monte_carlo_min_distance, NoncentralChiSquared, ScalarDistribution,
};

use super::svg::{palette, Figure, Marker};
use super::write_file;

#[derive(Debug, Clone, PartialEq)]
pub struct TheorySuiteConfig {
    pub dof: u32,
    pub lambda: f64,
    pub ms: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// KS significance level.
    pub alpha: f64,
    pub grid_points: usize,
}

impl Default for TheorySuiteConfig {
    fn default() -> Self {
        Self {
            dof: 3,
            lambda: 2.0,
            ms: vec![1, 2, 5, 10, 100],
            trials: 100_000,
            seed: 0,
            alpha: 0.01,
            grid_points: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsRow {
    pub m: usize,
    pub trials: usize,
    pub statistic: f64,
    pub critical: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryReport {
    pub ks: Vec<KsRow>,
    /// Largest `|F_min,1 - F|` on the grid.
    pub m1_deviation: f64,
    /// `F_min` is nondecreasing in `m` at every grid point.
    pub curves_ordered: bool,
    pub grid: Vec<f64>,
    pub paths: Vec<PathBuf>,
}

impl TheoryReport {
    pub fn all_pass(&self) -> bool {
        self.ks.iter().all(|r| r.pass)
    }
}

/// Monte Carlo seed for the `m`-minimum experiment.
pub fn trial_seed(seed: u64, m: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(m as u64)
}

/// KS statistics of simulated minima against `1 - (1 - F)^m`, without writing anything.
pub fn ks_rows(cfg: &TheorySuiteConfig) -> Result<Vec<KsRow>> {
    let base = NoncentralChiSquared::new(cfg.dof, cfg.lambda)?;
    let dist = ScalarDistribution::NoncentralChiSquared(base);
    cfg.ms
        .iter()
        .map(|&m| {
            let emp = monte_carlo_min_distance(&dist, m, cfg.trials, trial_seed(cfg.seed, m))?;
            let statistic = emp.ks_statistic(|t| 1.0 - (1.0 - base.cdf(t)).powi(m as i32));
            let critical = ks_critical_value(cfg.trials, cfg.alpha);
            Ok(KsRow {
                m,
                trials: cfg.trials,
                statistic,
                critical,
                pass: statistic <= critical,
            })
        })
        .collect()
}

/// Writes `curves.csv`, `gap.csv`, `mc_overlay.csv`, `ks.csv` and three SVG
/// panels into `out_dir`.
pub fn run_theory_suite(out_dir: &Path, cfg: &TheorySuiteConfig) -> Result<TheoryReport> {
    std::fs::create_dir_all(out_dir)?;
    let base = NoncentralChiSquared::new(cfg.dof, cfg.lambda)?;
    let dist = ScalarDistribution::NoncentralChiSquared(base);
    let upper = base.quantile(0.999);
    let n = cfg.grid_points.max(2);
    let grid: Vec<f64> = (0..n).map(|i| upper * i as f64 / (n - 1) as f64).collect();
    let cdf = |t: f64| base.cdf(t);
    let pdf = |t: f64| base.pdf(t);

    let mut curves = String::from("t,m,base_cdf,base_pdf,min_cdf,min_pdf\n");
    let mut gap = String::from("t,m,base_cdf,min_cdf,gap\n");
    let mut min_cdfs: Vec<Vec<f64>> = Vec::new();
    let mut min_pdfs: Vec<Vec<f64>> = Vec::new();
    for &m in &cfg.ms {
        let fm: Vec<f64> = grid.iter().map(|&t| min_cdf_transform(cdf, m, t)).collect::<Result<_>>()?;
        let pm: Vec<f64> = grid
            .iter()
            .map(|&t| min_pdf_transform(pdf, cdf, m, t))
            .collect::<Result<_>>()?;
        let g = misalignment_gap(cdf, m, &grid)?;
        for (k, &t) in grid.iter().enumerate() {
            let _ = writeln!(curves, "{t:?},{m},{:?},{:?},{:?},{:?}", cdf(t), pdf(t), fm[k], pm[k]);
            let _ = writeln!(gap, "{t:?},{m},{:?},{:?},{:?}", cdf(t), fm[k], g[k]);
        }
        min_cdfs.push(fm);
        min_pdfs.push(pm);
    }

    let m1_deviation = cfg
        .ms
        .iter()
        .position(|&m| m == 1)
        .map(|k| {
            grid.iter()
                .zip(&min_cdfs[k])
                .map(|(&t, &f)| (f - cdf(t)).abs())
                .fold(0.0, f64::max)
        })
        .unwrap_or(0.0);
    let mut order: Vec<usize> = (0..cfg.ms.len()).collect();
    order.sort_by_key(|&k| cfg.ms[k]);
    let curves_ordered = order
        .windows(2)
        .all(|w| (0..grid.len()).all(|i| min_cdfs[w[0]][i] <= min_cdfs[w[1]][i]));

    let mut ks = Vec::with_capacity(cfg.ms.len());
    let mut overlay = String::from("m,t,empirical_cdf,min_cdf\n");
    let mut overlay_pts: Vec<Vec<(f64, f64)>> = Vec::new();
    for (k, &m) in cfg.ms.iter().enumerate() {
        let emp = monte_carlo_min_distance(&dist, m, cfg.trials, trial_seed(cfg.seed, m))?;
        let statistic = emp.ks_statistic(|t| 1.0 - (1.0 - cdf(t)).powi(m as i32));
        let critical = ks_critical_value(cfg.trials, cfg.alpha);
        ks.push(KsRow {
            m,
            trials: cfg.trials,
            statistic,
            critical,
            pass: statistic <= critical,
        });
        let mut pts = Vec::new();
        for (i, &t) in grid.iter().enumerate().step_by(5) {
            let e = emp.eval(t);
            let _ = writeln!(overlay, "{m},{t:?},{e:?},{:?}", min_cdfs[k][i]);
            pts.push((t, e));
        }
        overlay_pts.push(pts);
    }
    let mut ks_text = String::from("m,trials,ks,critical,pass\n");
    for r in &ks {
        let _ = writeln!(ks_text, "{},{},{:?},{:?},{}", r.m, r.trials, r.statistic, r.critical, r.pass);
    }

    let mut pdf_fig = Figure::new("density of the minimum distance").labels("t", "density");
    pdf_fig.line(grid.iter().map(|&t| (t, pdf(t))).collect(), "black", true);
    pdf_fig.legend(Marker::Circle, "black", "base density (dashed)");
    // the m = 100 density towers over the rest; clip at the tallest m <= 10 peak
    let cap = cfg
        .ms
        .iter()
        .zip(&min_pdfs)
        .filter(|(&m, _)| m <= 10)
        .flat_map(|(_, p)| p.iter().copied())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
        .max(1e-12)
        * 1.1;
    for (k, &m) in cfg.ms.iter().enumerate() {
        let pts = grid.iter().zip(&min_pdfs[k]).map(|(&t, &p)| (t, p.min(cap))).collect();
        pdf_fig.line(pts, palette(k), false);
        pdf_fig.legend(Marker::Circle, palette(k), &format!("m = {m}"));
    }

    let mut cdf_fig = Figure::new("CDF of the minimum distance").labels("t", "F_min(t)");
    for (k, &m) in cfg.ms.iter().enumerate() {
        cdf_fig.line(grid.iter().copied().zip(min_cdfs[k].iter().copied()).collect(), palette(k), false);
        for &(t, e) in &overlay_pts[k] {
            cdf_fig.point(t, e, Marker::Circle, palette(k), 2.0);
        }
        cdf_fig.legend(Marker::Circle, palette(k), &format!("m = {m} (dots: simulated)"));
    }

    let mut vs_fig = Figure::new("minimum CDF against base CDF").labels("F(t)", "F_min(t)");
    vs_fig.line(vec![(0.0, 0.0), (1.0, 1.0)], "black", true);
    for (k, &m) in cfg.ms.iter().enumerate() {
        let pts = grid.iter().zip(&min_cdfs[k]).map(|(&t, &f)| (cdf(t), f)).collect();
        vs_fig.line(pts, palette(k), false);
        vs_fig.legend(Marker::Circle, palette(k), &format!("m = {m}"));
    }

    let files = [
        ("curves.csv", curves),
        ("gap.csv", gap),
        ("mc_overlay.csv", overlay),
        ("ks.csv", ks_text),
        ("min_pdf.svg", pdf_fig.render()),
        ("min_cdf.svg", cdf_fig.render()),
        ("min_vs_base_cdf.svg", vs_fig.render()),
    ];
    let mut paths = Vec::with_capacity(files.len());
    for (name, text) in files {
        let p = out_dir.join(name);
        write_file(&p, &text)?;
        paths.push(p);
    }
    Ok(TheoryReport {
        ks,
        m1_deviation,
        curves_ordered,
        grid,
        paths,
    })
}
