//! Experiment orchestration: paired-seed training runs, epsilon sweeps,
//! re-evaluation and plotting of saved runs, and the order-statistics suite.
//!
//! Every seed of a run shares the dataset; the seed itself initialises the
//! generator and drives training, so an IMLE and an RS-IMLE run with the same
//! seed differ only in the objective.

pub mod config;
pub mod svg;
pub mod theory_suite;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::datasets::{self, diameter, save_csv};
use crate::error::{Error, Result};
use crate::metrics::{frechet_distance, precision_recall, GaussianFit};
use crate::net::GeneratorNet;
use crate::tensor::Tensor2;
use crate::trainer::{evaluate_test_time, Objective, TestTimeEval, TrainRecord, Trainer};

pub use config::{EpsilonUnits, ExperimentConfig, MetricsConfig, ModelConfig};
pub use theory_suite::{run_theory_suite, KsRow, TheoryReport, TheorySuiteConfig};

use svg::{palette, Figure, Marker, Viewport};

/// Mixed into a run seed to get the test-time latent seed.
pub const EVAL_STREAM: u64 = 0x7e57_7153_a11c_e5ed;

pub fn eval_seed(seed: u64) -> u64 {
    seed ^ EVAL_STREAM
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalMetrics {
    pub frechet: f64,
    pub precision: f64,
    pub recall: f64,
    pub mean_sample_to_data: f64,
    pub mean_data_to_sample: f64,
}

pub fn final_metrics(data: &Tensor2, eval: &TestTimeEval, k: usize) -> Result<FinalMetrics> {
    let frechet = frechet_distance(&GaussianFit::from_points(data)?, &GaussianFit::from_points(&eval.samples)?)?;
    let pr = precision_recall(data, &eval.samples, k)?;
    Ok(FinalMetrics {
        frechet,
        precision: pr.precision,
        recall: pr.recall,
        mean_sample_to_data: eval.mean_sample_to_data(),
        mean_data_to_sample: eval.mean_data_to_sample(),
    })
}

/// Everything one training run produced, before anything is written.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub objective: Objective,
    /// Absolute rejection radius used for training.
    pub epsilon: f64,
    pub records: Vec<TrainRecord>,
    pub net: GeneratorNet,
    pub eval: TestTimeEval,
    pub metrics: FinalMetrics,
}

/// Trains one generator on `data` and evaluates it at test time.
///
/// RS-IMLE with `epsilon = 0` is allowed here; it runs the IMLE trajectory.
pub fn train_seed(
    cfg: &ExperimentConfig,
    data: &Tensor2,
    seed: u64,
    objective: Objective,
    epsilon: f64,
) -> Result<SeedOutcome> {
    let dims = cfg.model.layer_dims(data.cols());
    let net = GeneratorNet::new(&dims, cfg.model.activation, seed)?;
    let mut tc = cfg.trainer.clone();
    tc.seed = seed;
    tc.objective = objective;
    tc.epsilon = epsilon;
    tc.filter_space = cfg.filter_space(data.cols())?;
    tc.record_latents = true;
    let mut trainer = Trainer::new_allowing_zero_epsilon(net, tc)?;
    let log_every = cfg.log_every;
    let records = trainer.run(data, |r| {
        if log_every > 0 && (r.epoch + 1) % log_every == 0 {
            eprintln!(
                "[{objective} seed {seed}] epoch {} loss {:.6} min dist {:.4}{}",
                r.epoch + 1,
                r.mean_loss,
                r.min_dist(),
                r.acceptance_rate.map(|a| format!(" accept {a:.4}")).unwrap_or_default()
            );
        }
    })?;
    let net = trainer.into_net();
    let eval = evaluate_test_time(&net, data, cfg.metrics.eval_samples, eval_seed(seed))?;
    let metrics = final_metrics(data, &eval, cfg.metrics.pr_k)?;
    Ok(SeedOutcome {
        seed,
        objective,
        epsilon,
        records,
        net,
        eval,
        metrics,
    })
}

/// Loads or generates the configured dataset.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Tensor2> {
    datasets::generate(&cfg.dataset)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub seed: u64,
    pub objective: Objective,
    pub epsilon: f64,
    pub metrics: FinalMetrics,
    pub final_acceptance_rate: Option<f64>,
    pub epochs_csv: PathBuf,
    pub samples_csv: PathBuf,
    pub selected_csv: PathBuf,
    pub net_json: PathBuf,
    pub scatter_svg: PathBuf,
    pub latents_svg: PathBuf,
}

impl SeedSummary {
    pub fn paths(&self) -> [&Path; 6] {
        [
            &self.epochs_csv,
            &self.samples_csv,
            &self.selected_csv,
            &self.net_json,
            &self.scatter_svg,
            &self.latents_svg,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub config_txt: PathBuf,
    pub data_csv: PathBuf,
    pub metrics_csv: PathBuf,
    /// Sorted by seed.
    pub seeds: Vec<SeedSummary>,
}

impl RunSummary {
    pub fn paths(&self) -> Vec<&Path> {
        let mut v: Vec<&Path> = vec![&self.config_txt, &self.data_csv, &self.metrics_csv];
        for s in &self.seeds {
            v.extend(s.paths());
        }
        v
    }
}

pub const METRICS_HEADER: &str =
    "seed,objective,epsilon,frechet,precision,recall,mean_sample_to_data,mean_data_to_sample";

fn metrics_row(seed: u64, objective: Objective, epsilon: f64, m: &FinalMetrics) -> String {
    format!(
        "{seed},{objective},{epsilon:?},{:?},{:?},{:?},{:?},{:?}",
        m.frechet, m.precision, m.recall, m.mean_sample_to_data, m.mean_data_to_sample
    )
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn sorted_seeds(seeds: &[u64]) -> Vec<u64> {
    let mut s = seeds.to_vec();
    s.sort_unstable();
    s.dedup();
    s
}

/// Trains every configured seed with the configured objective and writes the
/// artifacts under `cfg.out_dir`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let data = load_dataset(cfg)?;
    let epsilon = cfg.resolve_epsilon(cfg.trainer.effective_epsilon(), diameter(&data));
    let seeds = sorted_seeds(&cfg.seeds);
    let outcomes: Vec<SeedOutcome> = seeds
        .par_iter()
        .map(|&s| train_seed(cfg, &data, s, cfg.trainer.objective, epsilon))
        .collect::<Result<_>>()?;
    write_run(cfg, &cfg.out_dir, &data, &outcomes)
}

/// Writes the artifacts of already-trained seeds into `dir`.
pub fn write_run(
    cfg: &ExperimentConfig,
    dir: &Path,
    data: &Tensor2,
    outcomes: &[SeedOutcome],
) -> Result<RunSummary> {
    std::fs::create_dir_all(dir)?;
    let config_txt = dir.join("config.txt");
    write_file(&config_txt, &cfg.to_text())?;
    let data_csv = dir.join("data.csv");
    save_csv(data, &data_csv)?;

    let mut seeds = Vec::with_capacity(outcomes.len());
    let mut metrics = String::from(METRICS_HEADER);
    metrics.push('\n');
    for o in outcomes {
        let _ = writeln!(metrics, "{}", metrics_row(o.seed, o.objective, o.epsilon, &o.metrics));
        seeds.push(write_seed(dir, data, o)?);
    }
    let metrics_csv = dir.join("metrics.csv");
    write_file(&metrics_csv, &metrics)?;
    Ok(RunSummary {
        out_dir: dir.to_path_buf(),
        config_txt,
        data_csv,
        metrics_csv,
        seeds,
    })
}

pub const EPOCHS_HEADER: &str =
    "epoch,mean_loss,min_dist,max_dist,mean_dist,acceptance_rate,proposals,pool_size";

pub fn epochs_csv(records: &[TrainRecord]) -> String {
    let mut s = String::from(EPOCHS_HEADER);
    s.push('\n');
    for r in records {
        let rate = r.acceptance_rate.map(|a| format!("{a:?}")).unwrap_or_default();
        if r.is_skipped() {
            let _ = writeln!(s, "{},,,,,{rate},{},{}", r.epoch, r.proposals, r.pool_size);
            continue;
        }
        let mean = r.dist.iter().sum::<f64>() / r.dist.len() as f64;
        let _ = writeln!(
            s,
            "{},{:?},{:?},{:?},{:?},{rate},{},{}",
            r.epoch,
            r.mean_loss,
            r.min_dist(),
            r.max_dist(),
            mean,
            r.proposals,
            r.pool_size
        );
    }
    s
}

fn header(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|c| format!("{prefix}{c}")).collect()
}

fn cells(v: &[f64]) -> impl Iterator<Item = String> + '_ {
    v.iter().map(|x| format!("{x:?}"))
}

fn write_seed(dir: &Path, data: &Tensor2, o: &SeedOutcome) -> Result<SeedSummary> {
    let s = o.seed;
    let epochs = dir.join(format!("epochs_seed{s}.csv"));
    write_file(&epochs, &epochs_csv(&o.records))?;

    let l = o.eval.latents.cols();
    let d = o.eval.samples.cols();
    let mut text = header("z", l);
    text.extend(header("x", d));
    text.push("nearest_data_dist".into());
    let mut samples = text.join(",") + "\n";
    for j in 0..o.eval.samples.rows() {
        let row: Vec<String> = cells(o.eval.latents.row(j))
            .chain(cells(o.eval.samples.row(j)))
            .chain(std::iter::once(format!("{:?}", o.eval.sample_to_data[j])))
            .collect();
        samples += &row.join(",");
        samples.push('\n');
    }
    let samples_csv = dir.join(format!("samples_seed{s}.csv"));
    write_file(&samples_csv, &samples)?;

    let selection = final_selection(o)?;
    let mut head = vec!["data_index".to_string(), "dist".to_string()];
    head.extend(header("z", l));
    head.extend(header("x", d));
    let mut selected = head.join(",") + "\n";
    for (i, (dist, z, x)) in selection.iter().enumerate() {
        let row: Vec<String> = [i.to_string(), format!("{dist:?}")]
            .into_iter()
            .chain(cells(z))
            .chain(cells(x))
            .collect();
        selected += &row.join(",");
        selected.push('\n');
    }
    let selected_csv = dir.join(format!("selected_seed{s}.csv"));
    write_file(&selected_csv, &selected)?;

    let net_json = dir.join(format!("net_seed{s}.json"));
    write_file(&net_json, &serde_json::to_string(&o.net)?)?;

    let plots = SeedPlots {
        data: data.iter_rows().map(|r| r.to_vec()).collect(),
        samples: (0..o.eval.samples.rows()).map(|j| (o.eval.latents.row(j).to_vec(), o.eval.samples.row(j).to_vec())).collect(),
        selected: selection.into_iter().map(|(_, z, x)| (z, x)).collect(),
    };
    let tag = format!("{} seed {s}", o.objective);
    let scatter_svg = dir.join(format!("scatter_seed{s}.svg"));
    write_file(&scatter_svg, &plots.scatter(&tag))?;
    let latents_svg = dir.join(format!("latents_seed{s}.svg"));
    write_file(&latents_svg, &plots.latents(&tag))?;

    Ok(SeedSummary {
        seed: s,
        objective: o.objective,
        epsilon: o.epsilon,
        metrics: o.metrics,
        final_acceptance_rate: o.records.last().and_then(|r| r.acceptance_rate),
        epochs_csv: epochs,
        samples_csv,
        selected_csv,
        net_json,
        scatter_svg,
        latents_svg,
    })
}

type Selection = Vec<(f64, Vec<f64>, Vec<f64>)>;

/// `(distance, latent, sample)` per data point from the last epoch that made a
/// selection, the sample being regenerated by the trained generator.
fn final_selection(o: &SeedOutcome) -> Result<Selection> {
    let Some(last) = o.records.iter().rev().find(|r| !r.is_skipped()) else {
        return Ok(Vec::new());
    };
    let Some(z) = &last.selected_latents else {
        return Ok(Vec::new());
    };
    let x = o.net.forward(z)?;
    Ok((0..z.rows())
        .map(|i| (last.dist[i], z.row(i).to_vec(), x.row(i).to_vec()))
        .collect())
}

/// Point sets behind the two per-seed figures.
struct SeedPlots {
    data: Vec<Vec<f64>>,
    /// `(latent, sample)` at test time.
    samples: Vec<(Vec<f64>, Vec<f64>)>,
    /// `(latent, sample)` selected for each data point, in data order.
    selected: Vec<(Vec<f64>, Vec<f64>)>,
}

fn xy(p: &[f64]) -> (f64, f64) {
    (p.first().copied().unwrap_or(0.0), p.get(1).copied().unwrap_or(0.0))
}

impl SeedPlots {
    fn scatter(&self, tag: &str) -> String {
        let vp = Viewport::fit(
            self.data.iter().map(|p| xy(p)).chain(self.selected.iter().map(|(_, x)| xy(x))),
            0.25,
        );
        let mut f = Figure::new(&format!("data and samples ({tag})")).labels("x0", "x1").viewport(vp);
        for (_, x) in &self.samples {
            let (a, b) = xy(x);
            f.point(a, b, Marker::Circle, "#9a9a9a", 1.8);
        }
        for (i, (_, x)) in self.selected.iter().enumerate() {
            let (a, b) = xy(x);
            f.point(a, b, Marker::Circle, palette(i), 3.5);
        }
        for (i, p) in self.data.iter().enumerate() {
            let (a, b) = xy(p);
            f.point(a, b, Marker::Square, palette(i), 4.0);
        }
        f.legend(Marker::Square, "#333333", "data");
        f.legend(Marker::Circle, "#9a9a9a", "test-time samples");
        f.legend(Marker::Circle, palette(0), "selected samples");
        f.render()
    }

    fn latents(&self, tag: &str) -> String {
        let mut f = Figure::new(&format!("latent codes ({tag})")).labels("z0", "z1");
        for (z, _) in &self.samples {
            let (a, b) = xy(z);
            f.point(a, b, Marker::Circle, "#c4c4c4", 1.5);
        }
        for (i, (z, _)) in self.selected.iter().enumerate() {
            let (a, b) = xy(z);
            f.point(a, b, Marker::Star, palette(i), 3.0);
        }
        f.legend(Marker::Circle, "#c4c4c4", "prior draws");
        f.legend(Marker::Star, palette(0), "selected latents");
        f.render()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// In the configured units.
    pub epsilon: f64,
    pub epsilon_abs: f64,
    pub seed: u64,
    pub metrics: FinalMetrics,
    pub mean_acceptance_rate: f64,
    pub final_acceptance_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub sweep_csv: PathBuf,
    /// Sorted by seed, then epsilon.
    pub points: Vec<SweepPoint>,
    /// One run directory per epsilon, in sweep order.
    pub runs: Vec<RunSummary>,
}

pub const SWEEP_HEADER: &str = "seed,epsilon,epsilon_abs,frechet,precision,recall,mean_sample_to_data,mean_data_to_sample,mean_acceptance_rate,final_acceptance_rate";

/// RS-IMLE at every epsilon of `cfg.sweep` for every seed. Each epsilon gets its
/// own run directory `eps_<k>` under `cfg.out_dir`; `sweep.csv` aggregates them.
pub fn sweep(cfg: &ExperimentConfig) -> Result<SweepSummary> {
    cfg.validate()?;
    let grid = cfg
        .sweep
        .clone()
        .ok_or_else(|| Error::Config("sweep needs sweep.epsilons".into()))?;
    let data = load_dataset(cfg)?;
    let diam = diameter(&data);
    let seeds = sorted_seeds(&cfg.seeds);
    let jobs: Vec<(usize, u64)> = (0..grid.len())
        .flat_map(|k| seeds.iter().map(move |&s| (k, s)))
        .collect();
    let outcomes: Vec<SeedOutcome> = jobs
        .par_iter()
        .map(|&(k, s)| train_seed(cfg, &data, s, Objective::RsImle, cfg.resolve_epsilon(grid[k], diam)))
        .collect::<Result<_>>()?;

    let mut runs = Vec::with_capacity(grid.len());
    let mut points = Vec::with_capacity(jobs.len());
    for (k, &eps) in grid.iter().enumerate() {
        let mut sub = cfg.clone();
        sub.trainer.objective = Objective::RsImle;
        sub.trainer.epsilon = eps;
        sub.sweep = None;
        sub.out_dir = cfg.out_dir.join(format!("eps_{k}"));
        let mine: Vec<SeedOutcome> = jobs
            .iter()
            .zip(&outcomes)
            .filter(|((jk, _), _)| *jk == k)
            .map(|(_, o)| o.clone())
            .collect();
        for o in &mine {
            let rates: Vec<f64> = o.records.iter().filter_map(|r| r.acceptance_rate).collect();
            points.push(SweepPoint {
                epsilon: eps,
                epsilon_abs: o.epsilon,
                seed: o.seed,
                metrics: o.metrics,
                mean_acceptance_rate: rates.iter().sum::<f64>() / rates.len().max(1) as f64,
                final_acceptance_rate: rates.last().copied().unwrap_or(1.0),
            });
        }
        runs.push(write_run(&sub, &sub.out_dir, &data, &mine)?);
    }
    points.sort_by(|a, b| a.seed.cmp(&b.seed).then(a.epsilon.total_cmp(&b.epsilon)));

    let mut text = String::from(SWEEP_HEADER);
    text.push('\n');
    for p in &points {
        let m = &p.metrics;
        let _ = writeln!(
            text,
            "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            p.seed,
            p.epsilon,
            p.epsilon_abs,
            m.frechet,
            m.precision,
            m.recall,
            m.mean_sample_to_data,
            m.mean_data_to_sample,
            p.mean_acceptance_rate,
            p.final_acceptance_rate
        );
    }
    let sweep_csv = cfg.out_dir.join("sweep.csv");
    write_file(&sweep_csv, &text)?;
    write_file(&cfg.out_dir.join("config.txt"), &cfg.to_text())?;
    Ok(SweepSummary {
        sweep_csv,
        points,
        runs,
    })
}

/// Numeric CSV with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| table_error(path, e))?;
        let headers = reader
            .headers()
            .map_err(|e| table_error(path, e))?
            .iter()
            .map(String::from)
            .collect();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| table_error(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            let row = rec
                .iter()
                .map(|c| {
                    if c.is_empty() {
                        Ok(f64::NAN)
                    } else {
                        c.parse::<f64>().map_err(|_| Error::Parse {
                            path: path.to_path_buf(),
                            line,
                            message: format!("'{c}' is not a number"),
                        })
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Self { headers, rows })
    }

    /// Values of the columns whose names start with `prefix` followed by a digit.
    pub fn prefixed(&self, row: &[f64], prefix: &str) -> Vec<f64> {
        self.headers
            .iter()
            .zip(row)
            .filter(|(h, _)| {
                h.strip_prefix(prefix)
                    .is_some_and(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()))
            })
            .map(|(_, v)| *v)
            .collect()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

fn table_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Seeds with a saved `<stem><seed>.<ext>` file in `dir`, ascending.
fn saved_seeds(dir: &Path, stem: &str, ext: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(seed) = name
            .strip_prefix(stem)
            .and_then(|r| r.strip_suffix(ext))
            .and_then(|r| r.parse::<u64>().ok())
        {
            seeds.push(seed);
        }
    }
    seeds.sort_unstable();
    Ok(seeds)
}

/// Re-renders the per-seed SVGs of a run directory from its CSV files.
/// Returns the written paths.
pub fn plot_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let data = Table::read(&dir.join("data.csv"))?;
    let data_pts: Vec<Vec<f64>> = data.rows.iter().map(|r| data.prefixed(r, "x")).collect();
    let objective = read_objectives(dir)?;
    let mut written = Vec::new();
    for s in saved_seeds(dir, "samples_seed", ".csv")? {
        let samples = Table::read(&dir.join(format!("samples_seed{s}.csv")))?;
        let selected = Table::read(&dir.join(format!("selected_seed{s}.csv")))?;
        let plots = SeedPlots {
            data: data_pts.clone(),
            samples: samples
                .rows
                .iter()
                .map(|r| (samples.prefixed(r, "z"), samples.prefixed(r, "x")))
                .collect(),
            selected: selected
                .rows
                .iter()
                .map(|r| (selected.prefixed(r, "z"), selected.prefixed(r, "x")))
                .collect(),
        };
        let tag = match objective.iter().find(|(seed, _)| *seed == s) {
            Some((_, o)) => format!("{o} seed {s}"),
            None => format!("seed {s}"),
        };
        let scatter = dir.join(format!("scatter_seed{s}.svg"));
        write_file(&scatter, &plots.scatter(&tag))?;
        let latents = dir.join(format!("latents_seed{s}.svg"));
        write_file(&latents, &plots.latents(&tag))?;
        written.push(scatter);
        written.push(latents);
    }
    if written.is_empty() {
        return Err(Error::Config(format!("no samples_seed*.csv files in {}", dir.display())));
    }
    Ok(written)
}

fn read_objectives(dir: &Path) -> Result<Vec<(u64, String)>> {
    let path = dir.join("metrics.csv");
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .skip(1)
        .filter_map(|l| {
            let mut it = l.split(',');
            Some((it.next()?.parse().ok()?, it.next()?.to_string()))
        })
        .collect())
}

pub const EVAL_HEADER: &str =
    "seed,frechet,precision,recall,mean_sample_to_data,mean_data_to_sample";

/// Re-evaluates every saved generator of a run directory against its
/// `data.csv` and writes `eval.csv`. Uses the same test-time latents as
/// training, so the numbers reproduce `metrics.csv`.
pub fn eval_dir(dir: &Path, metrics: &MetricsConfig) -> Result<(PathBuf, Vec<(u64, FinalMetrics)>)> {
    let data = datasets::load_csv(dir.join("data.csv"))?;
    let seeds = saved_seeds(dir, "net_seed", ".json")?;
    if seeds.is_empty() {
        return Err(Error::Config(format!("no net_seed*.json files in {}", dir.display())));
    }
    let results: Vec<(u64, FinalMetrics)> = seeds
        .par_iter()
        .map(|&s| {
            let text = std::fs::read_to_string(dir.join(format!("net_seed{s}.json")))?;
            let net: GeneratorNet = serde_json::from_str(&text)?;
            let eval = evaluate_test_time(&net, &data, metrics.eval_samples, eval_seed(s))?;
            Ok((s, final_metrics(&data, &eval, metrics.pr_k)?))
        })
        .collect::<Result<_>>()?;
    let mut text = String::from(EVAL_HEADER);
    text.push('\n');
    for (s, m) in &results {
        let _ = writeln!(
            text,
            "{s},{:?},{:?},{:?},{:?},{:?}",
            m.frechet, m.precision, m.recall, m.mean_sample_to_data, m.mean_data_to_sample
        );
    }
    let path = dir.join("eval.csv");
    write_file(&path, &text)?;
    Ok((path, results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::ToyShape;

    fn small(out: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.dataset.shape = ToyShape::TwoClusters;
        c.dataset.n_points = 8;
        c.model.hidden = vec![8];
        c.trainer.epochs = 5;
        c.trainer.sample_factor = 4;
        c.trainer.batch_size = 4;
        c.metrics.eval_samples = 40;
        c.seeds = vec![2, 1];
        c.out_dir = out.to_path_buf();
        c
    }

    #[test]
    fn run_writes_every_artifact_sorted_by_seed() {
        let dir = tempfile::tempdir().unwrap();
        let summary = run(&small(dir.path())).unwrap();
        assert_eq!(summary.seeds.iter().map(|s| s.seed).collect::<Vec<_>>(), vec![1, 2]);
        for p in summary.paths() {
            assert!(p.exists(), "{}", p.display());
        }
        let metrics = std::fs::read_to_string(&summary.metrics_csv).unwrap();
        let lines: Vec<&str> = metrics.lines().collect();
        assert_eq!(lines[0], METRICS_HEADER);
        assert!(lines[1].starts_with("1,imle,0.0,"));
        let epochs = Table::read(&summary.seeds[0].epochs_csv).unwrap();
        assert_eq!(epochs.rows.len(), 5);
        let selected = Table::read(&summary.seeds[0].selected_csv).unwrap();
        assert_eq!(selected.rows.len(), 8);
    }

    #[test]
    fn eval_reproduces_training_metrics_and_plot_rerenders() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path());
        let summary = run(&cfg).unwrap();
        let (_, evals) = eval_dir(dir.path(), &cfg.metrics).unwrap();
        for ((seed, m), s) in evals.iter().zip(&summary.seeds) {
            assert_eq!(*seed, s.seed);
            assert_eq!(*m, s.metrics);
        }
        let before = std::fs::read_to_string(&summary.seeds[0].scatter_svg).unwrap();
        std::fs::remove_file(&summary.seeds[0].scatter_svg).unwrap();
        let written = plot_dir(dir.path()).unwrap();
        assert_eq!(written.len(), 4);
        // CSV values round-trip exactly, so the redraw is identical
        assert_eq!(std::fs::read_to_string(&summary.seeds[0].scatter_svg).unwrap(), before);
    }

    #[test]
    fn sweep_zero_matches_plain_imle() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(&dir.path().join("imle"));
        cfg.seeds = vec![4];
        let plain = run(&cfg).unwrap();
        cfg.sweep = Some(vec![0.0]);
        cfg.out_dir = dir.path().join("sweep");
        let sw = sweep(&cfg).unwrap();
        assert_eq!(sw.points[0].metrics, plain.seeds[0].metrics);
        assert_eq!(
            std::fs::read_to_string(&sw.runs[0].seeds[0].epochs_csv).unwrap().replace(",1.0,", ",,"),
            std::fs::read_to_string(&plain.seeds[0].epochs_csv).unwrap()
        );
    }
}
