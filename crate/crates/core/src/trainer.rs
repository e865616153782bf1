//! IMLE and RS-IMLE training loops.
//!
//! One epoch draws a pool of latent codes (Gaussian for IMLE, epsilon-rejected
//! for RS-IMLE), assigns every data point its nearest generated sample, and
//! then takes `inner_steps` Adam steps on random mini-batches of the squared
//! distance between each data point and its assigned sample. The assignment is
//! frozen for the whole epoch.

use std::time::Instant;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{adam_step, AdamState, GeneratorNet};
use crate::nn_index::{assign_nearest, pairwise_distances, FilterSpace, Metric};
use crate::sampler::{rejection_sample, PriorSampler};
use crate::tensor::{euclidean, squared_euclidean, Tensor2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    #[serde(rename = "imle")]
    Imle,
    #[serde(rename = "rs_imle")]
    RsImle,
}

impl Objective {
    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Imle => "imle",
            Objective::RsImle => "rs-imle",
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "imle" => Ok(Objective::Imle),
            "rs-imle" | "rs_imle" => Ok(Objective::RsImle),
            other => Err(Error::Config(format!(
                "unknown objective '{other}' (expected imle or rs-imle)"
            ))),
        }
    }
}

/// What an RS-IMLE epoch does when no proposal is accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DegeneratePolicy {
    /// Return [`Error::DegenerateEpsilon`].
    #[default]
    Fail,
    /// Record the epoch with an empty assignment and take no optimizer steps.
    Skip,
}

impl DegeneratePolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            DegeneratePolicy::Fail => "fail",
            DegeneratePolicy::Skip => "skip",
        }
    }
}

impl std::str::FromStr for DegeneratePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fail" => Ok(DegeneratePolicy::Fail),
            "skip" => Ok(DegeneratePolicy::Skip),
            other => Err(Error::Config(format!("unknown degenerate policy '{other}' (fail|skip)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub objective: Objective,
    /// Rejection radius; ignored (treated as 0) for IMLE.
    pub epsilon: f64,
    /// Pool size per epoch is `sample_factor * n`.
    pub sample_factor: usize,
    pub epochs: usize,
    pub inner_steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Cap on rejection rounds per epoch.
    pub max_rounds: usize,
    pub filter_space: FilterSpace,
    /// Keep each epoch's selected latent codes in its record.
    pub record_latents: bool,
    pub on_degenerate: DegeneratePolicy,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            objective: Objective::Imle,
            epsilon: 0.0,
            sample_factor: 10,
            epochs: 2000,
            inner_steps: 10,
            batch_size: 10,
            lr: 1e-3,
            seed: 0,
            max_rounds: 50,
            filter_space: FilterSpace::Raw,
            record_latents: false,
            on_degenerate: DegeneratePolicy::Fail,
        }
    }
}

impl TrainerConfig {
    pub fn effective_epsilon(&self) -> f64 {
        match self.objective {
            Objective::Imle => 0.0,
            Objective::RsImle => self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective == Objective::RsImle && !(self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "rs-imle needs epsilon > 0, got {}",
                self.epsilon
            )));
        }
        self.validate_shared()
    }

    fn validate_shared(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Config(format!("epsilon must be finite and >= 0, got {}", self.epsilon)));
        }
        if self.sample_factor == 0 {
            return Err(Error::Config(
                "sample_factor must be >= 1 so that the pool holds at least n samples".into(),
            ));
        }
        if self.batch_size == 0 || self.max_rounds == 0 {
            return Err(Error::Config("batch_size and max_rounds must be >= 1".into()));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainRecord {
    pub epoch: usize,
    /// Euclidean distance (in the filter space) from each data point to its selected sample.
    pub dist: Vec<f64>,
    pub sigma: Vec<usize>,
    pub selected_latents: Option<Tensor2>,
    /// Mean squared data-space distance between each point and its selected sample.
    pub mean_loss: f64,
    /// Accepted / proposed; `None` for IMLE epochs.
    pub acceptance_rate: Option<f64>,
    pub proposals: usize,
    pub pool_size: usize,
    pub wall_time: f64,
}

impl TrainRecord {
    /// An RS-IMLE epoch in which nothing was accepted (only under [`DegeneratePolicy::Skip`]).
    pub fn is_skipped(&self) -> bool {
        self.dist.is_empty()
    }

    pub fn min_dist(&self) -> f64 {
        self.dist.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_dist(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }
}

/// Wall time is excluded: two runs are the same trajectory when everything else matches bit for bit.
impl PartialEq for TrainRecord {
    fn eq(&self, o: &Self) -> bool {
        self.epoch == o.epoch
            && self.dist == o.dist
            && self.sigma == o.sigma
            && self.selected_latents == o.selected_latents
            && self.mean_loss.to_bits() == o.mean_loss.to_bits()
            && self.acceptance_rate.map(f64::to_bits) == o.acceptance_rate.map(f64::to_bits)
            && self.proposals == o.proposals
            && self.pool_size == o.pool_size
    }
}

const LATENT_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;
const BATCH_STREAM: u64 = 0xD1B5_4A32_D192_ED03;

pub struct Trainer {
    config: TrainerConfig,
    net: GeneratorNet,
    adam: AdamState,
    sampler: PriorSampler,
    batch_rng: ChaCha8Rng,
    epoch: usize,
}

impl Trainer {
    pub fn new(net: GeneratorNet, config: TrainerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self::build(net, config))
    }

    /// Like [`Trainer::new`] but lets RS-IMLE run with `epsilon = 0`, which must
    /// reproduce IMLE exactly. Used by sweeps and reduction checks.
    pub fn new_allowing_zero_epsilon(net: GeneratorNet, config: TrainerConfig) -> Result<Self> {
        config.validate_shared()?;
        Ok(Self::build(net, config))
    }

    fn build(net: GeneratorNet, config: TrainerConfig) -> Self {
        let adam = AdamState::new(net.param_count());
        let sampler = PriorSampler::new(net.latent_dim(), config.seed ^ LATENT_STREAM);
        let batch_rng = ChaCha8Rng::seed_from_u64(config.seed ^ BATCH_STREAM);
        Self {
            config,
            net,
            adam,
            sampler,
            batch_rng,
            epoch: 0,
        }
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn net(&self) -> &GeneratorNet {
        &self.net
    }

    pub fn into_net(self) -> GeneratorNet {
        self.net
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    fn check_data(&self, data: &Tensor2) -> Result<()> {
        if data.rows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if data.cols() != self.net.output_dim() {
            return Err(Error::shape(
                "Trainer",
                format!("{} data columns", self.net.output_dim()),
                format!("{} columns", data.cols()),
            ));
        }
        Ok(())
    }

    pub fn train_epoch(&mut self, data: &Tensor2) -> Result<TrainRecord> {
        match self.config.objective {
            Objective::Imle => self.train_epoch_imle(data),
            Objective::RsImle => self.train_epoch_rs_imle(data),
        }
    }

    /// Vanilla IMLE: nearest sample among `m` unfiltered Gaussian draws.
    pub fn train_epoch_imle(&mut self, data: &Tensor2) -> Result<TrainRecord> {
        self.check_data(data)?;
        let start = Instant::now();
        let m = self.config.sample_factor * data.rows();
        let latents = self.sampler.draw_gaussian(m);
        let samples = self.net.forward(&latents)?;
        self.finish_epoch(data, latents, samples, None, m, start)
    }

    /// RS-IMLE: the pool holds only latents whose samples are at least
    /// `epsilon` from every data point under the current generator.
    pub fn train_epoch_rs_imle(&mut self, data: &Tensor2) -> Result<TrainRecord> {
        self.check_data(data)?;
        let start = Instant::now();
        let m = self.config.sample_factor * data.rows();
        let batch = match rejection_sample(
            &mut self.sampler,
            &self.net,
            data,
            &self.config.filter_space,
            self.config.epsilon,
            m,
            self.config.max_rounds,
        ) {
            Ok(batch) => batch,
            Err(Error::DegenerateEpsilon { proposals, .. })
                if self.config.on_degenerate == DegeneratePolicy::Skip =>
            {
                let record = TrainRecord {
                    epoch: self.epoch,
                    dist: Vec::new(),
                    sigma: Vec::new(),
                    selected_latents: None,
                    mean_loss: f64::NAN,
                    acceptance_rate: Some(0.0),
                    proposals,
                    pool_size: 0,
                    wall_time: start.elapsed().as_secs_f64(),
                };
                self.epoch += 1;
                return Ok(record);
            }
            Err(e) => return Err(e),
        };
        let rate = batch.acceptance_rate;
        let proposals = batch.proposals_drawn;
        self.finish_epoch(
            data,
            batch.accepted_latents,
            batch.accepted_samples,
            Some(rate),
            proposals,
            start,
        )
    }

    fn finish_epoch(
        &mut self,
        data: &Tensor2,
        latents: Tensor2,
        samples: Tensor2,
        acceptance_rate: Option<f64>,
        proposals: usize,
        start: Instant,
    ) -> Result<TrainRecord> {
        let space = &self.config.filter_space;
        let dm = pairwise_distances(&space.features(data)?, &space.features(&samples)?, Metric::Euclidean)?;
        let all: Vec<usize> = (0..samples.rows()).collect();
        let assignment = assign_nearest(&dm, &all)?;

        let n = data.rows();
        let mean_loss = (0..n)
            .map(|i| squared_euclidean(data.row(i), samples.row(assignment.sigma[i])))
            .sum::<f64>()
            / n as f64;
        let selected = latents.select_rows(&assignment.sigma);

        let batch_size = self.config.batch_size.min(n);
        for _ in 0..self.config.inner_steps {
            let picks = index::sample(&mut self.batch_rng, n, batch_size).into_vec();
            self.gradient_step(data, &selected, &picks)?;
        }

        let record = TrainRecord {
            epoch: self.epoch,
            dist: assignment.dist,
            sigma: assignment.sigma,
            selected_latents: self.config.record_latents.then_some(selected),
            mean_loss,
            acceptance_rate,
            proposals,
            pool_size: samples.rows(),
            wall_time: start.elapsed().as_secs_f64(),
        };
        self.epoch += 1;
        Ok(record)
    }

    /// One Adam step on `mean_{i in picks} |x_i - T(z_sigma(i))|^2`; returns the batch loss
    /// before the step.
    fn gradient_step(&mut self, data: &Tensor2, selected: &Tensor2, picks: &[usize]) -> Result<f64> {
        let z = selected.select_rows(picks);
        let x = data.select_rows(picks);
        let (out, tape) = self.net.forward_with_tape(&z)?;
        let diff = out.sub(&x)?;
        let k = picks.len() as f64;
        let loss = diff.data().iter().map(|d| d * d).sum::<f64>() / k;
        let grad = diff.scale(2.0 / k);
        let grads = self.net.backward(&tape, &grad)?;
        adam_step(&mut self.net, &grads, &mut self.adam, self.config.lr)?;
        Ok(loss)
    }

    /// Runs the configured number of epochs, handing each record to `on_epoch`.
    pub fn run(
        &mut self,
        data: &Tensor2,
        mut on_epoch: impl FnMut(&TrainRecord),
    ) -> Result<Vec<TrainRecord>> {
        let mut records = Vec::with_capacity(self.config.epochs);
        for _ in 0..self.config.epochs {
            let r = self.train_epoch(data)?;
            on_epoch(&r);
            records.push(r);
        }
        Ok(records)
    }
}

/// Distances observed at test time with unfiltered `N(0, I)` latents.
#[derive(Debug, Clone, PartialEq)]
pub struct TestTimeEval {
    pub latents: Tensor2,
    pub samples: Tensor2,
    /// For each generated sample, distance to its nearest data point (precision-like).
    pub sample_to_data: Vec<f64>,
    /// For each data point, distance to its nearest generated sample (recall-like).
    pub data_to_sample: Vec<f64>,
}

impl TestTimeEval {
    pub fn mean_sample_to_data(&self) -> f64 {
        mean(&self.sample_to_data)
    }

    pub fn mean_data_to_sample(&self) -> f64 {
        mean(&self.data_to_sample)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn evaluate_test_time(
    net: &GeneratorNet,
    data: &Tensor2,
    n_samples: usize,
    seed: u64,
) -> Result<TestTimeEval> {
    if data.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let latents = PriorSampler::new(net.latent_dim(), seed).draw_gaussian(n_samples);
    let samples = net.forward(&latents)?;
    let dm = pairwise_distances(data, &samples, Metric::Euclidean)?;
    let sample_to_data = (0..samples.rows()).map(|j| dm.min_over_data(j)).collect();
    let data_to_sample = (0..data.rows())
        .map(|i| dm.row(i).iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    Ok(TestTimeEval {
        latents,
        samples,
        sample_to_data,
        data_to_sample,
    })
}

/// Brute-force Euclidean distance from `point` to the nearest row of `set`.
pub fn nearest_distance(point: &[f64], set: &Tensor2) -> f64 {
    set.iter_rows()
        .map(|r| euclidean(point, r))
        .fold(f64::INFINITY, f64::min)
}
