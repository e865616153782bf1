//! Latent code sampling: the standard normal prior and the epsilon-rejection
//! prior used for RS-IMLE training.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::net::GeneratorNet;
use crate::nn_index::{filter_by_epsilon, pairwise_distances, FilterSpace, Metric};
use crate::tensor::Tensor2;

/// Seeded source of i.i.d. `N(0, I)` latent codes.
#[derive(Debug, Clone)]
pub struct PriorSampler {
    latent_dim: usize,
    seed: u64,
    rng: ChaCha8Rng,
}

impl PriorSampler {
    pub fn new(latent_dim: usize, seed: u64) -> Self {
        Self {
            latent_dim,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn draw_gaussian(&mut self, n: usize) -> Tensor2 {
        let data = (0..n * self.latent_dim)
            .map(|_| StandardNormal.sample(&mut self.rng))
            .collect();
        Tensor2::from_vec(n, self.latent_dim, data).expect("sized by construction")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionBatch {
    pub accepted_latents: Tensor2,
    /// Generator outputs for `accepted_latents`, row for row.
    pub accepted_samples: Tensor2,
    pub proposals_drawn: usize,
    pub rounds: usize,
    pub acceptance_rate: f64,
}

impl RejectionBatch {
    pub fn accepted(&self) -> usize {
        self.accepted_latents.rows()
    }

    /// False when `max_rounds` ran out before `target_count` latents were accepted.
    pub fn is_complete(&self, target_count: usize) -> bool {
        self.accepted() >= target_count
    }
}

/// Draws rounds of `target_count` Gaussian proposals, keeping those whose
/// generated sample lies at least `epsilon` from every data point (measured in
/// `space`), until `target_count` are accepted or `max_rounds` is reached.
///
/// Every accepted proposal of the final round is kept, so the batch may hold
/// more than `target_count` rows. A run that accepts nothing at all is reported
/// as [`Error::DegenerateEpsilon`].
pub fn rejection_sample(
    sampler: &mut PriorSampler,
    net: &GeneratorNet,
    data: &Tensor2,
    space: &FilterSpace,
    epsilon: f64,
    target_count: usize,
    max_rounds: usize,
) -> Result<RejectionBatch> {
    if !(epsilon >= 0.0) {
        return Err(Error::Config(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if target_count == 0 || max_rounds == 0 {
        return Err(Error::Config(
            "rejection sampling needs target_count >= 1 and max_rounds >= 1".into(),
        ));
    }
    if sampler.latent_dim() != net.latent_dim() {
        return Err(Error::shape(
            "rejection_sample",
            format!("{} latent dims", net.latent_dim()),
            format!("{} from the sampler", sampler.latent_dim()),
        ));
    }
    let data_features = space.features(data)?;

    let mut latents = Tensor2::zeros(0, net.latent_dim());
    let mut samples = Tensor2::zeros(0, net.output_dim());
    let mut proposals = 0;
    let mut rounds = 0;
    while rounds < max_rounds && latents.rows() < target_count {
        rounds += 1;
        let z = sampler.draw_gaussian(target_count);
        proposals += z.rows();
        let s = net.forward(&z)?;
        let keep = if epsilon == 0.0 {
            (0..z.rows()).collect()
        } else {
            let dm = pairwise_distances(&data_features, &space.features(&s)?, Metric::Euclidean)?;
            filter_by_epsilon(&dm, epsilon)?
        };
        if keep.len() == z.rows() {
            latents = latents.vstack(&z)?;
            samples = samples.vstack(&s)?;
        } else {
            latents = latents.vstack(&z.select_rows(&keep))?;
            samples = samples.vstack(&s.select_rows(&keep))?;
        }
    }

    let acceptance_rate = latents.rows() as f64 / proposals as f64;
    if latents.rows() == 0 {
        return Err(Error::DegenerateEpsilon {
            epsilon,
            proposals,
            acceptance_rate,
        });
    }
    Ok(RejectionBatch {
        accepted_latents: latents,
        accepted_samples: samples,
        proposals_drawn: proposals,
        rounds,
        acceptance_rate,
    })
}

/// Acceptance rate of the rejection prior at each radius in `epsilons`, for a
/// fixed generator, estimated from one shared set of `proposals` latent draws.
///
/// Entry `k` equals the `acceptance_rate` of a single-round [`rejection_sample`]
/// with the same seed, radius `epsilons[k]` and `target_count = proposals`.
pub fn acceptance_curve(
    net: &GeneratorNet,
    data: &Tensor2,
    space: &FilterSpace,
    epsilons: &[f64],
    proposals: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if proposals == 0 {
        return Err(Error::Config("acceptance_curve needs proposals >= 1".into()));
    }
    if let Some(e) = epsilons.iter().find(|e| !(**e >= 0.0)) {
        return Err(Error::Config(format!("epsilon must be >= 0, got {e}")));
    }
    let z = PriorSampler::new(net.latent_dim(), seed).draw_gaussian(proposals);
    let s = net.forward(&z)?;
    let dm = pairwise_distances(&space.features(data)?, &space.features(&s)?, Metric::Euclidean)?;
    let nearest: Vec<f64> = (0..dm.m()).map(|j| dm.min_over_data(j)).collect();
    Ok(epsilons
        .iter()
        .map(|&e| {
            let kept = if e == 0.0 {
                proposals
            } else {
                nearest.iter().filter(|&&d| d >= e).count()
            };
            kept as f64 / proposals as f64
        })
        .collect())
}
