//! Per-agent collaborative sequential Monte Carlo over the field parameters.
//!
//! Each agent carries a particle cloud over xi = (gamma_1..gamma_I, log
//! sigma_delta). On every measurement it pools its own cloud with the latest
//! snapshots received from neighbours, shrinks all particles toward the
//! pooled mean (Liu-West), reweights by the binary-measurement likelihood,
//! resamples back down to N_p, perturbs with a Gaussian kernel scaled by the
//! agent's weighted sample covariance, and importance-corrects the weights.

use crate::error::{Error, Result};
use crate::field::{BasisLayout, BinaryObservation};
use crate::scalar::{norm_cdf, Real};
use rand::distributions::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

/// Probability floor applied before likelihood ratios.
const LIKELIHOOD_FLOOR: f64 = 1e-12;

/// One hypothesis over the field parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle<F> {
    pub gains: Vec<F>,
    pub log_noise: F,
}

impl<F: Real> Particle<F> {
    pub fn dim(&self) -> usize {
        self.gains.len() + 1
    }

    pub fn noise_std(&self) -> F {
        self.log_noise.exp()
    }

    fn to_state(&self, out: &mut [F]) {
        out[..self.gains.len()].copy_from_slice(&self.gains);
        out[self.gains.len()] = self.log_noise;
    }

    fn from_state(state: &[F]) -> Self {
        let (gains, tail) = state.split_at(state.len() - 1);
        Self {
            gains: gains.to_vec(),
            log_noise: tail[0],
        }
    }
}

/// A weighted particle cloud owned by one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSet<F> {
    pub particles: Vec<Particle<F>>,
    pub weights: Vec<F>,
    pub agent_id: usize,
    pub epoch: u64,
}

impl<F: Real> ParticleSet<F> {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weight_sum(&self) -> F {
        self.weights.iter().copied().sum()
    }

    pub fn normalize_weights(&mut self) {
        let s = self.weight_sum();
        if s > F::zero() {
            for w in &mut self.weights {
                *w = *w / s;
            }
        } else {
            let u = F::one() / F::from_usize(self.len()).unwrap();
            for w in &mut self.weights {
                *w = u;
            }
        }
    }
}

/// Prior over xi: independent uniform gains and Gaussian log noise scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec<F> {
    pub gain_lo: F,
    pub gain_hi: F,
    pub log_noise_mean: F,
    pub log_noise_std: F,
}

impl<F: Real> PriorSpec<F> {
    /// Gains uniform on [0, 2 tau], log sigma ~ N(ln 0.5, 0.5^2).
    pub fn default_for_threshold(tau: F) -> Self {
        Self {
            gain_lo: F::zero(),
            gain_hi: F::lit(2.0) * tau,
            log_noise_mean: F::lit(0.5).ln(),
            log_noise_std: F::lit(0.5),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.gain_lo == self.gain_hi && self.log_noise_std == F::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionParams<F> {
    /// Liu-West shrinkage factor s in (0,1).
    pub shrinkage: F,
    /// Kernel exponent eta >= 0; the kernel covariance is h^(2-eta) V.
    pub kernel_exponent: F,
    pub n_particles: usize,
    pub prior: PriorSpec<F>,
}

impl<F: Real> FusionParams<F> {
    pub fn new(shrinkage: F, kernel_exponent: F, n_particles: usize, prior: PriorSpec<F>) -> Result<Self> {
        if shrinkage <= F::zero() || shrinkage >= F::one() {
            return Err(Error::Config("shrinkage must lie in (0,1)".into()));
        }
        if kernel_exponent < F::zero() {
            return Err(Error::Config("kernel exponent must be >= 0".into()));
        }
        if n_particles < 2 {
            return Err(Error::Config("need at least 2 particles".into()));
        }
        Ok(Self {
            shrinkage,
            kernel_exponent,
            n_particles,
            prior,
        })
    }

    pub fn defaults(n_particles: usize, tau: F) -> Self {
        Self {
            shrinkage: F::lit(0.98),
            kernel_exponent: F::zero(),
            n_particles,
            prior: PriorSpec::default_for_threshold(tau),
        }
    }

    /// Kernel covariance multiplier h^(2-eta) with h = sqrt(1 - s^2).
    pub fn kernel_scale(&self) -> F {
        let h = (F::one() - self.shrinkage * self.shrinkage).sqrt();
        h.powf(F::lit(2.0) - self.kernel_exponent)
    }
}

/// Conditional-mean field estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldEstimate<F> {
    pub gains_hat: Vec<F>,
    pub noise_var_hat: F,
}

/// N_p i.i.d. prior draws with uniform weights.
pub fn init_particles<F: Real>(
    basis_count: usize,
    params: &FusionParams<F>,
    rng: &mut impl Rng,
) -> ParticleSet<F> {
    let np = params.n_particles;
    let p = params.prior;
    let mut particles = Vec::with_capacity(np);
    for _ in 0..np {
        let gains = (0..basis_count)
            .map(|_| {
                if p.gain_hi > p.gain_lo {
                    rng.gen_range(p.gain_lo..p.gain_hi)
                } else {
                    p.gain_lo
                }
            })
            .collect();
        let z = F::standard_normal(&mut *rng);
        particles.push(Particle {
            gains,
            log_noise: p.log_noise_mean + p.log_noise_std * z,
        });
    }
    let w = F::one() / F::from_usize(np).unwrap();
    ParticleSet {
        particles,
        weights: vec![w; np],
        agent_id: 0,
        epoch: 0,
    }
}

/// Exact probability of a given bit under one particle, in [0, 1].
///
/// `activations` are the basis activations at the measurement location.
pub fn bit_probability_with_activations<F: Real>(
    p: &Particle<F>,
    activations: &[F],
    tau: F,
    bit: u8,
) -> F {
    let c: F = p
        .gains
        .iter()
        .zip(activations)
        .map(|(&g, &a)| g * a)
        .sum();
    let sigma = p.noise_std();
    let p0 = if sigma > F::zero() {
        norm_cdf((tau - c) / sigma)
    } else if c > tau {
        F::zero()
    } else {
        F::one()
    };
    if bit == 0 {
        p0
    } else {
        F::one() - p0
    }
}

/// Probability of the observed bit, floored away from 0 and 1 so that
/// likelihood ratios stay finite.
pub fn obs_likelihood<F: Real>(
    p: &Particle<F>,
    layout: &BasisLayout<F>,
    obs: &BinaryObservation<F>,
    tau: F,
) -> F {
    let acts = layout.activations(obs.location);
    clamp_prob(bit_probability_with_activations(p, &acts, tau, obs.bit))
}

fn clamp_prob<F: Real>(p: F) -> F {
    let floor = F::lit(LIKELIHOOD_FLOOR);
    p.max(floor).min(F::one() - floor)
}

/// One collaborative fusion step (shrinkage, reweight, resample, perturb).
///
/// `neighbors` are snapshots from *other* agents; the agent's own set is
/// always part of the pool, so an empty slice degenerates to a single-agent
/// Liu-West update.
pub fn fuse_and_update<F: Real>(
    own: &ParticleSet<F>,
    neighbors: &[&ParticleSet<F>],
    obs: &BinaryObservation<F>,
    params: &FusionParams<F>,
    layout: &BasisLayout<F>,
    tau: F,
    rng: &mut impl Rng,
) -> ParticleSet<F> {
    let dim = own.particles[0].dim();
    let np = params.n_particles;
    let pool: Vec<&ParticleSet<F>> = std::iter::once(own).chain(neighbors.iter().copied()).collect();
    let n_sets = F::from_usize(pool.len()).unwrap();

    // Joint normalization: each set is normalized to 1, so dividing by the
    // set count makes the pooled weights a probability distribution.
    let pooled_w: Vec<F> = pool
        .iter()
        .flat_map(|s| s.weights.iter().map(|&w| w / n_sets))
        .collect();

    // Pooled weighted mean.
    let mut mean = vec![F::zero(); dim];
    let mut state = vec![F::zero(); dim];
    {
        let mut k = 0;
        for set in &pool {
            for p in &set.particles {
                p.to_state(&mut state);
                for (m, &s) in mean.iter_mut().zip(&state) {
                    *m = *m + state_weight(&pooled_w, k) * s;
                }
                k += 1;
            }
        }
    }

    // Shrinkage centers and their likelihood reweighting.
    let acts = layout.activations(obs.location);
    let s_shrink = params.shrinkage;
    let one_minus = F::one() - s_shrink;
    let mut centers: Vec<Vec<F>> = Vec::with_capacity(pooled_w.len());
    let mut center_like: Vec<F> = Vec::with_capacity(pooled_w.len());
    let mut tilde_w: Vec<F> = Vec::with_capacity(pooled_w.len());
    {
        let mut k = 0;
        for set in &pool {
            for p in &set.particles {
                p.to_state(&mut state);
                let center: Vec<F> = state
                    .iter()
                    .zip(&mean)
                    .map(|(&xi, &mu)| s_shrink * xi + one_minus * mu)
                    .collect();
                let cp = Particle::from_state(&center);
                let like = clamp_prob(bit_probability_with_activations(&cp, &acts, tau, obs.bit));
                tilde_w.push(like * pooled_w[k]);
                centers.push(center);
                center_like.push(like);
                k += 1;
            }
        }
    }
    normalize(&mut tilde_w);

    // Agent's own weighted sample covariance about the pooled mean.
    let mut cov = vec![F::zero(); dim * dim];
    for (p, &w) in own.particles.iter().zip(&own.weights) {
        p.to_state(&mut state);
        for i in 0..dim {
            let di = state[i] - mean[i];
            for j in 0..=i {
                let dj = state[j] - mean[j];
                cov[i * dim + j] = cov[i * dim + j] + w * di * dj;
            }
        }
    }
    for i in 0..dim {
        for j in (i + 1)..dim {
            cov[i * dim + j] = cov[j * dim + i];
        }
    }
    let scale = params.kernel_scale();
    let trace: F = (0..dim).map(|i| cov[i * dim + i]).sum();
    let ridge = F::lit(1e-8) * trace / F::from_usize(dim).unwrap();
    for v in cov.iter_mut() {
        *v = *v * scale;
    }
    for i in 0..dim {
        cov[i * dim + i] = cov[i * dim + i] + ridge * scale;
    }
    let chol = cholesky(&cov, dim);

    // Resample N_p candidates and perturb with the Gaussian kernel.
    let sampler = WeightedIndex::new(tilde_w.iter().map(|w| w.to_f64_lossy()))
        .unwrap_or_else(|_| WeightedIndex::new(vec![1.0; tilde_w.len()]).unwrap());
    let mut particles = Vec::with_capacity(np);
    let mut weights = Vec::with_capacity(np);
    let mut z = vec![F::zero(); dim];
    for _ in 0..np {
        let idx = sampler.sample(rng);
        for zi in z.iter_mut() {
            *zi = F::standard_normal(&mut *rng);
        }
        let mut xi = centers[idx].clone();
        if let Some(l) = &chol {
            for i in 0..dim {
                let mut acc = F::zero();
                for j in 0..=i {
                    acc = acc + l[i * dim + j] * z[j];
                }
                xi[i] = xi[i] + acc;
            }
        }
        let p = Particle::from_state(&xi);
        let like = clamp_prob(bit_probability_with_activations(&p, &acts, tau, obs.bit));
        weights.push(like / center_like[idx]);
        particles.push(p);
    }
    normalize(&mut weights);

    ParticleSet {
        particles,
        weights,
        agent_id: own.agent_id,
        epoch: own.epoch + 1,
    }
}

fn state_weight<F: Real>(w: &[F], k: usize) -> F {
    w[k]
}

fn normalize<F: Real>(w: &mut [F]) {
    let s: F = w.iter().copied().sum();
    if s > F::zero() && s.is_finite() {
        for v in w.iter_mut() {
            *v = *v / s;
        }
    } else {
        let u = F::one() / F::from_usize(w.len()).unwrap();
        for v in w.iter_mut() {
            *v = u;
        }
    }
}

/// Lower-triangular Cholesky factor of a PSD matrix, or None if the matrix
/// is effectively zero.
fn cholesky<F: Real>(a: &[F], dim: usize) -> Option<Vec<F>> {
    let trace: F = (0..dim).map(|i| a[i * dim + i]).sum();
    if !(trace > F::zero()) {
        return None;
    }
    let mut l = vec![F::zero(); dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut sum = a[i * dim + j];
            for k in 0..j {
                sum = sum - l[i * dim + k] * l[j * dim + k];
            }
            if i == j {
                l[i * dim + j] = sum.max(F::zero()).sqrt();
            } else {
                let d = l[j * dim + j];
                l[i * dim + j] = if d > F::zero() { sum / d } else { F::zero() };
            }
        }
    }
    Some(l)
}

/// Conditional means per Eqs. of the weighted particle representation.
pub fn estimate_field<F: Real>(ps: &ParticleSet<F>) -> FieldEstimate<F> {
    let i_count = ps.particles[0].gains.len();
    let mut gains_hat = vec![F::zero(); i_count];
    let mut noise_var = F::zero();
    for (p, &w) in ps.particles.iter().zip(&ps.weights) {
        for (g, &gi) in gains_hat.iter_mut().zip(&p.gains) {
            *g = *g + w * gi;
        }
        noise_var = noise_var + w * (F::lit(2.0) * p.log_noise).exp();
    }
    FieldEstimate {
        gains_hat,
        noise_var_hat: noise_var,
    }
}

/// Lossless wire encoding of a particle cloud.
pub fn broadcast_payload<F: Real>(ps: &ParticleSet<F>) -> String {
    serde_json::to_string(ps).expect("particle set serializes")
}

pub fn decode_payload<F: Real>(payload: &str) -> Result<ParticleSet<F>> {
    Ok(serde_json::from_str(payload)?)
}
