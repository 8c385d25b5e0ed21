//! Collaborative entropy-driven selection of the next measurement point.
//!
//! Candidates are rings of radial steps around the current position, clipped
//! to the free space. Each candidate is scored by the expected order-beta
//! Renyi divergence between the current posterior and the one-step-ahead
//! posterior, computed from the particle cloud. Agents broadcast their best
//! (candidate, reward) pair and everyone adopts the global argmax, so the
//! flock moves to a single shared measurement point.

use crate::error::{Error, Result};
use crate::estimator::{bit_probability_with_activations, ParticleSet};
use crate::field::BasisLayout;
use crate::geom::{Polygon, Rect, Vec2};
use crate::scalar::Real;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsParams<F> {
    /// Renyi order, nonnegative and distinct from 0 and 1.
    pub beta: F,
    /// Exploration probability.
    pub epsilon: F,
    /// Radial step size (m).
    pub radial_step: F,
    /// Maximum number of radial steps.
    pub n_steps: usize,
    /// Number of heading directions.
    pub n_directions: usize,
    /// Allowable search area.
    pub search_area: Rect<F>,
    /// Clearance added around static obstacles when building free space.
    pub obstacle_inflation: F,
}

impl<F: Real> AsParams<F> {
    pub fn new(beta: F, epsilon: F, radial_step: F, n_steps: usize, n_directions: usize, search_area: Rect<F>) -> Result<Self> {
        if beta < F::zero() || beta == F::zero() || beta == F::one() {
            return Err(Error::Config("beta must be nonnegative and not 0 or 1".into()));
        }
        if !(F::zero()..=F::one()).contains(&epsilon) {
            return Err(Error::Config("epsilon must lie in [0,1]".into()));
        }
        if radial_step <= F::zero() || n_steps == 0 || n_directions == 0 {
            return Err(Error::Config("radial step, steps, and directions must be positive".into()));
        }
        Ok(Self {
            beta,
            epsilon,
            radial_step,
            n_steps,
            n_directions,
            search_area,
            obstacle_inflation: F::lit(0.35),
        })
    }

    pub fn defaults(search_area: Rect<F>) -> Self {
        Self {
            beta: F::lit(0.5),
            epsilon: F::lit(0.01),
            radial_step: F::lit(1.0),
            n_steps: 1,
            n_directions: 10,
            search_area,
            obstacle_inflation: F::lit(0.35),
        }
    }
}

/// Free space used for candidate generation: the search area minus the
/// inflated static obstacles.
#[derive(Debug, Clone)]
pub struct FreeSpace<F> {
    pub area: Rect<F>,
    pub obstacles: Vec<Polygon<F>>,
    pub inflation: F,
}

impl<F: Real> FreeSpace<F> {
    pub fn new(area: Rect<F>, obstacles: Vec<Polygon<F>>, inflation: F) -> Self {
        Self {
            area,
            obstacles,
            inflation,
        }
    }

    pub fn contains(&self, p: Vec2<F>) -> bool {
        self.area.contains(p) && self.obstacles.iter().all(|ob| ob.clearance(p) > self.inflation)
    }
}

/// One agent's broadcast proposal: best candidate and its reward. Exploring
/// agents use an infinite reward sentinel so exploration always wins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proposal<F> {
    pub agent_id: usize,
    pub candidate: Vec2<F>,
    pub reward: F,
}

/// Radial candidate set around `l_k`, clipped to free space. The j = 0 ring
/// collapses to `l_k` itself (kept once, when free).
pub fn candidate_set<F: Real>(l_k: Vec2<F>, params: &AsParams<F>, free: &FreeSpace<F>) -> Vec<Vec2<F>> {
    let mut out = Vec::new();
    if free.contains(l_k) {
        out.push(l_k);
    }
    let two_pi = F::lit(2.0) * F::PI();
    for j in 1..=params.n_steps {
        let r = params.radial_step * F::from_usize(j).unwrap();
        for n in 0..params.n_directions {
            let ang = two_pi * F::from_usize(n).unwrap() / F::from_usize(params.n_directions).unwrap();
            let p = l_k + Vec2::from_angle(ang).scale(r);
            if free.contains(p) {
                out.push(p);
            }
        }
    }
    out
}

/// One-step-ahead expected Renyi reward of measuring at `candidate`.
///
/// zeta_beta(r) is the weighted power sum of the per-particle bit
/// probabilities; the reward is (1/(beta-1)) sum_r zeta_1(r) ln(zeta_beta(r)
/// / zeta_1(r)^beta). Outcomes with zeta_1 = 0 contribute nothing.
pub fn expected_reward<F: Real>(
    candidate: Vec2<F>,
    ps: &ParticleSet<F>,
    layout: &BasisLayout<F>,
    tau: F,
    beta: F,
) -> F {
    let acts = layout.activations(candidate);
    let mut zeta1 = [F::zero(); 2];
    let mut zeta_b = [F::zero(); 2];
    for (p, &w) in ps.particles.iter().zip(&ps.weights) {
        let p1 = bit_probability_with_activations(p, &acts, tau, 1);
        let p0 = F::one() - p1;
        zeta1[0] = zeta1[0] + w * p0;
        zeta1[1] = zeta1[1] + w * p1;
        zeta_b[0] = zeta_b[0] + w * p0.powf(beta);
        zeta_b[1] = zeta_b[1] + w * p1.powf(beta);
    }
    let mut reward = F::zero();
    for r in 0..2 {
        if zeta1[r] > F::zero() && zeta_b[r] > F::zero() {
            reward = reward + zeta1[r] * (zeta_b[r] / zeta1[r].powf(beta)).ln();
        }
    }
    reward / (beta - F::one())
}

/// Epsilon-greedy waypoint selection for one agent.
pub fn select_waypoint<F: Real>(
    l_k: Vec2<F>,
    ps: &ParticleSet<F>,
    params: &AsParams<F>,
    free: &FreeSpace<F>,
    layout: &BasisLayout<F>,
    tau: F,
    rng: &mut impl Rng,
) -> Proposal<F> {
    let explore: F = rng.gen_range(F::zero()..F::one());
    if explore < params.epsilon {
        if let Some(p) = sample_free_point(free, rng) {
            return Proposal {
                agent_id: ps.agent_id,
                candidate: p,
                reward: F::infinity(),
            };
        }
    }
    let candidates = candidate_set(l_k, params, free);
    if candidates.is_empty() {
        return Proposal {
            agent_id: ps.agent_id,
            candidate: l_k,
            reward: F::neg_infinity(),
        };
    }
    let mut best = 0;
    let mut best_reward = F::neg_infinity();
    for (i, &c) in candidates.iter().enumerate() {
        let r = expected_reward(c, ps, layout, tau, params.beta);
        if r > best_reward {
            best_reward = r;
            best = i;
        }
    }
    Proposal {
        agent_id: ps.agent_id,
        candidate: candidates[best],
        reward: best_reward,
    }
}

/// Uniform rejection sample inside the free space.
pub fn sample_free_point<F: Real>(free: &FreeSpace<F>, rng: &mut impl Rng) -> Option<Vec2<F>> {
    for _ in 0..10_000 {
        let p = Vec2::new(
            rng.gen_range(free.area.min.x..free.area.max.x),
            rng.gen_range(free.area.min.y..free.area.max.y),
        );
        if free.contains(p) {
            return Some(p);
        }
    }
    None
}

/// Global argmax over all broadcast proposals; ties break toward the lowest
/// agent id, so every agent computes the identical point.
pub fn consensus_select<F: Real>(proposals: &[Proposal<F>]) -> Option<Vec2<F>> {
    proposals
        .iter()
        .max_by(|a, b| {
            a.reward
                .partial_cmp(&b.reward)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(b.agent_id.cmp(&a.agent_id))
        })
        .map(|p| p.candidate)
}
