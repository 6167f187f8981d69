//! Maps from posterior beliefs to concrete MDPs.

use rand::RngCore;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::posterior::TabularPosterior;
use crate::rng::{keyed_exp, keyed_normal};
use crate::{Error, Result};

/// Default UCRL confidence parameter.
pub const DEFAULT_DELTA: f64 = 0.05;

const STOCHASTIC_TOL: f64 = 1e-9;

/// A fully specified finite MDP: dense `P[s, a, s']`, mean rewards `R[s, a]`
/// and a legality mask. States without legal actions are absorbing with value 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpSample {
    pub n_states: usize,
    pub n_actions: usize,
    pub p: Vec<f64>,
    pub r: Vec<f64>,
    pub legal: Vec<bool>,
}

impl MdpSample {
    /// All-zero transitions and rewards with every action legal.
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            p: vec![0.0; n_states * n_actions * n_states],
            r: vec![0.0; n_states * n_actions],
            legal: vec![true; n_states * n_actions],
        }
    }

    #[inline]
    pub fn pair(&self, state: usize, action: usize) -> usize {
        state * self.n_actions + action
    }

    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        let start = self.pair(state, action) * self.n_states;
        &self.p[start..start + self.n_states]
    }

    pub fn row_mut(&mut self, state: usize, action: usize) -> &mut [f64] {
        let start = self.pair(state, action) * self.n_states;
        &mut self.p[start..start + self.n_states]
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.r[self.pair(state, action)]
    }

    pub fn is_legal(&self, state: usize, action: usize) -> bool {
        self.legal[self.pair(state, action)]
    }

    /// Sets a deterministic transition.
    pub fn set_deterministic(&mut self, state: usize, action: usize, next: usize, reward: f64) {
        let row = self.row_mut(state, action);
        row.fill(0.0);
        row[next] = 1.0;
        let i = self.pair(state, action);
        self.r[i] = reward;
    }

    /// Every legal row must be a probability vector.
    pub fn validate(&self) -> Result<()> {
        let pairs = self.n_states * self.n_actions;
        if self.p.len() != pairs * self.n_states {
            return Err(Error::ShapeMismatch { expected: pairs * self.n_states, actual: self.p.len() });
        }
        if self.r.len() != pairs || self.legal.len() != pairs {
            return Err(Error::ShapeMismatch { expected: pairs, actual: self.r.len() });
        }
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                if !self.is_legal(s, a) {
                    continue;
                }
                let row = self.row(s, a);
                let sum: f64 = row.iter().sum();
                if row.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > STOCHASTIC_TOL {
                    return Err(Error::NotStochastic { state: s, action: a, sum });
                }
            }
        }
        Ok(())
    }
}

/// An MDP plus per-pair L1 radii for optimistic planning.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimisticMdp {
    pub mdp: MdpSample,
    pub radius: Vec<f64>,
}

/// An agent's tabular seed: per `(s, a, s')` an unbounded Exp(1) stream and per
/// `(s, a)` one standard normal draw, all derived from `master`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TabularSeed {
    pub master: u64,
}

const EXP_TAG: u64 = 0xE;
const GAUSS_TAG: u64 = 0x6;

impl TabularSeed {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    /// Entry `position` of the exponential stream for `(s, a, s')`.
    #[inline]
    pub fn exp_stream(&self, state: usize, action: usize, next: usize, position: u64) -> f64 {
        keyed_exp(&[self.master, EXP_TAG, state as u64, action as u64, next as u64, position])
    }

    /// Gamma(`count`, 1) variate: the sum of the first `count` stream entries.
    pub fn gamma(&self, state: usize, action: usize, next: usize, count: u64) -> f64 {
        if count == 0 {
            return 0.0;
        }
        let rest: f64 = (1..count).fold(0.0, |acc, i| acc + self.exp_stream(state, action, next, i));
        self.exp_stream(state, action, next, 0) + rest
    }

    #[inline]
    pub fn gauss(&self, state: usize, action: usize) -> f64 {
        keyed_normal(&[self.master, GAUSS_TAG, state as u64, action as u64])
    }
}

/// Thompson draw: a Dirichlet row per `(s, a)` and a Gaussian mean reward.
pub fn sample_mdp<R: RngCore + ?Sized>(post: &TabularPosterior, rng: &mut R) -> MdpSample {
    let mut out = MdpSample::zeros(post.n_states(), post.n_actions());
    sample_mdp_into(post, rng, &mut out);
    out
}

/// In-place variant of [`sample_mdp`] reusing `out`'s storage.
pub fn sample_mdp_into<R: RngCore + ?Sized>(post: &TabularPosterior, rng: &mut R, out: &mut MdpSample) {
    let (ns, na) = (post.n_states(), post.n_actions());
    debug_assert_eq!(out.p.len(), ns * na * ns);
    for s in 0..ns {
        for a in 0..na {
            let alpha = post.transitions.row(s, a);
            let row = out.row_mut(s, a);
            let mut total = 0.0;
            for (dst, &al) in row.iter_mut().zip(alpha) {
                let g = if al == 1.0 {
                    Exp1.sample(rng)
                } else {
                    Gamma::new(al, 1.0).expect("positive concentration").sample(rng)
                };
                *dst = g;
                total += g;
            }
            normalize(row, total);
            let i = s * na + a;
            let z: f64 = StandardNormal.sample(rng);
            out.r[i] = post.rewards.mu[i] + post.rewards.var[i].sqrt() * z;
        }
    }
}

fn normalize(row: &mut [f64], total: f64) {
    let inv = 1.0 / total;
    row.iter_mut().for_each(|x| *x *= inv);
}

/// Seed sampling: exponential-Dirichlet rows and standard-Gaussian rewards,
/// a deterministic function of `(posterior, seed)`.
pub fn seed_sample_mdp(post: &TabularPosterior, seed: &TabularSeed) -> Result<MdpSample> {
    let (ns, na) = (post.n_states(), post.n_actions());
    let mut out = MdpSample::zeros(ns, na);
    for s in 0..ns {
        for a in 0..na {
            let alpha = post.transitions.row(s, a);
            let row = out.row_mut(s, a);
            for (next, (dst, &al)) in row.iter_mut().zip(alpha).enumerate() {
                let count = integer_concentration(al)?;
                *dst = seed.gamma(s, a, next, count);
            }
            let total = row.iter().fold(0.0, |acc, &g| acc + g);
            normalize(row, total);
            let i = s * na + a;
            out.r[i] = post.rewards.mu[i] + post.rewards.var[i].sqrt() * seed.gauss(s, a);
        }
    }
    Ok(out)
}

pub(crate) fn integer_concentration(alpha: f64) -> Result<u64> {
    if alpha >= 1.0 && alpha.fract() == 0.0 && alpha < 2f64.powi(53) {
        Ok(alpha as u64)
    } else {
        Err(Error::NonIntegerConcentration(alpha))
    }
}

/// Posterior-mean MDP: normalized concentrations and mean rewards.
pub fn expected_mdp(post: &TabularPosterior) -> MdpSample {
    let (ns, na) = (post.n_states(), post.n_actions());
    let mut out = MdpSample::zeros(ns, na);
    for s in 0..ns {
        for a in 0..na {
            let alpha = post.transitions.row(s, a);
            let total: f64 = alpha.iter().sum();
            for (dst, &al) in out.row_mut(s, a).iter_mut().zip(alpha) {
                *dst = al / total;
            }
        }
    }
    out.r.copy_from_slice(&post.rewards.mu);
    out
}

/// Deterministic optimistic MDP in the UCRL2 shape: rewards get the bonus
/// `sqrt(2 ln(1/δ) var)` and each transition row may move within an L1 ball of
/// radius `sqrt(2 (|S| ln 2 + ln(1/δ)) / max(1, n(s, a)))` around the posterior mean.
pub fn optimistic_mdp(post: &TabularPosterior, delta: f64) -> Result<OptimisticMdp> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    let mut mdp = expected_mdp(post);
    let ns = post.n_states();
    let log_inv_delta = (1.0 / delta).ln();
    for (r, var) in mdp.r.iter_mut().zip(&post.rewards.var) {
        *r += (2.0 * log_inv_delta * var).sqrt();
    }
    let mut radius = vec![0.0; ns * post.n_actions()];
    for s in 0..ns {
        for a in 0..post.n_actions() {
            let n = post.transitions.count(s, a).max(1) as f64;
            radius[s * post.n_actions() + a] =
                (2.0 * (ns as f64 * std::f64::consts::LN_2 + log_inv_delta) / n).sqrt();
        }
    }
    Ok(OptimisticMdp { mdp, radius })
}
