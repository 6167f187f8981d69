//! Shared beliefs as consumed by the tabular agents.
//!
//! [`TabularPosterior`] covers the swing-up task (unknown transitions and
//! rewards). [`ChainBelief`] covers the chain problems, where the structure is
//! known and only the endpoint weights are uncertain until revealed.

use std::collections::HashMap;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use super::posterior::TabularPosterior;
use super::sampling::{
    expected_mdp, integer_concentration, optimistic_mdp, sample_mdp_into, MdpSample, OptimisticMdp,
    TabularSeed,
};
use crate::envs::{ChainSpec, Direction, ParallelChainsSpec, Reveal, Transition};
use crate::rng::normal_cdf;
use crate::{Error, Result};

/// Operations the tabular strategies need from a shared belief.
pub trait Belief: Clone + Send + Sync {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn observe(&mut self, t: &Transition<usize>) -> Result<()>;
    fn reveal(&mut self, reveal: &Reveal) -> Result<()>;
    /// A correctly shaped MDP buffer (legality mask filled in).
    fn blank(&self) -> MdpSample;
    /// Independent posterior draw.
    fn thompson_into(&self, rng: &mut dyn RngCore, out: &mut MdpSample);
    /// Seeded posterior draw; `cache` belongs to the seed's owner.
    fn seeded_into(&self, seed: &TabularSeed, cache: &mut SeedCache, out: &mut MdpSample) -> Result<()>;
    fn optimistic(&self, delta: f64) -> Result<OptimisticMdp>;
    fn expected(&self) -> MdpSample;
}

/// Per-agent memo of seeded gamma variates. Holds the first exponential of every
/// stream and running sums of the later entries for observed cells, so a seeded
/// draw costs one pass over the table instead of re-reading whole streams.
#[derive(Debug, Clone, Default)]
pub struct SeedCache {
    first: Vec<f64>,
    rest: HashMap<usize, (u64, f64)>,
}

impl Belief for TabularPosterior {
    fn n_states(&self) -> usize {
        TabularPosterior::n_states(self)
    }

    fn n_actions(&self) -> usize {
        TabularPosterior::n_actions(self)
    }

    fn observe(&mut self, t: &Transition<usize>) -> Result<()> {
        TabularPosterior::observe(self, t)
    }

    fn reveal(&mut self, _reveal: &Reveal) -> Result<()> {
        Ok(())
    }

    fn blank(&self) -> MdpSample {
        MdpSample::zeros(self.n_states(), self.n_actions())
    }

    fn thompson_into(&self, rng: &mut dyn RngCore, out: &mut MdpSample) {
        sample_mdp_into(self, rng, out)
    }

    fn seeded_into(&self, seed: &TabularSeed, cache: &mut SeedCache, out: &mut MdpSample) -> Result<()> {
        let (ns, na) = (self.n_states(), self.n_actions());
        if cache.first.is_empty() {
            cache.first = Vec::with_capacity(ns * na * ns);
            for s in 0..ns {
                for a in 0..na {
                    for next in 0..ns {
                        cache.first.push(seed.exp_stream(s, a, next, 0));
                    }
                }
            }
        }
        for s in 0..ns {
            for a in 0..na {
                let pair = s * na + a;
                let start = pair * ns;
                let row = &mut out.p[start..start + ns];
                row.copy_from_slice(&cache.first[start..start + ns]);
                for &next in self.transitions.observed(s, a) {
                    let next = next as usize;
                    let count = integer_concentration(self.transitions.row(s, a)[next])?;
                    let entry = cache.rest.entry(start + next).or_insert((1, 0.0));
                    while entry.0 < count {
                        entry.1 += seed.exp_stream(s, a, next, entry.0);
                        entry.0 += 1;
                    }
                    row[next] += entry.1;
                }
                let total: f64 = row.iter().fold(0.0, |acc, &g| acc + g);
                let inv = 1.0 / total;
                row.iter_mut().for_each(|x| *x *= inv);
                out.r[pair] = self.rewards.mu[pair] + self.rewards.var[pair].sqrt() * seed.gauss(s, a);
            }
        }
        Ok(())
    }

    fn optimistic(&self, delta: f64) -> Result<OptimisticMdp> {
        optimistic_mdp(self, delta)
    }

    fn expected(&self) -> MdpSample {
        expected_mdp(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Uncertainty {
    /// Two endpoint edges of equal magnitude and opposite sign.
    Bipolar {
        left: (usize, usize),
        right: (usize, usize),
        magnitude: f64,
        p_left_positive: f64,
    },
    /// Independent Gaussian weight per chain's final edge.
    Parallel {
        edges: Vec<(usize, usize)>,
        mean: Vec<f64>,
        var: Vec<f64>,
    },
}

/// Known chain structure with uncertain endpoint weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainBelief {
    base: MdpSample,
    uncertainty: Uncertainty,
}

impl ChainBelief {
    /// Everything known except which endpoint carries `+N`, each with probability 1/2.
    pub fn bipolar(n_vertices: usize) -> Result<Self> {
        let spec = ChainSpec::new(n_vertices, true)?;
        let mut base = MdpSample::zeros(n_vertices, 2);
        for v in 0..n_vertices {
            for a in 0..2 {
                if spec.is_absorbing(v) {
                    base.set_deterministic(v, a, v, 0.0);
                    base.legal[v * 2 + a] = false;
                } else {
                    let step = spec.step(v, Direction::from_action(a)?)?;
                    let reward = if step.terminal { 0.0 } else { step.reward };
                    base.set_deterministic(v, a, step.next, reward);
                }
            }
        }
        Ok(Self {
            base,
            uncertainty: Uncertainty::Bipolar {
                left: (1, 0),
                right: (n_vertices - 2, 1),
                magnitude: n_vertices as f64,
                p_left_positive: 0.5,
            },
        })
    }

    /// Everything known except the final-edge weights, with prior `N(0, σ0² + c)`.
    pub fn parallel(n_chains: usize, chain_length: usize, sigma0_sq: f64) -> Result<Self> {
        let spec = ParallelChainsSpec::new(n_chains, chain_length, sigma0_sq, vec![0.0; n_chains])?;
        let ns = spec.n_nodes();
        let mut base = MdpSample::zeros(ns, n_chains);
        let mut edges = vec![(0, 0); n_chains];
        for s in 0..ns {
            let node = spec.node_at(s)?;
            for a in 0..n_chains {
                let action = match node {
                    crate::envs::ParallelNode::Source => crate::envs::ParallelAction::Choose(a),
                    _ if a == 0 => crate::envs::ParallelAction::Advance,
                    _ => {
                        base.set_deterministic(s, a, s, 0.0);
                        base.legal[s * n_chains + a] = false;
                        continue;
                    }
                };
                match spec.step(node, action) {
                    Ok(step) => {
                        let next = spec.node_index(step.next);
                        base.set_deterministic(s, a, next, 0.0);
                        if step.terminal {
                            if let crate::envs::ParallelNode::At { chain, .. } = step.next {
                                edges[chain] = (s, a);
                            }
                        }
                    }
                    Err(_) => {
                        base.set_deterministic(s, a, s, 0.0);
                        base.legal[s * n_chains + a] = false;
                    }
                }
            }
        }
        Ok(Self {
            base,
            uncertainty: Uncertainty::Parallel {
                edges,
                mean: vec![0.0; n_chains],
                var: (0..n_chains).map(|c| spec.prior_var(c)).collect(),
            },
        })
    }

    fn fill(&self, out: &mut MdpSample, mut weight: impl FnMut(usize, (usize, usize)) -> f64) {
        out.p.copy_from_slice(&self.base.p);
        out.r.copy_from_slice(&self.base.r);
        out.legal.copy_from_slice(&self.base.legal);
        match &self.uncertainty {
            Uncertainty::Bipolar { left, right, .. } => {
                let w = weight(0, *left);
                out.r[self.base.pair(left.0, left.1)] = w;
                out.r[self.base.pair(right.0, right.1)] = -w;
            }
            Uncertainty::Parallel { edges, .. } => {
                for (c, &edge) in edges.iter().enumerate() {
                    out.r[self.base.pair(edge.0, edge.1)] = weight(c, edge);
                }
            }
        }
    }

    /// Probability that the left endpoint pays `+N` (bipolar only).
    pub fn p_left_positive(&self) -> Option<f64> {
        match self.uncertainty {
            Uncertainty::Bipolar { p_left_positive, .. } => Some(p_left_positive),
            _ => None,
        }
    }

    /// Posterior mean and variance of each chain's final edge (parallel only).
    pub fn chain_moments(&self) -> Option<(&[f64], &[f64])> {
        match &self.uncertainty {
            Uncertainty::Parallel { mean, var, .. } => Some((mean, var)),
            _ => None,
        }
    }
}

impl Belief for ChainBelief {
    fn n_states(&self) -> usize {
        self.base.n_states
    }

    fn n_actions(&self) -> usize {
        self.base.n_actions
    }

    /// Inner edges are known, so ordinary observations carry no new information.
    fn observe(&mut self, t: &Transition<usize>) -> Result<()> {
        if t.state >= self.n_states() || t.next_state >= self.n_states() {
            return Err(Error::OutOfRange { index: t.state.max(t.next_state), size: self.n_states() });
        }
        Ok(())
    }

    fn reveal(&mut self, reveal: &Reveal) -> Result<()> {
        match (&mut self.uncertainty, reveal) {
            (Uncertainty::Bipolar { p_left_positive, .. }, Reveal::Bipolar { theta_left, .. }) => {
                *p_left_positive = if *theta_left > 0.0 { 1.0 } else { 0.0 };
                Ok(())
            }
            (Uncertainty::Parallel { mean, var, .. }, Reveal::Chain { chain, theta }) => {
                if *chain >= mean.len() {
                    return Err(Error::OutOfRange { index: *chain, size: mean.len() });
                }
                mean[*chain] = *theta;
                var[*chain] = 0.0;
                Ok(())
            }
            _ => Err(Error::InvalidParameter("reveal does not match the chain belief".into())),
        }
    }

    fn blank(&self) -> MdpSample {
        self.base.clone()
    }

    fn thompson_into(&self, rng: &mut dyn RngCore, out: &mut MdpSample) {
        match &self.uncertainty {
            Uncertainty::Bipolar { magnitude, p_left_positive, .. } => {
                let u: f64 = rng.random();
                let w = if u < *p_left_positive { *magnitude } else { -magnitude };
                self.fill(out, |_, _| w);
            }
            Uncertainty::Parallel { mean, var, .. } => {
                let draws: Vec<f64> = mean
                    .iter()
                    .zip(var)
                    .map(|(m, v)| {
                        let z: f64 = StandardNormal.sample(rng);
                        m + v.sqrt() * z
                    })
                    .collect();
                self.fill(out, |c, _| draws[c]);
            }
        }
    }

    fn seeded_into(&self, seed: &TabularSeed, _cache: &mut SeedCache, out: &mut MdpSample) -> Result<()> {
        match &self.uncertainty {
            Uncertainty::Bipolar { magnitude, p_left_positive, left, .. } => {
                let u = normal_cdf(seed.gauss(left.0, left.1));
                let w = if u < *p_left_positive { *magnitude } else { -magnitude };
                self.fill(out, |_, _| w);
            }
            Uncertainty::Parallel { mean, var, .. } => {
                self.fill(out, |c, (s, a)| mean[c] + var[c].sqrt() * seed.gauss(s, a));
            }
        }
        Ok(())
    }

    /// Each uncertain edge at its most favourable plausible value.
    fn optimistic(&self, delta: f64) -> Result<OptimisticMdp> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
        }
        let mut mdp = self.base.clone();
        let log_inv_delta = (1.0 / delta).ln();
        match &self.uncertainty {
            Uncertainty::Bipolar { left, right, magnitude, p_left_positive } => {
                let (l, r) = match *p_left_positive {
                    p if p >= 1.0 => (*magnitude, -magnitude),
                    p if p <= 0.0 => (-magnitude, *magnitude),
                    _ => (*magnitude, *magnitude),
                };
                let (li, ri) = (mdp.pair(left.0, left.1), mdp.pair(right.0, right.1));
                mdp.r[li] = l;
                mdp.r[ri] = r;
            }
            Uncertainty::Parallel { edges, mean, var } => {
                for (c, &(s, a)) in edges.iter().enumerate() {
                    let i = mdp.pair(s, a);
                    mdp.r[i] = mean[c] + (2.0 * log_inv_delta * var[c]).sqrt();
                }
            }
        }
        let radius = vec![0.0; mdp.r.len()];
        Ok(OptimisticMdp { mdp, radius })
    }

    fn expected(&self) -> MdpSample {
        let mut out = self.base.clone();
        match &self.uncertainty {
            Uncertainty::Bipolar { magnitude, p_left_positive, .. } => {
                let w = magnitude * (2.0 * p_left_positive - 1.0);
                self.fill(&mut out, |_, _| w);
            }
            Uncertainty::Parallel { mean, .. } => self.fill(&mut out, |c, _| mean[c]),
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{seed_sample_mdp, value_iteration, Horizon};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(s: usize, a: usize, r: f64, s2: usize) -> Transition<usize> {
        Transition { state: s, action: a, reward: r, next_state: s2, terminal: false, agent_id: 0, obs_index: 0, time: 0.0 }
    }

    #[test]
    fn cached_seed_draw_is_bit_identical() {
        let mut post = TabularPosterior::new(5, 2, 1.0).unwrap();
        let seed = TabularSeed::new(77);
        let mut cache = SeedCache::default();
        let mut out = post.blank();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for round in 0..4 {
            for _ in 0..25 {
                let (s, a, n) = (rng.random_range(0..5), rng.random_range(0..2), rng.random_range(0..5));
                post.observe(&tr(s, a, rng.random(), n)).unwrap();
            }
            post.seeded_into(&seed, &mut cache, &mut out).unwrap();
            assert_eq!(out, seed_sample_mdp(&post, &seed).unwrap(), "round {round}");
        }
    }

    #[test]
    fn bipolar_seed_commits_until_reveal() {
        let mut belief = ChainBelief::bipolar(10).unwrap();
        let seed = TabularSeed::new(3);
        let mut out = belief.blank();
        belief.seeded_into(&seed, &mut SeedCache::default(), &mut out).unwrap();
        let first = out.clone();
        belief.seeded_into(&seed, &mut SeedCache::default(), &mut out).unwrap();
        assert_eq!(first, out);
        assert_eq!(out.reward(1, 0), -out.reward(8, 1));
        belief.reveal(&Reveal::Bipolar { theta_left: -10.0, theta_right: 10.0 }).unwrap();
        belief.seeded_into(&seed, &mut SeedCache::default(), &mut out).unwrap();
        assert_eq!(out.reward(8, 1), 10.0);
        let plan = value_iteration(&out, Horizon::Finite(20), None).unwrap();
        assert_eq!(plan.policy[5], 1);
    }

    #[test]
    fn bipolar_seeds_split_evenly() {
        let belief = ChainBelief::bipolar(10).unwrap();
        let mut out = belief.blank();
        let left = (0..2000)
            .filter(|&k| {
                belief.seeded_into(&TabularSeed::new(k), &mut SeedCache::default(), &mut out).unwrap();
                out.reward(1, 0) > 0.0
            })
            .count();
        assert!((900..1100).contains(&left), "{left}");
    }

    #[test]
    fn parallel_belief_structure() {
        let mut belief = ChainBelief::parallel(4, 4, 100.0).unwrap();
        let m = belief.expected();
        m.validate().unwrap();
        assert_eq!(m.n_states, 17);
        // inside a chain only advancing is legal
        assert!(m.is_legal(1, 0) && !m.is_legal(1, 1));
        let opt = belief.optimistic(0.05).unwrap();
        // all chains optimistic, largest prior variance wins
        let plan = value_iteration(&opt.mdp, Horizon::Finite(4), None).unwrap();
        assert_eq!(plan.policy[0], 3);
        belief.reveal(&Reveal::Chain { chain: 3, theta: -40.0 }).unwrap();
        let plan = value_iteration(&belief.optimistic(0.05).unwrap().mdp, Horizon::Finite(4), None).unwrap();
        assert_eq!(plan.policy[0], 2);
        let (mean, var) = belief.chain_moments().unwrap();
        assert_eq!((mean[3], var[3]), (-40.0, 0.0));
    }
}
