//! Toy chain problems: the bipolar chain and parallel chains.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Environment, Reveal, Step, Tabulated};
use crate::{Error, Result};

pub const INNER_WEIGHT: f64 = -0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Left,
    Right,
}

impl Direction {
    pub fn from_action(action: usize) -> Result<Self> {
        match action {
            0 => Ok(Direction::Left),
            1 => Ok(Direction::Right),
            _ => Err(Error::OutOfRange { index: action, size: 2 }),
        }
    }
}

/// Bipolar chain with `N` vertices; endpoints 0 and N-1 are absorbing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n_vertices: usize,
    pub theta_left: f64,
    pub theta_right: f64,
    pub inner_weight: f64,
    pub start_vertex: usize,
}

impl ChainSpec {
    /// `left_positive` selects `θ_L = N, θ_R = -N`; otherwise the signs flip.
    pub fn new(n_vertices: usize, left_positive: bool) -> Result<Self> {
        if n_vertices < 4 || n_vertices % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "bipolar chain needs an even vertex count >= 4, got {n_vertices}"
            )));
        }
        let n = n_vertices as f64;
        let theta_left = if left_positive { n } else { -n };
        Ok(Self {
            n_vertices,
            theta_left,
            theta_right: -theta_left,
            inner_weight: INNER_WEIGHT,
            start_vertex: n_vertices / 2,
        })
    }

    /// Draws the sign with probability one half each.
    pub fn sample<R: Rng + ?Sized>(n_vertices: usize, rng: &mut R) -> Result<Self> {
        Self::new(n_vertices, rng.random_bool(0.5))
    }

    pub fn is_absorbing(&self, vertex: usize) -> bool {
        vertex == 0 || vertex + 1 == self.n_vertices
    }

    pub fn step(&self, vertex: usize, dir: Direction) -> Result<Step<usize>> {
        if vertex >= self.n_vertices {
            return Err(Error::OutOfRange { index: vertex, size: self.n_vertices });
        }
        if self.is_absorbing(vertex) {
            return Err(Error::IllegalMove(format!("vertex {vertex} is absorbing")));
        }
        let last = self.n_vertices - 1;
        let next = match dir {
            Direction::Left => vertex - 1,
            Direction::Right => vertex + 1,
        };
        let reward = match next {
            0 => self.theta_left,
            n if n == last => self.theta_right,
            _ => self.inner_weight,
        };
        let terminal = self.is_absorbing(next);
        Ok(Step {
            next,
            reward,
            terminal,
            reveal: terminal.then_some(Reveal::Bipolar {
                theta_left: self.theta_left,
                theta_right: self.theta_right,
            }),
        })
    }
}

/// Environment adapter: action 0 moves left, action 1 moves right.
#[derive(Debug, Clone)]
pub struct BipolarChain {
    pub spec: ChainSpec,
}

impl Environment for BipolarChain {
    type State = usize;

    fn n_actions(&self) -> usize {
        2
    }

    fn legal(&self, state: &usize, _action: usize) -> bool {
        !self.spec.is_absorbing(*state)
    }

    fn initial_state<R: Rng + ?Sized>(&self, _rng: &mut R) -> usize {
        self.spec.start_vertex
    }

    fn step(&self, state: &usize, action: usize) -> Result<Step<usize>> {
        self.spec.step(*state, Direction::from_action(action)?)
    }

    fn revealed_edges(&self, reveal: &Reveal) -> Vec<(usize, usize, f64, usize, bool)> {
        match *reveal {
            Reveal::Bipolar { theta_left, theta_right } => {
                let last = self.spec.n_vertices - 1;
                vec![(1, 0, theta_left, 0, true), (last - 1, 1, theta_right, last, true)]
            }
            Reveal::Chain { .. } => Vec::new(),
        }
    }
}

impl Tabulated for BipolarChain {
    fn n_states(&self) -> usize {
        self.spec.n_vertices
    }

    fn index(&self, state: &usize) -> usize {
        *state
    }
}

/// Parallel chains: pick one of `C` chains of length `L` at the source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelChainsSpec {
    pub n_chains: usize,
    pub chain_length: usize,
    pub sigma0_sq: f64,
    /// Final-edge weight per chain (0-based).
    pub final_rewards: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParallelNode {
    Source,
    /// `depth` runs from 1 (first vertex after the source) to `L` (chain end).
    At { chain: usize, depth: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParallelAction {
    Choose(usize),
    Advance,
}

impl ParallelChainsSpec {
    /// Prior variance of chain `c` (0-based): `sigma0_sq + c + 1`.
    pub fn prior_var(&self, chain: usize) -> f64 {
        self.sigma0_sq + (chain + 1) as f64
    }

    pub fn new(n_chains: usize, chain_length: usize, sigma0_sq: f64, final_rewards: Vec<f64>) -> Result<Self> {
        if n_chains == 0 || chain_length == 0 {
            return Err(Error::InvalidParameter("need at least one chain of length >= 1".into()));
        }
        if !(sigma0_sq >= 0.0) {
            return Err(Error::InvalidParameter(format!("sigma0_sq must be >= 0, got {sigma0_sq}")));
        }
        if final_rewards.len() != n_chains {
            return Err(Error::ShapeMismatch { expected: n_chains, actual: final_rewards.len() });
        }
        Ok(Self { n_chains, chain_length, sigma0_sq, final_rewards })
    }

    /// Draws `θ_c ~ N(0, σ0² + c)` for `c = 1..C`.
    pub fn sample<R: Rng + ?Sized>(
        n_chains: usize,
        chain_length: usize,
        sigma0_sq: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let rewards = (0..n_chains)
            .map(|c| {
                let sd = (sigma0_sq + (c + 1) as f64).sqrt();
                Normal::new(0.0, sd)
                    .map(|d| d.sample(rng))
                    .map_err(|e| Error::InvalidParameter(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n_chains, chain_length, sigma0_sq, rewards)
    }

    pub fn n_nodes(&self) -> usize {
        1 + self.n_chains * self.chain_length
    }

    pub fn node_index(&self, node: ParallelNode) -> usize {
        match node {
            ParallelNode::Source => 0,
            ParallelNode::At { chain, depth } => 1 + chain * self.chain_length + (depth - 1),
        }
    }

    pub fn node_at(&self, index: usize) -> Result<ParallelNode> {
        if index == 0 {
            return Ok(ParallelNode::Source);
        }
        if index >= self.n_nodes() {
            return Err(Error::OutOfRange { index, size: self.n_nodes() });
        }
        let i = index - 1;
        Ok(ParallelNode::At { chain: i / self.chain_length, depth: i % self.chain_length + 1 })
    }

    pub fn is_end(&self, node: ParallelNode) -> bool {
        matches!(node, ParallelNode::At { depth, .. } if depth == self.chain_length)
    }

    pub fn step(&self, node: ParallelNode, action: ParallelAction) -> Result<Step<ParallelNode>> {
        let next = match (node, action) {
            (ParallelNode::Source, ParallelAction::Choose(c)) if c < self.n_chains => {
                ParallelNode::At { chain: c, depth: 1 }
            }
            (ParallelNode::Source, ParallelAction::Choose(c)) => {
                return Err(Error::OutOfRange { index: c, size: self.n_chains })
            }
            (ParallelNode::Source, ParallelAction::Advance) => {
                return Err(Error::IllegalMove("must choose a chain at the source".into()))
            }
            (n @ ParallelNode::At { .. }, _) if self.is_end(n) => {
                return Err(Error::IllegalMove("chain end is absorbing".into()))
            }
            (ParallelNode::At { chain, depth }, ParallelAction::Advance) => {
                ParallelNode::At { chain, depth: depth + 1 }
            }
            (ParallelNode::At { chain, .. }, ParallelAction::Choose(c)) => {
                return Err(Error::IllegalMove(format!(
                    "cannot switch from chain {chain} to chain {c}"
                )))
            }
        };
        let terminal = self.is_end(next);
        let (reward, reveal) = match next {
            ParallelNode::At { chain, .. } if terminal => {
                let theta = self.final_rewards[chain];
                (theta, Some(Reveal::Chain { chain, theta }))
            }
            _ => (0.0, None),
        };
        Ok(Step { next, reward, terminal, reveal })
    }
}

/// Environment adapter over node indices. At the source, action `c` chooses
/// chain `c`; inside a chain only action 0 (advance) is legal.
#[derive(Debug, Clone)]
pub struct ParallelChains {
    pub spec: ParallelChainsSpec,
}

impl Environment for ParallelChains {
    type State = usize;

    fn n_actions(&self) -> usize {
        self.spec.n_chains
    }

    fn legal(&self, state: &usize, action: usize) -> bool {
        match self.spec.node_at(*state) {
            Ok(ParallelNode::Source) => action < self.spec.n_chains,
            Ok(node) => action == 0 && !self.spec.is_end(node),
            Err(_) => false,
        }
    }

    fn initial_state<R: Rng + ?Sized>(&self, _rng: &mut R) -> usize {
        0
    }

    fn step(&self, state: &usize, action: usize) -> Result<Step<usize>> {
        let node = self.spec.node_at(*state)?;
        let act = match node {
            ParallelNode::Source => ParallelAction::Choose(action),
            ParallelNode::At { .. } if action == 0 => ParallelAction::Advance,
            ParallelNode::At { .. } => ParallelAction::Choose(action),
        };
        let s = self.spec.step(node, act)?;
        Ok(Step {
            next: self.spec.node_index(s.next),
            reward: s.reward,
            terminal: s.terminal,
            reveal: s.reveal,
        })
    }

    fn revealed_edges(&self, reveal: &Reveal) -> Vec<(usize, usize, f64, usize, bool)> {
        match *reveal {
            Reveal::Chain { chain, theta } if chain < self.spec.n_chains => {
                let l = self.spec.chain_length;
                let end = self.spec.node_index(ParallelNode::At { chain, depth: l });
                let (from, action) = if l == 1 { (0, chain) } else { (end - 1, 0) };
                vec![(from, action, theta, end, true)]
            }
            _ => Vec::new(),
        }
    }
}

impl Tabulated for ParallelChains {
    fn n_states(&self) -> usize {
        self.spec.n_nodes()
    }

    fn index(&self, state: &usize) -> usize {
        *state
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bipolar_inner_and_endpoint_steps() {
        let spec = ChainSpec::new(50, true).unwrap();
        let s = spec.step(25, Direction::Right).unwrap();
        assert_eq!((s.next, s.reward, s.terminal, s.reveal), (26, -0.1, false, None));

        let s = spec.step(1, Direction::Left).unwrap();
        assert_eq!((s.next, s.reward, s.terminal), (0, 50.0, true));
        assert_eq!(s.reveal, Some(Reveal::Bipolar { theta_left: 50.0, theta_right: -50.0 }));

        let s = spec.step(48, Direction::Right).unwrap();
        assert_eq!((s.next, s.reward, s.terminal), (49, -50.0, true));
        assert!(s.reveal.is_some());

        assert!(spec.step(0, Direction::Right).is_err());
        assert!(spec.step(49, Direction::Left).is_err());
        assert!(ChainSpec::new(7, true).is_err());
    }

    /// Enumerates the straight walk and compares with the closed form.
    #[test]
    fn straight_walk_reward_sum() {
        for n in [6usize, 10, 50] {
            let spec = ChainSpec::new(n, false).unwrap();
            let (mut v, mut total) = (spec.start_vertex, 0.0);
            loop {
                let s = spec.step(v, Direction::Right).unwrap();
                total += s.reward;
                v = s.next;
                if s.terminal {
                    break;
                }
            }
            let expected = (n as f64 / 2.0 - 2.0) * -0.1 + spec.theta_right;
            assert!((total - expected).abs() < 1e-9, "n={n}: {total} vs {expected}");
        }
    }

    fn spec4() -> ParallelChainsSpec {
        ParallelChainsSpec::new(4, 4, 100.0, vec![1.0, 7.3, -2.0, 0.5]).unwrap()
    }

    #[test]
    fn parallel_chain_moves() {
        let spec = spec4();
        let s = spec.step(ParallelNode::Source, ParallelAction::Choose(1)).unwrap();
        assert_eq!(s.next, ParallelNode::At { chain: 1, depth: 1 });
        assert_eq!((s.reward, s.terminal, s.reveal), (0.0, false, None));

        let s = spec.step(ParallelNode::At { chain: 1, depth: 3 }, ParallelAction::Advance).unwrap();
        assert_eq!((s.reward, s.terminal), (7.3, true));
        assert_eq!(s.reveal, Some(Reveal::Chain { chain: 1, theta: 7.3 }));

        assert!(spec
            .step(ParallelNode::At { chain: 0, depth: 1 }, ParallelAction::Choose(2))
            .is_err());
        assert!(spec.step(ParallelNode::Source, ParallelAction::Advance).is_err());
    }

    #[test]
    fn parallel_node_indexing_round_trips() {
        let spec = spec4();
        assert_eq!(spec.n_nodes(), 17);
        for i in 0..spec.n_nodes() {
            assert_eq!(spec.node_index(spec.node_at(i).unwrap()), i);
        }
    }

    #[test]
    fn parallel_adapter_rejects_switching() {
        let env = ParallelChains { spec: spec4() };
        let at = env.step(&0, 2).unwrap().next;
        assert!(env.legal(&at, 0));
        assert!(!env.legal(&at, 1));
        assert!(env.step(&at, 1).is_err());
        assert_eq!(env.step(&at, 0).unwrap().reward, 0.0);
    }

    #[test]
    fn sampled_rewards_have_growing_variance() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 20_000;
        let mut sq = [0.0f64; 3];
        for _ in 0..n {
            let spec = ParallelChainsSpec::sample(3, 2, 1.0, &mut rng).unwrap();
            for c in 0..3 {
                sq[c] += spec.final_rewards[c].powi(2);
            }
        }
        for c in 0..3 {
            let var = sq[c] / n as f64;
            let target = 1.0 + (c + 1) as f64;
            assert!((var / target - 1.0).abs() < 0.05, "chain {c}: {var} vs {target}");
        }
    }
}
