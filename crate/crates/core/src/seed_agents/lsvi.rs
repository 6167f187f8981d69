use super::buffer::BufferState;
use super::family::OneHotFamily;
use super::seed::AgentSeed;
use crate::envs::Transition;
use crate::rvf::RegConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SeedLsviConfig {
    pub planning_horizon: usize,
    pub noise_var: f64,
    pub prior_var: f64,
}

impl SeedLsviConfig {
    pub fn validate(&self) -> Result<()> {
        if self.planning_horizon == 0 {
            return Err(Error::InvalidParameter("planning horizon must be at least 1".into()));
        }
        RegConfig { noise_var: self.noise_var, prior_var: self.prior_var, anchor: vec![] }.validate()
    }
}

/// Per-agent sufficient statistics of the buffer under one-hot features: for
/// each `(s, a)` the visit count, the sum of perturbed rewards `r_j + z_{k,j}`
/// and the counts of non-terminal successor states.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotStats {
    pub count: Vec<f64>,
    pub target_sum: Vec<f64>,
    pub successors: Vec<Vec<(u32, u32)>>,
    cursor: usize,
    overwrites_seen: usize,
}

impl OneHotStats {
    pub fn new(family: &OneHotFamily) -> Self {
        let d = family.dim();
        Self { count: vec![0.0; d], target_sum: vec![0.0; d], successors: vec![Vec::new(); d], cursor: 0, overwrites_seen: 0 }
    }

    fn add(&mut self, family: &OneHotFamily, t: &Transition<usize>, z: f64) -> Result<()> {
        if t.state >= family.n_states || t.next_state >= family.n_states {
            return Err(Error::OutOfRange { index: t.state.max(t.next_state), size: family.n_states });
        }
        if t.action >= family.n_actions {
            return Err(Error::OutOfRange { index: t.action, size: family.n_actions });
        }
        let i = family.index(t.state, t.action);
        self.count[i] += 1.0;
        self.target_sum[i] += t.reward + z;
        if !t.terminal {
            let next = t.next_state as u32;
            match self.successors[i].iter_mut().find(|(s, _)| *s == next) {
                Some((_, c)) => *c += 1,
                None => self.successors[i].push((next, 1)),
            }
        }
        Ok(())
    }

    /// Brings the statistics up to date with `buf`, rebuilding from scratch if
    /// slots were overwritten since the last call.
    pub fn sync(&mut self, family: &OneHotFamily, buf: &BufferState<usize>, seed: &AgentSeed) -> Result<()> {
        if buf.overwrites != self.overwrites_seen || self.cursor > buf.slots.len() {
            *self = Self::new(family);
            self.overwrites_seen = buf.overwrites;
        }
        for t in &buf.slots[self.cursor..] {
            self.add(family, t, seed.noise(t.obs_index))?;
        }
        self.cursor = buf.slots.len();
        Ok(())
    }
}

/// Backward recursion of perturbed regularized least squares from `θ̃_H = 0`.
/// One-hot features make the normal equations diagonal, so every weight solves
/// independently: `θ_i = ((Σ y_j)/v + θ̂_i/λ) / (n_i/v + 1/λ)`.
pub fn lsvi_from_stats(family: &OneHotFamily, stats: &OneHotStats, seed: &AgentSeed, cfg: &SeedLsviConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let d = family.dim();
    if seed.theta_hat.len() != d {
        return Err(Error::ShapeMismatch { expected: d, actual: seed.theta_hat.len() });
    }
    let (inv_v, inv_l) = (1.0 / cfg.noise_var, 1.0 / cfg.prior_var);
    let mut theta = vec![0.0; d];
    let mut next_v = vec![0.0; family.n_states];
    for h in (0..cfg.planning_horizon).rev() {
        if h + 1 < cfg.planning_horizon {
            for (s, v) in next_v.iter_mut().enumerate() {
                *v = family.max_q(&theta, s);
            }
        }
        for i in 0..d {
            let boot: f64 = stats.successors[i].iter().map(|&(s, c)| c as f64 * next_v[s as usize]).sum();
            theta[i] = ((stats.target_sum[i] + boot) * inv_v + seed.theta_hat[i] * inv_l) / (stats.count[i] * inv_v + inv_l);
        }
    }
    Ok(theta)
}

/// Seed LSVI on a buffer snapshot.
pub fn seed_lsvi_plan(buf: &BufferState<usize>, seed: &AgentSeed, family: &OneHotFamily, cfg: &SeedLsviConfig) -> Result<Vec<f64>> {
    let mut stats = OneHotStats::new(family);
    stats.sync(family, buf, seed)?;
    lsvi_from_stats(family, &stats, seed, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{BipolarChain, ChainSpec, Environment};
    use crate::rvf::{one_hot, regularized_lsq_solve};
    use crate::seed_agents::SharedBuffer;
    use crate::tabular::{value_iteration, Belief, ChainBelief, Horizon};

    fn tr(s: usize, a: usize, r: f64, s2: usize, terminal: bool) -> Transition<usize> {
        Transition { state: s, action: a, reward: r, next_state: s2, terminal, agent_id: 0, obs_index: 0, time: 0.0 }
    }

    fn state(ts: &[Transition<usize>]) -> BufferState<usize> {
        let buf = SharedBuffer::new(None).unwrap();
        for t in ts {
            buf.append(t.clone(), None).unwrap();
        }
        let st = buf.read().clone();
        st
    }

    fn cfg(h: usize, v: f64, l: f64) -> SeedLsviConfig {
        SeedLsviConfig { planning_horizon: h, noise_var: v, prior_var: l }
    }

    #[test]
    fn empty_buffer_returns_theta_hat() {
        let fam = OneHotFamily::new(4, 2, |_, _| true).unwrap();
        let seed = AgentSeed::new(0, 3, 1.0, &[0.0; 8], 2.0);
        let theta = seed_lsvi_plan(&state(&[]), &seed, &fam, &cfg(5, 1.0, 2.0)).unwrap();
        for (a, b) in theta.iter().zip(&seed.theta_hat) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_transition_horizon_one() {
        let fam = OneHotFamily::new(3, 2, |_, _| true).unwrap();
        let seed = AgentSeed { agent_id: 0, master: 0, noise_var: 1.0, theta_hat: vec![0.0; 6] };
        let z = seed.noise(0);
        let theta = seed_lsvi_plan(&state(&[tr(1, 0, 1.0 - z, 2, false)]), &seed, &fam, &cfg(1, 1.0, 1.0)).unwrap();
        for (i, &t) in theta.iter().enumerate() {
            let want = if i == fam.index(1, 0) { 0.5 } else { 0.0 };
            assert!((t - want).abs() < 1e-12, "{i}: {t}");
        }
    }

    #[test]
    fn one_step_matches_dense_solve() {
        let fam = OneHotFamily::new(3, 2, |_, _| true).unwrap();
        let seed = AgentSeed::new(0, 8, 0.3, &[0.0; 6], 4.0);
        let ts = vec![tr(0, 1, 0.5, 1, false), tr(2, 0, -1.0, 0, true), tr(0, 1, 0.7, 2, false)];
        let theta = seed_lsvi_plan(&state(&ts), &seed, &fam, &cfg(1, 0.3, 4.0)).unwrap();
        let x: Vec<Vec<f64>> = ts.iter().map(|t| one_hot(fam.index(t.state, t.action), 6).unwrap()).collect();
        let y: Vec<f64> = ts.iter().enumerate().map(|(j, t)| t.reward + seed.noise(j)).collect();
        let reg = RegConfig { noise_var: 0.3, prior_var: 4.0, anchor: seed.theta_hat.clone() };
        let dense = regularized_lsq_solve(&x, &y, &reg).unwrap();
        for (a, b) in theta.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn revealed_bipolar_chain_recovers_optimal_policy() {
        let n = 6;
        let env = BipolarChain { spec: ChainSpec::new(n, false).unwrap() };
        let fam = OneHotFamily::for_env(&env).unwrap();
        let mut ts = Vec::new();
        for _ in 0..50 {
            for s in 1..n - 1 {
                for a in 0..2 {
                    let step = env.step(&s, a).unwrap();
                    ts.push(tr(s, a, step.reward, step.next, step.terminal));
                }
            }
        }
        let seed = AgentSeed::new(0, 21, 0.01, &vec![0.0; fam.dim()], 1.0);
        let theta = seed_lsvi_plan(&state(&ts), &seed, &fam, &cfg(2 * n, 0.01, 1.0)).unwrap();
        let mut belief = ChainBelief::bipolar(n).unwrap();
        belief.reveal(&Reveal::Bipolar { theta_left: -6.0, theta_right: 6.0 }).unwrap();
        let plan = value_iteration(&belief.expected(), Horizon::Finite(2 * n), None).unwrap();
        for s in 1..n - 1 {
            assert_eq!(fam.greedy(&theta, s), plan.policy[s], "vertex {s}");
        }
    }

    use crate::envs::Reveal;

    #[test]
    fn incremental_sync_is_bit_identical() {
        let fam = OneHotFamily::new(4, 2, |_, _| true).unwrap();
        let seed = AgentSeed::new(0, 5, 0.2, &[0.0; 8], 3.0);
        let buf = SharedBuffer::new(None).unwrap();
        let mut stats = OneHotStats::new(&fam);
        for j in 0..30 {
            buf.append(tr(j % 4, j % 2, j as f64 * 0.1, (j + 1) % 4, j % 7 == 0), None).unwrap();
            stats.sync(&fam, &buf.read(), &seed).unwrap();
        }
        let c = cfg(6, 0.2, 3.0);
        assert_eq!(lsvi_from_stats(&fam, &stats, &seed, &c).unwrap(), seed_lsvi_plan(&buf.read(), &seed, &fam, &c).unwrap());
    }
}
