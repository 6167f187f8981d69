//! Exact dynamic programming over [`MdpSample`]s.

use serde::{Deserialize, Serialize};

use super::sampling::MdpSample;
use crate::{Error, Result};

const DISCOUNT_TOL: f64 = 1e-9;
const MAX_SWEEPS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Horizon {
    /// Undiscounted backups over this many steps.
    Finite(usize),
    /// Infinite-horizon discounting, iterated to a sup-norm change below 1e-9.
    Discounted(f64),
}

/// First-step action values, state values and greedy policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    /// `Q[s * n_actions + a]`; illegal actions hold `-inf`.
    pub q: Vec<f64>,
    pub values: Vec<f64>,
    /// Greedy action per state, ties toward the lowest index.
    pub policy: Vec<usize>,
}

/// Non-stationary greedy policy for every step of a finite horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteHorizonPolicy {
    pub horizon: usize,
    pub n_states: usize,
    actions: Vec<u16>,
    /// Optimal expected return from each state at step 0.
    pub values: Vec<f64>,
}

impl FiniteHorizonPolicy {
    /// Action at step `step` (0-based) in `state`; steps past the horizon reuse the last one.
    pub fn action(&self, step: usize, state: usize) -> usize {
        let h = step.min(self.horizon.saturating_sub(1));
        self.actions[h * self.n_states + state] as usize
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Expected next value of a row after moving up to `radius / 2` mass onto the
/// best state, taken from the worst states first.
fn optimistic_expectation(row: &[f64], v: &[f64], ascending: &[usize], radius: f64) -> f64 {
    let base = dot(row, v);
    if radius <= 0.0 {
        return base;
    }
    let best = *ascending.last().expect("nonempty state set");
    let room = 1.0 - row[best];
    if room <= 0.0 {
        return base;
    }
    if radius / 2.0 >= room {
        return v[best];
    }
    let added = radius / 2.0;
    let mut value = base + added * v[best];
    let mut excess = added;
    for &s in ascending {
        if excess <= 0.0 || s == best {
            break;
        }
        let take = row[s].min(excess);
        value -= take * v[s];
        excess -= take;
    }
    value
}

/// Compressed rows, kept when the transition matrix is mostly zeros.
struct SparseRows {
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseRows {
    fn build(mdp: &MdpSample) -> Option<Self> {
        let nnz = mdp.p.iter().filter(|&&x| x != 0.0).count();
        if nnz * 4 > mdp.p.len() {
            return None;
        }
        let pairs = mdp.n_states * mdp.n_actions;
        let mut rows = SparseRows { offsets: Vec::with_capacity(pairs + 1), cols: Vec::with_capacity(nnz), vals: Vec::with_capacity(nnz) };
        rows.offsets.push(0);
        for row in mdp.p.chunks_exact(mdp.n_states) {
            for (j, &x) in row.iter().enumerate() {
                if x != 0.0 {
                    rows.cols.push(j as u32);
                    rows.vals.push(x);
                }
            }
            rows.offsets.push(rows.cols.len());
        }
        Some(rows)
    }

    #[inline]
    fn dot(&self, pair: usize, v: &[f64]) -> f64 {
        let (lo, hi) = (self.offsets[pair], self.offsets[pair + 1]);
        self.cols[lo..hi].iter().zip(&self.vals[lo..hi]).map(|(&j, &x)| x * v[j as usize]).sum()
    }
}

struct Backup<'a> {
    mdp: &'a MdpSample,
    radius: Option<&'a [f64]>,
    ascending: Vec<usize>,
    sparse: Option<SparseRows>,
}

impl<'a> Backup<'a> {
    fn new(mdp: &'a MdpSample, radius: Option<&'a [f64]>) -> Result<Self> {
        mdp.validate()?;
        if let Some(r) = radius {
            if r.len() != mdp.n_states * mdp.n_actions {
                return Err(Error::ShapeMismatch { expected: mdp.n_states * mdp.n_actions, actual: r.len() });
            }
        }
        let sparse = if radius.is_none() { SparseRows::build(mdp) } else { None };
        Ok(Self { mdp, radius, ascending: (0..mdp.n_states).collect(), sparse })
    }

    /// One Bellman backup `Q = R + scale * P next`, writing Q, values and policy.
    fn run(&mut self, next: &[f64], scale: f64, q: &mut [f64], values: &mut [f64], policy: &mut [usize]) {
        let m = self.mdp;
        if self.radius.is_some() {
            self.ascending.sort_by(|&a, &b| next[a].total_cmp(&next[b]));
        }
        for s in 0..m.n_states {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for a in 0..m.n_actions {
                let i = m.pair(s, a);
                if !m.legal[i] {
                    q[i] = f64::NEG_INFINITY;
                    continue;
                }
                let ev = match (self.radius, &self.sparse) {
                    (Some(r), _) => optimistic_expectation(m.row(s, a), next, &self.ascending, r[i]),
                    (None, Some(sp)) => sp.dot(i, next),
                    (None, None) => dot(m.row(s, a), next),
                };
                let value = m.r[i] + scale * ev;
                q[i] = value;
                if value > best {
                    best = value;
                    arg = a;
                }
            }
            values[s] = if best.is_finite() { best } else { 0.0 };
            policy[s] = arg;
        }
    }
}

/// Dynamic programming over `mdp`, optionally with L1-ball transition optimism
/// (`radius` per `(s, a)`).
pub fn value_iteration(mdp: &MdpSample, horizon: Horizon, radius: Option<&[f64]>) -> Result<Plan> {
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let mut backup = Backup::new(mdp, radius)?;
    let mut q = vec![0.0; ns * na];
    let mut values = vec![0.0; ns];
    let mut next = vec![0.0; ns];
    let mut policy = vec![0; ns];
    match horizon {
        Horizon::Finite(h) => {
            if h == 0 {
                return Err(Error::InvalidParameter("finite horizon must be at least 1".into()));
            }
            for _ in 0..h {
                backup.run(&next, 1.0, &mut q, &mut values, &mut policy);
                std::mem::swap(&mut next, &mut values);
            }
            std::mem::swap(&mut next, &mut values);
        }
        Horizon::Discounted(gamma) => {
            if !(0.0..1.0).contains(&gamma) {
                return Err(Error::InvalidParameter(format!("discount must lie in [0, 1), got {gamma}")));
            }
            for sweep in 0.. {
                backup.run(&next, gamma, &mut q, &mut values, &mut policy);
                let change = values.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                std::mem::swap(&mut next, &mut values);
                if change < DISCOUNT_TOL || sweep >= MAX_SWEEPS {
                    break;
                }
            }
            std::mem::swap(&mut next, &mut values);
        }
    }
    Ok(Plan { q, values, policy })
}

/// Full non-stationary policy for a finite horizon.
pub fn finite_horizon_policy(mdp: &MdpSample, horizon: usize, radius: Option<&[f64]>) -> Result<FiniteHorizonPolicy> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("finite horizon must be at least 1".into()));
    }
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let mut backup = Backup::new(mdp, radius)?;
    let mut q = vec![0.0; ns * na];
    let mut values = vec![0.0; ns];
    let mut next = vec![0.0; ns];
    let mut policy = vec![0; ns];
    let mut actions = vec![0u16; horizon * ns];
    for h in (0..horizon).rev() {
        backup.run(&next, 1.0, &mut q, &mut values, &mut policy);
        for (dst, &a) in actions[h * ns..(h + 1) * ns].iter_mut().zip(&policy) {
            *dst = a as u16;
        }
        std::mem::swap(&mut next, &mut values);
    }
    Ok(FiniteHorizonPolicy { horizon, n_states: ns, actions, values: next })
}

impl Plan {
    pub fn q_row(&self, state: usize, n_actions: usize) -> &[f64] {
        &self.q[state * n_actions..(state + 1) * n_actions]
    }
}
