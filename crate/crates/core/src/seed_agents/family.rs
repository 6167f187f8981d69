use crate::envs::Tabulated;
use crate::rvf::LinearParams;
use crate::{Error, Result};

/// Index of the largest value, ties toward the lowest index. Skips entries for
/// which `legal` is false and returns 0 when nothing is legal.
pub fn greedy_action(q: &[f64], legal: impl Fn(usize) -> bool) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut arg = None;
    for (a, &v) in q.iter().enumerate() {
        if legal(a) && (arg.is_none() || v > best) {
            best = v;
            arg = Some(a);
        }
    }
    arg.unwrap_or(0)
}

/// Linear values over one-hot state features: weight `θ[a * n_states + s]` is
/// `Q(s, a)`, with the environment's action legality attached.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotFamily {
    pub n_states: usize,
    pub n_actions: usize,
    legal: Vec<bool>,
}

impl OneHotFamily {
    pub fn new(n_states: usize, n_actions: usize, legal: impl Fn(usize, usize) -> bool) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidParameter("empty state or action set".into()));
        }
        let legal = (0..n_states).flat_map(|s| (0..n_actions).map(move |a| (s, a))).map(|(s, a)| legal(s, a)).collect();
        Ok(Self { n_states, n_actions, legal })
    }

    /// Family for an environment whose states are their own indices.
    pub fn for_env<E: Tabulated<State = usize>>(env: &E) -> Result<Self> {
        Self::new(env.n_states(), env.n_actions(), |s, a| env.legal(&s, a))
    }

    pub fn dim(&self) -> usize {
        self.n_states * self.n_actions
    }

    #[inline]
    pub fn index(&self, state: usize, action: usize) -> usize {
        action * self.n_states + state
    }

    #[inline]
    pub fn is_legal(&self, state: usize, action: usize) -> bool {
        self.legal[state * self.n_actions + action]
    }

    pub fn params(&self, theta: Vec<f64>) -> Result<LinearParams> {
        LinearParams::from_theta(self.n_states, self.n_actions, theta)
    }

    pub fn q_row(&self, theta: &[f64], state: usize) -> Vec<f64> {
        (0..self.n_actions).map(|a| theta[self.index(state, a)]).collect()
    }

    /// `max_a Q(s, a)` over legal actions, 0 when none is legal.
    #[inline]
    pub fn max_q(&self, theta: &[f64], state: usize) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for a in 0..self.n_actions {
            if self.is_legal(state, a) {
                best = best.max(theta[self.index(state, a)]);
            }
        }
        if best.is_finite() {
            best
        } else {
            0.0
        }
    }

    pub fn greedy(&self, theta: &[f64], state: usize) -> usize {
        greedy_action(&self.q_row(theta, state), |a| self.is_legal(state, a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rvf::ValueFunction;

    #[test]
    fn greedy_cases() {
        assert_eq!(greedy_action(&[0.0, 1.0, 0.0], |_| true), 1);
        assert_eq!(greedy_action(&[2.0, 2.0, 2.0], |_| true), 0);
        assert_eq!(greedy_action(&[5.0, 1.0, 3.0], |a| a != 0), 2);
        let q = [0.3, -1.0, 0.7];
        let scaled: Vec<f64> = q.iter().map(|v| v * 17.0).collect();
        assert_eq!(greedy_action(&q, |_| true), greedy_action(&scaled, |_| true));
    }

    #[test]
    fn one_hot_layout_matches_linear_params() {
        let fam = OneHotFamily::new(3, 2, |_, _| true).unwrap();
        let mut theta = vec![0.0; 6];
        theta[fam.index(2, 1)] = 1.0;
        let p = fam.params(theta.clone()).unwrap();
        assert_eq!(p.q_eval(&[0.0, 0.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(fam.q_row(&theta, 2), vec![0.0, 1.0]);
        assert_eq!(fam.greedy(&theta, 2), 1);
    }
}
