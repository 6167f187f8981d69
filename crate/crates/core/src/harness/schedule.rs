use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ScheduleKind {
    /// Every agent acts at ticks 1, 2, ….
    Synchronous,
    /// Independent Poisson arrivals with the given rate.
    Poisson { rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleHorizon {
    /// Number of actions per agent.
    Actions(usize),
    /// Wall-clock limit: arrivals at times `<= T`.
    Time(f64),
}

/// Per-agent action times, strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub horizon: ScheduleHorizon,
    pub times: Vec<Vec<f64>>,
}

/// One action of one agent: its `step` is the 0-based action count of that agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub agent: usize,
    pub step: usize,
}

pub fn make_schedule<R: Rng + ?Sized>(n_agents: usize, kind: ScheduleKind, horizon: ScheduleHorizon, rng: &mut R) -> Result<Schedule> {
    if n_agents == 0 {
        return Err(Error::InvalidParameter("need at least one agent".into()));
    }
    let times = match kind {
        ScheduleKind::Synchronous => {
            let h = match horizon {
                ScheduleHorizon::Actions(h) => h,
                ScheduleHorizon::Time(t) if t >= 0.0 => t.floor() as usize,
                ScheduleHorizon::Time(t) => return Err(Error::InvalidParameter(format!("negative time horizon {t}"))),
            };
            vec![(1..=h).map(|t| t as f64).collect(); n_agents]
        }
        ScheduleKind::Poisson { rate } => {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::InvalidParameter(format!("Poisson rate must be positive, got {rate}")));
            }
            if let ScheduleHorizon::Time(t) = horizon {
                if !(t >= 0.0 && t.is_finite()) {
                    return Err(Error::InvalidParameter(format!("time horizon must be finite and >= 0, got {t}")));
                }
            }
            let exp = Exp::new(rate).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            (0..n_agents)
                .map(|_| {
                    let mut out = Vec::new();
                    let mut t = 0.0;
                    loop {
                        t += exp.sample(rng);
                        match horizon {
                            ScheduleHorizon::Actions(h) if out.len() >= h => break,
                            ScheduleHorizon::Time(limit) if t > limit => break,
                            _ => out.push(t),
                        }
                    }
                    out
                })
                .collect()
        }
    };
    Ok(Schedule { kind, horizon, times })
}

impl Schedule {
    pub fn n_agents(&self) -> usize {
        self.times.len()
    }

    /// All events ordered by time, ties toward the lower agent index.
    pub fn events(&self) -> Vec<Event> {
        let mut ev: Vec<Event> = self
            .times
            .iter()
            .enumerate()
            .flat_map(|(agent, ts)| ts.iter().enumerate().map(move |(step, &time)| Event { time, agent, step }))
            .collect();
        ev.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.agent.cmp(&b.agent)));
        ev
    }

    /// Largest number of actions of any agent.
    pub fn max_actions(&self) -> usize {
        self.times.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn end_time(&self) -> f64 {
        match self.horizon {
            ScheduleHorizon::Time(t) => t,
            ScheduleHorizon::Actions(_) => self.times.iter().filter_map(|t| t.last()).copied().fold(0.0, f64::max),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn synchronous_ticks() {
        let s = make_schedule(2, ScheduleKind::Synchronous, ScheduleHorizon::Actions(3), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(s.times, vec![vec![1.0, 2.0, 3.0]; 2]);
        let ev = s.events();
        assert_eq!((ev[0].agent, ev[1].agent, ev[1].time), (0, 1, 1.0));
    }

    #[test]
    fn poisson_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let counts: Vec<f64> = (0..1000)
            .map(|_| make_schedule(1, ScheduleKind::Poisson { rate: 1.0 }, ScheduleHorizon::Time(20.0), &mut rng).unwrap().times[0].len() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / 1000.0;
        let sd = (counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / 999.0).sqrt();
        assert!((mean - 20.0).abs() < 3.0 * sd / 1000f64.sqrt(), "{mean}");
    }

    #[test]
    fn poisson_times_increase_and_replay() {
        let kind = ScheduleKind::Poisson { rate: 2.0 };
        let a = make_schedule(3, kind, ScheduleHorizon::Actions(10), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let b = make_schedule(3, kind, ScheduleHorizon::Actions(10), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a, b);
        for ts in &a.times {
            assert_eq!(ts.len(), 10);
            assert!(ts.windows(2).all(|w| w[0] < w[1]));
        }
        assert!(make_schedule(0, kind, ScheduleHorizon::Actions(1), &mut ChaCha8Rng::seed_from_u64(2)).is_err());
        assert!(make_schedule(1, ScheduleKind::Poisson { rate: 0.0 }, ScheduleHorizon::Actions(1), &mut ChaCha8Rng::seed_from_u64(2)).is_err());
    }
}
