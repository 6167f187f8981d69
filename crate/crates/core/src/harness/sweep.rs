use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Mean and standard error (sample standard deviation over `√n`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

pub fn aggregate(values: &[f64]) -> Aggregate {
    let n = values.len();
    if n == 0 {
        return Aggregate { mean: f64::NAN, se: f64::NAN, n };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() / (n as f64).sqrt()
    } else {
        0.0
    };
    Aggregate { mean, se, n }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n_agents: usize,
    pub values: Vec<f64>,
    pub summary: Aggregate,
}

/// Runs `run(K, instance)` for every `K` (in the given order) and instance.
pub fn sweep<F>(k_values: &[usize], n_instances: usize, mut run: F) -> Result<Vec<SweepRow>>
where
    F: FnMut(usize, usize) -> Result<f64>,
{
    if n_instances == 0 {
        return Err(Error::InvalidParameter("need at least one instance".into()));
    }
    k_values
        .iter()
        .map(|&k| {
            let values = (0..n_instances).map(|i| run(k, i)).collect::<Result<Vec<_>>>()?;
            Ok(SweepRow { n_agents: k, summary: aggregate(&values), values })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_cases() {
        assert_eq!(aggregate(&[4.0]), Aggregate { mean: 4.0, se: 0.0, n: 1 });
        let a = aggregate(&[1.0, 3.0]);
        assert!((a.mean - 2.0).abs() < 1e-12 && (a.se - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_keeps_order() {
        let rows = sweep(&[10, 1, 5], 3, |k, i| Ok((k * 100 + i) as f64)).unwrap();
        assert_eq!(rows.iter().map(|r| r.n_agents).collect::<Vec<_>>(), vec![10, 1, 5]);
        assert_eq!(rows[1].values, vec![100.0, 101.0, 102.0]);
        let single = sweep(&[2], 1, |_, _| Ok(7.0)).unwrap();
        assert_eq!(single[0].summary.mean, 7.0);
        assert!(sweep(&[1], 0, |_, _| Ok(0.0)).is_err());
    }
}
