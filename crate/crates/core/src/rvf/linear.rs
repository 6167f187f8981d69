use nalgebra::{DMatrix, DVector};

use super::ValueFunction;
use crate::{Error, Result};

/// Linear value family, one weight block per action: `Q(x, a) = θ_a · x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearParams {
    pub feature_dim: usize,
    pub n_actions: usize,
    pub theta: Vec<f64>,
}

impl LinearParams {
    pub fn zeros(feature_dim: usize, n_actions: usize) -> Self {
        Self { feature_dim, n_actions, theta: vec![0.0; feature_dim * n_actions] }
    }

    pub fn from_theta(feature_dim: usize, n_actions: usize, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != feature_dim * n_actions {
            return Err(Error::ShapeMismatch { expected: feature_dim * n_actions, actual: theta.len() });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("non-finite weight".into()));
        }
        Ok(Self { feature_dim, n_actions, theta })
    }

    /// Index of feature `i` in the block of `action`.
    #[inline]
    pub fn index(&self, action: usize, i: usize) -> usize {
        action * self.feature_dim + i
    }
}

impl ValueFunction for LinearParams {
    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn q_eval(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.feature_dim {
            return Err(Error::ShapeMismatch { expected: self.feature_dim, actual: features.len() });
        }
        Ok(self
            .theta
            .chunks_exact(self.feature_dim)
            .map(|block| block.iter().zip(features).map(|(w, x)| w * x).sum())
            .collect())
    }
}

/// Noise variance `v`, prior variance `λ` and regularization centre `θ̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegConfig {
    pub noise_var: f64,
    pub prior_var: f64,
    pub anchor: Vec<f64>,
}

impl RegConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise variance must be positive, got {}", self.noise_var)));
        }
        if !(self.prior_var > 0.0 && self.prior_var.is_finite()) {
            return Err(Error::InvalidParameter(format!("prior variance must be positive, got {}", self.prior_var)));
        }
        Ok(())
    }
}

/// Accumulated `XᵀWX` and `XᵀWy` of a weighted least-squares problem.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalEquations {
    pub dim: usize,
    pub gram: Vec<f64>,
    pub xty: Vec<f64>,
}

impl NormalEquations {
    pub fn new(dim: usize) -> Self {
        Self { dim, gram: vec![0.0; dim * dim], xty: vec![0.0; dim] }
    }

    pub fn add_row(&mut self, x: &[f64], y: f64, weight: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::ShapeMismatch { expected: self.dim, actual: x.len() });
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let wxi = weight * xi;
            self.xty[i] += wxi * y;
            let row = &mut self.gram[i * self.dim..(i + 1) * self.dim];
            for (g, &xj) in row.iter_mut().zip(x) {
                *g += wxi * xj;
            }
        }
        Ok(())
    }

    /// Minimizer of `(1/v)‖Xθ − y‖²_W + (1/λ)‖θ − θ̂‖²`.
    pub fn solve(&self, cfg: &RegConfig) -> Result<Vec<f64>> {
        cfg.validate()?;
        if cfg.anchor.len() != self.dim {
            return Err(Error::ShapeMismatch { expected: self.dim, actual: cfg.anchor.len() });
        }
        let (inv_v, inv_l) = (1.0 / cfg.noise_var, 1.0 / cfg.prior_var);
        let mut a = DMatrix::from_row_slice(self.dim, self.dim, &self.gram);
        a *= inv_v;
        for i in 0..self.dim {
            a[(i, i)] += inv_l;
        }
        let b = DVector::from_iterator(
            self.dim,
            self.xty.iter().zip(&cfg.anchor).map(|(xy, t)| xy * inv_v + t * inv_l),
        );
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("normal equations are not positive definite".into()))?;
        Ok(chol.solve(&b).iter().copied().collect())
    }
}

/// `θ = (XᵀX/v + I/λ)⁻¹ (Xᵀy/v + θ̂/λ)`: with `y` perturbed by `N(0, v)` noise and
/// `θ̂ ~ N(θ̄, λI)` this is an exact draw from the Gaussian posterior.
pub fn regularized_lsq_solve(x: &[Vec<f64>], y: &[f64], cfg: &RegConfig) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch { expected: x.len(), actual: y.len() });
    }
    let mut ne = NormalEquations::new(cfg.anchor.len());
    for (row, &target) in x.iter().zip(y) {
        ne.add_row(row, target, 1.0)?;
    }
    ne.solve(cfg)
}
