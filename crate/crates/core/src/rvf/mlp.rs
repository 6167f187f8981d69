use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ValueFunction;
use crate::{Error, Result};

/// Layer sizes of a rectifier MLP with an optional linear skip from input to output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    pub skip: bool,
}

impl MlpShape {
    /// Two hidden layers of 50 units plus the skip connection.
    pub fn standard(input: usize, output: usize) -> Self {
        Self { input, hidden: vec![50, 50], output, skip: true }
    }

    /// `(fan_in, fan_out)` of every dense layer, output layer last.
    fn layers(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input];
        dims.extend(&self.hidden);
        dims.push(self.output);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Flat layout: `W_l` (row-major, fan_out × fan_in) then `b_l` for each layer,
    /// then the skip matrix (output × input).
    pub fn n_params(&self) -> usize {
        let dense: usize = self.layers().iter().map(|(i, o)| i * o + o).sum();
        dense + if self.skip { self.input * self.output } else { 0 }
    }

    fn validate(&self) -> Result<()> {
        if self.input == 0 || self.output == 0 || self.hidden.contains(&0) {
            return Err(Error::InvalidParameter(format!("degenerate MLP shape {self:?}")));
        }
        Ok(())
    }

    /// Forward pass; the output is `ws.acts.last()`.
    pub fn forward(&self, params: &[f64], x: &[f64], ws: &mut MlpWorkspace) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::ShapeMismatch { expected: self.n_params(), actual: params.len() });
        }
        if x.len() != self.input {
            return Err(Error::ShapeMismatch { expected: self.input, actual: x.len() });
        }
        let layers = self.layers();
        ws.acts.resize(layers.len() + 1, Vec::new());
        ws.acts[0].clear();
        ws.acts[0].extend_from_slice(x);
        let mut off = 0;
        for (l, &(fan_in, fan_out)) in layers.iter().enumerate() {
            let (w, rest) = params[off..].split_at(fan_in * fan_out);
            let b = &rest[..fan_out];
            off += fan_in * fan_out + fan_out;
            let (before, after) = ws.acts.split_at_mut(l + 1);
            let (input, out) = (&before[l], &mut after[0]);
            out.clear();
            let last = l + 1 == layers.len();
            for (row, &bias) in w.chunks_exact(fan_in).zip(b) {
                let z = bias + row.iter().zip(input.iter()).map(|(a, c)| a * c).sum::<f64>();
                out.push(if last { z } else { z.max(0.0) });
            }
        }
        if self.skip {
            let ws_skip = &params[off..];
            let (first, rest) = ws.acts.split_at_mut(1);
            let out = rest.last_mut().expect("at least one layer");
            for (o, row) in out.iter_mut().zip(ws_skip.chunks_exact(self.input)) {
                *o += row.iter().zip(&first[0]).map(|(a, c)| a * c).sum::<f64>();
            }
        }
        Ok(())
    }

    /// Adds `residual · ∂f(x)[action]/∂θ` to `grad`. Requires a forward pass on
    /// the same `params` and `x` in `ws`.
    pub fn accumulate_gradient(
        &self,
        params: &[f64],
        ws: &mut MlpWorkspace,
        action: usize,
        residual: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        if action >= self.output {
            return Err(Error::OutOfRange { index: action, size: self.output });
        }
        if grad.len() != params.len() {
            return Err(Error::ShapeMismatch { expected: params.len(), actual: grad.len() });
        }
        let layers = self.layers();
        let mut offsets = Vec::with_capacity(layers.len());
        let mut off = 0;
        for &(fan_in, fan_out) in &layers {
            offsets.push(off);
            off += fan_in * fan_out + fan_out;
        }
        if self.skip {
            let g = &mut grad[off + action * self.input..off + (action + 1) * self.input];
            for (gi, xi) in g.iter_mut().zip(&ws.acts[0]) {
                *gi += residual * xi;
            }
        }
        ws.delta.clear();
        ws.delta.resize(self.output, 0.0);
        ws.delta[action] = residual;
        for l in (0..layers.len()).rev() {
            let (fan_in, fan_out) = layers[l];
            let o = offsets[l];
            let input = &ws.acts[l];
            for i in 0..fan_out {
                let d = ws.delta[i];
                if d == 0.0 {
                    continue;
                }
                let gw = &mut grad[o + i * fan_in..o + (i + 1) * fan_in];
                for (g, a) in gw.iter_mut().zip(input) {
                    *g += d * a;
                }
                grad[o + fan_in * fan_out + i] += d;
            }
            if l == 0 {
                break;
            }
            ws.next.clear();
            ws.next.resize(fan_in, 0.0);
            let w = &params[o..o + fan_in * fan_out];
            for i in 0..fan_out {
                let d = ws.delta[i];
                if d == 0.0 {
                    continue;
                }
                for (n, wij) in ws.next.iter_mut().zip(&w[i * fan_in..(i + 1) * fan_in]) {
                    *n += d * wij;
                }
            }
            for (n, a) in ws.next.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *n = 0.0;
                }
            }
            std::mem::swap(&mut ws.delta, &mut ws.next);
        }
        Ok(())
    }
}

/// Scratch buffers for forward and backward passes.
#[derive(Debug, Clone, Default)]
pub struct MlpWorkspace {
    pub acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    next: Vec<f64>,
}

impl MlpWorkspace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Trainable network `f_θ` plus a frozen prior network `f_θ0`:
/// `Q(s, ·) = f_θ(s) + prior_scale · f_θ0(s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub shape: MlpShape,
    pub trainable: Vec<f64>,
    prior: Vec<f64>,
    pub prior_scale: f64,
}

impl MlpParams {
    pub fn new(shape: MlpShape, trainable: Vec<f64>, prior: Vec<f64>, prior_scale: f64) -> Result<Self> {
        shape.validate()?;
        for p in [&trainable, &prior] {
            if p.len() != shape.n_params() {
                return Err(Error::ShapeMismatch { expected: shape.n_params(), actual: p.len() });
            }
        }
        Ok(Self { shape, trainable, prior, prior_scale })
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    /// Prior-network output `prior_scale · f_θ0(x)` into `out`.
    pub fn prior_eval(&self, x: &[f64], ws: &mut MlpWorkspace, out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        if self.prior_scale == 0.0 {
            out.resize(self.shape.output, 0.0);
            return Ok(());
        }
        self.shape.forward(&self.prior, x, ws)?;
        out.extend(ws.output().iter().map(|v| self.prior_scale * v));
        Ok(())
    }

    /// `Q(x, ·)` into `out`; leaves the trainable forward pass in `ws`.
    pub fn q_eval_into(&self, x: &[f64], ws: &mut MlpWorkspace, out: &mut Vec<f64>) -> Result<()> {
        self.prior_eval(x, ws, out)?;
        self.shape.forward(&self.trainable, x, ws)?;
        for (o, f) in out.iter_mut().zip(ws.output()) {
            *o += f;
        }
        Ok(())
    }
}

impl ValueFunction for MlpParams {
    fn n_actions(&self) -> usize {
        self.shape.output
    }

    fn q_eval(&self, features: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        self.q_eval_into(features, &mut MlpWorkspace::default(), &mut out)?;
        Ok(out)
    }
}

/// `residual · ∇_θ Q(x, action)` over the trainable parameters: the gradient of
/// `½ (Q − y)²` when `residual = Q − y`.
pub fn q_gradient(params: &MlpParams, features: &[f64], action: usize, residual: f64) -> Result<Vec<f64>> {
    let mut ws = MlpWorkspace::default();
    params.shape.forward(&params.trainable, features, &mut ws)?;
    let mut grad = vec![0.0; params.trainable.len()];
    params.shape.accumulate_gradient(&params.trainable, &mut ws, action, residual, &mut grad)?;
    Ok(grad)
}

fn glorot_fill<R: Rng + ?Sized>(shape: &MlpShape, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(shape.n_params());
    let mut weights = |fan_in: usize, fan_out: usize, out: &mut Vec<f64>| {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        out.extend((0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)));
    };
    for (fan_in, fan_out) in shape.layers() {
        weights(fan_in, fan_out, &mut out);
        out.extend(std::iter::repeat_n(0.0, fan_out));
    }
    if shape.skip {
        weights(shape.input, shape.output, &mut out);
    }
    out
}

/// Glorot-uniform weights and zero biases, trainable then prior network.
pub fn glorot_init<R: Rng + ?Sized>(shape: MlpShape, prior_scale: f64, rng: &mut R) -> Result<MlpParams> {
    shape.validate()?;
    let trainable = glorot_fill(&shape, rng);
    let prior = glorot_fill(&shape, rng);
    MlpParams::new(shape, trainable, prior, prior_scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_params(seed: u64, shape: MlpShape) -> MlpParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = glorot_init(shape, 3.0, &mut rng).unwrap();
        for w in &mut p.trainable {
            *w += rng.random_range(-0.3..0.3);
        }
        p
    }

    #[test]
    fn zero_trainable_gives_scaled_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = glorot_init(MlpShape::standard(6, 3), 3.0, &mut rng).unwrap();
        p.trainable.iter_mut().for_each(|w| *w = 0.0);
        let x = [0.3, -0.2, 0.5, 0.1, 0.0, 1.0];
        let q = p.q_eval(&x).unwrap();
        let mut ws = MlpWorkspace::default();
        p.shape.forward(p.prior(), &x, &mut ws).unwrap();
        for (a, b) in q.iter().zip(ws.output()) {
            assert!((a - 3.0 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_linear_gradient() {
        let shape = MlpShape { input: 4, hidden: vec![], output: 2, skip: false };
        let p = random_params(2, shape);
        let x = [0.5, -1.0, 2.0, 0.25];
        let g = q_gradient(&p, &x, 1, 0.7).unwrap();
        let mut want = vec![0.0; 10];
        for i in 0..4 {
            want[4 + i] = 0.7 * x[i];
        }
        want[9] = 0.7;
        for (a, b) in g.iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_residual_zero_gradient() {
        let p = random_params(3, MlpShape::standard(6, 3));
        let g = q_gradient(&p, &[0.1; 6], 2, 0.0).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let p = random_params(4, MlpShape::standard(6, 3));
        let x = [0.9, -0.4, 0.3, -0.1, 0.2, 1.0];
        let g = q_gradient(&p, &x, 1, 1.0).unwrap();
        let eps = 1e-5;
        let mut q = p.clone();
        for i in (0..p.trainable.len()).step_by(7) {
            q.trainable[i] = p.trainable[i] + eps;
            let up = q.q_eval(&x).unwrap()[1];
            q.trainable[i] = p.trainable[i] - eps;
            let down = q.q_eval(&x).unwrap()[1];
            q.trainable[i] = p.trainable[i];
            let fd = (up - down) / (2.0 * eps);
            assert!((fd - g[i]).abs() / g[i].abs().max(fd.abs()).max(1e-4) < 1e-5, "param {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn glorot_moments_and_determinism() {
        let shape = MlpShape { input: 50, hidden: vec![], output: 50, skip: false };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let p = glorot_init(shape.clone(), 3.0, &mut rng).unwrap();
            let w = &p.trainable[..2500];
            let var = w.iter().map(|v| v * v).sum::<f64>() / 2500.0;
            assert!((var / 0.02 - 1.0).abs() < 0.2, "{var}");
            assert!(p.trainable[2500..].iter().all(|&b| b == 0.0));
            assert_ne!(p.trainable, p.prior);
        }
        let a = glorot_init(MlpShape::standard(6, 3), 3.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = glorot_init(MlpShape::standard(6, 3), 3.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn eval_does_not_mutate() {
        let p = random_params(6, MlpShape::standard(6, 3));
        let before = p.clone();
        let first = p.q_eval(&[0.5; 6]).unwrap();
        assert_eq!(first, p.q_eval(&[0.5; 6]).unwrap());
        assert_eq!(p, before);
        assert!(p.q_eval(&[0.5; 5]).is_err());
    }
}
