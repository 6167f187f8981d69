//! Cartpole swing-up: a pole hinged on a cart, starting from hanging down.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Environment, Step, Tabulated};
use crate::{Error, Result};

/// Half-width of the cart track in the four-dimensional task.
pub const TRACK_EDGE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartpoleParams {
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub pole_length: f64,
    pub gravity: f64,
    pub dt: f64,
    /// Action forces, sorted ascending.
    pub forces: Vec<f64>,
}

impl CartpoleParams {
    /// Two-dimensional swing-up with `dt = 0.02`.
    pub fn tabular() -> Self {
        Self {
            cart_mass: 1.0,
            pole_mass: 0.1,
            pole_length: 1.0,
            gravity: 9.8,
            dt: 0.02,
            forces: vec![-10.0, 0.0, 10.0],
        }
    }

    /// Four-dimensional swing-up with `dt = 0.01`.
    pub fn continuous() -> Self {
        Self {
            dt: 0.01,
            ..Self::tabular()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cart_mass", self.cart_mass),
            ("pole_mass", self.pole_mass),
            ("pole_length", self.pole_length),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.forces.is_empty() {
            return Err(Error::InvalidParameter("force set is empty".into()));
        }
        if self.forces.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("force set must be strictly ascending".into()));
        }
        Ok(())
    }

    pub fn force(&self, action: usize) -> Result<f64> {
        self.forces.get(action).copied().ok_or(Error::OutOfRange {
            index: action,
            size: self.forces.len(),
        })
    }
}

/// Pole angle (0 is upright) and angular velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartpoleState2 {
    pub phi: f64,
    pub phi_dot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartpoleState4 {
    pub phi: f64,
    pub phi_dot: f64,
    pub x: f64,
    pub x_dot: f64,
}

/// Borrowed view of either state variant.
#[derive(Debug, Clone, Copy)]
pub enum StateRef<'a> {
    Two(&'a CartpoleState2),
    Four(&'a CartpoleState4),
}

impl<'a> From<&'a CartpoleState2> for StateRef<'a> {
    fn from(s: &'a CartpoleState2) -> Self {
        StateRef::Two(s)
    }
}

impl<'a> From<&'a CartpoleState4> for StateRef<'a> {
    fn from(s: &'a CartpoleState4) -> Self {
        StateRef::Four(s)
    }
}

/// Angular acceleration, plus the cart acceleration for the four-dimensional state.
///
/// `tau = (F + (l/2) phi_dot^2 sin phi) / (m + M)`,
/// `phi_ddot = (g sin phi - cos phi tau) / ((l/2)(4/3 - m/(m+M) cos^2 phi))`,
/// `x_ddot = tau - m (l/2) phi_ddot cos phi / (m + M)`.
pub fn cartpole_accel<'a>(
    state: impl Into<StateRef<'a>>,
    force: f64,
    params: &CartpoleParams,
) -> (f64, Option<f64>) {
    let (phi, phi_dot, four) = match state.into() {
        StateRef::Two(s) => (s.phi, s.phi_dot, false),
        StateRef::Four(s) => (s.phi, s.phi_dot, true),
    };
    let total = params.pole_mass + params.cart_mass;
    let half = params.pole_length / 2.0;
    let (sin, cos) = phi.sin_cos();
    let tau = (force + half * phi_dot * phi_dot * sin) / total;
    let phi_ddot = (params.gravity * sin - cos * tau)
        / (half * (4.0 / 3.0 - params.pole_mass / total * cos * cos));
    let x_ddot = four.then(|| tau - params.pole_mass * half * phi_ddot * cos / total);
    (phi_ddot, x_ddot)
}

fn wrap_angle(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// One explicit Euler step: velocities first, then positions; angle wrapped to [0, 2π).
pub fn cartpole_step2(state: &CartpoleState2, force: f64, params: &CartpoleParams) -> CartpoleState2 {
    let (phi_ddot, _) = cartpole_accel(state, force, params);
    let phi_dot = state.phi_dot + phi_ddot * params.dt;
    CartpoleState2 {
        phi: wrap_angle(state.phi + phi_dot * params.dt),
        phi_dot,
    }
}

/// Euler step of the four-dimensional system with an inelastic stop at |x| = 2.
pub fn cartpole_step4(state: &CartpoleState4, force: f64, params: &CartpoleParams) -> CartpoleState4 {
    let (phi_ddot, x_ddot) = cartpole_accel(state, force, params);
    let x_ddot = x_ddot.expect("four-dimensional state yields a cart acceleration");
    let phi_dot = state.phi_dot + phi_ddot * params.dt;
    let mut x_dot = state.x_dot + x_ddot * params.dt;
    let mut x = state.x + x_dot * params.dt;
    if x.abs() > TRACK_EDGE {
        x = TRACK_EDGE.copysign(x);
        x_dot = 0.0;
    }
    CartpoleState4 {
        phi: wrap_angle(state.phi + phi_dot * params.dt),
        phi_dot,
        x,
        x_dot,
    }
}

/// Reward of the two-dimensional task, evaluated at the post-transition state.
pub fn cartpole_reward2(state: &CartpoleState2, force: f64) -> f64 {
    let upright = state.phi.cos() > 0.75 && state.phi_dot.abs() < 1.0;
    f64::from(u8::from(upright)) - force.abs() / 1000.0
}

/// Reward of the four-dimensional task: upright, steady and centred.
pub fn cartpole_reward4(state: &CartpoleState4) -> f64 {
    let ok = state.phi.cos() > 0.95
        && state.x.abs() < 0.1
        && state.x_dot.abs() < 1.0
        && state.phi_dot.abs() < 1.0;
    f64::from(u8::from(ok))
}

/// Uniform grid over `[0, 2π) × [-2π, 2π]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CartpoleGrid {
    pub n_phi: usize,
    pub n_phi_dot: usize,
}

impl CartpoleGrid {
    pub fn new(n_phi: usize, n_phi_dot: usize) -> Result<Self> {
        if n_phi == 0 || n_phi_dot == 0 {
            return Err(Error::InvalidParameter("grid dimensions must be at least 1".into()));
        }
        Ok(Self { n_phi, n_phi_dot })
    }

    pub fn n_cells(&self) -> usize {
        self.n_phi * self.n_phi_dot
    }
}

/// Cell index `bin_phi * n_phi_dot + bin_phi_dot` with half-open bins. Angular
/// velocity is clamped into range for binning only.
pub fn discretize_cartpole(state: &CartpoleState2, grid: CartpoleGrid) -> usize {
    let bin = |frac: f64, n: usize| -> usize {
        let b = (frac * n as f64).floor();
        if b <= 0.0 {
            0
        } else {
            (b as usize).min(n - 1)
        }
    };
    let phi_bin = bin(wrap_angle(state.phi) / TAU, grid.n_phi);
    let vel = state.phi_dot.clamp(-TAU, TAU);
    let vel_bin = bin((vel + TAU) / (2.0 * TAU), grid.n_phi_dot);
    phi_bin * grid.n_phi_dot + vel_bin
}

fn jitter<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(-0.05..=0.05)
}

/// Tabular swing-up: continuous dynamics observed through a grid.
#[derive(Debug, Clone)]
pub struct Cartpole2Env {
    pub params: CartpoleParams,
    pub grid: CartpoleGrid,
}

impl Cartpole2Env {
    pub fn new(params: CartpoleParams, grid: CartpoleGrid) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, grid })
    }

    /// Hanging straight down at rest.
    pub fn rest_state() -> CartpoleState2 {
        CartpoleState2 { phi: PI, phi_dot: 0.0 }
    }
}

impl Environment for Cartpole2Env {
    type State = CartpoleState2;

    fn n_actions(&self) -> usize {
        self.params.forces.len()
    }

    fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> CartpoleState2 {
        let rest = Self::rest_state();
        CartpoleState2 {
            phi: wrap_angle(rest.phi + jitter(rng)),
            phi_dot: rest.phi_dot + jitter(rng),
        }
    }

    fn step(&self, state: &CartpoleState2, action: usize) -> Result<Step<CartpoleState2>> {
        let force = self.params.force(action)?;
        let next = cartpole_step2(state, force, &self.params);
        Ok(Step {
            next,
            reward: cartpole_reward2(&next, force),
            terminal: false,
            reveal: None,
        })
    }
}

impl Tabulated for Cartpole2Env {
    fn n_states(&self) -> usize {
        self.grid.n_cells()
    }

    fn index(&self, state: &CartpoleState2) -> usize {
        discretize_cartpole(state, self.grid)
    }
}

/// Four-dimensional swing-up with a rigid track edge.
#[derive(Debug, Clone)]
pub struct Cartpole4Env {
    pub params: CartpoleParams,
}

impl Cartpole4Env {
    pub fn new(params: CartpoleParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }
}

impl Environment for Cartpole4Env {
    type State = CartpoleState4;

    fn n_actions(&self) -> usize {
        self.params.forces.len()
    }

    fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> CartpoleState4 {
        CartpoleState4 {
            phi: wrap_angle(PI + jitter(rng)),
            phi_dot: jitter(rng),
            x: jitter(rng),
            x_dot: jitter(rng),
        }
    }

    fn step(&self, state: &CartpoleState4, action: usize) -> Result<Step<CartpoleState4>> {
        let force = self.params.force(action)?;
        let next = cartpole_step4(state, force, &self.params);
        Ok(Step {
            next,
            reward: cartpole_reward4(&next),
            terminal: false,
            reveal: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn s2(phi: f64, phi_dot: f64) -> CartpoleState2 {
        CartpoleState2 { phi, phi_dot }
    }

    #[test]
    fn equilibria_have_zero_acceleration() {
        let p = CartpoleParams::tabular();
        assert_abs_diff_eq!(cartpole_accel(&s2(PI, 0.0), 0.0, &p).0, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cartpole_accel(&s2(0.0, 0.0), 0.0, &p).0, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn horizontal_pole_acceleration() {
        let p = CartpoleParams::tabular();
        let (a, x) = cartpole_accel(&s2(PI / 2.0, 0.0), 0.0, &p);
        assert_abs_diff_eq!(a, 14.7, epsilon = 1e-12);
        assert!(x.is_none());
    }

    #[test]
    fn euler_step_orders_velocity_first() {
        let p = CartpoleParams::tabular();
        let rest = cartpole_step2(&s2(PI, 0.0), 0.0, &p);
        assert_abs_diff_eq!(rest.phi, PI, epsilon = 1e-12);
        assert_abs_diff_eq!(rest.phi_dot, 0.0, epsilon = 1e-12);

        let next = cartpole_step2(&s2(PI / 2.0, 0.0), 0.0, &p);
        assert_abs_diff_eq!(next.phi_dot, 0.294, epsilon = 1e-12);
        assert_abs_diff_eq!(next.phi, PI / 2.0 + 0.294 * 0.02, epsilon = 1e-12);
    }

    #[test]
    fn rigid_edge_stops_cart() {
        let p = CartpoleParams::continuous();
        let s = CartpoleState4 { phi: PI, phi_dot: 0.0, x: 1.999, x_dot: 10.0 };
        let n = cartpole_step4(&s, 10.0, &p);
        assert_eq!(n.x, 2.0);
        assert_eq!(n.x_dot, 0.0);
    }

    #[test]
    fn tabular_rewards() {
        let phi = 0.8f64.acos();
        assert_abs_diff_eq!(cartpole_reward2(&s2(phi, 0.5), 10.0), 0.99, epsilon = 1e-12);
        assert_abs_diff_eq!(cartpole_reward2(&s2(phi, 1.5), 0.0), 0.0, epsilon = 1e-12);
        let phi = 0.7f64.acos();
        assert_abs_diff_eq!(cartpole_reward2(&s2(phi, 0.0), -10.0), -0.01, epsilon = 1e-12);
    }

    #[test]
    fn continuous_rewards() {
        let phi = 0.96f64.acos();
        let s = |x| CartpoleState4 { phi, phi_dot: 0.5, x, x_dot: 0.5 };
        assert_eq!(cartpole_reward4(&s(0.05)), 1.0);
        assert_eq!(cartpole_reward4(&s(0.15)), 0.0);
        // cos φ must strictly exceed 0.95; take the largest angle whose cosine
        // does not exceed it
        let mut phi = 0.95f64.acos();
        while phi.cos() > 0.95 {
            phi = f64::from_bits(phi.to_bits() + 1);
        }
        let edge = CartpoleState4 { phi, phi_dot: 0.0, x: 0.0, x_dot: 0.0 };
        assert_eq!(cartpole_reward4(&edge), 0.0);
    }

    #[test]
    fn grid_corners_and_centre() {
        let g = CartpoleGrid::new(10, 10).unwrap();
        assert_eq!(discretize_cartpole(&s2(0.0, -TAU), g), 0);
        let below = f64::from_bits(TAU.to_bits() - 1);
        assert_eq!(discretize_cartpole(&s2(below, below), g), 99);
        assert_eq!(discretize_cartpole(&s2(PI, 0.0), g), 55);
        // out-of-range velocity is clamped
        assert_eq!(discretize_cartpole(&s2(0.0, 100.0), g), 9);
        assert!(CartpoleGrid::new(0, 3).is_err());
    }

    #[test]
    fn grid_image_is_exactly_the_index_set() {
        let g = CartpoleGrid::new(7, 5).unwrap();
        let mut seen = vec![false; g.n_cells()];
        for i in 0..7 {
            for j in 0..5 {
                let phi = (i as f64 + 0.5) / 7.0 * TAU;
                let vel = -TAU + (j as f64 + 0.5) / 5.0 * 2.0 * TAU;
                seen[discretize_cartpole(&s2(phi, vel), g)] = true;
            }
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn params_validation() {
        assert!(CartpoleParams::tabular().validate().is_ok());
        let mut p = CartpoleParams::tabular();
        p.forces = vec![10.0, 0.0];
        assert!(p.validate().is_err());
        p.forces.clear();
        assert!(p.validate().is_err());
        let p = CartpoleParams { pole_mass: 0.0, ..CartpoleParams::tabular() };
        assert!(p.validate().is_err());
    }

    fn angle_after(dt: f64, t: f64) -> f64 {
        let p = CartpoleParams { dt, ..CartpoleParams::tabular() };
        let mut s = s2(PI / 2.0, 0.0);
        for _ in 0..(t / dt).round() as usize {
            s = cartpole_step2(&s, 0.0, &p);
        }
        s.phi
    }

    #[test]
    fn euler_converges_at_first_order() {
        let reference = angle_after(1e-5, 0.4);
        let e1 = wrap_angle(angle_after(0.02, 0.4) - reference).abs();
        let e2 = wrap_angle(angle_after(0.01, 0.4) - reference).abs();
        let e4 = wrap_angle(angle_after(0.005, 0.4) - reference).abs();
        assert!(e1 < 0.1, "{e1}");
        for ratio in [e1 / e2, e2 / e4] {
            assert!((1.6..2.5).contains(&ratio), "ratio {ratio}");
        }
    }

    proptest! {
        #[test]
        fn emitted_states_respect_wrap_and_edge(
            phi in -20.0f64..20.0, phi_dot in -30.0f64..30.0,
            x in -2.0f64..2.0, x_dot in -50.0f64..50.0, a in 0usize..3,
        ) {
            let p2 = CartpoleParams::tabular();
            let n2 = cartpole_step2(&s2(phi, phi_dot), p2.forces[a], &p2);
            prop_assert!((0.0..TAU).contains(&n2.phi));
            let p4 = CartpoleParams::continuous();
            let n4 = cartpole_step4(&CartpoleState4 { phi, phi_dot, x, x_dot }, p4.forces[a], &p4);
            prop_assert!(n4.x.abs() <= 2.0);
            prop_assert!(n4.phi.is_finite() && n4.x_dot.is_finite());
        }
    }
}
