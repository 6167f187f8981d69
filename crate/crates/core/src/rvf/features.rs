use crate::envs::CartpoleState4;
use crate::{Error, Result};

pub fn one_hot(index: usize, n: usize) -> Result<Vec<f64>> {
    if index >= n {
        return Err(Error::OutOfRange { index, size: n });
    }
    let mut v = vec![0.0; n];
    v[index] = 1.0;
    Ok(v)
}

/// `cos φ, sin φ, φ̇/10, x/10, ẋ/10, 1{|x| < 0.1}`.
pub fn features_cartpole4(s: &CartpoleState4) -> [f64; 6] {
    [
        s.phi.cos(),
        s.phi.sin(),
        s.phi_dot / 10.0,
        s.x / 10.0,
        s.x_dot / 10.0,
        f64::from(u8::from(s.x.abs() < 0.1)),
    ]
}
