use crate::error::{Error, Result};
use crate::nn::matrix::Matrix;
use crate::rng::SeededRng;

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// `fan_out × fan_in` matrix with entries i.i.d. uniform on `[−L, L]`,
/// `L = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_init(fan_in: usize, fan_out: usize, rng: &mut SeededRng) -> Result<Matrix> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::InvalidArgument(format!(
            "glorot_init needs positive fans, got ({fan_in}, {fan_out})"
        )));
    }
    let limit = glorot_limit(fan_in, fan_out);
    let data = (0..fan_in * fan_out)
        .map(|_| rng.uniform_range(-limit, limit))
        .collect();
    Matrix::from_vec(fan_out, fan_in, data)
}
