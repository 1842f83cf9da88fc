//! Finite-difference verification of analytic gradients.

pub const DEFAULT_EPS: f64 = 1e-5;

/// Central difference of `f` along coordinate `i` at `x`.
pub fn central_difference<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], i: usize, eps: f64) -> f64 {
    let mut probe = x.to_vec();
    probe[i] = x[i] + eps;
    let up = f(&probe);
    probe[i] = x[i] - eps;
    let down = f(&probe);
    (up - down) / (2.0 * eps)
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Max relative error between `analytic` and central differences of `f`
/// over `coords` (all coordinates when `None`).
pub fn grad_check<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x: &[f64],
    analytic: &[f64],
    eps: f64,
    coords: Option<&[usize]>,
) -> f64 {
    assert_eq!(x.len(), analytic.len(), "gradient length mismatch");
    let all: Vec<usize>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = (0..x.len()).collect();
            &all
        }
    };
    coords
        .iter()
        .map(|&i| relative_error(analytic[i], central_difference(&mut f, x, i, eps)))
        .fold(0.0, f64::max)
}
