//! Forward and backward kernels. Each backward takes the cached forward
//! quantities it needs and the upstream gradient.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::matrix::{axpy, dot, Matrix};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

/// Row-sparse gradient of an embedding table. Rows iterate in ascending
/// index order, so reductions over it are deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRows {
    width: usize,
    rows: BTreeMap<usize, Vec<f64>>,
}

impl SparseRows {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            rows: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, index: usize, g: &[f64]) {
        debug_assert_eq!(g.len(), self.width);
        let row = self
            .rows
            .entry(index)
            .or_insert_with(|| vec![0.0; g.len()]);
        axpy(1.0, g, row);
    }

    pub fn get(&self, index: usize) -> Option<&[f64]> {
        self.rows.get(&index).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.rows.iter().map(|(&i, r)| (i, r.as_slice()))
    }

    pub fn scale(&mut self, s: f64) {
        for r in self.rows.values_mut() {
            r.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_dense(&self, rows: usize) -> Matrix {
        let mut m = Matrix::zeros(rows, self.width);
        for (i, r) in self.iter() {
            m.row_mut(i).copy_from_slice(r);
        }
        m
    }
}

/// Row `index` of `table`, i.e. `onehot(index)ᵀ · table`.
pub fn embed_lookup(table: &Matrix, index: usize) -> Result<Vec<f64>> {
    if index >= table.rows() {
        return Err(Error::OutOfRange {
            what: "embedding table",
            index,
            size: table.rows(),
        });
    }
    Ok(table.row(index).to_vec())
}

/// Scatter-adds the upstream gradient into row `index`.
pub fn embed_backward(grad: &mut SparseRows, index: usize, g: &[f64]) {
    grad.add(index, g);
}

/// `W x + b`.
pub fn affine(w: &Matrix, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if b.len() != w.rows() {
        return Err(Error::Shape(format!(
            "affine: bias of {} for {} outputs",
            b.len(),
            w.rows()
        )));
    }
    let mut y = w.matvec(x)?;
    axpy(1.0, b, &mut y);
    Ok(y)
}

/// Accumulates `dW += g xᵀ`, `db += g` and returns `dx = Wᵀ g`.
pub fn affine_backward(
    w: &Matrix,
    x: &[f64],
    g: &[f64],
    dw: &mut Matrix,
    db: &mut [f64],
) -> Result<Vec<f64>> {
    if dw.shape() != w.shape() || db.len() != w.rows() || x.len() != w.cols() {
        return Err(Error::Shape("affine_backward: gradient buffers do not match W".into()));
    }
    dw.add_outer(1.0, g, x);
    axpy(1.0, g, db);
    w.t_matvec(g)
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Gates by `x > 0`; the subgradient at 0 is 0.
pub fn relu_backward(x: &[f64], g: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .map(|(&xi, &gi)| if xi > 0.0 { gi } else { 0.0 })
        .collect()
}

/// Filter bank for a valid 1-D convolution over stacked embeddings. Each
/// filter spans `width` consecutive rows and the full embedding depth;
/// filter `f` is row `f` of `weights`, laid out row-major as `width × depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvFilters {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub width: usize,
    pub stride: usize,
}

impl ConvFilters {
    pub fn zeros(n_filters: usize, width: usize, depth: usize, stride: usize) -> Self {
        Self {
            weights: Matrix::zeros(n_filters, width * depth),
            bias: vec![0.0; n_filters],
            width,
            stride,
        }
    }

    pub fn n_filters(&self) -> usize {
        self.weights.rows()
    }

    pub fn depth(&self) -> usize {
        self.weights.cols() / self.width
    }

    /// Number of output positions for an input of `rows` rows.
    pub fn positions(&self, rows: usize) -> Result<usize> {
        conv_positions(rows, self.width, self.stride)
    }
}

pub fn conv_positions(rows: usize, width: usize, stride: usize) -> Result<usize> {
    if width == 0 || stride == 0 {
        return Err(Error::InvalidArgument("filter width and stride must be >= 1".into()));
    }
    if width > rows {
        return Err(Error::InvalidArgument(format!(
            "filter width {width} exceeds input length {rows}"
        )));
    }
    Ok((rows - width) / stride + 1)
}

/// Valid convolution with ReLU. `input` is `j × d` (one row per song, oldest
/// first); the result is `p × m` with `p = (j − w)/stride + 1`.
pub fn conv1d(input: &Matrix, filters: &ConvFilters) -> Result<Matrix> {
    let (j, d) = input.shape();
    if filters.weights.cols() != filters.width * d || filters.bias.len() != filters.n_filters() {
        return Err(Error::Shape(format!(
            "conv1d: filters {}x{} (width {}) against input depth {d}",
            filters.weights.rows(),
            filters.weights.cols(),
            filters.width
        )));
    }
    let p = filters.positions(j)?;
    let m = filters.n_filters();
    let span = filters.width * d;
    let mut out = Matrix::zeros(p, m);
    for t in 0..p {
        let start = t * filters.stride * d;
        // Consecutive rows of a row-major matrix are contiguous.
        let window = &input.as_slice()[start..start + span];
        let row = out.row_mut(t);
        for f in 0..m {
            row[f] = (filters.bias[f] + dot(filters.weights.row(f), window)).max(0.0);
        }
    }
    Ok(out)
}

/// Backward of [`conv1d`]. `output` is the post-ReLU forward result; the
/// filter and bias gradients accumulate into `grad`. Returns `dL/dinput`.
pub fn conv1d_backward(
    input: &Matrix,
    filters: &ConvFilters,
    output: &Matrix,
    g_out: &Matrix,
    grad: &mut ConvFilters,
) -> Result<Matrix> {
    let (j, d) = input.shape();
    if output.shape() != g_out.shape() || grad.weights.shape() != filters.weights.shape() {
        return Err(Error::Shape("conv1d_backward: mismatched buffers".into()));
    }
    let span = filters.width * d;
    let mut d_input = Matrix::zeros(j, d);
    for t in 0..output.rows() {
        let start = t * filters.stride * d;
        let window = &input.as_slice()[start..start + span];
        for f in 0..output.cols() {
            if output.get(t, f) <= 0.0 {
                continue;
            }
            let g = g_out.get(t, f);
            if g == 0.0 {
                continue;
            }
            grad.bias[f] += g;
            axpy(g, window, grad.weights.row_mut(f));
            axpy(
                g,
                filters.weights.row(f),
                &mut d_input.as_mut_slice()[start..start + span],
            );
        }
    }
    Ok(d_input)
}

pub fn concat(parts: &[&[f64]]) -> Vec<f64> {
    parts.concat()
}

/// Splits an upstream gradient back into pieces of the given lengths.
pub fn split_grad(g: &[f64], lens: &[usize]) -> Result<Vec<Vec<f64>>> {
    if lens.iter().sum::<usize>() != g.len() {
        return Err(Error::Shape("split_grad: lengths do not cover the gradient".into()));
    }
    let mut out = Vec::with_capacity(lens.len());
    let mut off = 0;
    for &n in lens {
        out.push(g[off..off + n].to_vec());
        off += n;
    }
    Ok(out)
}

/// Inverted dropout with drop probability `p`. Returns the output and the
/// per-entry multiplier (0 or `1/(1−p)`), which is also the backward gate.
pub fn dropout(x: &[f64], p: f64, rng: &mut SeededRng, mode: Mode) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("dropout probability {p} not in [0, 1)")));
    }
    if mode == Mode::Eval || p == 0.0 {
        return Ok((x.to_vec(), vec![1.0; x.len()]));
    }
    let keep_scale = 1.0 / (1.0 - p);
    let mask: Vec<f64> = x
        .iter()
        .map(|_| if rng.uniform() < p { 0.0 } else { keep_scale })
        .collect();
    let out = x.iter().zip(&mask).map(|(a, b)| a * b).collect();
    Ok((out, mask))
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= sum);
    probs
}

pub const PROB_FLOOR: f64 = 1e-12;

/// Softmax probabilities and the cross-entropy `−ln p[target]`.
pub fn softmax_xent(logits: &[f64], target: usize) -> Result<(Vec<f64>, f64)> {
    if target >= logits.len() {
        return Err(Error::OutOfRange {
            what: "logits",
            index: target,
            size: logits.len(),
        });
    }
    let probs = softmax(logits);
    let loss = -probs[target].max(PROB_FLOOR).ln();
    Ok((probs, loss))
}

/// `probs − onehot(target)`.
pub fn softmax_xent_backward(probs: &[f64], target: usize) -> Vec<f64> {
    let mut g = probs.to_vec();
    g[target] -= 1.0;
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{central_difference, grad_check};
    use proptest::prelude::*;

    fn random_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn embed_identity_and_inner_product() {
        let e = Matrix::identity(3);
        assert_eq!(embed_lookup(&e, 1).unwrap(), vec![0.0, 1.0, 0.0]);
        assert!(embed_lookup(&e, 3).is_err());

        let mut rng = SeededRng::new(3);
        let e = random_matrix(6, 4, &mut rng);
        for idx in 0..6 {
            let mut onehot = vec![0.0; 6];
            onehot[idx] = 1.0;
            assert_eq!(e.t_matvec(&onehot).unwrap(), embed_lookup(&e, idx).unwrap());
        }
    }

    #[test]
    fn embed_gradient_scatter() {
        let mut g = SparseRows::new(2);
        embed_backward(&mut g, 1, &[0.5, -1.0]);
        let dense = g.to_dense(3);
        assert_eq!(dense.as_slice(), &[0.0, 0.0, 0.5, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn affine_cases() {
        let x = vec![0.3, -0.2];
        assert_eq!(affine(&Matrix::identity(2), &[0.0, 0.0], &x).unwrap(), x);
        let w = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(affine(&w, &[0.0, 1.0], &[1.0, 1.0]).unwrap(), vec![3.0, 8.0]);
        assert!(affine(&w, &[0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn affine_gradient() {
        let mut rng = SeededRng::new(11);
        let w = random_matrix(3, 4, &mut rng);
        let b: Vec<f64> = (0..3).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let x: Vec<f64> = (0..4).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let c: Vec<f64> = (0..3).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        // L = c · (W x + b): linear in every argument.
        let loss = |w: &Matrix, b: &[f64], x: &[f64]| dot(&c, &affine(w, b, x).unwrap());
        let mut dw = Matrix::zeros(3, 4);
        let mut db = vec![0.0; 3];
        let dx = affine_backward(&w, &x, &c, &mut dw, &mut db).unwrap();

        let err_x = grad_check(|v| loss(&w, &b, v), &x, &dx, 1e-5, None);
        let err_w = grad_check(
            |v| loss(&Matrix::from_vec(3, 4, v.to_vec()).unwrap(), &b, &x),
            w.as_slice(),
            dw.as_slice(),
            1e-5,
            None,
        );
        let err_b = grad_check(|v| loss(&w, v, &x), &b, &db, 1e-5, None);
        assert!(err_x <= 1e-6 && err_w <= 1e-6 && err_b <= 1e-6, "{err_x} {err_w} {err_b}");
    }

    #[test]
    fn relu_cases() {
        assert_eq!(relu(&[-1.0, 0.0, 2.0]), vec![0.0, 0.0, 2.0]);
        assert_eq!(relu(&[0.5, 3.0]), vec![0.5, 3.0]);
        assert_eq!(relu_backward(&[-1.0, 0.0, 2.0], &[1.0, 1.0, 1.0]), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn relu_gradient_away_from_kink() {
        let x = vec![-0.7, 0.4, 1.3, -0.05, 0.2];
        let c = vec![0.3, -1.1, 0.5, 2.0, 0.9];
        let analytic = relu_backward(&x, &c);
        let err = grad_check(|v| dot(&c, &relu(v)), &x, &analytic, 1e-5, None);
        assert!(err <= 1e-6, "{err}");
    }

    /// Triple-loop reference convolution.
    fn conv_reference(s: &Matrix, f: &ConvFilters) -> Matrix {
        let (j, d) = s.shape();
        let p = (j - f.width) / f.stride + 1;
        let mut out = Matrix::zeros(p, f.n_filters());
        for t in 0..p {
            for k in 0..f.n_filters() {
                let mut acc = 0.0;
                for a in 0..f.width {
                    for b in 0..d {
                        acc += s.get(t * f.stride + a, b) * f.weights.get(k, a * d + b);
                    }
                }
                out.set(t, k, (f.bias[k] + acc).max(0.0));
            }
        }
        out
    }

    #[test]
    fn paper_dims_output_shape() {
        let s = Matrix::zeros(5, 60);
        let f = ConvFilters::zeros(325, 2, 60, 1);
        assert_eq!(conv1d(&s, &f).unwrap().shape(), (4, 325));
        let too_wide = ConvFilters::zeros(3, 6, 60, 1);
        assert!(conv1d(&s, &too_wide).is_err());
    }

    #[test]
    fn ones_filter_sums_window() {
        // Rows of increasing value: window sum is hand-computable.
        let d = 3;
        let s = Matrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 3.0],
            vec![4.0, 0.0, 0.0],
        ])
        .unwrap();
        let mut f = ConvFilters::zeros(1, 2, d, 1);
        f.weights.fill(1.0);
        let out = conv1d(&s, &f).unwrap();
        assert_eq!(out.as_slice(), &[3.0, 5.0, 7.0]);
    }

    #[test]
    fn conv_gradient() {
        let (j, d, m, w) = (4, 3, 2, 2);
        let mut rng = SeededRng::new(5);
        let s = random_matrix(j, d, &mut rng);
        let mut f = ConvFilters::zeros(m, w, d, 1);
        f.weights = random_matrix(m, w * d, &mut rng);
        f.bias = vec![0.1, -0.05];
        let c = random_matrix(j - w + 1, m, &mut rng);
        let loss = |s: &Matrix, f: &ConvFilters| dot(c.as_slice(), conv1d(s, f).unwrap().as_slice());

        let out = conv1d(&s, &f).unwrap();
        // Keep clear of the ReLU kink.
        assert!(out.as_slice().iter().all(|v| *v == 0.0 || *v > 1e-3));
        let mut grad = ConvFilters::zeros(m, w, d, 1);
        let ds = conv1d_backward(&s, &f, &out, &c, &mut grad).unwrap();

        let err_s = grad_check(
            |v| loss(&Matrix::from_vec(j, d, v.to_vec()).unwrap(), &f),
            s.as_slice(),
            ds.as_slice(),
            1e-5,
            None,
        );
        let err_f = grad_check(
            |v| {
                let mut g = f.clone();
                g.weights = Matrix::from_vec(m, w * d, v.to_vec()).unwrap();
                loss(&s, &g)
            },
            f.weights.as_slice(),
            grad.weights.as_slice(),
            1e-5,
            None,
        );
        let err_b = grad_check(
            |v| {
                let mut g = f.clone();
                g.bias = v.to_vec();
                loss(&s, &g)
            },
            &f.bias,
            &grad.bias,
            1e-5,
            None,
        );
        assert!(err_s <= 1e-5 && err_f <= 1e-5 && err_b <= 1e-5, "{err_s} {err_f} {err_b}");
    }

    #[test]
    fn concat_cases() {
        assert_eq!(concat(&[&[1.0, 2.0], &[3.0]]), vec![1.0, 2.0, 3.0]);
        assert_eq!(concat(&[&[4.0, 5.0]]), vec![4.0, 5.0]);
        assert_eq!(concat(&[&[0.0; 1300], &[0.0; 60]]).len(), 1360);
        let parts = split_grad(&[1.0, 2.0, 3.0], &[2, 1]).unwrap();
        assert_eq!(parts, vec![vec![1.0, 2.0], vec![3.0]]);
        assert!(split_grad(&[1.0], &[2]).is_err());
    }

    #[test]
    fn dropout_identities() {
        let mut rng = SeededRng::new(0);
        let x = vec![1.0, -2.0, 3.0];
        assert_eq!(dropout(&x, 0.0, &mut rng, Mode::Train).unwrap().0, x);
        assert_eq!(dropout(&x, 0.0, &mut rng, Mode::Eval).unwrap().0, x);
        assert_eq!(dropout(&x, 0.7, &mut rng, Mode::Eval).unwrap().0, x);
        assert!(dropout(&x, 1.0, &mut rng, Mode::Train).is_err());
    }

    #[test]
    fn dropout_is_unbiased() {
        // 1e5 trials: mean of y_i should sit within 3σ of x_i, where the
        // per-trial variance is x² p/(1−p).
        let p = 0.7;
        let x = vec![1.0, -0.5, 2.0];
        let mut rng = SeededRng::new(42);
        let trials = 100_000;
        let mut sums = vec![0.0; x.len()];
        for _ in 0..trials {
            let (y, _) = dropout(&x, p, &mut rng, Mode::Train).unwrap();
            axpy(1.0, &y, &mut sums);
        }
        for (i, &xi) in x.iter().enumerate() {
            let mean = sums[i] / trials as f64;
            let sigma = (xi * xi * p / (1.0 - p) / trials as f64).sqrt();
            assert!((mean - xi).abs() <= 3.0 * sigma, "entry {i}: {mean} vs {xi}");
        }
    }

    #[test]
    fn softmax_cases() {
        let (probs, loss) = softmax_xent(&[0.0; 8], 3).unwrap();
        assert!(probs.iter().all(|p| (p - 0.125).abs() < 1e-15));
        assert!((loss - 8f64.ln()).abs() < 1e-12);

        let (probs, loss) = softmax_xent(&[0.0, 3f64.ln()], 1).unwrap();
        assert!((probs[0] - 0.25).abs() < 1e-12 && (probs[1] - 0.75).abs() < 1e-12);
        assert!((loss - (4.0f64 / 3.0).ln()).abs() < 1e-12);

        let shifted = softmax(&[1000.0, 1000.0 + 3f64.ln()]);
        assert!((shifted[1] - 0.75).abs() < 1e-12);
        assert!(softmax_xent(&[0.0], 1).is_err());
    }

    #[test]
    fn softmax_xent_gradient() {
        let z = vec![0.3, -1.2, 2.0, 0.0];
        let (probs, _) = softmax_xent(&z, 2).unwrap();
        let analytic = softmax_xent_backward(&probs, 2);
        let err = grad_check(|v| softmax_xent(v, 2).unwrap().1, &z, &analytic, 1e-5, None);
        assert!(err <= 1e-6, "{err}");
        let fd = central_difference(|v| softmax_xent(v, 2).unwrap().1, &z, 0, 1e-5);
        assert!((fd - analytic[0]).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(z in prop::collection::vec(-50.0f64..50.0, 1..40)) {
            let p = softmax(&z);
            prop_assert!(p.iter().all(|&v| v >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            let shifted: Vec<f64> = z.iter().map(|v| v + 7.5).collect();
            let q = softmax(&shifted);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn conv_matches_reference(
            j in 1usize..=8, d in 1usize..=8, m in 1usize..=4,
            w_frac in 0.0f64..1.0, stride in 1usize..=3, seed in any::<u64>()
        ) {
            let w = 1 + ((j - 1) as f64 * w_frac) as usize;
            let mut rng = SeededRng::new(seed);
            let s = random_matrix(j, d, &mut rng);
            let mut f = ConvFilters::zeros(m, w, d, stride);
            f.weights = random_matrix(m, w * d, &mut rng);
            f.bias = (0..m).map(|_| rng.uniform_range(-0.5, 0.5)).collect();
            let fast = conv1d(&s, &f).unwrap();
            let slow = conv_reference(&s, &f);
            prop_assert_eq!(fast.shape(), slow.shape());
            prop_assert_eq!(fast.as_slice(), slow.as_slice());
        }
    }
}
