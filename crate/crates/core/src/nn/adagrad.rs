use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::matrix::Matrix;
use crate::nn::ops::SparseRows;

pub const DEFAULT_LR: f64 = 0.01;
pub const DEFAULT_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdagradConfig {
    pub lr: f64,
    pub eps: f64,
}

impl Default for AdagradConfig {
    fn default() -> Self {
        Self {
            lr: DEFAULT_LR,
            eps: DEFAULT_EPS,
        }
    }
}

/// Per-coordinate squared-gradient accumulator for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdagradState {
    pub accum: Vec<f64>,
    pub config: AdagradConfig,
}

impl AdagradState {
    pub fn new(len: usize, config: AdagradConfig) -> Self {
        Self {
            accum: vec![0.0; len],
            config,
        }
    }

    /// `acc += g²; param −= lr · g / (sqrt(acc) + eps)`.
    pub fn step(&mut self, param: &mut [f64], grad: &[f64]) -> Result<()> {
        if param.len() != self.accum.len() || grad.len() != self.accum.len() {
            return Err(Error::Shape(format!(
                "adagrad: param {}, grad {}, state {}",
                param.len(),
                grad.len(),
                self.accum.len()
            )));
        }
        update(&mut self.accum, param, grad, self.config);
        Ok(())
    }

    /// Updates only the rows present in a sparse embedding gradient.
    pub fn step_rows(&mut self, table: &mut Matrix, grad: &SparseRows) -> Result<()> {
        if table.as_slice().len() != self.accum.len() {
            return Err(Error::Shape("adagrad: table does not match state".into()));
        }
        let width = table.cols();
        for (row, g) in grad.iter() {
            if row >= table.rows() || g.len() != width {
                return Err(Error::Shape(format!("adagrad: bad sparse row {row}")));
            }
            let acc = &mut self.accum[row * width..(row + 1) * width];
            update(acc, table.row_mut(row), g, self.config);
        }
        Ok(())
    }
}

#[inline]
fn update(acc: &mut [f64], param: &mut [f64], grad: &[f64], cfg: AdagradConfig) {
    for ((a, p), &g) in acc.iter_mut().zip(param.iter_mut()).zip(grad) {
        *a += g * g;
        *p -= cfg.lr * g / (a.sqrt() + cfg.eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut st = AdagradState::new(3, AdagradConfig::default());
        let mut p = vec![1.0, 2.0, 3.0];
        st.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, 2.0, 3.0]);
        assert_eq!(st.accum, vec![0.0; 3]);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let cfg = AdagradConfig { lr: 0.01, eps: 0.0 };
        let mut st = AdagradState::new(3, cfg);
        let mut p = vec![0.0; 3];
        st.step(&mut p, &[3.0, -0.2, 1e-3]).unwrap();
        for (got, want) in p.iter().zip([-0.01, 0.01, -0.01]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn steps_shrink_and_accumulators_grow() {
        let mut st = AdagradState::new(2, AdagradConfig::default());
        let mut p = vec![0.0, 0.0];
        let g = [0.5, -2.0];
        st.step(&mut p, &g).unwrap();
        let first = p.clone();
        let acc1 = st.accum.clone();
        st.step(&mut p, &g).unwrap();
        for i in 0..2 {
            let second = p[i] - first[i];
            assert!(second.abs() < first[i].abs());
            assert!(st.accum[i] >= acc1[i]);
        }
        assert!(st.step(&mut p, &[1.0]).is_err());
    }

    #[test]
    fn sparse_rows_touch_only_their_rows() {
        let mut table = Matrix::zeros(3, 2);
        let mut st = AdagradState::new(6, AdagradConfig::default());
        let mut g = SparseRows::new(2);
        g.add(2, &[1.0, -1.0]);
        st.step_rows(&mut table, &g).unwrap();
        assert_eq!(&table.as_slice()[..4], &[0.0; 4]);
        assert!(table.get(2, 0) < 0.0 && table.get(2, 1) > 0.0);
        assert_eq!(&st.accum[..4], &[0.0; 4]);
    }
}
