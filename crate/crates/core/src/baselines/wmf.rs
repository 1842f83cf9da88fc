//! Weighted matrix factorization for implicit feedback, solved by
//! alternating least squares.
//!
//! Minimizes `Σ_{u,i} c_ui (p_ui − x_u·y_i)² + λ(Σ‖x_u‖² + Σ‖y_i‖²)` with
//! `p_ui = [r_ui > 0]` and `c_ui = 1 + α r_ui`. Each half-sweep solves the
//! `f × f` normal equations of every row exactly, using the
//! `YᵀY + Yᵀ(C_u − I)Y` decomposition so only observed cells are visited.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, Tensor};
use crate::data::Session;
use crate::error::{Error, Result};
use crate::nn::matrix::{dot, Matrix};
use crate::recommender::Recommender;
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WmfParams {
    pub factors: usize,
    pub alpha: f64,
    pub lambda: f64,
    /// Full sweeps (users then items).
    pub iters: usize,
    /// Standard deviation of the Gaussian initialization.
    pub init_std: f64,
}

impl Default for WmfParams {
    fn default() -> Self {
        Self {
            factors: 60,
            alpha: 40.0,
            lambda: 0.1,
            iters: 15,
            init_std: 0.01,
        }
    }
}

/// Sparse non-negative play counts, stored by row and by column.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMatrix {
    n_users: usize,
    n_items: usize,
    by_user: Vec<Vec<(usize, f64)>>,
    by_item: Vec<Vec<(usize, f64)>>,
}

impl CountMatrix {
    /// From `(user, item, count)` triples; repeated cells add up.
    pub fn from_triples(n_users: usize, n_items: usize, triples: &[(usize, usize, f64)]) -> Result<Self> {
        let mut dense: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
        for &(u, i, c) in triples {
            if u >= n_users {
                return Err(Error::OutOfRange { what: "users", index: u, size: n_users });
            }
            if i >= n_items {
                return Err(Error::OutOfRange { what: "songs", index: i, size: n_items });
            }
            if !(c >= 0.0) {
                return Err(Error::InvalidArgument(format!("negative count {c}")));
            }
            *dense.entry((u, i)).or_insert(0.0) += c;
        }
        let mut by_user = vec![Vec::new(); n_users];
        let mut by_item = vec![Vec::new(); n_items];
        for ((u, i), c) in dense {
            if c > 0.0 {
                by_user[u].push((i, c));
                by_item[i].push((u, c));
            }
        }
        Ok(Self { n_users, n_items, by_user, by_item })
    }

    /// Play counts aggregated over whole sessions.
    pub fn from_sessions(sessions: &[Session], n_users: usize, n_items: usize) -> Result<Self> {
        let triples: Vec<_> = sessions
            .iter()
            .flat_map(|s| s.items.iter().map(move |&i| (s.user, i, 1.0)))
            .collect();
        Self::from_triples(n_users, n_items, &triples)
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn user_row(&self, u: usize) -> &[(usize, f64)] {
        &self.by_user[u]
    }

    pub fn nnz(&self) -> usize {
        self.by_user.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmfFactors {
    pub params: WmfParams,
    /// `U × f`.
    pub users: Matrix,
    /// `N × f`.
    pub items: Matrix,
}

fn gram(m: &Matrix) -> DMatrix<f64> {
    let f = m.cols();
    let mut g = DMatrix::zeros(f, f);
    for r in 0..m.rows() {
        let row = m.row(r);
        for a in 0..f {
            for b in a..f {
                g[(a, b)] += row[a] * row[b];
            }
        }
    }
    g.fill_lower_triangle_with_upper_triangle();
    g
}

/// Exact least-squares update of every row of `target` against the fixed
/// `other` side.
fn solve_side(
    target: &mut Matrix,
    other: &Matrix,
    rows: &[Vec<(usize, f64)>],
    alpha: f64,
    lambda: f64,
) -> Result<()> {
    let f = other.cols();
    let base = gram(other);
    let solved: Vec<Result<Vec<f64>>> = (0..target.rows())
        .into_par_iter()
        .map(|r| {
            let mut a = base.clone();
            let mut b = DVector::zeros(f);
            for &(j, count) in &rows[r] {
                let c = 1.0 + alpha * count;
                let y = other.row(j);
                for p in 0..f {
                    b[p] += c * y[p];
                    for q in 0..f {
                        a[(p, q)] += (c - 1.0) * y[p] * y[q];
                    }
                }
            }
            for p in 0..f {
                a[(p, p)] += lambda;
            }
            let chol = a
                .cholesky()
                .ok_or_else(|| Error::Numerical(format!("normal equations of row {r} not positive definite")))?;
            Ok(chol.solve(&b).iter().copied().collect())
        })
        .collect();
    for (r, x) in solved.into_iter().enumerate() {
        target.row_mut(r).copy_from_slice(&x?);
    }
    Ok(())
}

impl WmfFactors {
    pub fn init(n_users: usize, n_items: usize, params: &WmfParams, rng: &mut SeededRng) -> Result<Self> {
        if params.factors == 0 {
            return Err(Error::InvalidArgument("factors must be >= 1".into()));
        }
        let normal = Normal::new(0.0, params.init_std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut draw = |rows: usize| {
            let data = (0..rows * params.factors).map(|_| normal.sample(rng)).collect();
            Matrix::from_vec(rows, params.factors, data)
        };
        Ok(Self {
            params: params.clone(),
            users: draw(n_users)?,
            items: draw(n_items)?,
        })
    }

    pub fn score(&self, user: usize, item: usize) -> f64 {
        dot(self.users.row(user), self.items.row(item))
    }

    /// The weighted objective, evaluated with the `YᵀY` trick so the cost is
    /// `O(U f² + nnz f)` rather than `O(U N f)`.
    pub fn objective(&self, counts: &CountMatrix) -> f64 {
        let yty = gram(&self.items);
        let mut total = 0.0;
        for u in 0..self.users.rows() {
            let x = DVector::from_column_slice(self.users.row(u));
            total += (x.transpose() * &yty * &x)[(0, 0)];
            for &(i, r) in counts.user_row(u) {
                let s = self.score(u, i);
                let c = 1.0 + self.params.alpha * r;
                total += c * (1.0 - s) * (1.0 - s) - s * s;
            }
        }
        let reg: f64 = self.users.as_slice().iter().chain(self.items.as_slice()).map(|v| v * v).sum();
        total + self.params.lambda * reg
    }

    pub fn solve_users(&mut self, counts: &CountMatrix) -> Result<()> {
        solve_side(&mut self.users, &self.items, &counts.by_user, self.params.alpha, self.params.lambda)
    }

    pub fn solve_items(&mut self, counts: &CountMatrix) -> Result<()> {
        solve_side(&mut self.items, &self.users, &counts.by_item, self.params.alpha, self.params.lambda)
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut ck = Checkpoint::new("wmf", serde_json::to_value(&self.params)?);
        ck.push(Tensor::matrix("users", self.users.rows(), self.users.cols(), self.users.as_slice())?);
        ck.push(Tensor::matrix("items", self.items.rows(), self.items.cols(), self.items.as_slice())?);
        Ok(ck)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_model_type(&["wmf"])?;
        let params: WmfParams = serde_json::from_value(ck.config.clone())?;
        let f = params.factors;
        let nu = ck.tensor("users")?.dims.first().copied().unwrap_or(0);
        let ni = ck.tensor("items")?.dims.first().copied().unwrap_or(0);
        Ok(Self {
            users: Matrix::from_vec(nu, f, ck.expect("users", &[nu, f])?.to_vec())?,
            items: Matrix::from_vec(ni, f, ck.expect("items", &[ni, f])?.to_vec())?,
            params,
        })
    }
}

/// ALS from a Gaussian start. Returns the factors and the objective at
/// initialization followed by its value after every half-sweep.
pub fn wmf_train(counts: &CountMatrix, params: &WmfParams, rng: &mut SeededRng) -> Result<(WmfFactors, Vec<f64>)> {
    if !(params.lambda > 0.0) {
        return Err(Error::InvalidArgument("lambda must be > 0 for well-posed normal equations".into()));
    }
    if params.iters == 0 {
        return Err(Error::InvalidArgument("iters must be >= 1".into()));
    }
    let mut factors = WmfFactors::init(counts.n_users(), counts.n_items(), params, rng)?;
    let mut history = vec![factors.objective(counts)];
    for _ in 0..params.iters {
        factors.solve_users(counts)?;
        history.push(factors.objective(counts));
        factors.solve_items(counts)?;
        history.push(factors.objective(counts));
    }
    Ok((factors, history))
}

impl Recommender for WmfFactors {
    fn name(&self) -> &str {
        "wmf"
    }

    fn n_items(&self) -> usize {
        self.items.rows()
    }

    /// General preference only; the listening context is ignored.
    fn context_len(&self) -> usize {
        0
    }

    fn score_into(&self, user: usize, _context: &[usize], out: &mut [f64]) -> Result<()> {
        if user >= self.users.rows() {
            return Err(Error::OutOfRange { what: "users", index: user, size: self.users.rows() });
        }
        let x = self.users.row(user);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(x, self.items.row(i));
        }
        Ok(())
    }
}
