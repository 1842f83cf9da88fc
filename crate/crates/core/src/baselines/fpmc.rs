//! First-order factorizing personalized Markov chains trained with
//! sequential BPR.
//!
//! `score(u, prev, i) = ⟨V_UI[u], V_IU[i]⟩ + ⟨V_IL[i], V_LI[prev]⟩`: a
//! user-item matrix factorization term plus a factorized item-to-item
//! transition term.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, Tensor};
use crate::data::TrainingExample;
use crate::error::{Error, Result};
use crate::nn::matrix::{dot, Matrix};
use crate::recommender::Recommender;
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FpmcParams {
    pub factors: usize,
    pub lr: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub init_std: f64,
}

impl Default for FpmcParams {
    fn default() -> Self {
        Self {
            factors: 32,
            lr: 0.05,
            lambda: 0.01,
            epochs: 30,
            init_std: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpmcFactors {
    pub params: FpmcParams,
    /// User factors of the MF term, `U × f`.
    pub user_item: Matrix,
    /// Item factors of the MF term, `N × f`.
    pub item_user: Matrix,
    /// Next-item factors of the transition term, `N × f`.
    pub item_last: Matrix,
    /// Previous-item factors of the transition term, `N × f`.
    pub last_item: Matrix,
}

/// One sampled BPR triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BprTriple {
    pub user: usize,
    pub prev: usize,
    pub pos: usize,
    pub neg: usize,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl FpmcFactors {
    pub fn init(n_users: usize, n_items: usize, params: &FpmcParams, rng: &mut SeededRng) -> Result<Self> {
        if params.factors == 0 {
            return Err(Error::InvalidArgument("factors must be >= 1".into()));
        }
        let normal = Normal::new(0.0, params.init_std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let f = params.factors;
        let mut draw = |rows: usize| {
            let data = (0..rows * f).map(|_| normal.sample(rng)).collect();
            Matrix::from_vec(rows, f, data)
        };
        Ok(Self {
            params: params.clone(),
            user_item: draw(n_users)?,
            item_user: draw(n_items)?,
            item_last: draw(n_items)?,
            last_item: draw(n_items)?,
        })
    }

    pub fn zeros(n_users: usize, n_items: usize, params: &FpmcParams) -> Self {
        let f = params.factors;
        Self {
            params: params.clone(),
            user_item: Matrix::zeros(n_users, f),
            item_user: Matrix::zeros(n_items, f),
            item_last: Matrix::zeros(n_items, f),
            last_item: Matrix::zeros(n_items, f),
        }
    }

    pub fn n_users(&self) -> usize {
        self.user_item.rows()
    }

    pub fn n_items(&self) -> usize {
        self.item_user.rows()
    }

    fn check(&self, user: usize, prev: usize, item: usize) -> Result<()> {
        if user >= self.n_users() {
            return Err(Error::OutOfRange { what: "users", index: user, size: self.n_users() });
        }
        for i in [prev, item] {
            if i >= self.n_items() {
                return Err(Error::OutOfRange { what: "songs", index: i, size: self.n_items() });
            }
        }
        Ok(())
    }

    pub fn score(&self, user: usize, prev: usize, item: usize) -> Result<f64> {
        self.check(user, prev, item)?;
        Ok(self.score_unchecked(user, prev, item))
    }

    #[inline]
    fn score_unchecked(&self, user: usize, prev: usize, item: usize) -> f64 {
        dot(self.user_item.row(user), self.item_user.row(item))
            + dot(self.item_last.row(item), self.last_item.row(prev))
    }

    /// One ascent step on `ln σ(score⁺ − score⁻)` with L2 shrinkage. All
    /// partial derivatives are taken at the pre-update values. Returns the
    /// pre-update BPR loss.
    pub fn bpr_update(&mut self, t: BprTriple) -> Result<f64> {
        self.check(t.user, t.prev, t.pos)?;
        self.check(t.user, t.prev, t.neg)?;
        let (lr, lambda) = (self.params.lr, self.params.lambda);
        let x = self.score_unchecked(t.user, t.prev, t.pos) - self.score_unchecked(t.user, t.prev, t.neg);
        let delta = 1.0 - sigmoid(x);

        let u = self.user_item.row(t.user).to_vec();
        let iu_pos = self.item_user.row(t.pos).to_vec();
        let iu_neg = self.item_user.row(t.neg).to_vec();
        let il_pos = self.item_last.row(t.pos).to_vec();
        let il_neg = self.item_last.row(t.neg).to_vec();
        let li = self.last_item.row(t.prev).to_vec();

        let step = |param: &mut [f64], grad: &dyn Fn(usize) -> f64| {
            for (k, p) in param.iter_mut().enumerate() {
                *p += lr * (delta * grad(k) - lambda * *p);
            }
        };
        step(self.user_item.row_mut(t.user), &|k| iu_pos[k] - iu_neg[k]);
        step(self.item_user.row_mut(t.pos), &|k| u[k]);
        step(self.item_user.row_mut(t.neg), &|k| -u[k]);
        step(self.item_last.row_mut(t.pos), &|k| li[k]);
        step(self.item_last.row_mut(t.neg), &|k| -li[k]);
        step(self.last_item.row_mut(t.prev), &|k| il_pos[k] - il_neg[k]);
        Ok(-sigmoid(x).ln())
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut ck = Checkpoint::new("fpmc", serde_json::to_value(&self.params)?);
        for (name, m) in self.named() {
            ck.push(Tensor::matrix(name, m.rows(), m.cols(), m.as_slice())?);
        }
        Ok(ck)
    }

    fn named(&self) -> [(&'static str, &Matrix); 4] {
        [
            ("user_item", &self.user_item),
            ("item_user", &self.item_user),
            ("item_last", &self.item_last),
            ("last_item", &self.last_item),
        ]
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_model_type(&["fpmc"])?;
        let params: FpmcParams = serde_json::from_value(ck.config.clone())?;
        let f = params.factors;
        let nu = ck.tensor("user_item")?.dims.first().copied().unwrap_or(0);
        let ni = ck.tensor("item_user")?.dims.first().copied().unwrap_or(0);
        let load = |name: &str, rows: usize| -> Result<Matrix> {
            Matrix::from_vec(rows, f, ck.expect(name, &[rows, f])?.to_vec())
        };
        Ok(Self {
            user_item: load("user_item", nu)?,
            item_user: load("item_user", ni)?,
            item_last: load("item_last", ni)?,
            last_item: load("last_item", ni)?,
            params,
        })
    }
}

/// Sequential BPR over `(user, last context song, target)` triples. Each
/// epoch visits every example once in a fresh random order with a uniform
/// negative `≠` the target. Returns factors and mean BPR loss per epoch.
pub fn fpmc_train(
    examples: &[TrainingExample],
    n_users: usize,
    n_items: usize,
    params: &FpmcParams,
    rng: &mut SeededRng,
) -> Result<(FpmcFactors, Vec<f64>)> {
    if examples.is_empty() {
        return Err(Error::Empty("fpmc training examples"));
    }
    if n_items < 2 {
        return Err(Error::InvalidArgument("fpmc needs at least two songs to sample negatives".into()));
    }
    if let Some(bad) = examples.iter().find(|e| e.context.is_empty()) {
        return Err(Error::InvalidArgument(format!("example without context: {bad:?}")));
    }
    let mut model = FpmcFactors::init(n_users, n_items, params, rng)?;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history = Vec::with_capacity(params.epochs);
    for _ in 0..params.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for &e in &order {
            let ex = &examples[e];
            let mut neg = rng.below(n_items - 1);
            if neg >= ex.target {
                neg += 1;
            }
            total += model.bpr_update(BprTriple {
                user: ex.user,
                prev: *ex.context.last().unwrap(),
                pos: ex.target,
                neg,
            })?;
        }
        history.push(total / examples.len() as f64);
    }
    Ok((model, history))
}

impl Recommender for FpmcFactors {
    fn name(&self) -> &str {
        "fpmc"
    }

    fn n_items(&self) -> usize {
        self.item_user.rows()
    }

    fn context_len(&self) -> usize {
        1
    }

    fn score_into(&self, user: usize, context: &[usize], out: &mut [f64]) -> Result<()> {
        let prev = context[0];
        self.check(user, prev, 0)?;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.score_unchecked(user, prev, i);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_factor(ui: f64, iu: f64, il: f64, li: f64) -> FpmcFactors {
        let p = FpmcParams { factors: 1, ..FpmcParams::default() };
        let mut f = FpmcFactors::zeros(1, 2, &p);
        f.user_item.set(0, 0, ui);
        f.item_user.set(1, 0, iu);
        f.item_last.set(1, 0, il);
        f.last_item.set(0, 0, li);
        f
    }

    #[test]
    fn zero_factors_score_zero() {
        let f = FpmcFactors::zeros(2, 3, &FpmcParams::default());
        assert_eq!(f.score(1, 2, 0).unwrap(), 0.0);
        assert!(f.score(2, 0, 0).is_err());
        assert!(f.score(0, 3, 0).is_err());
    }

    #[test]
    fn hand_case() {
        let f = one_factor(2.0, 3.0, 1.0, -4.0);
        assert_eq!(f.score(0, 0, 1).unwrap(), 2.0);
    }

    #[test]
    fn linear_in_item_factor() {
        let s = |iu: f64| one_factor(2.0, iu, 1.0, -4.0).score(0, 0, 1).unwrap();
        assert_eq!(s(5.0) - s(3.0), 2.0 * (s(4.0) - s(3.0)));
    }

    #[test]
    fn zero_lr_leaves_factors() {
        let params = FpmcParams { lr: 0.0, epochs: 3, factors: 4, ..FpmcParams::default() };
        let ex = vec![TrainingExample { user: 0, context: vec![1], target: 2 }];
        let (trained, _) = fpmc_train(&ex, 1, 4, &params, &mut SeededRng::new(5)).unwrap();
        let init = FpmcFactors::init(1, 4, &params, &mut SeededRng::new(5)).unwrap();
        assert_eq!(trained, init);
        assert!(fpmc_train(&[], 1, 4, &params, &mut SeededRng::new(5)).is_err());
    }

    #[test]
    fn ranking_and_ties() {
        let f = FpmcFactors::zeros(1, 5, &FpmcParams::default());
        assert_eq!(f.recommend(0, &[3], 5).unwrap(), vec![0, 1, 2, 3, 4]);
        let mut rng = SeededRng::new(6);
        let params = FpmcParams { factors: 3, init_std: 1.0, ..FpmcParams::default() };
        let f = FpmcFactors::init(2, 9, &params, &mut rng).unwrap();
        let brute: Vec<(f64, usize)> = (0..9).map(|i| (f.score(1, 4, i).unwrap(), i)).collect();
        let mut sorted = brute.clone();
        sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let expected: Vec<usize> = sorted.into_iter().map(|x| x.1).collect();
        assert_eq!(f.recommend(1, &[4], 9).unwrap(), expected);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn one_update_widens_the_margin(seed in any::<u64>(), lr in 1e-4f64..1e-2) {
            let mut rng = SeededRng::new(seed);
            let params = FpmcParams { factors: 6, lr, lambda: 0.0, init_std: 0.5, ..FpmcParams::default() };
            let mut f = FpmcFactors::init(3, 7, &params, &mut rng).unwrap();
            let pos = rng.below(7);
            let neg = (pos + 1 + rng.below(6)) % 7;
            let t = BprTriple { user: rng.below(3), prev: rng.below(7), pos, neg };
            let margin = |f: &FpmcFactors| f.score(t.user, t.prev, t.pos).unwrap() - f.score(t.user, t.prev, t.neg).unwrap();
            let before = margin(&f);
            f.bpr_update(t).unwrap();
            prop_assert!(margin(&f) > before);
        }
    }
}
