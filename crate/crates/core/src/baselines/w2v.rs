//! Skip-gram with negative sampling over sessions-as-sentences.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, Tensor};
use crate::data::Session;
use crate::error::{Error, Result};
use crate::nn::matrix::{axpy, dot, norm, Matrix};
use crate::rank::top_k;
use crate::recommender::Recommender;
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct W2vParams {
    pub d: usize,
    pub window: usize,
    pub negatives: usize,
    /// Initial learning rate; decays linearly towards zero over training.
    pub lr: f64,
    pub epochs: usize,
    /// Trailing context songs averaged into the query at recommendation.
    pub query_len: usize,
    /// Remove the query songs themselves from the ranking.
    pub exclude_context: bool,
}

impl Default for W2vParams {
    fn default() -> Self {
        Self {
            d: 60,
            window: 5,
            negatives: 5,
            lr: 0.025,
            epochs: 5,
            query_len: 5,
            exclude_context: false,
        }
    }
}

/// Center (`input`) and context (`output`) vectors, both `N × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemEmbeddings {
    pub input: Matrix,
    pub output: Matrix,
}

impl ItemEmbeddings {
    /// Input vectors uniform on `±0.5/d`, output vectors zero.
    pub fn init(n_items: usize, d: usize, rng: &mut SeededRng) -> Self {
        let half = 0.5 / d as f64;
        let data = (0..n_items * d).map(|_| rng.uniform_range(-half, half)).collect();
        Self {
            input: Matrix::from_vec(n_items, d, data).expect("sized"),
            output: Matrix::zeros(n_items, d),
        }
    }

    pub fn n_items(&self) -> usize {
        self.input.rows()
    }

    pub fn cosine(&self, a: usize, b: usize) -> f64 {
        cosine(self.input.row(a), self.input.row(b))
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let denom = norm(a) * norm(b);
    if denom == 0.0 {
        0.0
    } else {
        dot(a, b) / denom
    }
}

/// Negative-sampling loss of one (center, context) pair:
/// `−ln σ(v_c·v'_o) − Σ_n ln σ(−v_c·v'_n)`.
pub fn pair_loss(emb: &ItemEmbeddings, center: usize, context: usize, negatives: &[usize]) -> f64 {
    let v = emb.input.row(center);
    let mut loss = -sigmoid(dot(v, emb.output.row(context))).ln();
    for &n in negatives {
        loss -= sigmoid(-dot(v, emb.output.row(n))).ln();
    }
    loss
}

/// One SGD step on a pair; returns the pair loss before the update.
fn sgd_pair(
    emb: &mut ItemEmbeddings,
    center: usize,
    context: usize,
    negatives: &[usize],
    lr: f64,
    scratch: &mut [f64],
) -> f64 {
    scratch.iter_mut().for_each(|x| *x = 0.0);
    let mut loss = 0.0;
    let d = emb.input.cols();
    let targets = std::iter::once((context, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0)));
    for (target, label) in targets {
        let score = dot(emb.input.row(center), emb.output.row(target));
        let f = sigmoid(score);
        loss -= if label > 0.0 { f.ln() } else { (1.0 - f).ln() };
        let g = (label - f) * lr;
        axpy(g, emb.output.row(target), scratch);
        let (input, output) = (&emb.input, &mut emb.output);
        let center_row = &input.as_slice()[center * d..(center + 1) * d];
        axpy(g, center_row, output.row_mut(target));
    }
    axpy(1.0, scratch, emb.input.row_mut(center));
    loss
}

#[derive(Debug, Clone, PartialEq)]
pub struct Word2Vec {
    pub params: W2vParams,
    pub embeddings: ItemEmbeddings,
}

/// Trains skip-gram embeddings. Negatives follow the unigram distribution
/// raised to 0.75; the learning rate decays linearly over all epochs.
/// Returns the model and the mean pair loss of each epoch.
pub fn w2v_train(
    sessions: &[Session],
    n_items: usize,
    params: &W2vParams,
    rng: &mut SeededRng,
) -> Result<(Word2Vec, Vec<f64>)> {
    if params.window == 0 || params.negatives == 0 || params.d == 0 {
        return Err(Error::InvalidArgument("window, negatives and d must be positive".into()));
    }
    let tokens: usize = sessions.iter().map(Session::len).sum();
    if tokens == 0 {
        return Err(Error::Empty("sessions for word2vec"));
    }
    let mut counts = vec![0.0f64; n_items];
    for s in sessions {
        for &i in &s.items {
            *counts.get_mut(i).ok_or(Error::OutOfRange { what: "songs", index: i, size: n_items })? += 1.0;
        }
    }
    let weights: Vec<f64> = counts.iter().map(|c| c.powf(0.75)).collect();
    let noise = WeightedIndex::new(&weights).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let mut emb = ItemEmbeddings::init(n_items, params.d, rng);
    let total_steps = (params.epochs * tokens).max(1) as f64;
    let mut step = 0usize;
    let mut negs = vec![0usize; params.negatives];
    let mut scratch = vec![0.0; params.d];
    let mut history = Vec::with_capacity(params.epochs);
    for _ in 0..params.epochs {
        let mut loss = 0.0;
        let mut pairs = 0usize;
        for s in sessions {
            for (pos, &center) in s.items.iter().enumerate() {
                let lr = params.lr * (1.0 - step as f64 / total_steps).max(1e-4);
                step += 1;
                let lo = pos.saturating_sub(params.window);
                let hi = (pos + params.window + 1).min(s.len());
                for other in lo..hi {
                    if other == pos {
                        continue;
                    }
                    let context = s.items[other];
                    for n in negs.iter_mut() {
                        *n = noise.sample(rng);
                    }
                    loss += sgd_pair(&mut emb, center, context, &negs, lr, &mut scratch);
                    pairs += 1;
                }
            }
        }
        history.push(if pairs > 0 { loss / pairs as f64 } else { 0.0 });
    }
    Ok((
        Word2Vec {
            params: params.clone(),
            embeddings: emb,
        },
        history,
    ))
}

impl Word2Vec {
    /// Mean of the context songs' input vectors.
    pub fn query(&self, context: &[usize]) -> Result<Vec<f64>> {
        if context.is_empty() {
            return Err(Error::Empty("word2vec query context"));
        }
        let n = self.embeddings.n_items();
        let mut q = vec![0.0; self.params.d];
        for &s in context {
            if s >= n {
                return Err(Error::OutOfRange { what: "songs", index: s, size: n });
            }
            axpy(1.0, self.embeddings.input.row(s), &mut q);
        }
        q.iter_mut().for_each(|v| *v /= context.len() as f64);
        Ok(q)
    }

    /// Cosine similarity of every song's input vector to the query.
    pub fn cosine_scores(&self, context: &[usize]) -> Result<Vec<f64>> {
        let q = self.query(context)?;
        let mut scores: Vec<f64> = (0..self.embeddings.n_items())
            .map(|i| cosine(&q, self.embeddings.input.row(i)))
            .collect();
        if self.params.exclude_context {
            for &s in context {
                scores[s] = f64::NEG_INFINITY;
            }
        }
        Ok(scores)
    }

    /// Catalog ranked by cosine to the mean context vector.
    pub fn recommend_for(&self, context: &[usize], k: usize) -> Result<Vec<usize>> {
        Ok(top_k(&self.cosine_scores(context)?, k))
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut ck = Checkpoint::new("w2v", serde_json::to_value(&self.params)?);
        let (n, d) = self.embeddings.input.shape();
        ck.push(Tensor::matrix("input", n, d, self.embeddings.input.as_slice())?);
        ck.push(Tensor::matrix("output", n, d, self.embeddings.output.as_slice())?);
        Ok(ck)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_model_type(&["w2v"])?;
        let params: W2vParams = serde_json::from_value(ck.config.clone())?;
        let n = ck.tensor("input")?.dims.first().copied().unwrap_or(0);
        let dims = [n, params.d];
        Ok(Self {
            embeddings: ItemEmbeddings {
                input: Matrix::from_vec(n, params.d, ck.expect("input", &dims)?.to_vec())?,
                output: Matrix::from_vec(n, params.d, ck.expect("output", &dims)?.to_vec())?,
            },
            params,
        })
    }
}

impl Recommender for Word2Vec {
    fn name(&self) -> &str {
        "w2v"
    }

    fn n_items(&self) -> usize {
        self.embeddings.n_items()
    }

    fn context_len(&self) -> usize {
        self.params.query_len
    }

    fn score_into(&self, _user: usize, context: &[usize], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&self.cosine_scores(context)?);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_from_rows(rows: &[Vec<f64>]) -> Word2Vec {
        let input = Matrix::from_rows(rows).unwrap();
        let (n, d) = input.shape();
        Word2Vec {
            params: W2vParams { d, query_len: 1, ..W2vParams::default() },
            embeddings: ItemEmbeddings { input, output: Matrix::zeros(n, d) },
        }
    }

    #[test]
    fn zero_vectors_give_ln2_per_term() {
        let emb = ItemEmbeddings { input: Matrix::zeros(4, 3), output: Matrix::zeros(4, 3) };
        let loss = pair_loss(&emb, 0, 1, &[2, 3, 2, 3, 1]);
        assert!((loss - 6.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let sessions = vec![Session::new(0, vec![0, 1, 2])];
        let params = W2vParams { epochs: 0, d: 4, ..W2vParams::default() };
        let (model, hist) = w2v_train(&sessions, 3, &params, &mut SeededRng::new(1)).unwrap();
        assert!(hist.is_empty());
        assert_eq!(model.embeddings, ItemEmbeddings::init(3, 4, &mut SeededRng::new(1)));
    }

    #[test]
    fn empty_sessions_fail() {
        assert!(w2v_train(&[], 3, &W2vParams::default(), &mut SeededRng::new(1)).is_err());
    }

    #[test]
    fn own_vector_ranks_first() {
        let m = model_from_rows(&[vec![1.0, 0.0], vec![0.6, 0.8], vec![0.0, 1.0]]);
        for s in 0..3 {
            assert_eq!(m.recommend_for(&[s], 1).unwrap(), vec![s]);
        }
        let mut all = m.recommend_for(&[1], 3).unwrap();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2]);
    }

    #[test]
    fn rigged_neighbors_match_brute_force() {
        let mut rng = SeededRng::new(4);
        let rows: Vec<Vec<f64>> = (0..12).map(|_| (0..3).map(|_| rng.uniform_range(-1.0, 1.0)).collect()).collect();
        let mut m = model_from_rows(&rows);
        m.params.query_len = 2;
        let ctx = [3, 7];
        let q: Vec<f64> = (0..3).map(|c| (rows[3][c] + rows[7][c]) / 2.0).collect();
        let mut expected: Vec<(f64, usize)> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let dotp: f64 = r.iter().zip(&q).map(|(a, b)| a * b).sum();
                let nr: f64 = r.iter().map(|a| a * a).sum::<f64>().sqrt();
                let nq: f64 = q.iter().map(|a| a * a).sum::<f64>().sqrt();
                (dotp / (nr * nq), i)
            })
            .collect();
        expected.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let expected: Vec<usize> = expected.into_iter().map(|(_, i)| i).collect();
        assert_eq!(m.recommend_for(&ctx, 12).unwrap(), expected);
        m.params.exclude_context = true;
        let top = m.recommend_for(&ctx, 10).unwrap();
        assert!(!top.contains(&3) && !top.contains(&7));
    }

    #[test]
    fn adjacent_pair_is_learned() {
        // Songs 0 and 1 always play back to back; everything else is random
        // filler. Skip-gram aligns the center vector of one with the context
        // vector of the other.
        let mut rng = SeededRng::new(8);
        let n = 40;
        let sessions: Vec<Session> = (0..1000)
            .map(|_| {
                let mut items: Vec<usize> = (0..4).map(|_| 2 + rng.below(n - 2)).collect();
                let at = rng.below(items.len());
                items.splice(at..at, [0, 1]);
                Session::new(0, items)
            })
            .collect();
        let params = W2vParams { d: 16, epochs: 3, window: 1, ..W2vParams::default() };
        let (m, _) = w2v_train(&sessions, n, &params, &mut rng).unwrap();
        let e = &m.embeddings;
        let pair = dot(e.input.row(0), e.output.row(1));
        let others: f64 = (2..n).map(|i| dot(e.input.row(0), e.output.row(i))).sum::<f64>() / (n - 2) as f64;
        assert!(pair > others, "{pair} vs {others}");
    }
}
