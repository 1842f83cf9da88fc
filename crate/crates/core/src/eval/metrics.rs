use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Session, TrainingExample};
use crate::error::{Error, Result};
use crate::recommender::Recommender;
use crate::rng::SeededRng;

pub const DEFAULT_KS: [usize; 9] = [1, 5, 10, 20, 50, 100, 150, 200, 500];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Protocol {
    /// Rank among every catalog song.
    FullCatalog,
    /// Rank among the target plus `n_neg` uniformly drawn songs the user did
    /// not play in training.
    Sampled { n_neg: usize },
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol::FullCatalog
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    pub protocol: Protocol,
    /// Drop songs the user played in training from the full-catalog
    /// candidates (the target always stays).
    pub exclude_seen: bool,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            ks: DEFAULT_KS.to_vec(),
            protocol: Protocol::FullCatalog,
            exclude_seen: false,
            seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self, n_items: usize) -> Result<()> {
        if self.ks.is_empty() {
            return Err(Error::InvalidArgument("empty k grid".into()));
        }
        if self.ks[0] == 0 || self.ks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!("ks {:?} must be positive and strictly ascending", self.ks)));
        }
        let max = *self.ks.last().unwrap();
        if max > n_items {
            return Err(Error::InvalidArgument(format!("max k {max} exceeds catalog size {n_items}")));
        }
        if let Protocol::Sampled { n_neg } = self.protocol {
            if n_neg == 0 {
                return Err(Error::InvalidArgument("n_neg must be >= 1".into()));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(&json))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Songs each user played in the training split, sorted and deduplicated.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UserHistory {
    seen: Vec<Vec<usize>>,
}

impl UserHistory {
    pub fn from_sessions(sessions: &[Session], n_users: usize) -> Self {
        let mut seen = vec![Vec::new(); n_users];
        for s in sessions {
            if let Some(list) = seen.get_mut(s.user) {
                list.extend_from_slice(&s.items);
            }
        }
        for list in &mut seen {
            list.sort_unstable();
            list.dedup();
        }
        Self { seen }
    }

    pub fn seen(&self, user: usize) -> &[usize] {
        self.seen.get(user).map_or(&[], Vec::as_slice)
    }

    pub fn has_seen(&self, user: usize, item: usize) -> bool {
        self.seen(user).binary_search(&item).is_ok()
    }
}

/// 1-based position of `target` among `candidates` under the global order
/// (higher score first, ties to the lower index).
pub fn rank_of_target(scores: &[f64], target: usize, candidates: &[usize]) -> Result<usize> {
    if !candidates.contains(&target) {
        return Err(Error::InvalidArgument(format!("target {target} is not a candidate")));
    }
    let st = *scores.get(target).ok_or(Error::OutOfRange { what: "songs", index: target, size: scores.len() })?;
    let mut ahead = 0;
    for &c in candidates {
        let sc = *scores.get(c).ok_or(Error::OutOfRange { what: "songs", index: c, size: scores.len() })?;
        if c != target && beats(sc, c, st, target) {
            ahead += 1;
        }
    }
    Ok(ahead + 1)
}

/// Rank of `target` among all catalog songs.
fn rank_full(scores: &[f64], target: usize) -> usize {
    let st = scores[target];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(c, &sc)| c != target && beats(sc, c, st, target))
        .count()
}

#[inline]
fn beats(sc: f64, c: usize, st: f64, t: usize) -> bool {
    crate::rank::rank_order_values(sc, c, st, t).is_lt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub n_examples: usize,
    pub protocol: Protocol,
    pub exclude_seen: bool,
    pub seed: u64,
    pub config_hash: String,
    pub ks: Vec<usize>,
    /// Test cases whose target ranked within each k.
    pub hits: Vec<usize>,
    pub recall: Vec<f64>,
    pub precision: Vec<f64>,
}

impl EvalReport {
    fn from_ranks(model: &str, ranks: &[usize], config: &EvalConfig) -> Result<Self> {
        let n = ranks.len();
        let hits: Vec<usize> = config.ks.iter().map(|&k| ranks.iter().filter(|&&r| r <= k).count()).collect();
        let recall: Vec<f64> = hits.iter().map(|&h| h as f64 / n as f64).collect();
        let precision: Vec<f64> = recall.iter().zip(&config.ks).map(|(r, &k)| r / k as f64).collect();
        let report = Self {
            model: model.to_owned(),
            n_examples: n,
            protocol: config.protocol,
            exclude_seen: config.exclude_seen,
            seed: config.seed,
            config_hash: config.hash(),
            ks: config.ks.clone(),
            hits,
            recall,
            precision,
        };
        report.check()?;
        Ok(report)
    }

    /// Structural invariants of a report.
    pub fn check(&self) -> Result<()> {
        let m = self.ks.len();
        if self.hits.len() != m || self.recall.len() != m || self.precision.len() != m {
            return Err(Error::Shape("report columns differ in length".into()));
        }
        if self.hits.windows(2).any(|w| w[0] > w[1]) || self.recall.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Numerical(format!("recall not monotone in k: {:?}", self.recall)));
        }
        if self.recall.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Numerical("recall outside [0, 1]".into()));
        }
        Ok(())
    }

    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.recall[i])
    }

    pub fn precision_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.precision[i])
    }
}

fn candidates_for(
    n_items: usize,
    example: &TrainingExample,
    index: usize,
    config: &EvalConfig,
    history: Option<&UserHistory>,
) -> Option<Vec<usize>> {
    let seen = |i: usize| history.is_some_and(|h| h.has_seen(example.user, i));
    match config.protocol {
        Protocol::FullCatalog if !config.exclude_seen => None,
        Protocol::FullCatalog => Some((0..n_items).filter(|&i| i == example.target || !seen(i)).collect()),
        Protocol::Sampled { n_neg } => {
            let pool: Vec<usize> = (0..n_items).filter(|&i| i != example.target && !seen(i)).collect();
            let mut out = if n_neg >= pool.len() {
                pool
            } else {
                let mut rng = SeededRng::for_component(config.seed, &format!("eval-negatives-{index}"));
                sample(&mut rng, pool.len(), n_neg).into_iter().map(|p| pool[p]).collect()
            };
            out.push(example.target);
            Some(out)
        }
    }
}

/// Ranks every example's target and aggregates hits per cutoff. Work is
/// spread over the current rayon pool; results do not depend on the number
/// of threads. `history` supplies training listens for the sampled
/// protocol and for `exclude_seen`.
pub fn evaluate<R: Recommender + Sync + ?Sized>(
    model: &R,
    examples: &[TrainingExample],
    config: &EvalConfig,
    history: Option<&UserHistory>,
) -> Result<EvalReport> {
    if examples.is_empty() {
        return Err(Error::Empty("test examples"));
    }
    let n_items = model.n_items();
    config.validate(n_items)?;
    let ranks: Vec<usize> = examples
        .par_iter()
        .enumerate()
        .map(|(i, ex)| -> Result<usize> {
            if ex.target >= n_items {
                return Err(Error::OutOfRange { what: "songs", index: ex.target, size: n_items });
            }
            let scores = model.scores(ex.user, &ex.context)?;
            match candidates_for(n_items, ex, i, config, history) {
                None => Ok(rank_full(&scores, ex.target)),
                Some(c) => rank_of_target(&scores, ex.target, &c),
            }
        })
        .collect::<Result<_>>()?;
    EvalReport::from_ranks(model.name(), &ranks, config)
}
