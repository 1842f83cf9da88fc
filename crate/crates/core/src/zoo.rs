//! Every model family behind one type, for code that picks a model at run
//! time (the CLI, sweeps, checkpoint loading).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    fpmc_train, w2v_train, wmf_train, CountMatrix, FpmcFactors, FpmcParams, W2vParams, WmfFactors, WmfParams,
    Word2Vec,
};
use crate::checkpoint::Checkpoint;
use crate::data::{extract_examples, Session};
use crate::error::{Error, Result};
use crate::models::{Architecture, Hyperparams, NeuralRecommender};
use crate::recommender::Recommender;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Cnnrec,
    Nnrec,
    W2v,
    Wmf,
    Fpmc,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 5] = [Self::Cnnrec, Self::Nnrec, Self::W2v, Self::Wmf, Self::Fpmc];

    pub fn tag(self) -> &'static str {
        match self {
            Self::Cnnrec => "cnnrec",
            Self::Nnrec => "nnrec",
            Self::W2v => "w2v",
            Self::Wmf => "wmf",
            Self::Fpmc => "fpmc",
        }
    }

    pub fn architecture(self) -> Option<Architecture> {
        match self {
            Self::Cnnrec => Some(Architecture::Cnnrec),
            Self::Nnrec => Some(Architecture::Nnrec),
            _ => None,
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Neural(NeuralRecommender),
    W2v(Word2Vec),
    Wmf(WmfFactors),
    Fpmc(FpmcFactors),
}

impl AnyModel {
    pub fn family(&self) -> ModelFamily {
        match self {
            AnyModel::Neural(m) => match m.arch {
                Architecture::Cnnrec => ModelFamily::Cnnrec,
                Architecture::Nnrec => ModelFamily::Nnrec,
            },
            AnyModel::W2v(_) => ModelFamily::W2v,
            AnyModel::Wmf(_) => ModelFamily::Wmf,
            AnyModel::Fpmc(_) => ModelFamily::Fpmc,
        }
    }

    fn inner(&self) -> &dyn Recommender {
        match self {
            AnyModel::Neural(m) => m,
            AnyModel::W2v(m) => m,
            AnyModel::Wmf(m) => m,
            AnyModel::Fpmc(m) => m,
        }
    }

    /// Number of users the model has parameters for; `None` when it does not
    /// model users.
    pub fn n_users(&self) -> Option<usize> {
        match self {
            AnyModel::Neural(m) => Some(m.n_users),
            AnyModel::W2v(_) => None,
            AnyModel::Wmf(m) => Some(m.users.rows()),
            AnyModel::Fpmc(m) => Some(m.n_users()),
        }
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        match self {
            AnyModel::Neural(m) => m.to_checkpoint(),
            AnyModel::W2v(m) => m.to_checkpoint(),
            AnyModel::Wmf(m) => m.to_checkpoint(),
            AnyModel::Fpmc(m) => m.to_checkpoint(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        match ck.model_type.parse::<ModelFamily>()? {
            ModelFamily::Cnnrec | ModelFamily::Nnrec => Ok(AnyModel::Neural(NeuralRecommender::from_checkpoint(ck)?)),
            ModelFamily::W2v => Ok(AnyModel::W2v(Word2Vec::from_checkpoint(ck)?)),
            ModelFamily::Wmf => Ok(AnyModel::Wmf(WmfFactors::from_checkpoint(ck)?)),
            ModelFamily::Fpmc => Ok(AnyModel::Fpmc(FpmcFactors::from_checkpoint(ck)?)),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint()?.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

impl Recommender for AnyModel {
    fn name(&self) -> &str {
        self.family().tag()
    }

    fn n_items(&self) -> usize {
        self.inner().n_items()
    }

    fn context_len(&self) -> usize {
        self.inner().context_len()
    }

    fn score_into(&self, user: usize, context: &[usize], out: &mut [f64]) -> Result<()> {
        self.inner().score_into(user, context, out)
    }
}

/// Hyperparameters of every family. `neural.j` is also the context length
/// of the evaluation examples for all families.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub neural: Hyperparams,
    pub w2v: W2vParams,
    pub wmf: WmfParams,
    pub fpmc: FpmcParams,
}

impl ModelSettings {
    pub fn with_order(&self, j: usize) -> Self {
        let mut s = self.clone();
        s.neural.j = j;
        s
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: AnyModel,
    /// Per epoch for neural, w2v and fpmc; the ALS objective at
    /// initialization and after every half-sweep for wmf.
    pub loss_history: Vec<f64>,
}

/// Trains `family` on `train` sessions. All randomness comes from `rng`.
/// `on_epoch(epoch, loss)` fires after each neural epoch and once per
/// history entry for the baselines.
pub fn train_model<F>(
    family: ModelFamily,
    settings: &ModelSettings,
    train: &[Session],
    n_users: usize,
    n_items: usize,
    rng: &mut SeededRng,
    mut on_epoch: F,
) -> Result<Trained>
where
    F: FnMut(usize, f64),
{
    let j = settings.neural.j;
    let (model, loss_history) = match family {
        ModelFamily::Cnnrec | ModelFamily::Nnrec => {
            let arch = family.architecture().expect("neural family");
            let examples = extract_examples(train, j);
            let mut model = NeuralRecommender::new(arch, settings.neural.clone(), n_items, n_users, rng)?;
            let history = if settings.neural.epochs == 0 {
                Vec::new()
            } else {
                model.train(&examples, rng, |e, loss, _| {
                    on_epoch(e, loss);
                    Ok(())
                })?
            };
            return Ok(Trained { model: AnyModel::Neural(model), loss_history: history });
        }
        ModelFamily::W2v => {
            let mut params = settings.w2v.clone();
            params.query_len = params.query_len.min(j);
            let (m, h) = w2v_train(train, n_items, &params, rng)?;
            (AnyModel::W2v(m), h)
        }
        ModelFamily::Wmf => {
            let counts = CountMatrix::from_sessions(train, n_users, n_items)?;
            let (m, h) = wmf_train(&counts, &settings.wmf, rng)?;
            (AnyModel::Wmf(m), h)
        }
        ModelFamily::Fpmc => {
            let examples = extract_examples(train, 1);
            let (m, h) = fpmc_train(&examples, n_users, n_items, &settings.fpmc, rng)?;
            (AnyModel::Fpmc(m), h)
        }
    };
    for (e, &loss) in loss_history.iter().enumerate() {
        on_epoch(e, loss);
    }
    Ok(Trained { model, loss_history })
}
