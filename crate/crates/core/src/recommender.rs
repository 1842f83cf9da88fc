use crate::error::{Error, Result};
use crate::rank::top_k;

/// Anything that can score the whole catalog for a (user, recent songs)
/// query. Higher scores rank first; ties go to the lower song index.
pub trait Recommender {
    fn name(&self) -> &str;

    fn n_items(&self) -> usize;

    /// Number of trailing context songs the model reads. Callers may pass a
    /// longer context; only its last `context_len()` songs are used.
    fn context_len(&self) -> usize;

    /// Writes one score per catalog song into `out` (length `n_items()`).
    /// `context` has exactly `context_len()` songs.
    fn score_into(&self, user: usize, context: &[usize], out: &mut [f64]) -> Result<()>;

    fn scores(&self, user: usize, context: &[usize]) -> Result<Vec<f64>> {
        let ctx = self.tail(context)?;
        let mut out = vec![0.0; self.n_items()];
        self.score_into(user, ctx, &mut out)?;
        Ok(out)
    }

    fn recommend(&self, user: usize, context: &[usize], k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.n_items() {
            return Err(Error::InvalidArgument(format!(
                "k = {k} outside [1, {}]",
                self.n_items()
            )));
        }
        Ok(top_k(&self.scores(user, context)?, k))
    }

    fn tail<'a>(&self, context: &'a [usize]) -> Result<&'a [usize]> {
        let need = self.context_len();
        if context.len() < need {
            return Err(Error::InvalidArgument(format!(
                "{} needs {need} context songs, got {}",
                self.name(),
                context.len()
            )));
        }
        Ok(&context[context.len() - need..])
    }
}

impl<R: Recommender + ?Sized> Recommender for &R {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn n_items(&self) -> usize {
        (**self).n_items()
    }
    fn context_len(&self) -> usize {
        (**self).context_len()
    }
    fn score_into(&self, user: usize, context: &[usize], out: &mut [f64]) -> Result<()> {
        (**self).score_into(user, context, out)
    }
}

impl<R: Recommender + ?Sized> Recommender for Box<R> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn n_items(&self) -> usize {
        (**self).n_items()
    }
    fn context_len(&self) -> usize {
        (**self).context_len()
    }
    fn score_into(&self, user: usize, context: &[usize], out: &mut [f64]) -> Result<()> {
        (**self).score_into(user, context, out)
    }
}
