use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ops::conv_positions;

/// The two neural next-song architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    /// Embeddings stacked into a matrix and convolved before the hidden
    /// layer.
    Cnnrec,
    /// Embeddings concatenated directly into the hidden layer.
    Nnrec,
}

impl Architecture {
    pub fn tag(self) -> &'static str {
        match self {
            Architecture::Cnnrec => "cnnrec",
            Architecture::Nnrec => "nnrec",
        }
    }
}

/// How `dropout_p` is read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DropoutSemantics {
    #[default]
    Drop,
    Keep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    /// Embedding dimension (songs and users).
    pub d: usize,
    /// Context length, i.e. Markov order.
    pub j: usize,
    /// Hidden units.
    pub h: usize,
    /// Convolution filters.
    pub m: usize,
    /// Filter width in songs.
    pub w: usize,
    pub stride: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub dropout_p: f64,
    pub dropout_semantics: DropoutSemantics,
    /// Affine and convolution biases; when off they stay at zero.
    pub bias: bool,
    pub adagrad_eps: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            d: 60,
            j: 5,
            h: 300,
            m: 325,
            w: 2,
            stride: 1,
            epochs: 25,
            batch: 50,
            lr: 0.01,
            dropout_p: 0.7,
            dropout_semantics: DropoutSemantics::Drop,
            bias: true,
            adagrad_eps: 1e-8,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self, arch: Architecture) -> Result<()> {
        let positive = [
            ("d", self.d),
            ("j", self.j),
            ("h", self.h),
            ("batch", self.batch),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if !(self.lr > 0.0) || !(self.adagrad_eps > 0.0) {
            return Err(Error::InvalidArgument("lr and adagrad_eps must be positive".into()));
        }
        let p = self.drop_probability();
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "effective drop probability {p} not in [0, 1)"
            )));
        }
        if arch == Architecture::Cnnrec {
            if self.m == 0 {
                return Err(Error::InvalidArgument("m must be positive".into()));
            }
            conv_positions(self.j, self.w, self.stride)?;
        }
        Ok(())
    }

    pub fn drop_probability(&self) -> f64 {
        match self.dropout_semantics {
            DropoutSemantics::Drop => self.dropout_p,
            DropoutSemantics::Keep => 1.0 - self.dropout_p,
        }
    }

    /// Convolution output positions `p = (j − w)/stride + 1`.
    pub fn conv_positions(&self) -> Result<usize> {
        conv_positions(self.j, self.w, self.stride)
    }

    /// Length of the concatenated vector entering the hidden layer.
    pub fn hidden_input_len(&self, arch: Architecture) -> Result<usize> {
        Ok(match arch {
            Architecture::Cnnrec => self.conv_positions()? * self.m + self.d,
            Architecture::Nnrec => self.j * self.d + self.d,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_dimensions() {
        let hp = Hyperparams::default();
        assert_eq!(hp.conv_positions().unwrap(), 4);
        assert_eq!(hp.hidden_input_len(Architecture::Cnnrec).unwrap(), 1360);
        assert_eq!(hp.hidden_input_len(Architecture::Nnrec).unwrap(), 360);
        hp.validate(Architecture::Cnnrec).unwrap();
    }

    #[test]
    fn invalid_settings() {
        let hp = Hyperparams { w: 6, ..Hyperparams::default() };
        assert!(hp.validate(Architecture::Cnnrec).is_err());
        assert!(hp.validate(Architecture::Nnrec).is_ok());
        let hp = Hyperparams { dropout_p: 1.0, ..Hyperparams::default() };
        assert!(hp.validate(Architecture::Nnrec).is_err());
        let keep = Hyperparams { dropout_semantics: DropoutSemantics::Keep, ..Hyperparams::default() };
        assert!((keep.drop_probability() - 0.3).abs() < 1e-12);
    }
}
