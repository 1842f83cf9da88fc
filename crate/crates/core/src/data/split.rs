use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::session::Session;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub const DEFAULT_RATIOS: [f64; 3] = [0.7, 0.1, 0.2];

/// What gets shuffled before the train/val/test cut.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShuffleUnit {
    #[default]
    Session,
    /// Individual plays; each split keeps the contiguous runs of a session
    /// that landed in it.
    Record,
}

/// Which val/test plays are removed after the split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapMode {
    /// Remove a play when the same user played the same song in training.
    #[default]
    UserSeen,
    /// Remove a play when its song never occurs anywhere in training.
    UnseenSong,
    /// Keep everything.
    Keep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: Vec<Session>,
    pub val: Vec<Session>,
    pub test: Vec<Session>,
    pub seed: u64,
    pub ratios: [f64; 3],
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub deleted_val: usize,
    pub deleted_test: usize,
}

fn check_ratios(ratios: [f64; 3]) -> Result<()> {
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::InvalidArgument(format!("ratios must be non-negative: {ratios:?}")));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("ratios must sum to 1, got {sum}")));
    }
    Ok(())
}

/// Sizes of the (train, val, test) parts for `n` units. Val and test are
/// floored; train takes the remainder.
pub fn split_sizes(n: usize, ratios: [f64; 3]) -> (usize, usize, usize) {
    // The 1e-9 slack keeps products like 0.29 * 100 from flooring to 28.
    let val = ((ratios[1] * n as f64) + 1e-9).floor() as usize;
    let test = ((ratios[2] * n as f64) + 1e-9).floor() as usize;
    let val = val.min(n);
    let test = test.min(n - val);
    (n - val - test, val, test)
}

/// Seeded session-level shuffle followed by a 3-way cut.
pub fn split_dataset(sessions: &[Session], ratios: [f64; 3], seed: u64) -> Result<SplitDataset> {
    check_ratios(ratios)?;
    if sessions.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 sessions to split, got {}",
            sessions.len()
        )));
    }
    let mut order: Vec<usize> = (0..sessions.len()).collect();
    order.shuffle(&mut SeededRng::new(seed));
    let (n_train, n_val, _) = split_sizes(sessions.len(), ratios);
    let pick = |ids: &[usize]| ids.iter().map(|&i| sessions[i].clone()).collect::<Vec<_>>();
    Ok(SplitDataset {
        train: pick(&order[..n_train]),
        val: pick(&order[n_train..n_train + n_val]),
        test: pick(&order[n_train + n_val..]),
        seed,
        ratios,
    })
}

/// Record-level variant: plays are shuffled individually, then each split
/// keeps, per original session, the maximal runs of plays assigned to it.
pub fn split_records(sessions: &[Session], ratios: [f64; 3], seed: u64) -> Result<SplitDataset> {
    check_ratios(ratios)?;
    let total: usize = sessions.iter().map(Session::len).sum();
    if total < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 records to split, got {total}"
        )));
    }
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut SeededRng::new(seed));
    let (n_train, n_val, _) = split_sizes(total, ratios);
    let mut part = vec![0u8; total];
    for (rank, &rec) in order.iter().enumerate() {
        part[rec] = if rank < n_train {
            0
        } else if rank < n_train + n_val {
            1
        } else {
            2
        };
    }
    let mut out = [Vec::new(), Vec::new(), Vec::new()];
    let mut offset = 0;
    for s in sessions {
        for (p, bucket) in out.iter_mut().enumerate() {
            bucket.extend(s.runs_where(|pos| part[offset + pos] as usize == p));
        }
        offset += s.len();
    }
    let [train, val, test] = out;
    Ok(SplitDataset {
        train,
        val,
        test,
        seed,
        ratios,
    })
}

fn prune(
    sessions: &[Session],
    drop: impl Fn(usize, usize) -> bool,
) -> (Vec<Session>, usize) {
    let mut deleted = 0;
    let mut out = Vec::new();
    for s in sessions {
        let removed = s.items.iter().filter(|&&i| drop(s.user, i)).count();
        deleted += removed;
        if removed == 0 {
            out.push(s.clone());
        } else {
            out.extend(s.runs_where(|pos| !drop(s.user, s.items[pos])));
        }
    }
    (out, deleted)
}

/// Removes val/test plays that overlap with training according to `mode`.
/// A deletion inside a session splits it at that point; emptied sessions
/// disappear.
pub fn delete_train_overlap(split: &SplitDataset, mode: OverlapMode) -> (SplitDataset, OverlapReport) {
    let (val, test, report) = match mode {
        OverlapMode::Keep => (split.val.clone(), split.test.clone(), OverlapReport::default()),
        OverlapMode::UserSeen => {
            let seen: HashSet<(usize, usize)> = split
                .train
                .iter()
                .flat_map(|s| s.items.iter().map(move |&i| (s.user, i)))
                .collect();
            let drop = |u: usize, i: usize| seen.contains(&(u, i));
            let (val, dv) = prune(&split.val, drop);
            let (test, dt) = prune(&split.test, drop);
            (val, test, OverlapReport { deleted_val: dv, deleted_test: dt })
        }
        OverlapMode::UnseenSong => {
            let songs: HashSet<usize> = split.train.iter().flat_map(|s| s.items.iter().copied()).collect();
            let drop = |_: usize, i: usize| !songs.contains(&i);
            let (val, dv) = prune(&split.val, drop);
            let (test, dt) = prune(&split.test, drop);
            (val, test, OverlapReport { deleted_val: dv, deleted_test: dt })
        }
    };
    (
        SplitDataset {
            train: split.train.clone(),
            val,
            test,
            seed: split.seed,
            ratios: split.ratios,
        },
        report,
    )
}

/// Drops val/test sessions whose user has no training sessions. Returns the
/// number of sessions removed.
pub fn drop_unknown_users(split: &mut SplitDataset) -> usize {
    let known: HashSet<usize> = split.train.iter().map(|s| s.user).collect();
    let before = split.val.len() + split.test.len();
    split.val.retain(|s| known.contains(&s.user));
    split.test.retain(|s| known.contains(&s.user));
    before - split.val.len() - split.test.len()
}
