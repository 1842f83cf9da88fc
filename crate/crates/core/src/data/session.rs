use serde::{Deserialize, Serialize};

use crate::data::events::ListeningEvent;
use crate::data::vocab::{UserMap, VocabMap};
use crate::error::{Error, Result};

pub const DEFAULT_GAP_SECONDS: i64 = 3600;

/// A run of one user's plays with every inter-event gap below the session
/// gap.
///
/// `timestamps` is either empty (sessions read back from a prepared dataset
/// carry no times) or parallel to `items`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub user: usize,
    pub items: Vec<usize>,
    pub timestamps: Vec<i64>,
}

impl Session {
    pub fn new(user: usize, items: Vec<usize>) -> Self {
        Self {
            user,
            items,
            timestamps: Vec::new(),
        }
    }

    pub fn with_times(user: usize, items: Vec<usize>, timestamps: Vec<i64>) -> Self {
        debug_assert_eq!(items.len(), timestamps.len());
        Self {
            user,
            items,
            timestamps,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn has_times(&self) -> bool {
        !self.timestamps.is_empty()
    }

    /// Largest gap between consecutive plays, if timed and of length ≥ 2.
    pub fn max_gap(&self) -> Option<i64> {
        self.timestamps.windows(2).map(|w| w[1] - w[0]).max()
    }

    /// Splits a session into contiguous runs of kept positions.
    pub(crate) fn runs_where(&self, keep: impl Fn(usize) -> bool) -> Vec<Session> {
        let mut out = Vec::new();
        let mut cur = Session::new(self.user, Vec::new());
        for pos in 0..self.items.len() {
            if keep(pos) {
                cur.items.push(self.items[pos]);
                if self.has_times() {
                    cur.timestamps.push(self.timestamps[pos]);
                }
            } else if !cur.is_empty() {
                out.push(std::mem::replace(&mut cur, Session::new(self.user, Vec::new())));
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
        out
    }
}

/// Groups events per user (users in index order), stable-sorts each stream
/// by timestamp and starts a new session whenever the gap to the previous
/// play is `>= gap_seconds`.
pub fn sessionize(
    events: &[ListeningEvent],
    vocab: &VocabMap,
    users: &UserMap,
    gap_seconds: i64,
) -> Result<Vec<Session>> {
    if gap_seconds <= 0 {
        return Err(Error::InvalidArgument("gap_seconds must be positive".into()));
    }
    let mut per_user: Vec<Vec<(i64, usize)>> = vec![Vec::new(); users.len()];
    for ev in events {
        let user = users
            .index(&ev.user_key)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown user {:?}", ev.user_key)))?;
        let song = vocab
            .index(&ev.song_key)
            .ok_or_else(|| Error::InvalidArgument(format!("song {:?} not in vocabulary", ev.song_key)))?;
        per_user[user].push((ev.timestamp, song));
    }

    let mut sessions = Vec::new();
    for (user, mut stream) in per_user.into_iter().enumerate() {
        stream.sort_by_key(|&(t, _)| t);
        let mut cur: Option<Session> = None;
        for (t, song) in stream {
            match cur.as_mut() {
                Some(s) if t - s.timestamps.last().copied().unwrap_or(t) < gap_seconds => {
                    s.items.push(song);
                    s.timestamps.push(t);
                }
                _ => {
                    if let Some(done) = cur.take() {
                        sessions.push(done);
                    }
                    cur = Some(Session::with_times(user, vec![song], vec![t]));
                }
            }
        }
        sessions.extend(cur);
    }
    Ok(sessions)
}
