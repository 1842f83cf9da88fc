use serde::{Deserialize, Serialize};

use crate::data::session::Session;

/// One next-song prediction case: the `context.len()` songs preceding
/// `target` within a single session, oldest first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrainingExample {
    pub user: usize,
    pub context: Vec<usize>,
    pub target: usize,
}

impl TrainingExample {
    pub fn order(&self) -> usize {
        self.context.len()
    }
}

/// Emits every position with at least `j` in-session predecessors, ordered
/// by session then position. No padding and no cross-session context.
pub fn extract_examples(sessions: &[Session], j: usize) -> Vec<TrainingExample> {
    assert!(j >= 1, "context length must be at least 1");
    let mut out = Vec::new();
    for s in sessions {
        for t in j..s.items.len() {
            out.push(TrainingExample {
                user: s.user,
                context: s.items[t - j..t].to_vec(),
                target: s.items[t],
            });
        }
    }
    out
}
