use std::collections::HashMap;

use crate::data::events::ListeningEvent;
use crate::error::{Error, Result};

pub const DEFAULT_VOCAB_CAP: usize = 10_000;

/// Dense indexing of string keys: `forward` and `reverse` are inverses.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyIndex {
    forward: HashMap<String, usize>,
    reverse: Vec<String>,
}

impl KeyIndex {
    pub fn from_keys<I: IntoIterator<Item = String>>(keys: I) -> Result<Self> {
        let mut idx = KeyIndex::default();
        for key in keys {
            if idx.forward.contains_key(&key) {
                return Err(Error::InvalidArgument(format!("duplicate key {key:?}")));
            }
            idx.forward.insert(key.clone(), idx.reverse.len());
            idx.reverse.push(key);
        }
        Ok(idx)
    }

    fn insert_if_absent(&mut self, key: &str) -> usize {
        if let Some(&i) = self.forward.get(key) {
            return i;
        }
        let i = self.reverse.len();
        self.forward.insert(key.to_owned(), i);
        self.reverse.push(key.to_owned());
        i
    }

    pub fn len(&self) -> usize {
        self.reverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reverse.is_empty()
    }

    pub fn index(&self, key: &str) -> Option<usize> {
        self.forward.get(key).copied()
    }

    pub fn key(&self, index: usize) -> Option<&str> {
        self.reverse.get(index).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.forward.contains_key(key)
    }

    pub fn keys(&self) -> &[String] {
        &self.reverse
    }
}

/// The song catalog: the 1-of-N index space of every model.
pub type VocabMap = KeyIndex;

/// User keys indexed by first appearance.
pub type UserMap = KeyIndex;

/// Keeps the `cap` most played songs. Indices follow descending play count,
/// ties broken by first appearance in the stream.
pub fn build_vocab(events: &[ListeningEvent], cap: usize) -> Result<VocabMap> {
    if cap == 0 {
        return Err(Error::InvalidArgument("vocabulary cap must be >= 1".into()));
    }
    if events.is_empty() {
        return Err(Error::Empty("no events to build a vocabulary from"));
    }
    // (count, first position) per key
    let mut stats: HashMap<&str, (usize, usize)> = HashMap::new();
    for (pos, ev) in events.iter().enumerate() {
        stats.entry(ev.song_key.as_str()).or_insert((0, pos)).0 += 1;
    }
    let mut ranked: Vec<(&str, usize, usize)> =
        stats.into_iter().map(|(k, (c, first))| (k, c, first)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    ranked.truncate(cap);
    KeyIndex::from_keys(ranked.into_iter().map(|(k, _, _)| k.to_owned()))
}

pub fn build_users(events: &[ListeningEvent]) -> UserMap {
    let mut users = UserMap::default();
    for ev in events {
        users.insert_if_absent(&ev.user_key);
    }
    users
}

pub fn filter_to_vocab(events: &[ListeningEvent], vocab: &VocabMap) -> Vec<ListeningEvent> {
    events
        .iter()
        .filter(|ev| vocab.contains(&ev.song_key))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn events(keys: &[&str]) -> Vec<ListeningEvent> {
        keys.iter()
            .enumerate()
            .map(|(t, k)| ListeningEvent::new("u", t as i64, *k))
            .collect()
    }

    /// Counting oracle: tally with a linear scan per distinct key.
    fn top_by_brute_force(keys: &[&str], cap: usize) -> Vec<String> {
        let mut distinct: Vec<&str> = Vec::new();
        for k in keys {
            if !distinct.contains(k) {
                distinct.push(k);
            }
        }
        let mut out = Vec::new();
        while out.len() < cap.min(distinct.len()) {
            let mut best: Option<(&str, usize)> = None;
            for k in &distinct {
                if out.iter().any(|o: &String| o == k) {
                    continue;
                }
                let c = keys.iter().filter(|x| *x == k).count();
                if best.map_or(true, |(_, bc)| c > bc) {
                    best = Some((k, c));
                }
            }
            out.push(best.unwrap().0.to_owned());
        }
        out
    }

    #[test]
    fn keeps_most_played() {
        let keys = ["a", "b", "a", "c", "b", "a"];
        let vocab = build_vocab(&events(&keys), 2).unwrap();
        assert_eq!(vocab.keys(), &["a".to_owned(), "b".to_owned()]);
        assert_eq!(vocab.keys(), top_by_brute_force(&keys, 2).as_slice());
    }

    #[test]
    fn large_cap_keeps_everything() {
        let vocab = build_vocab(&events(&["x", "y", "z"]), 100).unwrap();
        assert_eq!(vocab.len(), 3);
    }

    #[test]
    fn ties_break_by_first_appearance() {
        let vocab = build_vocab(&events(&["a", "b", "b", "a"]), 1).unwrap();
        assert_eq!(vocab.keys(), &["a".to_owned()]);
    }

    #[test]
    fn empty_events_is_an_error() {
        assert!(build_vocab(&[], 10).is_err());
        assert!(build_vocab(&events(&["a"]), 0).is_err());
    }

    #[test]
    fn filter_cases() {
        let evs = events(&["a", "b", "c", "a"]);
        let all = build_vocab(&evs, 10).unwrap();
        assert_eq!(filter_to_vocab(&evs, &all), evs);
        let other = KeyIndex::from_keys(["zz".to_owned()]).unwrap();
        assert!(filter_to_vocab(&evs, &other).is_empty());
        let some = KeyIndex::from_keys(["a".to_owned(), "c".to_owned()]).unwrap();
        let oracle: Vec<_> = evs.iter().filter(|e| e.song_key != "b").cloned().collect();
        assert_eq!(filter_to_vocab(&evs, &some), oracle);
    }

    proptest! {
        #[test]
        fn vocab_matches_brute_force(raw in prop::collection::vec(0u8..8, 1..60), cap in 1usize..10) {
            let names: Vec<String> = raw.iter().map(|b| format!("s{b}")).collect();
            let keys: Vec<&str> = names.iter().map(String::as_str).collect();
            let vocab = build_vocab(&events(&keys), cap).unwrap();
            let expected = top_by_brute_force(&keys, cap);
            prop_assert_eq!(vocab.keys(), expected.as_slice());
            for (i, k) in vocab.keys().iter().enumerate() {
                prop_assert_eq!(vocab.index(k), Some(i));
                prop_assert_eq!(vocab.key(i), Some(k.as_str()));
            }
        }
    }
}
