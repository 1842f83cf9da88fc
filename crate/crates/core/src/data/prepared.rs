//! The prepared-dataset directory and the pipeline that produces it.
//!
//! Layout:
//! - `vocab.txt`: one song key per line, line number = song index
//! - `users.txt`: one user key per line, line number = user index
//! - `train.txt`, `val.txt`, `test.txt`: one session per line, formatted
//!   `user_index SPACE comma-separated song indices`
//! - `summary.json`: counts, seed and ratios

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::data::events::{ListeningEvent, ParseSummary};
use crate::data::session::{sessionize, Session, DEFAULT_GAP_SECONDS};
use crate::data::split::{
    delete_train_overlap, drop_unknown_users, split_dataset, split_records, OverlapMode,
    OverlapReport, ShuffleUnit, SplitDataset, DEFAULT_RATIOS,
};
use crate::data::vocab::{build_users, build_vocab, filter_to_vocab, KeyIndex, UserMap, VocabMap, DEFAULT_VOCAB_CAP};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub vocab_cap: usize,
    pub gap_seconds: i64,
    pub ratios: [f64; 3],
    pub seed: u64,
    pub overlap_mode: OverlapMode,
    pub shuffle_unit: ShuffleUnit,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            vocab_cap: DEFAULT_VOCAB_CAP,
            gap_seconds: DEFAULT_GAP_SECONDS,
            ratios: DEFAULT_RATIOS,
            seed: 0,
            overlap_mode: OverlapMode::default(),
            shuffle_unit: ShuffleUnit::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartCounts {
    pub sessions: usize,
    pub records: usize,
}

impl PartCounts {
    pub fn of(sessions: &[Session]) -> Self {
        Self {
            sessions: sessions.len(),
            records: sessions.iter().map(Session::len).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareSummary {
    pub parse: ParseSummary,
    pub users: usize,
    pub songs: usize,
    /// Plays surviving the vocabulary filter.
    pub records: usize,
    pub sessions: usize,
    pub train: PartCounts,
    pub val: PartCounts,
    pub test: PartCounts,
    pub overlap: OverlapReport,
    pub dropped_unknown_user_sessions: usize,
    pub seed: u64,
    pub ratios: [f64; 3],
    pub gap_seconds: i64,
    pub overlap_mode: OverlapMode,
    pub shuffle_unit: ShuffleUnit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDataset {
    pub vocab: VocabMap,
    pub users: UserMap,
    pub train: Vec<Session>,
    pub val: Vec<Session>,
    pub test: Vec<Session>,
}

impl PreparedDataset {
    pub fn n_songs(&self) -> usize {
        self.vocab.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }
}

/// vocab → filter → sessionize → split → overlap deletion → unknown-user
/// drop.
pub fn prepare(
    events: &[ListeningEvent],
    parse: ParseSummary,
    config: &PipelineConfig,
) -> Result<(PreparedDataset, PrepareSummary)> {
    let vocab = build_vocab(events, config.vocab_cap)?;
    let kept = filter_to_vocab(events, &vocab);
    let users = build_users(&kept);
    let sessions = sessionize(&kept, &vocab, &users, config.gap_seconds)?;
    info!(
        "{} plays in vocabulary of {} songs, {} users, {} sessions",
        kept.len(),
        vocab.len(),
        users.len(),
        sessions.len()
    );
    let split: SplitDataset = match config.shuffle_unit {
        ShuffleUnit::Session => split_dataset(&sessions, config.ratios, config.seed)?,
        ShuffleUnit::Record => split_records(&sessions, config.ratios, config.seed)?,
    };
    let (mut split, overlap) = delete_train_overlap(&split, config.overlap_mode);
    let dropped = drop_unknown_users(&mut split);
    if dropped > 0 {
        warn!("dropped {dropped} val/test sessions of users without training data");
    }
    let summary = PrepareSummary {
        parse,
        users: users.len(),
        songs: vocab.len(),
        records: kept.len(),
        sessions: sessions.len(),
        train: PartCounts::of(&split.train),
        val: PartCounts::of(&split.val),
        test: PartCounts::of(&split.test),
        overlap,
        dropped_unknown_user_sessions: dropped,
        seed: config.seed,
        ratios: config.ratios,
        gap_seconds: config.gap_seconds,
        overlap_mode: config.overlap_mode,
        shuffle_unit: config.shuffle_unit,
    };
    Ok((
        PreparedDataset {
            vocab,
            users,
            train: split.train,
            val: split.val,
            test: split.test,
        },
        summary,
    ))
}

fn write_lines<I: IntoIterator<Item = String>>(path: &Path, lines: I) -> Result<()> {
    let mut buf = Vec::new();
    for line in lines {
        buf.extend_from_slice(line.as_bytes());
        buf.push(b'\n');
    }
    fs::write(path, buf).map_err(Error::at(path))
}

pub fn format_session(s: &Session) -> String {
    let items: Vec<String> = s.items.iter().map(usize::to_string).collect();
    format!("{} {}", s.user, items.join(","))
}

pub fn parse_session(line: &str) -> Result<Session> {
    let bad = || Error::Format(format!("bad session line {line:?}"));
    let (user, items) = line.split_once(' ').ok_or_else(bad)?;
    let user = user.parse().map_err(|_| bad())?;
    let items = items
        .split(',')
        .map(|x| x.parse::<usize>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Session::new(user, items))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = fs::File::open(path).map_err(Error::at(path))?;
    BufReader::new(file)
        .lines()
        .map(|l| l.map_err(Error::at(path)))
        .collect()
}

fn read_sessions(path: &Path, n_users: usize, n_songs: usize) -> Result<Vec<Session>> {
    let mut out = Vec::new();
    for line in read_lines(path)? {
        if line.is_empty() {
            continue;
        }
        let s = parse_session(&line)?;
        if s.user >= n_users {
            return Err(Error::Format(format!("user {} out of range in {}", s.user, path.display())));
        }
        if let Some(&bad) = s.items.iter().find(|&&i| i >= n_songs) {
            return Err(Error::Format(format!("song {bad} out of range in {}", path.display())));
        }
        out.push(s);
    }
    Ok(out)
}

pub fn write_prepared(dir: &Path, data: &PreparedDataset, summary: &PrepareSummary) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::at(dir))?;
    write_lines(&dir.join("vocab.txt"), data.vocab.keys().iter().cloned())?;
    write_lines(&dir.join("users.txt"), data.users.keys().iter().cloned())?;
    for (name, part) in [("train.txt", &data.train), ("val.txt", &data.val), ("test.txt", &data.test)] {
        write_lines(&dir.join(name), part.iter().map(format_session))?;
    }
    let path = dir.join("summary.json");
    let mut f = fs::File::create(&path).map_err(Error::at(&path))?;
    serde_json::to_writer_pretty(&mut f, summary)?;
    f.write_all(b"\n").map_err(Error::at(&path))?;
    Ok(())
}

pub fn read_prepared(dir: &Path) -> Result<PreparedDataset> {
    let vocab = KeyIndex::from_keys(read_lines(&dir.join("vocab.txt"))?)?;
    let users = KeyIndex::from_keys(read_lines(&dir.join("users.txt"))?)?;
    let (nu, ns) = (users.len(), vocab.len());
    Ok(PreparedDataset {
        train: read_sessions(&dir.join("train.txt"), nu, ns)?,
        val: read_sessions(&dir.join("val.txt"), nu, ns)?,
        test: read_sessions(&dir.join("test.txt"), nu, ns)?,
        vocab,
        users,
    })
}

pub fn read_summary(dir: &Path) -> Result<PrepareSummary> {
    let path = dir.join("summary.json");
    let file = fs::File::open(&path).map_err(Error::at(&path))?;
    Ok(serde_json::from_reader(file)?)
}
