//! Listening-log ingestion: parsing, vocabulary, sessions, splits and
//! training examples.

pub mod events;
pub mod examples;
pub mod prepared;
pub mod session;
pub mod split;
pub mod vocab;

pub use events::{parse_events, parse_events_file, ListeningEvent, ParseSummary};
pub use examples::{extract_examples, TrainingExample};
pub use prepared::{prepare, read_prepared, write_prepared, PipelineConfig, PrepareSummary, PreparedDataset};
pub use session::{sessionize, Session, DEFAULT_GAP_SECONDS};
pub use split::{delete_train_overlap, split_dataset, OverlapMode, ShuffleUnit, SplitDataset};
pub use vocab::{build_users, build_vocab, filter_to_vocab, UserMap, VocabMap};
