use std::io::{BufRead, BufReader, Read};

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Separator placed between artist name and track name in a song key.
pub const SONG_KEY_SEPARATOR: char = '\u{1F}';

/// One play of one song by one user.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ListeningEvent {
    pub user_key: String,
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
    pub song_key: String,
}

impl ListeningEvent {
    pub fn new(user_key: impl Into<String>, timestamp: i64, song_key: impl Into<String>) -> Self {
        Self {
            user_key: user_key.into(),
            timestamp,
            song_key: song_key.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseSummary {
    pub parsed: usize,
    pub skipped: usize,
}

pub fn song_key(artist: &str, track: &str) -> String {
    let mut key = String::with_capacity(artist.len() + track.len() + 1);
    key.push_str(artist);
    key.push(SONG_KEY_SEPARATOR);
    key.push_str(track);
    key
}

/// Parses an ISO-8601 `YYYY-MM-DDTHH:MM:SSZ` timestamp to epoch seconds.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    let naive = s.strip_suffix('Z')?;
    NaiveDateTime::parse_from_str(naive, "%Y-%m-%dT%H:%M:%S")
        .ok()
        .map(|dt| dt.and_utc().timestamp())
}

pub fn format_timestamp(ts: i64) -> Option<String> {
    DateTime::from_timestamp(ts, 0).map(|dt| dt.format("%Y-%m-%dT%H:%M:%SZ").to_string())
}

fn parse_line(line: &str) -> Option<ListeningEvent> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() < 6 {
        return None;
    }
    let user = fields[0];
    let timestamp = parse_timestamp(fields[1].trim())?;
    let key = song_key(fields[3], fields[5]);
    if user.is_empty() || key.len() == SONG_KEY_SEPARATOR.len_utf8() {
        return None;
    }
    Some(ListeningEvent::new(user, timestamp, key))
}

/// Parses last.fm-1k style TSV lines: user, timestamp, artist mbid, artist
/// name, track mbid, track name.
///
/// Malformed lines are skipped and counted; an I/O failure aborts. Input
/// starting with the gzip magic bytes is decompressed transparently.
pub fn parse_events<R: Read>(reader: R) -> Result<(Vec<ListeningEvent>, ParseSummary)> {
    let mut buffered = BufReader::new(reader);
    let is_gzip = {
        let head = buffered.fill_buf()?;
        head.len() >= 2 && head[0] == 0x1f && head[1] == 0x8b
    };
    if is_gzip {
        let decoder = flate2::bufread::MultiGzDecoder::new(buffered);
        parse_lines(BufReader::new(decoder))
    } else {
        parse_lines(buffered)
    }
}

fn parse_lines<R: BufRead>(mut reader: R) -> Result<(Vec<ListeningEvent>, ParseSummary)> {
    let mut events = Vec::new();
    let mut summary = ParseSummary::default();
    let mut raw = Vec::new();
    loop {
        raw.clear();
        if reader.read_until(b'\n', &mut raw)? == 0 {
            break;
        }
        let line = String::from_utf8_lossy(&raw);
        let line = line.trim_end_matches(['\n', '\r']);
        if line.is_empty() {
            continue;
        }
        match parse_line(line) {
            Some(ev) => {
                summary.parsed += 1;
                events.push(ev);
            }
            None => summary.skipped += 1,
        }
    }
    Ok((events, summary))
}

pub fn parse_events_file(path: &std::path::Path) -> Result<(Vec<ListeningEvent>, ParseSummary)> {
    let file = std::fs::File::open(path).map_err(Error::at(path))?;
    parse_events(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    /// Days-from-civil calendar arithmetic, independent of chrono.
    fn epoch_oracle(y: i64, m: i64, d: i64, hh: i64, mm: i64, ss: i64) -> i64 {
        let y = if m <= 2 { y - 1 } else { y };
        let era = y.div_euclid(400);
        let yoe = y - era * 400;
        let mp = (m + 9) % 12;
        let doy = (153 * mp + 2) / 5 + d - 1;
        let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        let days = era * 146097 + doe - 719468;
        days * 86400 + hh * 3600 + mm * 60 + ss
    }

    #[test]
    fn parses_example_line() {
        let input = "u1\t2009-05-04T23:08:57Z\t\tCher\t\tBelieve\n";
        let (events, summary) = parse_events(input.as_bytes()).unwrap();
        assert_eq!(summary, ParseSummary { parsed: 1, skipped: 0 });
        assert_eq!(epoch_oracle(2009, 5, 4, 23, 8, 57), 1241478537);
        assert_eq!(
            events,
            vec![ListeningEvent::new("u1", 1241478537, "Cher\u{1F}Believe")]
        );
    }

    #[test]
    fn empty_stream() {
        let (events, summary) = parse_events(&b""[..]).unwrap();
        assert!(events.is_empty());
        assert_eq!(summary, ParseSummary::default());
    }

    #[test]
    fn short_and_bad_lines_are_skipped() {
        let input = "u1\t2009-05-04T23:08:57Z\t\tCher\n\
                     u1\tnot-a-time\t\tCher\t\tBelieve\n\
                     u2\t2009-05-04T23:08:57Z\tmbid\tA\tmbid\tB\r\n";
        let (events, summary) = parse_events(input.as_bytes()).unwrap();
        assert_eq!(summary, ParseSummary { parsed: 1, skipped: 2 });
        assert_eq!(events[0].user_key, "u2");
    }

    #[test]
    fn gzip_input() {
        let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::fast());
        enc.write_all(b"u1\t2009-05-04T23:08:57Z\t\tCher\t\tBelieve\n")
            .unwrap();
        let bytes = enc.finish().unwrap();
        let (events, _) = parse_events(&bytes[..]).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].timestamp, 1241478537);
    }

    #[test]
    fn timestamps_round_trip() {
        for &(y, m, d, hh, mm, ss) in &[
            (2005, 2, 14, 0, 0, 0),
            (2008, 2, 29, 12, 30, 1),
            (2009, 12, 31, 23, 59, 59),
            (1970, 1, 1, 0, 0, 0),
        ] {
            let ts = epoch_oracle(y, m, d, hh, mm, ss);
            let s = format_timestamp(ts).unwrap();
            assert_eq!(
                s,
                format!("{y:04}-{m:02}-{d:02}T{hh:02}:{mm:02}:{ss:02}Z")
            );
            assert_eq!(parse_timestamp(&s), Some(ts));
        }
    }
}
