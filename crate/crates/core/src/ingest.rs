//! Event-log and follower-edge ingestion.
//!
//! Two line-oriented formats are accepted for events:
//!
//! * JSONL, one object per line with keys `user`, `ts`, `kind`, `id` and an
//!   optional `tags` array.
//! * Headerless CSV `user,ts,kind,id,tags` where `tags` is `;`-joined.
//!
//! Follower edges are headerless CSV `follower,followee`.
//!
//! Malformed lines never abort a parse. They are skipped and tallied in a
//! [`ParseReport`]; only an unreadable stream is fatal. Blank lines are
//! ignored and not counted.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of rejection reasons kept verbatim in a [`ParseReport`].
pub const MAX_REPORTED_REJECTIONS: usize = 10;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("failed to read input: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid time window: start {start} must be < end {end}")]
    InvalidWindow { start: i64, end: i64 },
    #[error("unknown event format `{0}` (expected jsonl or csv)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Tweet,
    Retweet,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Tweet => "tweet",
            EventKind::Retweet => "retweet",
        }
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tweet" => Ok(EventKind::Tweet),
            "retweet" => Ok(EventKind::Retweet),
            other => Err(format!("unknown kind `{other}`")),
        }
    }
}

/// One tweet or retweet. For a retweet, `content_id` names the original
/// tweet being shared, so every event touching the same content carries the
/// same id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub user: String,
    pub timestamp: i64,
    pub kind: EventKind,
    pub content_id: String,
    pub hashtags: Vec<String>,
}

impl Event {
    /// Builds an event, normalizing hashtags and validating the invariants.
    pub fn new(
        user: impl Into<String>,
        timestamp: i64,
        kind: EventKind,
        content_id: impl Into<String>,
        hashtags: impl IntoIterator<Item = impl AsRef<str>>,
    ) -> Result<Self, String> {
        let user = user.into();
        let content_id = content_id.into();
        if user.is_empty() {
            return Err("empty user".into());
        }
        if timestamp < 0 {
            return Err(format!("negative timestamp {timestamp}"));
        }
        if content_id.is_empty() {
            return Err("empty content id".into());
        }
        Ok(Event {
            user,
            timestamp,
            kind,
            content_id,
            hashtags: normalize_hashtags(hashtags),
        })
    }

    pub fn is_retweet(&self) -> bool {
        self.kind == EventKind::Retweet
    }
}

/// Lowercases, strips one leading `#`, drops empty tags and removes
/// duplicates keeping first occurrence order.
pub fn normalize_hashtags(tags: impl IntoIterator<Item = impl AsRef<str>>) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for tag in tags {
        let tag = tag.as_ref().trim();
        let tag = tag.strip_prefix('#').unwrap_or(tag).to_lowercase();
        if !tag.is_empty() && seen.insert(tag.clone()) {
            out.push(tag);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: i64,
    pub end: i64,
}

impl TimeWindow {
    pub fn new(start: i64, end: i64) -> Result<Self, IngestError> {
        if start >= end {
            return Err(IngestError::InvalidWindow { start, end });
        }
        Ok(TimeWindow { start, end })
    }

    /// A window covering every representable non-negative timestamp except
    /// `i64::MAX` itself.
    pub fn unbounded() -> Self {
        TimeWindow {
            start: 0,
            end: i64::MAX,
        }
    }

    #[inline]
    pub fn contains(&self, ts: i64) -> bool {
        self.start <= ts && ts < self.end
    }
}

impl fmt::Display for TimeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FollowEdge {
    pub follower: String,
    pub followee: String,
}

impl FollowEdge {
    pub fn new(follower: impl Into<String>, followee: impl Into<String>) -> Self {
        FollowEdge {
            follower: follower.into(),
            followee: followee.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub lines_read: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub duplicates: u64,
    /// First [`MAX_REPORTED_REJECTIONS`] rejections in line order.
    pub rejections: Vec<Rejection>,
}

impl ParseReport {
    fn reject(&mut self, line: u64, reason: String) {
        self.rejected += 1;
        if self.rejections.len() < MAX_REPORTED_REJECTIONS {
            self.rejections.push(Rejection { line, reason });
        }
    }

    /// Share of read lines that were rejected; 0 for an empty input.
    pub fn rejected_fraction(&self) -> f64 {
        if self.lines_read == 0 {
            0.0
        } else {
            self.rejected as f64 / self.lines_read as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EventFormat {
    #[default]
    Jsonl,
    Csv,
}

impl FromStr for EventFormat {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(EventFormat::Jsonl),
            "csv" => Ok(EventFormat::Csv),
            _ => Err(IngestError::UnknownFormat(s.to_string())),
        }
    }
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct JsonEvent {
    user: String,
    ts: i64,
    kind: EventKind,
    id: Option<String>,
    #[serde(default)]
    tags: Vec<String>,
}

fn event_from_json(line: &str) -> Result<Event, String> {
    let raw: JsonEvent = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let id = raw.id.ok_or_else(|| "missing id".to_string())?;
    Event::new(raw.user, raw.ts, raw.kind, id, raw.tags)
}

fn event_from_csv(record: &csv::ByteRecord) -> Result<Event, String> {
    if record.len() < 4 || record.len() > 5 {
        return Err(format!("expected 4 or 5 fields, found {}", record.len()));
    }
    let field = |i: usize| -> Result<&str, String> {
        std::str::from_utf8(&record[i]).map_err(|_| format!("field {} is not UTF-8", i + 1))
    };
    let user = field(0)?;
    let ts: i64 = field(1)?
        .parse()
        .map_err(|_| format!("bad timestamp `{}`", field(1).unwrap_or("")))?;
    let kind: EventKind = field(2)?.parse()?;
    let id = field(3)?;
    let tags = if record.len() == 5 { field(4)? } else { "" };
    Event::new(user, ts, kind, id, tags.split(';'))
}

/// Splits on `\n`, dropping a trailing `\r`, and numbers lines from 1.
fn numbered_lines(bytes: &[u8]) -> Vec<(u64, &[u8])> {
    bytes
        .split(|&b| b == b'\n')
        .enumerate()
        .map(|(i, l)| (i as u64 + 1, l.strip_suffix(b"\r").unwrap_or(l)))
        .filter(|(_, l)| !l.iter().all(u8::is_ascii_whitespace))
        .collect()
}

/// Parses an event stream. The JSONL path is parallel over lines; output is
/// identical to a sequential parse.
pub fn parse_events<R: Read>(
    mut source: R,
    format: EventFormat,
) -> Result<(Vec<Event>, ParseReport), IngestError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let results: Vec<(u64, Result<Event, String>)> = match format {
        EventFormat::Jsonl => numbered_lines(&bytes)
            .into_par_iter()
            .map(|(n, line)| {
                let parsed = std::str::from_utf8(line)
                    .map_err(|_| "line is not UTF-8".to_string())
                    .and_then(event_from_json);
                (n, parsed)
            })
            .collect(),
        EventFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .flexible(true)
                .from_reader(bytes.as_slice());
            let mut out = Vec::new();
            let mut record = csv::ByteRecord::new();
            loop {
                match reader.read_byte_record(&mut record) {
                    Ok(false) => break,
                    Ok(true) => {
                        let line = record.position().map_or(0, |p| p.line());
                        out.push((line, event_from_csv(&record)));
                    }
                    Err(e) => {
                        let line = e.position().map_or(0, |p| p.line());
                        out.push((line, Err(e.to_string())));
                    }
                }
            }
            out
        }
    };

    let mut report = ParseReport::default();
    let mut events = Vec::with_capacity(results.len());
    for (line, result) in results {
        report.lines_read += 1;
        match result {
            Ok(event) => {
                report.accepted += 1;
                events.push(event);
            }
            Err(reason) => report.reject(line, reason),
        }
    }
    Ok((events, report))
}

/// Parses headerless `follower,followee` CSV. Self-loops are rejected;
/// repeated edges are kept once and counted in `duplicates`.
pub fn parse_follow_edges<R: Read>(
    source: R,
) -> Result<(Vec<FollowEdge>, ParseReport), IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source);
    let mut report = ParseReport::default();
    let mut seen: HashSet<FollowEdge> = HashSet::new();
    let mut edges = Vec::new();
    let mut record = csv::ByteRecord::new();
    loop {
        let more = match reader.read_byte_record(&mut record) {
            Ok(more) => more,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(e) => {
                report.lines_read += 1;
                let line = e.position().map_or(0, |p| p.line());
                report.reject(line, e.to_string());
                continue;
            }
        };
        if !more {
            break;
        }
        report.lines_read += 1;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            report.reject(line, format!("expected 2 fields, found {}", record.len()));
            continue;
        }
        let (Ok(follower), Ok(followee)) = (
            std::str::from_utf8(&record[0]),
            std::str::from_utf8(&record[1]),
        ) else {
            report.reject(line, "field is not UTF-8".into());
            continue;
        };
        if follower.is_empty() || followee.is_empty() {
            report.reject(line, "empty user".into());
            continue;
        }
        if follower == followee {
            report.reject(line, format!("self-loop on `{follower}`"));
            continue;
        }
        let edge = FollowEdge::new(follower, followee);
        if seen.contains(&edge) {
            report.duplicates += 1;
            continue;
        }
        report.accepted += 1;
        seen.insert(edge.clone());
        edges.push(edge);
    }
    Ok((edges, report))
}

/// Events with `start <= timestamp < end`, in input order.
pub fn filter_window(events: &[Event], window: TimeWindow) -> Vec<Event> {
    events
        .iter()
        .filter(|e| window.contains(e.timestamp))
        .cloned()
        .collect()
}

pub fn write_events<W: Write>(
    events: &[Event],
    format: EventFormat,
    out: W,
) -> Result<(), IngestError> {
    match format {
        EventFormat::Jsonl => write_events_jsonl(events, out),
        EventFormat::Csv => write_events_csv(events, out),
    }
}

pub fn write_events_jsonl<W: Write>(events: &[Event], mut out: W) -> Result<(), IngestError> {
    for e in events {
        let raw = JsonEvent {
            user: e.user.clone(),
            ts: e.timestamp,
            kind: e.kind,
            id: Some(e.content_id.clone()),
            tags: e.hashtags.clone(),
        };
        serde_json::to_writer(&mut out, &raw)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_events_csv<W: Write>(events: &[Event], out: W) -> Result<(), IngestError> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for e in events {
        let ts = e.timestamp.to_string();
        let tags = e.hashtags.join(";");
        writer.write_record([
            e.user.as_str(),
            ts.as_str(),
            e.kind.as_str(),
            e.content_id.as_str(),
            tags.as_str(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_follow_edges<W: Write>(edges: &[FollowEdge], out: W) -> Result<(), IngestError> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for e in edges {
        writer.write_record([e.follower.as_str(), e.followee.as_str()])?;
    }
    writer.flush()?;
    Ok(())
}
