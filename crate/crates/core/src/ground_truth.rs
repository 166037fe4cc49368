//! Fault ground truth: recorded fault files, beam-current drops, and merging.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{parse_finite, RawSeries};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultSource {
    Recorded,
    CurrentDrop,
}

impl FaultSource {
    pub fn label(self) -> &'static str {
        match self {
            FaultSource::Recorded => "recorded",
            FaultSource::CurrentDrop => "current_drop",
        }
    }
}

/// Closed interval `[start, end]` of epoch seconds. Point events have
/// `end == start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FaultEvent {
    pub start: i64,
    pub end: i64,
    pub source: FaultSource,
}

impl FaultEvent {
    pub fn point(t: i64, source: FaultSource) -> Self {
        FaultEvent {
            start: t,
            end: t,
            source,
        }
    }
}

/// Parses fault rows `start[,end][,label]`. Fractional seconds are floored.
/// An optional leading header starting with `start` is skipped. Output is
/// sorted by start with exact `(start, end)` duplicates removed.
pub fn parse_fault_events(text: &str) -> Result<Vec<FaultEvent>> {
    let mut events = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let row = raw.trim();
        if row.is_empty() || (idx == 0 && row.starts_with("start")) {
            continue;
        }
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() > 3 {
            return Err(Error::Parse {
                line,
                message: format!("too many fields in {row:?}"),
            });
        }
        let start = parse_finite(fields[0], line)?.floor() as i64;
        let end = match fields.get(1) {
            Some(f) if !f.is_empty() => parse_finite(f, line)?.floor() as i64,
            _ => start,
        };
        if end < start {
            return Err(Error::Range {
                line,
                message: format!("end {end} precedes start {start}"),
            });
        }
        let source = match fields.get(2) {
            Some(&"current_drop") => FaultSource::CurrentDrop,
            _ => FaultSource::Recorded,
        };
        events.push(FaultEvent { start, end, source });
    }
    events.sort_by_key(|e| (e.start, e.end, e.source));
    events.dedup_by_key(|e| (e.start, e.end));
    Ok(events)
}

pub fn faults_to_csv(events: &[FaultEvent]) -> String {
    let mut out = String::from("start,end,label\n");
    for e in events {
        let _ = writeln!(out, "{},{},{}", e.start, e.end, e.source.label());
    }
    out
}

/// Each maximal run of consecutive samples below `threshold` becomes one
/// event spanning its first and last second. A run open at the end of the
/// series closes at the last sample.
pub fn detect_current_drops(current: &RawSeries, threshold: f64) -> Result<Vec<FaultEvent>> {
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::config(format!(
            "current threshold {threshold} must be positive"
        )));
    }
    if current.samples.is_empty() {
        return Err(Error::data("beam current series is empty"));
    }
    let mut events = Vec::new();
    let mut open: Option<(i64, i64)> = None;
    for &(t, v) in &current.samples {
        let sec = t.floor() as i64;
        if v < threshold {
            open = Some(match open {
                Some((s, _)) => (s, sec),
                None => (sec, sec),
            });
        } else if let Some((s, e)) = open.take() {
            events.push(FaultEvent {
                start: s,
                end: e,
                source: FaultSource::CurrentDrop,
            });
        }
    }
    if let Some((s, e)) = open {
        events.push(FaultEvent {
            start: s,
            end: e,
            source: FaultSource::CurrentDrop,
        });
    }
    Ok(events)
}

/// Union of all lists. Events that overlap, or whose gap
/// (`next.start − end`) is at most `coalesce_gap`, become one event that
/// keeps the source of its earliest member.
pub fn merge_event_lists(lists: &[&[FaultEvent]], coalesce_gap: i64) -> Vec<FaultEvent> {
    let mut all: Vec<FaultEvent> = lists.iter().flat_map(|l| l.iter().copied()).collect();
    all.sort_by_key(|e| (e.start, e.end, e.source));
    let mut out: Vec<FaultEvent> = Vec::with_capacity(all.len());
    for e in all {
        match out.last_mut() {
            Some(last) if e.start - last.end <= coalesce_gap => last.end = last.end.max(e.end),
            _ => out.push(e),
        }
    }
    out
}
