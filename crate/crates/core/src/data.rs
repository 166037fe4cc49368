//! Raw series ingestion, 1 Hz alignment with forward fill, chronological
//! split, fault-neighborhood excision, standardization and windowing.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground_truth::FaultEvent;
use crate::nn::Tensor3;

/// One monitor channel as `(epoch seconds, value)` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub channel_name: String,
    pub samples: Vec<(f64, f64)>,
}

impl RawSeries {
    pub fn new(channel_name: impl Into<String>, samples: Vec<(f64, f64)>) -> Result<Self> {
        for w in samples.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Order {
                    line: 0,
                    message: format!("timestamp {} does not follow {}", w[1].0, w[0].0),
                });
            }
        }
        Ok(RawSeries {
            channel_name: channel_name.into(),
            samples,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestamp,value\n");
        for (t, v) in &self.samples {
            let _ = writeln!(out, "{t},{v}");
        }
        out
    }
}

/// Parses `timestamp,value` rows. A leading `timestamp,...` header line is
/// skipped; blank lines are ignored. Line numbers in errors are 1-based.
pub fn parse_series_csv(channel_name: &str, text: &str) -> Result<RawSeries> {
    let mut samples: Vec<(f64, f64)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let row = raw.trim();
        if row.is_empty() || (idx == 0 && row.starts_with("timestamp")) {
            continue;
        }
        let mut fields = row.split(',').map(str::trim);
        let (Some(ts), Some(val), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields in {row:?}"),
            });
        };
        let t = parse_finite(ts, line)?;
        let v = parse_finite(val, line)?;
        if let Some(&(prev, _)) = samples.last() {
            if t <= prev {
                return Err(Error::Order {
                    line,
                    message: format!("timestamp {t} does not follow {prev}"),
                });
            }
        }
        samples.push((t, v));
    }
    Ok(RawSeries {
        channel_name: channel_name.to_string(),
        samples,
    })
}

pub(crate) fn parse_finite(field: &str, line: usize) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            line,
            message: format!("invalid number {field:?}"),
        }),
    }
}

/// A run of consecutive seconds with no missing cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Epoch second of the first row.
    pub start: i64,
    /// Row-major, `channel count` values per row.
    pub values: Vec<f64>,
}

impl Segment {
    pub fn len(&self, m: usize) -> usize {
        self.values.len() / m
    }

    /// Epoch second of the last row.
    pub fn end(&self, m: usize) -> i64 {
        self.start + self.len(m) as i64 - 1
    }
}

/// Multi-channel series on a 1 Hz grid, split into contiguous segments.
/// Consecutive segments are separated by at least one missing second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedFrame {
    pub channels: Vec<String>,
    pub segments: Vec<Segment>,
}

impl AlignedFrame {
    pub fn empty(channels: Vec<String>) -> Self {
        AlignedFrame {
            channels,
            segments: Vec::new(),
        }
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn row_count(&self) -> usize {
        let m = self.channel_count();
        self.segments.iter().map(|s| s.len(m)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.row_count() == 0
    }

    pub fn start_epoch(&self) -> Option<i64> {
        self.segments.first().map(|s| s.start)
    }

    pub fn end_epoch(&self) -> Option<i64> {
        let m = self.channel_count();
        self.segments.last().map(|s| s.end(m))
    }

    /// Row offsets at which a new segment begins (the first segment excluded).
    pub fn segment_boundaries(&self) -> Vec<usize> {
        let m = self.channel_count();
        let mut offset = 0;
        let mut out = Vec::new();
        for (i, seg) in self.segments.iter().enumerate() {
            if i > 0 {
                out.push(offset);
            }
            offset += seg.len(m);
        }
        out
    }

    /// Every row as `(epoch second, values)`, in time order.
    pub fn rows(&self) -> impl Iterator<Item = (i64, &[f64])> + '_ {
        let m = self.channel_count();
        self.segments.iter().flat_map(move |seg| {
            seg.values
                .chunks_exact(m)
                .enumerate()
                .map(move |(i, row)| (seg.start + i as i64, row))
        })
    }

    /// Rebuilds a frame from timestamped rows, starting a new segment at
    /// every gap.
    pub fn from_rows<'a>(
        channels: Vec<String>,
        rows: impl IntoIterator<Item = (i64, &'a [f64])>,
    ) -> Self {
        let mut segments: Vec<Segment> = Vec::new();
        let m = channels.len();
        for (t, row) in rows {
            match segments.last_mut() {
                Some(seg) if seg.end(m) + 1 == t => seg.values.extend_from_slice(row),
                _ => segments.push(Segment {
                    start: t,
                    values: row.to_vec(),
                }),
            }
        }
        AlignedFrame { channels, segments }
    }

    /// Single channel as a series with integer timestamps.
    pub fn channel_series(&self, index: usize) -> RawSeries {
        RawSeries {
            channel_name: self.channels[index].clone(),
            samples: self.rows().map(|(t, r)| (t as f64, r[index])).collect(),
        }
    }

    /// `timestamp,<ch1>,<ch2>,...` with a blank line between segments.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestamp");
        for c in &self.channels {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        let m = self.channel_count();
        for (si, seg) in self.segments.iter().enumerate() {
            if si > 0 {
                out.push('\n');
            }
            for (i, row) in seg.values.chunks_exact(m).enumerate() {
                let _ = write!(out, "{}", seg.start + i as i64);
                for v in row {
                    let _ = write!(out, ",{v}");
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Merges channels onto a common 1 Hz grid. Each grid second takes the most
/// recent observation at or before it. The grid runs from the first second
/// at which every channel has been observed to the ceiling of the earliest
/// final observation among the channels.
pub fn align_and_fill(series: &[RawSeries]) -> Result<AlignedFrame> {
    if series.is_empty() {
        return Err(Error::data("no series to align"));
    }
    let mut start = i64::MIN;
    let mut end = i64::MAX;
    for s in series {
        let (Some(first), Some(last)) = (s.samples.first(), s.samples.last()) else {
            return Err(Error::data(format!("series {:?} is empty", s.channel_name)));
        };
        start = start.max(first.0.ceil() as i64);
        end = end.min(last.0.ceil() as i64);
    }
    if start > end {
        return Err(Error::data("channel time supports do not overlap"));
    }
    let m = series.len();
    let rows = (end - start + 1) as usize;
    let mut values = vec![0.0; rows * m];
    for (c, s) in series.iter().enumerate() {
        let mut next = 0usize;
        let mut current = f64::NAN;
        for r in 0..rows {
            let t = (start + r as i64) as f64;
            while next < s.samples.len() && s.samples[next].0 <= t {
                current = s.samples[next].1;
                next += 1;
            }
            values[r * m + c] = current;
        }
    }
    Ok(AlignedFrame {
        channels: series.iter().map(|s| s.channel_name.clone()).collect(),
        segments: vec![Segment { start, values }],
    })
}

/// Earliest `⌊fraction·rows⌋` rows to train, the rest to test.
pub fn chronological_split(
    frame: &AlignedFrame,
    train_fraction: f64,
) -> Result<(AlignedFrame, AlignedFrame)> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(Error::config(format!(
            "train fraction {train_fraction} outside (0, 1]"
        )));
    }
    let total = frame.row_count();
    if total == 0 {
        return Err(Error::data("cannot split an empty frame"));
    }
    let cut = (train_fraction * total as f64).floor() as usize;
    let train = AlignedFrame::from_rows(frame.channels.clone(), frame.rows().take(cut));
    let test = AlignedFrame::from_rows(frame.channels.clone(), frame.rows().skip(cut));
    Ok((train, test))
}

/// Drops every second within `margin` of any fault interval.
pub fn remove_fault_neighborhoods(
    frame: &AlignedFrame,
    faults: &[FaultEvent],
    margin: i64,
) -> Result<AlignedFrame> {
    if margin < 0 {
        return Err(Error::config(format!("margin {margin} is negative")));
    }
    let mut spans: Vec<(i64, i64)> = faults
        .iter()
        .map(|f| (f.start - margin, f.end + margin))
        .collect();
    spans.sort_unstable();
    let mut merged: Vec<(i64, i64)> = Vec::with_capacity(spans.len());
    for (a, b) in spans {
        match merged.last_mut() {
            Some(last) if a <= last.1 + 1 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    let mut cursor = 0usize;
    let kept = frame.rows().filter(|&(t, _)| {
        while cursor < merged.len() && merged[cursor].1 < t {
            cursor += 1;
        }
        !(cursor < merged.len() && merged[cursor].0 <= t)
    });
    Ok(AlignedFrame::from_rows(frame.channels.clone(), kept))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStat {
    pub name: String,
    pub mean: f64,
    pub std: f64,
}

/// Per-channel z-score parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChannelStats {
    pub channels: Vec<ChannelStat>,
}

/// Standard deviations below this are replaced by 1.0.
pub const STD_FLOOR: f64 = 1e-12;

impl ChannelStats {
    /// Mean 0, std 1 for each name.
    pub fn identity(names: &[String]) -> Self {
        ChannelStats {
            channels: names
                .iter()
                .map(|n| ChannelStat {
                    name: n.clone(),
                    mean: 0.0,
                    std: 1.0,
                })
                .collect(),
        }
    }

    pub fn names(&self) -> Vec<String> {
        self.channels.iter().map(|c| c.name.clone()).collect()
    }
}

/// Population mean and std per channel over all rows.
pub fn compute_channel_stats(frame: &AlignedFrame) -> Result<ChannelStats> {
    let n = frame.row_count();
    if n == 0 {
        return Err(Error::data("cannot compute statistics of an empty frame"));
    }
    let m = frame.channel_count();
    let mut sum = vec![0.0; m];
    for (_, row) in frame.rows() {
        for (s, v) in sum.iter_mut().zip(row) {
            *s += v;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    let mut sq = vec![0.0; m];
    for (_, row) in frame.rows() {
        for ((s, v), mu) in sq.iter_mut().zip(row).zip(&mean) {
            *s += (v - mu) * (v - mu);
        }
    }
    Ok(ChannelStats {
        channels: frame
            .channels
            .iter()
            .zip(mean)
            .zip(sq)
            .map(|((name, mean), sq)| {
                let std = (sq / n as f64).sqrt();
                ChannelStat {
                    name: name.clone(),
                    mean,
                    std: if std < STD_FLOOR { 1.0 } else { std },
                }
            })
            .collect(),
    })
}

fn check_channels(frame: &AlignedFrame, stats: &ChannelStats) -> Result<()> {
    if frame.channels != stats.names() {
        return Err(Error::config(format!(
            "frame channels {:?} do not match statistics channels {:?}",
            frame.channels,
            stats.names()
        )));
    }
    Ok(())
}

pub fn standardize(frame: &AlignedFrame, stats: &ChannelStats) -> Result<AlignedFrame> {
    check_channels(frame, stats)?;
    Ok(map_values(frame, stats, |v, s| (v - s.mean) / s.std))
}

/// Inverse of [`standardize`].
pub fn destandardize(frame: &AlignedFrame, stats: &ChannelStats) -> Result<AlignedFrame> {
    check_channels(frame, stats)?;
    Ok(map_values(frame, stats, |v, s| v * s.std + s.mean))
}

fn map_values(
    frame: &AlignedFrame,
    stats: &ChannelStats,
    f: impl Fn(f64, &ChannelStat) -> f64,
) -> AlignedFrame {
    let m = frame.channel_count();
    let segments = frame
        .segments
        .iter()
        .map(|seg| Segment {
            start: seg.start,
            values: seg
                .values
                .iter()
                .enumerate()
                .map(|(i, &v)| f(v, &stats.channels[i % m]))
                .collect(),
        })
        .collect();
    AlignedFrame {
        channels: frame.channels.clone(),
        segments,
    }
}

/// Sliding windows of `k` rows, each tagged with its last row's timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub windows: Tensor3,
    pub end_timestamps: Vec<i64>,
}

/// Builds windows inside each segment; no window crosses a gap.
pub fn make_windows(frame: &AlignedFrame, k: usize, stride: usize) -> Result<WindowSet> {
    if k == 0 || stride == 0 {
        return Err(Error::config("window length and stride must be positive"));
    }
    let m = frame.channel_count();
    let mut data = Vec::new();
    let mut ends = Vec::new();
    for seg in &frame.segments {
        let len = seg.len(m);
        if len < k {
            continue;
        }
        let mut s = 0;
        while s + k <= len {
            data.extend_from_slice(&seg.values[s * m..(s + k) * m]);
            ends.push(seg.start + (s + k - 1) as i64);
            s += stride;
        }
    }
    if ends.is_empty() {
        return Err(Error::data(format!(
            "no contiguous segment of length >= {k}"
        )));
    }
    Ok(WindowSet {
        windows: Tensor3::from_vec(ends.len(), k, m, data)?,
        end_timestamps: ends,
    })
}
