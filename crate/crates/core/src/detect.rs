//! Threshold calibration, anomaly flagging and event-based scoring.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::parse_finite;
use crate::error::{Error, Result};
use crate::ground_truth::FaultEvent;

pub const DEFAULT_MULTIPLIER: f64 = 3.0;

/// `value = mean + multiplier · std` over training reconstruction errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorThreshold {
    pub mean: f64,
    pub std: f64,
    pub multiplier: f64,
    pub value: f64,
}

/// Mean and population standard deviation of `errors`, combined as
/// `mean + multiplier · std`.
pub fn compute_threshold(errors: &[f64], multiplier: f64) -> Result<DetectorThreshold> {
    if errors.is_empty() {
        return Err(Error::data("no training errors to calibrate a threshold"));
    }
    if let Some(bad) = errors.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(Error::data(format!("invalid reconstruction error {bad}")));
    }
    if !(multiplier.is_finite() && multiplier >= 0.0) {
        return Err(Error::config(format!(
            "threshold multiplier {multiplier} must be >= 0"
        )));
    }
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    Ok(DetectorThreshold {
        mean,
        std,
        multiplier,
        value: mean + multiplier * std,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyPoint {
    pub timestamp: i64,
    pub error: f64,
}

/// A flagged point or a run of merged points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyEvent {
    pub start: i64,
    pub end: i64,
    pub peak_error: f64,
}

impl From<AnomalyPoint> for AnomalyEvent {
    fn from(p: AnomalyPoint) -> Self {
        AnomalyEvent {
            start: p.timestamp,
            end: p.timestamp,
            peak_error: p.error,
        }
    }
}

/// Points whose error is strictly above the threshold, stamped with the
/// end timestamp of their window.
pub fn flag_anomalies(
    errors: &[f64],
    end_timestamps: &[i64],
    threshold: &DetectorThreshold,
) -> Result<Vec<AnomalyPoint>> {
    if errors.len() != end_timestamps.len() {
        return Err(Error::shape(format!(
            "{} errors but {} timestamps",
            errors.len(),
            end_timestamps.len()
        )));
    }
    Ok(errors
        .iter()
        .zip(end_timestamps)
        .filter(|(e, _)| **e > threshold.value)
        .map(|(&error, &timestamp)| AnomalyPoint { timestamp, error })
        .collect())
}

/// Greedy left-to-right merge: a point joins the current event when it is
/// at most `max_gap` seconds after the previous point.
pub fn merge_consecutive_anomalies(
    points: &[AnomalyPoint],
    max_gap: i64,
) -> Result<Vec<AnomalyEvent>> {
    if max_gap < 0 {
        return Err(Error::config(format!("max_gap {max_gap} is negative")));
    }
    let mut out: Vec<AnomalyEvent> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if i > 0 && p.timestamp < points[i - 1].timestamp {
            return Err(Error::Order {
                line: i + 1,
                message: format!(
                    "anomaly at {} precedes previous at {}",
                    p.timestamp,
                    points[i - 1].timestamp
                ),
            });
        }
        match out.last_mut() {
            Some(ev) if p.timestamp - ev.end <= max_gap => {
                ev.end = p.timestamp;
                ev.peak_error = ev.peak_error.max(p.error);
            }
            _ => out.push((*p).into()),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMode {
    /// Match interval `[start − lead, start]`.
    LeadOnly,
    /// Match interval `[start − lead, end]`.
    LeadPlusDuration,
}

impl std::str::FromStr for ScoringMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lead_only" => Ok(ScoringMode::LeadOnly),
            "lead_plus_duration" => Ok(ScoringMode::LeadPlusDuration),
            other => Err(Error::config(format!("unknown scoring mode {other:?}"))),
        }
    }
}

impl ScoringMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoringMode::LeadOnly => "lead_only",
            ScoringMode::LeadPlusDuration => "lead_plus_duration",
        }
    }

    /// Seconds in which an anomaly counts as detecting `fault`.
    pub fn match_interval(self, fault: &FaultEvent, lead_window: i64) -> (i64, i64) {
        let end = match self {
            ScoringMode::LeadOnly => fault.start,
            ScoringMode::LeadPlusDuration => fault.end,
        };
        (fault.start - lead_window, end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub lead_window: i64,
    pub mode: ScoringMode,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            lead_window: 10,
            mode: ScoringMode::LeadOnly,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: ScoringMode,
    pub lead_window: i64,
    pub total_faults: usize,
    pub total_anomalies: usize,
    /// Faults with at least one matching anomaly.
    pub true_positives: usize,
    /// Anomalies that match no fault.
    pub false_positives: usize,
    /// Faults with no matching anomaly.
    pub false_negatives: usize,
    /// Anomalies that match at least one fault.
    pub matched_anomalies: usize,
    pub seconds_total: usize,
    pub seconds_agreeing: usize,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub matched_faults: Vec<FaultEvent>,
}

fn intersects(a: (i64, i64), b: (i64, i64)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

/// Scores anomalies against faults.
///
/// A fault counts as detected when any anomaly overlaps its match interval.
/// Precision is the share of anomalies overlapping some match interval.
/// Accuracy is per-second agreement over `span` (inclusive) between
/// seconds covered by anomalies and seconds covered by match intervals.
pub fn score_detections(
    anomalies: &[AnomalyEvent],
    faults: &[FaultEvent],
    config: &ScoringConfig,
    span: (i64, i64),
) -> Result<EvalReport> {
    if span.1 < span.0 {
        return Err(Error::data(format!("empty scoring span {span:?}")));
    }
    if config.lead_window < 0 {
        return Err(Error::config("lead window must be >= 0"));
    }
    let intervals: Vec<(i64, i64)> = faults
        .iter()
        .map(|f| config.mode.match_interval(f, config.lead_window))
        .collect();

    let mut matched_faults = Vec::new();
    for (f, iv) in faults.iter().zip(&intervals) {
        if anomalies.iter().any(|a| intersects((a.start, a.end), *iv)) {
            matched_faults.push(*f);
        }
    }
    let matched_anomalies = anomalies
        .iter()
        .filter(|a| intervals.iter().any(|iv| intersects((a.start, a.end), *iv)))
        .count();

    let len = (span.1 - span.0 + 1) as usize;
    let mut truth = vec![false; len];
    let mut pred = vec![false; len];
    let paint = |mask: &mut Vec<bool>, (a, b): (i64, i64)| {
        let lo = a.max(span.0);
        let hi = b.min(span.1);
        if lo <= hi {
            for s in &mut mask[(lo - span.0) as usize..=(hi - span.0) as usize] {
                *s = true;
            }
        }
    };
    for iv in &intervals {
        paint(&mut truth, *iv);
    }
    for a in anomalies {
        paint(&mut pred, (a.start, a.end));
    }
    let agreeing = truth.iter().zip(&pred).filter(|(t, p)| t == p).count();

    let total_faults = faults.len();
    let total_anomalies = anomalies.len();
    let tp = matched_faults.len();
    let precision = if total_anomalies > 0 {
        matched_anomalies as f64 / total_anomalies as f64
    } else if total_faults == 0 {
        1.0
    } else {
        0.0
    };
    let recall = if total_faults > 0 {
        tp as f64 / total_faults as f64
    } else {
        1.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(EvalReport {
        mode: config.mode,
        lead_window: config.lead_window,
        total_faults,
        total_anomalies,
        true_positives: tp,
        false_positives: total_anomalies - matched_anomalies,
        false_negatives: total_faults - tp,
        matched_anomalies,
        seconds_total: len,
        seconds_agreeing: agreeing,
        precision,
        recall,
        accuracy: agreeing as f64 / len as f64,
        f1,
        matched_faults,
    })
}

impl EvalReport {
    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mode               {}", self.mode.as_str());
        let _ = writeln!(s, "lead_window_s      {}", self.lead_window);
        let _ = writeln!(s, "faults             {}", self.total_faults);
        let _ = writeln!(s, "anomalies          {}", self.total_anomalies);
        let _ = writeln!(s, "true_positives     {}", self.true_positives);
        let _ = writeln!(s, "false_positives    {}", self.false_positives);
        let _ = writeln!(s, "false_negatives    {}", self.false_negatives);
        let _ = writeln!(s, "matched_anomalies  {}", self.matched_anomalies);
        let _ = writeln!(s, "precision          {:.4}", self.precision);
        let _ = writeln!(s, "recall             {:.4}", self.recall);
        let _ = writeln!(s, "accuracy           {:.4}", self.accuracy);
        let _ = writeln!(s, "f1                 {:.4}", self.f1);
        s
    }
}

pub fn anomalies_to_csv(points: &[AnomalyPoint]) -> String {
    let mut out = String::from("timestamp,error\n");
    for p in points {
        let _ = writeln!(out, "{},{}", p.timestamp, p.error);
    }
    out
}

pub fn events_to_csv(events: &[AnomalyEvent]) -> String {
    let mut out = String::from("start,end,peak_error\n");
    for e in events {
        let _ = writeln!(out, "{},{},{}", e.start, e.end, e.peak_error);
    }
    out
}

pub fn parse_anomaly_csv(text: &str) -> Result<Vec<AnomalyPoint>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let row = raw.trim();
        if row.is_empty() || (idx == 0 && row.starts_with("timestamp")) {
            continue;
        }
        let mut fields = row.split(',').map(str::trim);
        let (Some(t), Some(e), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields in {row:?}"),
            });
        };
        let timestamp = t.parse::<i64>().map_err(|_| Error::Parse {
            line,
            message: format!("invalid timestamp {t:?}"),
        })?;
        out.push(AnomalyPoint {
            timestamp,
            error: parse_finite(e, line)?,
        });
    }
    Ok(out)
}
