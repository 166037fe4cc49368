//! Brute-force per-second oracles and random instance generators shared by
//! the integration tests.
#![allow(dead_code)]

pub mod checks;
pub mod gradcheck;

use std::collections::BTreeSet;

use orbitwatch::data::{AlignedFrame, RawSeries, Segment};
use orbitwatch::detect::AnomalyEvent;
use orbitwatch::ground_truth::{FaultEvent, FaultSource};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Channel value in force at second `t`: the sample with the largest
/// timestamp not after `t`.
pub fn value_at(series: &RawSeries, t: i64) -> Option<f64> {
    series
        .samples
        .iter()
        .filter(|(ts, _)| *ts <= t as f64)
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .map(|s| s.1)
}

/// Rows of the aligned grid, one per second.
pub fn ffill_oracle(series: &[RawSeries]) -> Vec<(i64, Vec<f64>)> {
    let start = series
        .iter()
        .map(|s| s.samples[0].0.ceil() as i64)
        .max()
        .unwrap();
    let end = series
        .iter()
        .map(|s| s.samples.last().unwrap().0.ceil() as i64)
        .min()
        .unwrap();
    (start..=end)
        .map(|t| (t, series.iter().map(|s| value_at(s, t).unwrap()).collect()))
        .collect()
}

pub fn frame_rows(frame: &AlignedFrame) -> Vec<(i64, Vec<f64>)> {
    frame.rows().map(|(t, r)| (t, r.to_vec())).collect()
}

pub fn removal_oracle(
    rows: &[(i64, Vec<f64>)],
    faults: &[FaultEvent],
    margin: i64,
) -> Vec<(i64, Vec<f64>)> {
    rows.iter()
        .filter(|(t, _)| {
            !faults
                .iter()
                .any(|f| f.start - margin <= *t && *t <= f.end + margin)
        })
        .cloned()
        .collect()
}

/// End seconds of every window: `k` consecutive present seconds whose start
/// is a multiple of `stride` past the start of its contiguous run.
pub fn window_ends_oracle(present: &BTreeSet<i64>, k: usize, stride: usize) -> Vec<i64> {
    let k = k as i64;
    let mut ends = Vec::new();
    for &s in present {
        let mut run_start = s;
        while present.contains(&(run_start - 1)) {
            run_start -= 1;
        }
        if (s - run_start) % stride as i64 != 0 {
            continue;
        }
        if (s..s + k).all(|t| present.contains(&t)) {
            ends.push(s + k - 1);
        }
    }
    ends
}

/// Maximal runs of below-threshold seconds in a 1 Hz series.
pub fn current_drop_oracle(values: &[(i64, f64)], threshold: f64) -> Vec<(i64, i64)> {
    let below: Vec<bool> = values.iter().map(|(_, v)| *v < threshold).collect();
    let mut out = Vec::new();
    for i in 0..values.len() {
        if below[i] && (i == 0 || !below[i - 1]) {
            let mut j = i;
            while j + 1 < values.len() && below[j + 1] {
                j += 1;
            }
            out.push((values[i].0, values[j].0));
        }
    }
    out
}

/// Counts `(tp, fp, fn, matched_anomalies)` by testing every second of
/// every match interval against every anomaly.
pub fn brute_force_counts(
    anomalies: &[AnomalyEvent],
    faults: &[FaultEvent],
    lead: i64,
    include_duration: bool,
) -> (usize, usize, usize, usize) {
    let interval = |f: &FaultEvent| {
        let end = if include_duration { f.end } else { f.start };
        f.start - lead..=end
    };
    let covers = |a: &AnomalyEvent, s: i64| a.start <= s && s <= a.end;
    let tp = faults
        .iter()
        .filter(|f| interval(f).any(|s| anomalies.iter().any(|a| covers(a, s))))
        .count();
    let matched = anomalies
        .iter()
        .filter(|a| faults.iter().any(|f| interval(f).any(|s| covers(a, s))))
        .count();
    (tp, anomalies.len() - matched, faults.len() - tp, matched)
}

pub fn random_series(rng: &mut ChaCha8Rng, name: &str) -> RawSeries {
    let n = rng.gen_range(1..25);
    let mut t: f64 = rng.gen_range(-5.0..5.0);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        // Mix integer and fractional timestamps.
        t = if rng.gen_bool(0.5) {
            t.floor() + rng.gen_range(1..4) as f64
        } else {
            t + rng.gen_range(0.1..3.0)
        };
        samples.push((t, rng.gen_range(-10.0..10.0)));
    }
    RawSeries::new(name, samples).unwrap()
}

pub fn random_frame(rng: &mut ChaCha8Rng, m: usize) -> AlignedFrame {
    let mut segments = Vec::new();
    let mut t = rng.gen_range(0..100i64);
    for _ in 0..rng.gen_range(1..5) {
        let len = rng.gen_range(1..40usize);
        segments.push(Segment {
            start: t,
            values: (0..len * m).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        });
        t += len as i64 + rng.gen_range(1..10i64);
    }
    AlignedFrame {
        channels: (0..m).map(|i| format!("c{i}")).collect(),
        segments,
    }
}

pub fn random_faults(rng: &mut ChaCha8Rng, n: usize, lo: i64, hi: i64) -> Vec<FaultEvent> {
    (0..n)
        .map(|_| {
            let start = rng.gen_range(lo..hi);
            FaultEvent {
                start,
                end: start + rng.gen_range(0..15),
                source: FaultSource::Recorded,
            }
        })
        .collect()
}

/// Disjoint, sorted anomaly events.
pub fn random_anomalies(rng: &mut ChaCha8Rng, n: usize, lo: i64) -> Vec<AnomalyEvent> {
    let mut t = lo;
    (0..n)
        .map(|_| {
            t += rng.gen_range(1..20);
            let start = t;
            t += rng.gen_range(0..6);
            AnomalyEvent {
                start,
                end: t,
                peak_error: rng.gen_range(0.0..1.0),
            }
        })
        .collect()
}

/// Scalar Adam recursion written out from its textbook definition.
pub fn adam_scalar(theta0: f64, grads: &[f64], lr: f64, b1: f64, b2: f64, eps: f64) -> Vec<f64> {
    let (mut m, mut v, mut theta) = (0.0, 0.0, theta0);
    let mut out = Vec::with_capacity(grads.len());
    for (i, g) in grads.iter().enumerate() {
        let t = (i + 1) as i32;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let m_hat = m / (1.0 - b1.powi(t));
        let v_hat = v / (1.0 - b2.powi(t));
        theta -= lr * m_hat / (v_hat.sqrt() + eps);
        out.push(theta);
    }
    out
}
