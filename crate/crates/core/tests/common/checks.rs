//! Randomized oracle comparisons. Each returns the number of instances
//! checked, or a description of the first mismatch.

use std::collections::BTreeSet;

use orbitwatch::data::{align_and_fill, make_windows, remove_fault_neighborhoods, RawSeries};
use orbitwatch::detect::{score_detections, ScoringConfig, ScoringMode};
use orbitwatch::ground_truth::detect_current_drops;
use rand::Rng;

use super::*;

pub type Checked = Result<usize, String>;

pub fn forward_fill(seed: u64, instances: usize) -> Checked {
    let mut r = rng(seed);
    let mut checked = 0;
    while checked < instances {
        let m = r.gen_range(1..4);
        let series: Vec<RawSeries> = (0..m)
            .map(|i| random_series(&mut r, &format!("s{i}")))
            .collect();
        let expected = ffill_oracle(&series);
        match align_and_fill(&series) {
            Ok(frame) => {
                if frame_rows(&frame) != expected || frame.segments.len() != 1 {
                    return Err(format!("forward fill differs for {series:?}"));
                }
                checked += 1;
            }
            Err(_) if expected.is_empty() => {}
            Err(e) => return Err(format!("unexpected error {e} for {series:?}")),
        }
    }
    Ok(checked)
}

pub fn fault_removal(seed: u64, instances: usize) -> Checked {
    let mut r = rng(seed);
    for _ in 0..instances {
        let frame = random_frame(&mut r, 2);
        let rows = frame_rows(&frame);
        let last = rows.last().unwrap().0;
        let n = r.gen_range(0..6);
        let faults = random_faults(&mut r, n, -20, last + 20);
        let margin = r.gen_range(0..12);
        let kept =
            remove_fault_neighborhoods(&frame, &faults, margin).map_err(|e| e.to_string())?;
        if frame_rows(&kept) != removal_oracle(&rows, &faults, margin) {
            return Err(format!(
                "removal differs for faults {faults:?} margin {margin}"
            ));
        }
        if kept
            .segments
            .windows(2)
            .any(|w| w[1].start <= w[0].end(2) + 1)
        {
            return Err("contiguous rows split across segments".into());
        }
    }
    Ok(instances)
}

pub fn window_contiguity(seed: u64, instances: usize) -> Checked {
    let mut r = rng(seed);
    for _ in 0..instances {
        let m = r.gen_range(1..3);
        let frame = random_frame(&mut r, m);
        let rows = frame_rows(&frame);
        let present: BTreeSet<i64> = rows.iter().map(|(t, _)| *t).collect();
        let k = r.gen_range(1..12);
        let stride = r.gen_range(1..4);
        let expected = window_ends_oracle(&present, k, stride);
        let set = match make_windows(&frame, k, stride) {
            Ok(set) => set,
            Err(_) if expected.is_empty() => continue,
            Err(e) => return Err(e.to_string()),
        };
        if set.end_timestamps != expected {
            return Err(format!("window ends differ (k={k}, stride={stride})"));
        }
        for (i, &end) in set.end_timestamps.iter().enumerate() {
            let item = set.windows.item(i);
            for (j, t) in (end + 1 - k as i64..=end).enumerate() {
                let row = &rows.iter().find(|(s, _)| *s == t).unwrap().1;
                if &item[j * m..(j + 1) * m] != row.as_slice() {
                    return Err(format!("window ending {end} holds wrong row {t}"));
                }
            }
        }
    }
    Ok(instances)
}

pub fn current_drops(seed: u64, instances: usize) -> Checked {
    let mut r = rng(seed);
    for _ in 0..instances {
        let n = r.gen_range(1..80);
        let t0 = r.gen_range(0..1000i64);
        let values: Vec<(i64, f64)> = (0..n)
            .map(|i| {
                let v = if r.gen_bool(0.3) {
                    r.gen_range(0.0..45.0)
                } else {
                    r.gen_range(40.0..100.0)
                };
                (t0 + i, v)
            })
            .collect();
        let series = RawSeries::new(
            "current",
            values.iter().map(|&(t, v)| (t as f64, v)).collect(),
        )
        .unwrap();
        let got: Vec<(i64, i64)> = detect_current_drops(&series, 45.0)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|e| (e.start, e.end))
            .collect();
        if got != current_drop_oracle(&values, 45.0) {
            return Err(format!("current drops differ for {values:?}"));
        }
    }
    Ok(instances)
}

/// Scorer against [`brute_force_counts`], alternating scoring modes.
pub fn scorer(seed: u64, instances: usize) -> Checked {
    let mut r = rng(seed);
    for scenario in 0..instances {
        let nf = r.gen_range(0..=20);
        let na = r.gen_range(0..=50);
        let faults = random_faults(&mut r, nf, 0, 600);
        let anomalies = random_anomalies(&mut r, na, -20);
        let lead = r.gen_range(0..15);
        let mode = if scenario % 2 == 0 {
            ScoringMode::LeadOnly
        } else {
            ScoringMode::LeadPlusDuration
        };
        let cfg = ScoringConfig {
            lead_window: lead,
            mode,
        };
        let rep =
            score_detections(&anomalies, &faults, &cfg, (-50, 1200)).map_err(|e| e.to_string())?;
        let got = (
            rep.true_positives,
            rep.false_positives,
            rep.false_negatives,
            rep.matched_anomalies,
        );
        let want = brute_force_counts(
            &anomalies,
            &faults,
            lead,
            mode == ScoringMode::LeadPlusDuration,
        );
        if got != want {
            return Err(format!(
                "scenario {scenario}: scorer {got:?}, brute force {want:?}"
            ));
        }
    }
    Ok(instances)
}
