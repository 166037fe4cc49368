//! Seeded generator of beam-monitor runs with injected faults.
//!
//! Beam current sits on a noisy plateau and drops to near zero during each
//! fault. Wiresum follows the current with a slow modulation of its own.
//! X/Y positions drift sinusoidally and pick up a step a few seconds before
//! each fault, holding it until the fault ends.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{AlignedFrame, RawSeries, Segment};
use crate::error::{Error, Result};
use crate::ground_truth::{FaultEvent, FaultSource};

// Independent ChaCha stream per signal.
const PLACEMENT_STREAM: u64 = 0;
const CURRENT_STREAM: u64 = 1;
const WIRESUM_STREAM: u64 = 2;
const X_STREAM: u64 = 3;
const Y_STREAM: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub duration: u64,
    pub start_epoch: i64,
    pub seed: u64,
    pub channel_names: [String; 3],
    pub current_plateau: f64,
    pub current_noise_std: f64,
    pub fault_current_level: f64,
    pub wiresum_gain: f64,
    /// Relative amplitude of the slow wiresum modulation.
    pub wiresum_modulation: f64,
    pub wiresum_period: f64,
    pub wiresum_noise_std: f64,
    pub drift_amplitude: f64,
    /// Period of the horizontal drift.
    pub drift_period: f64,
    /// Period of the vertical drift.
    pub drift_period_y: f64,
    pub position_noise_std: f64,
    pub n_faults: usize,
    pub fault_duration_min: u64,
    pub fault_duration_max: u64,
    /// Seconds before a fault at which the position step begins.
    pub precursor_lead: u64,
    pub precursor_step: f64,
    /// Position noise multiplier while the beam is off.
    pub fault_noise_factor: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            duration: 7200,
            start_epoch: 1_639_872_000,
            seed: 1,
            channel_names: ["wiresum".into(), "xpos".into(), "ypos".into()],
            current_plateau: 90.0,
            current_noise_std: 0.5,
            fault_current_level: 0.0,
            wiresum_gain: 1.0,
            wiresum_modulation: 0.05,
            wiresum_period: 600.0,
            wiresum_noise_std: 0.6,
            drift_amplitude: 1.0,
            drift_period: 400.0,
            drift_period_y: 300.0,
            position_noise_std: 0.1,
            n_faults: 8,
            fault_duration_min: 20,
            fault_duration_max: 90,
            precursor_lead: 5,
            precursor_step: 0.8,
            fault_noise_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthRun {
    /// Wiresum, x and y positions.
    pub frame: AlignedFrame,
    pub current: RawSeries,
    pub truth: Vec<FaultEvent>,
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.duration == 0 {
            return Err(Error::config("synthetic duration must be positive"));
        }
        if self.fault_duration_min == 0 || self.fault_duration_min > self.fault_duration_max {
            return Err(Error::config(
                "fault duration range must satisfy 1 <= min <= max",
            ));
        }
        let stds = [
            self.current_noise_std,
            self.wiresum_noise_std,
            self.position_noise_std,
        ];
        if stds.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::config("noise standard deviations must be >= 0"));
        }
        if self.wiresum_period <= 0.0 || self.drift_period <= 0.0 || self.drift_period_y <= 0.0 {
            return Err(Error::config("drift periods must be positive"));
        }
        Ok(())
    }
}

fn noise(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z * std
}

/// One fault per equal time slot, with a guard band on both sides so that
/// precursors and current recoveries never touch a neighbor.
fn place_faults(cfg: &SynthConfig) -> Result<Vec<(u64, u64)>> {
    if cfg.n_faults == 0 {
        return Ok(Vec::new());
    }
    let slot = cfg.duration / cfg.n_faults as u64;
    let guard = cfg.precursor_lead + 1;
    if slot < cfg.fault_duration_max + 2 * guard {
        return Err(Error::config(format!(
            "{} faults of up to {} s do not fit in {} s",
            cfg.n_faults, cfg.fault_duration_max, cfg.duration
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(PLACEMENT_STREAM);
    Ok((0..cfg.n_faults as u64)
        .map(|i| {
            let dur = rng.gen_range(cfg.fault_duration_min..=cfg.fault_duration_max);
            let lo = i * slot + guard;
            let hi = (i + 1) * slot - guard - dur;
            let start = rng.gen_range(lo..=hi);
            (start, start + dur - 1)
        })
        .collect())
}

pub fn generate_run(cfg: &SynthConfig) -> Result<SynthRun> {
    cfg.validate()?;
    let faults = place_faults(cfg)?;
    let n = cfg.duration as usize;
    let mut in_fault = vec![false; n];
    let mut step = vec![false; n];
    for &(s, e) in &faults {
        for t in s.saturating_sub(cfg.precursor_lead)..=e {
            step[t as usize] = true;
        }
        for t in s..=e {
            in_fault[t as usize] = true;
        }
    }

    let stream = |id: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
        r.set_stream(id);
        r
    };
    let mut r_cur = stream(CURRENT_STREAM);
    let mut r_ws = stream(WIRESUM_STREAM);
    let mut r_x = stream(X_STREAM);
    let mut r_y = stream(Y_STREAM);
    let phase_x = r_x.gen_range(0.0..TAU);
    let phase_y = r_y.gen_range(0.0..TAU);

    let mut current = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(3 * n);
    for t in 0..n {
        let tf = t as f64;
        let base = if in_fault[t] {
            cfg.fault_current_level
        } else {
            cfg.current_plateau
        };
        let cur = base + noise(&mut r_cur, cfg.current_noise_std);
        let modulation = 1.0 + cfg.wiresum_modulation * (TAU * tf / cfg.wiresum_period).sin();
        let ws = cfg.wiresum_gain * cur * modulation + noise(&mut r_ws, cfg.wiresum_noise_std);
        let pos_std = if in_fault[t] {
            cfg.position_noise_std * cfg.fault_noise_factor
        } else {
            cfg.position_noise_std
        };
        let offset = if step[t] { cfg.precursor_step } else { 0.0 };
        let x = cfg.drift_amplitude * (TAU * tf / cfg.drift_period + phase_x).sin()
            + offset
            + noise(&mut r_x, pos_std);
        let y = cfg.drift_amplitude * (TAU * tf / cfg.drift_period_y + phase_y).sin() - offset
            + noise(&mut r_y, pos_std);
        current.push(((cfg.start_epoch + t as i64) as f64, cur));
        values.extend_from_slice(&[ws, x, y]);
    }

    let truth = faults
        .iter()
        .map(|&(s, e)| FaultEvent {
            start: cfg.start_epoch + s as i64,
            end: cfg.start_epoch + e as i64,
            source: FaultSource::Recorded,
        })
        .collect();
    Ok(SynthRun {
        frame: AlignedFrame {
            channels: cfg.channel_names.to_vec(),
            segments: vec![Segment {
                start: cfg.start_epoch,
                values,
            }],
        },
        current: RawSeries {
            channel_name: "current".into(),
            samples: current,
        },
        truth,
    })
}
